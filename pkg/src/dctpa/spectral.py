"""Frequency grids, spectral/temporal fields and the sum-frequency convolution.

All internal quantities are angular frequencies in rad/s and times in s.
Wavelength helpers convert at the I/O boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

C_LIGHT = 299792458.0  # m/s


class ConfigError(ValueError):
    """Invalid configuration. ``issues`` holds ``(field_path, message)`` pairs."""

    def __init__(self, issues):
        if isinstance(issues, str):
            issues = [("", issues)]
        self.issues = list(issues)
        super().__init__("; ".join(f"{p}: {m}" if p else m for p, m in self.issues))


def wavelength_to_omega(wavelength_nm):
    return 2.0 * np.pi * C_LIGHT / (np.asarray(wavelength_nm, dtype=float) * 1e-9)


def omega_to_wavelength(omega):
    """Angular frequency (rad/s) -> vacuum wavelength (nm)."""
    return 2.0 * np.pi * C_LIGHT / np.asarray(omega, dtype=float) * 1e9


def width_nm_to_omega(width_nm, center_nm):
    """Small-width conversion dw = 2 pi c dlambda / lambda^2."""
    return 2.0 * np.pi * C_LIGHT * width_nm * 1e-9 / (center_nm * 1e-9) ** 2


def width_omega_to_nm(width_omega, center_nm):
    return width_omega * (center_nm * 1e-9) ** 2 / (2.0 * np.pi * C_LIGHT) * 1e9


def _is_power_of_two(n):
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform angular-frequency grid; bin ``k`` sits at ``lo + (k + 1/2) * bin_width``."""

    center_omega: float
    span_omega: float
    n_bins: int

    def __post_init__(self):
        issues = []
        if not _is_power_of_two(self.n_bins) or self.n_bins < 64:
            issues.append(("n_bins", f"n_bins must be a power of two >= 64, got {self.n_bins}"))
        if not (np.isfinite(self.span_omega) and self.span_omega > 0):
            issues.append(("span_omega", "span must be positive"))
        elif not self.center_omega - self.span_omega / 2 > 0:
            issues.append(("center_omega", "grid covers non-positive frequencies"))
        if issues:
            raise ConfigError(issues)

    @property
    def bin_width(self) -> float:
        return self.span_omega / self.n_bins

    @property
    def lo(self) -> float:
        return self.center_omega - self.span_omega / 2

    @cached_property
    def omegas(self) -> np.ndarray:
        # built from the center so bins are symmetric about it
        k = np.arange(self.n_bins)
        w = self.center_omega + (k + 0.5 - self.n_bins / 2) * self.bin_width
        w.flags.writeable = False
        return w

    @property
    def time_step(self) -> float:
        return 2.0 * np.pi / self.span_omega

    @property
    def duration(self) -> float:
        return 2.0 * np.pi / self.bin_width

    @cached_property
    def times(self) -> np.ndarray:
        t = (np.arange(self.n_bins) - self.n_bins // 2) * self.time_step
        t.flags.writeable = False
        return t

    def sum_grid(self) -> "FrequencyGrid":
        """Uniform grid of the sum frequencies ``w_k + w_j`` (2 n_bins bins, same spacing)."""
        return FrequencyGrid(2 * self.center_omega + self.bin_width / 2,
                             2 * self.span_omega, 2 * self.n_bins)

    def nearest_bin(self, omega) -> np.ndarray:
        return np.rint((np.asarray(omega) - self.lo) / self.bin_width - 0.5).astype(np.int64)

    def sum_index(self, omega) -> np.ndarray:
        """Index on :meth:`sum_grid` nearest to ``omega`` (bin m = 2 lo + (m + 1) dw)."""
        return np.rint((np.asarray(omega) - 2 * self.lo) / self.bin_width - 1.0).astype(np.int64)


def make_grid(center_omega, span_omega, n_bins) -> FrequencyGrid:
    return FrequencyGrid(float(center_omega), float(span_omega), int(n_bins))


def _frozen(a, dtype=complex):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex amplitude per bin, in sqrt(photon flux per unit angular frequency)."""

    grid: FrequencyGrid
    amplitude: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = _frozen(self.amplitude)
        if amp.shape != (self.grid.n_bins,):
            raise ValueError(f"amplitude has shape {amp.shape}, grid has {self.grid.n_bins} bins")
        object.__setattr__(self, "amplitude", amp)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def flux(self) -> float:
        return float(np.sum(self.intensity) * self.grid.bin_width)

    def scaled(self, factor) -> "SpectralField":
        return SpectralField(self.grid, self.amplitude * factor)


@dataclass(frozen=True, eq=False)
class TemporalField:
    """Slowly varying envelope on ``grid.times`` (reference carrier: the first bin)."""

    grid: FrequencyGrid
    amplitude: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = _frozen(self.amplitude)
        if amp.shape != (self.grid.n_bins,):
            raise ValueError("amplitude length does not match grid")
        object.__setattr__(self, "amplitude", amp)

    @property
    def times(self):
        return self.grid.times

    @property
    def intensity(self):
        return np.abs(self.amplitude) ** 2

    def energy(self) -> float:
        return float(np.sum(self.intensity) * self.grid.time_step)


def to_time(fld: SpectralField) -> TemporalField:
    """e(t) = (2 pi)^-1/2 sum_k E_k exp(-i (w_k - w_0) t) dw, unitary in the Parseval sense."""
    g = fld.grid
    e = sfft.fft(fld.amplitude) * (g.bin_width / np.sqrt(2 * np.pi))
    return TemporalField(g, sfft.fftshift(e))


def to_freq(tfield: TemporalField, grid: FrequencyGrid | None = None) -> SpectralField:
    if grid is not None and grid != tfield.grid:
        raise ValueError("temporal field belongs to a different grid")
    g = tfield.grid
    amp = sfft.ifft(sfft.ifftshift(tfield.amplitude)) * (np.sqrt(2 * np.pi) / g.bin_width)
    return SpectralField(g, amp)


def padded_fft(amplitude: np.ndarray) -> np.ndarray:
    """FFT of ``amplitude`` zero-padded to twice its length (linear-convolution support)."""
    return sfft.fft(amplitude, 2 * amplitude.shape[-1], axis=-1)


def convolve_ffts(fa: np.ndarray, fb: np.ndarray, bin_width: float) -> np.ndarray:
    """Sum-frequency amplitude from two :func:`padded_fft` spectra.

    Returns 2N samples; the last one lies outside the convolution support and is zeroed.
    """
    out = sfft.ifft(fa * fb, axis=-1) * bin_width
    out[..., -1] = 0.0
    return out


def cross_spectrum(es: SpectralField, ei: SpectralField) -> SpectralField:
    """A(W) = sum_k E_s(w_k) E_i(W - w_k) dw on the sum-frequency grid."""
    if es.grid != ei.grid:
        raise ValueError("signal and idler live on different grids")
    g = es.grid
    a = convolve_ffts(padded_fft(es.amplitude), padded_fft(ei.amplitude), g.bin_width)
    return SpectralField(g.sum_grid(), a)
