"""Thermal signal/idler realizations with conjugate frequency-pair correlation.

Each realization draws one pump frequency and one circular-Gaussian signal
spectrum; the idler is the frequency-mirrored conjugate of the signal about
the (bin-rounded) pump frequency, with amplitude ratio sqrt(w_i / w_s).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.special import ndtri

from .spectral import (ConfigError, FrequencyGrid, SpectralField, wavelength_to_omega,
                       width_nm_to_omega)

LINESHAPES = ("gaussian", "lorentzian")
ENVELOPES = ("gaussian", "flattop")
PUMP_CLAMP = 5.0  # lorentzian pump support, in units of fwhm
FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))
EDGE_TOLERANCE = 1e-6


def realization_rng(seed: int, *index: int) -> np.random.Generator:
    """Independent stream for ``(seed, *index)``; identical regardless of call order."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(i) for i in index))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class PumpSpec:
    center_omega: float
    fwhm_omega: float
    lineshape: str = "lorentzian"

    def __post_init__(self):
        issues = []
        if not self.center_omega > 0:
            issues.append(("center", "pump center must be positive"))
        if not self.fwhm_omega > 0:
            issues.append(("fwhm", "pump bandwidth must be positive"))
        if self.lineshape not in LINESHAPES:
            issues.append(("lineshape", f"unknown lineshape {self.lineshape!r}"))
        if issues:
            raise ConfigError(issues)

    @classmethod
    def from_nm(cls, center_nm, fwhm_nm, lineshape="lorentzian"):
        return cls(float(wavelength_to_omega(center_nm)),
                   float(width_nm_to_omega(fwhm_nm, center_nm)), lineshape)

    def with_center(self, center_omega) -> "PumpSpec":
        return replace(self, center_omega=float(center_omega))

    @property
    def max_offset(self) -> float:
        return PUMP_CLAMP * self.fwhm_omega

    def offset(self, u):
        """Map uniform deviates ``u`` in [0, 1) to frequency offsets from the center."""
        u = np.asarray(u, dtype=float)
        if self.lineshape == "gaussian":
            u = np.clip(u, np.finfo(float).tiny, None)
            return ndtri(u) * self.fwhm_omega * FWHM_TO_SIGMA
        # inverse CDF of the lorentzian truncated to +-PUMP_CLAMP fwhm
        hw = self.fwhm_omega / 2
        a = np.arctan(-self.max_offset / hw)
        return hw * np.tan(a + u * (-2 * a))

    def density(self, offset):
        """Normalized probability density of the offsets produced by :meth:`offset`."""
        x = np.asarray(offset, dtype=float)
        if self.lineshape == "gaussian":
            s = self.fwhm_omega * FWHM_TO_SIGMA
            return np.exp(-0.5 * (x / s) ** 2) / (s * np.sqrt(2 * np.pi))
        hw = self.fwhm_omega / 2
        norm = 2 * np.arctan(self.max_offset / hw) / np.pi
        inside = np.abs(x) <= self.max_offset
        return np.where(inside, hw / np.pi / (x ** 2 + hw ** 2) / norm, 0.0)

    def cdf(self, offset):
        from scipy.special import ndtr

        x = np.asarray(offset, dtype=float)
        if self.lineshape == "gaussian":
            return ndtr(x / (self.fwhm_omega * FWHM_TO_SIGMA))
        hw = self.fwhm_omega / 2
        a = np.arctan(self.max_offset / hw)
        xc = np.clip(x, -self.max_offset, self.max_offset)
        return (np.arctan(xc / hw) + a) / (2 * a)


def sample_pump(pump: PumpSpec, rng: np.random.Generator) -> float:
    """One pump-frequency draw; consumes exactly one uniform deviate."""
    return float(pump.center_omega + pump.offset(rng.random()))


@dataclass(frozen=True)
class SourceSpec:
    """Down-converted spectrum on ``grid``: envelope shape, fwhm B and mean photons per mode n."""

    grid: FrequencyGrid
    fwhm_omega: float
    envelope: str = "gaussian"
    center_omega: float | None = None
    n: float = 1.0

    def __post_init__(self):
        issues = []
        if not self.fwhm_omega > 0:
            issues.append(("fwhm", "envelope bandwidth B must be positive"))
        if not self.n >= 0:
            issues.append(("n", "mean photon number must be >= 0"))
        if self.envelope not in ENVELOPES:
            issues.append(("envelope", f"unknown envelope {self.envelope!r}"))
        if self.center_omega is None:
            object.__setattr__(self, "center_omega", self.grid.center_omega)
        if not issues:
            prof = self.profile
            if max(prof[0], prof[-1]) >= EDGE_TOLERANCE:
                issues.append(("coverage", "envelope tails exceed 1e-6 of peak at the grid edges; "
                                       "widen the grid span"))
            if not np.any(np.abs(self.grid.omegas - self.center_omega) <= self.fwhm_omega / 2):
                issues.append(("fwhm", "envelope fwhm not resolved by the grid"))
        if issues:
            raise ConfigError(issues)

    @cached_property
    def profile(self) -> np.ndarray:
        """Envelope with unit peak, per bin."""
        x = self.grid.omegas - self.center_omega
        if self.envelope == "gaussian":
            return np.exp(-4 * np.log(2) * (x / self.fwhm_omega) ** 2)
        return (np.abs(x) <= self.fwhm_omega / 2).astype(float)

    @cached_property
    def spectral_density(self) -> np.ndarray:
        """Mean |E_s|^2 per bin; its average over the envelope fwhm equals ``n``."""
        x = self.grid.omegas - self.center_omega
        core = self.profile[np.abs(x) <= self.fwhm_omega / 2]
        s = self.n * self.profile / core.mean()
        s.flags.writeable = False
        return s

    def check_pump_coverage(self, pump: PumpSpec, extra_offset: float = 0.0):
        """Raise if a plausible pump draw mirrors envelope power off the grid."""
        g = self.grid
        issues = []
        reach = pump.max_offset + abs(extra_offset)
        for wp in (pump.center_omega - reach, pump.center_omega + reach):
            j0 = int(g.sum_index(wp))
            if not 0 <= j0 < 2 * g.n_bins:
                issues.append(("pump", "pump frequency outside the sum-frequency grid"))
                break
            j = j0 - np.arange(g.n_bins)
            off = (j < 0) | (j >= g.n_bins)
            if np.any(self.profile[off] >= EDGE_TOLERANCE):
                issues.append(("grid", "idler mirror of the envelope leaves the grid "
                                       "for plausible pump frequencies"))
                break
        if issues:
            raise ConfigError(issues)


@dataclass(frozen=True, eq=False)
class DownConvertedPair:
    signal: SpectralField
    idler: SpectralField
    pump_omega_sample: float = field(default=np.nan)

    def __post_init__(self):
        if self.signal.grid != self.idler.grid:
            raise ValueError("signal and idler must share a grid")

    @property
    def grid(self) -> FrequencyGrid:
        return self.signal.grid

    @property
    def pump_index(self) -> int:
        """Sum-grid bin of the rounded pump frequency."""
        return int(self.grid.sum_index(self.pump_omega_sample))

    def with_fields(self, signal=None, idler=None) -> "DownConvertedPair":
        return DownConvertedPair(signal if signal is not None else self.signal,
                                 idler if idler is not None else self.idler,
                                 self.pump_omega_sample)


def mirror_map(grid: FrequencyGrid, pump_index: int):
    """Signal bins with an on-grid partner, their idler bins and sqrt(w_i/w_s)."""
    k = np.arange(grid.n_bins)
    j = pump_index - k
    ok = (j >= 0) & (j < grid.n_bins)
    k, j = k[ok], j[ok]
    w = grid.omegas
    return k, j, np.sqrt(w[j] / w[k])


def conjugate_idler(signal: SpectralField, pump_omega: float) -> SpectralField:
    """E_i(w_p - w) = sqrt((w_p - w) / w) E_s*(w), bin by bin about the rounded pump."""
    g = signal.grid
    k, j, r = mirror_map(g, int(g.sum_index(pump_omega)))
    idler = np.zeros(g.n_bins, dtype=complex)
    idler[j] = r * np.conj(signal.amplitude[k])
    return SpectralField(g, idler)


def draw_signal(src: SourceSpec, rng: np.random.Generator) -> SpectralField:
    """Circular complex Gaussian spectrum with mean |E|^2 = spectral density."""
    z = rng.standard_normal((2, src.grid.n_bins))
    amp = (z[0] + 1j * z[1]) * np.sqrt(src.spectral_density / 2)
    return SpectralField(src.grid, amp)


def generate_pair(src: SourceSpec, pump: PumpSpec, rng: np.random.Generator) -> DownConvertedPair:
    wp = sample_pump(pump, rng)
    signal = draw_signal(src, rng)
    return DownConvertedPair(signal, conjugate_idler(signal, wp), wp)


def generate_ensemble(src: SourceSpec, pump: PumpSpec, seed: int, realizations: int,
                      start: int = 0):
    """Yield pairs for realization indices ``start .. start + realizations - 1``."""
    for r in range(start, start + realizations):
        yield generate_pair(src, pump, realization_rng(seed, r))


def deterministic_pair(src: SourceSpec, pump_omega: float) -> DownConvertedPair:
    """Transform-limited pair: flat-phase sqrt(spectral density) and its conjugate mirror."""
    signal = SpectralField(src.grid, np.sqrt(src.spectral_density).astype(complex))
    return DownConvertedPair(signal, conjugate_idler(signal, pump_omega), float(pump_omega))
