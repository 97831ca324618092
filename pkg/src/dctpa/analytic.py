"""Closed-form references the Monte-Carlo is checked against."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .detector import TransitionSpec, tpa_signal
from .shaper import IDENTITY, Compose, Delay, PhaseMask, apply_mask
from .source import PumpSpec, SourceSpec, deterministic_pair
from .spectral import FrequencyGrid


@dataclass(frozen=True)
class RatioInputs:
    """Down-converted bandwidth B, pump and final-state widths (rad/s), photons per mode n."""

    B: float
    gamma_p: float
    gamma_f: float
    n: float

    def __post_init__(self):
        if not (self.B > 0 and self.gamma_p > 0 and self.gamma_f > 0):
            raise ValueError("bandwidths must be positive")
        if not self.n >= 0:
            raise ValueError("n must be >= 0")


def coherent_incoherent_ratio(inp: RatioInputs) -> float:
    """B / (gamma_p + gamma_f) * (n^2 + n / 2pi) / n^2.

    The n / 2pi term is the low-flux pair contribution; the Monte-Carlo
    engine is semiclassical and only reproduces the n -> inf limit.
    """
    if inp.n == 0:
        raise ValueError("ratio undefined at n = 0")
    return inp.B / (inp.gamma_p + inp.gamma_f) * (1.0 + 1.0 / (2 * np.pi * inp.n))


def dominance_threshold(inp: RatioInputs) -> bool:
    """True when B > (gamma_p + gamma_f) n^2 / (n^2 + n / 2pi)."""
    with np.errstate(divide="ignore"):
        factor = 1.0 / (1.0 + 1.0 / (2 * np.pi * inp.n)) if inp.n > 0 else 0.0
    return bool(inp.B > (inp.gamma_p + inp.gamma_f) * factor)


def square_wave_law(phi):
    """Coherent TPA under a fine-period square-wave mask of magnitude phi, relative to phi = 0."""
    return np.cos(np.asarray(phi) / 2) ** 2


def tl_coherent(src: SourceSpec, pump_omega: float, masks, transition: TransitionSpec):
    """Coherent TPA of the transform-limited pair for each signal mask (unnormalized)."""
    pair = deterministic_pair(src, pump_omega)
    out = []
    for m in masks:
        shaped = pair.with_fields(signal=apply_mask(pair.signal, m))
        out.append(tpa_signal([shaped], transition, n_batches=1).coherent)
    return np.array(out)


def normalize_peak(curve):
    curve = np.asarray(curve, dtype=float)
    peak = curve.max()
    return curve / peak if peak > 0 else curve


def tl_oracle(src: SourceSpec, pump_omega: float, mask: PhaseMask | None, taus,
              transition: TransitionSpec) -> np.ndarray:
    """Normalized coherent delay response of a pair of transform-limited pulses."""
    base = IDENTITY if mask is None else mask
    return normalize_peak(tl_coherent(src, pump_omega,
                                      [Compose((base, Delay(float(t)))) for t in taus],
                                      transition))


def pump_selectivity(pump: PumpSpec, transition: TransitionSpec, grid: FrequencyGrid,
                     pump_centers) -> np.ndarray:
    """Expected pump-averaged lineshape weight at the pump bin, per pump center.

    Exact for the nearest-bin pump model; normalized to peak 1.
    """
    sg = grid.sum_grid()
    masses = transition.bin_masses(sg)
    lo = sg.omegas - sg.bin_width / 2
    hi = sg.omegas + sg.bin_width / 2
    out = []
    for c in np.atleast_1d(pump_centers):
        p = pump.cdf(hi - c) - pump.cdf(lo - c)
        out.append(np.dot(p, masses))
    return normalize_peak(out)


def curve_fwhm(x, y) -> float:
    """Full width at half maximum of a single-peaked sampled curve (linear interpolation)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    half = y[i] / 2
    left = i
    while left > 0 and y[left] > half:
        left -= 1
    right = i
    while right < len(y) - 1 and y[right] > half:
        right += 1
    if y[left] > half or y[right] > half:
        raise ValueError("curve does not fall below half maximum on both sides")
    xl = np.interp(half, [y[left], y[left + 1]], [x[left], x[left + 1]])
    xr = np.interp(half, [y[right], y[right - 1]], [x[right], x[right - 1]])
    return float(xr - xl)


def lineshape_convolution_fwhm(pump: PumpSpec, transition: TransitionSpec,
                               samples: int = 2 ** 18) -> float:
    """FWHM of (pump lineshape * final lineshape), by quadrature on a fine axis."""
    width = 40 * (pump.fwhm_omega + transition.fwhm_omega)
    x = np.linspace(-width, width, samples)
    dx = x[1] - x[0]
    p = pump.density(x)
    L = transition.density(x + transition.omega)
    conv = fftconvolve(p, L, mode="same") * dx
    return curve_fwhm(x, conv)


def tl_delay_fwhm_gaussian(B: float) -> float:
    """Delay-response FWHM |int S(w) e^{i w tau} dw|^2 for a Gaussian S of fwhm B."""
    return 4 * np.sqrt(2) * np.log(2) / B
