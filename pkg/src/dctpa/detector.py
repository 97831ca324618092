"""Two-photon absorption readout of down-converted ensembles.

The sum-frequency amplitude A(W) of every realization is re-indexed relative
to that realization's pump bin (the "pump frame", offset d = W - w_p).  The
ensemble mean amplitude in this frame carries the conjugate-pair part of the
signal; its squared magnitude, weighted by the final-state lineshape averaged
over the pump draws, is the coherent TPA.  The variance remainder is the
incoherent TPA.

Estimators, with W(d) = <L-mass at w_p + d>_pump:

    coherent   = sum_d |<A(d)>|^2 W(d)
    incoherent = sum_d (<|A(d)|^2> - |<A(d)>|^2) W(d)
    total      = coherent + incoherent

Field statistics in the pump frame do not depend on the pump draw, so
``total`` has the same expectation as the direct mean of the lineshape-integrated
|A|^2 but without the pump-sampling noise of the coherent peak.  Phase masks
that depend on the pump frequency (e.g. a delay applied to the idler) break
that assumption; apply relative delays to the signal instead.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .shaper import IDENTITY, Compose, Delay, PhaseMask
from .source import (DownConvertedPair, PumpSpec, SourceSpec, draw_signal, mirror_map,
                     realization_rng)
from .spectral import (ConfigError, FrequencyGrid, convolve_ffts, cross_spectrum, padded_fft,
                       wavelength_to_omega, width_nm_to_omega)

TAIL_TOLERANCE = 1e-3
DEFAULT_BATCHES = 10


@dataclass(frozen=True)
class TransitionSpec:
    omega: float
    fwhm_omega: float
    lineshape: str = "lorentzian"

    def __post_init__(self):
        issues = []
        if not self.omega > 0:
            issues.append(("wavelength", "transition frequency must be positive"))
        if not self.fwhm_omega > 0:
            issues.append(("fwhm", "final-state linewidth must be positive"))
        if self.lineshape not in ("lorentzian", "gaussian"):
            issues.append(("lineshape", f"unknown lineshape {self.lineshape!r}"))
        if issues:
            raise ConfigError(issues)

    @classmethod
    def from_nm(cls, wavelength_nm, fwhm_nm, lineshape="lorentzian"):
        """``wavelength_nm`` is the single-photon equivalent of the two-photon energy."""
        return cls(float(wavelength_to_omega(wavelength_nm)),
                   float(width_nm_to_omega(fwhm_nm, wavelength_nm)), lineshape)

    def cdf(self, omega):
        x = np.asarray(omega, dtype=float) - self.omega
        if self.lineshape == "lorentzian":
            return 0.5 + np.arctan(2 * x / self.fwhm_omega) / np.pi
        return ndtr(x * 2 * np.sqrt(2 * np.log(2)) / self.fwhm_omega)

    def density(self, omega):
        x = np.asarray(omega, dtype=float) - self.omega
        hw = self.fwhm_omega / 2
        if self.lineshape == "lorentzian":
            return hw / np.pi / (x ** 2 + hw ** 2)
        s = self.fwhm_omega / (2 * np.sqrt(2 * np.log(2)))
        return np.exp(-0.5 * (x / s) ** 2) / (s * np.sqrt(2 * np.pi))

    def bin_masses(self, sum_grid: FrequencyGrid) -> np.ndarray:
        """Lineshape probability mass in every bin of the sum-frequency grid."""
        edges = np.concatenate([sum_grid.omegas - sum_grid.bin_width / 2,
                                [sum_grid.omegas[-1] + sum_grid.bin_width / 2]])
        masses = np.diff(self.cdf(edges))
        lost = 1.0 - masses.sum()
        if lost > TAIL_TOLERANCE:
            raise ConfigError([("transition", f"final-state lineshape loses {lost:.2e} of its "
                                              "norm outside the sum-frequency grid")])
        return masses


@dataclass(frozen=True)
class TpaResult:
    total: float
    coherent: float
    incoherent: float
    stderr_total: float
    stderr_coherent: float
    stderr_incoherent: float
    realizations: int
    incoherent_defined: bool = True

    @property
    def ratio(self) -> float:
        return self.coherent / self.incoherent

    @property
    def ratio_rel_stderr(self) -> float:
        """Combined relative standard error of coherent / incoherent."""
        return math.hypot(self.stderr_coherent / self.coherent,
                          self.stderr_incoherent / self.incoherent)


class TpaAccumulator:
    """Streaming pump-frame sums for one batch of realizations."""

    def __init__(self, n_bins: int):
        self.n_bins = n_bins
        self.sum_a = np.zeros(2 * n_bins, dtype=complex)
        self.sum_a2 = np.zeros(2 * n_bins)
        self.pump_hist: dict[int, int] = {}
        self.count = 0

    def add(self, amplitude: np.ndarray, pump_index: int):
        n = self.n_bins
        if not 0 <= pump_index < 2 * n:
            raise ValueError(f"pump bin {pump_index} outside the sum-frequency grid")
        lo, hi = max(0, pump_index - n), min(2 * n, pump_index + n)
        sl = slice(lo - pump_index + n, hi - pump_index + n)
        seg = amplitude[lo:hi]
        self.sum_a[sl] += seg
        self.sum_a2[sl] += seg.real ** 2 + seg.imag ** 2
        self.pump_hist[pump_index] = self.pump_hist.get(pump_index, 0) + 1
        self.count += 1

    def merge(self, other: "TpaAccumulator"):
        self.sum_a += other.sum_a
        self.sum_a2 += other.sum_a2
        for j, c in sorted(other.pump_hist.items()):
            self.pump_hist[j] = self.pump_hist.get(j, 0) + c
        self.count += other.count
        return self

    def weights(self, masses: np.ndarray) -> np.ndarray:
        """Pump-averaged lineshape mass at every pump-frame offset."""
        n = self.n_bins
        w = np.zeros(2 * n)
        for j, c in sorted(self.pump_hist.items()):
            lo, hi = max(0, j - n), min(2 * n, j + n)
            w[lo - j + n:hi - j + n] += c * masses[lo:hi]
        return w / self.count

    def estimate(self, masses: np.ndarray):
        """(total, coherent, incoherent) of this accumulator."""
        w = self.weights(masses)
        mean = self.sum_a / self.count
        coh2 = mean.real ** 2 + mean.imag ** 2
        var = self.sum_a2 / self.count - coh2
        coherent = float(np.dot(coh2, w))
        incoherent = float(np.dot(var, w))
        return coherent + incoherent, coherent, incoherent


def _finish(pooled: TpaAccumulator, per_batch, masses) -> TpaResult:
    total, coherent, incoherent = pooled.estimate(masses)
    if len(per_batch) >= 2:
        se = np.asarray(per_batch).std(axis=0, ddof=1) / np.sqrt(len(per_batch))
    else:
        se = np.full(3, np.nan)
    if not np.all(np.isfinite([total, coherent, incoherent])):
        raise FloatingPointError("non-finite TPA estimate")
    if pooled.count < 2:
        return TpaResult(coherent, coherent, float("nan"), *se, pooled.count, False)
    return TpaResult(total, coherent, incoherent, float(se[0]), float(se[1]), float(se[2]),
                     pooled.count)


def summarize(batches, masses: np.ndarray) -> TpaResult:
    """Pool batch accumulators in order and attach batch-means standard errors."""
    batches = [b for b in batches if b.count > 0]
    if not batches:
        raise ValueError("empty ensemble")
    per = [b.estimate(masses) for b in batches]
    pooled = TpaAccumulator(batches[0].n_bins)
    for b in batches:
        pooled.merge(b)
    return _finish(pooled, per, masses)


def tpa_signal(pairs, transition: TransitionSpec, n_batches: int = DEFAULT_BATCHES) -> TpaResult:
    """TPA of an ensemble of (already shaped) pairs; realization r goes to batch r mod n_batches."""
    batches = None
    masses = None
    grid = None
    for r, pair in enumerate(pairs):
        if grid is None:
            grid = pair.grid
            masses = transition.bin_masses(grid.sum_grid())
            batches = [TpaAccumulator(grid.n_bins) for _ in range(n_batches)]
        elif pair.grid != grid:
            raise ValueError("all pairs must share one grid")
        a = cross_spectrum(pair.signal, pair.idler).amplitude
        batches[r % n_batches].add(a, pair.pump_index)
    if batches is None:
        raise ValueError("empty ensemble")
    return summarize(batches, masses)


def coherent_amplitude(pair: DownConvertedPair) -> complex:
    """Sum-frequency amplitude at the pump bin, A(w_p), by direct O(N) summation."""
    g = pair.grid
    k, j, _ = mirror_map(g, pair.pump_index)
    return complex(np.dot(pair.signal.amplitude[k], pair.idler.amplitude[j]) * g.bin_width)


@dataclass(frozen=True)
class ScanPoint:
    """One Monte-Carlo configuration: pump model plus masks on each beam."""

    pump: PumpSpec
    signal_mask: PhaseMask = IDENTITY
    idler_mask: PhaseMask | None = None


def _mask_plan(grid, points):
    """Distinct mask factors and, per point, (signal key, idler key or None)."""
    masks, factors = [], []

    def key(m):
        for i, q in enumerate(masks):
            if q is m:
                return i
        masks.append(m)
        factors.append(m.factor(grid))
        return len(masks) - 1

    plan = [(key(p.signal_mask), None if p.idler_mask is None else key(p.idler_mask))
            for p in points]
    return factors, plan


def _run_unit(src, points, factors, plan, seed, realizations, n_batches, batch):
    """Batch ``batch`` of every point: realizations r = batch, batch + n_batches, ..."""
    g = src.grid
    accs = [TpaAccumulator(g.n_bins) for _ in points]
    for r in range(batch, realizations, n_batches):
        rng = realization_rng(seed, r)
        u = rng.random()
        signal = draw_signal(src, rng).amplitude
        sig_fft, idl_fft = {}, {}
        for p, (ks, ki), acc in zip(points, plan, accs):
            wp = float(p.pump.center_omega + p.pump.offset(u))
            j0 = int(g.sum_index(wp))
            if ks not in sig_fft:
                sig_fft[ks] = padded_fft(signal * factors[ks])
            if (j0, ki) not in idl_fft:
                k, j, ratio = mirror_map(g, j0)
                idler = np.zeros(g.n_bins, dtype=complex)
                idler[j] = ratio * np.conj(signal[k])
                if ki is not None:
                    idler = idler * factors[ki]
                idl_fft[(j0, ki)] = padded_fft(idler)
            acc.add(convolve_ffts(sig_fft[ks], idl_fft[(j0, ki)], g.bin_width), j0)
    return accs


def _run_unit_star(args):
    return _run_unit(*args)


def simulate(src: SourceSpec, points, transition: TransitionSpec, realizations: int, seed: int,
             n_batches: int = DEFAULT_BATCHES, workers: int = 1) -> list[TpaResult]:
    """Monte-Carlo TPA at every scan point with common random numbers.

    Realization r uses the stream ``(seed, r)`` at every point.  Work units are
    (batch, point chunk); batches are pooled in fixed order, so the result does
    not depend on ``workers``.
    """
    points = list(points)
    if realizations < 2:
        raise ConfigError([("realizations", "need at least 2 realizations")])
    n_batches = min(n_batches, realizations)
    masses = transition.bin_masses(src.grid.sum_grid())
    n_chunks = max(1, math.ceil(workers / n_batches)) if workers > 1 else 1
    bounds = np.linspace(0, len(points), n_chunks + 1).astype(int)
    chunks = [(bounds[i], bounds[i + 1]) for i in range(n_chunks) if bounds[i] < bounds[i + 1]]
    plans = [_mask_plan(src.grid, points[a:b]) for a, b in chunks]
    units = [(src, points[a:b], *plans[c], seed, realizations, n_batches, batch)
             for batch in range(n_batches) for c, (a, b) in enumerate(chunks)]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outputs = ex.map(_run_unit_star, units)
            results = _reduce(outputs, chunks, len(points), n_batches, masses)
    else:
        results = _reduce(map(_run_unit_star, units), chunks, len(points), n_batches, masses)
    return results


def _reduce(outputs, chunks, n_points, n_batches, masses):
    pooled = [None] * n_points
    per_batch = [[] for _ in range(n_points)]
    outputs = iter(outputs)
    for _batch in range(n_batches):
        for a, b in chunks:
            for i, acc in zip(range(a, b), next(outputs)):
                per_batch[i].append(acc.estimate(masses))
                pooled[i] = acc if pooled[i] is None else pooled[i].merge(acc)
    return [_finish(acc, per, masses) for acc, per in zip(pooled, per_batch)]


def delay_response(src: SourceSpec, pump: PumpSpec, transition: TransitionSpec,
                   mask: PhaseMask | None, taus, realizations: int, seed: int,
                   n_batches: int = DEFAULT_BATCHES, workers: int = 1) -> list[TpaResult]:
    """TPA versus signal-idler delay (signal delayed by tau, same seeds at every tau)."""
    base = IDENTITY if mask is None else mask
    points = [ScanPoint(pump, Compose((base, Delay(float(t))))) for t in taus]
    return simulate(src, points, transition, realizations, seed, n_batches, workers)
