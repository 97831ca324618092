"""Acceptance criteria 1-10 at their stated tolerances.

Each test prints one ``criterion N: PASS|FAIL ...`` line (visible under ``pytest -v``)
and then asserts.  Run ``python tests/test_acceptance.py`` for the summary alone.
The full suite takes roughly ten minutes on one core.
"""
from __future__ import annotations

import sys
from dataclasses import replace
from functools import lru_cache

import numpy as np
import pytest
from scipy import stats

from dctpa import analytic, cli, harness
from dctpa.detector import ScanPoint, TransitionSpec, simulate, tpa_signal
from dctpa.ocdma import ChannelSpec, eavesdrop, receive, transmit
from dctpa.source import PumpSpec, SourceSpec, generate_ensemble
from dctpa.spectral import make_grid, omega_to_wavelength, width_omega_to_nm

# realizations for the scans whose criteria do not fix R (fig2a keeps its preset R = 2000)
SCAN_R = 500

pytestmark = pytest.mark.slow


@lru_cache(maxsize=None)
def scan(name: str, realizations: int | None = None):
    cfg = harness.load_preset(name)
    if realizations is not None:
        cfg = replace(cfg, realizations=realizations)
    res = simulate(cfg.source, harness.scan_points(cfg), cfg.transition, cfg.realizations,
                   cfg.seed, cfg.batches)
    col = lambda f: np.array([getattr(r, f) for r in res])
    return cfg, cfg.scan.values, {f: col(f) for f in (
        "total", "coherent", "incoherent", "stderr_total", "stderr_coherent",
        "stderr_incoherent")}, harness.oracle_curve(cfg)


def report(n: int, ok: bool, detail: str, capsys=None):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    return ok


def fit_scale(y, model):
    return float(np.dot(y, model) / np.dot(model, model))


def criterion_1():
    cfg, tau, mc, oracle = scan("fig2a")
    coh = mc["coherent"]
    s = fit_scale(coh, oracle)
    dev = np.max(np.abs(coh - s * oracle)) / coh.max()
    f_mc, f_or = analytic.curve_fwhm(tau, coh), analytic.curve_fwhm(tau, oracle)
    ok = dev < 0.05 and abs(f_mc / f_or - 1) < 0.10
    return ok, (f"delay scan R={cfg.realizations}, {cfg.grid.n_bins} bins: max deviation "
                f"{100 * dev:.3f}% of peak (limit 5%); fwhm {f_mc:.2f} fs vs oracle {f_or:.2f} fs "
                f"(limit 10%; quoted scale 23 fs)")


def _flat(inc, se):
    spread = np.ptp(inc)
    limit = 0.02 * inc.mean() + 3 * se.max()
    return spread < limit, spread / inc.mean(), limit / inc.mean()


def criterion_2():
    _, _, a, _ = scan("fig2a")
    cfg, lam, b, _ = scan("fig2b", SCAN_R)
    ok_a, sa, la = _flat(a["incoherent"], a["stderr_incoherent"])
    ok_b, sb, lb = _flat(b["incoherent"], b["stderr_incoherent"])
    gamma = width_omega_to_nm(cfg.pump.fwhm_omega + cfg.transition.fwhm_omega,
                              float(omega_to_wavelength(cfg.pump.center_omega)))
    reach = np.max(np.abs(lam - omega_to_wavelength(cfg.pump.center_omega))) / gamma
    return ok_a and ok_b, (f"incoherent spread {100 * sa:.2f}% over delay (limit {100 * la:.2f}%),"
                           f" {100 * sb:.2f}% over +-{reach:.1f}(gp+gf) detuning "
                           f"(limit {100 * lb:.2f}%)")


def criterion_3():
    cfg, lam, mc, _ = scan("fig2b", SCAN_R)
    centre_nm = float(omega_to_wavelength(cfg.pump.center_omega))
    conv_nm = width_omega_to_nm(analytic.lineshape_convolution_fwhm(cfg.pump, cfg.transition),
                                centre_nm)
    fwhm_nm = analytic.curve_fwhm(lam, mc["coherent"])
    gamma_nm = width_omega_to_nm(cfg.pump.fwhm_omega + cfg.transition.fwhm_omega, centre_nm)
    far = np.abs(np.abs(lam - centre_nm) - 10 * gamma_nm) < 1e-9
    frac = mc["coherent"][far] / mc["total"][far]
    width_ok = abs(fwhm_nm / conv_nm - 1) < 0.20
    tail_ok = bool(np.all(frac < 0.01))
    return width_ok and tail_ok, (
        f"coherent fwhm {fwhm_nm:.4f} nm vs lineshape convolution {conv_nm:.4f} nm "
        f"(limit 20%; quoted 0.12 nm) {'ok' if width_ok else 'off'}; coherent/total at "
        f"10(gp+gf) = {', '.join(f'{100 * f:.1f}%' for f in frac)} (limit 1%) "
        f"{'ok' if tail_ok else 'off'}")


def ratio_config():
    """B/(gp+gf) = 50 on a 4096-bin grid."""
    g = make_grid(1.8233e15, 9.88e14, 4096)
    B = 1.764e14
    gamma = B / 50
    src = SourceSpec(g, B, n=1000.0)
    pump = PumpSpec(2 * g.center_omega, gamma / 3)
    transition = TransitionSpec(2 * g.center_omega, 2 * gamma / 3)
    return src, pump, transition


def criterion_4():
    src, pump, transition = ratio_config()
    res = simulate(src, [ScanPoint(pump)], transition, 2000, seed=21)[0]
    expected = analytic.coherent_incoherent_ratio(analytic.RatioInputs(
        src.fwhm_omega, pump.fwhm_omega, transition.fwhm_omega, src.n))
    rse = res.ratio_rel_stderr
    off = res.ratio / expected - 1
    ok = abs(off) < 3 * rse
    return ok, (f"coherent/incoherent {res.ratio:.2f} vs B/(gp+gf) {expected:.2f}: "
                f"{100 * off:+.2f}% (limit 3 x {100 * rse:.2f}%)")


def criterion_5():
    cfg, phi, mc, _ = scan("fig3c", SCAN_R)
    coh, se = mc["coherent"], mc["stderr_coherent"]
    at = lambda x: int(np.argmin(np.abs(phi - x)))
    mins = [at(k * np.pi) for k in (1, 3, 5)]
    maxs = [at(k * np.pi) for k in (2, 4, 6)]
    min_ok = all(coh[i] < 0.02 * coh.max() + 3 * se[i] for i in mins)
    max_ok = all(abs(coh[i] / coh[0] - 1) < 0.03 for i in maxs)
    rms = float(np.sqrt(np.mean((coh / coh[0] - analytic.square_wave_law(phi)) ** 2)))
    ok = min_ok and max_ok and rms < 0.05
    return ok, (f"minima/max at pi,3pi,5pi: {', '.join(f'{coh[i] / coh.max():.1e}' for i in mins)}"
                f"; maxima/phi0 at 2pi,4pi,6pi: "
                f"{', '.join(f'{coh[i] / coh[0]:.4f}' for i in maxs)}; rms vs cos^2 {rms:.4f}")


def criterion_6():
    cfg, tau, mc, oracle = scan("fig3b", SCAN_R)
    coh = mc["coherent"]
    c = int(np.argmin(np.abs(tau)))
    left = int(np.argmax(coh[:c]))
    right = c + int(np.argmax(coh[c:]))
    split = coh[c] < coh[left] and coh[c] < coh[right] and coh[c] <= coh[c - 1:c + 2].min()
    s = fit_scale(coh, oracle)
    dev = np.max(np.abs(coh - s * oracle)) / coh.max()
    ok = split and dev < 0.05
    return ok, (f"tau=0 at {coh[c] / coh.max():.1e} of peak, maxima at {tau[left]:+.0f} and "
                f"{tau[right]:+.0f} fs; max deviation from oracle {100 * dev:.3f}% of peak "
                "(limit 5%)")


def brute_force_tpa(pairs, masses):
    n = pairs[0].grid.n_bins
    dw = pairs[0].grid.bin_width
    A = np.zeros((len(pairs), 2 * n), complex)
    for r, p in enumerate(pairs):
        for k in range(n):
            for j in range(n):
                A[r, k + j] += p.signal.amplitude[k] * p.idler.amplitude[j] * dw
    coherent = incoherent = 0.0
    for d in range(-n, n):
        idx = [p.pump_index + d for p in pairs]
        vals = np.array([A[r, m] if 0 <= m < 2 * n else 0 for r, m in enumerate(idx)])
        w = np.mean([masses[m] if 0 <= m < 2 * n else 0 for m in idx])
        coherent += abs(vals.mean()) ** 2 * w
        incoherent += (np.mean(np.abs(vals) ** 2) - abs(vals.mean()) ** 2) * w
    return coherent, incoherent


def criterion_7():
    g = make_grid(100.0, 40.0, 64)
    src = SourceSpec(g, 8.0, n=2.0)
    pump = PumpSpec(200.0, 2.0)
    transition = TransitionSpec(200.0, 2.0, "gaussian")
    pairs = list(generate_ensemble(src, pump, 31, 8))
    sg = g.sum_grid()
    edges = np.append(sg.omegas - g.bin_width / 2, sg.omegas[-1] + g.bin_width / 2)
    sigma = transition.fwhm_omega / (2 * np.sqrt(2 * np.log(2)))
    masses = np.diff(stats.norm.cdf(edges, loc=transition.omega, scale=sigma))
    coh, inc = brute_force_tpa(pairs, masses)
    res = simulate(src, [ScanPoint(pump)], transition, 8, seed=31, n_batches=4)[0]
    direct = tpa_signal(pairs, transition)
    err = max(abs(res.coherent / coh - 1), abs(res.incoherent / inc - 1),
              abs(direct.total / (coh + inc) - 1))
    return err < 1e-9, f"64 bins, R=8: max relative difference {err:.2e} (limit 1e-9)"


def criterion_8():
    cfg = harness.load_preset("ocdma-demo")
    src, pump = cfg.source, cfg.pump
    g = src.grid
    core = np.flatnonzero(np.abs(g.omegas - src.center_omega) <= src.fwhm_omega / 2)
    bins = core[:: max(1, len(core) // 64)]
    R = 10_000
    amps = np.empty((R, len(bins)), complex)
    for r, p in enumerate(generate_ensemble(src, pump, 41, R)):
        amps[r] = p.signal.amplitude[bins]
    S = src.spectral_density[bins]
    ks = [stats.kstest(np.abs(amps[:, i]) ** 2 / S[i], "expon").pvalue for i in (0, len(bins) // 2, -1)]
    mean_ok = np.abs(amps.mean(axis=0)) < 3 * np.sqrt(S / R)
    ok = min(ks) > 0.01 and bool(np.all(mean_ok))
    return ok, (f"R={R}: exponential KS p-values {', '.join(f'{p:.3f}' for p in ks)} (limit 0.01);"
                f" |<E_s>| below 3 sigma in {mean_ok.sum()}/{len(bins)} bins")


def criterion_9():
    cfg = harness.load_preset("ocdma-demo")
    oc = cfg.ocdma
    ch = ChannelSpec(oc.channel_delay_fs * 1e-15, oc.realizations_per_bit)
    tx = transmit(oc.bits, ch, cfg.source, cfg.pump, cfg.seed)
    good = receive(tx, ch, cfg.transition)
    wrong = receive(tx, ChannelSpec(ch.delay + 200e-15, ch.realizations_per_bit), cfg.transition)
    spy = eavesdrop(tx)
    bits = np.array(oc.bits)
    p_wrong = stats.ttest_ind(wrong.statistic[bits == 0], wrong.statistic[bits == 1],
                              equal_var=False).pvalue
    acc = 1 - spy.ber
    sigma = np.sqrt(0.25 / len(bits))
    ok = good.errors == 0 and abs(acc - 0.5) < 3 * sigma and p_wrong > 0.05
    return ok, (f"{len(bits)} bits, R={ch.realizations_per_bit}/bit: matched BER {good.ber:g}; "
                f"eavesdropper accuracy {acc:.3f} (50% +- {3 * sigma:.3f}); wrong delay "
                f"bit-0/bit-1 p = {p_wrong:.3f} (limit > 0.05)")


def criterion_10(tmp_path):
    outs = []
    for workers in ("1", "1", "4"):
        d = tmp_path / f"w{len(outs)}"
        code = cli.main(["preset", "fig2a", "--out", str(d), "--realizations", "40",
                         "--workers", workers])
        outs.append((code, (d / "fig2a.csv").read_bytes()))
    ok = all(c == 0 for c, _ in outs) and outs[0][1] == outs[1][1] == outs[2][1]
    return ok, "fig2a preset, R=40: CSV bytes identical for 1, 1 and 4 workers" if ok else \
        "fig2a preset, R=40: CSV bytes differ between runs"


def test_criterion_1_delay_scan(capsys):
    assert report(1, *criterion_1(), capsys)


def test_criterion_2_background_flatness(capsys):
    assert report(2, *criterion_2(), capsys)


def test_criterion_3_spectral_selectivity(capsys):
    assert report(3, *criterion_3(), capsys)


def test_criterion_4_ratio(capsys):
    assert report(4, *criterion_4(), capsys)


def test_criterion_5_coherent_control(capsys):
    assert report(5, *criterion_5(), capsys)


def test_criterion_6_dark_pulse_split(capsys):
    assert report(6, *criterion_6(), capsys)


def test_criterion_7_brute_force(capsys):
    assert report(7, *criterion_7(), capsys)


def test_criterion_8_thermal_statistics(capsys):
    assert report(8, *criterion_8(), capsys)


def test_criterion_9_ocdma(capsys):
    assert report(9, *criterion_9(), capsys)


def test_criterion_10_determinism(capsys, tmp_path):
    assert report(10, *criterion_10(tmp_path), capsys)


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    results = []
    for n in range(1, 11):
        fn = globals()[f"criterion_{n}"]
        if n == 10:
            with tempfile.TemporaryDirectory() as tmp:
                results.append(report(n, *fn(Path(tmp))))
        else:
            results.append(report(n, *fn()))
    sys.exit(0 if all(results) else 1)
