"""Run configuration, scan orchestration and CSV output.

Configuration files are TOML.  Every physical key carries its unit as a
suffix (``_nm``, ``_fs``, ``_fs2``, ``_rad``); wavelengths are converted to
angular frequency here and nowhere else.
"""
from __future__ import annotations

import csv
import io
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import analytic
from .detector import ScanPoint, TransitionSpec, TpaResult, simulate
from .shaper import (IDENTITY, Compose, Constant, Delay, Dispersion, PhaseMask, SquareWave,
                     load_tabulated)
from .source import PumpSpec, SourceSpec
from .spectral import (ConfigError, FrequencyGrid, omega_to_wavelength, wavelength_to_omega,
                       width_nm_to_omega)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
AXES = {"delay": ("fs", 1e-15), "pump_wavelength": ("nm", None), "mask_magnitude": ("rad", 1.0)}
PRESETS = ("fig2a", "fig2b", "fig3b", "fig3c", "ocdma-demo")
COLUMNS = ("axis_value", "total", "coherent", "incoherent", "stderr_total", "stderr_coherent",
           "oracle")

_KEYS = {
    "grid": {"n_bins", "span_nm", "center_nm"},
    "pump": {"center_nm", "fwhm_nm", "lineshape"},
    "source": {"envelope", "fwhm_nm", "center_nm", "n"},
    "transition": {"wavelength_nm", "fwhm_nm", "lineshape"},
    "mask": {"type", "magnitude_rad", "period_nm", "offset_nm", "gdd_fs2", "delay_fs",
             "phase_rad", "file"},
    "scan": {"axis", "start_fs", "stop_fs", "start_nm", "stop_nm", "start_rad", "stop_rad",
             "steps", "delay_fs"},
    "run": {"realizations", "seed", "batches", "workers", "output"},
    "ocdma": {"bits", "bits_file", "bit_seed", "channel_delay_fs", "receiver_delay_fs",
              "realizations_per_bit"},
}
_REQUIRED = {
    "grid": ("n_bins", "span_nm"),
    "pump": ("center_nm", "fwhm_nm"),
    "source": ("fwhm_nm",),
    "transition": ("wavelength_nm", "fwhm_nm"),
}


@dataclass(frozen=True)
class ScanSpec:
    axis: str
    start: float  # in the axis unit (fs, nm or rad)
    stop: float
    steps: int
    delay_fs: float = 0.0

    @property
    def unit(self) -> str:
        return AXES[self.axis][0]

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class OcdmaSpec:
    bits: tuple
    channel_delay_fs: float
    receiver_delay_fs: float
    realizations_per_bit: int


@dataclass(frozen=True)
class RunConfig:
    grid: FrequencyGrid
    source: SourceSpec
    pump: PumpSpec
    transition: TransitionSpec
    mask: PhaseMask
    scan: ScanSpec | None
    realizations: int
    seed: int
    batches: int = 10
    workers: int = 1
    output: str | None = None
    ocdma: OcdmaSpec | None = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)


@dataclass(frozen=True)
class ScanRow:
    axis_value: float
    total: float
    coherent: float
    incoherent: float
    stderr_total: float
    stderr_coherent: float
    oracle: float = float("nan")


class _Issues:
    def __init__(self):
        self.items = []

    def add(self, path, msg):
        self.items.append((path, msg))

    def absorb(self, err: ConfigError, section: str, rename=None):
        rename = rename or {}
        for p, m in err.issues:
            self.add(rename.get(p, f"{section}.{p}" if p else section), m)


def _number(sec, key, issues, path, default=None, kind=float, positive=False):
    if key not in sec:
        if default is None:
            issues.add(f"{path}.{key}", "missing required key")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        issues.add(f"{path}.{key}", f"expected a number, got {v!r}")
        return default
    if kind is int and not float(v).is_integer():
        issues.add(f"{path}.{key}", f"expected an integer, got {v!r}")
        return default
    v = kind(v)
    if not np.isfinite(v):
        issues.add(f"{path}.{key}", "must be finite")
        return default
    if positive and not v > 0:
        issues.add(f"{path}.{key}", "must be positive")
        return default
    return v


def parse_config(data: dict, base_dir: Path | str = ".") -> RunConfig:
    """Structural and physics validation; all issues are collected before raising."""
    base_dir = Path(base_dir)
    issues = _Issues()
    for name in data:
        if name not in _KEYS:
            issues.add(name, "unknown section")
    secs = {}
    for name, keys in _KEYS.items():
        sec = data.get(name, {})
        if not isinstance(sec, dict):
            issues.add(name, "expected a table")
            sec = {}
        for k in sec:
            if k not in keys:
                issues.add(f"{name}.{k}", "unknown key")
        for k in _REQUIRED.get(name, ()):
            if k not in sec:
                issues.add(f"{name}.{k}", "missing required key")
        secs[name] = sec
    if "scan" not in data and "ocdma" not in data:
        issues.add("scan", "config needs a [scan] or an [ocdma] section")

    # pump and transition first: the grid default is centred on the pump
    pump = None
    p = secs["pump"]
    pc = _number(p, "center_nm", issues, "pump", positive=True) if "center_nm" in p else None
    pf = _number(p, "fwhm_nm", issues, "pump", positive=True) if "fwhm_nm" in p else None
    if pc and pf:
        try:
            pump = PumpSpec.from_nm(pc, pf, p.get("lineshape", "lorentzian"))
        except ConfigError as e:
            issues.absorb(e, "pump", {"lineshape": "pump.lineshape"})

    transition = None
    t = secs["transition"]
    tw = _number(t, "wavelength_nm", issues, "transition", positive=True) \
        if "wavelength_nm" in t else None
    tf = _number(t, "fwhm_nm", issues, "transition", positive=True) if "fwhm_nm" in t else None
    if tw and tf:
        try:
            transition = TransitionSpec.from_nm(tw, tf, t.get("lineshape", "lorentzian"))
        except ConfigError as e:
            issues.absorb(e, "transition")

    grid = None
    g = secs["grid"]
    n_bins = _number(g, "n_bins", issues, "grid", kind=int) if "n_bins" in g else None
    span_nm = _number(g, "span_nm", issues, "grid", positive=True) if "span_nm" in g else None
    center_nm = _number(g, "center_nm", issues, "grid", positive=True, default=0.0) \
        if "center_nm" in g else (2 * pc if pc else None)
    if n_bins is not None and span_nm and center_nm:
        try:
            grid = FrequencyGrid(float(wavelength_to_omega(center_nm)),
                                 float(width_nm_to_omega(span_nm, center_nm)), n_bins)
        except ConfigError as e:
            issues.absorb(e, "grid", {"n_bins": "grid.n_bins", "span_omega": "grid.span_nm",
                                      "center_omega": "grid.span_nm"})
    elif n_bins is not None and (n_bins < 64 or n_bins & (n_bins - 1)):
        issues.add("grid.n_bins", "n_bins must be a power of two >= 64")

    source = None
    s = secs["source"]
    if grid is not None and "fwhm_nm" in s:
        sc_nm = _number(s, "center_nm", issues, "source", positive=True, default=0.0) \
            if "center_nm" in s else float(omega_to_wavelength(grid.center_omega))
        sf = _number(s, "fwhm_nm", issues, "source", positive=True)
        n = _number(s, "n", issues, "source", default=1.0)
        if sf and sc_nm:
            try:
                source = SourceSpec(grid, float(width_nm_to_omega(sf, sc_nm)),
                                    s.get("envelope", "gaussian"),
                                    float(wavelength_to_omega(sc_nm)), n)
            except ConfigError as e:
                issues.absorb(e, "source", {"coverage": "grid.span_nm", "fwhm": "source.fwhm_nm",
                                            "n": "source.n"})

    mask = _parse_mask(secs["mask"], grid, source, issues, base_dir)
    scan = _parse_scan(secs["scan"], issues) if "scan" in data else None
    ocdma = _parse_ocdma(secs["ocdma"], issues, base_dir) if "ocdma" in data else None

    r = secs["run"]
    realizations = _number(r, "realizations", issues, "run", default=2000, kind=int)
    if realizations is not None and realizations < 2:
        issues.add("run.realizations", "need at least 2 realizations")
    seed = _number(r, "seed", issues, "run", default=0, kind=int)
    batches = _number(r, "batches", issues, "run", default=10, kind=int)
    if batches is not None and batches < 2:
        issues.add("run.batches", "need at least 2 batches for standard errors")
    workers = _number(r, "workers", issues, "run", default=1, kind=int)
    if workers is not None and workers < 1:
        issues.add("run.workers", "must be >= 1")

    # cross-section physics checks
    if grid is not None and pump is not None:
        if not grid.bin_width < pump.fwhm_omega / 4:
            issues.add("grid.n_bins", f"bin width {grid.bin_width:.4g} rad/s must be below "
                                      f"pump fwhm / 4 = {pump.fwhm_omega / 4:.4g} rad/s")
    if grid is not None and transition is not None:
        try:
            transition.bin_masses(grid.sum_grid())
        except ConfigError as e:
            issues.absorb(e, "transition", {"transition": "transition.fwhm_nm"})
    if source is not None and pump is not None:
        extra = 0.0
        if scan is not None and scan.axis == "pump_wavelength":
            lo, hi = sorted((scan.start, scan.stop))
            if lo > 0:
                extra = float(np.max(np.abs(wavelength_to_omega([lo, hi]) - pump.center_omega)))
        try:
            source.check_pump_coverage(pump, extra)
        except ConfigError as e:
            issues.absorb(e, "pump", {"coverage": "grid.span_nm", "pump": "pump.center_nm"})
    if scan is not None and grid is not None:
        _check_scan_resolution(scan, grid, mask, issues)

    if issues.items:
        raise ConfigError(issues.items)
    return RunConfig(grid, source, pump, transition, mask, scan, realizations, seed, batches,
                     workers, r.get("output"), ocdma, data)


def _parse_mask(m, grid, source, issues, base_dir) -> PhaseMask:
    kind = m.get("type", "none")
    center = source.center_omega if source is not None else None
    center_nm = float(omega_to_wavelength(center)) if center else None
    if kind == "none":
        return IDENTITY
    if kind == "constant":
        return Constant(_number(m, "phase_rad", issues, "mask", default=0.0))
    if kind == "delay":
        return Delay(_number(m, "delay_fs", issues, "mask", default=0.0) * 1e-15)
    if kind == "dispersion":
        gdd = _number(m, "gdd_fs2", issues, "mask", default=0.0)
        return Dispersion(gdd * 1e-30, center if center else 0.0)
    if kind == "square_wave":
        mag = _number(m, "magnitude_rad", issues, "mask", default=np.pi)
        period_nm = _number(m, "period_nm", issues, "mask", positive=True)
        if period_nm is None or center is None:
            return IDENTITY
        offset = center
        if "offset_nm" in m:
            off_nm = _number(m, "offset_nm", issues, "mask", positive=True)
            offset = float(wavelength_to_omega(off_nm)) if off_nm else center
        mask = SquareWave(mag, float(width_nm_to_omega(period_nm, center_nm)), offset)
        if grid is not None and not mask.period >= 4 * grid.bin_width:
            issues.add("mask.period_nm", "square-wave period must be at least 4 bin widths")
        return mask
    if kind == "tabulated":
        path = m.get("file")
        if not isinstance(path, str):
            issues.add("mask.file", "tabulated mask needs a file")
            return IDENTITY
        try:
            return load_tabulated(base_dir / path)
        except (OSError, ValueError) as e:
            issues.add("mask.file", str(e))
            return IDENTITY
    issues.add("mask.type", f"unknown mask type {kind!r}")
    return IDENTITY


def _parse_scan(sc, issues) -> ScanSpec | None:
    axis = sc.get("axis")
    if axis not in AXES:
        issues.add("scan.axis", f"axis must be one of {sorted(AXES)}")
        return None
    unit = AXES[axis][0]
    start = _number(sc, f"start_{unit}", issues, "scan")
    stop = _number(sc, f"stop_{unit}", issues, "scan")
    steps = _number(sc, "steps", issues, "scan", kind=int)
    if steps is not None and steps < 2:
        issues.add("scan.steps", "need at least 2 steps")
        steps = None
    delay = _number(sc, "delay_fs", issues, "scan", default=0.0)
    if None in (start, stop, steps):
        return None
    if axis == "pump_wavelength" and not (start > 0 and stop > 0):
        issues.add("scan.start_nm", "pump wavelengths must be positive")
        return None
    return ScanSpec(axis, start, stop, steps, delay)


def _parse_ocdma(oc, issues, base_dir) -> OcdmaSpec | None:
    from .ocdma import read_bits

    if "bits_file" in oc:
        try:
            bits = tuple(read_bits(base_dir / oc["bits_file"]))
        except (OSError, ValueError) as e:
            issues.add("ocdma.bits_file", str(e))
            return None
    else:
        count = _number(oc, "bits", issues, "ocdma", default=256, kind=int)
        bit_seed = _number(oc, "bit_seed", issues, "ocdma", default=0, kind=int)
        if count is None or bit_seed is None:
            return None
        bits = tuple(int(b) for b in np.random.default_rng(bit_seed).integers(0, 2, count))
    ch = _number(oc, "channel_delay_fs", issues, "ocdma", default=0.0)
    rx = _number(oc, "receiver_delay_fs", issues, "ocdma", default=ch)
    per = _number(oc, "realizations_per_bit", issues, "ocdma", default=64, kind=int)
    if per is not None and per < 2:
        issues.add("ocdma.realizations_per_bit", "bit period must be >= 2 realizations")
        return None
    if None in (ch, rx, per):
        return None
    return OcdmaSpec(bits, ch, rx, per)


def _check_scan_resolution(scan: ScanSpec, grid: FrequencyGrid, mask, issues):
    if scan.axis == "delay":
        tmax = max(abs(scan.start), abs(scan.stop), abs(scan.delay_fs)) * 1e-15
        if tmax > grid.duration / 4:
            issues.add("scan.stop_fs", f"delays beyond {grid.duration / 4 * 1e15:.4g} fs wrap "
                                       "around the temporal grid")
    elif scan.axis == "pump_wavelength":
        w = wavelength_to_omega(scan.values)
        if np.min(np.abs(np.diff(w))) < grid.bin_width:
            issues.add("scan.steps", "pump step is finer than one frequency bin")
    elif scan.axis == "mask_magnitude" and not isinstance(mask, SquareWave):
        issues.add("mask.type", "mask_magnitude scans need a square_wave mask")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except OSError as e:
        raise ConfigError([("", f"cannot read {path}: {e}")])
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([("", f"{path}: {e}")])
    return parse_config(data, path.parent)


def validate_config(path) -> RunConfig:
    """Load and fully validate ``path``; raises :class:`ConfigError` listing every issue."""
    return load_config(path)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError([("preset", f"unknown preset {name!r}; choose from {PRESETS}")])
    return resources.files("dctpa").joinpath("presets", f"{name}.toml").read_text()


def load_preset(name: str) -> RunConfig:
    return parse_config(tomllib.loads(preset_text(name)))


def scan_points(cfg: RunConfig) -> list[ScanPoint]:
    sc = cfg.scan
    fixed = Delay(sc.delay_fs * 1e-15)
    if sc.axis == "delay":
        return [ScanPoint(cfg.pump, Compose((cfg.mask, Delay(v * 1e-15)))) for v in sc.values]
    if sc.axis == "pump_wavelength":
        m = Compose((cfg.mask, fixed))
        return [ScanPoint(cfg.pump.with_center(float(wavelength_to_omega(v))), m)
                for v in sc.values]
    return [ScanPoint(cfg.pump, Compose((replace(cfg.mask, magnitude=float(v)), fixed)))
            for v in sc.values]


def oracle_curve(cfg: RunConfig) -> np.ndarray:
    """Normalized analytic curve for the configured scan axis."""
    sc = cfg.scan
    if sc.axis == "pump_wavelength":
        return analytic.pump_selectivity(cfg.pump, cfg.transition, cfg.grid,
                                         wavelength_to_omega(sc.values))
    masks = [p.signal_mask for p in scan_points(cfg)]
    return analytic.normalize_peak(analytic.tl_coherent(cfg.source, cfg.pump.center_omega,
                                                         masks, cfg.transition))


def run_scan(cfg: RunConfig, workers: int | None = None) -> list[ScanRow]:
    if cfg.scan is None:
        raise ConfigError([("scan", "config has no [scan] section")])
    results: list[TpaResult] = simulate(cfg.source, scan_points(cfg), cfg.transition,
                                        cfg.realizations, cfg.seed, cfg.batches,
                                        workers if workers is not None else cfg.workers)
    oracle = oracle_curve(cfg)
    return [ScanRow(float(v), r.total, r.coherent, r.incoherent, r.stderr_total,
                    r.stderr_coherent, float(o))
            for v, r, o in zip(cfg.scan.values, results, oracle)]


def _fmt(x) -> str:
    return repr(float(x))


def rows_to_csv(rows, scan: ScanSpec) -> str:
    buf = io.StringIO()
    buf.write(f"#schema={SCHEMA_VERSION} axis={scan.axis} unit={scan.unit}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def oracle_to_csv(values, oracle, scan: ScanSpec) -> str:
    buf = io.StringIO()
    buf.write(f"#schema={SCHEMA_VERSION} kind=oracle axis={scan.axis} unit={scan.unit}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("axis_value", "oracle"))
    for v, o in zip(values, oracle):
        w.writerow([_fmt(v), _fmt(o)])
    return buf.getvalue()


def read_scan_csv(path) -> dict:
    """Parse a scan CSV back into column arrays (plus ``axis`` and ``unit`` from the header)."""
    lines = Path(path).read_text().splitlines()
    meta = dict(tok.split("=", 1) for tok in lines[0].lstrip("#").split())
    reader = csv.reader(lines[1:])
    header = next(reader)
    cols = {h: [] for h in header}
    for row in reader:
        for h, v in zip(header, row):
            cols[h].append(float(v))
    out = {h: np.array(v) for h, v in cols.items()}
    out.update(meta)
    return out


def run_ocdma(cfg: RunConfig, receiver_delay_fs: float | None = None):
    from .ocdma import ChannelSpec, receive, transmit

    oc = cfg.ocdma
    channel = ChannelSpec(oc.channel_delay_fs * 1e-15, oc.realizations_per_bit)
    tx = transmit(oc.bits, channel, cfg.source, cfg.pump, cfg.seed)
    rx_delay = oc.receiver_delay_fs if receiver_delay_fs is None else receiver_delay_fs
    return receive(tx, ChannelSpec(rx_delay * 1e-15, oc.realizations_per_bit), cfg.transition)
