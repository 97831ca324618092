"""Command line entry point: ``dctpa run|validate|preset|oracle``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .spectral import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _override(cfg, args):
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "realizations", None) is not None:
        if args.realizations < 2:
            raise ConfigError([("run.realizations", "need at least 2 realizations")])
        changes["realizations"] = args.realizations
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    return replace(cfg, **changes) if changes else cfg


def _execute(cfg, out: Path | None, tag: str) -> str:
    if cfg.ocdma is not None:
        result = harness.run_ocdma(cfg)
        path = out or Path(cfg.output or f"{tag}.csv")
        result.to_csv(path)
        return f"{path}: {len(result.truth)} bits, {result.errors} errors (BER {result.ber:.4g})"
    rows = harness.run_scan(cfg)
    path = out or Path(cfg.output or f"{tag}.csv")
    path.write_text(harness.rows_to_csv(rows, cfg.scan))
    return f"{path}: {len(rows)} {cfg.scan.axis} points, R={cfg.realizations}"


def cmd_run(args):
    cfg = _override(harness.load_config(args.config), args)
    print(_execute(cfg, Path(args.out) if args.out else None, Path(args.config).stem))


def cmd_validate(args):
    cfg = harness.load_config(args.config)
    what = f"{cfg.scan.axis} scan, {cfg.scan.steps} points" if cfg.scan else "ocdma link"
    print(f"{args.config}: valid ({what}, {cfg.grid.n_bins} bins, R={cfg.realizations})")


def cmd_preset(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = harness.preset_text(args.name)
    (out / f"{args.name}.toml").write_text(text)
    cfg = _override(harness.load_preset(args.name), args)
    print(_execute(cfg, out / f"{args.name}.csv", args.name))
    if cfg.ocdma is not None:
        from .ocdma import write_bits

        write_bits(out / "bits.txt", cfg.ocdma.bits)
        wrong = cfg.ocdma.receiver_delay_fs + 200.0
        res = harness.run_ocdma(cfg, receiver_delay_fs=wrong)
        res.to_csv(out / f"{args.name}-wrong-delay.csv")
        print(f"receiver at {wrong:g} fs: {res.errors} errors (BER {res.ber:.4g})")


def cmd_oracle(args):
    cfg = harness.load_config(args.config)
    if cfg.scan is None:
        raise ConfigError([("scan", "oracle curves need a [scan] section")])
    text = harness.oracle_to_csv(cfg.scan.values, harness.oracle_curve(cfg), cfg.scan)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dctpa", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured scan or OCDMA link")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--realizations", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a config file and report every issue")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("preset", help="run a bundled figure preset")
    p.add_argument("name", choices=harness.PRESETS)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--realizations", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("oracle", help="emit the analytic curve for a scan config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as e:
        for path, msg in e.issues:
            print(f"config error: {path}: {msg}" if path else f"config error: {msg}",
                  file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, ArithmeticError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
