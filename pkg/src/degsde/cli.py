"""Experiment runner.

Every verification experiment is a subcommand; ``degsde list`` prints the
registry.  Parameters come from built-in defaults, then an optional
key=value config file, then command-line flags, and are validated before
any simulation starts.  Each run writes one CSV (and a PNG figure next to
it unless --no-plot) and exits 0 only if every verdict passed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import REGISTRY, resolve_config
from .report import render_figure, summary_lines, write_csv

DEFAULT_SEED = 20070303


def _load_config(path: str) -> dict:
    overrides = {}
    text = Path(path).read_text()
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degsde",
        description="Monte Carlo verification runs for the degenerate SDE "
                    "dX = |X|^a dW and its reflected relatives.",
    )
    sub = parser.add_subparsers(dest="experiment")
    sub.add_parser("list", help="list experiments, what they check, and their parameters")
    for name, exp in REGISTRY.items():
        p = sub.add_parser(name, help=exp.checks)
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master seed")
        p.add_argument("--out", default=f"{name}.csv", help="output CSV path")
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--no-plot", action="store_true", help="skip the companion figure")
        for pname, spec in exp.params.items():
            p.add_argument(f"--{pname.replace('_', '-')}", dest=pname, default=None,
                           help=f"{spec.help} (default {spec.default})")
    return parser


def _list_experiments() -> int:
    for name in REGISTRY:
        exp = REGISTRY[name]
        print(f"{name}")
        print(f"  checks: {exp.checks}")
        for pname, spec in exp.params.items():
            print(f"  --{pname.replace('_', '-')} ({spec.kind}, default {spec.default}): {spec.help}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.experiment is None:
        parser.print_help()
        return 2
    if args.experiment == "list":
        return _list_experiments()

    exp = REGISTRY[args.experiment]
    try:
        overrides = {}
        if args.config:
            file_overrides = _load_config(args.config)
            known = set(exp.params) | {"seed", "out"}
            bad = set(file_overrides) - known
            if bad:
                raise ValueError(f"unknown config keys: {sorted(bad)}")
            seed = int(file_overrides.pop("seed", args.seed))
            out = file_overrides.pop("out", args.out)
            overrides.update(file_overrides)
        else:
            seed, out = args.seed, args.out
        for pname in exp.params:
            flag_val = getattr(args, pname)
            if flag_val is not None:
                overrides[pname] = flag_val
        cfg = resolve_config(exp, overrides)
    except (ValueError, OSError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2

    rows = exp.run(cfg, seed)
    write_csv(rows, out)
    if not args.no_plot:
        render_figure(exp, rows, str(Path(out).with_suffix(".png")))
    for line in summary_lines(rows):
        print(line)
    bad = [r for r in rows if r.verdict not in ("", "pass")]
    print(f"{args.experiment}: {len(rows)} rows, "
          f"{sum(1 for r in rows if r.verdict == 'pass')} pass, {len(bad)} fail -> {out}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
