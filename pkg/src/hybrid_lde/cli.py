"""Command-line entry point: ``hybrid-lde {run,sweep,validate,benchmark}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, replace

from . import bench
from .config import ConfigError, load_scenario
from .validation import validate

log = logging.getLogger("hybrid_lde")


def _parse_axis(text):
    """``name=v1,v2,...`` -> ``(name, [v1, v2, ...])``."""
    name, sep, values = text.partition("=")
    if not sep or not values:
        raise argparse.ArgumentTypeError(f"expected name=v1,v2,... got {text!r}")
    name = name.strip()
    if name not in bench.SWEEP_AXES:
        raise argparse.ArgumentTypeError(f"unknown axis {name!r}; choose from {bench.SWEEP_AXES}")
    try:
        vals = [json.loads(v) for v in values.split(",")]
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"bad value in {text!r}: {exc}") from exc
    return name, vals


def _load(args):
    scenario = load_scenario(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    if overrides:
        scenario = replace(scenario, config=replace(scenario.config, **overrides))
    return scenario


def _json_value(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def _write_outputs(rows, scenario, args, extra=None):
    csv_text = bench.rows_to_csv(rows, timing=args.timing)
    if args.out == "-":
        sys.stdout.write(csv_text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    if args.json:
        records = []
        for row in rows:
            d = {k: _json_value(v) for k, v in asdict(row).items()}
            if not args.timing:
                d["wall_time_ms"] = None
            records.append(d)
        doc = {"scenario": bench.scenario_to_dict(scenario), "rows": records}
        if extra:
            doc.update(extra)
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    n_err = sum(bool(r.error) for r in rows)
    if n_err:
        log.warning("%d of %d grid points failed; see the error column", n_err, len(rows))


def cmd_run(args):
    scenario = _load(args)
    rows = bench.run_scenario(scenario)
    _write_outputs(rows, scenario, args)
    return 0


def cmd_sweep(args):
    scenario = _load(args)
    rows = bench.run_sweep(scenario, args.axis)
    _write_outputs(rows, scenario, args, {"outer_axes": [[a, v] for a, v in args.axis]})
    return 0


def cmd_validate(args):
    report = validate()
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def cmd_benchmark(args):
    scenario = _load(args)
    print(f"{scenario.sweep_axis},benchmark")
    for index, value in enumerate(scenario.sweep_values):
        print(f"{value},{bench.benchmark_at(scenario, index, value)!r}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hybrid-lde",
        description="Hybrid transceiver design for linear decentralized estimation.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="more logging (repeat for debug output)")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p, trials=True):
        p.add_argument("--config", required=True, help="scenario file")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        if trials:
            p.add_argument("--trials", type=int, help="override the Monte Carlo trial count")

    def output_args(p):
        p.add_argument("--out", required=True, help="CSV output path ('-' for stdout)")
        p.add_argument("--json", help="also write a JSON mirror with the full scenario")
        p.add_argument("--timing", action="store_true",
                       help="fill wall_time_ms (makes the output run-dependent)")

    p = sub.add_parser("run", help="evaluate one scenario over its sweep grid")
    scenario_args(p)
    output_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="Cartesian sweep over extra axes around a scenario")
    scenario_args(p)
    p.add_argument("--axis", type=_parse_axis, action="append", required=True,
                   metavar="NAME=V1,V2", help="outer sweep axis (repeatable)")
    output_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run the seeded invariant suite")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("benchmark", help="print the centralized MMSE bound per grid point")
    scenario_args(p, trials=False)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"hybrid-lde: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
