"""``hk-lab`` command line: run, validate and plot."""

import argparse
import sys
from pathlib import Path

from . import reports
from .errors import ComputeError, ConfigError, EmptySeries

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_CONFIG = 2


def _run(args):
    scenario = reports.load_scenario(args.scenario)
    if args.output_dir:
        scenario.output_dir = args.output_dir
    try:
        report = reports.run(scenario)
    except ComputeError as exc:
        report = reports.Report(scenario.to_dict(), {}, {}, [], f"{type(exc).__name__}: {exc}")
        out = Path(scenario.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        reports.write_report(report, out)
        print(f"FAIL {scenario.kind}: {report.error}", file=sys.stderr)
        return EXIT_COMPUTE
    for name, status in report.assertions.items():
        print(f"{status} {name}")
    if not report.passed:
        violations = report.metrics.get("nondegeneracy", {}).get("violations", [])
        if violations:
            print("violating classes: " + ", ".join(violations[:10]))
        return EXIT_COMPUTE
    return EXIT_OK


def _validate(args):
    s = reports.load_scenario(args.scenario)
    print(f"OK {s.kind} (seed {s.seed})")
    return EXIT_OK


def _plot(args):
    header, data = reports.read_series_csv(args.csv)
    if len(data) < 2:
        raise EmptySeries(f"{args.csv} holds fewer than two points")
    out = args.output or str(Path(args.csv).with_suffix(".svg"))
    xlabel = header[0] if header else "x"
    ylabel = header[1] if len(header) > 1 else "y"
    slope = reports.emit_plot(data[:, 0], data[:, 1], out, xlabel, ylabel)
    print(f"{out}: slope {slope:.6g}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="hk-lab", description="Hyperkahler gluing laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file and write report.json")
    r.add_argument("scenario")
    r.add_argument("--output-dir", default=None)
    r.set_defaults(func=_run)
    v = sub.add_parser("validate", help="check a scenario file against its schema")
    v.add_argument("scenario")
    v.set_defaults(func=_validate)
    pl = sub.add_parser("plot", help="plot a two-column CSV series as SVG")
    pl.add_argument("csv")
    pl.add_argument("-o", "--output", default=None)
    pl.set_defaults(func=_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ComputeError, EmptySeries) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
