"""
Command line of the harmonic section flow simulator.

Commands:
- selftest: randomized G2 and exterior algebra identity suite
- run <config>: run a flow described by a config file
- check <diagnostics.jsonl>: energy identity and blow-up bound checks on a stream

Flags: --out-dir, --quiet, --seed. Exit codes: 0 ok, 1 runtime failure,
2 usage or configuration error.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import plotly.graph_objects as go
from plotly.subplots import make_subplots
from tabulate import tabulate

from infrastructure.errors import ConfigError, TooShortSeries
from infrastructure.selftest import cmd_selftest
from flows.graph import run_pipeline
from flows.nodes import check_series, read_series


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=None, help="Output directory (overrides the config)")
    common.add_argument("--quiet", action="store_true", help="Only print results and errors")
    common.add_argument("--seed", type=int, default=None, help="Override the initial-condition seed")

    parser = argparse.ArgumentParser(
        prog="harmonic-flows",
        description="Harmonic section flows of parallelisms, almost complex, almost contact and G2 structures",
    )
    sub = parser.add_subparsers(dest="command")

    selftest = sub.add_parser("selftest", parents=[common], help="Run the identity suite")
    selftest.add_argument("--flip-phi-sign", action="store_true", help=argparse.SUPPRESS)

    run = sub.add_parser("run", parents=[common], help="Run a flow from a config file")
    run.add_argument("config", help="Run configuration (key = value lines)")

    check = sub.add_parser("check", parents=[common], help="Check a diagnostics stream")
    check.add_argument("series", help="diagnostics.jsonl written by `run`")
    check.add_argument("--plot", action="store_true", help="Also write an HTML figure of E, K and eps_max")
    return parser


def cmd_run(config: str, out_dir: Optional[str] = None, seed: Optional[int] = None, quiet: bool = False) -> int:
    """
    Run a flow through the pipeline graph.

    Returns:
        Exit code: 0 ok, 1 flow error, 2 config error
    """
    final = run_pipeline(config, out_dir=out_dir, seed_override=seed, quiet=quiet)
    return final.exit_code


def plot_series(series: Path, target: Path) -> Path:
    """Write E, K and eps_max against t as a standalone HTML figure."""
    records = read_series(series)
    t = [r.t for r in records]
    figure = make_subplots(rows=2, cols=1, shared_xaxes=True, subplot_titles=("Energies", "Sup energy density"))
    figure.add_trace(go.Scatter(x=t, y=[r.E for r in records], name="E"), row=1, col=1)
    figure.add_trace(go.Scatter(x=t, y=[r.K for r in records], name="K"), row=1, col=1)
    figure.add_trace(go.Scatter(x=t, y=[r.eps_max for r in records], name="eps_max"), row=2, col=1)
    figure.update_xaxes(title_text="t", row=2, col=1)
    figure.write_html(str(target), include_plotlyjs="cdn")
    return target


def cmd_check(series: str, plot: bool = False, out_dir: Optional[str] = None, quiet: bool = False) -> int:
    """
    Check a diagnostics stream.

    Returns:
        Exit code: 0 iff every check passes, 1 on a failed check, 2 on an unreadable or too short series
    """
    path = Path(series)
    try:
        reports, passed = check_series(path)
    except (ConfigError, TooShortSeries) as e:
        print(f"[ERROR] {e}")
        return 2

    for report in reports:
        name = report["report"]
        rows = [[key, value] for key, value in report.items() if key != "report"]
        print(f"\n{name}")
        print(tabulate(rows, headers=["field", "value"], tablefmt="github"))

    if plot:
        directory = Path(out_dir) if out_dir else path.parent
        directory.mkdir(parents=True, exist_ok=True)
        target = plot_series(path, directory / f"{path.stem}.html")
        if not quiet:
            print(f"[INFO] Wrote {target}")

    print(f"[RESULT] check={'pass' if passed else 'fail'}")
    return 0 if passed else 1


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_usage()
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage()
        return 2

    if args.command == "selftest":
        return cmd_selftest(flip_phi_sign=args.flip_phi_sign, quiet=args.quiet)
    if args.command == "run":
        return cmd_run(args.config, out_dir=args.out_dir, seed=args.seed, quiet=args.quiet)
    return cmd_check(args.series, plot=args.plot, out_dir=args.out_dir, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
