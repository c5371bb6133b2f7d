"""Command-line entry point: ``ultralocal run | list | validate``."""

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import ConfigError, SimulationAbort, UltraLocalError
from .scenario import list_scenarios, load_scenario
from .sim import compute_metrics, run_closed_loop

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3


def _with_seed(sc, seed):
    if seed is None:
        return sc
    return sc.model_copy(update={"sim": sc.sim.model_copy(update={"seed": seed})})


def _simulate(sc):
    # top-level so that worker processes can pickle it
    return run_closed_loop(sc)


def write_outputs(sc, log, out_dir, plot=False):
    """Write ``<name>.csv`` and ``<name>.metrics.json``; return the metrics."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = {
        "scenario": sc.name,
        "plant": sc.plant.kind,
        "controller": sc.controller.kind,
        "seed": sc.sim.seed,
        **compute_metrics(log),
    }
    log.to_csv(out_dir / f"{sc.name}.csv")
    (out_dir / f"{sc.name}.metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    if plot:
        from .plotting import plot_log

        plot_log(log, out_dir / f"{sc.name}.png")
    return metrics


def summary_line(metrics):
    parts = [metrics["scenario"]]
    for key, value in metrics.items():
        if key.startswith(("rmse_", "max_err_")):
            parts.append(f"{key}={value:.4g}")
    parts.append(f"violations={metrics['violations']}")
    return " ".join(parts)


def _cmd_run(args):
    try:
        scenarios = [_with_seed(load_scenario(s), args.seed) for s in args.scenario]
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    names = [sc.name for sc in scenarios]
    if len(set(names)) != len(names):
        print("config error: scenario names must be distinct within one run", file=sys.stderr)
        return EXIT_CONFIG

    status = EXIT_OK
    if args.batch and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_simulate, sc) for sc in scenarios]
            results = [_collect(f.result) for f in futures]
    else:
        results = [_collect(lambda sc=sc: _simulate(sc)) for sc in scenarios]

    for sc, (log, err) in zip(scenarios, results):
        if err is not None:
            print(f"{sc.name}: {err}", file=sys.stderr)
            status = EXIT_ABORT
            continue
        metrics = write_outputs(sc, log, args.out, plot=args.plot)
        print(summary_line(metrics))
    return status


def _collect(fn):
    try:
        return fn(), None
    except SimulationAbort as err:
        return None, err
    except UltraLocalError as err:
        return None, SimulationAbort(float("nan"), "-", err)


def _cmd_list(args):
    for name, source, error in list_scenarios(args.dir):
        if error is None:
            print(f"  {name:<20} {source}")
        else:
            print(f"! {name:<20} {source}  [invalid: {error}]")
    return EXIT_OK


def _cmd_validate(args):
    try:
        sc = load_scenario(args.path)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.echo:
        sys.stdout.write(sc.to_yaml())
    else:
        print(f"ok: {sc.name} ({sc.plant.kind}, {sc.controller.kind})")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ultralocal",
        description="Closed-loop MFPC and HEOL experiments on a reactor and a two-tank plant.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one or more scenarios")
    run.add_argument("scenario", nargs="+", help="preset name or path to a YAML scenario")
    run.add_argument("--out", default=".", help="output directory (default: current directory)")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--plot", action="store_true", help="also write <name>.png")
    run.add_argument("--batch", action="store_true", help="run the scenarios in parallel processes")
    run.add_argument("--jobs", type=int, default=None, help="worker count for --batch")
    run.set_defaults(func=_cmd_run)

    lst = sub.add_parser("list", help="list presets and scenario files")
    lst.add_argument("--dir", default=None, help="also list *.yaml scenarios found here")
    lst.set_defaults(func=_cmd_list)

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("path")
    val.add_argument("--echo", action="store_true", help="print the normalised scenario")
    val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse usage errors are configuration errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
