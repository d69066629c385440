"""Command-line entry point: ``termitehill run|sweep|world|validate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError
from .experiment import density_sweep, emit_csv, emit_summary_csv, run_experiment
from .scenario import load_scenario
from .world import mean_series, run_world, write_series

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("need at least one value")
    return values


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="termitehill", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_args(sp):
        sp.add_argument("scenario", help="scenario file or shipped profile name (e.g. table1-static)")
        sp.add_argument("--out", default="results", help="output directory (default: results)")
        sp.add_argument("--seed", type=int, help="base seed; replication k uses seed + k")
        sp.add_argument("--replications", type=int, help="override the replication count")
        sp.add_argument("--trace", action="store_true", help="also write one trace log per run")

    r = sub.add_parser("run", help="run every replication of a scenario")
    scenario_args(r)
    r.add_argument("--protocol", help="override the protocol")
    r.add_argument("--nodes", type=int, help="override the node count")

    s = sub.add_parser("sweep", help="run a scenario at several node counts")
    scenario_args(s)
    s.add_argument("--nodes", type=_int_list, default=[9, 25, 49, 81, 100],
                   help="comma-separated node counts (default: 9,25,49,81,100)")
    s.add_argument("--protocols", type=_str_list,
                   help="comma-separated protocols on paired seeds (default: the scenario's)")

    w = sub.add_parser("world", help="simulate termites piling wood")
    w.add_argument("--termites", type=int, default=200)
    w.add_argument("--woods", type=int, default=100)
    w.add_argument("--size", type=int, default=200, help="grid side length in cells")
    w.add_argument("--steps", type=int, default=7000)
    w.add_argument("--seeds", type=int, default=5, help="number of seeds")
    w.add_argument("--seed", type=int, default=1, help="first seed")
    w.add_argument("--sample-every", type=int, default=1)
    w.add_argument("--out", default="results")

    v = sub.add_parser("validate", help="check a scenario file and print it fully resolved")
    v.add_argument("scenario")
    return p


def _apply_overrides(sc, args):
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.replications is not None:
        changes["replications"] = args.replications
    if getattr(args, "protocol", None):
        changes["protocol"] = args.protocol
    if isinstance(getattr(args, "nodes", None), int):
        changes["nodes"] = args.nodes
    return sc.replace(**changes) if changes else sc


def _progress(r):
    if r.error:
        logging.error("%s n=%d run %d seed %d FAILED: %s", r.protocol, r.n_nodes, r.run, r.seed, r.error)
    else:
        logging.info("%s n=%d run %d seed %d: %d/%d delivered", r.protocol, r.n_nodes, r.run,
                     r.seed, r.delivered, r.generated)


def _report(experiments, base: Path) -> int:
    csv_path = emit_csv(experiments, base.with_suffix(".csv"))
    emit_summary_csv(experiments, base.parent / f"{base.name}-summary.csv")
    print(csv_path)
    failed = sum(len(e.failed) for e in experiments)
    if failed:
        print(f"{failed} run(s) failed; aggregates marked partial", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_run(args) -> int:
    sc = _apply_overrides(load_scenario(args.scenario), args)
    out = Path(args.out)
    trace_dir = out / "traces" if args.trace else None
    exp = run_experiment(sc, trace_dir=trace_dir, progress=_progress)
    return _report([exp], out / f"{sc.name}-{sc.protocol}-n{sc.nodes}")


def cmd_sweep(args) -> int:
    sc = _apply_overrides(load_scenario(args.scenario), args)
    if any(n < 2 for n in args.nodes):
        raise ConfigError("every node count must be >= 2")
    protocols = args.protocols or [sc.protocol]
    probe = [sc.replace(protocol=p) for p in protocols]  # validates the names up front
    del probe
    out = Path(args.out)
    trace_dir = out / "traces" if args.trace else None
    exps = density_sweep(sc, args.nodes, protocols, trace_dir=trace_dir, progress=_progress)
    return _report(exps, out / f"{sc.name}-sweep")


def cmd_world(args) -> int:
    for name in ("termites", "woods", "steps", "seeds"):
        if getattr(args, name) < 0 or (name == "seeds" and args.seeds < 1):
            raise ConfigError(f"--{name} out of range")
    if args.size < 1:
        raise ConfigError("--size must be >= 1")
    out = Path(args.out)
    stem = f"world-t{args.termites}-w{args.woods}-s{args.size}"
    runs = []
    for seed in range(args.seed, args.seed + args.seeds):
        series = run_world(args.woods, args.termites, args.steps, args.size, args.size, seed, args.sample_every)
        write_series(series, out / f"{stem}-seed{seed}.csv")
        runs.append(series)
        logging.info("world seed %d: %s", seed, series[-1])
    path = write_series(mean_series(runs), out / f"{stem}-mean.csv")
    print(path)
    return EXIT_OK


def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    sys.stdout.write(sc.to_text())
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "world": cmd_world, "validate": cmd_validate}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime failure
        logging.exception("runtime failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
