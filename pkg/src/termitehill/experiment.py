"""Replicated simulation runs, metric aggregation and CSV output."""

from __future__ import annotations

import csv
import logging
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

from .network import Network, Trace, place_nodes
from .protocol import Protocol, protocol_class
from .scenario import Scenario
from .sim import RngService, Simulator

log = logging.getLogger(__name__)

CSV_HEADER = [
    "protocol", "scenario", "n_nodes", "run", "seed", "generated", "delivered",
    "success_rate_pct", "energy_j", "efficiency_kbits_per_j", "latency_s",
]
METRICS = ("generated", "delivered", "success_rate_pct", "energy_j", "efficiency_kbits_per_j", "latency_s")


@dataclass
class RunResult:
    protocol: str
    scenario: str
    n_nodes: int
    run: int
    seed: int
    generated: int
    delivered: int
    success_rate_pct: float | None
    energy_j: float
    efficiency_kbits_per_j: float | None
    latency_s: float | None
    counts: dict = field(default_factory=dict)
    error: str | None = None

    def metric(self, name: str):
        return getattr(self, name)


def compute_metrics(generated: int, delivered: int, energy_j: float, payload_bits: int,
                    latencies: Iterable[float] = ()) -> dict:
    """Success rate (%), energy efficiency (kbit/J) and mean latency.

    Undefined values (nothing generated, nothing spent, nothing delivered)
    come back as ``None``.
    """
    lat = list(latencies)
    return {
        "success_rate_pct": 100.0 * delivered / generated if generated else None,
        "efficiency_kbits_per_j": (delivered * payload_bits / 1000.0) / energy_j if energy_j > 0 else None,
        "latency_s": math.fsum(lat) / len(lat) if lat else None,
    }


class Simulation:
    """One fully wired run: simulator, network, protocol and traffic."""

    def __init__(self, scenario: Scenario, seed: int, run: int = 0, trace: IO[str] | None = None):
        self.scenario = scenario
        self.seed = seed
        self.run_index = run
        sc = scenario
        rngs = RngService(seed)
        self.sim = Simulator()
        positions = place_nodes(
            sc.nodes, sc.area, (sc.sink_x, sc.sink_y), sc.radio.range,
            rngs.stream("placement"), connected=sc.placement == "random-connected",
        )
        self.net = Network(
            self.sim, positions, 0, sc.radio, sc.energy, sc.mac, sc.area,
            rngs.stream("radio"), Trace(trace) if trace is not None else None,
        )
        cls = protocol_class(sc.protocol)
        self.protocol: Protocol = cls(self.net, sc.params, rngs.stream("protocol"), sc.duration)
        self.protocol.start()
        traffic = rngs.stream("traffic")
        for s in sc.source_ids:
            self.net.generate_traffic(s, sc.traffic_rate, sc.duration, traffic)
        if sc.sink_mode == "dynamic":
            self.net.start_sink_motion(sc.t_change, sc.duration, rngs.stream("sink-motion"))
        self.net.start_idle_drain(sc.duration)

    def run(self) -> RunResult:
        self.sim.run(self.scenario.duration)
        return self.result()

    def result(self) -> RunResult:
        net, sc = self.net, self.scenario
        energy = net.total_energy_consumed()
        m = compute_metrics(net.log.generated, net.log.n_delivered, energy,
                            8 * sc.params.worker_bytes, net.log.delivered.values())
        counts = dict(net.stats)
        counts.update(getattr(self.protocol, "counts", {}))
        return RunResult(
            sc.protocol, sc.name, sc.nodes, self.run_index, self.seed,
            net.log.generated, net.log.n_delivered, m["success_rate_pct"], energy,
            m["efficiency_kbits_per_j"], m["latency_s"], counts,
        )


def run_once(scenario: Scenario, seed: int, run: int = 0, trace: IO[str] | None = None) -> RunResult:
    return Simulation(scenario, seed, run, trace).run()


def seeds_for(scenario: Scenario) -> list[int]:
    return [scenario.base_seed + k for k in range(scenario.replications)]


@dataclass
class Aggregate:
    n: int
    mean: dict
    sd: dict


def aggregate(runs: Sequence[RunResult]) -> Aggregate:
    """Mean and sample standard deviation of each metric over the completed runs."""
    ok = [r for r in runs if r.error is None]
    mean, sd = {}, {}
    for name in METRICS:
        vals = [float(r.metric(name)) for r in ok if r.metric(name) is not None]
        mean[name] = math.fsum(vals) / len(vals) if vals else None
        sd[name] = statistics.stdev(vals) if len(vals) > 1 else (0.0 if vals else None)
    return Aggregate(len(ok), mean, sd)


@dataclass
class Experiment:
    scenario: Scenario
    runs: list[RunResult]

    @property
    def failed(self) -> list[RunResult]:
        return [r for r in self.runs if r.error is not None]

    @property
    def summary(self) -> Aggregate:
        return aggregate(self.runs)


def run_experiment(scenario: Scenario, trace_dir: str | Path | None = None,
                   progress=None) -> Experiment:
    """All replications of ``scenario`` with seeds ``base_seed + k``.

    A replication that raises is recorded with its error and excluded from
    the aggregate; the other replications still run.
    """
    runs = []
    for k, seed in enumerate(seeds_for(scenario)):
        fh = None
        try:
            if trace_dir is not None:
                Path(trace_dir).mkdir(parents=True, exist_ok=True)
                fh = open(Path(trace_dir) / f"{scenario.name}-{scenario.protocol}-n{scenario.nodes}-run{k}.trace", "w")
            runs.append(run_once(scenario, seed, k, fh))
        except Exception as exc:  # keep the remaining replications going
            log.error("run %d (seed %d) failed: %s", k, seed, exc)
            runs.append(RunResult(scenario.protocol, scenario.name, scenario.nodes, k, seed,
                                  0, 0, None, 0.0, None, None, error=f"{type(exc).__name__}: {exc}"))
        finally:
            if fh is not None:
                fh.close()
        if progress is not None:
            progress(runs[-1])
    return Experiment(scenario, runs)


def density_sweep(scenario: Scenario, node_counts: Iterable[int], protocols: Iterable[str] | None = None,
                  **kwargs) -> list[Experiment]:
    protos = list(protocols) if protocols is not None else [scenario.protocol]
    out = []
    for proto in protos:
        for n in node_counts:
            out.append(run_experiment(scenario.replace(protocol=proto, nodes=n), **kwargs))
    return out


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, int):
        return str(v)
    return format(v, ".6g")


def _ordered(experiments: Iterable[Experiment]) -> list[Experiment]:
    return sorted(experiments, key=lambda e: (e.scenario.protocol, e.scenario.nodes))


def csv_rows(experiments: Iterable[Experiment]) -> list[list[str]]:
    """Rows grouped by (protocol, N), runs in order, then the group aggregate.

    When a replication failed the aggregate is invalid: its metrics are
    ``NA`` and the seed column reads ``partial:n=<ok>/<total>``.
    """
    rows = []
    for exp in _ordered(experiments):
        sc = exp.scenario
        for r in sorted(exp.runs, key=lambda r: r.run):
            if r.error is not None:
                rows.append([r.protocol, r.scenario, str(r.n_nodes), str(r.run), str(r.seed)]
                            + ["NA"] * len(METRICS))
                continue
            rows.append([r.protocol, r.scenario, str(r.n_nodes), str(r.run), str(r.seed)]
                        + [_fmt(r.metric(m)) for m in METRICS])
        agg = exp.summary
        if exp.failed:
            rows.append([sc.protocol, sc.name, str(sc.nodes), "aggregate",
                         f"partial:n={agg.n}/{len(exp.runs)}"] + ["NA"] * len(METRICS))
        else:
            rows.append([sc.protocol, sc.name, str(sc.nodes), "aggregate", f"n={agg.n}"]
                        + [_fmt(agg.mean[m]) for m in METRICS])
    return rows


def emit_csv(experiments: Iterable[Experiment], path: str | Path) -> Path:
    """Per-run rows followed by one ``aggregate`` row (mean over runs) per group."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        w.writerows(csv_rows(experiments))
    return path


def emit_summary_csv(experiments: Iterable[Experiment], path: str | Path) -> Path:
    """One row per group with mean and sample standard deviation of each metric.

    Statistics cover the completed runs; ``failed`` counts the others.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["protocol", "scenario", "n_nodes", "runs", "failed"]
    for m in METRICS:
        header += [f"{m}_mean", f"{m}_sd"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for exp in _ordered(experiments):
            sc, agg = exp.scenario, exp.summary
            row = [sc.protocol, sc.name, str(sc.nodes), str(agg.n), str(len(exp.failed))]
            for m in METRICS:
                row += [_fmt(agg.mean[m]), _fmt(agg.sd[m])]
            w.writerow(row)
    return path
