"""Experiment harness: seeded sweeps comparing the ODE tier against the
exact tier.

A sweep fixes one topology, draws many random rate combinations on it,
classifies every instance by its predicted regime, runs the node-level
ODE and the path sampler from the same initial state (one random infected
node and one random patched node), and reports sup/L2 deviations between
the aggregate curves.  Everything is deterministic given the master seed.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics, equilibria, exactsim, netmodel
from ._rng import derive_seed
from .netmodel import RateNetwork, RateRanges
from .rates import RateFamily, RateModel

__all__ = [
    "ExperimentConfig",
    "InstanceResult",
    "DeviationResult",
    "ComparisonReport",
    "run_sweep",
    "deviation",
    "emit_report",
    "validate_report_dict",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

COLLECTIONS = ("susceptible", "infected", "patched", "mixed", "unclassified")

_REGIME_TO_COLLECTION = {
    "susceptible_attractor": "susceptible",
    "infected_attractor": "infected",
    "patched_attractor": "patched",
    "mixed_attractor": "mixed",
    "unclassified": "unclassified",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one sweep.

    ``topology`` is a dict: {"kind": "scale-free", "n", "attach", "seed"}
    or {"kind": "small-world", "n", "k", "rewire_p", "seed"}.  The
    topology is generated once; each instance redraws the rates.  With
    ``g_equals_h`` the two patching matrices are tied (delta2 := delta1),
    so the delta2 range is unused.
    """

    topology: dict
    rate_ranges: RateRanges = netmodel.DEFAULT_RATE_RANGES
    family: RateFamily = RateFamily.LINEAR
    saturation: float | None = None
    g_equals_h: bool = True
    sweep_count: int = 10
    master_seed: int = 0
    t_end: float = 20.0
    dt: float | None = None
    paths: int = 10_000
    grid_points: int = 200
    workers: int = 1
    deviation_threshold: float = 0.05
    initial_rule: str = "one_infected_one_patched"

    def __post_init__(self):
        kind = self.topology.get("kind")
        if kind not in ("scale-free", "small-world"):
            raise ValueError(f"unknown topology kind {kind!r}")
        if int(self.topology.get("n", 0)) < 3:
            raise ValueError("topology needs at least 3 nodes")
        if self.sweep_count < 1:
            raise ValueError("sweep_count must be at least 1")
        if self.t_end <= 0 or self.paths < 1 or self.grid_points < 2:
            raise ValueError("t_end, paths and grid_points must be positive")
        if self.initial_rule != "one_infected_one_patched":
            raise ValueError(f"unknown initial rule {self.initial_rule!r}")
        object.__setattr__(self, "family", RateFamily(self.family))
        if not isinstance(self.rate_ranges, RateRanges):
            object.__setattr__(
                self, "rate_ranges",
                RateRanges(**{k: tuple(v) for k, v in self.rate_ranges.items()}))

    def to_dict(self) -> dict:
        return {
            "topology": dict(self.topology),
            "rate_ranges": {
                name: list(getattr(self.rate_ranges, name))
                for name in ("beta", "delta1", "delta2", "gamma", "alpha")
            },
            "model": {
                "family": self.family.value,
                "saturation": self.saturation,
                "g_equals_h": self.g_equals_h,
            },
            "sweep_count": self.sweep_count,
            "master_seed": self.master_seed,
            "t_end": self.t_end,
            "dt": self.dt,
            "paths": self.paths,
            "grid_points": self.grid_points,
            "workers": self.workers,
            "deviation_threshold": self.deviation_threshold,
            "initial_rule": self.initial_rule,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        model = doc.get("model", {})
        kwargs = {
            "topology": doc["topology"],
            "family": model.get("family", "linear"),
            "saturation": model.get("saturation"),
            "g_equals_h": bool(model.get("g_equals_h", True)),
        }
        if "rate_ranges" in doc:
            kwargs["rate_ranges"] = RateRanges(
                **{k: tuple(v) for k, v in doc["rate_ranges"].items()})
        for key in ("sweep_count", "master_seed", "t_end", "dt", "paths",
                    "grid_points", "workers", "deviation_threshold",
                    "initial_rule"):
            if key in doc:
                kwargs[key] = doc[key]
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class DeviationResult:
    sup_infected: float
    sup_patched: float
    l2_infected: float
    l2_patched: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def deviation(traj_a, traj_b) -> DeviationResult:
    """Sup and time-weighted RMS distance between the aggregate curves of
    two trajectory-like objects sharing one grid."""
    ta = np.asarray(traj_a.times)
    tb = np.asarray(traj_b.times)
    if ta.shape != tb.shape or not np.allclose(ta, tb, rtol=0, atol=1e-12):
        raise ValueError("trajectories are not on a common grid")
    span = float(ta[-1] - ta[0])
    if span <= 0:
        raise ValueError("degenerate time grid")

    def metrics(a, b):
        diff = np.asarray(a) - np.asarray(b)
        sup = float(np.max(np.abs(diff)))
        l2 = float(np.sqrt(np.trapezoid(diff**2, ta) / span))
        return sup, l2

    sup_i, l2_i = metrics(traj_a.infected_fraction, traj_b.infected_fraction)
    sup_p, l2_p = metrics(traj_a.patched_fraction, traj_b.patched_fraction)
    return DeviationResult(sup_i, sup_p, l2_i, l2_p)


@dataclass
class InstanceResult:
    index: int
    collection: str = "unclassified"
    spectral: dict | None = None
    initial_infected: int = -1
    initial_patched: int = -1
    deviation: DeviationResult | None = None
    runtime_ode: float = 0.0
    runtime_exact: float = 0.0
    error: str | None = None
    # transient, excluded from serialization
    ode_trajectory: object = field(default=None, repr=False, compare=False)
    exact_trajectory: object = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "collection": self.collection,
            "spectral": self.spectral,
            "initial_infected": self.initial_infected,
            "initial_patched": self.initial_patched,
            "deviation": None if self.deviation is None else self.deviation.to_dict(),
            "runtime_ode": self.runtime_ode,
            "runtime_exact": self.runtime_exact,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "InstanceResult":
        dev = doc.get("deviation")
        return cls(
            index=doc["index"],
            collection=doc["collection"],
            spectral=doc.get("spectral"),
            initial_infected=doc.get("initial_infected", -1),
            initial_patched=doc.get("initial_patched", -1),
            deviation=None if dev is None else DeviationResult(**dev),
            runtime_ode=doc.get("runtime_ode", 0.0),
            runtime_exact=doc.get("runtime_exact", 0.0),
            error=doc.get("error"),
        )


@dataclass
class ComparisonReport:
    config: dict
    instances: list[InstanceResult]

    def collection_summary(self) -> dict:
        summary = {}
        for label in COLLECTIONS:
            devs = [r.deviation for r in self.instances
                    if r.collection == label and r.deviation is not None]
            entry = {"count": sum(1 for r in self.instances
                                  if r.collection == label)}
            if devs:
                entry.update(
                    max_sup_infected=max(d.sup_infected for d in devs),
                    max_sup_patched=max(d.sup_patched for d in devs),
                    mean_sup_infected=float(np.mean([d.sup_infected for d in devs])),
                    mean_sup_patched=float(np.mean([d.sup_patched for d in devs])),
                )
            summary[label] = entry
        summary["errors"] = sum(1 for r in self.instances if r.error is not None)
        return summary

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "instances": [r.to_dict() for r in self.instances],
            "collections": self.collection_summary(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ComparisonReport":
        validate_report_dict(doc)
        return cls(
            config=doc["config"],
            instances=[InstanceResult.from_dict(d) for d in doc["instances"]],
        )


def validate_report_dict(doc: dict) -> None:
    """Schema check for a serialized report; raises ValueError on problems."""
    if not isinstance(doc, dict):
        raise ValueError("report must be an object")
    for key in ("config", "instances", "collections"):
        if key not in doc:
            raise ValueError(f"report missing field '{key}'")
    if not isinstance(doc["instances"], list):
        raise ValueError("'instances' must be an array")
    for k, rec in enumerate(doc["instances"]):
        for key in ("index", "collection"):
            if key not in rec:
                raise ValueError(f"instances[{k}] missing field '{key}'")
        if rec["collection"] not in COLLECTIONS:
            raise ValueError(
                f"instances[{k}] has unknown collection {rec['collection']!r}")
        dev = rec.get("deviation")
        if dev is not None:
            for key in ("sup_infected", "sup_patched", "l2_infected", "l2_patched"):
                if key not in dev:
                    raise ValueError(f"instances[{k}].deviation missing '{key}'")
                if not isinstance(dev[key], (int, float)) or dev[key] < 0:
                    raise ValueError(
                        f"instances[{k}].deviation.{key} must be nonnegative")


def _instance_network(cfg: ExperimentConfig, index: int) -> RateNetwork:
    topo = cfg.topology
    rate_seed = derive_seed(cfg.master_seed, index, 0)
    topo_seed = int(topo.get("seed", 0))
    if topo["kind"] == "scale-free":
        net = netmodel.generate_scale_free(
            int(topo["n"]), int(topo.get("attach", 3)), cfg.rate_ranges,
            seed=rate_seed, topology_seed=topo_seed)
    else:
        net = netmodel.generate_small_world(
            int(topo["n"]), int(topo.get("k", 6)),
            float(topo.get("rewire_p", 0.1)), cfg.rate_ranges,
            seed=rate_seed, topology_seed=topo_seed)
    if cfg.g_equals_h:
        net = dataclasses.replace(net, delta2=net.delta1)
    return net


def _instance_model(cfg: ExperimentConfig, net: RateNetwork) -> RateModel:
    return RateModel(net, cfg.family, cfg.saturation, cfg.saturation,
                     cfg.saturation, g_equals_h=cfg.g_equals_h)


def run_instance(cfg: ExperimentConfig, index: int) -> InstanceResult:
    """One sweep instance: draw rates, classify, run both tiers, compare."""
    result = InstanceResult(index=index)
    net = _instance_network(cfg, index)
    model = _instance_model(cfg, net)

    regime = equilibria.classify(model, tol=1e-10)
    result.collection = _REGIME_TO_COLLECTION[regime.predicted]
    result.spectral = regime.spectral.to_dict()
    result.spectral.pop("iterations", None)
    result.spectral.pop("residuals", None)

    rng = np.random.default_rng(derive_seed(cfg.master_seed, index, 1))
    infected_node, patched_node = (int(v) for v in
                                   rng.choice(net.n, size=2, replace=False))
    result.initial_infected = infected_node
    result.initial_patched = patched_node

    t0 = time.perf_counter()
    ode_traj = dynamics.integrate(
        model,
        dynamics.PopulationState.from_nodes(net.n, [infected_node], [patched_node]),
        cfg.t_end, dt=cfg.dt, grid_points=cfg.grid_points)
    result.runtime_ode = time.perf_counter() - t0

    t0 = time.perf_counter()
    exact_traj = exactsim.gillespie(
        net,
        exactsim.ChainState.from_nodes(net.n, [infected_node], [patched_node]),
        cfg.t_end, cfg.paths, seed=derive_seed(cfg.master_seed, index, 2),
        grid_points=cfg.grid_points, workers=cfg.workers)
    result.runtime_exact = time.perf_counter() - t0

    result.deviation = deviation(ode_traj, exact_traj)
    result.ode_trajectory = ode_traj
    result.exact_trajectory = exact_traj
    return result


def run_sweep(cfg: ExperimentConfig, progress: bool = False) -> ComparisonReport:
    """Run all instances; per-instance failures are recorded, not raised."""
    instances = []
    for index in range(cfg.sweep_count):
        try:
            result = run_instance(cfg, index)
        except Exception as exc:  # noqa: BLE001 - failures become report rows
            result = InstanceResult(index=index, error=f"{type(exc).__name__}: {exc}")
        instances.append(result)
        if progress:
            dev = result.deviation
            detail = (f"sup_i={dev.sup_infected:.4f} sup_p={dev.sup_patched:.4f}"
                      if dev else f"error: {result.error}")
            print(f"[{index + 1}/{cfg.sweep_count}] {result.collection:<12} {detail}")
    return ComparisonReport(config=cfg.to_dict(), instances=instances)


def write_trajectory_csv(path, traj) -> None:
    """Columns: t, I_1..I_N, P_1..P_N, I_agg, P_agg (nodes in file order)."""
    n = traj.infected.shape[1]
    header = ",".join(
        ["t"] + [f"I_{k + 1}" for k in range(n)] + [f"P_{k + 1}" for k in range(n)]
        + ["I_agg", "P_agg"])
    table = np.column_stack([
        traj.times, traj.infected, traj.patched,
        traj.infected_fraction, traj.patched_fraction,
    ])
    np.savetxt(path, table, delimiter=",", header=header, comments="")


def read_trajectory_csv(path) -> dynamics.Trajectory:
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = (table.shape[1] - 3) // 2
    return dynamics.Trajectory(
        times=table[:, 0],
        infected=table[:, 1:1 + n],
        patched=table[:, 1 + n:1 + 2 * n],
    )


def emit_report(report: ComparisonReport, out_dir) -> None:
    """Write report.json plus per-instance trajectory CSV pairs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    validate_report_dict(doc)
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n")
    for result in report.instances:
        if result.ode_trajectory is not None:
            write_trajectory_csv(
                out / f"instance_{result.index:03d}_ode.csv",
                result.ode_trajectory)
        if result.exact_trajectory is not None:
            write_trajectory_csv(
                out / f"instance_{result.index:03d}_exact.csv",
                result.exact_trajectory)
