"""Two-layer rate networks for virus-patch dynamics.

A :class:`RateNetwork` bundles the directed infection-rate matrix (the
virus-propagating layer), the two directed patching-rate matrices (the
patch-distributing layer), and the per-node recovery and patch-failure
rates.  Matrix convention throughout: ``rate[i][j]`` is the rate at which
node ``j`` acts on node ``i``.

Networks are plain immutable value objects.  Construction only checks
structural sanity (shapes, finiteness); the modelling invariants are
checked by :func:`validate`, which reports rather than raises so that
deliberately broken networks can be inspected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from ._rng import derive_seed

__all__ = [
    "RateNetwork",
    "RateRanges",
    "ValidationReport",
    "CheckResult",
    "InvalidNetworkError",
    "NetworkFormatError",
    "TopologyError",
    "DEFAULT_RATE_RANGES",
    "validate",
    "generate_scale_free",
    "generate_small_world",
    "save",
    "load",
]


class InvalidNetworkError(ValueError):
    """A network violates a modelling invariant."""


class NetworkFormatError(ValueError):
    """A network file could not be parsed."""


class TopologyError(RuntimeError):
    """Topology generation failed (e.g. retry budget exhausted)."""


def _as_matrix(value, n: int, name: str) -> np.ndarray:
    a = np.asarray(value, dtype=float)
    if a.shape != (n, n):
        raise ValueError(f"{name} must have shape ({n}, {n}), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    a = a.copy()
    a.flags.writeable = False
    return a


def _as_vector(value, n: int, name: str) -> np.ndarray:
    a = np.asarray(value, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    a = a.copy()
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RateNetwork:
    """Rates and topology of the coupled virus/patch system.

    beta[i][j]   rate at which infected j infects susceptible i
    delta1[i][j] rate at which patched j patches susceptible i
    delta2[i][j] rate at which patched j patches infected i
    gamma[i]     reinstall (recovery) rate of node i
    alpha[i]     patch-failure rate of node i
    """

    beta: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        n = g.shape[0] if g.ndim == 1 else -1
        if n < 1:
            raise ValueError("gamma must be a non-empty 1-d vector")
        object.__setattr__(self, "beta", _as_matrix(self.beta, n, "beta"))
        object.__setattr__(self, "delta1", _as_matrix(self.delta1, n, "delta1"))
        object.__setattr__(self, "delta2", _as_matrix(self.delta2, n, "delta2"))
        object.__setattr__(self, "gamma", _as_vector(self.gamma, n, "gamma"))
        object.__setattr__(self, "alpha", _as_vector(self.alpha, n, "alpha"))

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RateNetwork):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("beta", "delta1", "delta2", "gamma", "alpha")
        )


@dataclass(frozen=True)
class RateRanges:
    """Uniform sampling ranges (lo, hi) for generated rates."""

    beta: tuple[float, float] = (0.1, 0.5)
    delta1: tuple[float, float] = (0.1, 0.5)
    delta2: tuple[float, float] = (0.1, 0.5)
    gamma: tuple[float, float] = (0.5, 1.5)
    alpha: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        for name in ("beta", "delta1", "delta2", "gamma", "alpha"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError(f"{name} range must be finite")
            if lo < 0 or lo > hi:
                raise ValueError(
                    f"invalid {name} range ({lo}, {hi}): need 0 <= min <= max"
                )
        # per-node rates must be samplable strictly positive
        for name in ("gamma", "alpha"):
            lo, _ = getattr(self, name)
            if lo <= 0:
                raise ValueError(f"{name} range must have positive lower bound")


DEFAULT_RATE_RANGES = RateRanges()


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _support_digraph(matrix: np.ndarray) -> nx.DiGraph:
    # edge j -> i whenever matrix[i][j] > 0 (j acts on i)
    g = nx.DiGraph()
    g.add_nodes_from(range(matrix.shape[0]))
    src, dst = np.nonzero(matrix.T > 0)
    g.add_edges_from(zip(src.tolist(), dst.tolist()))
    return g


def validate(net: RateNetwork) -> ValidationReport:
    """Check all modelling invariants of a network; never raises.

    Strong connectivity of each layer's support digraph is checked with a
    linear-time strongly-connected-components search.
    """
    checks: list[CheckResult] = []

    def add(name: str, passed: bool, detail: str = ""):
        checks.append(CheckResult(name, bool(passed), detail))

    neg = min(net.beta.min(), net.delta1.min(), net.delta2.min())
    add("nonnegative_rates", neg >= 0, f"minimum matrix entry {neg:g}")
    add("positive_gamma", net.gamma.min() > 0, f"min gamma {net.gamma.min():g}")
    add("positive_alpha", net.alpha.min() > 0, f"min alpha {net.alpha.min():g}")

    diags = [np.abs(np.diag(m)).max() for m in (net.beta, net.delta1, net.delta2)]
    add("zero_diagonal", max(diags) == 0,
        "a node must not infect or patch itself")

    mismatch = np.argwhere((net.delta1 > 0) != (net.delta2 > 0))
    add("patch_support_consistency", mismatch.size == 0,
        "" if mismatch.size == 0 else
        f"delta1/delta2 support differs at (i, j) = {tuple(mismatch[0])}")

    for name, matrix in (("virus_layer_strongly_connected", net.beta),
                         ("patch_layer_strongly_connected", net.delta1)):
        sc = net.n == 1 or nx.is_strongly_connected(_support_digraph(matrix))
        add(name, sc, "" if sc else "support digraph is not strongly connected")

    return ValidationReport(tuple(checks))


def _require_valid(net: RateNetwork, context: str,
                   require_strongly_connected: bool = True) -> None:
    report = validate(net)
    for check in report.failures():
        if not require_strongly_connected and check.name.endswith("strongly_connected"):
            continue
        raise InvalidNetworkError(
            f"{context}: check '{check.name}' failed ({check.detail})"
        )


def _sample_rates(g_virus: nx.Graph, g_patch: nx.Graph, n: int,
                  ranges: RateRanges, rng: np.random.Generator) -> RateNetwork:
    """Assign uniformly sampled rates to each directed edge and node."""
    beta = np.zeros((n, n))
    delta1 = np.zeros((n, n))
    delta2 = np.zeros((n, n))
    # fixed edge order keeps sampling deterministic for a given topology
    for u, v in sorted(tuple(sorted(e)) for e in g_virus.edges()):
        beta[u, v] = rng.uniform(*ranges.beta)
        beta[v, u] = rng.uniform(*ranges.beta)
    for u, v in sorted(tuple(sorted(e)) for e in g_patch.edges()):
        delta1[u, v] = rng.uniform(*ranges.delta1)
        delta1[v, u] = rng.uniform(*ranges.delta1)
        delta2[u, v] = rng.uniform(*ranges.delta2)
        delta2[v, u] = rng.uniform(*ranges.delta2)
    gamma = rng.uniform(*ranges.gamma, size=n)
    alpha = rng.uniform(*ranges.alpha, size=n)
    return RateNetwork(beta, delta1, delta2, gamma, alpha)


def _ba_graph(n: int, attach: int, seed: int) -> nx.Graph:
    if n == attach:
        return nx.complete_graph(n)
    # seed the growth with a small complete graph so minimal cases (e.g.
    # n = attach + 1) come out fully connected
    initial = nx.complete_graph(max(attach, 2))
    return nx.barabasi_albert_graph(n, attach, seed=seed, initial_graph=initial)


def generate_scale_free(n: int, attach: int,
                        rate_ranges: RateRanges = DEFAULT_RATE_RANGES,
                        seed: int = 0, *,
                        independent_layers: bool = False,
                        topology_seed: int | None = None) -> RateNetwork:
    """Preferential-attachment topology with uniformly sampled rates.

    The undirected attachment graph is used as symmetric support for both
    layers; with ``independent_layers`` the patch layer gets its own draw.
    ``topology_seed`` pins the topology separately from the rate draws so
    parameter sweeps can rerun on a fixed graph.
    """
    if not (n >= attach >= 1):
        raise ValueError(f"need n >= attach >= 1, got n={n}, attach={attach}")
    if n < 2:
        raise ValueError("need at least 2 nodes")
    t_seed = derive_seed(seed, 0) if topology_seed is None else int(topology_seed)
    g_virus = _ba_graph(n, attach, seed=t_seed % 2**32)
    g_patch = (_ba_graph(n, attach, seed=derive_seed(t_seed, 1) % 2**32)
               if independent_layers else g_virus)
    net = _sample_rates(g_virus, g_patch, n, rate_ranges,
                        np.random.default_rng(derive_seed(seed, 1)))
    _require_valid(net, "generated scale-free network")
    return net


def generate_small_world(n: int, k: int, rewire_p: float,
                         rate_ranges: RateRanges = DEFAULT_RATE_RANGES,
                         seed: int = 0, *,
                         independent_layers: bool = False,
                         topology_seed: int | None = None,
                         max_tries: int = 100) -> RateNetwork:
    """Ring-lattice-with-rewiring topology with uniformly sampled rates.

    A rewiring pass that disconnects the graph is retried (up to
    ``max_tries`` whole passes); symmetric support then guarantees strong
    connectivity of both layers.
    """
    if not (n > k >= 2):
        raise ValueError(f"need n > k >= 2, got n={n}, k={k}")
    if k % 2 != 0:
        raise ValueError("k must be even")
    if not (0.0 <= rewire_p <= 1.0):
        raise ValueError("rewire_p must lie in [0, 1]")
    t_seed = derive_seed(seed, 0) if topology_seed is None else int(topology_seed)

    def connected_ws(s: int) -> nx.Graph:
        try:
            return nx.connected_watts_strogatz_graph(
                n, k, rewire_p, tries=max_tries, seed=s % 2**32)
        except nx.NetworkXError as exc:
            raise TopologyError(
                f"no connected rewiring found in {max_tries} tries") from exc

    g_virus = connected_ws(t_seed)
    g_patch = connected_ws(derive_seed(t_seed, 1)) if independent_layers else g_virus
    net = _sample_rates(g_virus, g_patch, n, rate_ranges,
                        np.random.default_rng(derive_seed(seed, 1)))
    _require_valid(net, "generated small-world network")
    return net


# ---------------------------------------------------------------------------
# serialization
#
# JSON document: {"n": int, "gamma": [...], "alpha": [...],
#                 "beta"/"delta1"/"delta2": [{"i":, "j":, "rate":}, ...]}
# with rate[i][j] = rate at which node j acts on node i; ids are 0-based.


def _edges_to_list(matrix: np.ndarray) -> list[dict]:
    ii, jj = np.nonzero(matrix)
    return [
        {"i": int(i), "j": int(j), "rate": float(matrix[i, j])}
        for i, j in zip(ii, jj)
    ]


def _edges_from_list(entries, n: int, name: str) -> np.ndarray:
    matrix = np.zeros((n, n))
    for idx, rec in enumerate(entries):
        try:
            i, j, rate = int(rec["i"]), int(rec["j"]), float(rec["rate"])
        except (TypeError, KeyError, ValueError) as exc:
            raise NetworkFormatError(
                f"{name}[{idx}]: expected {{'i', 'j', 'rate'}} record: {exc}"
            ) from None
        if not (0 <= i < n and 0 <= j < n):
            raise NetworkFormatError(
                f"{name}[{idx}]: node id out of range 0..{n - 1}")
        matrix[i, j] = rate
    return matrix


def save(net: RateNetwork, path) -> None:
    doc = {
        "n": net.n,
        "gamma": net.gamma.tolist(),
        "alpha": net.alpha.tolist(),
        "beta": _edges_to_list(net.beta),
        "delta1": _edges_to_list(net.delta1),
        "delta2": _edges_to_list(net.delta2),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load(path, *, require_strongly_connected: bool = True) -> RateNetwork:
    """Read a network file, enforcing all invariants.

    Raises :class:`NetworkFormatError` on parse/shape problems and
    :class:`InvalidNetworkError` when the parsed network breaks an
    invariant.  ``require_strongly_connected=False`` admits degenerate
    analytic fixtures whose layers are not strongly connected.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(
            f"{path}: parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from None
    if not isinstance(doc, dict):
        raise NetworkFormatError(f"{path}: top-level value must be an object")
    for key in ("n", "gamma", "alpha", "beta", "delta1", "delta2"):
        if key not in doc:
            raise NetworkFormatError(f"{path}: missing field '{key}'")
    try:
        n = int(doc["n"])
    except (TypeError, ValueError):
        raise NetworkFormatError(f"{path}: field 'n' must be an integer") from None
    if n < 1:
        raise NetworkFormatError(f"{path}: field 'n' must be positive")
    try:
        net = RateNetwork(
            beta=_edges_from_list(doc["beta"], n, "beta"),
            delta1=_edges_from_list(doc["delta1"], n, "delta1"),
            delta2=_edges_from_list(doc["delta2"], n, "delta2"),
            gamma=doc["gamma"],
            alpha=doc["alpha"],
        )
    except ValueError as exc:
        if isinstance(exc, NetworkFormatError):
            raise
        raise NetworkFormatError(f"{path}: {exc}") from None
    _require_valid(net, str(path), require_strongly_connected)
    return net
