"""Exact tier: the 3^n-state continuous-time Markov chain.

Node k occupies base-3 digit k of the state index (digit values: 0
susceptible, 1 infected, 2 patched; node 0 is the least-significant
digit).  The tier offers the sparse infinitesimal generator, a forward-
equation solver for small n, a residual check of the pairwise-joint flux
identity satisfied by the exact marginals, and an event-driven path
sampler whose grid averages estimate those marginals for moderate n.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from ._gillespie_kernel import sample_paths
from ._rk4 import rk4_on_grid
from ._rng import derive_seed
from .dynamics import Trajectory
from .netmodel import RateNetwork

__all__ = [
    "ChainState",
    "GeneratorMatrix",
    "DistributionTrajectory",
    "SampledTrajectory",
    "build_generator",
    "solve_forward",
    "marginals",
    "marginal_trajectory",
    "marginal_flux_residual",
    "gillespie",
    "state_digits",
]

MAX_GENERATOR_NODES = 12  # sparse-storage budget: 3^12 states
MAX_FORWARD_NODES = 8     # dense forward solving budget
MAX_RESIDUAL_NODES = 6


@dataclass(frozen=True)
class ChainState:
    """One configuration of the chain as per-node digits."""

    digits: tuple[int, ...]

    def __post_init__(self):
        digits = tuple(int(d) for d in self.digits)
        if not digits:
            raise ValueError("state must cover at least one node")
        if any(d not in (0, 1, 2) for d in digits):
            raise ValueError("digits must be 0 (S), 1 (I) or 2 (P)")
        object.__setattr__(self, "digits", digits)

    @property
    def n(self) -> int:
        return len(self.digits)

    @property
    def index(self) -> int:
        return sum(d * 3**k for k, d in enumerate(self.digits))

    @classmethod
    def from_index(cls, index: int, n: int) -> "ChainState":
        if not (0 <= index < 3**n):
            raise ValueError(f"index {index} out of range for {n} nodes")
        return cls(tuple((index // 3**k) % 3 for k in range(n)))

    @classmethod
    def from_nodes(cls, n: int, infected=(), patched=()) -> "ChainState":
        digits = [0] * n
        for i in infected:
            digits[i] = 1
        for i in patched:
            if digits[i] == 1:
                raise ValueError(f"node {i} marked both infected and patched")
            digits[i] = 2
        return cls(tuple(digits))


def state_digits(n: int) -> np.ndarray:
    """Digit table of all 3^n states: entry [s, k] is node k's digit."""
    idx = np.arange(3**n, dtype=np.int64)
    pow3 = 3 ** np.arange(n, dtype=np.int64)
    return ((idx[:, None] // pow3[None, :]) % 3).astype(np.int8)


@dataclass(frozen=True)
class GeneratorMatrix:
    """Sparse transition-rate matrix (rows are source states, rows sum to
    zero) together with the network it was built from."""

    matrix: sparse.csr_matrix
    net: RateNetwork

    @property
    def n(self) -> int:
        return self.net.n

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]


def build_generator(net: RateNetwork) -> GeneratorMatrix:
    """Assemble the infinitesimal generator from the five transition types:
    recovery (1->0), patch failure (2->0), infection (0->1), patching of a
    susceptible (0->2) and patching of an infected node (1->2)."""
    n = net.n
    if n > MAX_GENERATOR_NODES:
        raise ValueError(
            f"state space 3^{n} exceeds the sparse-storage budget "
            f"(n <= {MAX_GENERATOR_NODES})")
    n_states = 3**n
    digits = state_digits(n)
    inf_ind = (digits == 1).astype(np.float64)
    pat_ind = (digits == 2).astype(np.float64)
    pow3 = 3 ** np.arange(n, dtype=np.int64)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def emit(src: np.ndarray, offset: int, rate: np.ndarray) -> None:
        rows.append(src)
        cols.append(src + offset)
        vals.append(rate)

    for m in range(n):
        d = digits[:, m]
        inf_press = inf_ind @ net.beta[m]     # sum_k beta[m,k] * [digit_k == 1]
        pat1_press = pat_ind @ net.delta1[m]
        pat2_press = pat_ind @ net.delta2[m]

        src = np.nonzero((d == 0) & (inf_press > 0))[0]
        emit(src, pow3[m], inf_press[src])
        src = np.nonzero((d == 0) & (pat1_press > 0))[0]
        emit(src, 2 * pow3[m], pat1_press[src])
        src = np.nonzero(d == 1)[0]
        emit(src, -pow3[m], np.full(src.size, net.gamma[m]))
        src = np.nonzero((d == 1) & (pat2_press > 0))[0]
        emit(src, pow3[m], pat2_press[src])
        src = np.nonzero(d == 2)[0]
        emit(src, -2 * pow3[m], np.full(src.size, net.alpha[m]))

    row_arr = np.concatenate(rows) if rows else np.empty(0, np.int64)
    col_arr = np.concatenate(cols) if cols else np.empty(0, np.int64)
    val_arr = np.concatenate(vals) if vals else np.empty(0, np.float64)
    exit_rates = np.bincount(row_arr, weights=val_arr, minlength=n_states)

    row_arr = np.concatenate([row_arr, np.arange(n_states)])
    col_arr = np.concatenate([col_arr, np.arange(n_states)])
    val_arr = np.concatenate([val_arr, -exit_rates])
    matrix = sparse.coo_matrix(
        (val_arr, (row_arr, col_arr)), shape=(n_states, n_states)).tocsr()
    return GeneratorMatrix(matrix, net)


@dataclass(frozen=True)
class DistributionTrajectory:
    """Full state distribution recorded on a uniform time grid."""

    times: np.ndarray
    probabilities: np.ndarray  # (grid, 3^n)
    max_drift: float           # worst |sum - 1| seen before renormalization


def solve_forward(gen: GeneratorMatrix, s0: np.ndarray, t_end: float,
                  dt: float | None = None,
                  grid_points: int = 201) -> DistributionTrajectory:
    """Integrate the forward equation ds/dt = Q^T s on a uniform grid."""
    if gen.n > MAX_FORWARD_NODES:
        raise ValueError(
            f"forward solving is restricted to n <= {MAX_FORWARD_NODES}")
    s0 = np.asarray(s0, dtype=float)
    if s0.shape != (gen.n_states,):
        raise ValueError(f"s0 must have shape ({gen.n_states},)")
    if s0.min() < 0:
        raise ValueError("s0 must be nonnegative")
    if abs(s0.sum() - 1.0) > 1e-9:
        raise ValueError("s0 must sum to one")
    if t_end <= 0:
        raise ValueError("t_end must be positive")

    q_t = gen.matrix.T.tocsr()
    max_exit = float(-gen.matrix.diagonal().min())
    if dt is None:
        dt = 0.02 / max_exit if max_exit > 0 else t_end
    if dt <= 0:
        raise ValueError("dt must be positive")

    drift_seen = [0.0]

    def post(y: np.ndarray) -> np.ndarray:
        low = float(y.min())
        if low < -1e-9:
            raise RuntimeError(
                f"negative probability {low:g}: reduce the time step")
        if low < 0.0:
            y = np.maximum(y, 0.0)
        total = float(y.sum())
        drift = abs(total - 1.0)
        drift_seen[0] = max(drift_seen[0], drift)
        if drift > 1e-12:
            y = y / total
        return y

    times = np.linspace(0.0, t_end, grid_points)
    dists = rk4_on_grid(lambda y: q_t @ y, s0, times, dt, post_step=post)
    return DistributionTrajectory(times, dists, drift_seen[0])


def marginals(dist: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-node infection/patch probabilities of one distribution."""
    dist = np.asarray(dist, dtype=float)
    digits = state_digits(n)
    infected = (digits == 1).astype(float).T @ dist
    patched = (digits == 2).astype(float).T @ dist
    return infected, patched


def marginal_trajectory(traj: DistributionTrajectory, n: int) -> Trajectory:
    """Per-node marginals of a distribution trajectory, as a grid
    trajectory directly comparable with the ODE tier and path averages."""
    digits = state_digits(n)
    infected = traj.probabilities @ (digits == 1).astype(float)
    patched = traj.probabilities @ (digits == 2).astype(float)
    return Trajectory(times=traj.times, infected=infected, patched=patched)


def marginal_flux_residual(gen: GeneratorMatrix, s0: np.ndarray,
                           t_end: float, dt: float) -> float:
    """Max discrepancy between the centered time difference of the exact
    marginals and the flux computed from pairwise joint probabilities.

    The exact marginals satisfy, for each node i,

        dI_i/dt = sum_j beta[i,j]  Pr{X_i=0, X_j=1}
                - sum_j delta2[i,j] Pr{X_i=1, X_j=2} - gamma_i I_i
        dP_i/dt = sum_j delta1[i,j] Pr{X_i=0, X_j=2}
                + sum_j delta2[i,j] Pr{X_i=1, X_j=2} - alpha_i P_i

    so the residual is dominated by the O(dt^2) finite-difference error.
    """
    if gen.n > MAX_RESIDUAL_NODES:
        raise ValueError(
            f"residual check is restricted to n <= {MAX_RESIDUAL_NODES}")
    steps = max(2, round(t_end / dt))
    traj = solve_forward(gen, s0, t_end, dt=t_end / steps,
                         grid_points=steps + 1)
    spacing = traj.times[1] - traj.times[0]
    net = gen.net
    n = gen.n
    digits = state_digits(n)
    m0 = (digits == 0).astype(float)
    m1 = (digits == 1).astype(float)
    m2 = (digits == 2).astype(float)
    dist = traj.probabilities

    infected = dist @ m1
    patched = dist @ m2
    joint_01 = np.einsum("gs,si,sj->gij", dist, m0, m1)
    joint_12 = np.einsum("gs,si,sj->gij", dist, m1, m2)
    joint_02 = np.einsum("gs,si,sj->gij", dist, m0, m2)

    flux_inf = (np.einsum("ij,gij->gi", net.beta, joint_01)
                - np.einsum("ij,gij->gi", net.delta2, joint_12)
                - net.gamma[None, :] * infected)
    flux_pat = (np.einsum("ij,gij->gi", net.delta1, joint_02)
                + np.einsum("ij,gij->gi", net.delta2, joint_12)
                - net.alpha[None, :] * patched)

    diff_inf = (infected[2:] - infected[:-2]) / (2 * spacing)
    diff_pat = (patched[2:] - patched[:-2]) / (2 * spacing)
    return float(max(np.max(np.abs(diff_inf - flux_inf[1:-1])),
                     np.max(np.abs(diff_pat - flux_pat[1:-1]))))


# ---------------------------------------------------------------------------
# path sampling


@dataclass(frozen=True)
class SampledTrajectory:
    """Occupancy indicators averaged over sample paths on a uniform grid."""

    times: np.ndarray
    infected: np.ndarray  # (grid, n) averaged indicators
    patched: np.ndarray
    paths: int
    seed: int

    @property
    def n(self) -> int:
        return self.infected.shape[1]

    @property
    def infected_fraction(self) -> np.ndarray:
        return self.infected.mean(axis=1)

    @property
    def patched_fraction(self) -> np.ndarray:
        return self.patched.mean(axis=1)


def _csc_arrays(matrix: np.ndarray):
    csc = sparse.csc_matrix(matrix)
    return (csc.indptr.astype(np.int64), csc.indices.astype(np.int64),
            csc.data.astype(np.float64))


def _count_chunk(lo: int, hi: int, base_seed: int, x0_digits, adjacency,
                 gamma, alpha, grid, t_end):
    n = gamma.shape[0]
    counts_inf = np.zeros((grid.shape[0], n), dtype=np.int64)
    counts_pat = np.zeros((grid.shape[0], n), dtype=np.int64)
    sample_paths(lo, hi, np.uint64(base_seed), x0_digits, *adjacency,
                 gamma, alpha, grid, t_end, counts_inf, counts_pat)
    return counts_inf, counts_pat


def gillespie(net: RateNetwork, x0: ChainState, t_end: float, paths: int,
              seed: int = 0, grid_points: int = 200,
              workers: int = 1) -> SampledTrajectory:
    """Average ``paths`` exact sample paths of the chain on a uniform grid.

    Each path draws an exponential waiting time from the total transition
    rate, picks the firing node proportionally to its rate, then picks the
    target state from the node's conditional transition distribution; the
    all-rates-zero state is absorbing.  Paths use substreams derived from
    (seed, path index), and occupancy counts merge as integers, so results
    are bit-identical for any ``workers`` split.
    """
    if x0.n != net.n:
        raise ValueError("initial state size does not match the network")
    if paths < 1:
        raise ValueError("need at least one sample path")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    if workers < 1:
        raise ValueError("workers must be at least 1")

    grid = np.linspace(0.0, t_end, grid_points)
    x0_digits = np.asarray(x0.digits, dtype=np.int64)
    adjacency = (*_csc_arrays(net.beta), *_csc_arrays(net.delta1),
                 *_csc_arrays(net.delta2))
    gamma = net.gamma.astype(np.float64)
    alpha = net.alpha.astype(np.float64)
    base_seed = derive_seed(seed)

    if workers == 1:
        counts_inf, counts_pat = _count_chunk(
            0, paths, base_seed, x0_digits, adjacency, gamma, alpha,
            grid, float(t_end))
    else:
        bounds = np.linspace(0, paths, workers + 1).astype(int)
        counts_inf = np.zeros((grid_points, net.n), dtype=np.int64)
        counts_pat = np.zeros((grid_points, net.n), dtype=np.int64)
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_count_chunk, int(lo), int(hi), base_seed,
                            x0_digits, adjacency, gamma, alpha, grid,
                            float(t_end))
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo
            ]
            for fut in futures:
                ci, cp = fut.result()
                counts_inf += ci
                counts_pat += cp

    return SampledTrajectory(
        times=grid,
        infected=counts_inf / paths,
        patched=counts_pat / paths,
        paths=paths,
        seed=seed,
    )
