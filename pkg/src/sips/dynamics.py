"""Node-level ODE tier: integrate the coupled infection/patch probabilities.

The state lives in the region Omega = {I, P >= 0, I_i + P_i <= 1}, which
is positively invariant for the flow

    dI_i/dt = (1 - I_i - P_i) f_i(I) - I_i h_i(P) - gamma_i I_i
    dP_i/dt = (1 - I_i - P_i) g_i(P) + I_i h_i(P) - alpha_i P_i

Integration is fixed-step classical Runge-Kutta on a uniform output grid,
chosen over adaptive stepping so trajectories stay grid-aligned with the
sampled averages of the exact chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rk4 import rk4_on_grid
from .rates import RateModel, omega_violation

__all__ = [
    "PopulationState",
    "Trajectory",
    "SteadyStateResult",
    "OmegaViolationError",
    "derivative",
    "integrate",
    "steady_state",
    "default_time_step",
]

CLAMP_TOL = 1e-9   # silent projection threshold (integrator round-off)
OMEGA_TOL = 1e-6   # beyond this the step size is declared too large


class OmegaViolationError(RuntimeError):
    """The integrator left the feasible region by more than the tolerance."""


@dataclass(frozen=True)
class PopulationState:
    """Per-node infection and patch probabilities (a point of Omega)."""

    infected: np.ndarray
    patched: np.ndarray

    def __post_init__(self):
        inf = np.asarray(self.infected, dtype=float).copy()
        pat = np.asarray(self.patched, dtype=float).copy()
        if inf.ndim != 1 or inf.shape != pat.shape:
            raise ValueError("infected and patched must be equal-length vectors")
        if not (np.all(np.isfinite(inf)) and np.all(np.isfinite(pat))):
            raise ValueError("state contains non-finite entries")
        inf.flags.writeable = False
        pat.flags.writeable = False
        object.__setattr__(self, "infected", inf)
        object.__setattr__(self, "patched", pat)

    @property
    def n(self) -> int:
        return self.infected.shape[0]

    def omega_violation(self) -> float:
        return omega_violation(self.infected, self.patched)

    def in_omega(self, tol: float = CLAMP_TOL) -> bool:
        return self.omega_violation() <= tol

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.infected, self.patched])

    @classmethod
    def from_stacked(cls, x: np.ndarray) -> "PopulationState":
        x = np.asarray(x, dtype=float)
        n = x.size // 2
        return cls(x[:n], x[n:])

    @classmethod
    def from_nodes(cls, n: int, infected=(), patched=()) -> "PopulationState":
        """Point-mass state: probability one on the named nodes."""
        inf = np.zeros(n)
        pat = np.zeros(n)
        inf[list(infected)] = 1.0
        pat[list(patched)] = 1.0
        if np.any(inf + pat > 1):
            raise ValueError("a node cannot be both infected and patched")
        return cls(inf, pat)


@dataclass(frozen=True)
class Trajectory:
    """States recorded on a uniform time grid, with population-mean
    aggregates derived from the stored per-node values."""

    times: np.ndarray
    infected: np.ndarray  # (grid, n)
    patched: np.ndarray   # (grid, n)

    @property
    def n(self) -> int:
        return self.infected.shape[1]

    @property
    def infected_fraction(self) -> np.ndarray:
        return self.infected.mean(axis=1)

    @property
    def patched_fraction(self) -> np.ndarray:
        return self.patched.mean(axis=1)

    def state(self, k: int) -> PopulationState:
        return PopulationState(self.infected[k], self.patched[k])


@dataclass(frozen=True)
class SteadyStateResult:
    state: PopulationState
    converged: bool
    t: float
    residual: float  # sup-norm of the derivative at the final state


def _deriv_parts(model: RateModel, infected: np.ndarray, patched: np.ndarray):
    free = 1.0 - infected - patched
    h_val = model.h(patched)
    d_inf = free * model.f(infected) - infected * h_val - model.net.gamma * infected
    d_pat = free * model.g(patched) + infected * h_val - model.net.alpha * patched
    return d_inf, d_pat


def derivative(model: RateModel, state: PopulationState) -> np.ndarray:
    """Time derivative of the stacked (I, P) vector at a state."""
    d_inf, d_pat = _deriv_parts(model, state.infected, state.patched)
    return np.concatenate([d_inf, d_pat])


def default_time_step(model: RateModel) -> float:
    """0.01 divided by the largest total rate any node can experience."""
    net = model.net
    total = (net.beta.sum(axis=1) + net.delta1.sum(axis=1)
             + net.delta2.sum(axis=1) + net.gamma + net.alpha)
    return 0.01 / float(total.max())


def _clamp(x: np.ndarray, n: int) -> np.ndarray:
    """Project a stacked state back into Omega, erroring out when the
    violation exceeds the step-size tolerance."""
    inf, pat = x[:n], x[n:]
    v = omega_violation(inf, pat)
    if v <= 0.0:
        return x
    if v > OMEGA_TOL:
        raise OmegaViolationError(
            f"state left the feasible region by {v:g}; reduce the time step")
    inf = np.maximum(inf, 0.0)
    pat = np.maximum(pat, 0.0)
    total = inf + pat
    over = total > 1.0
    if np.any(over):
        scale = np.where(over, 1.0 / total, 1.0)
        inf = inf * scale
        pat = pat * scale
    return np.concatenate([inf, pat])


def integrate(model: RateModel, state0: PopulationState, t_end: float,
              dt: float | None = None, grid_points: int = 201) -> Trajectory:
    """Integrate from ``state0`` to ``t_end``, recording on a uniform grid."""
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    if dt is None:
        dt = default_time_step(model)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not state0.in_omega():
        raise ValueError(
            f"initial state outside the feasible region by "
            f"{state0.omega_violation():g}")

    n = state0.n

    def deriv(x):
        d_inf, d_pat = _deriv_parts(model, x[:n], x[n:])
        return np.concatenate([d_inf, d_pat])

    times = np.linspace(0.0, t_end, grid_points)
    ys = rk4_on_grid(deriv, state0.stacked(), times, dt,
                     post_step=lambda x: _clamp(x, n))
    if not np.all(np.isfinite(ys)):
        raise OmegaViolationError("integration produced non-finite values")
    return Trajectory(times=times, infected=ys[:, :n], patched=ys[:, n:])


def steady_state(model: RateModel, state0: PopulationState,
                 tol: float = 1e-8, t_max: float = 500.0,
                 dt: float | None = None) -> SteadyStateResult:
    """Integrate until the derivative sup-norm drops below ``tol``.

    The convergence criterion is on the derivative (step-size independent),
    not on state distance between steps.  Reaching ``t_max`` first yields
    ``converged=False`` rather than an error.
    """
    if dt is None:
        dt = default_time_step(model)
    state = state0
    t = 0.0
    residual = float(np.max(np.abs(derivative(model, state))))
    chunk = max(1.0, 100 * dt)
    while residual >= tol and t < t_max:
        span = min(chunk, t_max - t)
        traj = integrate(model, state, span, dt=dt, grid_points=2)
        state = traj.state(-1)
        t += span
        residual = float(np.max(np.abs(derivative(model, state))))
    return SteadyStateResult(state, residual < tol, t, residual)
