"""Rate-function families and their linearization at the origin.

A :class:`RateModel` equips a network with concrete infecting/patching
rate functions f, g, h.  Every built-in family is zero at the origin,
strictly increasing in its declared dependencies, entrywise concave, and
has Jacobian at the origin equal to the corresponding rate matrix, so all
families share the same threshold matrices:

    virus           = df(0)/dx  - diag(gamma)
    patch           = dg(0)/dx  - diag(alpha)
    patch_infected  = dh(0)/dx  - diag(alpha)
    patch_combined  = d(max(g,h))(0)/dx - diag(alpha)

These are Metzler matrices; their spectral abscissas decide the long-run
regime of the node-level dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .netmodel import RateNetwork

__all__ = [
    "RateFamily",
    "RateModel",
    "ThresholdMatrices",
    "ConditionCheck",
    "ConditionReport",
    "build_model",
    "eval_rates",
    "omega_violation",
    "threshold_matrices",
    "validate_conditions",
    "check_rate_conditions",
]


class RateFamily(str, Enum):
    LINEAR = "linear"
    EXP_SATURATING = "exp_saturating"
    RATIONAL_SATURATING = "rational_saturating"


def _family_param(value, n: int, family: RateFamily, name: str) -> np.ndarray | None:
    if family is RateFamily.LINEAR:
        return None
    if value is None:
        value = 1.0
    a = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
    if family is RateFamily.EXP_SATURATING and not np.all(a > 0):
        raise ValueError(f"{name}: saturation ceilings must be positive")
    if family is RateFamily.RATIONAL_SATURATING and not np.all(a >= 0):
        raise ValueError(f"{name}: curvature parameters must be nonnegative")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RateModel:
    """A network plus concrete rate functions.

    ``*_param`` is the per-node family parameter: the saturation ceiling
    for ``exp_saturating`` and the curvature for ``rational_saturating``
    (unused by ``linear``).  ``g_equals_h`` asserts that the two patching
    channels are the same function, which requires identical delta
    matrices and identical g/h parameters.
    """

    net: RateNetwork
    family: RateFamily = RateFamily.LINEAR
    f_param: np.ndarray | None = None
    g_param: np.ndarray | None = None
    h_param: np.ndarray | None = None
    g_equals_h: bool = False

    def __post_init__(self):
        family = RateFamily(self.family)
        object.__setattr__(self, "family", family)
        n = self.net.n
        object.__setattr__(self, "f_param",
                           _family_param(self.f_param, n, family, "f_param"))
        object.__setattr__(self, "g_param",
                           _family_param(self.g_param, n, family, "g_param"))
        object.__setattr__(self, "h_param",
                           _family_param(self.h_param, n, family, "h_param"))
        if self.g_equals_h:
            if not np.array_equal(self.net.delta1, self.net.delta2):
                raise ValueError(
                    "g_equals_h requires identical delta1 and delta2 matrices")
            if not (self.g_param is None and self.h_param is None
                    or np.array_equal(self.g_param, self.h_param)):
                raise ValueError("g_equals_h requires identical g/h parameters")

    @property
    def n(self) -> int:
        return self.net.n

    def _apply(self, s: np.ndarray, param: np.ndarray | None) -> np.ndarray:
        if self.family is RateFamily.LINEAR:
            return s
        if self.family is RateFamily.EXP_SATURATING:
            return param * -np.expm1(-s / param)
        return s / (1.0 + param * s)

    def f(self, x: np.ndarray) -> np.ndarray:
        """Infection rate of each node given infection probabilities x."""
        return self._apply(self.net.beta @ np.asarray(x, dtype=float), self.f_param)

    def g(self, x: np.ndarray) -> np.ndarray:
        """Patching rate of susceptible nodes given patch probabilities x."""
        return self._apply(self.net.delta1 @ np.asarray(x, dtype=float), self.g_param)

    def h(self, x: np.ndarray) -> np.ndarray:
        """Patching rate of infected nodes given patch probabilities x."""
        return self._apply(self.net.delta2 @ np.asarray(x, dtype=float), self.h_param)


def build_model(net: RateNetwork, family: RateFamily | str = RateFamily.LINEAR,
                *, f_param=None, g_param=None, h_param=None,
                g_equals_h: bool | None = None) -> RateModel:
    """Convenience constructor; ``g_equals_h=None`` auto-detects equality."""
    if g_equals_h is None:
        g_equals_h = bool(
            np.array_equal(net.delta1, net.delta2)
            and np.array_equal(
                np.broadcast_to(1.0 if g_param is None else g_param, (net.n,)),
                np.broadcast_to(1.0 if h_param is None else h_param, (net.n,)),
            )
        )
    return RateModel(net, RateFamily(family), f_param, g_param, h_param, g_equals_h)


def omega_violation(infected: np.ndarray, patched: np.ndarray) -> float:
    """Largest violation of the feasible region {I,P >= 0, I+P <= 1}."""
    worst = 0.0
    worst = max(worst, float(-np.min(infected, initial=0.0)))
    worst = max(worst, float(-np.min(patched, initial=0.0)))
    worst = max(worst, float(np.max(infected + patched, initial=0.0) - 1.0))
    return max(worst, 0.0)


def eval_rates(model: RateModel, infected: np.ndarray, patched: np.ndarray,
               tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate (f(I), g(P), h(P)) at a feasible state."""
    infected = np.asarray(infected, dtype=float)
    patched = np.asarray(patched, dtype=float)
    v = omega_violation(infected, patched)
    if v > tol:
        raise ValueError(f"state outside feasible region by {v:g}")
    return model.f(infected), model.g(patched), model.h(patched)


@dataclass(frozen=True)
class ThresholdMatrices:
    """Jacobians of the rate functions at the origin, shifted by the decay
    rates.  All four are Metzler; ``patch_combined`` uses the entrywise
    max of the g and h Jacobians."""

    virus: np.ndarray
    patch: np.ndarray
    patch_infected: np.ndarray
    patch_combined: np.ndarray


def threshold_matrices(model: RateModel) -> ThresholdMatrices:
    """Closed-form threshold matrices (identical across built-in families:
    every family's Jacobian at the origin is the raw rate matrix)."""
    net = model.net
    return ThresholdMatrices(
        virus=net.beta - np.diag(net.gamma),
        patch=net.delta1 - np.diag(net.alpha),
        patch_infected=net.delta2 - np.diag(net.alpha),
        patch_combined=np.maximum(net.delta1, net.delta2) - np.diag(net.alpha),
    )


# ---------------------------------------------------------------------------
# numerical validation of the structural conditions on rate functions


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    worst: float  # worst observed violation (0 when clean)


@dataclass(frozen=True)
class ConditionReport:
    checks: tuple[ConditionCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> ConditionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def check_rate_conditions(fn, support: np.ndarray, n: int, *,
                          sample_count: int = 1000, seed: int = 0,
                          tol: float = 1e-6, null_tol: float = 1e-8,
                          grad_step: float = 1e-5,
                          curv_step: float = 1e-4) -> ConditionReport:
    """Sampled checks of one rate function against the structural conditions.

    ``fn`` maps a length-n vector in [0,1]^n to a length-n rate vector and
    ``support[i][j]`` declares whether component i may depend on x_j.
    Checked at random interior points: exact nullity at the origin,
    central-difference gradients (zero off the support, not significantly
    negative on it), and nonpositive second differences for every
    coordinate pair (entrywise concavity).  Curvature uses a reduced
    sample to bound cost.
    """
    rng = np.random.default_rng(seed)
    support = np.asarray(support, dtype=bool)

    worst_null = float(np.max(np.abs(fn(np.zeros(n)))))
    worst_dep = 0.0    # gradient magnitude off the declared support
    worst_mono = 0.0   # most negative gradient on the support
    worst_conc = 0.0   # most positive second difference
    worst_range = 0.0  # negative or non-finite values on samples

    h = grad_step
    for _ in range(max(1, sample_count)):
        x = rng.uniform(2 * curv_step, 1 - 2 * curv_step, size=n)
        fx = fn(x)
        if not np.all(np.isfinite(fx)):
            worst_range = np.inf
        worst_range = max(worst_range, float(-np.min(fx, initial=0.0)))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            grad_col = (fn(x + e) - fn(x - e)) / (2 * h)  # d f_i / d x_j for all i
            on = support[:, j]
            if np.any(~on):
                worst_dep = max(worst_dep, float(np.max(np.abs(grad_col[~on]))))
            if np.any(on):
                worst_mono = max(worst_mono, float(-np.min(grad_col[on])))

    hc = curv_step
    for _ in range(max(1, sample_count // 20)):
        x = rng.uniform(2 * hc, 1 - 2 * hc, size=n)
        fx = fn(x)
        for j in range(n):
            ej = np.zeros(n)
            ej[j] = hc
            # pure second difference along coordinate j
            d2 = (fn(x + ej) - 2 * fx + fn(x - ej)) / hc**2
            worst_conc = max(worst_conc, float(np.max(d2)))
            for k in range(j + 1, n):
                ek = np.zeros(n)
                ek[k] = hc
                mixed = (fn(x + ej + ek) - fn(x + ej - ek)
                         - fn(x - ej + ek) + fn(x - ej - ek)) / (4 * hc**2)
                worst_conc = max(worst_conc, float(np.max(mixed)))

    checks = (
        ConditionCheck("nullity", worst_null <= null_tol, worst_null),
        ConditionCheck("dependency_support", worst_dep <= tol, worst_dep),
        ConditionCheck("monotonicity", worst_mono <= tol, worst_mono),
        ConditionCheck("concavity", worst_conc <= tol, worst_conc),
        ConditionCheck("bounded_nonnegative", worst_range <= tol, worst_range),
    )
    return ConditionReport(checks)


def validate_conditions(model: RateModel, sample_count: int = 1000,
                        seed: int = 0, tol: float = 1e-6) -> ConditionReport:
    """Run the structural-condition checks for f, g and h of a model and
    merge them (worst violation per condition across the three)."""
    specs = [
        (model.f, model.net.beta > 0),
        (model.g, model.net.delta1 > 0),
        (model.h, model.net.delta2 > 0),
    ]
    merged: dict[str, float] = {}
    for idx, (fn, support) in enumerate(specs):
        report = check_rate_conditions(
            fn, support, model.n, sample_count=sample_count,
            seed=seed + idx, tol=tol)
        for check in report.checks:
            merged[check.name] = max(merged.get(check.name, 0.0), check.worst)
    null_tol = 1e-8
    checks = tuple(
        ConditionCheck(name, worst <= (null_tol if name == "nullity" else tol), worst)
        for name, worst in merged.items()
    )
    return ConditionReport(checks)
