"""Equilibria of the node-level dynamics and regime classification.

The nontrivial equilibria are fixed points of monotone maps.  Starting the
iteration from the all-ones vector (an upper solution: the maps send it
below itself) gives a decreasing sequence converging to the unique
positive fixed point whenever the matching threshold abscissa is positive;
when it is not, the iterates collapse to zero, which the solvers detect
through a floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .dynamics import PopulationState
from .rates import RateModel, threshold_matrices
from .spectral import SpectralReport, mixed_criterion_matrix

__all__ = [
    "FixedPointCollapse",
    "ThresholdNotMet",
    "EquilibriumResult",
    "RegimeReport",
    "REGIMES",
    "infected_equilibrium",
    "patched_equilibrium",
    "mixed_equilibrium",
    "classify",
    "full_spectral_report",
]

COLLAPSE_FLOOR = 1e-12
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 200_000

REGIMES = (
    "susceptible_attractor",
    "infected_attractor",
    "patched_attractor",
    "mixed_attractor",
    "unclassified",
)


class FixedPointCollapse(RuntimeError):
    """Iterates fell to zero: no positive equilibrium exists (the
    corresponding threshold abscissa is not positive)."""


class ThresholdNotMet(ValueError):
    """The preconditions of the requested equilibrium do not hold."""


@dataclass(frozen=True)
class EquilibriumResult:
    kind: str  # susceptible | infected | patched | mixed
    infected: np.ndarray | None
    patched: np.ndarray | None
    iterations: int
    residual: float

    @property
    def infected_fraction(self) -> float | None:
        return None if self.infected is None else float(self.infected.mean())

    @property
    def patched_fraction(self) -> float | None:
        return None if self.patched is None else float(self.patched.mean())


def _monotone_fixed_point(step, n: int, tol: float, max_iter: int):
    x = np.ones(n)
    for it in range(1, max_iter + 1):
        x_new = step(x)
        if float(x_new.max()) < COLLAPSE_FLOOR:
            raise FixedPointCollapse(
                "fixed-point iterates collapsed to zero: threshold "
                "condition does not hold")
        resid = float(np.max(np.abs(x_new - x)))
        if resid < tol:
            return x_new, it, resid
        x = x_new
    raise spectral.ConvergenceError(
        f"fixed-point iteration exceeded {max_iter} iterations")


def _require_positive_abscissa(matrix: np.ndarray, what: str) -> None:
    """Enforce the solver precondition up front.  Near and below the
    threshold the iterates decay too slowly for the collapse floor alone
    to flag the violation reliably."""
    try:
        s = spectral.spectral_abscissa(matrix)
    except spectral.ReducibleMatrixError:
        return  # degenerate fixture: fall back to the collapse floor
    if s <= 0:
        raise FixedPointCollapse(
            f"{what} abscissa is {s:g}, not positive: no positive "
            f"equilibrium exists")


def _infected_fixed_point(model: RateModel, tol: float, max_iter: int,
                          check: bool = True):
    if check:
        _require_positive_abscissa(threshold_matrices(model).virus, "virus")
    gamma = model.net.gamma

    def step(x):
        fx = model.f(x)
        return fx / (gamma + fx)

    return _monotone_fixed_point(step, model.n, tol, max_iter)


def _patched_fixed_point(model: RateModel, tol: float, max_iter: int,
                         check: bool = True):
    if check:
        _require_positive_abscissa(threshold_matrices(model).patch, "patch")
    alpha = model.net.alpha

    def step(x):
        gx = model.g(x)
        return gx / (alpha + gx)

    return _monotone_fixed_point(step, model.n, tol, max_iter)


def infected_equilibrium(model: RateModel, tol: float = DEFAULT_TOL,
                         max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Positive virus-only equilibrium (requires positive virus abscissa)."""
    x, _, _ = _infected_fixed_point(model, tol, max_iter)
    return x


def patched_equilibrium(model: RateModel, tol: float = DEFAULT_TOL,
                        max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Positive patch-only equilibrium (requires positive patch abscissa)."""
    x, _, _ = _patched_fixed_point(model, tol, max_iter)
    return x


def _mixed_criterion_value(model: RateModel, p_star: np.ndarray,
                           tol: float = spectral.DEFAULT_TOL) -> float:
    tm = threshold_matrices(model)
    matrix = mixed_criterion_matrix(tm.virus, model.net.beta, p_star,
                                    model.g(p_star))
    return spectral.spectral_abscissa(matrix, tol)


def _mixed_fixed_point(model: RateModel, tol: float, max_iter: int):
    if not model.g_equals_h:
        raise ThresholdNotMet(
            "mixed equilibrium requires identical patching channels (g = h)")
    p_star, _, _ = _patched_fixed_point(model, tol, max_iter)
    criterion = _mixed_criterion_value(model, p_star)
    if criterion <= 0:
        raise ThresholdNotMet(
            f"mixed survival criterion is {criterion:g}, not positive")
    gamma = model.net.gamma
    damp = 1.0 - p_star
    h_star = model.h(p_star)

    def step(x):
        fx = model.f(x)
        return damp * fx / (gamma + fx + h_star)

    x, iters, resid = _monotone_fixed_point(step, model.n, tol, max_iter)
    return x, p_star, iters, resid


def mixed_equilibrium(model: RateModel, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Coexistence equilibrium (I**, P**); its patch part equals the
    patch-only equilibrium by construction (same computation path)."""
    x, p_star, _, _ = _mixed_fixed_point(model, tol, max_iter)
    return x, p_star


@dataclass(frozen=True)
class RegimeReport:
    """Predicted asymptotic regime with the supporting spectral values and
    the corresponding equilibrium (population means included)."""

    spectral: SpectralReport
    predicted: str
    equilibrium: EquilibriumResult | None

    @property
    def infected_fraction(self) -> float | None:
        return None if self.equilibrium is None else self.equilibrium.infected_fraction

    @property
    def patched_fraction(self) -> float | None:
        return None if self.equilibrium is None else self.equilibrium.patched_fraction

    def to_dict(self) -> dict:
        eq = None
        if self.equilibrium is not None:
            eq = {
                "kind": self.equilibrium.kind,
                "infected": None if self.equilibrium.infected is None
                else self.equilibrium.infected.tolist(),
                "patched": None if self.equilibrium.patched is None
                else self.equilibrium.patched.tolist(),
                "infected_fraction": self.equilibrium.infected_fraction,
                "patched_fraction": self.equilibrium.patched_fraction,
                "iterations": self.equilibrium.iterations,
                "residual": self.equilibrium.residual,
            }
        return {
            "spectral": self.spectral.to_dict(),
            "predicted": self.predicted,
            "equilibrium": eq,
        }


def full_spectral_report(model: RateModel,
                         tol: float = DEFAULT_TOL) -> SpectralReport:
    """Abscissas of all four threshold matrices; the mixed-survival
    criterion is attached whenever it is defined (g = h and a positive
    patch abscissa, so the patched equilibrium exists)."""
    base = spectral.base_spectral_report(threshold_matrices(model))
    mixed = None
    if model.g_equals_h and base.s_patch > 0:
        p_star = patched_equilibrium(model, tol)
        mixed = _mixed_criterion_value(model, p_star)
    return SpectralReport(
        s_virus=base.s_virus,
        s_patch=base.s_patch,
        s_patch_infected=base.s_patch_infected,
        s_patch_combined=base.s_patch_combined,
        mixed_criterion=mixed,
        info=base.info,
    )


def classify(model: RateModel, tol: float = DEFAULT_TOL) -> RegimeReport:
    """Predict the asymptotic regime from the spectral signs.

    The criteria are applied in the order: total extinction, virus-only
    survival, patch-only survival, coexistence; boundary cases (abscissa
    exactly zero) fall to the extinction side.  When no criterion applies
    the regime is ``unclassified``.
    """
    report = full_spectral_report(model, tol)
    s1, s2, s4 = report.s_virus, report.s_patch, report.s_patch_combined
    n = model.n

    if s1 <= 0 and s2 <= 0:
        eq = EquilibriumResult("susceptible", np.zeros(n), np.zeros(n), 0, 0.0)
        return RegimeReport(report, "susceptible_attractor", eq)

    if s1 > 0 and s4 <= 0:
        x, iters, resid = _infected_fixed_point(model, tol, DEFAULT_MAX_ITER,
                                                check=False)
        eq = EquilibriumResult("infected", x, np.zeros(n), iters, resid)
        return RegimeReport(report, "infected_attractor", eq)

    if s1 <= 0 and s2 > 0:
        x, iters, resid = _patched_fixed_point(model, tol, DEFAULT_MAX_ITER,
                                               check=False)
        eq = EquilibriumResult("patched", np.zeros(n), x, iters, resid)
        return RegimeReport(report, "patched_attractor", eq)

    if (model.g_equals_h and s2 > 0 and report.mixed_criterion is not None
            and report.mixed_criterion > 0):
        i_star, p_star, iters, resid = _mixed_fixed_point(
            model, tol, DEFAULT_MAX_ITER)
        eq = EquilibriumResult("mixed", i_star, p_star, iters, resid)
        return RegimeReport(report, "mixed_attractor", eq)

    return RegimeReport(report, "unclassified", None)


def equilibrium_state(result: EquilibriumResult) -> PopulationState:
    """The equilibrium as a population state (zeros for absent parts)."""
    n = len(result.infected) if result.infected is not None else len(result.patched)
    inf = result.infected if result.infected is not None else np.zeros(n)
    pat = result.patched if result.patched is not None else np.zeros(n)
    return PopulationState(inf, pat)
