"""Spectral quantities of the threshold matrices.

The decisive quantity is the spectral abscissa s(A) (largest real part of
an eigenvalue).  For an irreducible Metzler matrix it is computed through
the shift identity s(A) = rho(A + sigma*I) - sigma: shifting by
sigma = max|diag| + 1 yields a primitive nonnegative matrix whose Perron
root is found by power iteration with rigorous min/max (Collatz-Wielandt)
brackets.  The spectral radius of a general nonnegative matrix is taken
blockwise over its strongly-connected condensation.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .rates import RateModel, ThresholdMatrices, threshold_matrices

__all__ = [
    "ConvergenceError",
    "ReducibleMatrixError",
    "SpectralReport",
    "PowerInfo",
    "spectral_abscissa",
    "spectral_radius",
    "perron_pair",
    "is_irreducible",
    "mixed_criterion_matrix",
    "extinction_sufficient_checks",
    "ExtinctionChecks",
    "virus_survival_checks",
    "VirusSurvivalChecks",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


class ConvergenceError(RuntimeError):
    """Power iteration did not reach tolerance within the budget."""


class ReducibleMatrixError(ValueError):
    """Operation requires an irreducible matrix."""


@dataclass(frozen=True)
class PowerInfo:
    value: float
    iterations: int
    residual: float  # width of the final Perron-root bracket


def _check_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def _offdiag_min(a: np.ndarray) -> float:
    mask = ~np.eye(a.shape[0], dtype=bool)
    return float(a[mask].min()) if a.shape[0] > 1 else 0.0


def is_irreducible(a: np.ndarray) -> bool:
    """True when the support digraph of ``a`` is strongly connected."""
    a = _check_square(a)
    n = a.shape[0]
    if n == 1:
        return True
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    src, dst = np.nonzero(a)
    g.add_edges_from(zip(src.tolist(), dst.tolist()))
    return nx.is_strongly_connected(g)


def _power_perron(b: np.ndarray, tol: float, max_iter: int) -> tuple[PowerInfo, np.ndarray]:
    """Perron root and vector of a primitive nonnegative matrix.

    Iterates x <- Bx from the all-ones start; the Collatz-Wielandt ratios
    min_i (Bx)_i/x_i and max_i (Bx)_i/x_i bracket the Perron root and the
    bracket contracts for primitive matrices.
    """
    n = b.shape[0]
    x = np.ones(n)
    for it in range(1, max_iter + 1):
        y = b @ x
        ratios = y / x
        lo = float(ratios.min())
        hi = float(ratios.max())
        if hi - lo <= tol * max(1.0, abs(hi)):
            value = 0.5 * (lo + hi)
            return PowerInfo(value, it, hi - lo), y / y.max()
        x = y / y.max()
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(bracket width {hi - lo:g})")


def _abscissa_info(a: np.ndarray, tol: float, max_iter: int,
                   shift: float | None) -> tuple[PowerInfo, np.ndarray]:
    a = _check_square(a)
    if _offdiag_min(a) < 0:
        raise ValueError("matrix has negative off-diagonal entries")
    if not is_irreducible(a):
        raise ReducibleMatrixError("matrix support is not strongly connected")
    n = a.shape[0]
    if n == 1:
        return PowerInfo(float(a[0, 0]), 0, 0.0), np.ones(1)
    sigma = float(np.max(np.abs(np.diag(a)))) + 1.0 if shift is None else float(shift)
    if np.min(np.diag(a)) + sigma <= 0:
        raise ValueError("shift too small: shifted matrix must have a "
                         "positive diagonal")
    info, vec = _power_perron(a + sigma * np.eye(n), tol, max_iter)
    return PowerInfo(info.value - sigma, info.iterations, info.residual), vec


def spectral_abscissa(a: np.ndarray, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER,
                      shift: float | None = None) -> float:
    """Largest real part of an eigenvalue of an irreducible Metzler matrix."""
    info, _ = _abscissa_info(a, tol, max_iter, shift)
    return info.value


def perron_pair(a: np.ndarray, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER,
                shift: float | None = None) -> tuple[float, np.ndarray]:
    """Spectral abscissa and the associated positive eigenvector
    (sup-normalized) of an irreducible Metzler matrix."""
    info, vec = _abscissa_info(a, tol, max_iter, shift)
    return info.value, vec


def spectral_radius(a: np.ndarray, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Perron root of a nonnegative matrix (reducible inputs allowed:
    computed blockwise on the strongly-connected condensation)."""
    a = _check_square(a)
    if a.size and a.min() < 0:
        raise ValueError("matrix must be entrywise nonnegative")
    n = a.shape[0]
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    src, dst = np.nonzero(a)
    g.add_edges_from(zip(src.tolist(), dst.tolist()))
    radius = 0.0
    for component in nx.strongly_connected_components(g):
        nodes = sorted(component)
        if len(nodes) == 1:
            i = nodes[0]
            radius = max(radius, float(a[i, i]))
            continue
        block = a[np.ix_(nodes, nodes)]
        # block + I is primitive (irreducible, positive diagonal)
        info, _ = _power_perron(block + np.eye(len(nodes)), tol, max_iter)
        radius = max(radius, info.value - 1.0)
    return radius


def mixed_criterion_matrix(virus_matrix: np.ndarray, f_jacobian0: np.ndarray,
                           p_star: np.ndarray, g_at_p_star: np.ndarray) -> np.ndarray:
    """Threshold matrix for virus survival on top of the patched state:
    the virus matrix with columns damped by the patched equilibrium and
    the diagonal lowered by the patching rate there.  Metzler and
    irreducible whenever the virus matrix is."""
    return (virus_matrix
            - f_jacobian0 * np.asarray(p_star)[None, :]
            - np.diag(np.asarray(g_at_p_star)))


@dataclass(frozen=True)
class SpectralReport:
    """Spectral abscissas of the four threshold matrices plus, when
    available, the mixed-survival criterion value."""

    s_virus: float
    s_patch: float
    s_patch_infected: float
    s_patch_combined: float
    mixed_criterion: float | None = None
    info: dict | None = None  # PowerInfo per quantity

    def to_dict(self) -> dict:
        d = {
            "s_virus": self.s_virus,
            "s_patch": self.s_patch,
            "s_patch_infected": self.s_patch_infected,
            "s_patch_combined": self.s_patch_combined,
            "mixed_criterion": self.mixed_criterion,
        }
        if self.info:
            d["iterations"] = {k: v.iterations for k, v in self.info.items()}
            d["residuals"] = {k: v.residual for k, v in self.info.items()}
        return d


def base_spectral_report(matrices: ThresholdMatrices,
                         tol: float = DEFAULT_TOL) -> SpectralReport:
    """Abscissas of the four threshold matrices (no mixed criterion)."""
    info = {}
    values = {}
    for name in ("virus", "patch", "patch_infected", "patch_combined"):
        pi, _ = _abscissa_info(getattr(matrices, name), tol, DEFAULT_MAX_ITER, None)
        info[name] = pi
        values[name] = pi.value
    return SpectralReport(
        s_virus=values["virus"],
        s_patch=values["patch"],
        s_patch_infected=values["patch_infected"],
        s_patch_combined=values["patch_combined"],
        info=info,
    )


@dataclass(frozen=True)
class ExtinctionChecks:
    """Closed sufficient conditions for total extinction (virus and patch
    both die out).  Each implies both decisive abscissas are <= 0."""

    shifted_radius: bool  # rho(J/decay shifted back by identity) < 1, both layers
    ratio_radius: bool    # rho(rate_matrix * diag(1/decay)) < 1, both layers
    column_sums: bool     # every in-rate column sum below the node's decay rate
    row_sums: bool        # every decay-scaled out-rate row sum below 1

    @property
    def any(self) -> bool:
        return self.shifted_radius or self.ratio_radius or self.column_sums \
            or self.row_sums


def extinction_sufficient_checks(model: RateModel,
                                 tol: float = DEFAULT_TOL) -> ExtinctionChecks:
    net = model.net
    tm = threshold_matrices(model)
    inv_gamma = np.diag(1.0 / net.gamma)
    inv_alpha = np.diag(1.0 / net.alpha)
    eye = np.eye(net.n)

    shifted = (
        spectral_radius(tm.virus @ inv_gamma + eye, tol) < 1
        and spectral_radius(tm.patch @ inv_alpha + eye, tol) < 1
    )
    ratio = (
        spectral_radius(net.beta @ inv_gamma, tol) < 1
        and spectral_radius(net.delta1 @ inv_alpha, tol) < 1
    )
    cols = (
        np.all(net.beta.sum(axis=0) < net.gamma)
        and np.all(net.delta1.sum(axis=0) < net.alpha)
    )
    rows = (
        np.all((net.beta / net.gamma[None, :]).sum(axis=1) < 1)
        and np.all((net.delta1 / net.alpha[None, :]).sum(axis=1) < 1)
    )
    return ExtinctionChecks(bool(shifted), bool(ratio), bool(cols), bool(rows))


@dataclass(frozen=True)
class VirusSurvivalChecks:
    """Closed sufficient conditions for long-term virus survival with
    patch extinction, depending on which patching channel dominates."""

    g_dominates: bool  # g >= h pointwise, virus abscissa > 0, patch abscissa <= 0
    h_dominates: bool  # g <= h pointwise, virus abscissa > 0, infected-channel <= 0

    @property
    def any(self) -> bool:
        return self.g_dominates or self.h_dominates


def virus_survival_checks(model: RateModel, tol: float = DEFAULT_TOL,
                          samples: int = 200, seed: int = 0) -> VirusSurvivalChecks:
    tm = threshold_matrices(model)
    s_virus = spectral_abscissa(tm.virus, tol)
    rng = np.random.default_rng(seed)
    g_ge_h = True
    g_le_h = True
    for _ in range(samples):
        x = rng.uniform(0.0, 1.0, size=model.n)
        gx, hx = model.g(x), model.h(x)
        if np.any(gx < hx - 1e-12):
            g_ge_h = False
        if np.any(gx > hx + 1e-12):
            g_le_h = False
        if not (g_ge_h or g_le_h):
            break
    a = g_ge_h and s_virus > 0 and spectral_abscissa(tm.patch, tol) <= 0
    b = g_le_h and s_virus > 0 and spectral_abscissa(tm.patch_infected, tol) <= 0
    return VirusSurvivalChecks(bool(a), bool(b))
