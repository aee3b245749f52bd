"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np

from sips.netmodel import RateNetwork


def two_node(b: float, d1: float, d2: float, g: float = 1.0,
             a: float = 1.0) -> RateNetwork:
    """Symmetric two-node network: every off-diagonal rate equal."""
    zero = np.zeros((2, 2))
    beta = zero.copy()
    beta[0, 1] = beta[1, 0] = b
    delta1 = zero.copy()
    delta1[0, 1] = delta1[1, 0] = d1
    delta2 = zero.copy()
    delta2[0, 1] = delta2[1, 0] = d2
    return RateNetwork(beta, delta1, delta2, [g, g], [a, a])


def ring_network(n: int, b: float = 1.0, d: float = 1.0, g: float = 1.0,
                 a: float = 1.0) -> RateNetwork:
    """Directed cycle 0 -> 1 -> ... -> 0 acting on both layers."""
    beta = np.zeros((n, n))
    for i in range(n):
        beta[(i + 1) % n, i] = b
    delta = np.zeros((n, n))
    for i in range(n):
        delta[(i + 1) % n, i] = d
    return RateNetwork(beta, delta, delta.copy(), np.full(n, g), np.full(n, a))


def random_network(n: int, seed: int, lo: float = 0.1, hi: float = 0.8,
                   decay_lo: float = 0.5, decay_hi: float = 1.5,
                   extra_edge_p: float = 0.4) -> RateNetwork:
    """Random strongly-connected network: a directed ring plus extra arcs."""
    rng = np.random.default_rng(seed)
    beta = np.zeros((n, n))
    delta1 = np.zeros((n, n))
    for i in range(n):
        beta[(i + 1) % n, i] = rng.uniform(lo, hi)
        delta1[(i + 1) % n, i] = rng.uniform(lo, hi)
    extra = rng.random((n, n)) < extra_edge_p
    np.fill_diagonal(extra, False)
    beta = np.where(extra & (beta == 0), rng.uniform(lo, hi, (n, n)), beta)
    extra = rng.random((n, n)) < extra_edge_p
    np.fill_diagonal(extra, False)
    delta1 = np.where(extra & (delta1 == 0), rng.uniform(lo, hi, (n, n)), delta1)
    delta2 = np.where(delta1 > 0, rng.uniform(lo, hi, (n, n)), 0.0)
    gamma = rng.uniform(decay_lo, decay_hi, n)
    alpha = rng.uniform(decay_lo, decay_hi, n)
    return RateNetwork(beta, delta1, delta2, gamma, alpha)


def char_poly_coefficients(a: np.ndarray) -> np.ndarray:
    """Characteristic polynomial coefficients via the Faddeev-LeVerrier
    trace recurrence M_k = A (M_{k-1} + c_{k-1} I), c_k = -tr(M_k)/k
    (independent of any eigensolver)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    coeffs = np.empty(n + 1)
    coeffs[0] = 1.0
    m = np.zeros_like(a)
    c_prev = 1.0
    for k in range(1, n + 1):
        m = a @ (m + c_prev * np.eye(n))
        c_prev = -np.trace(m) / k
        coeffs[k] = c_prev
    return coeffs


def char_poly_abscissa(a: np.ndarray) -> float:
    """Largest real part of a root of the characteristic polynomial."""
    roots = np.roots(char_poly_coefficients(a))
    return float(np.max(roots.real))


def char_poly_radius(a: np.ndarray) -> float:
    roots = np.roots(char_poly_coefficients(a))
    return float(np.max(np.abs(roots)))


def bfs_average_path_length(adjacency: np.ndarray) -> float:
    """Mean shortest-path length over ordered node pairs (BFS oracle)."""
    n = adjacency.shape[0]
    neighbors = [np.nonzero(adjacency[:, j] > 0)[0] for j in range(n)]
    total = 0
    count = 0
    for start in range(n):
        dist = np.full(n, -1)
        dist[start] = 0
        frontier = [start]
        while frontier:
            nxt = []
            for u in frontier:
                for v in neighbors[u]:
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        total += dist[dist > 0].sum()
        count += int((dist > 0).sum())
    return total / count
