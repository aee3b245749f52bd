"""Compiled inner loop of the exact-chain path sampler.

Each path owns a counter-based SplitMix64 stream derived from the master
seed and the path index, so results are independent of how paths are
distributed over workers.  Occupancy is accumulated as integer counts per
(grid point, node), which makes merging across workers exact and
order-independent.
"""

import numpy as np
from numba import njit

U64 = np.uint64
_GOLDEN = U64(0x9E3779B97F4A7C15)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(cache=True)
def sample_paths(path_lo, path_hi, base_seed, x0_digits,
                 beta_indptr, beta_idx, beta_w,
                 d1_indptr, d1_idx, d1_w,
                 d2_indptr, d2_idx, d2_w,
                 gamma, alpha, grid, t_end,
                 counts_inf, counts_pat):
    """Sample paths [path_lo, path_hi) and add their occupancy indicators,
    evaluated on ``grid`` with right-continuous step interpolation, into
    the integer count arrays."""
    n = gamma.shape[0]
    n_grid = grid.shape[0]

    digit = np.empty(n, np.int64)
    p_inf = np.empty(n, np.float64)   # infection pressure on each node
    p_pat1 = np.empty(n, np.float64)  # patch pressure (susceptible channel)
    p_pat2 = np.empty(n, np.float64)  # patch pressure (infected channel)
    lam = np.empty(n, np.float64)     # per-node total transition rate
    seg = np.empty(n, np.int64)       # first grid index not yet recorded

    for path in range(path_lo, path_hi):
        state = _mix64(base_seed + U64(path + 1) * _GOLDEN)

        for i in range(n):
            digit[i] = x0_digits[i]
            p_inf[i] = 0.0
            p_pat1[i] = 0.0
            p_pat2[i] = 0.0
            seg[i] = 0
        for j in range(n):
            if digit[j] == 1:
                for e in range(beta_indptr[j], beta_indptr[j + 1]):
                    p_inf[beta_idx[e]] += beta_w[e]
            elif digit[j] == 2:
                for e in range(d1_indptr[j], d1_indptr[j + 1]):
                    p_pat1[d1_idx[e]] += d1_w[e]
                for e in range(d2_indptr[j], d2_indptr[j + 1]):
                    p_pat2[d2_idx[e]] += d2_w[e]

        lam_tot = 0.0
        for i in range(n):
            if digit[i] == 0:
                li = p_inf[i] + p_pat1[i]
            elif digit[i] == 1:
                li = gamma[i] + p_pat2[i]
            else:
                li = alpha[i]
            lam[i] = li
            lam_tot += li

        t = 0.0
        while True:
            if lam_tot <= 0.0:
                break  # absorbing state: freeze until t_end

            state = state + _GOLDEN
            u = (_mix64(state) >> U64(11)) * _INV_2_53
            t_next = t - np.log(1.0 - u) / lam_tot
            if t_next > t_end:
                break

            # stage 1: which node fires (probability lam_i / lam_tot)
            state = state + _GOLDEN
            r = ((_mix64(state) >> U64(11)) * _INV_2_53) * lam_tot
            j = -1
            acc = 0.0
            for i in range(n):
                if lam[i] > 0.0:
                    acc += lam[i]
                    j = i
                    if r < acc:
                        break

            # stage 2: which state it moves to (conditional on the node)
            dj = digit[j]
            if dj == 0:
                state = state + _GOLDEN
                u3 = ((_mix64(state) >> U64(11)) * _INV_2_53) * (p_inf[j] + p_pat1[j])
                new = 1 if u3 < p_inf[j] else 2
            elif dj == 1:
                state = state + _GOLDEN
                u3 = ((_mix64(state) >> U64(11)) * _INV_2_53) * (gamma[j] + p_pat2[j])
                new = 0 if u3 < gamma[j] else 2
            else:
                new = 0  # a patched node can only fail back to susceptible

            # close node j's constant segment: grid points strictly below t_next
            lo = seg[j]
            hi = n_grid
            while lo < hi:
                mid = (lo + hi) >> 1
                if grid[mid] < t_next:
                    lo = mid + 1
                else:
                    hi = mid
            if dj == 1:
                for g in range(seg[j], lo):
                    counts_inf[g, j] += 1
            elif dj == 2:
                for g in range(seg[j], lo):
                    counts_pat[g, j] += 1
            seg[j] = lo

            # update the pressures node j exerts on its targets
            if dj == 1:
                for e in range(beta_indptr[j], beta_indptr[j + 1]):
                    p_inf[beta_idx[e]] -= beta_w[e]
            elif dj == 2:
                for e in range(d1_indptr[j], d1_indptr[j + 1]):
                    p_pat1[d1_idx[e]] -= d1_w[e]
                for e in range(d2_indptr[j], d2_indptr[j + 1]):
                    p_pat2[d2_idx[e]] -= d2_w[e]
            if new == 1:
                for e in range(beta_indptr[j], beta_indptr[j + 1]):
                    p_inf[beta_idx[e]] += beta_w[e]
            elif new == 2:
                for e in range(d1_indptr[j], d1_indptr[j + 1]):
                    p_pat1[d1_idx[e]] += d1_w[e]
                for e in range(d2_indptr[j], d2_indptr[j + 1]):
                    p_pat2[d2_idx[e]] += d2_w[e]
            digit[j] = new

            lam_tot = 0.0
            for i in range(n):
                if digit[i] == 0:
                    li = p_inf[i] + p_pat1[i]
                elif digit[i] == 1:
                    li = gamma[i] + p_pat2[i]
                else:
                    li = alpha[i]
                lam[i] = li
                lam_tot += li
            t = t_next

        # the final state holds on [t, t_end]
        for i in range(n):
            if digit[i] == 1:
                for g in range(seg[i], n_grid):
                    counts_inf[g, i] += 1
            elif digit[i] == 2:
                for g in range(seg[i], n_grid):
                    counts_pat[g, i] += 1
