"""Brute-force oracles shared by the tests.

They loop over cubes and cells one at a time and use only the definitions,
so they share no code with the vectorized implementations.
"""

import numpy as np


def cube_cells(Q):
    return np.asarray(Q.grid.empty_mask() | Q.mask())


def rearrangement_oracle(vals, t, cell_volume):
    """inf{rho >= 0 : |{|f| > rho}| <= t} by scanning every candidate rho."""
    a = np.abs(np.asarray(vals, dtype=float).ravel())
    for rho in sorted(set([0.0] + a.tolist())):
        if np.count_nonzero(a > rho) * cell_volume <= t + 1e-12:
            return rho
    raise AssertionError("unreachable")


def median_ok(vals, m):
    v = np.asarray(vals).ravel()
    half = v.size / 2
    return np.count_nonzero(v > m) <= half and np.count_nonzero(v < m) <= half


def oscillation_oracle(vals, lam, cell_volume):
    """min over c of the rearrangement of f - c, c ranging over all midpoints."""
    v = np.asarray(vals, dtype=float).ravel()
    t = lam * v.size * cell_volume
    cands = {(a + b) / 2 for a in v for b in v}
    return min(rearrangement_oracle(v - c, t, cell_volume) for c in cands)


def all_cubes(grid):
    return list(grid.all_cubes())


def brute_weight_constants(dens, cell_volume, q):
    """(A_q, A_1) by explicit enumeration of every dyadic cube of a 1D grid."""
    n = len(dens)
    aq = 0.0
    Mw = np.zeros(n)
    size = n
    while size >= 1:
        for start in range(0, n, size):
            d = dens[start:start + size]
            vol = size * cell_volume
            avg = np.sum(d) * cell_volume / vol
            dual = (np.sum(d ** (-1.0 / (q - 1))) * cell_volume / vol) ** (q - 1)
            aq = max(aq, avg * dual)
            Mw[start:start + size] = np.maximum(Mw[start:start + size], avg)
        size //= 2
    return aq, float(np.max(Mw / dens))


def rh_epsilon_oracle(dens, ceiling=1.0):
    """Smallest per-cube root of the constant-2 reverse Holder equation (1D)."""
    from scipy.optimize import brentq

    n = len(dens)
    best = ceiling
    size = n
    while size >= 2:
        for start in range(0, n, size):
            d = np.asarray(dens[start:start + size], dtype=float)
            avg = d.mean()

            def h(e):
                return np.mean(d ** (1 + e)) ** (1 / (1 + e)) - 2 * avg

            if h(ceiling) > 0:
                best = min(best, brentq(h, 0.0, ceiling, xtol=1e-14))
        size //= 2
    return best
