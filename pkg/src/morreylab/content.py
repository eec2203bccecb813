"""Dyadic Hausdorff content, Choquet integrals, candidate functions of the
class B_alpha, and two-sided bounds for the block-space norm.

The content of a set of cells is the exact optimum over covers by dyadic
cubes, found by the tree recursion

    c(Q) = 0                                   if Q misses E,
    c(Q) = min(side(Q)**alpha, sum c(children)) otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grid import DyadicCube, DyadicGrid, GridFunction, Weight, weight_from_power
from .maximal import hl_maximal
from .morrey import MorreyParams, morrey_norm


def _content_batch(grid: DyadicGrid, masks: np.ndarray, alpha: float) -> np.ndarray:
    """Hausdorff contents of a stack of cell masks (leading axis = batch)."""
    T = masks.shape[0]
    nonempty = masks.reshape((T,) + grid.shape)
    cost = np.where(nonempty, grid.side_at(grid.L) ** alpha, 0.0)
    for lev in range(grid.L - 1, -1, -1):
        n = 1 << lev
        if grid.dim == 1:
            csum = cost.reshape(T, n, 2).sum(axis=2)
            nonempty = nonempty.reshape(T, n, 2).any(axis=2)
        else:
            csum = cost.reshape(T, n, 2, n, 2).sum(axis=(2, 4))
            nonempty = nonempty.reshape(T, n, 2, n, 2).any(axis=(2, 4))
        cost = np.where(nonempty, np.minimum(grid.side_at(lev) ** alpha, csum), 0.0)
    return cost.reshape(T)


def hausdorff_content(E: np.ndarray, alpha: float, grid: Optional[DyadicGrid] = None) -> float:
    """Dyadic alpha-dimensional Hausdorff content of a set of cells.

    ``E`` is a boolean cell mask (shape of the grid).  The grid is inferred
    from the mask shape when not given.
    """
    E = np.asarray(E, dtype=bool)
    if grid is None:
        grid = _grid_from_shape(E.shape)
    if not 0 < alpha <= grid.dim:
        raise ValueError(f"alpha must lie in (0, {grid.dim}]")
    return float(_content_batch(grid, E[None], alpha)[0])


def _grid_from_shape(shape) -> DyadicGrid:
    L = int(shape[0]).bit_length() - 1
    return DyadicGrid(len(shape), 0, L)


def choquet_integral(phi: GridFunction, alpha: float, chunk: int = 256) -> float:
    """Choquet integral of ``phi >= 0`` against the dyadic Hausdorff content.

    Layer cake over the distinct values ``0 = t_0 < t_1 < ...`` of ``phi``:
    ``sum_i (t_{i+1} - t_i) * H^alpha({phi > t_i})``.
    """
    vals = phi.values
    if np.any(vals < 0):
        raise ValueError("the Choquet integral is taken of nonnegative functions")
    g = phi.grid
    levels = np.unique(np.concatenate([[0.0], vals.ravel()]))
    if levels.size == 1:
        return 0.0
    lower, steps = levels[:-1], np.diff(levels)
    total = 0.0
    for start in range(0, lower.size, chunk):
        t = lower[start:start + chunk]
        masks = vals[None, ...] > t.reshape((-1,) + (1,) * g.dim)
        total += float(np.dot(steps[start:start + chunk], _content_batch(g, masks, alpha)))
    return total


@dataclass(frozen=True)
class CandidateB:
    """A positive function normalized to have Choquet integral at most one.

    ``alpha`` is the content dimension and ``support`` the cube over which the
    Choquet integral was taken.
    """

    b: GridFunction
    a1_const: float
    choquet: float
    alpha: float
    support: DyadicCube


def _a1(b: np.ndarray, grid: DyadicGrid) -> float:
    return float(np.max(hl_maximal(GridFunction(grid, b)).values / b))


def _normalize(b: np.ndarray, grid: DyadicGrid, alpha: float, support: DyadicCube) -> CandidateB:
    ch = choquet_integral(GridFunction(grid, b * support.mask()), alpha)
    scale = max(1.0, ch)
    b = b / scale
    return CandidateB(GridFunction(grid, b), _a1(b, grid), ch / scale, alpha, support)


def candidate_b_maximal(Q: DyadicCube, alpha: float, eps: float) -> CandidateB:
    """``(M chi_Q)^(alpha/n + eps) / side(Q)^alpha``, normalized into B_alpha.

    The Choquet integral is taken over the whole grid.
    """
    g = Q.grid
    n = g.dim
    if not 0 < eps < 1 - alpha / n:
        raise ValueError(f"eps must lie in (0, {1 - alpha / n})")
    m = hl_maximal(GridFunction.indicator(Q)).values
    b = m ** (alpha / n + eps) / Q.side ** alpha
    return _normalize(b, g, alpha, g.root)


def power_beta(p: float, q: float, alpha: float, n: int = 1) -> float:
    """Midpoint of the admissible interval for the exponent beta."""
    if not -q * n / p <= alpha < n * (q - q / p):
        raise ValueError(
            f"alpha={alpha} outside [-qn/p, n(q - q/p)) = [{-q * n / p}, {n * (q - q / p)})"
        )
    lo = max((alpha - n * (q - 1)) / n, 0.0)
    hi = 1.0 - q / p
    if lo >= hi:
        raise ValueError(f"empty interval for beta: ({lo}, {hi})")
    return 0.5 * (lo + hi)


def candidate_b_power(Q0: DyadicCube, p: float, q: float, alpha: float) -> CandidateB:
    """``|Q0|^(beta - (1 - q/p)) |x|^(-n beta)`` from exact cell averages (1D).

    The weight exponent ``alpha`` refers to ``w = |x|^alpha``; the content
    dimension is ``n(1 - q/p)`` and the Choquet integral is taken over Q0.
    """
    g = Q0.grid
    if g.dim != 1:
        raise ValueError("the power candidate is implemented in 1D only")
    n = 1
    beta = power_beta(p, q, alpha, n)
    dens = weight_from_power(g, -n * beta).density
    b = Q0.volume ** (beta - (1 - q / p)) * dens
    return _normalize(b, g, n * (1 - q / p), Q0)


def block_norm_upper(g: GridFunction, p: float, q: float, candidates: Sequence[CandidateB]) -> float:
    """Upper bound ``min_b (int |g|^q' b^(-q'/q))^(1/q')`` for the block norm."""
    if q <= 1:
        raise ValueError("need q > 1")
    if not candidates:
        raise ValueError("need at least one candidate")
    qp = q / (q - 1)
    vol = g.grid.cell_volume
    a = np.abs(g.values) ** qp
    best = np.inf
    for c in candidates:
        val = float(np.sum(a * c.b.values ** (-qp / q)) * vol) ** (1.0 / qp)
        best = min(best, val)
    return best


def block_norm_lower(g: GridFunction, p: float, q: float, test_fs: Sequence[GridFunction]) -> float:
    """Lower bound ``max_f int |f g| / ||f||_{M^p_q}`` (Lebesgue Samko norm)."""
    params = MorreyParams.samko(p, q, Weight.lebesgue(g.grid))
    vol = g.grid.cell_volume
    best = 0.0
    for f in test_fs:
        nf = morrey_norm(f, params)
        if nf <= 0:
            raise ValueError("test functions must have positive norm")
        best = max(best, float(np.sum(np.abs(f.values * g.values)) * vol) / nf)
    return best
