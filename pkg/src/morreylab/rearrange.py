"""Decreasing rearrangement, medians and local mean oscillation on cubes.

All cells inside a dyadic cube have the same volume, so every quantity here
reduces to order statistics of the cell values.  Besides the per-cube
functions there are level-wise versions that treat all cubes of one level at
once; the maximal operators and the sparse machinery are built on those.
"""

from __future__ import annotations

import math

import numpy as np

from .grid import DyadicCube, DyadicGrid, GridFunction, as_values

# tolerance used when converting a measure into a number of cells
_COUNT_EPS = 1e-9


def allowed_count(t: float, cell_volume: float) -> int:
    """Largest integer k with ``k * cell_volume <= t`` (robust to rounding)."""
    c = t / cell_volume
    k = math.floor(c)
    if c - k > 1.0 - _COUNT_EPS:
        k += 1
    return int(k)


def _cube_values(f, Q: DyadicCube) -> np.ndarray:
    return np.asarray(as_values(f))[Q.slices].ravel()


def rearrangement_at(f, Q: DyadicCube, t: float) -> float:
    """``inf{rho >= 0 : |{x in Q : |f(x)| > rho}| <= t}``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    vals = np.abs(_cube_values(f, Q))
    k = allowed_count(t, Q.grid.cell_volume)
    if k >= vals.size:
        return 0.0
    # the (k+1)-th largest |f| value
    return float(np.partition(vals, vals.size - 1 - k)[vals.size - 1 - k])


def median(f, Q: DyadicCube) -> float:
    """Lower median of ``f`` on ``Q`` (smallest attained admissible value)."""
    vals = _cube_values(f, Q)
    i = (vals.size - 1) // 2
    return float(np.partition(vals, i)[i])


def window_size(m: int, lam: float) -> int:
    """Number of cells a window must capture so that at most lam*m are left out."""
    return m - allowed_count(lam * m, 1.0)


def _min_window(sorted_rows: np.ndarray, k: int) -> np.ndarray:
    m = sorted_rows.shape[1]
    if k <= 1:
        return np.zeros(sorted_rows.shape[0])
    widths = sorted_rows[:, k - 1:] - sorted_rows[:, : m - k + 1]
    return widths.min(axis=1) / 2.0


def oscillation(f, Q: DyadicCube, lam: float) -> float:
    """Local mean oscillation ``inf_c ((f - c) chi_Q)^*(lam |Q|)``."""
    _check_lambda(lam)
    vals = np.sort(_cube_values(f, Q))
    k = window_size(vals.size, lam)
    return float(_min_window(vals[None, :], k)[0])


def _check_lambda(lam: float):
    if not 0 < lam < 0.5:
        raise ValueError(f"lambda must lie in (0, 1/2), got {lam}")


# -- level-wise versions -------------------------------------------------------

def sorted_blocks(grid: DyadicGrid, values: np.ndarray, level: int) -> np.ndarray:
    return np.sort(grid.blocks(values, level), axis=1)


def level_medians(grid: DyadicGrid, values: np.ndarray, level: int) -> np.ndarray:
    """Lower medians of all cubes of a level (flat row-major order)."""
    rows = grid.blocks(values, level)
    i = (rows.shape[1] - 1) // 2
    return np.partition(rows, i, axis=1)[:, i]


def level_oscillations(grid: DyadicGrid, values: np.ndarray, level: int, lam: float) -> np.ndarray:
    """Oscillations of all cubes of a level (flat row-major order)."""
    _check_lambda(lam)
    rows = sorted_blocks(grid, values, level)
    return _min_window(rows, window_size(rows.shape[1], lam))


def level_rearrangements(grid: DyadicGrid, values: np.ndarray, level: int, t: float) -> np.ndarray:
    """``(f chi_Q)^*(t)`` for all cubes of a level at one common ``t``."""
    rows = np.abs(grid.blocks(values, level))
    m = rows.shape[1]
    k = allowed_count(t, grid.cell_volume)
    if k >= m:
        return np.zeros(rows.shape[0])
    j = m - 1 - k
    return np.partition(rows, j, axis=1)[:, j]


def oscillation_pyramid(f: GridFunction, lam: float) -> list:
    """Oscillations of every dyadic cube, one flat array per level."""
    return [level_oscillations(f.grid, f.values, lev, lam) for lev in range(f.grid.L + 1)]
