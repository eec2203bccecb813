"""Dyadic maximal operators, sharp maximal operators and the Rubio de Francia
iteration.

Every operator takes the maximum of a per-cube quantity over the dyadic cubes
containing a cell.  That maximum is computed top-down: the running maximum at
level l is the larger of the parent's running maximum and the cube's own
value, so a whole pass costs O(N) once the per-cube values are known.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DyadicCube, DyadicGrid, GridFunction, Weight
from .rearrange import level_oscillations


def topdown_max(grid: DyadicGrid, per_level: list, start: int = 0) -> np.ndarray:
    """Cellwise max over levels ``start..L`` of per-cube values.

    ``per_level[l]`` holds one value per level-l cube, shaped ``(2**l,)*dim``
    (a flat array is accepted too).
    """
    cur = np.asarray(per_level[start]).reshape((1 << start,) * grid.dim)
    for lev in range(start + 1, grid.L + 1):
        own = np.asarray(per_level[lev]).reshape((1 << lev,) * grid.dim)
        cur = np.maximum(grid.refine(cur, lev - 1), own)
    return cur


def _averages(grid: DyadicGrid, values: np.ndarray) -> list:
    cv = grid.cell_volume
    return [s * cv / grid.volume_at(lev) for lev, s in enumerate(grid.pyramid(values))]


def hl_maximal(f: GridFunction) -> GridFunction:
    """Dyadic Hardy-Littlewood maximal function of |f|."""
    g = f.grid
    return GridFunction(g, topdown_max(g, _averages(g, np.abs(f.values))))


def powered_maximal(f: GridFunction, eta: float) -> GridFunction:
    """``M^(eta) f = (M |f|^eta)^(1/eta)``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    g = f.grid
    m = topdown_max(g, _averages(g, np.abs(f.values) ** eta))
    return GridFunction(g, m ** (1.0 / eta))


def weighted_maximal(f: GridFunction, w: Weight) -> GridFunction:
    """Dyadic maximal function with respect to the measure w dx."""
    g = f.grid
    sums = g.pyramid(np.abs(f.values) * w.cell_masses)
    avgs = [s / m for s, m in zip(sums, w.mass_pyramid)]
    return GridFunction(g, topdown_max(g, avgs))


def _sharp_on(values: np.ndarray, dim: int, lam: float) -> np.ndarray:
    depth = int(round(np.log2(values.shape[0])))
    if depth == 0:
        return np.zeros(values.shape)
    sub = DyadicGrid(dim, 0, depth)
    osc = [level_oscillations(sub, values, lev, lam) for lev in range(depth + 1)]
    return topdown_max(sub, osc)


def local_sharp(f: GridFunction, Q0: DyadicCube, lam: float) -> GridFunction:
    """Cellwise max of ``oscillation(f, Q, lam)`` over dyadic Q with x in Q, Q inside Q0.

    Zero outside ``Q0``.
    """
    g = f.grid
    out = np.zeros(g.shape)
    sub = np.array(f.values[Q0.slices])
    if Q0.level == g.L:
        out[Q0.slices] = 0.0
    else:
        out[Q0.slices] = _sharp_on(sub, g.dim, lam)
    return GridFunction(g, out)


def global_sharp(f: GridFunction, lam: float) -> GridFunction:
    """Cellwise max of ``oscillation(f, Q, lam)`` over all dyadic Q containing the cell."""
    g = f.grid
    return GridFunction(g, _sharp_on(f.values, g.dim, lam))


def fs_sharp(f: GridFunction, eta: float = 1.0) -> GridFunction:
    """Dyadic Fefferman-Stein sharp function ``max_Q (avg_Q |f - f_Q|^eta)^(1/eta)``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    g = f.grid
    per_level = []
    for lev in range(g.L + 1):
        rows = g.blocks(f.values, lev)
        dev = np.abs(rows - rows.mean(axis=1, keepdims=True)) ** eta
        per_level.append(dev.mean(axis=1) ** (1.0 / eta))
    return GridFunction(g, topdown_max(g, per_level))


@dataclass(frozen=True)
class RubioResult:
    """Truncated Rubio de Francia sum and its truncation diagnostics.

    ``tail`` is ``2 ||M^K f||_inf / (2 alpha)^K``.  ``a1_excess`` bounds the
    amount by which truncation can push ``M(Rf)/Rf`` above ``2 alpha``,
    namely ``max M^(K+1) f / ((2 alpha)^K Rf)``.
    """

    function: GridFunction
    tail: float
    a1_excess: float


def rubio_iteration(f: GridFunction, alpha: float, K: int) -> RubioResult:
    """``Rf = sum_{k=0}^K M^k f / (2 alpha)^k`` with ``M^0 f = f``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if K < 0:
        raise ValueError("K must be nonnegative")
    if np.any(f.values < 0):
        raise ValueError("the iteration is defined for f >= 0")
    two_a = 2.0 * alpha
    term = f
    total = np.array(f.values, dtype=float)
    for k in range(1, K + 1):
        term = hl_maximal(term)
        total = total + term.values / two_a ** k
    tail = 2.0 * float(np.max(term.values)) / two_a ** K
    nxt = hl_maximal(term).values
    with np.errstate(divide="ignore", invalid="ignore"):
        excess = np.where(total > 0, nxt / (two_a ** K * total), 0.0)
    return RubioResult(GridFunction(f.grid, total), tail, float(np.max(excess)))
