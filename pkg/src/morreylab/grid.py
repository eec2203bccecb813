"""Dyadic grids, cubes, piecewise-constant functions and weights.

A grid lives on the root cube ``[-2**(J-1), 2**(J-1))**dim`` and is refined
``L`` times, so the finest cells have side ``2**(J-L)``.  Cell values are
stored as arrays of shape ``(2**L,)`` or ``(2**L, 2**L)``; flattening them in
C order gives the row-major cell numbering used for serialization.

Most of the heavy lifting elsewhere in the package goes through two helpers
defined here: :meth:`DyadicGrid.pyramid`, which sums a cell array over every
dyadic cube level by level, and :meth:`DyadicGrid.blocks`, which exposes the
cells of each cube at a given level as rows of a 2-D array.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
from scipy import integrate

MAX_CELLS_LOG2 = 26


class GridSizeError(ValueError):
    """Raised when a grid would exceed the desk-scale cell cap."""


class WeightDomainError(ValueError):
    """Raised for weights that are not positive or not locally integrable."""


@dataclass(frozen=True)
class DyadicGrid:
    dim: int
    J: int
    L: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.L < 1:
            raise ValueError(f"depth L must be >= 1, got {self.L}")
        if self.dim * self.L > MAX_CELLS_LOG2:
            raise GridSizeError(
                f"grid with dim={self.dim}, L={self.L} has 2^{self.dim * self.L} cells; "
                f"the cap is 2^{MAX_CELLS_LOG2}"
            )

    # -- geometry -----------------------------------------------------------
    @property
    def n_side(self) -> int:
        return 1 << self.L

    @property
    def shape(self) -> tuple:
        return (self.n_side,) * self.dim

    @property
    def cell_count(self) -> int:
        return 1 << (self.dim * self.L)

    @property
    def root_side(self) -> float:
        return math.ldexp(1.0, self.J)

    @property
    def cell_side(self) -> float:
        return math.ldexp(1.0, self.J - self.L)

    @property
    def cell_volume(self) -> float:
        return self.cell_side ** self.dim

    @property
    def lower(self) -> float:
        return -math.ldexp(1.0, self.J - 1)

    @property
    def root(self) -> "DyadicCube":
        return DyadicCube(self, 0, (0,) * self.dim)

    def side_at(self, level: int) -> float:
        return math.ldexp(1.0, self.J - level)

    def volume_at(self, level: int) -> float:
        return self.side_at(level) ** self.dim

    def cells_per_side(self, level: int) -> int:
        """Number of finest cells along one edge of a level-``level`` cube."""
        return 1 << (self.L - level)

    def cube(self, level: int, *index: int) -> "DyadicCube":
        if len(index) == 1 and isinstance(index[0], (tuple, list)):
            index = tuple(index[0])
        return DyadicCube(self, level, tuple(int(i) for i in index))

    def cubes(self, level: int) -> Iterator["DyadicCube"]:
        """All cubes of one level, in row-major index order."""
        n = 1 << level
        for flat in range(n ** self.dim):
            yield DyadicCube(self, level, self._unflatten(flat, level))

    def all_cubes(self) -> Iterator["DyadicCube"]:
        for level in range(self.L + 1):
            yield from self.cubes(level)

    def _unflatten(self, flat: int, level: int) -> tuple:
        if self.dim == 1:
            return (flat,)
        n = 1 << level
        return (flat // n, flat % n)

    def cell_centers(self) -> tuple:
        """Midpoint coordinates along each axis (1-D arrays)."""
        h = self.cell_side
        c = self.lower + h * (np.arange(self.n_side) + 0.5)
        return (c,) * self.dim

    def cell_edges(self) -> np.ndarray:
        return self.lower + self.cell_side * np.arange(self.n_side + 1)

    # -- level-wise array helpers ------------------------------------------
    def pyramid(self, arr: np.ndarray) -> list:
        """Sums of ``arr`` over every dyadic cube, indexed by level.

        Level ``l`` holds an array of shape ``(2**l,)*dim``.  Each level is
        built from the one below, so sums are additive over children by
        construction.
        """
        arr = np.asarray(arr, dtype=float).reshape(self.shape)
        out = [None] * (self.L + 1)
        out[self.L] = arr
        cur = arr
        for level in range(self.L - 1, -1, -1):
            n = 1 << level
            if self.dim == 1:
                cur = cur.reshape(n, 2).sum(axis=1)
            else:
                cur = cur.reshape(n, 2, n, 2).sum(axis=(1, 3))
            out[level] = cur
        return out

    def blocks(self, arr: np.ndarray, level: int) -> np.ndarray:
        """Cells of each level-``level`` cube as rows, cubes in row-major order."""
        arr = np.asarray(arr).reshape(self.shape)
        n = 1 << level
        s = self.cells_per_side(level)
        if self.dim == 1:
            return arr.reshape(n, s)
        return arr.reshape(n, s, n, s).transpose(0, 2, 1, 3).reshape(n * n, s * s)

    def unblock(self, rows: np.ndarray, level: int) -> np.ndarray:
        """Inverse of :meth:`blocks`."""
        n = 1 << level
        s = self.cells_per_side(level)
        if self.dim == 1:
            return np.asarray(rows).reshape(self.shape)
        return np.asarray(rows).reshape(n, n, s, s).transpose(0, 2, 1, 3).reshape(self.shape)

    def expand(self, vals: np.ndarray, level: int) -> np.ndarray:
        """Broadcast one value per level-``level`` cube back to the cells."""
        n = 1 << level
        s = self.cells_per_side(level)
        vals = np.asarray(vals).reshape((n,) * self.dim)
        if self.dim == 1:
            return np.repeat(vals, s)
        return np.broadcast_to(vals[:, None, :, None], (n, s, n, s)).reshape(self.shape)

    def coarsen_max(self, vals: np.ndarray, level: int) -> np.ndarray:
        """Max of a level-``level+1`` array over the children of each cube."""
        n = 1 << level
        vals = np.asarray(vals)
        if self.dim == 1:
            return vals.reshape(n, 2).max(axis=1)
        return vals.reshape(n, 2, n, 2).max(axis=(1, 3))

    def refine(self, vals: np.ndarray, level: int) -> np.ndarray:
        """Copy a level-``level`` array onto level ``level+1`` (each child inherits)."""
        vals = np.asarray(vals)
        if self.dim == 1:
            return np.repeat(vals, 2)
        return np.repeat(np.repeat(vals, 2, axis=0), 2, axis=1)

    def empty_mask(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=bool)


@dataclass(frozen=True, order=True)
class DyadicCube:
    grid: DyadicGrid
    level: int
    index: tuple

    def __post_init__(self):
        if not 0 <= self.level <= self.grid.L:
            raise ValueError(f"level {self.level} outside [0, {self.grid.L}]")
        if len(self.index) != self.grid.dim:
            raise ValueError(f"index {self.index} has wrong dimension")
        n = 1 << self.level
        if any(not 0 <= i < n for i in self.index):
            raise ValueError(f"index {self.index} outside [0, {n}) at level {self.level}")

    def __repr__(self) -> str:
        return f"DyadicCube(level={self.level}, index={self.index})"

    @property
    def side(self) -> float:
        return self.grid.side_at(self.level)

    @property
    def volume(self) -> float:
        return self.grid.volume_at(self.level)

    @property
    def lower_corner(self) -> np.ndarray:
        return self.grid.lower + self.side * np.array(self.index, dtype=float)

    @property
    def center(self) -> np.ndarray:
        return self.lower_corner + 0.5 * self.side

    @property
    def flat(self) -> int:
        """Position of the cube in the row-major order of its level."""
        if self.grid.dim == 1:
            return self.index[0]
        return self.index[0] * (1 << self.level) + self.index[1]

    @property
    def slices(self) -> tuple:
        s = self.grid.cells_per_side(self.level)
        return tuple(slice(i * s, (i + 1) * s) for i in self.index)

    def mask(self) -> np.ndarray:
        m = self.grid.empty_mask()
        m[self.slices] = True
        return m

    def parent(self) -> "DyadicCube":
        return self.ancestor(1)

    def ancestor(self, m: int) -> "DyadicCube":
        if m < 0 or m > self.level:
            raise ValueError(f"cube at level {self.level} has no {m}-th ancestor")
        return DyadicCube(self.grid, self.level - m, tuple(i >> m for i in self.index))

    def children(self) -> list:
        if self.level >= self.grid.L:
            return []
        if self.grid.dim == 1:
            return [DyadicCube(self.grid, self.level + 1, (2 * self.index[0] + b,)) for b in (0, 1)]
        i, j = self.index
        return [
            DyadicCube(self.grid, self.level + 1, (2 * i + a, 2 * j + b))
            for a in (0, 1)
            for b in (0, 1)
        ]

    def descendants(self, level: int) -> list:
        """All subcubes at an absolute ``level`` >= self.level."""
        k = level - self.level
        if k < 0:
            raise ValueError("descendant level above the cube")
        base = [i << k for i in self.index]
        if self.grid.dim == 1:
            return [DyadicCube(self.grid, level, (base[0] + a,)) for a in range(1 << k)]
        return [
            DyadicCube(self.grid, level, (base[0] + a, base[1] + b))
            for a in range(1 << k)
            for b in range(1 << k)
        ]

    def contains(self, other: "DyadicCube") -> bool:
        if other.level < self.level:
            return False
        k = other.level - self.level
        return all((j >> k) == i for i, j in zip(self.index, other.index))


def build_grid(dim: int, J: int, L: int) -> DyadicGrid:
    return DyadicGrid(dim, J, L)


def cube_geometry(Q: DyadicCube):
    """Return ``(side, volume, center, lower_corner)`` of a cube."""
    return Q.side, Q.volume, Q.center, Q.lower_corner


class GridFunction:
    """Piecewise-constant function on the finest cells of a grid.

    The value array is copied and marked read-only; arithmetic returns new
    instances.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: DyadicGrid, values):
        vals = np.array(values, dtype=float).reshape(grid.shape)
        vals.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    def __repr__(self) -> str:
        return f"GridFunction(grid={self.grid}, values={self.values.ravel()!r})"

    @classmethod
    def constant(cls, grid: DyadicGrid, c: float = 1.0) -> "GridFunction":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def indicator(cls, Q: DyadicCube) -> "GridFunction":
        return cls(Q.grid, Q.mask().astype(float))

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise ValueError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._other(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __abs__(self):
        return GridFunction(self.grid, np.abs(self.values))

    def abs_power(self, e: float) -> "GridFunction":
        """Pointwise ``|f|**e``."""
        return GridFunction(self.grid, np.abs(self.values) ** e)

    def restrict(self, Q: DyadicCube) -> np.ndarray:
        return self.values[Q.slices]

    def flat(self) -> np.ndarray:
        return self.values.ravel()


class Weight:
    """Positive cellwise-constant weight given by its density.

    ``cell_masses`` are density times cell volume; cube masses come from the
    pyramid of cell masses, hence are additive over children exactly.
    """

    def __init__(self, grid: DyadicGrid, density, masses=None):
        dens = np.array(density, dtype=float).reshape(grid.shape)
        if not np.all(np.isfinite(dens)) or np.any(dens <= 0):
            raise WeightDomainError("weight density must be finite and strictly positive")
        dens.setflags(write=False)
        self.grid = grid
        self.density = dens
        if masses is None:
            masses = dens * grid.cell_volume
        m = np.array(masses, dtype=float).reshape(grid.shape)
        m.setflags(write=False)
        self.cell_masses = m

    def __repr__(self) -> str:
        return f"Weight(grid={self.grid}, density={self.density.ravel()!r})"

    @classmethod
    def lebesgue(cls, grid: DyadicGrid) -> "Weight":
        return cls(grid, np.ones(grid.shape))

    @cached_property
    def mass_pyramid(self) -> list:
        return self.grid.pyramid(self.cell_masses)

    def mass(self, Q: DyadicCube) -> float:
        return float(self.mass_pyramid[Q.level][Q.index])

    def mass_of(self, cells: np.ndarray) -> float:
        return float(self.cell_masses[cells].sum())

    def power(self, e: float) -> "Weight":
        """The weight with density ``density**e`` (e.g. the dual weight)."""
        return Weight(self.grid, self.density ** e)

    def dual(self, q: float) -> "Weight":
        """``w**(-1/(q-1))``, the dual weight of the A_q condition."""
        return self.power(-1.0 / (q - 1.0))

    @cached_property
    def is_lebesgue(self) -> bool:
        return bool(np.all(self.density == 1.0))


def weight_mass(w: Weight, Q: DyadicCube) -> float:
    return w.mass(Q)


# -- power weights ------------------------------------------------------------

def _power_masses_1d(edges: np.ndarray, alpha: float) -> np.ndarray:
    """Exact integrals of |x|**alpha over [edges[i], edges[i+1])."""
    a, b = edges[:-1], edges[1:]
    lo = np.where(b <= 0, -b, a)  # mirror negative cells onto the positive axis
    hi = np.where(b <= 0, -a, b)
    e = alpha + 1.0
    out = np.empty_like(lo)
    zero = lo <= 0
    out[zero] = hi[zero] ** e / e
    pos = ~zero
    # F(hi) - F(lo) written as F(lo) * ((hi/lo)**e - 1) to avoid cancellation
    lp = lo[pos]
    out[pos] = lp ** e / e * np.expm1(e * np.log1p((hi[pos] - lp) / lp))
    return out


_GL_CACHE = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _tensor_gl(x0, x1, y0, y1, alpha, n):
    t, wt = _gauss_legendre(n)
    hx = 0.5 * (x1 - x0)
    hy = 0.5 * (y1 - y0)
    xs = (0.5 * (x0 + x1))[:, None] + hx[:, None] * t[None, :]
    ys = (0.5 * (y0 + y1))[:, None] + hy[:, None] * t[None, :]
    r2 = xs[:, :, None] ** 2 + ys[:, None, :] ** 2
    vals = r2 ** (0.5 * alpha)
    return hx * hy * np.einsum("kij,i,j->k", vals, wt, wt)


def _adaptive_square_masses(x0, x1, y0, y1, alpha, rtol, depth=0):
    coarse = _tensor_gl(x0, x1, y0, y1, alpha, 10)
    fine = _tensor_gl(x0, x1, y0, y1, alpha, 20)
    bad = np.abs(fine - coarse) > rtol * np.abs(fine)
    if depth >= 20 or not bad.any():
        return fine
    out = fine.copy()
    bx0, bx1, by0, by1 = x0[bad], x1[bad], y0[bad], y1[bad]
    mx, my = 0.5 * (bx0 + bx1), 0.5 * (by0 + by1)
    sub = 0.0
    for xa, xb in ((bx0, mx), (mx, bx1)):
        for ya, yb in ((by0, my), (my, by1)):
            sub = sub + _adaptive_square_masses(xa, xb, ya, yb, alpha, rtol, depth + 1)
    out[bad] = sub
    return out


def _corner_square_mass(h: float, alpha: float) -> float:
    """Integral of |x|**alpha over [0,h]^2 via polar coordinates."""
    e = alpha + 2.0
    ang, _ = integrate.quad(lambda t: np.cos(t) ** (-e), 0.0, math.pi / 4, epsabs=0, epsrel=1e-13)
    return 2.0 * ang / e * h ** e


def weight_from_power(grid: DyadicGrid, alpha: float, rtol: float = 1e-10) -> Weight:
    """Power weight |x|**alpha with cell masses computed exactly (1D) or by
    adaptive quadrature (2D)."""
    if alpha <= -grid.dim:
        raise WeightDomainError(
            f"|x|^{alpha} is not locally integrable in dimension {grid.dim}"
        )
    edges = grid.cell_edges()
    if alpha == 0:
        masses = np.full(grid.shape, grid.cell_volume)
    elif grid.dim == 1:
        masses = _power_masses_1d(edges, alpha)
    else:
        # reduce to the quadrant [0, R)^2 by symmetry; the origin is a grid vertex
        half = grid.n_side // 2
        pos = edges[half:]
        x0, y0 = np.meshgrid(pos[:-1], pos[:-1], indexing="ij")
        x1, y1 = np.meshgrid(pos[1:], pos[1:], indexing="ij")
        q = np.empty((half, half))
        flat = _adaptive_square_masses(
            x0.ravel()[1:], x1.ravel()[1:], y0.ravel()[1:], y1.ravel()[1:], alpha, rtol
        )
        q.ravel()[1:] = flat
        q[0, 0] = _corner_square_mass(grid.cell_side, alpha)
        top = np.concatenate([q[::-1, :], q], axis=0)
        masses = np.concatenate([top[:, ::-1], top], axis=1)
    masses = masses.reshape(grid.shape)
    return Weight(grid, masses / grid.cell_volume, masses=masses)


def concentric_double(Q: DyadicCube) -> np.ndarray:
    """Boolean cell mask of 2Q (same center, twice the side).

    Requires ``1 <= level < L`` so that 2Q is a union of finest cells, and
    2Q inside the root cube.
    """
    grid = Q.grid
    if Q.level < 1:
        raise ValueError("2Q of the root cube leaves the grid")
    if Q.level >= grid.L:
        raise ValueError("2Q of a finest cell is not aligned with the grid")
    s = grid.cells_per_side(Q.level)
    h = s // 2
    sl = []
    for i in Q.index:
        lo, hi = i * s - h, (i + 1) * s + h
        if lo < 0 or hi > grid.n_side:
            raise ValueError(f"2Q of {Q} is not contained in the root cube")
        sl.append(slice(lo, hi))
    m = grid.empty_mask()
    m[tuple(sl)] = True
    return m


# -- serialization -------------------------------------------------------------

def to_csv(values: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("cell_index,value\n")
    for i, v in enumerate(np.asarray(values, dtype=float).ravel()):
        buf.write(f"{i},{float(v)!r}\n")
    return buf.getvalue()


def read_cell_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["cell_index", "value"]:
        raise ValueError("expected header 'cell_index,value'")
    body = [r for r in rows[1:] if r]
    idx = np.array([int(r[0]) for r in body])
    if not np.array_equal(idx, np.arange(len(body))):
        raise ValueError("cell indices must be 0..N-1 in order")
    return np.array([float(r[1]) for r in body])


def grid_for_cell_count(count: int, dim: int = 1, J: int = 0) -> DyadicGrid:
    bits = count.bit_length() - 1
    if count <= 0 or (1 << bits) != count or bits % dim:
        raise ValueError(f"{count} cells do not form a dyadic grid in dimension {dim}")
    return DyadicGrid(dim, J, bits // dim)


def function_to_csv(f: GridFunction) -> str:
    return to_csv(f.values)


def function_from_csv(text: str, grid: DyadicGrid) -> GridFunction:
    vals = read_cell_csv(text)
    if vals.size != grid.cell_count:
        raise ValueError(f"expected {grid.cell_count} cells, got {vals.size}")
    return GridFunction(grid, vals)


def weight_to_csv(w: Weight) -> str:
    return to_csv(w.density)


def weight_from_csv(text: str, grid: DyadicGrid) -> Weight:
    vals = read_cell_csv(text)
    if vals.size != grid.cell_count:
        raise ValueError(f"expected {grid.cell_count} cells, got {vals.size}")
    return Weight(grid, vals)


def as_values(f) -> np.ndarray:
    """Cell array of a GridFunction, Weight or plain array."""
    if isinstance(f, GridFunction):
        return f.values
    if isinstance(f, Weight):
        return f.density
    return np.asarray(f, dtype=float)


def check_same_grid(objs: Sequence) -> DyadicGrid:
    grids = {o.grid for o in objs}
    if len(grids) != 1:
        raise ValueError("objects live on different grids")
    return grids.pop()
