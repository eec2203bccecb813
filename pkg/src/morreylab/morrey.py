"""The function Phi and Morrey-type norms over the dyadic cubes of a grid.

All suprema run over the finite family of dyadic cubes of the grid, and the
integrals are exact cell sums, so the returned numbers are exact maxima over
that family.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import DyadicCube, DyadicGrid, GridFunction, Weight

SAMKO = "samko"
KOMORI_SHIRAI = "komori-shirai"
GENERAL = "general"


@dataclass(frozen=True)
class MorreyParams:
    """Exponents and weights of the space M^p_q(w1, w2).

    ``w1`` (the scaling weight) is ``None`` for Lebesgue measure.
    """

    p: float
    q: float
    flavor: str
    w2: Weight
    w1: Optional[Weight] = None

    def __post_init__(self):
        if not 0 < self.q <= self.p < np.inf:
            raise ValueError(f"need 0 < q <= p < inf, got p={self.p}, q={self.q}")
        if self.flavor not in (SAMKO, KOMORI_SHIRAI, GENERAL):
            raise ValueError(f"unknown flavor {self.flavor!r}")

    @classmethod
    def samko(cls, p, q, w: Weight) -> "MorreyParams":
        return cls(p, q, SAMKO, w2=w, w1=None)

    @classmethod
    def komori_shirai(cls, p, q, w: Weight) -> "MorreyParams":
        return cls(p, q, KOMORI_SHIRAI, w2=w, w1=w)

    @classmethod
    def general(cls, p, q, w1: Weight, w2: Weight) -> "MorreyParams":
        return cls(p, q, GENERAL, w2=w2, w1=w1)

    @classmethod
    def lebesgue(cls, p, q, grid: DyadicGrid) -> "MorreyParams":
        return cls.samko(p, q, Weight.lebesgue(grid))

    @property
    def grid(self) -> DyadicGrid:
        return self.w2.grid

    def scale_pyramid(self) -> list:
        """w1(Q) for every cube, level by level."""
        if self.w1 is None:
            g = self.grid
            return [np.full((1 << lev,) * g.dim, g.volume_at(lev)) for lev in range(g.L + 1)]
        return self.w1.mass_pyramid


def phi(p: float, q: float, w: Weight, Q: DyadicCube) -> float:
    """``|Q|^(1/p) (w(Q)/|Q|)^(1/q)``."""
    if not 0 < q <= p:
        raise ValueError("need 0 < q <= p")
    vol = Q.volume
    return vol ** (1.0 / p) * (w.mass(Q) / vol) ** (1.0 / q)


def phi_pyramid(p: float, q: float, w: Weight) -> list:
    """Phi for every dyadic cube, one array per level."""
    g = w.grid
    out = []
    for lev, m in enumerate(w.mass_pyramid):
        vol = g.volume_at(lev)
        out.append(vol ** (1.0 / p) * (m / vol) ** (1.0 / q))
    return out


def _argmax_cube(grid: DyadicGrid, per_level: list):
    best, where = -np.inf, None
    for lev, arr in enumerate(per_level):
        arr = np.asarray(arr)
        k = int(np.argmax(arr))
        if arr.flat[k] > best:
            best, where = float(arr.flat[k]), (lev, k)
    return best, grid.cube(where[0], grid._unflatten(where[1], where[0]))


def morrey_table(f: GridFunction, params: MorreyParams) -> list:
    """Per-cube quantities w1(Q)^(1/p-1/q) (int_Q |f|^q dw2)^(1/q)."""
    p, q = params.p, params.q
    g = f.grid
    integrand = np.abs(f.values) ** q * params.w2.cell_masses
    sums = g.pyramid(integrand)
    scale = params.scale_pyramid()
    return [s ** (1.0 / p - 1.0 / q) * I ** (1.0 / q) for s, I in zip(scale, sums)]


def morrey_norm(f: GridFunction, params: MorreyParams, return_cube: bool = False):
    """Dyadic Morrey (quasi-)norm of ``f``; optionally also the maximizing cube."""
    best, Q = _argmax_cube(f.grid, morrey_table(f, params))
    return (best, Q) if return_cube else best


def weak_morrey_norm(f: GridFunction, p: float, q: float, w: Weight) -> float:
    """Samko-type weak Morrey norm.

    For each cube the supremum over t of ``t * w({|f| > t} cap Q)^(1/q)`` is
    attained as t increases to an attained value of |f|, where the level set
    becomes ``{|f| >= value}``.
    """
    if not 0 < q <= p:
        raise ValueError("need 0 < q <= p")
    g = f.grid
    a = np.abs(f.values)
    best = 0.0
    for lev in range(g.L + 1):
        vals = g.blocks(a, lev)
        mass = g.blocks(w.cell_masses, lev)
        order = np.argsort(-vals, axis=1, kind="stable")
        v = np.take_along_axis(vals, order, axis=1)
        cm = np.cumsum(np.take_along_axis(mass, order, axis=1), axis=1)
        cand = (v * cm ** (1.0 / q)).max(axis=1)
        best = max(best, float(cand.max()) * g.volume_at(lev) ** (1.0 / p - 1.0 / q))
    return best


def local_average_term(f: GridFunction, p: float, q: float, s: float, w: Weight) -> float:
    """``max_Q Phi(Q) ((1/w(Q)) int_Q |f|^s dw)^(1/s)``."""
    if not 0 < s <= q <= p:
        raise ValueError("need 0 < s <= q <= p")
    g = f.grid
    sums = g.pyramid(np.abs(f.values) ** s * w.cell_masses)
    best = 0.0
    for ph, I, m in zip(phi_pyramid(p, q, w), sums, w.mass_pyramid):
        best = max(best, float((ph * (I / m) ** (1.0 / s)).max()))
    return best
