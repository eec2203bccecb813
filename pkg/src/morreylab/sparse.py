"""Sparse families of dyadic cubes.

Two constructions live here:

* :func:`cz_sparse`, the Calderon-Zygmund stopping time for the averages of a
  weight: level k consists of the maximal cubes whose average exceeds
  ``a**k`` times the average over the base cube;
* :func:`lerner_decompose`, the median-based local decomposition of a
  function, iterated until no cube is selected.

Certificates for both (the stopping-time bounds, the sparsity of each level,
the pointwise bound by the local sharp maximal function plus the sparse
oscillation sum) are exposed as plain functions returning small reports.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .grid import DyadicCube, DyadicGrid, GridFunction, Weight
from .maximal import local_sharp
from .rearrange import allowed_count, level_medians, level_oscillations
from .weights import reverse_holder_epsilon


# -- family container ---------------------------------------------------------------

@dataclass
class SparseFamily:
    """Levels of dyadic cubes; level 0 is normally the base cube alone."""

    grid: DyadicGrid
    levels: list
    eta: Optional[float] = None

    def omega(self, k: int) -> np.ndarray:
        """Cell mask of the union of the level-k cubes (empty past the last level)."""
        m = self.grid.empty_mask()
        if k < len(self.levels):
            for Q in self.levels[k]:
                m[Q.slices] = True
        return m

    def cubes(self):
        for k, lev in enumerate(self.levels):
            for Q in lev:
                yield k, Q

    def __len__(self) -> int:
        return sum(len(lev) for lev in self.levels)

    def to_json(self) -> str:
        data = {
            "grid": {"dim": self.grid.dim, "J": self.grid.J, "L": self.grid.L},
            "eta": self.eta,
            "levels": [[[Q.level, list(Q.index)] for Q in lev] for lev in self.levels],
        }
        return json.dumps(data)

    @classmethod
    def from_json(cls, text: str) -> "SparseFamily":
        data = json.loads(text)
        g = DyadicGrid(**data["grid"])
        levels = [[g.cube(lvl, *idx) for lvl, idx in lev] for lev in data["levels"]]
        return cls(g, levels, data.get("eta"))


@dataclass(frozen=True)
class SparseReport:
    """Per-property worst-case slack (nonnegative means the property holds)."""

    disjoint_slack: float
    nested_slack: float
    sparsity_slack: float
    worst_sparsity: float

    @property
    def ok(self) -> bool:
        return self.disjoint_slack >= 0 and self.nested_slack >= 0 and self.sparsity_slack >= 0


def validate_sparse(family: SparseFamily, eta: float) -> SparseReport:
    """Check disjointness within levels, nesting of the unions, and
    ``|Omega_{k+1} cap Q| <= eta |Q|`` for every cube Q of level k.

    Slacks: ``1 - max cover count`` for disjointness, minus the number of
    cells of Omega_{k+1} outside Omega_k for nesting, ``eta - worst ratio``
    for sparsity.
    """
    g = family.grid
    disjoint = 0.0
    nested = 0.0
    worst = 0.0
    for k, lev in enumerate(family.levels):
        count = np.zeros(g.shape, dtype=int)
        for Q in lev:
            count[Q.slices] += 1
        if lev:
            disjoint = min(disjoint, float(1 - count.max()))
        nxt = family.omega(k + 1)
        if k + 1 < len(family.levels):
            nested = min(nested, -float(np.count_nonzero(nxt & (count == 0))))
        for Q in lev:
            frac = np.count_nonzero(nxt[Q.slices]) / nxt[Q.slices].size
            worst = max(worst, frac)
    return SparseReport(disjoint, nested, eta - worst, worst)


# -- w-sparse parameters -----------------------------------------------------------------

@dataclass(frozen=True)
class WSparseParams:
    """Parameters of a w-sparse family, stored through base-2 logarithms.

    ``lambda_prime`` and ``lambda_w`` are the floats ``2**log2``; they may
    underflow to 0.0 for large ``a_inf`` while the logarithms stay exact.
    """

    n: int
    epsilon: float
    log2_lambda_prime: float
    log2_lambda: float
    C_w: float

    @property
    def lambda_prime(self) -> float:
        return 2.0 ** self.log2_lambda_prime

    @property
    def lambda_w(self) -> float:
        return 2.0 ** self.log2_lambda

    def degenerate_for(self, Q0: DyadicCube) -> bool:
        """True when ``lambda_w |Q0|`` is below one finest cell."""
        g = Q0.grid
        return self.log2_lambda + math.log2(Q0.volume) < math.log2(g.cell_volume)


def _cw(log2_lambda_prime: float, eps: float) -> float:
    x = 2.0 ** (1.0 + log2_lambda_prime * eps / (1.0 + eps))
    if x >= 1.0:
        return math.inf
    return 1.0 / (1.0 - x)


def wsparse_params(a_inf: float, n: int, slack: float = 0.5,
                   Q0: Optional[DyadicCube] = None) -> WSparseParams:
    """``lambda' = slack * 2^(-1 - 2^(n+3) a_inf)``, ``lambda = 2^(-n-2) lambda'``,
    ``eps = 1/(2^(n+3) a_inf)``, ``C_w = (1 - 2 lambda'^(eps/(1+eps)))^-1``."""
    if a_inf < 1:
        raise ValueError("a_inf must be at least 1")
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    if not 0 < slack < 1:
        raise ValueError("slack must lie in (0, 1)")
    big = 2.0 ** (n + 3) * a_inf
    l2lp = math.log2(slack) - 1.0 - big
    eps = 1.0 / big
    params = WSparseParams(n, eps, l2lp, l2lp - n - 2, _cw(l2lp, eps))
    if Q0 is not None and params.degenerate_for(Q0):
        warnings.warn("lambda_w |Q0| is smaller than one cell: oscillations are taken "
                      "at the top of each cube (degenerate regime)", stacklevel=2)
    return params


def custom_wsparse_params(lambda_prime: float, epsilon: float, n: int) -> WSparseParams:
    """Parameters built from a measured sparsity and reverse Holder exponent."""
    if lambda_prime <= 0:
        l2 = -math.inf
    else:
        l2 = math.log2(lambda_prime)
    cw = 1.0 if l2 == -math.inf else _cw(l2, epsilon)
    return WSparseParams(n, epsilon, l2, l2 - n - 2, cw)


def plain_sparse_lambda(n: int) -> float:
    """``lambda_n = 2^(-n-2)``, the parameter of the unweighted decomposition."""
    return 2.0 ** (-n - 2)


# -- Calderon-Zygmund stopping time ------------------------------------------------------

def _sub(arr: np.ndarray, Q0: DyadicCube, level: int) -> np.ndarray:
    """Part of a level array lying inside Q0."""
    k = level - Q0.level
    sl = tuple(slice(i << k, (i + 1) << k) for i in Q0.index)
    return arr[sl]


def _cubes_from_mask(grid: DyadicGrid, Q0: DyadicCube, level: int, mask: np.ndarray) -> list:
    k = level - Q0.level
    base = [i << k for i in Q0.index]
    idx = np.argwhere(mask)
    return [grid.cube(level, *(int(b + j) for b, j in zip(base, row))) for row in idx]


def cz_sparse(w: Weight, Q0: DyadicCube, a: float) -> SparseFamily:
    """Stopping-time family for the averages of ``w`` inside ``Q0``.

    ``gamma0 = w(Q0)/|Q0|``; level k >= 1 holds the maximal dyadic
    ``Q`` inside ``Q0`` with ``w(Q)/|Q| > a**k gamma0``.  Stops at the first
    empty level.  The family is ``2**n/a``-sparse.
    """
    g = w.grid
    if a <= 2 ** g.dim:
        raise ValueError(f"need a > 2^n = {2 ** g.dim}")
    avgs = [m / g.volume_at(lev) for lev, m in enumerate(w.mass_pyramid)]
    gamma0 = float(avgs[Q0.level][Q0.index])
    levels = [[Q0]]
    k = 1
    while True:
        thr = a ** k * gamma0
        found = []
        covered = np.zeros((1,) * g.dim, dtype=bool)
        for lev in range(Q0.level + 1, g.L + 1):
            covered = g.refine(covered, lev - 1)
            above = _sub(avgs[lev], Q0, lev) > thr
            sel = above & ~covered
            if sel.any():
                found.extend(_cubes_from_mask(g, Q0, lev, sel))
            covered = covered | above
        if not found:
            break
        levels.append(sorted(found, key=lambda Q: (Q.level, Q.index)))
        k += 1
    return SparseFamily(g, levels, eta=2 ** g.dim / a)


@dataclass(frozen=True)
class StoppingReport:
    """Worst slacks of ``a^k g0 < avg <= 2^n a^k g0`` and of the sparsity bound."""

    lower_slack: float
    upper_slack: float
    sparsity_slack: float

    @property
    def ok(self) -> bool:
        return self.lower_slack > 0 and self.upper_slack >= 0 and self.sparsity_slack >= 0


def stopping_report(w: Weight, family: SparseFamily, a: float) -> StoppingReport:
    """Replay the stopping-time bounds on a family from :func:`cz_sparse`.

    Slacks are relative to the threshold ``a^k gamma0``.
    """
    g = w.grid
    Q0 = family.levels[0][0]
    gamma0 = w.mass(Q0) / Q0.volume
    lower = math.inf
    upper = math.inf
    for k, Q in family.cubes():
        if k == 0:
            continue
        thr = a ** k * gamma0
        avg = w.mass(Q) / Q.volume
        lower = min(lower, (avg - thr) / thr)
        upper = min(upper, (2 ** g.dim * thr - avg) / thr)
    rep = validate_sparse(family, 2 ** g.dim / a)
    if lower == math.inf:
        lower, upper = 1.0, 1.0
    return StoppingReport(lower, upper, rep.sparsity_slack)


def cz_sparse_fraction(densities, dim: int, Q0_level: int, Q0_index: tuple, L: int, a) -> list:
    """Exact rational re-implementation of :func:`cz_sparse` (testing oracle).

    Works on integer or Fraction densities with brute-force enumeration of
    subcubes; returns levels as lists of ``(level, index)`` pairs.
    """
    dens = np.asarray(densities, dtype=object).reshape((1 << L,) * dim)
    a = Fraction(a)

    def avg(level, index):
        s = 1 << (L - level)
        sl = tuple(slice(i * s, (i + 1) * s) for i in index)
        block = dens[sl].ravel()
        return Fraction(sum(Fraction(v) for v in block), len(block))

    def subcubes(level):
        k = level - Q0_level
        ranges = [range(i << k, (i + 1) << k) for i in Q0_index]
        if dim == 1:
            return [(i,) for i in ranges[0]]
        return [(i, j) for i in ranges[0] for j in ranges[1]]

    gamma0 = avg(Q0_level, Q0_index)
    out = [[(Q0_level, tuple(Q0_index))]]
    k = 1
    while True:
        thr = a ** k * gamma0
        sel = []
        for lev in range(Q0_level + 1, L + 1):
            for idx in subcubes(lev):
                if avg(lev, idx) <= thr:
                    continue
                parent_ok = all(
                    avg(lev - m, tuple(i >> m for i in idx)) <= thr
                    for m in range(1, lev - Q0_level + 1)
                )
                if parent_ok:
                    sel.append((lev, idx))
        if not sel:
            break
        out.append(sorted(sel))
        k += 1
    return out


# -- Lerner decomposition ---------------------------------------------------------------

@dataclass
class LernerDecomposition:
    """Result of the iterated median decomposition of ``f`` on ``base``.

    ``f - m0 = g + sum_Q alphas[Q] chi_Q`` (up to rounding) with ``g``
    supported where the iteration stopped.  ``thresholds[Q]`` is the
    rearrangement threshold used when Q was decomposed.
    """

    base: DyadicCube
    m0: float
    lam: float
    family: SparseFamily
    alphas: dict
    thresholds: dict
    g: GridFunction
    level_measures: list
    residual_max: float
    generators: dict = field(default_factory=dict)

    def reconstruction(self) -> np.ndarray:
        out = np.array(self.g.values)
        for Q, a in self.alphas.items():
            out[Q.slices] += a
        return out


def _step(f_vals: np.ndarray, medians: list, Q: DyadicCube, lam: float, grid: DyadicGrid):
    """One application of the local decomposition on cube Q.

    Returns ``(m_Q, t, selected cubes, alphas, cell mask of the union)``.
    """
    mQ = float(medians[Q.level][Q.index])
    f1 = f_vals[Q.slices] - mQ
    absf1 = np.abs(f1).ravel()
    k = allowed_count(lam * Q.volume, grid.cell_volume)
    if k >= absf1.size:
        t = 0.0
    else:
        j = absf1.size - 1 - k
        t = float(np.partition(absf1, j)[j])
    selected = []
    covered = np.zeros((1,) * grid.dim, dtype=bool)
    for lev in range(Q.level, grid.L):
        if lev > Q.level:
            covered = grid.refine(covered, lev - 1)
        child = np.abs(_sub(medians[lev + 1], Q, lev + 1) - mQ)
        n = 1 << (lev - Q.level)
        if grid.dim == 1:
            key = child.reshape(n, 2).max(axis=1)
        else:
            key = child.reshape(n, 2, n, 2).max(axis=(1, 3))
        above = key > t
        sel = above & ~covered
        if sel.any():
            selected.extend(_cubes_from_mask(grid, Q, lev, sel))
        covered = covered | above
    alphas = {P: float(medians[P.level][P.index]) - mQ for P in selected}
    return mQ, t, selected, alphas


def lerner_decompose(f: GridFunction, Q0: DyadicCube, lam: float) -> LernerDecomposition:
    """Iterate the local median decomposition starting from ``Q0``.

    Requires ``0 < lam <= 2^(-n-2)``.  Level 0 of the resulting family is
    ``{Q0}``; level k+1 collects the cubes selected inside the level-k cubes.
    The iteration ends when a level is empty; finest cells are never split
    further, and on them ``f`` equals its median.
    """
    g = f.grid
    if not 0 < lam <= 2.0 ** (-g.dim - 2):
        raise ValueError(f"lambda must lie in (0, 2^(-n-2)] = (0, {2.0 ** (-g.dim - 2)}]")
    vals = f.values
    medians = [level_medians(g, vals, lev).reshape((1 << lev,) * g.dim) for lev in range(g.L + 1)]
    m0 = float(medians[Q0.level][Q0.index])
    levels = [[Q0]]
    alphas, thresholds, generators = {}, {}, {}
    gvals = np.zeros(g.shape)
    measures = [Q0.volume]
    current = [Q0]
    while current:
        nxt = []
        for Q in current:
            mQ, t, sel, al = _step(vals, medians, Q, lam, g)
            thresholds[Q] = t
            inner = g.empty_mask()
            for P in sel:
                inner[P.slices] = True
                generators[P] = Q
            outside = Q.mask() & ~inner
            gvals[outside] = vals[outside] - mQ
            alphas.update(al)
            nxt.extend(sel)
        if not nxt:
            break
        nxt.sort(key=lambda P: (P.level, P.index))
        levels.append(nxt)
        measures.append(sum(P.volume for P in nxt))
        current = nxt
    dec = LernerDecomposition(
        base=Q0, m0=m0, lam=lam,
        family=SparseFamily(g, levels, eta=2.0 ** (g.dim + 2) * lam),
        alphas=alphas, thresholds=thresholds,
        g=GridFunction(g, gvals), level_measures=measures,
        residual_max=0.0, generators=generators,
    )
    resid = (vals - m0 - dec.reconstruction())[Q0.slices]
    dec.residual_max = float(np.max(np.abs(resid)))
    return dec


def sparse_oscillation_sum(f: GridFunction, family: SparseFamily, lam: float) -> GridFunction:
    """``sum_{k,j} omega_lam(f; Q^k_j) chi_{Q^k_j}``."""
    g = f.grid
    out = np.zeros(g.shape)
    cache = {}
    for _, Q in family.cubes():
        if Q.level not in cache:
            cache[Q.level] = level_oscillations(g, f.values, Q.level, lam)
        out[Q.slices] += cache[Q.level][Q.flat]
    return GridFunction(g, out)


@dataclass(frozen=True)
class LernerCertificate:
    """Pointwise slack of ``|f - m0| <= 4 M#_{lam;Q0} f + 2 sum omega chi`` and
    the level-measure checks ``sum_j |Q^k_j| <= (2^(n+2) lam)^k |Q0|``."""

    min_slack: float
    level_ratios: list
    level_ok: bool
    g_slack: float
    alpha_slack: float

    @property
    def ok(self) -> bool:
        return self.min_slack >= -1e-12 and self.level_ok


def lerner_certificate(f: GridFunction, dec: LernerDecomposition) -> LernerCertificate:
    g = f.grid
    Q0, lam = dec.base, dec.lam
    sl = Q0.slices
    sharp = local_sharp(f, Q0, lam).values
    osc = sparse_oscillation_sum(f, dec.family, lam).values
    lhs = np.abs(f.values - dec.m0)
    slack = (4.0 * sharp + 2.0 * osc - lhs)[sl]
    c = 2.0 ** (g.dim + 2) * lam
    ratios = [m / (c ** k * Q0.volume) for k, m in enumerate(dec.level_measures)]
    # g-term: |g| <= 2 M#_{lam;Q0} f, alpha-term: |alpha_Q| <= 2 omega(f; generator)
    gsl = float(np.min((2.0 * sharp - np.abs(dec.g.values))[sl]))
    asl = math.inf
    osc_cache = {}
    for P, a in dec.alphas.items():
        G = dec.generators[P]
        if G.level not in osc_cache:
            osc_cache[G.level] = level_oscillations(g, f.values, G.level, lam)
        asl = min(asl, 2.0 * float(osc_cache[G.level][G.flat]) - abs(a))
    return LernerCertificate(
        min_slack=float(np.min(slack)),
        level_ratios=ratios,
        level_ok=all(r <= 1.0 + 1e-12 for r in ratios),
        g_slack=gsl,
        alpha_slack=asl if asl != math.inf else 0.0,
    )


# -- weighted certificates -----------------------------------------------------------------

@dataclass(frozen=True)
class CwReport:
    worst_ratio: float
    C_w: float
    rh_epsilon: float
    measured_sparsity: float
    applicable: bool
    failure: bool

    @property
    def ok(self) -> bool:
        return not self.failure and (not self.applicable or self.worst_ratio <= self.C_w * (1 + 1e-12))


def cw_certificate(w: Weight, family: SparseFamily, params: WSparseParams) -> CwReport:
    """``max_{k,j} w(Q^k_j) / w(Q^k_j minus Omega_{k+1})`` compared with ``C_w``.

    The comparison is binding only when the family is ``lambda'``-sparse and
    the reverse Holder exponent of ``w`` is at least ``params.epsilon``.
    """
    worst = 1.0
    failure = False
    sparsity = 0.0
    for k, lev in enumerate(family.levels):
        nxt = family.omega(k + 1)
        for Q in lev:
            inner = nxt[Q.slices]
            sparsity = max(sparsity, np.count_nonzero(inner) / inner.size)
            total = float(w.cell_masses[Q.slices].sum())
            rest = float(w.cell_masses[Q.slices][~inner].sum())
            if rest <= 0:
                failure = True
                worst = math.inf
                continue
            worst = max(worst, total / rest)
    eps = reverse_holder_epsilon(w)
    applicable = eps >= params.epsilon and (
        sparsity == 0 or math.log2(sparsity) <= params.log2_lambda_prime + 1e-12
    )
    return CwReport(worst, params.C_w, eps, sparsity, applicable, failure)


@dataclass(frozen=True)
class AncestorGrowth:
    L_w: Optional[int]
    alpha_w: float
    worst_slack: float
    epsilon: float
    degenerate: bool


def ancestor_growth_certificate(w: Weight) -> AncestorGrowth:
    """``L_w`` = smallest integer above ``(1 + 1/eps)/n``,
    ``alpha_w = 2^(n L_w eps/(1+eps) - 1)``; checks
    ``w(Q^(L_w)) >= alpha_w w(Q)`` for every cube with an ``L_w``-th ancestor.

    ``worst_slack`` is ``min w(Q^(L_w))/w(Q) - alpha_w``.
    """
    g = w.grid
    n = g.dim
    eps = reverse_holder_epsilon(w)
    if eps <= 0:
        return AncestorGrowth(None, 1.0, 0.0, eps, True)
    Lw = math.floor((1.0 + 1.0 / eps) / n) + 1
    alpha_w = 2.0 ** (n * Lw * eps / (1.0 + eps) - 1.0)
    worst = math.inf
    mp = w.mass_pyramid
    for lev in range(Lw, g.L + 1):
        anc = mp[lev - Lw]
        r = 1 << Lw
        lifted = np.repeat(anc, r) if n == 1 else np.repeat(np.repeat(anc, r, 0), r, 1)
        worst = min(worst, float(np.min(lifted / mp[lev])) - alpha_w)
    degenerate = worst == math.inf or alpha_w <= 1.0
    return AncestorGrowth(Lw, alpha_w, 0.0 if worst == math.inf else worst, eps, degenerate)
