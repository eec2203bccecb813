"""Weight-class constants and condition checks on a dyadic grid.

Every constant is a maximum over the dyadic cubes of the grid.  On a finite
grid all of them are finite, so they are meant to be read as refinement
trends (see the experiments module) rather than as yes/no answers.  The one
exception is :func:`power_weight_classifier`, which states the known
analytic ranges for ``|x|**alpha``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .content import CandidateB, block_norm_upper, candidate_b_maximal
from .grid import DyadicCube, DyadicGrid, GridFunction, Weight
from .maximal import hl_maximal, topdown_max
from .morrey import phi_pyramid

AINF_LADDER = (2, 4, 8, 16, 32, 64)
RH_CEILING = 1.0
RH_TOL = 1e-4


def _volumes(grid: DyadicGrid) -> list:
    return [grid.volume_at(lev) for lev in range(grid.L + 1)]


def _lift(arr: np.ndarray, k: int, dim: int) -> np.ndarray:
    """Copy a per-cube array k levels down (each descendant inherits)."""
    r = 1 << k
    if dim == 1:
        return np.repeat(arr, r)
    return np.repeat(np.repeat(arr, r, axis=0), r, axis=1)


def _subtree_max(grid: DyadicGrid, per_level: list) -> list:
    """For every cube Q, the max of ``per_level`` over the cubes inside Q."""
    out = [None] * (grid.L + 1)
    out[grid.L] = np.asarray(per_level[grid.L])
    for lev in range(grid.L - 1, -1, -1):
        out[lev] = np.maximum(per_level[lev], grid.coarsen_max(out[lev + 1], lev))
    return out


# -- Muckenhoupt-type constants ---------------------------------------------------

def aq_constant(w: Weight, q: float) -> float:
    """``max_Q (w(Q)/|Q|) ((1/|Q|) int_Q w^(-1/(q-1)))^(q-1)``."""
    if q <= 1:
        raise ValueError("need q > 1")
    g = w.grid
    sig = g.pyramid(w.density ** (-1.0 / (q - 1.0)) * g.cell_volume)
    best = 0.0
    for vol, W, S in zip(_volumes(g), w.mass_pyramid, sig):
        best = max(best, float(np.max((W / vol) * (S / vol) ** (q - 1.0))))
    return best


def a1_constant(w: Union[Weight, GridFunction]) -> float:
    """``max_x M(w)(x) / w(x)`` with the dyadic maximal operator."""
    dens = w.density if isinstance(w, Weight) else w.values
    g = w.grid
    return float(np.max(hl_maximal(GridFunction(g, dens)).values / dens))


def ainf_ladder(w: Weight, ladder: Sequence[float] = AINF_LADDER) -> dict:
    return {q: aq_constant(w, q) for q in ladder}


def ainf_estimate(w: Weight) -> float:
    """A_infinity proxy: the A_q constant at the top of the ladder (q = 64)."""
    return aq_constant(w, AINF_LADDER[-1])


def _rh_holds(w: Weight, eps: float) -> bool:
    g = w.grid
    cv = g.cell_volume
    powered = g.pyramid(w.density ** (1.0 + eps) * cv)
    for vol, W, P in zip(_volumes(g), w.mass_pyramid, powered):
        if np.any((P / vol) ** (1.0 / (1.0 + eps)) > 2.0 * W / vol):
            return False
    return True


def reverse_holder_epsilon(w: Weight, ceiling: float = RH_CEILING, tol: float = RH_TOL) -> float:
    """Largest eps (by bisection on [0, ceiling]) with the constant-2 reverse
    Holder inequality on every dyadic cube.

    The returned value is the lower end of the final bracket, so the
    inequality is certified at the returned eps.  Returns ``ceiling`` when
    the inequality holds there.
    """
    if _rh_holds(w, ceiling):
        return ceiling
    lo, hi = 0.0, ceiling
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _rh_holds(w, mid):
            lo = mid
        else:
            hi = mid
    return lo


def doubling_constant(w: Weight) -> float:
    """``max w(2Q)/w(Q)`` over cubes whose double is grid-aligned and in range.

    Returns nan when no cube qualifies (grids with L < 3).
    """
    g = w.grid
    m = w.cell_masses
    if g.dim == 1:
        cum = np.concatenate([[0.0], np.cumsum(m)])
    else:
        cum = np.zeros((g.n_side + 1, g.n_side + 1))
        cum[1:, 1:] = m.cumsum(axis=0).cumsum(axis=1)
    best = -np.inf
    for lev in range(1, g.L):
        s = g.cells_per_side(lev)
        h = s // 2
        idx = np.arange(1 << lev)
        ok = (idx * s - h >= 0) & ((idx + 1) * s + h <= g.n_side)
        if not ok.any():
            continue
        lo, hi = idx[ok] * s - h, (idx[ok] + 1) * s + h
        W = w.mass_pyramid[lev]
        if g.dim == 1:
            big = cum[hi] - cum[lo]
            best = max(best, float(np.max(big / W[ok])))
        else:
            big = (cum[np.ix_(hi, hi)] - cum[np.ix_(lo, hi)]
                   - cum[np.ix_(hi, lo)] + cum[np.ix_(lo, lo)])
            best = max(best, float(np.max(big / W[np.ix_(ok, ok)])))
    return best if np.isfinite(best) else float("nan")


# -- Phi-based conditions ---------------------------------------------------------------

def bpq_check(w: Weight, p: float, q: float) -> float:
    """``max_{Q inside Q0} Phi(Q)/Phi(Q0)``, the best B_{p,q} constant on the grid."""
    if not 0 < q <= p:
        raise ValueError("need 0 < q <= p")
    ph = phi_pyramid(p, q, w)
    sub = _subtree_max(w.grid, ph)
    return float(max(np.max(s / f) for s, f in zip(sub, ph)))


def _ancestor_sum_constant(w: Weight, p: float, q: float, coeff: Callable[[int], float]) -> float:
    g = w.grid
    ph = phi_pyramid(p, q, w)
    best = 0.0
    for lev in range(1, g.L + 1):
        acc = np.zeros_like(ph[lev])
        for k in range(1, lev + 1):
            acc = acc + coeff(k) * _lift(1.0 / ph[lev - k], k, g.dim)
        best = max(best, float(np.max(ph[lev] * acc)))
    return best


def weighted_integral_check(w: Weight, p: float, q: float) -> float:
    """``max_Q Phi(Q) sum_{k>=1} 1/Phi(Q^(k))`` with dyadic ancestors Q^(k)."""
    if not 0 < q <= p:
        raise ValueError("need 0 < q <= p")
    return _ancestor_sum_constant(w, p, q, lambda k: 1.0)


def nakai_self_improve_check(w: Weight, p: float, q: float, delta: float = 0.0,
                             log_weighted: bool = True) -> float:
    """Ancestor sums with coefficients ``k * 2^(k delta)``.

    With ``log_weighted=True`` (default) the coefficient carries the factor k;
    ``delta=0, log_weighted=False`` gives :func:`weighted_integral_check`.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if log_weighted:
        return _ancestor_sum_constant(w, p, q, lambda k: k * 2.0 ** (k * delta))
    return _ancestor_sum_constant(w, p, q, lambda k: 2.0 ** (k * delta))


@dataclass(frozen=True)
class PhiGrowthResult:
    holds: bool
    worst_ratio: float
    degenerate: bool


def phi_growth_check(w: Weight, p: float, q: float, c: int) -> PhiGrowthResult:
    """Check ``2 Phi(Q) <= Phi(Q^(m))`` for all cubes, with ``c = 2^m``."""
    m = int(round(math.log2(c)))
    if c < 2 or (1 << m) != c:
        raise ValueError("c must be a power of two, at least 2")
    g = w.grid
    if m > g.L:
        return PhiGrowthResult(True, 0.0, True)
    ph = phi_pyramid(p, q, w)
    worst = 0.0
    for lev in range(m, g.L + 1):
        worst = max(worst, float(np.max(2.0 * ph[lev] / _lift(ph[lev - m], m, g.dim))))
    return PhiGrowthResult(worst <= 1.0, worst, False)


# -- conditions involving B_alpha candidates ----------------------------------------

def _cube_iter(grid: DyadicGrid, cubes: Optional[Iterable[DyadicCube]]):
    return list(grid.all_cubes()) if cubes is None else list(cubes)


def block_dual_condition_check(
    w: Weight,
    p: float,
    q: float,
    candidates: Union[Sequence[CandidateB], Callable[[DyadicCube], Sequence[CandidateB]], None] = None,
    cubes: Optional[Iterable[DyadicCube]] = None,
) -> float:
    """Upper estimate of ``max_Q |Q|^-1 ||w^(1/q) chi_Q||_{M^p_q} ||w^(-1/q) chi_Q||_block``.

    ``candidates`` is a fixed list, or a callable giving candidates per cube.
    By default each cube gets the maximal-function candidate built on it.
    The Morrey factor uses that for ``R`` not inside ``Q`` the cube term is
    no larger than the one at ``Q`` (the scale exponent ``1/p - 1/q`` is
    nonpositive), so it reduces to a max over subcubes.
    """
    if q <= 1:
        raise ValueError("need q > 1")
    g = w.grid
    n = g.dim
    a = n * (1 - q / p)
    if candidates is None:
        def candidates(Q):
            return [candidate_b_maximal(Q, a, 0.5 * (1 - a / n))]
    per = [vol ** (1 / p - 1 / q) * W ** (1 / q) for vol, W in zip(_volumes(g), w.mass_pyramid)]
    morrey_part = _subtree_max(g, per)
    wm = w.density ** (-1.0 / q)
    best = 0.0
    for Q in _cube_iter(g, cubes):
        cands = candidates(Q) if callable(candidates) else candidates
        gQ = GridFunction(g, np.where(Q.mask(), wm, 0.0))
        val = float(morrey_part[Q.level][Q.index]) * block_norm_upper(gQ, p, q, cands) / Q.volume
        best = max(best, val)
    return best


def _local_maximal_integrals(g: DyadicGrid, sigma_masses: np.ndarray, w_masses: np.ndarray, q: float) -> list:
    """For every cube Q: ``int_Q (M[sigma chi_Q])^q w``.

    Inside Q the maximal function of ``sigma chi_Q`` only sees subcubes of Q
    (larger cubes average over more volume and give at most sigma(Q)/|Q|).
    """
    sig = g.pyramid(sigma_masses)
    avgs = [s / vol for s, vol in zip(sig, _volumes(g))]
    out = []
    for lev in range(g.L + 1):
        run = topdown_max(g, avgs, lev)
        out.append(g.pyramid(run ** q * w_masses)[lev])
    return out


def tanaka_condition_checks(
    w: Weight,
    p: float,
    q: float,
    b: CandidateB,
    variant: str,
    a: float = 2.0,
    Q0: Optional[DyadicCube] = None,
) -> float:
    """Left side of the Tanaka-type conditions (variant 'c' or 'd') for one b,
    divided by ``side(Q0)^(n(1 - q/p))``.

    Maximized over all cubes Q0 unless one is given.
    """
    if q <= 1:
        raise ValueError("need q > 1")
    g = w.grid
    n = g.dim
    qp = q / (q - 1)
    bw = b.b.values * w.density
    if variant == "c":
        sigma = bw ** (-qp / q)
        sig_mass = g.pyramid(sigma * g.cell_volume)
        if any(np.any(s <= 0) for s in sig_mass):
            raise ValueError("sigma has zero mass on some cube")
        ints = _local_maximal_integrals(g, sigma * g.cell_volume, w.cell_masses, q)
        per = [I / s for I, s in zip(ints, sig_mass)]
    elif variant == "d":
        if a <= 1:
            raise ValueError("need a > 1")
        e = a * qp / q
        P = g.pyramid(bw ** (-e) * g.cell_volume)
        per = [(W / vol) * (Pv / vol) ** (1.0 / e)
               for vol, W, Pv in zip(_volumes(g), w.mass_pyramid, P)]
    else:
        raise ValueError("variant must be 'c' or 'd'")
    sub = _subtree_max(g, per)
    expo = n * (1 - q / p)
    if Q0 is not None:
        return float(sub[Q0.level][Q0.index]) / Q0.side ** expo
    return float(max(np.max(s) / g.side_at(lev) ** expo for lev, s in enumerate(sub)))


# -- analytic classifier and report ------------------------------------------------

@dataclass(frozen=True)
class PowerWeightClasses:
    in_Aq: bool
    HLM: bool
    WIC: bool
    SIO_bounded: bool
    locally_integrable: bool


def power_weight_classifier(alpha: float, p: float, q: float, n: int) -> PowerWeightClasses:
    """Known ranges of alpha for ``w = |x|^alpha`` on ``M^p_q(dx, w)``, 1 < q <= p."""
    if not 1 < q <= p:
        raise ValueError("need 1 < q <= p")
    low = -q * n / p
    high = n * (q - q / p)
    return PowerWeightClasses(
        in_Aq=-n < alpha < n * (q - 1),
        HLM=low <= alpha < high,
        WIC=alpha > low,
        SIO_bounded=low < alpha < high,
        locally_integrable=alpha > -n,
    )


@dataclass
class WeightReport:
    a_q_constants: dict
    a1_const: float
    a_inf_est: float
    rh_epsilon: float
    doubling_const: float
    bpq_const: float
    wic_const: float
    phi_growth_c: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def to_json(self, **kw) -> str:
        d = asdict(self)
        d["a_q_constants"] = {str(k): v for k, v in self.a_q_constants.items()}
        if not d["extra"]:
            del d["extra"]
        return json.dumps(_json_safe(d), sort_keys=False, **kw)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, (np.floating, np.integer)):
        return _json_safe(obj.item())
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def weight_report(w: Weight, p: float, q: float, ladder: Sequence[float] = AINF_LADDER,
                  growth_c: Optional[int] = None) -> WeightReport:
    """Assemble the standard diagnostics for one weight."""
    aq = ainf_ladder(w, ladder)
    growth = None
    if growth_c is not None:
        growth = phi_growth_check(w, p, q, growth_c).worst_ratio
    return WeightReport(
        a_q_constants=aq,
        a1_const=a1_constant(w),
        a_inf_est=aq[ladder[-1]] if ladder[-1] == AINF_LADDER[-1] else ainf_estimate(w),
        rh_epsilon=reverse_holder_epsilon(w),
        doubling_const=doubling_constant(w),
        bpq_const=bpq_check(w, p, q),
        wic_const=weighted_integral_check(w, p, q),
        phi_growth_c=growth,
    )
