"""Named, reproducible numerical experiments.

Each experiment is a deterministic function of an :class:`ExperimentConfig`
and returns an :class:`ExperimentResult`: a list of ``(alpha, L, metric,
value)`` rows plus a summary dictionary.  :func:`run_experiment` writes the
rows as CSV, a JSON manifest and, optionally, an SVG plot.

Refinement sweeps compare an empirical operator norm ``N(alpha, L)`` (the
largest ratio over a fixed test corpus) across grid depths.  A sequence of
growth factors ``N(L_{i+1})/N(L_i)`` is classified as bounded when every
factor is below 1.1, growing when every factor exceeds 1.5, and inconclusive
otherwise.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy

from .content import candidate_b_maximal, candidate_b_power
from .grid import (DyadicCube, DyadicGrid, GridFunction, Weight, WeightDomainError,
                   read_cell_csv, weight_from_power)
from .maximal import fs_sharp, global_sharp, hl_maximal, powered_maximal
from .morrey import MorreyParams, local_average_term, morrey_norm, phi_pyramid, weak_morrey_norm
from .rearrange import level_medians
from .singular import bmo_norm, hilbert, riesz
from .weights import power_weight_classifier, weighted_integral_check

log = logging.getLogger(__name__)

BOUNDED_BELOW = 1.1
GROWING_ABOVE = 1.5
FAMILIES = ("indicators", "power_cusps", "random_signs", "bmo_logs", "spikes")
SIGN_LEVEL = 4


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


# -- configuration -----------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    dim: int = 1
    J: int = 0
    levels: tuple = (8, 10, 12)
    alphas: tuple = (0.0,)
    weight_file: Optional[str] = None
    p: float = 4.0
    q: float = 2.0
    s: float = 1.0
    eta: float = 1.0
    lam: float = 0.125
    flavor: str = "samko"
    families: tuple = FAMILIES
    seed: int = 0
    count: int = 4
    out_dir: str = "out"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"known: {', '.join(sorted(EXPERIMENTS))}")
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2")
        lv = tuple(self.levels)
        if len(lv) < 2 or any(b <= a for a, b in zip(lv, lv[1:])):
            raise ConfigError("levels must be strictly increasing with at least two entries")
        if lv[0] < 1:
            raise ConfigError("levels must be positive")
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ConfigError(f"unknown corpus families: {sorted(unknown)}")
        if not 0 < self.q <= self.p:
            raise ConfigError("need 0 < q <= p")
        if self.flavor not in ("samko", "komori-shirai"):
            raise ConfigError("flavor must be 'samko' or 'komori-shirai'")
        if self.count < 1:
            raise ConfigError("count must be positive")

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("out_dir")
        return d

    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.replace(",", " ").split())


def parse_config(text: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Parse the INI-style experiment configuration (see docs/config.md)."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    if not cp.has_option("experiment", "id"):
        raise ConfigError("missing [experiment] id")
    kw = {"experiment": cp.get("experiment", "id").strip()}
    try:
        if cp.has_section("grid"):
            g = cp["grid"]
            if "dim" in g:
                kw["dim"] = int(g["dim"])
            if "J" in g:
                kw["J"] = int(g["J"])
            if "levels" in g:
                kw["levels"] = _ints(g["levels"])
        if cp.has_section("weight"):
            w = cp["weight"]
            if "alpha" in w:
                kw["alphas"] = _floats(w["alpha"])
            if w.get("file", "").strip():
                path = Path(w["file"].strip())
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                kw["weight_file"] = str(path)
        if cp.has_section("exponents"):
            e = cp["exponents"]
            for key, name in (("p", "p"), ("q", "q"), ("s", "s"), ("eta", "eta"), ("lambda", "lam")):
                if key in e:
                    kw[name] = float(e[key])
            if "flavor" in e:
                kw["flavor"] = e["flavor"].strip()
        if cp.has_section("corpus"):
            c = cp["corpus"]
            if "families" in c:
                kw["families"] = tuple(t for t in c["families"].replace(",", " ").split())
            if "seed" in c:
                kw["seed"] = int(c["seed"])
            if "count" in c:
                kw["count"] = int(c["count"])
        if cp.has_section("output") and "dir" in cp["output"]:
            kw["out_dir"] = cp["output"]["dir"].strip()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value in config: {exc}") from exc
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)


# -- weights and corpus ----------------------------------------------------------------

def _file_weight(path: str, grid: DyadicGrid) -> Weight:
    dens = read_cell_csv(Path(path).read_text())
    cells = dens.size
    base_L = (cells.bit_length() - 1) // grid.dim
    if (1 << (base_L * grid.dim)) != cells:
        raise ConfigError(f"weight file has {cells} cells, not a dyadic {grid.dim}D grid")
    if base_L > grid.L:
        raise ConfigError(f"weight file is finer (L={base_L}) than the grid (L={grid.L})")
    if np.any(dens <= 0):
        raise WeightDomainError("weight densities must be positive")
    dens = dens.reshape((1 << base_L,) * grid.dim)
    r = 1 << (grid.L - base_L)
    fine = np.repeat(dens, r) if grid.dim == 1 else np.repeat(np.repeat(dens, r, 0), r, 1)
    return Weight(grid, fine)


def weight_for(cfg: ExperimentConfig, alpha, grid: DyadicGrid) -> Weight:
    """``|x|^alpha`` by exact cell averages, or the file weight refined to ``grid``."""
    if alpha == "file":
        return _file_weight(cfg.weight_file, grid)
    if alpha <= -grid.dim:
        raise WeightDomainError(f"|x|^{alpha} is not locally integrable in dimension {grid.dim}")
    if alpha == 0:
        return Weight.lebesgue(grid)
    return weight_from_power(grid, alpha)


def weight_keys(cfg: ExperimentConfig) -> list:
    return ["file"] if cfg.weight_file else list(cfg.alphas)


def _radius(grid: DyadicGrid) -> np.ndarray:
    axes = np.meshgrid(*grid.cell_centers(), indexing="ij")
    r = np.sqrt(sum(a * a for a in axes))
    return np.maximum(r, grid.cell_side / 2)


def _origin_cubes(grid: DyadicGrid, level: int) -> list:
    """Level cubes having the origin as a corner (two in 1D, four in 2D)."""
    n = 1 << level
    if level == 0:
        return [grid.root]
    if grid.dim == 1:
        return [grid.cube(level, n // 2), grid.cube(level, n // 2 - 1)]
    return [grid.cube(level, n // 2 - a, n // 2 - b) for a in (0, 1) for b in (0, 1)]


@dataclass(frozen=True)
class TestCorpus:
    """Deterministic family of test functions, regenerated on any grid."""

    family: str
    seed: int = 0
    count: int = 4
    p: float = 4.0

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown corpus family {self.family!r}")

    def generate(self, grid: DyadicGrid) -> list:
        """List of ``(name, GridFunction)`` pairs."""
        gen = getattr(self, "_" + self.family)
        return [(f"{self.family}:{name}", GridFunction(grid, v)) for name, v in gen(grid)]

    def _rng(self):
        return np.random.default_rng([self.seed, FAMILIES.index(self.family)])

    def _indicators(self, grid):
        out = []
        for lev in range(1, grid.L + 1):
            for k, Q in enumerate(_origin_cubes(grid, lev)[:2]):
                out.append((f"origin{lev}_{k}", Q.mask().astype(float)))
        rng = self._rng()
        top = min(SIGN_LEVEL, grid.L)
        for i in range(self.count):
            lev = int(rng.integers(1, top + 1))
            idx = tuple(int(v) for v in rng.integers(0, 1 << lev, size=grid.dim))
            out.append((f"cube{i}", grid.cube(lev, *idx).mask().astype(float)))
        return out

    def _power_cusps(self, grid):
        n = grid.dim
        out = [("cusp", weight_from_power(grid, -n / self.p).density)]
        out.append(("half_cusp", weight_from_power(grid, -0.5 * n / self.p).density))
        return out

    def _random_signs(self, grid):
        rng = self._rng()
        top = min(SIGN_LEVEL, grid.L)
        out = []
        for i in range(self.count):
            signs = rng.choice([-1.0, 1.0], size=(1 << top,) * grid.dim)
            out.append((f"signs{i}", grid.expand(signs, top)))
        return out

    def _bmo_logs(self, grid):
        out = [("log", np.log(_radius(grid)))]
        axes = np.meshgrid(*grid.cell_centers(), indexing="ij")
        out.append(("sign", np.where(axes[0] >= 0, 1.0, -1.0)))
        return out

    def _spikes(self, grid):
        n = grid.dim
        h = grid.cell_side
        out = []
        for k, Q in enumerate(_origin_cubes(grid, grid.L)[:2]):
            out.append((f"origin{k}", Q.mask() * h ** (-n / self.p)))
        rng = self._rng()
        top = min(SIGN_LEVEL, grid.L)
        for i in range(self.count):
            idx = tuple(int(v) for v in rng.integers(0, 1 << top, size=n))
            cell = tuple(j << (grid.L - top) for j in idx)
            out.append((f"spike{i}", grid.cube(grid.L, *cell).mask() * h ** (-n / self.p)))
        return out


def corpus_for(cfg: ExperimentConfig, grid: DyadicGrid, families=None) -> list:
    fams = cfg.families if families is None else [f for f in cfg.families if f in families]
    out = []
    for fam in fams:
        out.extend(TestCorpus(fam, cfg.seed, cfg.count, cfg.p).generate(grid))
    return out


# -- results, classification, threading ----------------------------------------------

@dataclass
class ExperimentResult:
    experiment: str
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, alpha, L, metric, value):
        self.rows.append((alpha, L, metric, value))

    def values(self, metric: str, alpha=None) -> list:
        return [r[3] for r in self.rows if r[2] == metric and (alpha is None or r[0] == alpha)]


def classify_growth(factors) -> str:
    """'bounded' (all < 1.1), 'growing' (all > 1.5) or 'inconclusive'."""
    factors = list(factors)
    if factors and all(f < BOUNDED_BELOW for f in factors):
        return "bounded"
    if factors and all(f > GROWING_ABOVE for f in factors):
        return "growing"
    return "inconclusive"


def thread_cap() -> int:
    """Worker count: ``MORREYLAB_THREADS`` if set, else the CPU count."""
    env = os.environ.get("MORREYLAB_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring malformed MORREYLAB_THREADS=%r", env)
    return max(1, os.cpu_count() or 1)


def _pmap(fn: Callable, items: list) -> list:
    """Order-preserving parallel map (results gathered in input order)."""
    workers = min(thread_cap(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _grid(cfg: ExperimentConfig, L: int) -> DyadicGrid:
    return DyadicGrid(cfg.dim, cfg.J, L)


# -- refinement sweeps -------------------------------------------------------------------

def _ratio_max(fs, op, params) -> float:
    best = 0.0
    for name, f in fs:
        nf = morrey_norm(f, params)
        if nf <= 0:
            log.info("skipping %s: zero norm", name)
            continue
        best = max(best, morrey_norm(op(f), params) / nf)
    return best


def _operator(name: str, dim: int) -> Callable:
    if name == "M":
        return hl_maximal
    if name == "H":
        if dim != 1:
            raise ConfigError("the Hilbert transform needs dim = 1")
        return hilbert
    if name == "R1":
        if dim != 2:
            raise ConfigError("Riesz transforms need dim = 2")
        return lambda f: riesz(f, 1)
    raise ConfigError(f"unknown operator {name!r}")


def _sweep(cfg: ExperimentConfig, ops: list, title: str) -> ExperimentResult:
    res = ExperimentResult(title)
    keys = weight_keys(cfg)
    tasks = [(a, L) for a in keys for L in cfg.levels]

    def one(task):
        a, L = task
        g = _grid(cfg, L)
        params = MorreyParams.samko(cfg.p, cfg.q, weight_for(cfg, a, g))
        fs = corpus_for(cfg, g)
        return {op: _ratio_max(fs, _operator(op, cfg.dim), params) for op in ops}

    out = dict(zip(tasks, _pmap(one, tasks)))
    classes = {}
    for a in keys:
        for op in ops:
            seq = [out[(a, L)][op] for L in cfg.levels]
            for L, v in zip(cfg.levels, seq):
                res.add(a, L, f"N_{op}", v)
            factors = [b / a_ if a_ > 0 else float("inf") for a_, b in zip(seq, seq[1:])]
            for L, fac in zip(cfg.levels[1:], factors):
                res.add(a, L, f"growth_{op}", fac)
            cls = classify_growth(factors)
            res.add(a, cfg.levels[-1], f"class_{op}", cls)
            entry = {"growth": factors, "class": cls}
            if a != "file" and cfg.q > 1:
                pc = power_weight_classifier(a, cfg.p, cfg.q, cfg.dim)
                bounded = pc.HLM if op == "M" else pc.SIO_bounded
                entry["expected"] = "bounded" if bounded else "growing"
                entry["boundary"] = _is_boundary(a, cfg, op)
                entry["agrees"] = cls == entry["expected"]
            classes[f"{a}:{op}"] = entry
    res.summary["classification"] = classes
    return res


def _is_boundary(alpha: float, cfg: ExperimentConfig, op: str) -> bool:
    """Endpoints of the M range (the H range is checked at both endpoints)."""
    n = cfg.dim
    ends = (-cfg.q * n / cfg.p, n * (cfg.q - cfg.q / cfg.p))
    return op == "M" and any(abs(alpha - e) < 1e-12 for e in ends)


def maximal_boundedness_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """``N(alpha, L) = max_f ||Mf|| / ||f||`` on the Samko space with ``w = |x|^alpha``."""
    if not 1 < cfg.q <= cfg.p:
        raise ConfigError("need 1 < q <= p")
    return _sweep(cfg, ["M"], "maximal_boundedness_sweep")


def sio_boundedness_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """Same table for M and for the singular integral (H in 1D, R1 in 2D)."""
    if not 1 < cfg.q <= cfg.p:
        raise ConfigError("need 1 < q <= p")
    return _sweep(cfg, ["M", "H" if cfg.dim == 1 else "R1"], "sio_boundedness_sweep")


# -- sharp maximal equivalence ----------------------------------------------------------

def sharp_constant(eta: float, lam: float) -> float:
    """``2^(1 + 1/eta) lam^(-1/eta)``."""
    return 2.0 ** (1.0 + 1.0 / eta) * lam ** (-1.0 / eta)


def sharp_maximal_equivalence(cfg: ExperimentConfig) -> ExperimentResult:
    """Two-sided comparison of ``||f||`` with ``||f^#_lam|| + second term``.

    The second term is ``local_average_term`` (Samko flavor) or the
    ``M^p_s(w, w)`` norm (Komori-Shirai flavor).  Also replays the upper
    direction ``||f^#_lam|| <= C(eta, lam) ||M^(eta) f||``, which follows from
    the pointwise domination.
    """
    if not 0 < cfg.s <= cfg.q <= cfg.p:
        raise ConfigError("need 0 < s <= q <= p")
    res = ExperimentResult("sharp_maximal_equivalence")
    keys = weight_keys(cfg)
    tasks = [(a, L) for a in keys for L in cfg.levels]
    C = sharp_constant(cfg.eta, cfg.lam)

    def one(task):
        a, L = task
        g = _grid(cfg, L)
        w = weight_for(cfg, a, g)
        if cfg.flavor == "samko":
            params = MorreyParams.samko(cfg.p, cfg.q, w)
            second = lambda f: local_average_term(f, cfg.p, cfg.q, cfg.s, w)
        else:
            params = MorreyParams.komori_shirai(cfg.p, cfg.q, w)
            sparams = MorreyParams.komori_shirai(cfg.p, cfg.s, w)
            second = lambda f: morrey_norm(f, sparams)
        ratios, upper = [], []
        for name, f in corpus_for(cfg, g):
            lhs = morrey_norm(f, params)
            sharp = morrey_norm(global_sharp(f, cfg.lam), params)
            rhs = sharp + second(f)
            if lhs <= 0 or rhs <= 0:
                log.info("skipping %s: zero norm", name)
                continue
            ratios.append(lhs / rhs)
            pm = morrey_norm(powered_maximal(f, cfg.eta), params)
            upper.append(sharp / (C * pm))
        return min(ratios), max(ratios), max(upper)

    for (a, L), (lo, hi, up) in zip(tasks, _pmap(one, tasks)):
        res.add(a, L, "ratio_min", lo)
        res.add(a, L, "ratio_max", hi)
        res.add(a, L, "upper_certificate", up)
    res.summary["upper_certificate_ok"] = all(v <= 1 + 1e-12 for v in res.values("upper_certificate"))
    return res


# -- counterexample -----------------------------------------------------------------------

def sharp_failure_demo(cfg: ExperimentConfig) -> ExperimentResult:
    """``w0 = |x|^(-qn/p)`` and ``f0 = 1``: ``M f0 = 1``, ``f0^# = 0``, finite
    positive norm of ``M f0``, and a weighted-integral constant growing with L."""
    if not cfg.p > cfg.q:
        raise ConfigError("need p > q")
    res = ExperimentResult("sharp_failure_demo")
    a0 = -cfg.q * cfg.dim / cfg.p

    def one(L):
        g = _grid(cfg, L)
        w0 = weight_from_power(g, a0)
        f0 = GridFunction.constant(g, 1.0)
        mf = hl_maximal(f0)
        return (
            bool(np.all(mf.values == 1.0)),
            bool(np.all(fs_sharp(f0).values == 0.0)),
            bool(np.all(global_sharp(f0, cfg.lam).values == 0.0)),
            morrey_norm(mf, MorreyParams.samko(cfg.p, cfg.q, w0)),
            weighted_integral_check(w0, cfg.p, cfg.q),
        )

    out = _pmap(one, list(cfg.levels))
    wic = []
    for L, (m_ok, fs_ok, gs_ok, nm, wc) in zip(cfg.levels, out):
        res.add(a0, L, "Mf0_is_one", int(m_ok))
        res.add(a0, L, "fs_sharp_is_zero", int(fs_ok))
        res.add(a0, L, "global_sharp_is_zero", int(gs_ok))
        res.add(a0, L, "norm_Mf0", nm)
        res.add(a0, L, "wic_const", wc)
        wic.append(wc)
    growth = [b / a for a, b in zip(wic, wic[1:])]
    for L, gr in zip(cfg.levels[1:], growth):
        res.add(a0, L, "wic_growth", gr)
    res.summary.update(
        exact=all(o[0] and o[1] and o[2] for o in out),
        norm_finite_positive=all(0 < o[3] < np.inf for o in out),
        wic_growth=growth,
    )
    return res


# -- weak type with B_alpha candidates ------------------------------------------------------

def candidate_weak_condition_constant(w: Weight, p: float, q: float, b: np.ndarray, Q0: DyadicCube) -> float:
    """``max_{Q in D(Q0)} |Q|^-1 Phi(Q)^q (avg_Q (b w)^(-1/(q-1)))^(q-1) / (|Q0|/|Q|)^(1-q/p)``."""
    g = w.grid
    sig = g.pyramid((b * w.density) ** (-1.0 / (q - 1.0)) * g.cell_volume)
    ph = phi_pyramid(p, q, w)
    best = 0.0
    for lev in range(Q0.level, g.L + 1):
        k = lev - Q0.level
        sl = tuple(slice(i << k, (i + 1) << k) for i in Q0.index)
        vol = g.volume_at(lev)
        val = ph[lev][sl] ** q / vol * (sig[lev][sl] / vol) ** (q - 1.0)
        val = val / (Q0.volume / vol) ** (1.0 - q / p)
        best = max(best, float(np.max(val)))
    return best


def _weak_cubes(g: DyadicGrid) -> dict:
    """One cube with 0 outside 3Q0 and one with 0 inside 3Q0 (1D)."""
    lev = min(3, g.L - 1)
    n = 1 << lev
    far = g.cube(lev, n // 2 + 2)
    near = g.cube(1, 1)
    return {"far": far, "near": near}


def weak_type_with_candidates(cfg: ExperimentConfig) -> ExperimentResult:
    """Empirical constants of the candidate condition and weak/strong ratios of M."""
    if cfg.dim != 1:
        raise ConfigError("weak_type_with_candidates is 1D only")
    if not 1 < cfg.q <= cfg.p:
        raise ConfigError("need 1 < q <= p")
    n = 1
    for a in weight_keys(cfg):
        if a == "file" or not -cfg.q * n / cfg.p <= a < n * (cfg.q - cfg.q / cfg.p):
            raise WeightDomainError(
                f"alpha={a} outside [-qn/p, n(q - q/p)) = "
                f"[{-cfg.q * n / cfg.p}, {n * (cfg.q - cfg.q / cfg.p)})")
    res = ExperimentResult("weak_type_with_candidates")
    cdim = n * (1 - cfg.q / cfg.p)
    tasks = [(a, L) for a in cfg.alphas for L in cfg.levels]

    def one(task):
        a, L = task
        g = _grid(cfg, L)
        w = weight_for(cfg, a, g)
        cubes = _weak_cubes(g)
        far = candidate_b_maximal(cubes["far"], cdim, 0.5 * cfg.q / cfg.p)
        near = candidate_b_power(cubes["near"], cfg.p, cfg.q, a)
        c_far = candidate_weak_condition_constant(w, cfg.p, cfg.q, far.b.values, cubes["far"])
        c_near = candidate_weak_condition_constant(w, cfg.p, cfg.q, near.b.values, cubes["near"])
        params = MorreyParams.samko(cfg.p, cfg.q, w)
        weak_ratio, cheb = 0.0, 0.0
        for name, f in corpus_for(cfg, g):
            nf = morrey_norm(f, params)
            if nf <= 0:
                continue
            mf = hl_maximal(f)
            wk = weak_morrey_norm(mf, cfg.p, cfg.q, w)
            weak_ratio = max(weak_ratio, wk / nf)
            cheb = max(cheb, wk / morrey_norm(mf, params))
        return c_far, c_near, weak_ratio, cheb

    for (a, L), (cf, cn, wr, ch) in zip(tasks, _pmap(one, tasks)):
        res.add(a, L, "cond_far", cf)
        res.add(a, L, "cond_near", cn)
        res.add(a, L, "weak_ratio", wr)
        res.add(a, L, "weak_over_strong", ch)
    res.summary["chebyshev_ok"] = all(v <= 1 + 1e-12 for v in res.values("weak_over_strong"))
    return res


# -- BMO ---------------------------------------------------------------------------------

def morrey_bmo_norm(b: GridFunction, p: float, q: float, w: Weight) -> float:
    """``max_Q ||(b - b_Q) chi_Q||_{M^p_q(dx, w)} / Phi(Q)`` over dyadic Q.

    For R not inside Q the cube term of ``(b - b_Q) chi_Q`` is at most the one
    at Q, so the inner norm is a max over the subcubes of Q.
    """
    g = b.grid
    ph = phi_pyramid(p, q, w)
    best = 0.0
    for lev in range(g.L + 1):
        rows = g.blocks(b.values, lev)
        dev = np.abs(rows - rows.mean(axis=1, keepdims=True))
        integrand = g.unblock(dev, lev) ** q * w.cell_masses
        sums = g.pyramid(integrand)
        per = [g.volume_at(k) ** (1.0 / p - 1.0 / q) * sums[k] ** (1.0 / q) for k in range(g.L + 1)]
        sub = per[g.L]
        for k in range(g.L - 1, lev - 1, -1):
            sub = np.maximum(per[k], g.coarsen_max(sub, k))
        best = max(best, float(np.max(sub / ph[lev])))
    return best


def bmo_equivalence(cfg: ExperimentConfig) -> ExperimentResult:
    """Ratio of the Morrey-BMO norm to the dyadic BMO norm on the bmo_logs family."""
    res = ExperimentResult("bmo_equivalence")
    keys = weight_keys(cfg)
    tasks = [(a, L) for a in keys for L in cfg.levels]

    def one(task):
        a, L = task
        g = _grid(cfg, L)
        w = weight_for(cfg, a, g)
        out = []
        for name, b in TestCorpus("bmo_logs", cfg.seed, cfg.count, cfg.p).generate(g):
            base = bmo_norm(b)
            if base == 0:
                continue
            out.append((name, morrey_bmo_norm(b, cfg.p, cfg.q, w) / base))
        return out

    bands = {}
    for (a, L), out in zip(tasks, _pmap(one, tasks)):
        for name, r in out:
            res.add(a, L, f"ratio[{name}]", r)
            bands.setdefault(f"{a}:{name}", []).append(r)
    res.summary["band"] = {k: max(v) / min(v) for k, v in bands.items()}
    return res


# -- median decay -------------------------------------------------------------------------

def median_decay_check(cfg: ExperimentConfig) -> ExperimentResult:
    """``|m_f(P)| <= 4 min_P Mf`` on every cube, and the profile along the
    ancestors of the cell just right of the origin against ``4 ||Mf|| / Phi``."""
    res = ExperimentResult("median_decay_check")
    keys = weight_keys(cfg)
    tasks = [(a, L) for a in keys for L in cfg.levels]

    def one(task):
        a, L = task
        g = _grid(cfg, L)
        w = weight_for(cfg, a, g)
        params = MorreyParams.samko(cfg.p, cfg.q, w)
        ph = phi_pyramid(cfg.p, cfg.q, w)
        base = _origin_cubes(g, g.L)[0]
        worst, worst_profile = 0.0, 0.0
        for name, f in corpus_for(cfg, g):
            mf = hl_maximal(f)
            nmf = morrey_norm(mf, params)
            for lev in range(g.L + 1):
                med = np.abs(level_medians(g, f.values, lev))
                mins = g.blocks(mf.values, lev).min(axis=1)
                with np.errstate(divide="ignore", invalid="ignore"):
                    r = np.where(med > 0, med / (4.0 * mins), 0.0)
                worst = max(worst, float(np.max(r)))
                P = base.ancestor(g.L - lev)
                bound = 4.0 * nmf / float(ph[lev][P.index])
                m = float(med[P.flat])
                if m > 0:
                    worst_profile = max(worst_profile, m / bound)
        return worst, worst_profile

    for (a, L), (wr, wp) in zip(tasks, _pmap(one, tasks)):
        res.add(a, L, "median_over_4minM", wr)
        res.add(a, L, "median_over_profile_bound", wp)
    res.summary["bound_ok"] = all(v <= 1 + 1e-12 for v in res.values("median_over_4minM"))
    return res


def median_profile(f: GridFunction, base: DyadicCube) -> list:
    """``|m_f(P)|`` along the ancestors P of ``base``, from base up to the root."""
    g = f.grid
    out = []
    for lev in range(base.level, -1, -1):
        P = base.ancestor(base.level - lev)
        out.append(float(abs(level_medians(g, f.values, lev)[P.flat])))
    return out


EXPERIMENTS = {
    "maximal_boundedness_sweep": maximal_boundedness_sweep,
    "sio_boundedness_sweep": sio_boundedness_sweep,
    "sharp_maximal_equivalence": sharp_maximal_equivalence,
    "sharp_failure_demo": sharp_failure_demo,
    "weak_type_with_candidates": weak_type_with_candidates,
    "bmo_equivalence": bmo_equivalence,
    "median_decay_check": median_decay_check,
}


# -- output ---------------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["alpha", "L", "metric", "value"])
    for a, L, m, v in rows:
        wr.writerow([_fmt(a), L, m, _fmt(v)])
    return buf.getvalue()


def versions() -> dict:
    from . import __version__
    return {
        "morreylab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def plot_svg(result: ExperimentResult, path: Path) -> Optional[Path]:
    """Line plot of ``N(alpha, L)`` against alpha, one line per (operator, L)."""
    series = {}
    for a, L, m, v in result.rows:
        if m.startswith("N_") and a != "file":
            series.setdefault((m, L), []).append((a, v))
    if not series:
        return None
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "morreylab"
    fig, ax = plt.subplots(figsize=(6, 4))
    for (m, L), pts in sorted(series.items()):
        pts.sort()
        ax.plot([x for x, _ in pts], [y for _, y in pts], marker="o", label=f"{m}, L={L}")
    ax.set_xlabel("alpha")
    ax.set_ylabel("N(alpha, L)")
    ax.set_yscale("log")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def run_experiment(cfg: ExperimentConfig, out_dir=None, plot: bool = False) -> dict:
    """Run ``cfg.experiment`` and write ``<id>.csv``, ``<id>.json`` (and ``<id>.svg``).

    Returns the manifest dictionary.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = EXPERIMENTS[cfg.experiment](cfg)
    elapsed = time.perf_counter() - t0
    csv_path = out / f"{cfg.experiment}.csv"
    csv_path.write_text(rows_to_csv(result.rows))
    files = [csv_path.name]
    if plot:
        svg = plot_svg(result, out / f"{cfg.experiment}.svg")
        if svg is not None:
            files.append(svg.name)
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.canonical(),
        "config_hash": cfg.config_hash(),
        "versions": versions(),
        "timings": {"total_seconds": elapsed},
        "threads": thread_cap(),
        "files": files,
        "summary": result.summary,
    }
    from .weights import _json_safe
    (out / f"{cfg.experiment}.json").write_text(json.dumps(_json_safe(manifest), indent=2))
    manifest["result"] = result
    return manifest


def default_sweep_config(**overrides) -> ExperimentConfig:
    """The 1D refinement sweep with p=4, q=2, L in {8, 10, 12}."""
    base = ExperimentConfig(
        experiment="sio_boundedness_sweep", dim=1, levels=(8, 10, 12),
        alphas=(-0.75, -0.5, -0.25, 0.0, 0.5, 1.4, 1.6), p=4.0, q=2.0,
    )
    return replace(base, **overrides)
