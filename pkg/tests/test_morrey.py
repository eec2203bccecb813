import numpy as np
import pytest
from hypothesis import given, strategies as st

from morreylab.grid import GridFunction, Weight, build_grid, weight_from_power
from morreylab.morrey import (MorreyParams, local_average_term, morrey_norm, phi,
                              weak_morrey_norm)
from morreylab.weights import bpq_check


def brute_norm(f, p, q, w1, w2):
    g = f.grid
    best = 0.0
    for Q in g.all_cubes():
        m = Q.mask()
        s1 = Q.volume if w1 is None else w1.cell_masses[m].sum()
        I = np.sum(np.abs(f.values[m]) ** q * w2.cell_masses[m])
        best = max(best, s1 ** (1 / p - 1 / q) * I ** (1 / q))
    return best


def brute_weak(f, p, q, w):
    g = f.grid
    best = 0.0
    a = np.abs(f.values)
    for Q in g.all_cubes():
        m = Q.mask()
        for t in np.unique(a[m]):
            # sup over s < t of s * w({|f| > s})^(1/q) is t * w({|f| >= t})^(1/q)
            best = max(best, Q.volume ** (1 / p - 1 / q) * t * w.cell_masses[m & (a >= t)].sum() ** (1 / q))
    return best


def test_phi_examples():
    g = build_grid(1, 0, 2)
    leb = Weight.lebesgue(g)
    assert phi(4, 2, leb, g.root) == 1.0
    g2 = build_grid(1, 1, 2)
    assert phi(4, 2, Weight.lebesgue(g2), g2.root) == pytest.approx(2 ** 0.25, rel=1e-15)
    g3 = build_grid(1, 2, 2)  # [0,1) is cube(2, 2)
    w1 = weight_from_power(g3, 1.0)
    assert phi(4, 2, w1, g3.cube(2, 2)) == pytest.approx(0.5 ** 0.5, rel=1e-14)


def test_params_validation():
    g = build_grid(1, 0, 2)
    with pytest.raises(ValueError):
        MorreyParams.samko(2, 4, Weight.lebesgue(g))
    with pytest.raises(ValueError):
        MorreyParams(4, 2, "other", Weight.lebesgue(g))


def test_norm_of_indicator_lebesgue():
    g = build_grid(2, 0, 4)
    Q0 = g.cube(2, 1, 3)
    f = GridFunction.indicator(Q0)
    val, Q = morrey_norm(f, MorreyParams.lebesgue(4, 2, g), return_cube=True)
    assert val == pytest.approx(Q0.volume ** 0.25, rel=1e-14)
    assert Q == Q0


def test_norm_of_one():
    g = build_grid(1, 1, 5)
    f = GridFunction.constant(g, 1.0)
    assert morrey_norm(f, MorreyParams.lebesgue(3, 1.5, g)) == pytest.approx(2 ** (1 / 3), rel=1e-14)


@pytest.mark.parametrize("alpha", [-0.5, 0.3, 1.2])
def test_indicator_norm_between_phi_and_bpq(alpha):
    g = build_grid(1, 0, 7)
    w = weight_from_power(g, alpha)
    C = bpq_check(w, 4, 2)
    params = MorreyParams.samko(4, 2, w)
    for Q0 in [g.cube(3, 4), g.cube(2, 0), g.cube(5, 17)]:
        val = morrey_norm(GridFunction.indicator(Q0), params)
        ph = phi(4, 2, w, Q0)
        assert ph * (1 - 1e-12) <= val <= C * ph * (1 + 1e-12)


@given(st.integers(1, 2), st.integers(0, 2**31), st.sampled_from(["samko", "ks", "general"]),
       st.sampled_from([(4.0, 2.0), (3.0, 3.0), (2.0, 0.5)]))
def test_norm_matches_brute_force(dim, seed, flavor, pq):
    rng = np.random.default_rng(seed)
    g = build_grid(dim, 0, 3 if dim == 1 else 2)
    f = GridFunction(g, rng.normal(size=g.shape))
    w2 = Weight(g, rng.uniform(0.1, 3, g.shape))
    w1 = Weight(g, rng.uniform(0.1, 3, g.shape))
    p, q = pq
    if flavor == "samko":
        params, ref = MorreyParams.samko(p, q, w2), brute_norm(f, p, q, None, w2)
    elif flavor == "ks":
        params, ref = MorreyParams.komori_shirai(p, q, w2), brute_norm(f, p, q, w2, w2)
    else:
        params, ref = MorreyParams.general(p, q, w1, w2), brute_norm(f, p, q, w1, w2)
    assert morrey_norm(f, params) == pytest.approx(ref, rel=1e-12)


def test_ks_indicator_formula(rng):
    g = build_grid(1, 0, 5)
    w = Weight(g, rng.uniform(0.2, 5, g.shape))
    Q0 = g.cube(2, 1)
    p, q = 4.0, 2.0
    ref = max(w.mass(Q) ** (1 / p - 1 / q) * w.mass_of(Q.mask() & Q0.mask()) ** (1 / q)
              for Q in g.all_cubes())
    got = morrey_norm(GridFunction.indicator(Q0), MorreyParams.komori_shirai(p, q, w))
    assert got == pytest.approx(ref, rel=1e-12)


def test_weak_norm_examples():
    g = build_grid(1, 0, 5)
    leb = Weight.lebesgue(g)
    Q0 = g.cube(3, 2)
    assert weak_morrey_norm(GridFunction.indicator(Q0), 4, 2, leb) == pytest.approx(Q0.volume ** 0.25)
    assert weak_morrey_norm(GridFunction.constant(g, 0.0), 4, 2, leb) == 0.0


@given(st.integers(0, 2**31), st.sampled_from([(4.0, 2.0), (2.0, 1.0), (5.0, 5.0)]))
def test_weak_matches_brute_and_chebyshev(seed, pq):
    rng = np.random.default_rng(seed)
    g = build_grid(1, 0, 4)
    f = GridFunction(g, rng.integers(-3, 4, g.shape))
    w = Weight(g, rng.uniform(0.1, 2, g.shape))
    p, q = pq
    weak = weak_morrey_norm(f, p, q, w)
    assert weak == pytest.approx(brute_weak(f, p, q, w), rel=1e-12, abs=1e-300)
    assert weak <= morrey_norm(f, MorreyParams.samko(p, q, w)) * (1 + 1e-12)


def test_local_average_examples(rng):
    g = build_grid(1, 0, 6)
    w = weight_from_power(g, -0.3)
    from morreylab.morrey import phi_pyramid
    maxphi = max(float(a.max()) for a in phi_pyramid(4, 2, w))
    one = GridFunction.constant(g, 1.0)
    assert local_average_term(one, 4, 2, 1, w) == pytest.approx(maxphi, rel=1e-12)
    f = GridFunction(g, rng.normal(size=g.shape))
    assert local_average_term(f, 4, 2, 2, w) == pytest.approx(
        morrey_norm(f, MorreyParams.samko(4, 2, w)), rel=1e-12)
    with pytest.raises(ValueError):
        local_average_term(f, 4, 2, 3, w)


@given(st.integers(0, 2**31), st.sampled_from([0.5, 1.0, 1.5, 2.0]))
def test_local_average_below_norm_and_ks_monotone(seed, s):
    rng = np.random.default_rng(seed)
    g = build_grid(1, 0, 6)
    f = GridFunction(g, rng.normal(size=g.shape) * rng.uniform(0, 3, g.shape))
    w = Weight(g, rng.uniform(0.05, 4, g.shape))
    p, q = 4.0, 2.0
    assert local_average_term(f, p, q, s, w) <= morrey_norm(f, MorreyParams.samko(p, q, w)) * (1 + 1e-12)
    assert (morrey_norm(f, MorreyParams.komori_shirai(p, s, w))
            <= morrey_norm(f, MorreyParams.komori_shirai(p, q, w)) * (1 + 1e-12))


@given(st.integers(0, 2**31), st.floats(-5, 5).filter(lambda c: c == 0 or abs(c) > 1e-6),
       st.sampled_from([0.5, 1.0, 2.0]))
def test_quasi_norm_axioms(seed, c, q):
    rng = np.random.default_rng(seed)
    g = build_grid(1, 0, 5)
    f = GridFunction(g, rng.normal(size=g.shape))
    h = GridFunction(g, rng.normal(size=g.shape))
    params = MorreyParams.samko(4.0, q, Weight(g, rng.uniform(0.1, 3, g.shape)))
    nf, nh = morrey_norm(f, params), morrey_norm(h, params)
    assert morrey_norm(c * f, params) == pytest.approx(abs(c) * nf, rel=1e-12, abs=1e-300)
    K = 2 ** (1 / q - 1) if q < 1 else 1.0
    assert morrey_norm(f + h, params) <= K * (nf + nh) * (1 + 1e-12)
