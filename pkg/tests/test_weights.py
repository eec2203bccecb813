import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import brute_weight_constants, rh_epsilon_oracle
from morreylab.content import candidate_b_maximal
from morreylab.grid import Weight, build_grid, weight_from_power
from morreylab.weights import (RH_TOL, a1_constant, ainf_estimate, ainf_ladder, aq_constant,
                               bpq_check, block_dual_condition_check, doubling_constant,
                               nakai_self_improve_check, phi_growth_check,
                               power_weight_classifier, reverse_holder_epsilon,
                               tanaka_condition_checks, weight_report,
                               weighted_integral_check)


def random_weight(rng, L, spread=3.0):
    g = build_grid(1, 0, L)
    return Weight(g, np.exp(rng.uniform(-spread, spread, g.shape)))


def test_trivial_weights():
    for dim, L in [(1, 6), (2, 3)]:
        g = build_grid(dim, 0, L)
        w = Weight.lebesgue(g)
        assert aq_constant(w, 2) == pytest.approx(1.0)
        assert aq_constant(w, 7.5) == pytest.approx(1.0)
        assert a1_constant(Weight(g, np.full(g.shape, 3.0))) == pytest.approx(1.0)
        assert ainf_estimate(w) == pytest.approx(1.0)
        assert reverse_holder_epsilon(w) == 1.0
        assert doubling_constant(w) == pytest.approx(2.0 ** dim)
        assert bpq_check(w, 4, 2) == pytest.approx(1.0)


def test_aq_two_cells():
    g = build_grid(1, 0, 1)
    assert aq_constant(Weight(g, [1.0, 4.0]), 2) == pytest.approx(1.5625, rel=1e-15)
    with pytest.raises(ValueError):
        aq_constant(Weight(g, [1.0, 4.0]), 1.0)


def test_a1_spike():
    from morreylab.grid import GridFunction
    from morreylab.maximal import hl_maximal
    g = build_grid(1, 0, 2)
    dens = [1.0, 1.0, 1.0, 9.0]
    Mw = hl_maximal(GridFunction(g, dens)).values
    assert Mw[0] == 3.0
    # the maximum over cells sits at cell 2, whose parent [1, 9] averages 5
    assert a1_constant(Weight(g, dens)) == 5.0


@pytest.mark.parametrize("seed", range(12))
def test_constants_match_enumeration(seed):
    rng = np.random.default_rng(seed)
    L = int(rng.integers(1, 11))
    w = random_weight(rng, L)
    q = float(rng.uniform(1.2, 6))
    aq, a1 = brute_weight_constants(w.density, w.grid.cell_volume, q)
    assert aq_constant(w, q) == pytest.approx(aq, rel=1e-10)
    assert a1_constant(w) == pytest.approx(a1, rel=1e-10)


@pytest.mark.parametrize("seed", range(8))
def test_rh_epsilon_matches_root_finder(seed):
    rng = np.random.default_rng(seed)
    g = build_grid(1, 0, int(rng.integers(2, 9)))
    dens = np.exp(rng.uniform(-1, 1, g.shape))
    dens[rng.integers(g.n_side)] *= float(rng.uniform(30, 300))
    eps = reverse_holder_epsilon(Weight(g, dens))
    ref = rh_epsilon_oracle(dens)
    assert eps <= ref + 1e-15
    assert ref - eps <= RH_TOL


def test_rh_spike_example_and_antitone():
    g = build_grid(1, 0, 1)
    # two cells [1, 9]: the root equation has no root below the ceiling
    assert reverse_holder_epsilon(Weight(g, [1.0, 9.0])) == 1.0
    g = build_grid(1, 0, 3)
    prev = 2.0
    for height in (50.0, 200.0, 800.0, 3200.0):
        dens = np.ones(8)
        dens[5] = height
        eps = reverse_holder_epsilon(Weight(g, dens))
        assert eps < prev
        assert abs(eps - rh_epsilon_oracle(dens)) <= RH_TOL
        prev = eps


@given(st.integers(0, 2**31))
def test_aq_ladder_nonincreasing(seed):
    rng = np.random.default_rng(seed)
    w = random_weight(rng, 6)
    vals = list(ainf_ladder(w).values())
    assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
    assert a1_constant(w) >= 1 - 1e-15


def test_aq_power_weight_blowup():
    vals = [aq_constant(weight_from_power(build_grid(1, 0, L), 0.97), 2) for L in (6, 9, 12)]
    assert vals[0] < vals[1] < vals[2]
    stable = [aq_constant(weight_from_power(build_grid(1, 0, L), 0.4), 2) for L in (6, 9, 12)]
    assert max(stable) / min(stable) < 1.05


def test_doubling_power_weight_stable():
    vals = [doubling_constant(weight_from_power(build_grid(1, 0, L), -0.6)) for L in (6, 8, 10)]
    assert np.isfinite(vals).all() and max(vals) / min(vals) < 1.05
    assert np.isnan(doubling_constant(Weight.lebesgue(build_grid(1, 0, 2))))


def test_bpq_growth_below_range():
    # 1/p + alpha/q < 0 for p=4, q=2, alpha=-0.75
    vals = [bpq_check(weight_from_power(build_grid(1, 0, L), -0.75), 4, 2) for L in (6, 8, 10)]
    assert vals[2] / vals[1] > 1.1 and vals[1] / vals[0] > 1.1


def test_weighted_integral_lebesgue_series():
    p = 4.0
    g = build_grid(1, 0, 10)
    c = weighted_integral_check(Weight.lebesgue(g), p, 2)
    assert c <= 1 / (2 ** (1 / p) - 1)
    assert c == pytest.approx(sum(2 ** (-k / p) for k in range(1, 11)), rel=1e-12)


def test_weighted_integral_boundary_linear_growth():
    vals = [weighted_integral_check(weight_from_power(build_grid(1, 0, L), -0.5), 4, 2)
            for L in (6, 8, 10)]
    d1, d2 = vals[1] - vals[0], vals[2] - vals[1]
    assert d1 > 0.5 and abs(d2 / d1 - 1) < 0.2


def test_nakai_check():
    g = build_grid(1, 0, 10)
    w = Weight.lebesgue(g)
    ref = sum(k * 2 ** (-k / 4) for k in range(1, 11))
    assert nakai_self_improve_check(w, 4, 2) == pytest.approx(ref, rel=1e-12)
    assert nakai_self_improve_check(w, 4, 2, log_weighted=False) == pytest.approx(
        weighted_integral_check(w, 4, 2), rel=1e-14)
    wb = weight_from_power(g, -0.5)
    assert nakai_self_improve_check(wb, 4, 2) >= weighted_integral_check(wb, 4, 2)
    with pytest.raises(ValueError):
        nakai_self_improve_check(w, 4, 2, delta=-1)


def test_phi_growth():
    g = build_grid(1, 0, 8)
    w = Weight.lebesgue(g)
    p = 3.0
    for m in (1, 2, 3, 4):
        r = phi_growth_check(w, p, 2, 2 ** m)
        assert r.holds == (m >= p)
        assert r.worst_ratio == pytest.approx(2 * 2 ** (-m / p))
    assert phi_growth_check(weight_from_power(g, -0.5), 4, 2, 16).holds is False
    assert phi_growth_check(Weight.lebesgue(build_grid(1, 0, 2)), 4, 2, 8).degenerate
    with pytest.raises(ValueError):
        phi_growth_check(w, 4, 2, 6)


def test_block_dual_condition():
    g = build_grid(1, 0, 6)
    w = Weight.lebesgue(g)
    base = block_dual_condition_check(w, 4, 2)
    assert np.isfinite(base) and base > 0
    cubes = [g.cube(1, 0), g.cube(3, 2)]
    one = [candidate_b_maximal(g.root, 0.5, 0.25)]
    more = one + [candidate_b_maximal(g.cube(3, 2), 0.5, 0.25)]
    assert block_dual_condition_check(w, 4, 2, more, cubes) <= block_dual_condition_check(w, 4, 2, one, cubes)
    stable = [block_dual_condition_check(weight_from_power(build_grid(1, 0, L), 0.3), 4, 2) for L in (6, 8)]
    assert max(stable) / min(stable) < 1.5


def test_tanaka_conditions_brute_force():
    g = build_grid(1, 0, 6)
    w = Weight.lebesgue(g)
    b = candidate_b_maximal(g.root, 0.5, 0.25)
    b_const = type(b)(b.b.__class__(g, np.full(g.shape, 0.3)), 1.0, 0.3 * 1.0, 0.5, g.root)
    p, q = 4.0, 2.0
    qp = 2.0
    sigma = (b_const.b.values * w.density) ** (-qp / q)
    # variant c by enumeration: M[sigma chi_Q] = sigma on Q for constant sigma
    best = 0.0
    for Q0 in g.all_cubes():
        inner = max(np.sum(sigma[Q.mask()] ** q) * g.cell_volume / (sigma[Q.mask()].sum() * g.cell_volume)
                    for Q in g.all_cubes() if Q0.contains(Q))
        best = max(best, inner / Q0.side ** (1 - q / p))
    assert tanaka_condition_checks(w, p, q, b_const, "c") == pytest.approx(best, rel=1e-12)
    Q0 = g.cube(2, 1)
    v = tanaka_condition_checks(w, p, q, b_const, "c", Q0=Q0)
    v2 = tanaka_condition_checks(w, p, q, b_const, "c", Q0=g.cube(4, 3))
    # for w = 1 and constant b the sub-max is the same, so the ratio is the side ratio
    assert v2 / v == pytest.approx((Q0.side / g.cube(4, 3).side) ** (1 - q / p), rel=1e-12)
    assert np.isfinite(tanaka_condition_checks(w, p, q, b, "d", a=1.5))
    with pytest.raises(ValueError):
        tanaka_condition_checks(w, p, q, b, "e")
    with pytest.raises(ValueError):
        tanaka_condition_checks(w, p, q, b, "d", a=1.0)


def test_classifier_examples():
    c = power_weight_classifier(-0.5, 4, 2, 1)
    assert c.HLM and not c.SIO_bounded and not c.WIC
    assert all(power_weight_classifier(0.0, 4, 2, 1).__dict__.values())
    assert not power_weight_classifier(1.5, 4, 2, 1).HLM
    with pytest.raises(ValueError):
        power_weight_classifier(0.0, 2, 1, 1)


def test_weight_report_json():
    import json
    rep = weight_report(weight_from_power(build_grid(1, 0, 6), 0.5), 4, 2, growth_c=8)
    d = json.loads(rep.to_json())
    assert list(d) == ["a_q_constants", "a1_const", "a_inf_est", "rh_epsilon", "doubling_const",
                       "bpq_const", "wic_const", "phi_growth_c"]
    assert rep.rh_epsilon > 0
    vals = list(rep.a_q_constants.values())
    assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
