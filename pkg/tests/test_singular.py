import numpy as np
import pytest
from hypothesis import given, strategies as st

from morreylab.grid import GridFunction, Weight, build_grid, weight_from_power
from morreylab.singular import (CZKernelSpec, KernelValidationError, bmo_norm, commutator,
                                cz_apply, hilbert, hilbert_matrix, hilbert_spec, riesz,
                                riesz_kernel, riesz_spec, weighted_bmo_ratio)


def test_hilbert_indicator_closed_form():
    for L in (4, 9, 12):
        g = build_grid(1, 2, L)
        edges = g.cell_edges()
        x = g.cell_centers()[0]
        for (i, j) in [(0, 3), (5, 11), (g.n_side // 2, g.n_side), (1, 2)]:
            f = np.zeros(g.n_side)
            f[i:j] = 1.0
            a, b = edges[i], edges[j]
            H = hilbert(GridFunction(g, f)).values
            out = (x < a) | (x > b)
            ref = np.log(np.abs(x[out] - a)) - np.log(np.abs(x[out] - b))
            assert np.allclose(H[out], ref, rtol=1e-12, atol=1e-12)


def test_hilbert_antisymmetry(rng):
    g = build_grid(1, 0, 10)
    f = GridFunction(g, rng.normal(size=g.shape))
    h = GridFunction(g, rng.normal(size=g.shape))
    lhs = np.sum(f.values * hilbert(h).values)
    rhs = -np.sum(h.values * hilbert(f).values)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
    A = hilbert_matrix(64)
    assert np.array_equal(A, -A.T)


def test_hilbert_symmetry_zero():
    g = build_grid(1, 1, 6)
    H = hilbert(GridFunction.constant(g, 1.0)).values
    assert H[g.n_side // 2] == pytest.approx(-H[g.n_side // 2 - 1])
    # f even about the midpoint of cell 20 within the window 10..30
    f = np.zeros(g.n_side)
    f[10:31] = np.abs(np.arange(-10, 11)) ** 1.5
    assert abs(hilbert(GridFunction(g, f)).values[20]) < 1e-12


def test_hilbert_matches_matrix(rng):
    g = build_grid(1, 0, 7)
    f = rng.normal(size=g.shape)
    assert np.allclose(hilbert(GridFunction(g, f)).values, hilbert_matrix(g.n_side) @ f, rtol=1e-12, atol=1e-13)


def test_cz_apply_hilbert_kernel_cross_check():
    g = build_grid(1, 0, 9)
    x = g.cell_centers()[0]
    f = GridFunction(g, np.exp(-40 * x ** 2))
    exact = hilbert(f).values
    approx = cz_apply(hilbert_spec(), f).values
    assert np.max(np.abs(approx - exact)) <= 1e-3 * np.max(np.abs(exact))
    # a non-invariant evaluation of the same kernel goes through the dense path
    spec = CZKernelSpec(hilbert_spec().kernel, C=1.0, theta=1.0, dim=1)
    assert np.allclose(cz_apply(spec, f).values, approx, rtol=1e-10, atol=1e-12)


def test_cz_zero_kernel_and_riesz_same_path(rng):
    g = build_grid(2, 0, 4)
    f = GridFunction(g, rng.normal(size=g.shape))
    zero = CZKernelSpec(lambda x, y: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y))[:-1]),
                        C=1.0, theta=1.0, dim=2)
    assert np.all(cz_apply(zero, f).values == 0)
    assert np.array_equal(cz_apply(riesz_spec(1), f, validate=False).values, riesz(f, 1).values)


def test_riesz_dense_matches_stencil(rng):
    g = build_grid(2, 0, 4)
    f = GridFunction(g, rng.normal(size=g.shape))
    spec = CZKernelSpec(riesz_kernel(2), C=1.0, theta=1.0, dim=2)
    assert np.allclose(cz_apply(spec, f).values, riesz(f, 2).values, rtol=1e-10, atol=1e-10)


def test_riesz_symmetry_and_far_field():
    g = build_grid(2, 0, 5)
    one = GridFunction.constant(g, 1.0)
    # the root is symmetric about the corner between the four central cells
    R = riesz(one, 1).values
    c = g.n_side // 2
    assert R[c, c] == pytest.approx(-R[c - 1, c], abs=1e-12)
    spike = np.zeros(g.shape)
    spike[3, 4] = 1.0
    R1 = riesz(GridFunction(g, spike), 1).values
    x, y = np.meshgrid(*g.cell_centers(), indexing="ij")
    y0 = np.array([x[3, 4], y[3, 4]])
    far = (np.abs(np.arange(g.n_side)[:, None] - 3) > 1) | (np.abs(np.arange(g.n_side)[None, :] - 4) > 1)
    d0, d1 = x - y0[0], y - y0[1]
    d0[3, 4] = 1.0
    ref = d0 / (d0 ** 2 + d1 ** 2) ** 1.5 * g.cell_volume
    assert np.allclose(R1[far], ref[far], rtol=1e-12)


def test_riesz_cone_positivity():
    g = build_grid(2, 0, 5)
    Q = g.cube(3, 2, 3)
    R = riesz(GridFunction.indicator(Q), 1).values
    s = g.cells_per_side(3)
    rows = np.arange((2 + 1) * s, g.n_side)
    cols = np.arange(3 * s, 4 * s)
    assert np.all(R[np.ix_(rows, cols)] > 0)


def test_riesz_refinement_convergence(rng):
    g = build_grid(2, 0, 4)
    f = GridFunction(g, rng.normal(size=g.shape))
    r3 = riesz(f, 1, depth=3).values
    r4 = riesz(f, 1, depth=4).values
    assert np.max(np.abs(r3 - r4)) <= 1e-3 * np.max(np.abs(r4))


def test_kernel_validation_errors():
    bad = CZKernelSpec(lambda x, y: np.full(np.broadcast_shapes(np.shape(x), np.shape(y))[:-1], np.nan),
                       C=1.0, theta=1.0, dim=1)
    with pytest.raises(KernelValidationError):
        bad.validate()
    big = CZKernelSpec(lambda x, y: 10.0 / (np.asarray(x)[..., 0] - np.asarray(y)[..., 0]),
                       C=1.0, theta=1.0, dim=1)
    with pytest.raises(KernelValidationError):
        big.validate()
    with pytest.raises(KernelValidationError):
        CZKernelSpec(riesz_kernel(1), C=1.0, theta=1.5, dim=2).validate()


def test_commutator_properties(rng):
    g = build_grid(1, 0, 8)
    f = GridFunction(g, rng.normal(size=g.shape))
    h = GridFunction(g, rng.normal(size=g.shape))
    c = GridFunction.constant(g, 2.5)
    assert np.allclose(commutator(c, hilbert, f).values, 0, atol=1e-12)
    b = GridFunction(g, rng.normal(size=g.shape))
    lhs = commutator(b, hilbert, 2 * f + h).values
    rhs = 2 * commutator(b, hilbert, f).values + commutator(b, hilbert, h).values
    assert np.allclose(lhs, rhs, atol=1e-11)


def test_commutator_indicator_formula():
    g = build_grid(1, 1, 8)
    Q = g.cube(2, 1)
    chi = GridFunction.indicator(Q)
    C = commutator(chi, hilbert, chi).values
    # on Q: chi * H chi - H(chi^2) = 0; off Q: -H chi
    a, b = Q.lower_corner[0], Q.lower_corner[0] + Q.side
    x = g.cell_centers()[0]
    out = ~Q.mask()
    assert np.all(C[Q.mask()] == 0)
    assert np.allclose(C[out], -(np.log(np.abs(x[out] - a)) - np.log(np.abs(x[out] - b))), atol=1e-12)


def test_bmo_examples(rng):
    g = build_grid(1, 0, 6)
    assert bmo_norm(GridFunction.constant(g, 3.0)) == 0
    Q = g.cube(2, 2)
    f = GridFunction.indicator(Q.children()[0])
    assert bmo_norm(f) == 0.5
    h = GridFunction(g, rng.normal(size=g.shape))
    assert bmo_norm(-3 * h) == pytest.approx(3 * bmo_norm(h), rel=1e-14)


def test_bmo_log_uniform_over_depth():
    vals = []
    for L in range(6, 13):
        g = build_grid(1, 0, L)
        x = np.maximum(np.abs(g.cell_centers()[0]), g.cell_side / 2)
        vals.append(bmo_norm(GridFunction(g, np.log(x))))
    assert max(vals) / min(vals) < 1.2


def test_weighted_bmo_ratio_examples(rng):
    g = build_grid(1, 0, 7)
    w = weight_from_power(g, -0.4)
    assert weighted_bmo_ratio(GridFunction.constant(g, 1.0), w, 2) == 0
    b = GridFunction(g, rng.normal(size=g.shape))
    assert weighted_bmo_ratio(b, Weight.lebesgue(g), 1) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("alpha", [-0.5, 0.5])
def test_weighted_bmo_log_stable(alpha):
    out = []
    for L in (8, 10):
        g = build_grid(1, 0, L)
        x = np.maximum(np.abs(g.cell_centers()[0]), g.cell_side / 2)
        out.append(weighted_bmo_ratio(GridFunction(g, np.log(x)), weight_from_power(g, alpha), 2))
    assert abs(out[1] / out[0] - 1) <= 0.2
