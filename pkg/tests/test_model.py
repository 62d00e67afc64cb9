"""Covariance kernels, coefficient paths, information matrices."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from fielddesign.arrays import BlockArray, Shape, all_arrays
from fielddesign.model import (
    IDENTITY,
    GeneralCov,
    TypeH,
    btilde,
    btilde_fraction,
    c11_base,
    c_coeffs_closed,
    c_coeffs_trace,
    centering_projector,
    fraction_pinv,
    incidence_matrices,
    info_matrix_exact,
    info_matrix_measure,
    sigma_from_json,
    sigma_matrix,
    symmetric_pinv,
    triple_table,
)
from fielddesign.optimality import Measure

from .conftest import OPTIMAL_BLOCKS_232, SBS_ROWS_2X3, array_of, design_of


def _ar_cov(p: int, rho: float = 0.3) -> GeneralCov:
    return GeneralCov.from_matrix(
        [[rho ** abs(i - j) for j in range(p)] for i in range(p)])


def test_btilde_identity_is_centering():
    p = 6
    expect = np.eye(p) - np.full((p, p), 1 / p)
    assert np.allclose(btilde(IDENTITY, p), expect)


def test_btilde_type_h_rescales():
    p = 6
    assert np.allclose(btilde(TypeH(Fraction(3, 2)), p),
                       btilde(IDENTITY, p) / 1.5)


def test_btilde_type_h_ignores_offset_vector():
    # the symmetric rank-two part cancels against the block mean
    p = 4
    full = TypeH(2, y=(0.3, -0.1, 0.25, 0.0))
    m = sigma_matrix(full, p)
    inv = np.linalg.inv(m)
    u = inv.sum(axis=1)
    direct = inv - np.outer(u, u) / u.sum()
    assert np.allclose(direct, btilde(IDENTITY, p) / 2, atol=1e-10)


def test_btilde_general_annihilates_constants():
    p = 6
    bt = btilde(_ar_cov(p), p)
    assert np.allclose(bt @ np.ones(p), 0, atol=1e-12)
    assert np.allclose(bt, bt.T)
    assert np.linalg.eigvalsh(bt)[0] > -1e-12


def test_btilde_fraction_matches_float():
    p = 6
    exact = btilde_fraction(TypeH(Fraction(1, 3)), p)
    assert np.allclose(np.array(exact, dtype=float),
                       btilde(TypeH(Fraction(1, 3)), p))


def test_general_cov_validation():
    with pytest.raises(ValueError):
        GeneralCov.from_matrix([[1.0, 0.5]])
    with pytest.raises(ValueError):
        GeneralCov.from_matrix([[1.0, 0.9], [0.2, 1.0]])
    with pytest.raises(ValueError):
        GeneralCov.from_matrix([[1.0, 2.0], [2.0, 1.0]])  # indefinite


def test_sigma_from_json_forms():
    assert sigma_from_json({"type": "identity"}) == IDENTITY
    th = sigma_from_json({"type": "type-h", "x": "3/2"})
    assert isinstance(th, TypeH) and th.x == Fraction(3, 2)
    th2 = sigma_from_json({"type": "type-h", "x": 2, "y": [0.1, 0.2]})
    assert th2.x == 2 and th2.y == (0.1, 0.2)
    g = sigma_from_json([[1.0, 0.2], [0.2, 1.0]])
    assert isinstance(g, GeneralCov)
    with pytest.raises(ValueError):
        sigma_from_json({"type": "wishful"})


def test_reference_array_coefficients():
    # (1,1;2,3;4,5): c00 = 14/3, c01 = -1, c11 = 101/15, eta = 206/15
    shape = Shape(2, 3, 5)
    assert c11_base(shape) == Fraction(206, 15)
    c = c_coeffs_closed(array_of(2, 3, 5, SBS_ROWS_2X3))
    assert c.astuple() == (Fraction(14, 3), Fraction(-1), Fraction(101, 15))


def test_coefficient_paths_agree_exhaustively_small():
    for shape in (Shape(2, 2, 2), Shape(2, 2, 3), Shape(2, 3, 2)):
        for s in all_arrays(shape):
            closed = c_coeffs_closed(s)
            trace = c_coeffs_trace(s, IDENTITY)
            assert closed.astuple() == trace.astuple(), s


def test_coefficient_paths_agree_random():
    rng = np.random.default_rng(17)
    for shape in (Shape(2, 3, 5), Shape(3, 3, 4), Shape(3, 4, 7)):
        for _ in range(20):
            s = BlockArray.from_colex(
                shape, rng.integers(1, shape.t + 1, size=shape.p))
            assert c_coeffs_closed(s).astuple() == c_coeffs_trace(s).astuple()


def test_triple_table_matches_per_array():
    shape = Shape(2, 3, 3)
    pool = [s for _, s in zip(range(40), all_arrays(shape))]
    table = triple_table(pool, IDENTITY)
    for k, s in enumerate(pool):
        c = c_coeffs_trace(s)
        assert np.allclose(table[k], [float(v) for v in c.astuple()])


def test_incidence_shapes_and_row_sums():
    s = array_of(2, 3, 5, SBS_ROWS_2X3)
    inc = incidence_matrices(s)
    assert inc.t0.shape == (6, 5)
    assert inc.t0.sum() == 6  # one treatment per plot
    # neighbor totals: interior plots of a 2x3 grid have 3 neighbors,
    # corners 2
    assert sorted(inc.f.sum(axis=1)) == [2, 2, 2, 2, 3, 3]


def test_info_matrix_zero_row_sums():
    d = design_of(2, 3, 2, OPTIMAL_BLOCKS_232)
    c = info_matrix_exact(d)
    assert np.allclose(c @ np.ones(2), 0, atol=1e-12)
    c_ar = info_matrix_exact(d, _ar_cov(6))
    assert np.allclose(c_ar @ np.ones(2), 0, atol=1e-12)


def test_optimal_design_info_matrix_value():
    # universally optimal 4-block design: C = n y* B_t / (t-1) = 12 B_2
    d = design_of(2, 3, 2, OPTIMAL_BLOCKS_232)
    c = info_matrix_exact(d)
    assert np.allclose(c, 12 * centering_projector(2), atol=1e-10)


def test_type_h_info_matrix_is_scaled_identity_info():
    d = design_of(2, 3, 2, OPTIMAL_BLOCKS_232)
    base = info_matrix_exact(d)
    scaled = info_matrix_exact(d, TypeH(Fraction(5, 2)))
    assert np.allclose(scaled, base / 2.5, atol=1e-10)


def test_info_matrix_measure_matches_design_average():
    d = design_of(2, 3, 2, OPTIMAL_BLOCKS_232)
    xi = Measure(d.shape, {
        array_of(2, 3, 2, OPTIMAL_BLOCKS_232[0]): Fraction(1, 2),
        array_of(2, 3, 2, OPTIMAL_BLOCKS_232[2]): Fraction(1, 4),
        array_of(2, 3, 2, OPTIMAL_BLOCKS_232[3]): Fraction(1, 4),
    })
    per_n = info_matrix_exact(d) / d.n
    assert np.allclose(info_matrix_measure(xi), per_n, atol=1e-10)


def test_exact_measure_info_is_rational():
    xi = Measure(Shape(2, 3, 2), {array_of(2, 3, 2, [[1, 2, 1], [2, 1, 2]]): Fraction(1)})
    c = info_matrix_measure(xi, exact=True)
    assert isinstance(c[0, 0], Fraction)
    assert c[0, 0] + c[0, 1] == 0


def test_fraction_pinv_agrees_with_float():
    rng = np.random.default_rng(3)
    for _ in range(10):
        m = rng.integers(-3, 4, size=(3, 3))
        sym = m + m.T
        proj = np.eye(3) - np.full((3, 3), 1 / 3)
        sym = proj @ sym @ proj  # contrast-space matrix, singular
        exact = np.empty((3, 3), dtype=object)
        for i in range(3):
            for j in range(3):
                exact[i, j] = Fraction(sym[i, j]).limit_denominator(10 ** 6)
        got = fraction_pinv(exact)
        want = symmetric_pinv(np.array(exact, dtype=float))
        assert np.allclose(np.array(got, dtype=float), want, atol=1e-9)


def test_centering_projector_forms():
    b3 = centering_projector(3)
    assert np.allclose(b3, b3 @ b3)
    exact = centering_projector(3, exact=True)
    assert exact[0, 0] == Fraction(2, 3) and exact[0, 1] == Fraction(-1, 3)
