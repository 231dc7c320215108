import numpy as np
import pytest

from confcurv.errors import DomainError, EvalError, InputError, NotSPD
from confcurv.jets import Jet, jet_einsum, jet_log, jet_matinv, jet_power
from confcurv.metric import (
    MetricSpec,
    bundled_spec,
    conformal_normalize,
    euclidean_spec,
    metric_jet,
)


def test_jet_algebra_against_closed_forms():
    # f(x) = exp(x1) * (1 + x2^2) as a product of two scalar jets at a point
    n = 2
    x = np.array([0.3, -0.4])
    u = Jet(n, 3, [np.exp(x[0]),
                   np.array([np.exp(x[0]), 0.0]),
                   np.array([[np.exp(x[0]), 0], [0, 0.0]]),
                   np.zeros((2, 2, 2))])
    u.tables[3][0, 0, 0] = np.exp(x[0])
    v = Jet(n, 3, [1 + x[1] ** 2,
                   np.array([0.0, 2 * x[1]]),
                   np.array([[0.0, 0], [0, 2.0]]),
                   np.zeros((2, 2, 2))])
    w = jet_einsum(",->", u, v)
    assert np.isclose(w.value, np.exp(0.3) * 1.16)
    assert np.isclose(w.tables[1][1], np.exp(0.3) * 2 * x[1])
    assert np.isclose(w.tables[2][0, 1], np.exp(0.3) * 2 * x[1])
    assert np.isclose(w.tables[3][0, 0, 1], np.exp(0.3) * 2 * x[1])
    # log(exp(x1) * ...) has clean second derivatives
    lw = jet_log(w)
    assert np.isclose(lw.tables[1][0], 1.0)
    assert np.isclose(lw.tables[2][0, 0], 0.0)
    # power: (w)^(1/2) squared reproduces w
    sq = jet_power(w, 0.5)
    back = jet_einsum(",->", sq, sq)
    for k in range(4):
        assert np.allclose(back.tables[k], w.tables[k], atol=1e-12)


def test_jet_matrix_inverse_roundtrip():
    rng = np.random.default_rng(0)
    n = 3
    tables = [rng.normal(size=(3, 3) + (n,) * k) for k in range(4)]
    tables[0] = tables[0] @ tables[0].T + 4 * np.eye(3)
    g = Jet(n, 3, [0.5 * (t + np.swapaxes(t, 0, 1)) for t in tables])
    gi = jet_matinv(g)
    prod = jet_einsum("ab,bc->ac", g, gi)
    assert np.allclose(prod.tables[0], np.eye(3), atol=1e-12)
    for k in (1, 2, 3):
        assert np.allclose(prod.tables[k], 0.0, atol=1e-10)


def test_metric_jet_invariants():
    spec = bundled_spec("sphere_n3")
    mj = metric_jet(spec, [0.1, -0.2, 0.05], order=4)
    n = 3
    # inverse identity to 1e-12
    assert np.abs(mj.ginv_value @ mj.g_value - np.eye(n)).max() < 1e-12
    # d log det identity to 1e-10
    lhs = mj.logdet.tables[1]
    rhs = np.einsum("jk,jka->a", mj.ginv_value, mj.g.tables[1])
    assert np.abs(lhs - rhs).max() < 1e-10
    # all tables symmetric in derivative slots
    t3 = mj.g.tables[3]
    assert np.abs(t3 - np.swapaxes(t3, 2, 3)).max() == 0.0
    assert np.abs(t3 - np.swapaxes(t3, 2, 4)).max() == 0.0


def test_jet_examples_flat_and_scaled():
    spec = euclidean_spec(3)
    mj = metric_jet(spec, [0.2, 0.1, -0.3], order=4)
    assert mj.det == 1.0
    for k in (1, 2, 3, 4):
        assert np.abs(mj.g.tables[k]).max() == 0.0
    # g = c delta with c = 4/(1+|x|^2)^2 at x = 0
    spec_s = bundled_spec("sphere_n3")
    mj0 = metric_jet(spec_s, [0.0, 0.0, 0.0], order=2)
    assert np.allclose(mj0.g_value, 4.0 * np.eye(3))
    assert np.isclose(mj0.det, 4.0 ** 3)


def test_jet_example_diag_polynomial():
    spec = MetricSpec(4, [[-1, 1]] * 4,
                      [["1", "0", "0", "0"], ["0", "1 + x1^2", "0", "0"],
                       ["0", "0", "1", "0"], ["0", "0", "0", "1"]])
    mj = metric_jet(spec, [0.5, 0.0, 0.0, 0.0], order=4)
    assert np.isclose(mj.g.tables[1][1, 1, 0], 1.0)   # d_1 g_22 = 2 x1 = 1
    assert np.isclose(mj.g.tables[2][1, 1, 0, 0], 2.0)
    others = mj.g.tables[1].copy()
    others[1, 1, 0] = 0.0
    assert np.abs(others).max() == 0.0


def test_jet_determinism_bit_identical():
    spec = bundled_spec("diag_poly_n4")
    x = [0.31, -0.21, 0.11, 0.41]
    a = metric_jet(spec, x, order=4)
    b = metric_jet(spec, x, order=4)
    for ta, tb in zip(a.g.tables, b.g.tables):
        assert np.array_equal(ta, tb)
    for ta, tb in zip(a.ginv.tables, b.ginv.tables):
        assert np.array_equal(ta, tb)


def test_domain_and_spd_errors():
    spec = bundled_spec("sphere_n3")
    with pytest.raises(DomainError):
        metric_jet(spec, [2.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        metric_jet(spec, [0.8, 0.0, 0.0])  # boundary is not strictly inside
    with pytest.raises(NotSPD):
        MetricSpec(3, [[-1, 1]] * 3,
                   [["x1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]])
    with pytest.raises(EvalError):
        MetricSpec(3, [[-1, 1]] * 3,
                   [["1/x1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]])


def test_spec_symmetrized_on_load():
    spec = MetricSpec(3, [[-1, 1]] * 3,
                      [["1", "0.2*x1", "0"], ["0", "2", "0"], ["0", "0", "1"]])
    assert spec.components[0][1] is spec.components[1][0]
    mj = metric_jet(spec, [0.5, 0, 0], order=1)
    assert np.isclose(mj.g_value[0, 1], 0.05)  # symmetrized mean of 0.1 and 0


def test_dimension_floor():
    with pytest.raises(InputError):
        MetricSpec(2, [[-1, 1]] * 2, [["1", "0"], ["0", "1"]])


def test_conformal_normalize():
    spec = bundled_spec("diag_poly_n4")
    mj = metric_jet(spec, [0.3, -0.2, 0.1, 0.4], order=4)
    nj = conformal_normalize(mj)
    assert abs(nj.det - 1.0) < 1e-12
    for k, table in enumerate(nj.logdet.tables):
        assert np.abs(table).max() < 1e-12 * 10 ** k
    # g = 4 delta normalizes to delta
    spec4 = MetricSpec(4, [[-1, 1]] * 4,
                       [["4" if j == k else "0" for k in range(4)] for j in range(4)])
    nj4 = conformal_normalize(metric_jet(spec4, [0.1] * 4, order=4))
    assert np.allclose(nj4.g_value, np.eye(4), atol=1e-14)
    # c(x) delta normalizes to delta for any positive factor
    spec_c = bundled_spec("conformal_wave_n3")
    njc = conformal_normalize(metric_jet(spec_c, [0.3, 0.1, -0.2], order=4))
    assert np.allclose(njc.g_value, np.eye(3), atol=1e-13)
    for k in (1, 2, 3):
        assert np.abs(njc.g.tables[k]).max() < 1e-12


def test_normalize_determinant_for_random_polynomial_metrics():
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = rng.normal(size=(3, 3))
        base = a @ a.T + 3 * np.eye(3)
        comps = [[repr(float(base[j, k])) + (" + 0.2*x1*x2" if j == k else "")
                  for k in range(3)] for j in range(3)]
        spec = MetricSpec(3, [[-0.8, 0.8]] * 3, comps, validate=False)
        mj = metric_jet(spec, rng.uniform(-0.5, 0.5, size=3), order=2)
        nj = conformal_normalize(mj)
        assert abs(nj.det - 1.0) < 1e-12
