"""Acceptance criteria, one test per criterion, at the stated tolerances.

Each test prints one summary line (visible with ``pytest -s`` and in the
-v test listing); tolerances are pinned here, not configurable.
"""

import time

import numpy as np

from confcurv import curvature as cv
from confcurv import expr as ex
from confcurv import smoothing as sm
from confcurv import solver as sv
from confcurv import symbols as sy
from confcurv.metric import (
    MetricSpec,
    bundled_spec,
    euclidean_spec,
    metric_jet,
    rescaled_spec,
)


def _report(name, detail):
    print(f"ACCEPTANCE {name}: PASS ({detail})")


def _random_spd(rng, n, cond_cap=50.0):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eigs = rng.uniform(1.0, np.sqrt(cond_cap), size=n)
    return (q * eigs) @ q.T


def _trace_free(rng, fp):
    h = rng.normal(size=(fp.n, fp.n))
    h = 0.5 * (h + h.T)
    return h - np.einsum("ab,ab->", fp.ginv, h) / fp.n * fp.g


def test_c01_flat_annihilation():
    start = time.time()
    rng = np.random.default_rng(101)
    worst = 0.0
    for n in (3, 4):
        spec = euclidean_spec(n)
        for _ in range(20):
            x = rng.uniform(-0.8, 0.8, size=n)
            mj = metric_jet(spec, x, order=4)
            b = cv.curvature_bundle(mj)
            vals = [b.christoffel.max_abs(), b.riemann.max_abs(),
                    b.ricci.max_abs(), abs(b.scalar), b.schouten.max_abs(),
                    cv.weyl(b, mj).max_abs(),
                    cv.cotton(spec, x).max_abs(),
                    cv.bach(spec, x).tensor.max_abs()]
            worst = max(worst, max(vals))
    elapsed = time.time() - start
    assert worst <= 1e-10
    assert elapsed < 5.0
    _report("C1 flat annihilation", f"worst {worst:.2e}, {elapsed:.1f}s")


def test_c02_conformal_scaling_laws():
    start = time.time()
    rng = np.random.default_rng(102)
    factor = ex.parse("1 + 0.3*sin(x1)")
    spec4 = bundled_spec("diag_poly_n4")
    spec4c = rescaled_spec(spec4, factor)
    spec3 = bundled_spec("diag_poly_n3")
    spec3c = rescaled_spec(spec3, factor)
    worst = 0.0
    for _ in range(10):
        x4 = rng.uniform(-0.6, 0.6, size=4)
        cval = 1 + 0.3 * np.sin(x4[0])
        mj, mjc = metric_jet(spec4, x4, 4), metric_jet(spec4c, x4, 4)
        b, bc = cv.curvature_bundle(mj), cv.curvature_bundle(mjc)
        w = cv.weyl(b, mj).components
        wc = cv.weyl(bc, mjc).components
        worst = max(worst, np.abs(wc - cval * w).max() / np.abs(w).max())
        wm = cv.weyl(b, mj, "last_up").components
        wmc = cv.weyl(bc, mjc, "last_up").components
        worst = max(worst, np.abs(wmc - wm).max() / np.abs(wm).max())
        ob = cv.obstruction4(spec4, x4).conformal_invariant.components
        obc = cv.obstruction4(spec4c, x4).conformal_invariant.components
        worst = max(worst, np.abs(obc - ob).max() / np.abs(ob).max())
        x3 = rng.uniform(-0.6, 0.6, size=3)
        c0 = cv.cotton(spec3, x3).components
        c1 = cv.cotton(spec3c, x3).components
        worst = max(worst, np.abs(c1 - c0).max() / np.abs(c0).max())
    elapsed = time.time() - start
    assert worst <= 1e-7
    assert elapsed < 30.0
    _report("C2 conformal scaling", f"worst rel {worst:.2e}, {elapsed:.1f}s")


def test_c03_gauge_identity_conformal_class():
    rng = np.random.default_rng(103)
    factors = ("1 + 0.3*sin(x1)", "exp(0.2*x2)", "1/(1 + x1^2 + x2^2)")
    worst_res, worst_closed = 0.0, 0.0
    for n in (3, 4, 5):
        for c_src in factors:
            e = ex.parse(c_src, n)
            spec_c = rescaled_spec(euclidean_spec(n), e)
            for _ in range(3):
                x = rng.uniform(-0.6, 0.6, size=n)
                mj = metric_jet(spec_c, x, order=2)
                gamma, tilde = cv.gauge_vectors(mj)
                worst_res = max(worst_res, np.abs(gamma - tilde).max())
                cval = ex.evaluate(e, x)
                dc = np.array([ex.evaluate(ex.differentiate(e, j), x)
                               for j in range(1, n + 1)])
                closed = (1 - n / 2.0) * dc / cval ** 2
                worst_closed = max(worst_closed,
                                   np.abs(gamma - closed).max(),
                                   np.abs(tilde - closed).max())
    assert worst_res <= 1e-10
    assert worst_closed <= 1e-10
    _report("C3 gauge identity", f"residual {worst_res:.2e}, "
            f"closed-form defect {worst_closed:.2e}")


def test_c04_ellipticity_certificate():
    start = time.time()
    rng = np.random.default_rng(104)
    eigs = np.sort(np.linalg.eigvals(
        sy.q_matrix(sy.FrozenPoint.identity(4), np.eye(4)[0])).real)
    eigen_defect = np.abs(eigs - np.array([1.0] * 9 + [2.0])).max()
    assert eigen_defect <= 1e-8

    worst = np.inf
    counts = {3: 34, 4: 33, 5: 33}
    for n, count in counts.items():
        for _ in range(count):
            fp = sy.FrozenPoint.from_matrix(_random_spd(rng, n, cond_cap=50.0))
            rep = sy.ellipticity_certificate(fp, samples=500)
            assert rep.pass_
            worst = min(worst, rep.sigma_min)
    elapsed = time.time() - start
    assert worst > 1e-8
    assert elapsed < 60.0
    _report("C4 ellipticity certificate",
            f"min sigma {worst:.2e} over 100 backgrounds, "
            f"eigen defect {eigen_defect:.1e}, {elapsed:.1f}s")


def test_c05_factorization_equivalence():
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 6))
        fp = sy.FrozenPoint.from_matrix(_random_spd(rng, n))
        xi = rng.normal(size=n)
        h = rng.normal(size=(n, n))
        q = sy.q_apply(fp, xi, h)
        worst = max(worst, np.abs(np.diagonal(q.raised)
                                  - sy.q_diagonal_factored(fp, xi, h)).max())
    assert worst <= 1e-10
    _report("C5 factorization equivalence", f"worst {worst:.2e} over 1000 triples")


def test_c06_weyl_contraction_and_bianchi():
    rng = np.random.default_rng(106)
    worst = 0.0
    counts = {4: 167, 5: 167, 6: 166}
    for n, count in counts.items():
        for _ in range(count):
            fp = sy.FrozenPoint.from_matrix(_random_spd(rng, n), normalize=True)
            rep = sy.weyl_contraction_identity(fp, rng.normal(size=n),
                                               _trace_free(rng, fp))
            worst = max(worst, rep.defect, rep.bianchi_first_defect,
                        rep.bianchi_second_defect)
    assert worst <= 1e-10
    fp3 = sy.FrozenPoint.from_matrix(_random_spd(rng, 3), normalize=True)
    rep3 = sy.weyl_contraction_identity(fp3, rng.normal(size=3),
                                        _trace_free(rng, fp3))
    assert np.abs(rep3.lhs).max() <= 1e-10
    _report("C6 contracted Weyl identity",
            f"worst defect {worst:.2e} over 500 backgrounds")


def test_c07_plane_wave_oracle():
    rng = np.random.default_rng(107)
    spec = bundled_spec("conformal_wave_n4")
    x = np.array([0.2, -0.1, 0.3, 0.1])
    fp = sy.FrozenPoint.from_jet(metric_jet(spec, x, order=2))
    xi = np.array([0.6, -0.3, 0.7, 0.2])
    h = _trace_free(rng, fp)
    h /= np.linalg.norm(h)
    res = sy.plane_wave_symbol_oracle("ricci", spec, x, xi, h)
    closed = np.einsum("ad,abcd->bc", fp.ginv, sy.sigma_riemann(fp, xi, h))
    scale = np.abs(closed).max()
    err_ricci = np.abs(res.symbol - closed).max() / scale
    assert err_ricci <= 1e-3
    raw = [np.abs(res.estimates[w] - closed).max() for w in res.omegas]
    slope = float(np.polyfit(np.log(res.omegas), np.log(raw), 1)[0])
    assert abs(slope + 1.0) <= 0.3

    flat = euclidean_spec(4)
    h2 = rng.normal(size=(4, 4))
    h2 = 0.5 * (h2 + h2.T)
    h2 /= np.linalg.norm(h2)
    res_q = sy.plane_wave_symbol_oracle("bach-gauge-rhs", flat, np.zeros(4), xi, h2)
    q = sy.q_apply(sy.FrozenPoint.identity(4), xi, h2).lowered
    err_q = np.abs(res_q.symbol - q).max() / np.abs(q).max()
    assert err_q <= 1e-3
    _report("C7 plane-wave oracle",
            f"ricci err {err_ricci:.1e}, slope {slope:.2f}, q err {err_q:.1e}")


def test_c08_bach_gauge_oscillation_scaling():
    rep = sy.oscillation_scaling(amplitude=0.01, omegas=(8, 16, 32, 64))
    assert abs(rep.lhs_slope - 4.0) <= 0.2
    assert abs(rep.rhs_slope - 4.0) <= 0.2
    assert rep.defect_slope <= 3.2
    _report("C8 oscillation scaling",
            f"sides {rep.lhs_slope:.2f}/{rep.rhs_slope:.2f}, "
            f"defect {rep.defect_slope:.2f}")


def test_c09_solver():
    start = time.time()
    rng = np.random.default_rng(109)

    spec_c = bundled_spec("sphere_n3")
    grid17 = sv.Grid(box=[[-0.4, 0.4]] * 3, shape=(17, 17, 17))
    sol, rep = sv.solve_dirichlet(spec_c, grid17)
    h = float(grid17.spacing[0])
    dev = np.abs(sol.values - sv.GridMap.identity(grid17).values).max()
    assert dev <= 5 * h * h
    assert rep.min_jacobian > 0.9
    assert all(b <= a + 1e-12 for a, b in zip(rep.energies, rep.energies[1:]))

    # analytic vs finite-difference gradient on a perturbed state
    geo = sv.CellGeometry(spec_c, sv.Grid(box=[[-0.4, 0.4]] * 3, shape=(9, 9, 9)),
                          1e-8)
    up = sv.GridMap.identity(geo.grid)
    interior = geo.grid.interior_mask()
    up.values[:, interior] += 0.05 * rng.normal(size=up.values[:, interior].shape)
    _, grad = geo.energy_and_gradient(up)
    idx = np.argwhere(interior)
    worst_fd = 0.0
    for _ in range(10):
        j = int(rng.integers(3))
        node = tuple(idx[rng.integers(len(idx))])
        step = 1e-6
        up.values[(j,) + node] += step
        e1, _ = geo.energy_and_gradient(up)
        up.values[(j,) + node] -= 2 * step
        e2, _ = geo.energy_and_gradient(up)
        up.values[(j,) + node] += step
        fd = (e1 - e2) / (2 * step)
        worst_fd = max(worst_fd, abs(fd - grad[(j,) + node]) / max(abs(fd), 1e-10))
    assert worst_fd <= 1e-5

    diag = MetricSpec(3, [[-0.5, 0.5]] * 3,
                      [["1", "0", "0"], ["0", "1 + x1^2", "0"], ["0", "0", "1"]],
                      name="diag_x1")
    grid33 = sv.Grid(box=[[-0.4, 0.4]] * 3, shape=(33, 33, 33))
    sol_d, rep_d = sv.solve_dirichlet(diag, grid33, sv.SolverConfig(max_iter=3000))
    chk_id = sv.pullback_gauge_check(diag, grid33, sv.GridMap.identity(grid33))
    improve_mean = chk_id.mean_residual / rep_d.gauge_mean
    improve_max = chk_id.max_residual / rep_d.gauge_max
    assert improve_mean >= 5.0
    assert improve_max >= 5.0
    elapsed = time.time() - start
    assert elapsed < 600.0
    _report("C9 solver",
            f"dev {dev:.1e} vs {5 * h * h:.1e}, fd {worst_fd:.1e}, "
            f"gauge improvement mean {improve_mean:.0f}x max {improve_max:.0f}x, "
            f"{elapsed:.0f}s")


def test_c10_smoothing_lab():
    start = time.time()
    lp = sm.LPBundle(levels=9, delta=0.5)
    radii = np.abs(np.fft.fftfreq(1024) * 1024)
    partition = lp.partition_defect(radii)
    assert partition <= 1e-12

    p = sm.synth_zygmund_symbol(1, (3, 2), m=2.0, r=1.5, seed=42, grid=1024)
    split = sm.smooth_split(p, lp)
    recon = split.reconstruction_defect / np.abs(p.samples).max()
    assert recon <= 1e-15

    slopes = {}
    for r in (0.5, 1.0, 1.5):
        probe = sm.synth_zygmund_symbol(1, (2, 2), m=0.0, r=r, seed=5,
                                        grid=8192, n_scales=12, xi_points=[[3]])
        fit = sm.regularity_rate(probe, 0)
        slopes[r] = fit.slope
        assert abs(fit.slope - r) <= 0.15

    c_const = sm.measure_ellipticity(p, min_radius=1.0)
    pres = sm.ellipticity_preservation(split, c_const)
    assert pres.pass_ and pres.worst_ratio >= 1.0

    table = sm.parametrix_residual(split, [16, 32, 64, 128, 256],
                                   band_radius=pres.band_radius)
    assert table.strictly_decreasing()
    elapsed = time.time() - start
    assert elapsed < 120.0
    _report("C10 smoothing lab",
            f"partition {partition:.1e}, rates "
            + "/".join(f"{v:.2f}" for v in slopes.values())
            + f", band L={pres.band_radius:.0f}, {elapsed:.0f}s")
