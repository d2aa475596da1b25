import numpy as np
import pytest

from conftest import band_limited_texture
from ripflow import (
    FlowConfig,
    FlowMethod,
    GradientFields,
    VelocityField,
    compute_gradients,
    estimate_flow,
)
from ripflow.errors import ConfigError, DimensionError
from ripflow.optflow import (
    NEIGHBOR_KERNEL,
    dfd,
    horn_schunck,
    hor_variant,
    laplacian,
    load_velocity,
    lucas_kanade,
    neighbor_mean,
    save_velocity,
    smooth_velocity,
)

_ORACLE_TOL = 1e-12


def random_gradients(rng, n=16, scale=1.0):
    return GradientFields(
        ix=scale * rng.standard_normal((n, n)),
        iy=scale * rng.standard_normal((n, n)),
        it=scale * rng.standard_normal((n, n)),
    )


def neighbor_matrix(n):
    """The averaging stencil as an explicit (n*n, n*n) matrix, border
    clamping included. Built column by column from unit impulses."""
    w = np.empty((n * n, n * n))
    for j in range(n * n):
        e = np.zeros(n * n)
        e[j] = 1.0
        w[:, j] = neighbor_mean(e.reshape(n, n)).ravel()
    return w


def hs_objective(g, u, v, gamma, w):
    """Data energy plus gamma times the weighted pairwise smoothness
    x'(I - W)x implied by the averaging stencil."""
    d = g.ix * u + g.iy * v + g.it
    uu, vv = u.ravel(), v.ravel()
    smooth = uu @ (uu - w @ uu) + vv @ (vv - w @ vv)
    return float((d * d).sum() + gamma * smooth)


# ---------------------------------------------------------------- stencils


def test_neighbor_kernel_is_an_average():
    assert abs(NEIGHBOR_KERNEL.sum() - 1.0) < 1e-15
    const = np.full((9, 9), 3.7)
    assert np.allclose(neighbor_mean(const), 3.7, atol=1e-13)


def test_neighbor_matrix_symmetric_stochastic():
    w = neighbor_matrix(6)
    assert np.allclose(w, w.T, atol=1e-14)
    assert np.allclose(w.sum(axis=1), 1.0, atol=1e-14)


def test_laplacian_constant_and_quadratic():
    assert np.allclose(laplacian(np.full((7, 7), 2.0)), 0.0, atol=1e-14)
    x = np.arange(9, dtype=np.float64)
    quad = np.tile(x * x, (9, 1))
    assert np.allclose(laplacian(quad)[1:-1, 1:-1], 2.0, atol=1e-12)


# ---------------------------------------------------------------- gradients


def test_gradients_constant_pair():
    f = np.full((10, 12), 0.4)
    g = compute_gradients(f, f, presmooth_sigma=0.0)
    for plane in (g.ix, g.iy, g.it):
        assert np.all(plane == 0.0)


def test_gradients_ramp():
    w = 16
    ramp = np.tile(np.arange(w, dtype=np.float64) / w, (w, 1))
    g = compute_gradients(ramp, ramp, presmooth_sigma=0.0)
    assert np.allclose(g.ix, 1.0 / w, atol=1e-12)
    assert np.allclose(g.iy, 0.0, atol=1e-12)
    assert np.all(g.it == 0.0)


def test_gradients_stencil_oracle(rng):
    f0 = rng.random((8, 8))
    f1 = rng.random((8, 8))
    g = compute_gradients(f0, f1, presmooth_sigma=0.0)
    avg = 0.5 * (f0 + f1)
    h, w = avg.shape
    for y in range(h):
        for x in range(w):
            if 0 < x < w - 1:
                ix = (avg[y, x + 1] - avg[y, x - 1]) / 2.0
            elif x == 0:
                ix = avg[y, 1] - avg[y, 0]
            else:
                ix = avg[y, w - 1] - avg[y, w - 2]
            if 0 < y < h - 1:
                iy = (avg[y + 1, x] - avg[y - 1, x]) / 2.0
            elif y == 0:
                iy = avg[1, x] - avg[0, x]
            else:
                iy = avg[h - 1, x] - avg[h - 2, x]
            assert abs(g.ix[y, x] - ix) < _ORACLE_TOL
            assert abs(g.iy[y, x] - iy) < _ORACLE_TOL
            assert abs(g.it[y, x] - (f1[y, x] - f0[y, x])) < _ORACLE_TOL


def test_gradients_brightness_offset_invariant(rng):
    # the offset cancels analytically; folding it into the inputs leaves
    # only accumulation roundoff, bounded well below 1e-13
    f0 = rng.random((12, 12))
    f1 = rng.random((12, 12))
    g0 = compute_gradients(f0, f1, presmooth_sigma=1.0)
    g1 = compute_gradients(f0 + 0.2, f1 + 0.2, presmooth_sigma=1.0)
    assert np.allclose(g0.ix, g1.ix, atol=1e-13)
    assert np.allclose(g0.iy, g1.iy, atol=1e-13)
    assert np.allclose(g0.it, g1.it, atol=1e-13)


def test_gradients_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        compute_gradients(rng.random((4, 4)), rng.random((4, 5)))


# ---------------------------------------------------------------- dfd


def test_dfd_zero_flow(rng):
    g = random_gradients(rng, 6)
    zero = VelocityField(
        u=np.zeros((6, 6)), v=np.zeros((6, 6)), valid=np.ones((6, 6), dtype=bool)
    )
    assert np.array_equal(dfd(g, zero), g.it)


def test_dfd_exact_compensation():
    ones = np.ones((4, 4))
    g = GradientFields(ix=ones, iy=0 * ones, it=-ones)
    v = VelocityField(u=ones, v=3.3 * ones, valid=ones.astype(bool))
    assert np.all(dfd(g, v) == 0.0)


def test_dfd_scalar_loop_oracle(rng):
    g = random_gradients(rng, 6)
    field = VelocityField(
        u=rng.standard_normal((6, 6)),
        v=rng.standard_normal((6, 6)),
        valid=np.ones((6, 6), dtype=bool),
    )
    d = dfd(g, field)
    for y in range(6):
        for x in range(6):
            expect = g.ix[y, x] * field.u[y, x] + g.iy[y, x] * field.v[y, x] + g.it[y, x]
            assert abs(d[y, x] - expect) < _ORACLE_TOL


# ---------------------------------------------------------------- Lucas-Kanade


def test_lk_all_zero_gradients_invalid():
    zero = np.zeros((9, 9))
    g = GradientFields(ix=zero, iy=zero, it=zero)
    out = lucas_kanade(g, FlowConfig(method=FlowMethod.LK, window=5))
    assert not out.valid.any()
    assert np.all(out.u == 0.0) and np.all(out.v == 0.0)


def test_lk_center_matches_normal_equations(rng):
    # strong independent gradients keep the normal matrix well conditioned
    for _ in range(20):
        win = int(rng.choice([5, 7, 9]))
        n = win + 4
        g = random_gradients(rng, n)
        out = lucas_kanade(g, FlowConfig(method=FlowMethod.LK, window=win))
        cy = cx = n // 2
        half = win // 2
        sl = np.s_[cy - half : cy + half + 1, cx - half : cx + half + 1]
        ix, iy, it = g.ix[sl].ravel(), g.iy[sl].ravel(), g.it[sl].ravel()
        a = np.array([[ix @ ix, ix @ iy], [ix @ iy, iy @ iy]])
        b = -np.array([ix @ it, iy @ it])
        expect = np.linalg.solve(a, b)
        assert out.valid[cy, cx]
        assert abs(out.u[cy, cx] - expect[0]) < 1e-9
        assert abs(out.v[cy, cx] - expect[1]) < 1e-9


def test_lk_flat_region_flagged_invalid(rng):
    g = random_gradients(rng, 20, scale=1.0)
    # flatten the middle block: no texture, no rank
    g.ix[8:12, 8:12] = 0.0
    g.iy[8:12, 8:12] = 0.0
    out = lucas_kanade(g, FlowConfig(method=FlowMethod.LK, window=3))
    assert not out.valid[9:11, 9:11].any()
    assert out.valid[0:4, 0:4].all()


# ---------------------------------------------------------------- Horn-Schunck


def test_hs_zero_data_term_converges_immediately(rng):
    g = random_gradients(rng, 8)
    g = GradientFields(ix=g.ix, iy=g.iy, it=np.zeros((8, 8)))
    out = horn_schunck(g, FlowConfig(method=FlowMethod.HS, gamma=0.5, max_iters=5))
    assert out.converged
    assert np.all(out.u == 0.0) and np.all(out.v == 0.0)


def test_hs_objective_monotone(rng):
    w = neighbor_matrix(8)
    for _ in range(3):
        g = random_gradients(rng, 8)
        gamma = float(rng.uniform(0.05, 2.0))
        cfg = FlowConfig(method=FlowMethod.HS, gamma=gamma, max_iters=1, tol=1e-300)
        state = None
        prev = hs_objective(g, np.zeros((8, 8)), np.zeros((8, 8)), gamma, w)
        for _ in range(60):
            state = horn_schunck(g, cfg, initial=state)
            cur = hs_objective(g, state.u, state.v, gamma, w)
            assert cur <= prev + 1e-10 * (1.0 + abs(prev))
            prev = cur


def test_hs_reports_nonconvergence(rng):
    g = random_gradients(rng, 10)
    out = horn_schunck(g, FlowConfig(method=FlowMethod.HS, gamma=0.1, max_iters=2, tol=1e-14))
    assert not out.converged


def test_flow_constancy_all_methods(rng):
    f = rng.random((24, 24))
    for method in FlowMethod:
        cfg = FlowConfig(method=method, gamma=0.5, max_iters=50)
        out = estimate_flow(compute_gradients(f, f, 1.0), cfg)
        assert np.abs(out.u).max() < cfg.tol
        assert np.abs(out.v).max() < cfg.tol


# ---------------------------------------------------------------- HOR variants


def test_hor_lambda_zero_reduces_to_base(rng):
    g = random_gradients(rng, 12)
    for hor, base in ((FlowMethod.HOR_LK, FlowMethod.LK), (FlowMethod.HOR_HS, FlowMethod.HS)):
        cfg = FlowConfig(method=hor, gamma=0.3, lambda_hor=0.0, max_iters=40)
        out = hor_variant(g, cfg)
        ref = estimate_flow(g, FlowConfig(method=base, gamma=0.3, max_iters=40))
        assert np.array_equal(out.u, ref.u)
        assert np.array_equal(out.v, ref.v)
        assert np.array_equal(out.valid, ref.valid)


def test_spike_smoothing_reduces_amplitude(rng):
    n = 17
    u = np.zeros((n, n))
    u[8, 8] = 10.0
    field = VelocityField(u=u, v=np.zeros((n, n)), valid=np.ones((n, n), dtype=bool))
    out = smooth_velocity(field, lambda_hor=50.0)
    assert out.u[8, 8] < 10.0
    # total momentum is conserved by the penalty (it only moves mass around)
    assert abs(out.u.sum() - 10.0) < 10.0 * 0.05
    nb = out.u[6:11, 6:11].sum()
    assert abs(nb - 10.0) / 10.0 < 0.05 or nb < 10.0  # spread may leave the 5x5 box


def test_smooth_velocity_lambda_zero_identity(rng):
    field = VelocityField(
        u=rng.standard_normal((9, 9)),
        v=rng.standard_normal((9, 9)),
        valid=np.ones((9, 9), dtype=bool),
    )
    out = smooth_velocity(field, 0.0)
    assert np.array_equal(out.u, field.u)
    assert np.array_equal(out.v, field.v)


def test_hor_hs_noise_robustness():
    # paired run on identical seeds: 5% salt-and-pepper on both frames
    f0 = band_limited_texture(42)
    f1 = np.roll(f0, (0, 1), axis=(0, 1))
    noise = np.random.default_rng(7)
    for f in (f0, f1):
        idx = noise.random(f.shape) < 0.05
        f[idx] = noise.random(idx.sum())
    g = compute_gradients(f0, f1, 2.0)
    interior = np.s_[16:-16, 16:-16]
    epe = {}
    for method in (FlowMethod.HS, FlowMethod.HOR_HS):
        cfg = FlowConfig(
            method=method, gamma=0.05, lambda_hor=4.0, max_iters=800, tol=1e-6,
            presmooth_sigma=2.0,
        )
        out = estimate_flow(g, cfg)
        epe[method] = np.hypot(out.u[interior] - 1.0, out.v[interior]).mean()
    assert epe[FlowMethod.HOR_HS] <= epe[FlowMethod.HS]


# ---------------------------------------------------------------- misc


def test_velocity_speed(rng):
    u = rng.standard_normal((5, 5))
    v = rng.standard_normal((5, 5))
    field = VelocityField(u=u, v=v, valid=np.ones((5, 5), dtype=bool))
    assert np.allclose(field.speed(), np.hypot(u, v), atol=1e-15)


def test_save_load_velocity_roundtrip(tmp_path, rng):
    field = VelocityField(
        u=rng.standard_normal((6, 7)),
        v=rng.standard_normal((6, 7)),
        valid=rng.random((6, 7)) > 0.3,
    )
    save_velocity(tmp_path, field)
    back = load_velocity(tmp_path)
    assert np.array_equal(back.u, field.u)
    assert np.array_equal(back.v, field.v)
    assert np.array_equal(back.valid, field.valid)


def test_flow_config_validation():
    with pytest.raises(ConfigError):
        FlowConfig(window=4)
    with pytest.raises(ConfigError):
        FlowConfig(window=1)
    with pytest.raises(ConfigError):
        FlowConfig(max_iters=0)
    with pytest.raises(ConfigError):
        FlowConfig(tol=0.0)
    with pytest.raises(ConfigError):
        FlowConfig(gamma=-1.0)
    with pytest.raises(ConfigError):
        FlowConfig(method="nonsense")


def test_estimate_flow_dispatch(rng):
    g = random_gradients(rng, 10)
    out = estimate_flow(g, FlowConfig(method=FlowMethod.LK, window=5))
    ref = lucas_kanade(g, FlowConfig(method=FlowMethod.LK, window=5))
    assert np.array_equal(out.u, ref.u)
