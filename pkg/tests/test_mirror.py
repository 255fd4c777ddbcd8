"""Mirror map, Bregman machinery, and l1-ball projection oracles."""

import numpy as np
import pytest

from sparsemd import mirror
from sparsemd import rng as rngmod
from sparsemd.errors import InvalidParameterError
from sparsemd.mirror import (L1Ball, MirrorMap, bregman, bregman_project,
                             grad_reg, inv_grad_reg, md_step, md_step_dual,
                             reg_value)
from sparsemd.vecspace import lp_norm

_PS = (1.12, 1.25, 1.5, 2.0)


def _ball_point(gen, d, radius):
    v = gen.standard_normal(d)
    return v * (radius * gen.random() / lp_norm(v, 1))


def test_mirror_map_validation():
    with pytest.raises(InvalidParameterError):
        MirrorMap(p=1.0, center=np.zeros(2))
    with pytest.raises(InvalidParameterError):
        MirrorMap(p=2.5, center=np.zeros(2))
    with pytest.raises(InvalidParameterError):
        MirrorMap(p=1.5, center=np.array([np.inf, 0.0]))
    with pytest.raises(InvalidParameterError):
        L1Ball(0.0)
    assert MirrorMap(p=1.5, center=np.zeros(2)).q == pytest.approx(3.0)


def test_grad_reg_basics():
    mmap = MirrorMap(p=2.0, center=np.zeros(3))
    w = np.array([1.0, -2.0, 0.5])
    assert np.allclose(grad_reg(mmap, w), w)
    for p in _PS:
        c = np.array([0.3, -0.1, 0.0])
        mmap = MirrorMap(p=p, center=c)
        assert np.allclose(grad_reg(mmap, c), 0.0)
        e1 = np.array([1.0, 0.0, 0.0])
        assert np.allclose(grad_reg(mmap, c + e1), e1, atol=1e-12)


def test_grad_reg_finite_difference_oracle():
    mmap = MirrorMap(p=1.5, center=np.zeros(2))
    w = np.array([1.0, -2.0])
    g = grad_reg(mmap, w)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (reg_value(mmap, w + e) - reg_value(mmap, w - e)) / (2 * h)
        assert g[i] == pytest.approx(fd, abs=1e-4)


def test_inv_grad_roundtrip_and_duality():
    gen = rngmod.stream(200, 0)
    for p in _PS:
        mmap = MirrorMap(p=p, center=np.zeros(16))
        for _ in range(250):
            w = gen.standard_normal(16) * float(gen.uniform(0.1, 3.0))
            y = grad_reg(mmap, w)
            assert np.max(np.abs(inv_grad_reg(mmap, y) - w)) <= \
                1e-8 * (1 + np.max(np.abs(w)))
            # dual norm identity ||grad||_q = ||w||_p
            assert abs(lp_norm(y, mmap.q) - lp_norm(w, p)) <= \
                1e-10 * (1 + lp_norm(w, p))
    mmap = MirrorMap(p=1.5, center=np.array([1.0, 2.0]))
    assert np.allclose(inv_grad_reg(mmap, np.zeros(2)), mmap.center)
    assert np.allclose(inv_grad_reg(mmap, np.array([1.0, 0.0])),
                       mmap.center + np.array([1.0, 0.0]))


def test_bregman_basics_and_strong_convexity():
    gen = rngmod.stream(201, 0)
    mmap2 = MirrorMap(p=2.0, center=np.zeros(8))
    a, b = gen.standard_normal(8), gen.standard_normal(8)
    assert bregman(mmap2, a, b) == pytest.approx(
        0.5 * lp_norm(a - b, 2) ** 2, abs=1e-12)
    for p in _PS:
        for centered in (False, True):
            c = gen.standard_normal(8) if centered else np.zeros(8)
            mmap = MirrorMap(p=p, center=c)
            for _ in range(150):
                a = gen.standard_normal(8)
                b = gen.standard_normal(8)
                assert bregman(mmap, a, a) == pytest.approx(0.0, abs=1e-12)
                val = bregman(mmap, a, b)
                assert val >= (p - 1) / 2 * lp_norm(a - b, p) ** 2 - 1e-12


def test_bregman_upper_and_holder_smoothness_bounds():
    gen = rngmod.stream(202, 0)
    for p in (1.12, 1.25, 1.5):
        mmap = MirrorMap(p=p, center=np.zeros(8))
        for _ in range(350):
            radius = float(gen.uniform(0.2, 2.0))
            a = _ball_point(gen, 8, radius)
            b = _ball_point(gen, 8, radius)
            c = _ball_point(gen, 8, radius)
            bb = max(lp_norm(a, p), lp_norm(b, p))
            assert bregman(mmap, a, b) <= 3 * bb * lp_norm(a - b, p) + 1e-12
            big = max(lp_norm(v, 1) for v in (a, b, c))
            diff = bregman(mmap, c, a) - bregman(mmap, c, b)
            bound = 5 * big * lp_norm(a - b, p) \
                + 4 * big ** (3 - p) * lp_norm(a - b, np.inf) ** (p - 1)
            assert diff <= bound + 1e-12


def test_bregman_holder_smoothness_centered():
    gen = rngmod.stream(203, 0)
    for p in (1.12, 1.25, 1.5):
        for _ in range(350):
            radius = float(gen.uniform(0.2, 2.0))
            center = _ball_point(gen, 8, radius)
            mmap = MirrorMap(p=p, center=center)
            a = _ball_point(gen, 8, radius)
            b = _ball_point(gen, 8, radius)
            c = _ball_point(gen, 8, radius)
            big = max(radius, max(lp_norm(v, 1) for v in (a, b, c)))
            diff = bregman(mmap, c, a) - bregman(mmap, c, b)
            bound = 10 * big * lp_norm(a - b, p) \
                + 16 * big ** (3 - p) * lp_norm(a - b, np.inf) ** (p - 1)
            assert diff <= bound + 1e-12


def test_gradient_holder_continuity():
    gen = rngmod.stream(204, 0)
    for p in (1.12, 1.5):
        mmap = MirrorMap(p=p, center=np.zeros(8))
        for _ in range(300):
            a = gen.standard_normal(8)
            b = gen.standard_normal(8)
            bb = max(lp_norm(a, p), lp_norm(b, p))
            lhs = lp_norm(grad_reg(mmap, a) - grad_reg(mmap, b), np.inf)
            rhs = 2 * bb ** (2 - p) * lp_norm(a - b, np.inf) ** (p - 1) \
                + lp_norm(a - b, p)
            assert lhs <= rhs + 1e-12


def test_scalar_signed_power_holder_bound():
    for p in (1.12, 1.25, 1.5, 1.9):
        grid = np.linspace(-2.0, 2.0, 1000)
        h = mirror._signed_power(grid, p - 1.0)
        for shift in (1, 7, 53):
            x, y = grid[:-shift], grid[shift:]
            lhs = np.abs(h[:-shift] - h[shift:])
            assert np.all(lhs <= 2.0 * np.abs(x - y) ** (p - 1) + 1e-12)


def test_projection_interior_points_unchanged():
    gen = rngmod.stream(205, 0)
    for p in _PS:
        mmap = MirrorMap(p=p, center=np.zeros(6))
        ball = L1Ball(1.0)
        w = _ball_point(gen, 6, 0.9)
        theta = grad_reg(mmap, w)
        assert np.allclose(bregman_project(mmap, ball, theta), w, atol=1e-10)


def test_projection_euclidean_sort_oracle():
    def oracle(v, radius):
        if np.abs(v).sum() <= radius:
            return np.array(v)
        # classic sort-and-threshold simplex projection
        u = np.sort(np.abs(v))[::-1]
        cs = np.cumsum(u)
        rho = np.max(np.nonzero(u * np.arange(1, v.size + 1)
                                > cs - radius)[0]) + 1
        lam = (cs[rho - 1] - radius) / rho
        return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)

    gen = rngmod.stream(206, 0)
    mmap = MirrorMap(p=2.0, center=np.zeros(12))
    ball = L1Ball(1.0)
    for _ in range(300):
        theta = gen.standard_normal(12) * float(gen.uniform(0.2, 4.0))
        assert np.allclose(bregman_project(mmap, ball, theta),
                           oracle(theta, 1.0), atol=1e-8)


def _l1_sphere_grid(radius, n=600):
    """Dense grid on the l1 sphere in R^3 (about 2*n^2/2 points)."""
    t = np.linspace(-radius, radius, n)
    t1, t2 = np.meshgrid(t, t, indexing="ij")
    keep = np.abs(t1) + np.abs(t2) <= radius
    t1, t2 = t1[keep], t2[keep]
    t3 = radius - np.abs(t1) - np.abs(t2)
    pts = np.concatenate([np.stack([t1, t2, t3], axis=1),
                          np.stack([t1, t2, -t3], axis=1)])
    return pts


def test_projection_grid_oracle_zero_center():
    p = 1.5
    mmap = MirrorMap(p=p, center=np.zeros(3))
    ball = L1Ball(1.0)
    gen = rngmod.stream(207, 0)
    grid = _l1_sphere_grid(1.0, n=1000)
    for _ in range(5):
        theta = gen.standard_normal(3) * 4.0
        w = bregman_project(mmap, ball, theta)
        assert lp_norm(w, 1) <= 1.0 + 1e-8
        # D_R(.||theta_primal) differs from this objective by a constant
        def objective(pts):
            return 0.5 * np.sum(np.abs(pts) ** p, axis=-1) ** (2 / p) \
                - pts @ theta
        assert objective(w) <= np.min(objective(grid)) + 1e-3


def test_projection_grid_oracle_off_center():
    p = 1.5
    center = np.array([0.4, -0.2, 0.1])
    mmap = MirrorMap(p=p, center=center)
    ball = L1Ball(1.0)
    gen = rngmod.stream(208, 0)
    grid = _l1_sphere_grid(1.0, n=1000)
    for _ in range(5):
        theta = gen.standard_normal(3) * 4.0
        w = bregman_project(mmap, ball, theta)
        assert lp_norm(w, 1) <= 1.0 + 1e-8
        def objective(pts):
            return 0.5 * np.sum(np.abs(pts - center) ** p,
                                axis=-1) ** (2 / p) - pts @ theta
        assert objective(w) <= np.min(objective(grid)) + 1e-3


def test_md_step_basics():
    gen = rngmod.stream(209, 0)
    ball = L1Ball(1.0)
    for p in _PS:
        mmap = MirrorMap(p=p, center=np.zeros(5))
        w = _ball_point(gen, 5, 0.8)
        assert np.allclose(md_step(mmap, ball, w, np.zeros(5), 0.1), w,
                           atol=1e-9)
    mmap = MirrorMap(p=2.0, center=np.zeros(5))
    w = _ball_point(gen, 5, 0.4)
    g = 0.1 * gen.standard_normal(5)
    assert np.allclose(md_step(mmap, ball, w, g, 0.01), w - 0.01 * g,
                       atol=1e-12)
    with pytest.raises(InvalidParameterError):
        md_step(mmap, ball, w, g, 0.0)


def test_md_step_decreases_quadratic():
    gen = rngmod.stream(210, 0)
    mmap = MirrorMap(p=1.5, center=np.zeros(6))
    ball = L1Ball(1.0)
    target = _ball_point(gen, 6, 0.7)
    w = _ball_point(gen, 6, 0.7)
    f = lambda v: 0.5 * float((v - target) @ (v - target))
    w2 = md_step(mmap, ball, w, w - target, 1e-3)
    assert f(w2) < f(w)


def test_md_step_dual_matches_primal_stepping():
    gen = rngmod.stream(211, 0)
    ball = L1Ball(1.0)
    for p in (1.12, 1.5, 2.0):
        mmap = MirrorMap(p=p, center=np.zeros(10))
        w = np.zeros(10)
        theta = grad_reg(mmap, w)
        for _ in range(60):
            g = gen.standard_normal(10)
            ref = md_step(mmap, ball, w, g, 0.05)
            w, theta = md_step_dual(mmap, ball, theta, g, 0.05)
            assert np.max(np.abs(w - ref)) <= 1e-10
            assert np.max(np.abs(theta - grad_reg(mmap, w))) <= 1e-8
    centered = MirrorMap(p=1.5, center=np.ones(10))
    with pytest.raises(InvalidParameterError):
        md_step_dual(centered, ball, np.zeros(10), np.zeros(10), 0.1)
