"""The lp mirror map 0.5*||w - center||_p^2 and its Bregman machinery.

p is restricted to (1, 2]; the dual exponent q = p/(p-1) lives in [2, inf).
The constraint set is an l1 ball, with the Bregman projection computed by
dual soft-thresholding plus bisection on the Lagrange multiplier.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, NumericalFailureError
from .vecspace import lp_norm

_PROJ_TOL = 1e-9
_PROJ_MAX_ITERS = 200


@dataclass
class MirrorMap:
    p: float
    center: np.ndarray
    q: float = field(init=False)

    def __post_init__(self):
        if not (1.0 < self.p <= 2.0):
            raise InvalidParameterError(f"p must lie in (1, 2], got {self.p}")
        self.center = np.asarray(self.center, dtype=float)
        if not np.all(np.isfinite(self.center)):
            raise InvalidParameterError("center must be finite")
        self.q = self.p / (self.p - 1.0)

    @property
    def centered(self):
        return bool(np.any(self.center != 0.0))


@dataclass
class L1Ball:
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidParameterError("l1 ball radius must be positive")

    def contains(self, w, slack=_PROJ_TOL):
        return lp_norm(w, 1) <= self.radius * (1.0 + slack)


def _signed_power(theta, expo):
    """|theta_i|^expo * sgn(theta_i) coordinate-wise, with sgn(0) = 0."""
    return np.sign(theta) * np.abs(theta) ** expo


def _grad_centered(theta, p):
    """Gradient of 0.5*||.||_p^2 at theta (center folded out by the caller)."""
    if p == 2.0:
        return np.array(theta, dtype=float, copy=True)
    norm = lp_norm(theta, p)
    if norm == 0.0:
        return np.zeros_like(theta)
    return norm ** (2.0 - p) * _signed_power(theta, p - 1.0)


def grad_reg(mmap, w):
    """grad of R(w) = 0.5*||w - center||_p^2."""
    w = np.asarray(w, dtype=float)
    return _grad_centered(w - mmap.center, mmap.p)


def inv_grad_reg(mmap, y):
    """Inverse of grad_reg; maps dual coordinates back to the primal space."""
    y = np.asarray(y, dtype=float)
    return mmap.center + _inv_grad_centered(y, mmap.q)


def _inv_grad_centered(y, q):
    if q == 2.0:
        return np.array(y, dtype=float, copy=True)
    norm = lp_norm(y, q)
    if norm == 0.0:
        return np.zeros_like(y)
    return norm ** (2.0 - q) * _signed_power(y, q - 1.0)


def reg_value(mmap, w):
    return 0.5 * lp_norm(np.asarray(w, dtype=float) - mmap.center, mmap.p) ** 2


def bregman(mmap, w, w2):
    """D_R(w || w2) = R(w) - R(w2) - <grad R(w2), w - w2>."""
    w = np.asarray(w, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    g = grad_reg(mmap, w2)
    return reg_value(mmap, w) - reg_value(mmap, w2) - float(g @ (w - w2))


def _euclidean_l1_project(v, radius):
    """Sort-based projection of v onto the l1 ball (p = 2 fast path)."""
    a = np.abs(v)
    if a.sum() <= radius:
        return np.array(v, dtype=float, copy=True)
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - radius
    idx = np.arange(1, a.size + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    lam = css[rho - 1] / rho
    return np.sign(v) * np.maximum(a - lam, 0.0)


def _soft_threshold(y, lam):
    return np.sign(y) * np.maximum(np.abs(y) - lam, 0.0)


def _project_zero_center_dual(p, q, radius, theta):
    """Bregman projection onto {||w||_1 <= radius} for a map centered at 0.

    theta is given in dual coordinates.  KKT: the solution is
    inv_grad(soft_threshold(theta, lam)) with lam >= 0 chosen so the l1
    norm hits the radius.  Returns (w, dual) with dual = grad at w, i.e.
    the thresholded theta itself.
    """
    a = np.abs(theta)
    aq1 = a ** (q - 1.0)
    sq = float(aq1 @ a)
    if sq == 0.0:
        z = np.zeros_like(theta)
        return z, z
    scale0 = sq ** ((2.0 - q) / q)
    if scale0 * float(aq1.sum()) <= radius:
        return scale0 * np.sign(theta) * aq1, np.array(theta, dtype=float)

    # sort once; each multiplier probe touches only the surviving prefix
    asort = np.sort(a)[::-1]

    def excess(lam):
        j = int(np.searchsorted(-asort, -lam, side="left"))
        if j == 0:
            return -radius
        y = asort[:j] - lam
        yq1 = y ** (q - 1.0)
        s = float(yq1 @ y)
        if s == 0.0:
            return -radius
        return s ** ((2.0 - q) / q) * float(yq1.sum()) - radius

    # Illinois-damped false position on the monotone multiplier equation
    lo, flo = 0.0, scale0 * float(aq1.sum()) - radius
    hi, fhi = float(asort[0]), -radius
    lam, f, side = hi, fhi, 0
    for _ in range(_PROJ_MAX_ITERS):
        lam = (lo * fhi - hi * flo) / (fhi - flo)
        if not (lo < lam < hi):
            lam = 0.5 * (lo + hi)
        f = excess(lam)
        if abs(f) <= _PROJ_TOL * radius:
            break
        if f > 0.0:
            lo, flo = lam, f
            if side == +1:
                fhi *= 0.5
            side = +1
        else:
            hi, fhi = lam, f
            if side == -1:
                flo *= 0.5
            side = -1
    else:
        raise NumericalFailureError(
            f"l1 bregman projection did not converge (residual {f})")
    dual = _soft_threshold(theta, lam)
    idx = np.flatnonzero(dual)
    ys = np.abs(dual[idx])
    yq1 = ys ** (q - 1.0)
    w = np.zeros_like(theta)
    w[idx] = float(yq1 @ ys) ** ((2.0 - q) / q) * np.sign(dual[idx]) * yq1
    return w, dual


def _project_zero_center(p, q, radius, theta):
    return _project_zero_center_dual(p, q, radius, theta)[0]


def _project_off_center(mmap, radius, theta):
    """Projection when the map center and the ball center differ.

    Stationarity in shifted coordinates v = w - center reads
    mu^(2-p) * psi(v) = theta - lam * g with mu = ||v||_p, psi the signed
    power |.|^(p-1), and g a subgradient of ||v + center||_1.  For fixed
    (lam, mu) each coordinate is solved in closed form (v_i pinned at
    -center_i when theta_i falls inside the subgradient jump); mu is then
    bisected to consistency and lam is bisected on the l1 norm.
    """
    p, q = mmap.p, mmap.q
    c = mmap.center

    def shrink(lam, mu):
        r = mu ** (2.0 - p)
        jump = r * _signed_power(-c, p - 1.0)
        upper = theta > jump + lam
        lower = theta < jump - lam
        t = np.where(upper, theta - lam, np.where(lower, theta + lam, 0.0))
        return np.where(upper | lower, _signed_power(t / r, q - 1.0), -c)

    def solve(lam):
        def gap(mu):
            return lp_norm(shrink(lam, mu), p) - mu

        lo = hi = 1.0
        for _ in range(_PROJ_MAX_ITERS):
            if gap(hi) <= 0.0:
                break
            lo, hi = hi, 2.0 * hi
        for _ in range(_PROJ_MAX_ITERS):
            if gap(lo) >= 0.0 or lo < 1e-150:
                break
            hi, lo = lo, 0.5 * lo
        for _ in range(_PROJ_MAX_ITERS):
            mu = 0.5 * (lo + hi)
            if gap(mu) > 0.0:
                lo = mu
            else:
                hi = mu
        return c + shrink(lam, 0.5 * (lo + hi))

    w = c + _inv_grad_centered(theta, q)
    if lp_norm(w, 1) <= radius:
        return w
    lo, hi = 0.0, 1.0
    for _ in range(_PROJ_MAX_ITERS):
        if lp_norm(solve(hi), 1) <= radius:
            break
        lo, hi = hi, 2.0 * hi
    for _ in range(_PROJ_MAX_ITERS):
        lam = 0.5 * (lo + hi)
        w = solve(lam)
        n1 = lp_norm(w, 1)
        if abs(n1 - radius) <= _PROJ_TOL * radius:
            return w
        if n1 > radius:
            lo = lam
        else:
            hi = lam
    raise NumericalFailureError(
        f"off-center l1 bregman projection did not converge (||w||_1={n1})")


def bregman_project(mmap, ball, theta_dual):
    """argmin over the l1 ball of D_R(w || point-with-dual-coords theta).

    theta_dual holds the value grad_reg(theta_primal).
    """
    theta_dual = np.asarray(theta_dual, dtype=float)
    if mmap.p == 2.0:
        return _euclidean_l1_project(mmap.center + theta_dual, ball.radius)
    if not mmap.centered:
        return _project_zero_center(mmap.p, mmap.q, ball.radius, theta_dual)
    return _project_off_center(mmap, ball.radius, theta_dual)


def md_step(mmap, ball, w_t, g, eta):
    """One mirror descent step: dual shift by -eta*g, then project."""
    if eta <= 0:
        raise InvalidParameterError("step size eta must be positive")
    theta = grad_reg(mmap, w_t) - eta * np.asarray(g, dtype=float)
    return bregman_project(mmap, ball, theta)


def md_step_dual(mmap, ball, theta_t, g, eta):
    """md_step carried in dual coordinates, for zero-centered maps only.

    theta_t must equal grad_reg(mmap, w_t); returns (w_next, theta_next)
    with theta_next = grad_reg(mmap, w_next), so a descent loop never has
    to re-derive the dual point of its own projection output.
    """
    if eta <= 0:
        raise InvalidParameterError("step size eta must be positive")
    if mmap.centered:
        raise InvalidParameterError("dual-state stepping needs center 0")
    theta = theta_t - eta * np.asarray(g, dtype=float)
    if mmap.p == 2.0:
        w = _euclidean_l1_project(theta, ball.radius)
        return w, w
    return _project_zero_center_dual(mmap.p, mmap.q, ball.radius, theta)
