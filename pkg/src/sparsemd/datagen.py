"""Seeded synthetic problem generators with known optima.

Every instance carries a sampler (stream of Examples), the population
optimum, declared norm bounds, and a risk evaluator that is either closed
form or backed by a frozen holdout set.

Vector instances can plant their feature distribution on a small "active"
coordinate pool inside a much larger ambient dimension; this keeps the
problem statistically learnable at N << d (the regime the communication
story is about) and makes sampling cheap.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from . import rng as rngmod
from .errors import InvalidParameterError
from .losses import Example, LinkFunction
from .vecspace import lp_norm


@dataclass
class ProblemInstance:
    dim: int
    link: LinkFunction
    w_star: np.ndarray
    seed: int
    b1: float                      # constraint-set radius (l1 or S1)
    q: float                       # feature norm exponent (math.inf allowed)
    r_q: float                     # declared feature lq bound
    grad_bound: float              # lq bound on loss subgradients
    risk: Callable                 # population risk L(w)
    matrix: bool = False
    gamma: Optional[float] = None          # restricted eigenvalue
    k_sparsity: Optional[int] = None
    l_star: Optional[float] = None         # optimal population risk
    sigma_diag: Optional[float] = None     # isotropic covariance scale
    _sample: Callable = field(default=None, repr=False)

    def sampler(self, stream_id=0):
        """Fresh seeded example stream; same (seed, stream_id) -> same stream."""
        return self._sample(rngmod.stream(self.seed, 17, stream_id))

    def examples(self, n, stream_id=0):
        gen = self.sampler(stream_id)
        return [next(gen) for _ in range(n)]

    def excess_risk(self, w):
        return self.risk(w) - self.risk(self.w_star)


def _lq_sphere_coord_var(d, q):
    """Exact E[u_1^2] for u uniform on the unit lq sphere in R^d.

    For generalized-Gaussian g (density prop. to exp(-|t|^q)) the direction
    g/||g||_q is independent of ||g||_q, hence
    E[u_1^2] = E[g_1^2] / E[||g||_q^2]
             = Gamma(3/q) Gamma(d/q) / (Gamma(1/q) Gamma((d+2)/q)).
    """
    return math.exp(gammaln(3.0 / q) + gammaln(d / q)
                    - gammaln(1.0 / q) - gammaln((d + 2.0) / q))


def _lq_sphere_point(rng, d, q, radius):
    g = rng.gamma(1.0 / q, 1.0, size=d) ** (1.0 / q)
    g *= np.where(rng.random(d) < 0.5, -1.0, 1.0)
    return radius * g / lp_norm(g, q)


def _seeded_weight(rng, pool, d, l1_target):
    """Vector supported on a subset of ``pool`` with exact l1 norm."""
    k = max(len(pool) // 8, 1)
    idx = rng.choice(pool, size=k, replace=False)
    w = np.zeros(d)
    w[idx] = rng.standard_normal(k)
    w *= l1_target / lp_norm(w, 1)
    return w


def gen_l1lq(d, q, b1, r_q, seed, link_kind="absolute", noise_level=0.1,
             active_dim=None, holdout_size=5000):
    """l1-constrained linear model with features exactly on the lq sphere.

    With active_dim set, features live on the lq sphere of a seeded
    coordinate pool of that size (zero elsewhere); the norm bound still
    holds with equality.
    """
    if q < 2:
        raise InvalidParameterError("q must be >= 2")
    d_act = d if active_dim is None else int(active_dim)
    if not (1 <= d_act <= d):
        raise InvalidParameterError("active_dim out of range")
    init = rngmod.stream(seed, 3)
    pool = np.sort(init.choice(d, size=d_act, replace=False))
    w_star = _seeded_weight(init, pool, d, b1 / 2.0)
    link = LinkFunction(link_kind)
    sigma_diag = r_q**2 * _lq_sphere_coord_var(d_act, q)
    noise_var = noise_level**2 / 3.0

    def sample(rng):
        while True:
            u = _lq_sphere_point(rng, d_act, q, r_q)
            x = np.zeros(d)
            x[pool] = u
            eps = rng.uniform(-noise_level, noise_level)
            yield Example(x=x, y=float(w_star[pool] @ u) + eps)

    if link_kind == "square":
        def risk(w):
            delta = np.asarray(w, dtype=float) - w_star
            return sigma_diag * float(delta[pool] @ delta[pool]) + noise_var
        l_star = noise_var
        grad_bound = 2.0 * (1.5 * b1 * r_q + noise_level) * r_q
    else:
        cache = {}

        def risk(w):
            if not cache:
                hr = rngmod.stream(seed, 99)
                us = np.stack([_lq_sphere_point(hr, d_act, q, r_q)
                               for _ in range(holdout_size)])
                ys = us @ w_star[pool] + hr.uniform(-noise_level, noise_level,
                                                    size=holdout_size)
                cache["us"], cache["ys"] = us, ys
            a = cache["us"] @ np.asarray(w, dtype=float)[pool]
            return float(np.mean(np.abs(a - cache["ys"])))
        l_star = None
        grad_bound = link.lipschitz * r_q

    return ProblemInstance(dim=d, link=link, w_star=w_star, seed=seed, b1=b1,
                           q=q, r_q=r_q, grad_bound=grad_bound, risk=risk,
                           l_star=l_star, sigma_diag=sigma_diag,
                           _sample=sample)


def gen_sparse_regression(d, k, gamma, noise_level, seed):
    """k-sparse square-loss regression with identity covariance.

    Features have i.i.d. +-1 coordinates scaled by sqrt(gamma), so
    Sigma = gamma * I and the restricted eigenvalue is gamma by
    construction.  The constraint radius equals ||w*||_1.
    """
    if k > d:
        raise InvalidParameterError("sparsity k cannot exceed d")
    init = rngmod.stream(seed, 3)
    support = np.sort(init.choice(d, size=k, replace=False))
    w_star = np.zeros(d)
    w_star[support] = np.where(init.random(k) < 0.5, -1.0, 1.0) / k
    b1 = lp_norm(w_star, 1)
    scale = math.sqrt(gamma)
    link = LinkFunction("square")
    noise_var = noise_level**2 / 3.0

    def sample(rng):
        while True:
            x = scale * np.where(rng.random(d) < 0.5, -1.0, 1.0)
            eps = rng.uniform(-noise_level, noise_level)
            yield Example(x=x, y=float(w_star[support] @ x[support]) + eps)

    def risk(w):
        delta = np.asarray(w, dtype=float) - w_star
        return gamma * float(delta @ delta) + noise_var

    q = 2.0
    r_q = scale * math.sqrt(d)
    grad_bound = 2.0 * (2.0 * b1 * scale + noise_level) * r_q
    return ProblemInstance(dim=d, link=link, w_star=w_star, seed=seed, b1=b1,
                           q=q, r_q=r_q, grad_bound=grad_bound, risk=risk,
                           gamma=gamma, k_sparsity=k, l_star=noise_var,
                           sigma_diag=gamma, _sample=sample)


def gen_hide_and_seek(d, rho, j_star, seed):
    """Product +-1 distribution with coordinate j_star biased to mean 2*rho.

    The loss is linear, L(w) = -2*rho*w[j_star], minimized over the unit l1
    ball at e_{j_star}.
    """
    if not (0.0 <= rho <= 0.5):
        raise InvalidParameterError("rho must lie in [0, 1/2]")
    if not (0 <= j_star < d):
        raise InvalidParameterError("j_star out of range")
    link = LinkFunction("linear")
    w_star = np.zeros(d)
    w_star[j_star] = 1.0
    probs = np.full(d, 0.5)
    probs[j_star] = 0.5 + rho

    def sample(rng):
        while True:
            x = np.where(rng.random(d) < probs, 1.0, -1.0)
            yield Example(x=x, y=1.0)

    def risk(w):
        return -2.0 * rho * float(np.asarray(w, dtype=float)[j_star])

    return ProblemInstance(dim=d, link=link, w_star=w_star, seed=seed,
                           b1=1.0, q=math.inf, r_q=1.0, grad_bound=1.0,
                           risk=risk, l_star=-2.0 * rho, _sample=sample)


def gen_l2l2(d, b2, r2, seed, link_kind="square", noise_level=0.1,
             active_dim=None, holdout_size=5000):
    """l2/l2-bounded analogue of gen_l1lq (features on an l2 sphere)."""
    d_act = d if active_dim is None else int(active_dim)
    if not (1 <= d_act <= d):
        raise InvalidParameterError("active_dim out of range")
    init = rngmod.stream(seed, 3)
    pool = np.sort(init.choice(d, size=d_act, replace=False))
    w_pool = init.standard_normal(d_act)
    w_star = np.zeros(d)
    w_star[pool] = w_pool * (b2 / 2.0) / lp_norm(w_pool, 2)
    link = LinkFunction(link_kind)
    sigma_diag = r2**2 / d_act
    noise_var = noise_level**2 / 3.0

    def sample(rng):
        while True:
            g = rng.standard_normal(d_act)
            u = r2 * g / lp_norm(g, 2)
            x = np.zeros(d)
            x[pool] = u
            eps = rng.uniform(-noise_level, noise_level)
            yield Example(x=x, y=float(w_star[pool] @ u) + eps)

    if link_kind == "square":
        def risk(w):
            delta = np.asarray(w, dtype=float) - w_star
            return sigma_diag * float(delta[pool] @ delta[pool]) + noise_var
        l_star = noise_var
        grad_bound = 2.0 * (1.5 * b2 * r2 + noise_level) * r2
    else:
        cache = {}

        def risk(w):
            if not cache:
                hr = rngmod.stream(seed, 99)
                gs = hr.standard_normal((holdout_size, d_act))
                us = r2 * gs / np.linalg.norm(gs, axis=1, keepdims=True)
                ys = us @ w_star[pool] + hr.uniform(-noise_level, noise_level,
                                                    size=holdout_size)
                cache["us"], cache["ys"] = us, ys
            a = cache["us"] @ np.asarray(w, dtype=float)[pool]
            return float(np.mean(np.abs(a - cache["ys"])))
        l_star = None
        grad_bound = link.lipschitz * r2

    return ProblemInstance(dim=d, link=link, w_star=w_star, seed=seed,
                           b1=b2, q=2.0, r_q=r2, grad_bound=grad_bound,
                           risk=risk, l_star=l_star, sigma_diag=sigma_diag,
                           _sample=sample)


def gen_matrix_s1sq(d, q, b1, r_q, seed, noise_level=0.05, rank=2,
                    holdout_size=2000):
    """Low-rank matrix sensing; gradients exactly on the Schatten-q sphere."""
    if q < 2:
        raise InvalidParameterError("q must be >= 2")
    init = rngmod.stream(seed, 3)
    u = np.linalg.qr(init.standard_normal((d, rank)))[0]
    v = np.linalg.qr(init.standard_normal((d, rank)))[0]
    sig = np.sort(init.random(rank))[::-1] + 0.5
    sig *= (b1 / 2.0) / sig.sum()
    w_star = (u * sig) @ v.T
    link = LinkFunction("absolute")

    def draw_feature(rng):
        g = rng.standard_normal((d, d))
        uu, ss, vt = np.linalg.svd(g)
        ss = r_q * ss / lp_norm(ss, q)
        return (uu * ss) @ vt

    def sample(rng):
        while True:
            x = draw_feature(rng)
            eps = rng.uniform(-noise_level, noise_level)
            yield Example(x=x, y=float(np.sum(w_star * x)) + eps)

    cache = {}

    def risk(w):
        if not cache:
            hr = rngmod.stream(seed, 99)
            feats = [draw_feature(hr) for _ in range(holdout_size)]
            cache["xs"] = np.stack([f.ravel() for f in feats])
            cache["ys"] = cache["xs"] @ w_star.ravel() \
                + hr.uniform(-noise_level, noise_level, size=holdout_size)
        a = cache["xs"] @ np.asarray(w, dtype=float).ravel()
        return float(np.mean(np.abs(a - cache["ys"])))

    return ProblemInstance(dim=d, link=link, w_star=w_star, seed=seed, b1=b1,
                           q=q, r_q=r_q, grad_bound=link.lipschitz * r_q,
                           risk=risk, matrix=True, _sample=sample)
