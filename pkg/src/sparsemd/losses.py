"""Link functions and loss / subgradient oracles for linear models."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .vecspace import lp_norm


@dataclass
class Example:
    x: np.ndarray
    y: float


_SMOOTH_KINDS = {"square": 2.0, "logistic": 0.25}
_KINDS = ("square", "logistic", "hinge", "absolute", "linear")


@dataclass
class LinkFunction:
    kind: str
    lipschitz: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidParameterError(f"unknown link kind {self.kind!r}")
        if self.lipschitz <= 0:
            raise InvalidParameterError("lipschitz constant must be positive")

    @property
    def smoothness(self):
        """Second-derivative bound of the scalar link, None if non-smooth."""
        return _SMOOTH_KINDS.get(self.kind)

    def value(self, a, y):
        if self.kind == "square":
            return (a - y) ** 2
        if self.kind == "logistic":
            # stable log(1 + exp(-y*a))
            t = -y * a
            return t + math.log1p(math.exp(-t)) if t > 0 else math.log1p(math.exp(t))
        if self.kind == "hinge":
            return max(1.0 - a * y, 0.0)
        if self.kind == "absolute":
            return abs(a - y)
        return -y * a  # linear

    def derivative(self, a, y):
        """Scalar subgradient; 0 is chosen at kinks."""
        if self.kind == "square":
            return 2.0 * (a - y)
        if self.kind == "logistic":
            t = -y * a
            sig = 1.0 / (1.0 + math.exp(-t)) if t < 50 else 1.0
            return -y * sig
        if self.kind == "hinge":
            margin = a * y
            if margin < 1.0:
                return -y
            return 0.0
        if self.kind == "absolute":
            r = a - y
            return math.copysign(1.0, r) if r != 0 else 0.0
        return -y  # linear


def loss(link, w, z):
    return link.value(float(np.dot(w, z.x)), z.y)


def subgradient(link, w, z):
    return link.derivative(float(np.dot(w, z.x)), z.y) * z.x


def smoothness_selfbound_check(link, w, z, q, r_q):
    """Whether ||grad||_q^2 <= 4 * beta_q * loss holds at (w, z).

    beta_q is instantiated as beta * r_q^2 from the scalar smoothness beta
    and the feature lq bound r_q.
    """
    beta = link.smoothness
    if beta is None:
        raise InvalidParameterError(
            f"self-bounding check needs a smooth link, got {link.kind!r}")
    beta_q = beta * r_q**2
    g = subgradient(link, w, z)
    return lp_norm(g, q) ** 2 <= 4.0 * beta_q * loss(link, w, z) + 1e-12
