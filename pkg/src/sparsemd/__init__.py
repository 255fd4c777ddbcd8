"""Distributed statistical learning with sublinear communication, simulated.

Sparsified lp mirror descent between serial machines with bit-exact
message accounting, a restarted fast-rate variant, randomly projected
OGD, and Schatten matrix versions, plus synthetic problem generators and
a verification harness.
"""

from . import datagen, harness, losses, mirror, protocols, sparsify, vecspace
from .errors import (InvalidConfigError, InvalidParameterError,
                     MalformedMessageError, NumericalFailureError)

__version__ = "0.1.0"

__all__ = [
    "datagen", "harness", "losses", "mirror", "protocols", "sparsify",
    "vecspace", "InvalidConfigError", "InvalidParameterError",
    "MalformedMessageError", "NumericalFailureError", "__version__",
]
