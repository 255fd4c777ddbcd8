"""Counter-based RNG streams.

All randomness in the package flows through Philox generators so that a
(seed, stream id) pair fully determines a stream, independent of how many
other streams were consumed.  Distinct machines / trials get distinct ids.
"""

import numpy as np

_STREAM_MOD = 2**64


def stream(seed, *ids):
    """Return a Generator keyed by ``seed`` and a tuple of sub-stream ids."""
    key = int(seed) % _STREAM_MOD
    sub = 0
    for i in ids:
        sub = (sub * 1_000_003 + int(i) + 1) % _STREAM_MOD
    return np.random.Generator(np.random.Philox(key=key + (sub << 64)))
