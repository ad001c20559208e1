"""Counter-based random streams.

Every stream is a Philox generator keyed by (seed, stream tag, replica), so
draws for one replica never depend on how many other replicas exist or in
which order they are evaluated.
"""

import numpy as np
import scipy.special

MASK64 = (1 << 64) - 1
REPLICA_BITS = 56

# stream tags keep independent uses of the same (seed, replica) apart
SYNTHESIS = 1
NETWORK = 2
POINTS = 3


def philox_key(seed, replica=0, stream=0):
    replica = int(replica)
    if not 0 <= replica < 1 << REPLICA_BITS:
        raise ValueError("replica index out of range")
    return np.array([int(seed) & MASK64, (int(stream) << REPLICA_BITS) | replica], dtype=np.uint64)


def generator(seed, replica=0, stream=0):
    """numpy Generator on a keyed Philox stream."""
    return np.random.Generator(np.random.Philox(key=philox_key(seed, replica, stream)))


def uniforms(seed, replica, stream, n):
    """First ``n`` uniforms in (0, 1) of a keyed stream, one per 64-bit counter word.

    Element k depends only on (seed, replica, stream, k).
    """
    raw = np.random.Philox(key=philox_key(seed, replica, stream)).random_raw(int(n))
    return ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53


def normals(seed, replica, stream, n):
    """Standard normals by inverse CDF of ``uniforms``."""
    return scipy.special.ndtri(uniforms(seed, replica, stream, n))
