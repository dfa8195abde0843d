"""Counter-based random streams keyed by (seed, *key).

Every consumer gets its own Philox stream derived from a ``SeedSequence``
spawn key, so trial ``i`` sees the same numbers no matter how many other
trials run, or in which order.
"""
import numpy as np

# purpose tags for per-trial streams
THETA_STAR = 0
DESIGN = 1
RESPONSES = 2
INIT = 3
PROBE = 4


def stream(seed, *key):
    """Return a ``Generator`` for the stream identified by ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    """Accept a Generator, an int seed, or None and return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.Generator(np.random.Philox())
    return stream(rng)


def derive_seed(rng):
    """Draw a fresh 64-bit seed from ``rng``."""
    return int(as_generator(rng).integers(0, 2**63 - 1, dtype=np.int64))
