"""Named random streams derived from one replication seed.

Each consumer gets its own generator so that, for a fixed seed, environment
draws do not depend on how much randomness the learner or the oracle used.
That is what makes cross-policy comparisons paired.
"""
import numpy as np

STREAMS = {
    "instance": 0,
    "reward": 1,
    "strategy": 2,
    "policy": 3,
    "oracle": 4,
}


def stream(seed, name, index=None):
    """Generator for stream ``name`` (optionally per arm ``index``) under ``seed``."""
    key = (STREAMS[name],) if index is None else (STREAMS[name], int(index))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def arm_streams(seed, name, m):
    return [stream(seed, name, i) for i in range(m)]
