"""Named random streams derived from a single master seed.

Every source of randomness in a run is addressed by a path of names, for
example ``("branching", 3, "root")``. The path is hashed into the
``spawn_key`` of a :class:`numpy.random.SeedSequence`, so two streams with
different paths are statistically independent and the same path always
yields the same stream, no matter how many workers are used or in which
order replicas are scheduled.
"""

import hashlib

import numpy as np

StreamKey = str | int


def _key_word(part: StreamKey) -> int:
    digest = hashlib.sha256(repr(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def seed_sequence(seed: int, *path: StreamKey) -> np.random.SeedSequence:
    """Returns the seed sequence for a named sub-stream.

    Args:
        seed: The master seed of the run.
        path: The names identifying the sub-stream.

    Returns:
        A seed sequence whose spawn key encodes the path.
    """
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(_key_word(p) for p in path))


def substream(seed: int, *path: StreamKey) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *path)))
