"""Seeded, stream-separated random generators"""

import numpy as np

# Bit generator behind every chain; artifacts record this name.
RNG_ALGORITHM = "PCG64"


def make_rng(seed: int, stream_id: int = 0) -> np.random.Generator:
    """
    Generator for (seed, stream_id) on the ``RNG_ALGORITHM`` bit generator.

    Streams are separated through the SeedSequence spawn key, so chains with
    the same seed and different stream ids are statistically independent and
    any (seed, stream_id) pair reproduces its draws bit for bit.
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(stream_id,))
    bit_generator = getattr(np.random, RNG_ALGORITHM)
    return np.random.Generator(bit_generator(sequence))
