"""Seeded random streams.

All randomness goes through :class:`numpy.random.Generator` backed by PCG64,
which produces the same stream for the same seed on every platform.
Independent substreams are derived from ``(master_seed, kind, index...)``
through :class:`numpy.random.SeedSequence` spawn keys, so a Monte Carlo draw
or sweep cell gets the same numbers no matter which worker runs it.
"""
import zlib

import numpy as np

MASK64 = (1 << 64) - 1


def make_rng(seed):
    """Generator for a 64-bit unsigned seed."""
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def kind_key(kind):
    """Stable 32-bit key for a string label (CRC32 of its UTF-8 bytes)."""
    return zlib.crc32(kind.encode("utf-8"))


def substream(seed, kind, *index):
    """Generator for substream ``hash(seed, kind, *index)``.

    The derivation is ``SeedSequence(seed, spawn_key=(crc32(kind), *index))``
    feeding PCG64; any implementation reproducing that gets the same draws.
    """
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=(kind_key(kind), *map(int, index)))
    return np.random.Generator(np.random.PCG64(ss))


def as_rng(rng):
    """Accept a Generator, an int seed or None (seed 0)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(0 if rng is None else rng)
