"""Counter-based splittable random streams.

Every Monte Carlo routine draws from a Philox generator whose key is a hash
of (seed, *labels).  A routine that shards work across workers derives one
stream per fixed-size block, keyed by the block index, so results are
bit-identical for a given seed regardless of the worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np

BLOCK = 65_536  # paths/samples per stream block


def stream_key(seed, *labels):
    """Stable 128-bit Philox key derived from the seed and string/int labels."""
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(seed)).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def stream(seed, *labels):
    """Fresh Generator for the given (seed, labels) address."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *labels)))


def block_count(total, block=BLOCK):
    return (int(total) + block - 1) // block


def block_sizes(total, block=BLOCK):
    """Sizes of the per-stream blocks covering ``total`` draws."""
    total = int(total)
    sizes = [block] * (total // block)
    if total % block:
        sizes.append(total % block)
    return sizes
