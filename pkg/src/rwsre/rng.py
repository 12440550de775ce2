"""Deterministic substream derivation from a single master seed.

Every stochastic routine in the package draws from a named substream derived
from one master seed.  The derivation is a pure function of the master seed
and a path of identifiers, so any pipeline is reproducible bit-for-bit given
the master seed, regardless of execution order or worker count.

Scheme (id ``seedseq-sha256-v1``): each path component is mapped to a 32-bit
word -- non-negative integers are used as-is (wide ones are folded through
SHA-256), strings are folded through SHA-256 of their UTF-8 bytes -- and the
word sequence becomes the ``spawn_key`` of a ``numpy.random.SeedSequence``
rooted at the master seed.
"""

from __future__ import annotations

import hashlib

import numpy as np

SCHEME_ID = "seedseq-sha256-v1"

_WORD = 2**32


def _component_word(part) -> int:
    if isinstance(part, (int, np.integer)):
        part = int(part)
        if 0 <= part < _WORD:
            return part
        data = str(part).encode()
    elif isinstance(part, str):
        data = part.encode()
    else:
        raise TypeError(f"substream path components must be int or str, got {type(part)!r}")
    return int.from_bytes(hashlib.sha256(data).digest()[:4], "little")


def seed_sequence(master_seed: int, *path) -> np.random.SeedSequence:
    """SeedSequence for the substream named by ``path`` under ``master_seed``."""
    key = tuple(_component_word(p) for p in path)
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)


def substream(master_seed: int, *path) -> np.random.Generator:
    """Generator for the substream named by ``path`` under ``master_seed``."""
    return np.random.default_rng(seed_sequence(master_seed, *path))


def kernel_seed(rng: np.random.Generator) -> int:
    """Draw a 32-bit seed for a compiled kernel from an existing stream."""
    return int(rng.integers(1, 2**31 - 1))
