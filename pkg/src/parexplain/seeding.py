"""One user seed fanned out to independent, named random streams."""

from __future__ import annotations

import zlib

import numpy as np


def derive(seed: int, name: str) -> int:
    """Stable sub-seed for subsystem ``name``."""
    seq = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode())])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(derive(seed, name))
