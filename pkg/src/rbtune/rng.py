"""Named random streams derived from one integer seed.

Each stream is seeded from a hash of ``(seed, name)``, so adding draws to one
consumer never shifts the numbers seen by another.
"""

from __future__ import annotations

import hashlib

import numpy as np

STREAM_NAMES = ("prior", "device-shots", "spsa-perturbations", "resampling", "diffusion")


def stream_seed(seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{int(seed)}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class RngStreams:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict = {}

    def __getitem__(self, name: str) -> np.random.Generator:
        if name not in self._streams:
            self._streams[name] = np.random.default_rng(stream_seed(self.seed, name))
        return self._streams[name]
