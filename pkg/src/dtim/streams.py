"""Reproducible random substreams on top of the Philox counter-based generator.

Two layouts are used:

* fixed-width rows: row ``r`` of width ``w`` owns Philox blocks
  ``[r * ceil(w / 4), (r + 1) * ceil(w / 4))``; any range of rows can be
  produced without touching the others (Monte Carlo runs);
* batches: batch ``b`` owns the counter range whose second 64-bit word is
  ``b`` (RR-set sampling, where draws per sample vary).
"""

from __future__ import annotations

import numpy as np

_TO_UNIT = 2.0**-53


def stream_key(seed: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(2, np.uint64)


def uniform_rows(seed: int, start_row: int, rows: int, width: int) -> np.ndarray:
    """Uniforms in [0, 1) for rows ``start_row .. start_row + rows - 1``."""
    blocks = max(1, -(-width // 4))
    start = start_row * blocks
    counter = [start & 0xFFFFFFFFFFFFFFFF, start >> 64, 0, 0]
    raw = np.random.Philox(key=stream_key(seed), counter=counter).random_raw(rows * blocks * 4)
    unit = (raw >> np.uint64(11)).astype(np.float64) * _TO_UNIT
    return unit.reshape(rows, blocks * 4)[:, :width]


def batch_generator(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(seed), counter=[0, batch, 0, 0]))


class UniformBuffer:
    """Scalar uniform draws served from bulk blocks of a generator."""

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self._rng = rng
        self._block = block
        self._buf: list[float] = []
        self._pos = 0

    def next(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._rng.random(self._block).tolist()
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return x
