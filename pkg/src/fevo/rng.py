"""Counter-based random streams.

A stream is the triple ``(seed, stream, counter)``.  Block ``c`` of stream
``(seed, id)`` is Philox4x64-10 with key ``(seed, id)`` and counter
``(c, 0, 0, 0)``: four 64-bit words, each mapped to a double in (0, 1).
Distinct ``(seed, id)`` pairs are distinct Philox keys, so streams never
share a block, and every variate is a pure function of its position.

Increment sampling allocates one *window* of ``WINDOW`` consecutive blocks
per draw, so the uniforms used by draw ``m`` do not depend on how many the
previous draw consumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import philox4x64

WINDOW_BITS = 24
WINDOW = 1 << WINDOW_BITS  # blocks per increment draw
SLOTS_PER_WINDOW = 4 * WINDOW
_MASK64 = (1 << 64) - 1
_SCALE = 2.0**-52


def to_unit(words: np.ndarray) -> np.ndarray:
    """Map uint64 words to doubles in the open interval (0, 1)."""
    # top 52 bits plus one half: (k + 1/2) 2^-52 is exact, so 0 and 1 never occur
    return ((words >> np.uint64(12)).astype(np.float64) + 0.5) * _SCALE


@dataclass
class RngStream:
    """Position in one counter-based stream.

    Sampling functions advance ``counter``; use :meth:`copy` to replay.
    """

    seed: int
    stream: int = 0
    counter: int = 0

    def __post_init__(self):
        for name in ("seed", "stream", "counter"):
            v = int(getattr(self, name))
            if not 0 <= v <= _MASK64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer")
            setattr(self, name, v)

    def copy(self) -> "RngStream":
        return RngStream(self.seed, self.stream, self.counter)

    def blocks(self, n: int) -> np.ndarray:
        """Next ``n`` raw blocks, shape ``(n, 4)``."""
        ctr = np.uint64(self.counter) + np.arange(n, dtype=np.uint64)
        out = philox4x64(np.uint64(self.seed), np.uint64(self.stream), ctr)
        self.counter = (self.counter + n) & _MASK64
        return out

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` doubles in (0, 1), consuming ``ceil(n / 4)`` blocks."""
        return to_unit(self.blocks(-(-n // 4)).reshape(-1)[:n])

    def take_windows(self, m: int) -> np.ndarray:
        """Reserve ``m`` windows; returns their starting block counters."""
        bases = np.uint64(self.counter) + np.uint64(WINDOW) * np.arange(m, dtype=np.uint64)
        self.counter = (self.counter + m * WINDOW) & _MASK64
        return bases


class WindowDraws:
    """Uniforms indexed by (row, slot); row ``r`` reads the window at ``bases[r]``.

    Contiguous slot ranges are cached so several transforms over the same rows
    (e.g. different start points sharing common random numbers) pay for the
    Philox rounds once.
    """

    def __init__(self, seed: int, streams, bases):
        self.seed = np.uint64(seed)
        streams = np.asarray(streams, dtype=np.uint64)
        bases = np.asarray(bases, dtype=np.uint64)
        if streams.ndim == 0 and bases.ndim == 0:
            streams = streams.reshape(1)
        if streams.shape != bases.shape:
            shape = np.broadcast_shapes(streams.shape, bases.shape)
            streams = np.broadcast_to(streams, shape)
            bases = np.broadcast_to(bases, shape)
        self.streams, self.bases = streams, bases
        self.rows = self.bases.shape[0]
        self._cache: dict[tuple[int, int], np.ndarray] = {}

    def slots(self, lo: int, hi: int) -> np.ndarray:
        """Uniforms for slots ``lo..hi-1`` of every row, shape ``(rows, hi - lo)``."""
        key = (lo, hi)
        got = self._cache.get(key)
        if got is None:
            b0, b1 = lo // 4, -(-hi // 4)
            nb = b1 - b0
            ctr = self.bases[:, None] + np.arange(b0, b1, dtype=np.uint64)[None, :]
            words = philox4x64(self.seed, self.streams[:, None], ctr).reshape(self.rows, nb * 4)
            got = to_unit(words[:, lo - 4 * b0 : hi - 4 * b0])
            self._cache[key] = got
        return got

    def pick(self, rows: np.ndarray, slots: np.ndarray) -> np.ndarray:
        """Uniforms at arbitrary (row, slot) pairs."""
        rows = np.asarray(rows, dtype=np.int64)
        slots = np.asarray(slots, dtype=np.uint64)
        ctr = self.bases[rows] + slots // np.uint64(4)
        words = philox4x64(self.seed, self.streams[rows], ctr)
        lane = (slots % np.uint64(4)).astype(np.int64)
        return to_unit(words[np.arange(rows.shape[0]), lane])
