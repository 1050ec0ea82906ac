"""Beam-splitter bit resolver: two pulse trains in, one bit stream out.

A pulse from detector 0 alone yields bit 0, from detector 1 alone bit 1.
When the earliest unconsumed pulses of the two trains lie closer than the
coincidence window, both are dropped and no bit is emitted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

DEFAULT_WINDOW_NS = 12.0


@dataclass(frozen=True)
class ResolverConfig:
    coincidence_window_ns: float = DEFAULT_WINDOW_NS

    def __post_init__(self):
        w = self.coincidence_window_ns
        if not (w >= 0 and np.isfinite(w)):
            raise ValueError(f"coincidence window must be finite and >= 0, got {w}")


@dataclass(frozen=True, eq=False)
class BitStream:
    """Resolved bits, one ``uint8`` (0 or 1) per element."""

    bits: np.ndarray
    n_coincidences: int = 0

    @property
    def n_ones(self) -> int:
        return int(np.count_nonzero(self.bits))

    @property
    def n_zeros(self) -> int:
        return self.bits.size - self.n_ones

    def __len__(self):
        return self.bits.size

    def packed(self) -> bytes:
        return np.packbits(self.bits, bitorder="little").tobytes()

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)


@numba.njit(cache=True, nogil=True)
def _merge(t0, t1, window, drain):
    # Greedy two-cursor merge; with drain=False it stops as soon as either
    # input runs out, so callers can append the next chunk and resume.
    n0 = t0.size
    n1 = t1.size
    bits = np.empty(n0 + n1, dtype=np.uint8)
    i = 0
    j = 0
    k = 0
    coinc = 0
    while i < n0 and j < n1:
        a = t0[i]
        b = t1[j]
        d = abs(a - b)
        if d < window or d == 0.0:
            i += 1
            j += 1
            coinc += 1
        elif a < b:
            bits[k] = 0
            k += 1
            i += 1
        else:
            bits[k] = 1
            k += 1
            j += 1
    if drain:
        while i < n0:
            bits[k] = 0
            k += 1
            i += 1
        while j < n1:
            bits[k] = 1
            k += 1
            j += 1
    return bits[:k].copy(), i, j, coinc


def _as_times(train) -> np.ndarray:
    ts = getattr(train, "timestamps", train)
    return np.ascontiguousarray(ts, dtype=np.float64)


def resolve_bits(train0, train1, cfg: ResolverConfig | None = None) -> BitStream:
    """Resolve two complete trains (``PulseTrain`` or timestamp arrays)."""
    cfg = cfg or ResolverConfig()
    bits, _, _, coinc = _merge(_as_times(train0), _as_times(train1),
                               float(cfg.coincidence_window_ns), True)
    return BitStream(bits, int(coinc))


class StreamingResolver:
    """Resolver over chunked trains; gives exactly the same bits as
    :func:`resolve_bits` on the concatenated trains."""

    def __init__(self, cfg: ResolverConfig | None = None):
        self.cfg = cfg or ResolverConfig()
        self._buf = [np.empty(0), np.empty(0)]
        self._chunks: list[np.ndarray] = []
        self.n_bits = 0
        self.n_coincidences = 0
        self.consumed = [0, 0]
        self.t_last = 0.0

    def needs(self, detector: int) -> bool:
        return self._buf[detector].size == 0

    def push(self, detector: int, times: np.ndarray) -> None:
        buf = self._buf[detector]
        self._buf[detector] = np.concatenate((buf, times)) if buf.size else times

    def step(self) -> None:
        b0, b1 = self._buf
        bits, i, j, coinc = _merge(b0, b1, float(self.cfg.coincidence_window_ns), False)
        if i:
            self.t_last = max(self.t_last, b0[i - 1])
        if j:
            self.t_last = max(self.t_last, b1[j - 1])
        self._buf = [b0[i:], b1[j:]]
        self.consumed[0] += i
        self.consumed[1] += j
        self.n_coincidences += coinc
        self.n_bits += bits.size
        self._chunks.append(bits)

    def finish(self, drain: bool = False) -> BitStream:
        if drain:
            b0, b1 = self._buf
            bits, i, j, coinc = _merge(b0, b1, float(self.cfg.coincidence_window_ns), True)
            self.consumed[0] += i
            self.consumed[1] += j
            self.n_coincidences += coinc
            self.n_bits += bits.size
            self._chunks.append(bits)
            self._buf = [np.empty(0), np.empty(0)]
        bits = np.concatenate(self._chunks) if self._chunks else np.empty(0, np.uint8)
        return BitStream(bits, self.n_coincidences)
