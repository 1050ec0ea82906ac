"""Seedable random streams and the variate transforms used by the simulator.

Every stream is a NumPy ``Generator`` driven by the PCG64 bit generator
(O'Neill's permuted congruential generator, 128-bit state, period 2**128).
PCG64's output sequence for a given seed is fixed by NumPy's bit-generator
stability guarantee, so a seed reproduces the same numbers on any platform.

Child seeds for parallel work come from :func:`derive_seed`, which applies
the SplitMix64 finalizer to ``master + (index + 1) * 0x9E3779B97F4A7C15``.
The finalizer is a bijection on 64-bit words and the golden-ratio increment
is odd, so distinct indices can never collide for a fixed master seed.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """SplitMix64 output function (Steele, Lea & Flood 2014)."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, index: int) -> int:
    """Return the 64-bit seed of child stream ``index`` of ``master``."""
    if index < 0:
        raise ValueError(f"index must be non-negative, got {index}")
    return splitmix64((master & MASK64) + (index + 1) * GOLDEN_GAMMA)


def parse_seed(text: str | int) -> int:
    """Accept a seed as an int or as decimal / ``0x`` hex text."""
    if isinstance(text, int):
        value = text
    else:
        value = int(str(text).strip(), 0)
    if not 0 <= value <= MASK64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {text!r}")
    return value


class RngState:
    """One independent random stream.

    Uniform variates lie in (0, 1]: zero is excluded so that ``-log(u)`` is
    always finite. States must not be shared between concurrent workers.
    """

    def __init__(self, seed: int):
        self.seed = parse_seed(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self) -> float:
        return 1.0 - self._gen.random()

    def uniform_array(self, n: int) -> np.ndarray:
        # random() yields k * 2**-53 with k < 2**53, so 1 - r is exact and > 0
        return 1.0 - self._gen.random(n)

    def exp_variate(self, tau: float) -> float:
        """Exponential variate with mean ``tau`` by inversion."""
        check_positive(tau, "tau")
        return -tau * np.log(self.uniform())

    def exp_array(self, tau: float, n: int) -> np.ndarray:
        check_positive(tau, "tau")
        return -tau * np.log(self.uniform_array(n))


def exp_from_uniform(u, tau):
    """The inversion transform ``-tau * ln(u)`` on its own, for u in (0, 1]."""
    return -tau * np.log(u)


def check_positive(value: float, name: str) -> None:
    if not (value > 0 and np.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
