"""Deterministic counter-based randomness.

Every random quantity in this package is a pure function of a 64-bit key and
a 64-bit counter:

    u = unit_uniform(key, counter)          # double in (0, 1)

Keys identify independent streams (one per simulated path / replicate) and
are derived from a master seed with ``derive_substream``.  Counters address
individual draws inside a stream; consumers reserve fixed counter slots for
each logical draw (see ``reinwalk.reinforce`` for the walk slot layout), so
a draw's value never depends on how many other draws were actually needed.

This is what makes the whole laboratory reproducible to the byte: streaming
and vectorized engines, any batch partition, and any worker count evaluate
the same (key, counter) pairs and therefore the same floats.

The mixer is the splitmix64 finalizer (Steele, Lea & Flood's constants), a
bijection on 64-bit words with well-tested equidistribution.  Distinct odd
strides for key derivation and counter stepping keep the two address spaces
from aliasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1

# splitmix64 increment (key derivation stride) and finalizer multipliers.
KEY_STRIDE = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
# Counter stride: a different odd constant so per-stream counter sequences
# never walk along the key-derivation lattice.
COUNTER_STRIDE = 0xD1342543DE82EF95

_U53_SCALE = 2.0 ** -53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a Python int, reduced mod 2**64."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return (z ^ (z >> 31)) & MASK64


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vector splitmix64 finalizer.  ``z`` must be uint64; wraps mod 2**64."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(31)
    return z


def derive_substream(master_seed: int, replicate_index: int) -> int:
    """Key for the ``replicate_index``-th independent stream under a seed.

    Defined as mix64(master_seed + (replicate_index + 1) * KEY_STRIDE).
    The affine step is injective mod 2**64 and mix64 is a bijection, so
    distinct replicate indices always get distinct keys.
    """
    if replicate_index < 0:
        raise ValueError("replicate_index must be >= 0")
    return mix64((master_seed + (replicate_index + 1) * KEY_STRIDE) & MASK64)


def derive_substreams(master_seed: int, replicate_indices: np.ndarray) -> np.ndarray:
    """Vector version of :func:`derive_substream` (returns uint64 array)."""
    idx = np.asarray(replicate_indices)
    if idx.size and np.issubdtype(idx.dtype, np.signedinteger) and int(idx.min()) < 0:
        raise ValueError("replicate indices must be >= 0")
    idx = np.atleast_1d(idx.astype(np.uint64))
    z = np.uint64(master_seed & MASK64) + (idx + np.uint64(1)) * np.uint64(KEY_STRIDE)
    return mix64_array(z)


def unit_uniform(key: int, counter: int) -> float:
    """Uniform double in the open interval (0, 1) at a (key, counter) address.

    Uses the top 53 bits of the mixed word, offset by half an ulp so that
    neither endpoint is attainable (a Gaussian inverse-CDF transform of the
    result is always finite).
    """
    x = mix64((key + (counter + 1) * COUNTER_STRIDE) & MASK64)
    return ((x >> 11) + 0.5) * _U53_SCALE


def unit_uniform_array(keys, counters) -> np.ndarray:
    """Broadcasted vector version of :func:`unit_uniform`.

    ``keys`` and ``counters`` are uint64 arrays (or ints); the result has
    their broadcast shape.  Bit-identical to the scalar path.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    shape = np.broadcast_shapes(keys.shape, counters.shape)
    # 0-d operands go through numpy's scalar path, which warns on wraparound;
    # arrays wrap silently, so lift everything to >= 1-d and reshape back.
    z = np.atleast_1d(keys) + (np.atleast_1d(counters) + np.uint64(1)) * np.uint64(COUNTER_STRIDE)
    x = mix64_array(z)
    u = ((x >> np.uint64(11)).astype(np.float64) + 0.5) * _U53_SCALE
    return u.reshape(shape)


@dataclass
class RngStream:
    """Sequential view of a counter-based stream.

    ``next_uniform`` consumes one counter slot at a time; ``jump_to`` lets a
    caller re-anchor at an absolute slot (used by engines that reserve fixed
    slots per step).
    """

    key: int
    counter: int = 0

    def next_uniform(self) -> float:
        u = unit_uniform(self.key, self.counter)
        self.counter += 1
        return u

    def jump_to(self, counter: int) -> None:
        self.counter = counter
