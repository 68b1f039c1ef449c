"""Counter-based deterministic random streams.

Every uniform variate in a simulation is a pure function of
(master seed, replicate index, draw counter).  That property is what makes
replicates reproducible *and* schedule-independent: a replicate's draws do
not depend on how many other replicates ran before it, on chunking, or on
the number of worker threads.

The construction is the splitmix64 output function applied to a per-replicate
key plus a counter stride.  splitmix64's finalizer is a well-studied 64-bit
bijection (Steele, Lea & Flood 2014); walking its input by the golden-ratio
increment gives full-period, well-equidistributed output.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15  # 2**64 / golden ratio, the splitmix64 increment
_SUBSEED = 0xD1B54A32D192ED03  # distinct stride for deriving sub-seeds

_U64_30 = np.uint64(30)
_U64_27 = np.uint64(27)
_U64_31 = np.uint64(31)
_U64_11 = np.uint64(11)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_2_POW_MINUS_53 = 2.0 ** -53


def mix64(x: int) -> int:
    """splitmix64 finalizer on a Python integer (wrapped to 64 bits)."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer; `z` must be uint64."""
    z = z.copy()
    z ^= z >> _U64_30
    z *= _MUL1
    z ^= z >> _U64_27
    z *= _MUL2
    z ^= z >> _U64_31
    return z


def _to_unit(z: int) -> float:
    # Top 53 bits, centered on half-steps: output lies strictly inside (0, 1),
    # so inverse-CDF transforms never see 0 or 1 exactly.
    return ((z >> 11) + 0.5) * _2_POW_MINUS_53


def _to_unit_array(z: np.ndarray) -> np.ndarray:
    return ((z >> _U64_11).astype(np.float64) + 0.5) * _2_POW_MINUS_53


def stream_key(master_seed: int, replicate_index: int) -> int:
    """64-bit key of the stream for one replicate. Pure function."""
    if replicate_index < 0:
        raise ValueError(f"replicate_index must be >= 0, got {replicate_index}")
    return mix64((master_seed + (replicate_index + 1) * _GOLDEN) & _MASK64)


def stream_keys(master_seed: int, replicate_indices: np.ndarray) -> np.ndarray:
    """Vectorized `stream_key` over an array of replicate indices."""
    idx = np.asarray(replicate_indices, dtype=np.uint64)
    seed = np.uint64(master_seed & _MASK64)
    golden = np.uint64(_GOLDEN)
    return mix64_array(seed + (idx + np.uint64(1)) * golden)


def counter_uniform(key: int, counter: int) -> float:
    """The `counter`-th uniform variate of the stream with the given key."""
    return _to_unit(mix64((key + (counter + 1) * _GOLDEN) & _MASK64))


def counter_uniform_array(keys: np.ndarray, counter: int) -> np.ndarray:
    """One uniform per key, all at the same draw counter."""
    stride = np.uint64(((counter + 1) * _GOLDEN) & _MASK64)
    return _to_unit_array(mix64_array(keys + stride))


def derive_substream_seed(master_seed: int, label: int) -> int:
    """A 64-bit sub-seed for an independent purpose (e.g. a second estimator).

    Uses a stride constant different from the replicate-key stride so
    sub-seeds never collide with replicate keys of the parent seed.
    """
    return mix64((master_seed + (label + 1) * _SUBSEED) & _MASK64)


class RandomStream:
    """Stateful view of a counter-based stream: repeated `uniform()` calls
    walk the counter.  Two streams with the same key replay identically."""

    __slots__ = ("key", "counter")

    def __init__(self, key: int, counter: int = 0):
        self.key = key & _MASK64
        self.counter = counter

    def uniform(self) -> float:
        u = counter_uniform(self.key, self.counter)
        self.counter += 1
        return u

    def uniforms(self, n: int) -> np.ndarray:
        """The next `n` uniforms, identical to `n` successive `uniform()` calls."""
        counters = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        golden = np.uint64(_GOLDEN)
        out = _to_unit_array(mix64_array(np.uint64(self.key) + counters * golden))
        self.counter += n
        return out

    def __repr__(self) -> str:  # pragma: no cover
        return f"RandomStream(key={self.key:#018x}, counter={self.counter})"


def derive_replicate_stream(master_seed: int, replicate_index: int) -> RandomStream:
    """Independent reproducible stream for one replicate of one experiment.

    The mapping (seed, index) -> stream is pure, so the same pair always
    yields the same draw sequence, regardless of process, thread, or the
    order in which replicates execute.
    """
    return RandomStream(stream_key(master_seed, replicate_index))
