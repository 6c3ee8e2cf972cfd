"""Deterministic seed derivation for per-record random streams.

A measurement run owns one master seed; the stream for record ``i`` is
``mix64(master + i)`` (SplitMix64 finalizer). Any single record can be
regenerated without touching the rest of the run.
"""

_MASK64 = (1 << 64) - 1


def mix64(x: int) -> int:
    """SplitMix64 finalizer: avalanche a 64-bit value."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def record_seed(master: int, index: int) -> int:
    """Seed for record ``index`` of a run with the given master seed."""
    return mix64((master + index) & _MASK64)


def noise_seed(rec_seed: int) -> int:
    """Detector-noise seed for a record, independent of its placement stream."""
    return mix64(rec_seed)
