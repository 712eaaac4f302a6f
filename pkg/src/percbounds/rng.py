"""Counter-based random streams keyed by lattice identifiers.

A uniform is a pure function of ``(master_seed, replica, identifier)``:
starting from the stream key, each integer of the identifier is xored
into a 64-bit state which is then run through the SplitMix64 finalizer.
Nothing depends on the order in which identifiers are queried, which is
what lets couplings interleave queries freely while staying reproducible.

The arithmetic is plain 64-bit wrap-around, mirrored exactly by the
compiled kernels in :mod:`percbounds._kernels`.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(master_seed: int, replica: int = 0) -> int:
    """64-bit key of replica ``replica`` under ``master_seed``."""
    if not 0 <= master_seed <= MASK64:
        raise ValueError(f"master seed must be an unsigned 64-bit value, got {master_seed}")
    if replica < 0:
        raise ValueError(f"replica must be non-negative, got {replica}")
    k = mix64((master_seed + GOLDEN) & MASK64)
    return mix64((k + (replica + 1) * GOLDEN) & MASK64)


def flatten(ident) -> tuple[int, ...]:
    """Integers of a (possibly one-level nested) identifier tuple."""
    out = []
    for c in ident:
        if isinstance(c, tuple):
            out.extend(c)
        else:
            out.append(c)
    return tuple(out)


def hash_ints(key: int, ints) -> int:
    # A plain multiply-xor fold is not enough: xoring in -1 is a bitwise
    # NOT, and mirror-image sites came out correlated.
    h = key
    for c in ints:
        h ^= c & MASK64
        h = ((h ^ (h >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        h = ((h ^ (h >> 27)) * 0x94D049BB133111EB) & MASK64
        h ^= h >> 31
    return h


def uniform_ints(key: int, ints) -> float:
    """Uniform in [0, 1) for the flat integer identifier ``ints``."""
    return (hash_ints(key, ints) >> 11) * _INV_2_53


def uniform(key: int, ident) -> float:
    return uniform_ints(key, flatten(ident))
