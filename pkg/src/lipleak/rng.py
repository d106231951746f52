"""Deterministic 64-bit PRNG used wherever the harness needs reproducible draws.

The generator is SplitMix64 (Steele, Lea & Flood's mixing constants), chosen
because its entire state is a single 64-bit word and the update rule fits in a
few lines, so any other implementation of this harness can reproduce the exact
same stream from the same seed.  The algorithm:

    state <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z <- state
    z <- ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z <- ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output <- z XOR (z >> 31)

Seeding: the initial state is the seed itself, taken modulo 2^64.  Bounded
draws use plain modulo reduction (``next_below(n) = next_u64() mod n``); the
modulo bias is irrelevant for pairing but the rule must stay fixed for
cross-implementation agreement.
"""

MASK64 = 0xFFFFFFFFFFFFFFFF

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """SplitMix64 stream seeded from a 64-bit unsigned integer."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        """Draw an integer in [0, n) via modulo reduction."""
        if n <= 0:
            raise ValueError(f"n must be positive, got {n}")
        return self.next_u64() % n
