"""Fixed-length bitstrings and index sets.

Bit positions are 1-based and count from the most significant end, so
``BitString.from_text("10")`` has bit 1 equal to 1 and bit 2 equal to 0.
Values are stored as plain integers, which keeps hashing and bitwise
operations cheap even for strings of 2**16 bits and more.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator


@dataclass(frozen=True, slots=True)
class BitString:
    """An immutable string over {0,1} of explicit length (possibly zero)."""

    length: int
    value: int

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ValueError(f"length must be >= 0, got {self.length}")
        if self.value < 0 or self.value >> self.length:
            raise ValueError(f"value {self.value} does not fit in {self.length} bits")

    @classmethod
    def from_text(cls, text: str) -> "BitString":
        if text and set(text) - {"0", "1"}:
            raise ValueError(f"not a bitstring: {text!r}")
        return cls(len(text), int(text, 2) if text else 0)

    @classmethod
    def from_bits(cls, bits: Iterator[int] | list[int] | tuple[int, ...]) -> "BitString":
        value = 0
        n = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"bit must be 0 or 1, got {b}")
            value = (value << 1) | b
            n += 1
        return cls(n, value)

    def text(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def bit(self, i: int) -> int:
        """Bit at 1-based position i, counting from the left."""
        if not 1 <= i <= self.length:
            raise IndexError(f"position {i} out of range 1..{self.length}")
        return (self.value >> (self.length - i)) & 1

    def bits(self) -> Iterator[int]:
        for i in range(self.length - 1, -1, -1):
            yield (self.value >> i) & 1

    def concat(self, other: "BitString") -> "BitString":
        return BitString(self.length + other.length, (self.value << other.length) | other.value)

    def negate(self) -> "BitString":
        return BitString(self.length, self.value ^ ((1 << self.length) - 1))

    def slice(self, lo: int, hi: int) -> "BitString":
        """Bits at positions lo..hi inclusive, 1-based."""
        if not (1 <= lo and lo <= hi + 1 and hi <= self.length):
            raise IndexError(f"slice {lo}..{hi} out of range 1..{self.length}")
        width = hi - lo + 1
        shift = self.length - hi
        return BitString(width, (self.value >> shift) & ((1 << width) - 1))

    def __len__(self) -> int:
        return self.length

    def __str__(self) -> str:
        return self.text()


def hamming_distance(a: BitString, b: BitString) -> int:
    if a.length != b.length:
        raise ValueError(f"length mismatch: {a.length} vs {b.length}")
    return (a.value ^ b.value).bit_count()


def concat(*parts: BitString) -> BitString:
    out = BitString(0, 0)
    for p in parts:
        out = out.concat(p)
    return out


def sample_uniform(rng: random.Random, length: int) -> BitString:
    """Uniform bitstring of the given length from an injected generator.

    All randomness in this package flows through explicitly seeded
    ``random.Random`` instances; nothing reads ambient entropy.
    """
    if length < 0:
        raise ValueError(f"length must be >= 0, got {length}")
    return BitString(length, rng.getrandbits(length) if length else 0)


@dataclass(frozen=True, slots=True)
class IndexSet:
    """A subset of positions {1..universe}, kept sorted and deduplicated."""

    universe: int
    members: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.universe < 0:
            raise ValueError(f"universe must be >= 0, got {self.universe}")
        ms = tuple(sorted(set(self.members)))
        if ms != self.members:
            object.__setattr__(self, "members", ms)
        if ms and (ms[0] < 1 or ms[-1] > self.universe):
            raise ValueError(f"members {ms} not within 1..{self.universe}")

    @classmethod
    def of(cls, universe: int, members) -> "IndexSet":
        return cls(universe, tuple(members))

    def complement(self) -> "IndexSet":
        present = set(self.members)
        return IndexSet(self.universe, tuple(i for i in range(1, self.universe + 1) if i not in present))

    def __contains__(self, i: int) -> bool:
        return i in set(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)


@dataclass(frozen=True, slots=True)
class MaskedBitString:
    """A bitstring with some positions blanked out.

    ``stars`` marks the blanked positions as a bitmask aligned with the
    value: position i (1-based from the left) is blank iff bit
    ``length - i`` of ``stars`` is set.  Blanked positions carry no value
    bit; the corresponding bits of ``value`` are forced to zero so that
    equal masked strings compare equal.
    """

    length: int
    value: int
    stars: int

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ValueError(f"length must be >= 0, got {self.length}")
        full = (1 << self.length) - 1
        if self.stars < 0 or self.stars & ~full:
            raise ValueError("star mask does not fit the length")
        if self.value < 0 or self.value & ~full:
            raise ValueError(f"value {self.value} does not fit in {self.length} bits")
        if self.value & self.stars:
            object.__setattr__(self, "value", self.value & ~self.stars)

    def text(self) -> str:
        out = []
        for i in range(self.length - 1, -1, -1):
            if (self.stars >> i) & 1:
                out.append("*")
            else:
                out.append("01"[(self.value >> i) & 1])
        return "".join(out)

    def masked_positions(self) -> IndexSet:
        return IndexSet.of(
            self.length,
            (i for i in range(1, self.length + 1) if (self.stars >> (self.length - i)) & 1),
        )

    def __str__(self) -> str:
        return self.text()


def mask(x: BitString, positions: IndexSet) -> MaskedBitString:
    """Blank out the given positions of x."""
    if positions.universe != x.length:
        raise ValueError(f"index universe {positions.universe} != length {x.length}")
    stars = 0
    for i in positions:
        stars |= 1 << (x.length - i)
    return MaskedBitString(x.length, x.value & ~stars, stars)
