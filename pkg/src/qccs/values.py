"""Classical values: exact rationals and bit strings."""

from __future__ import annotations

from fractions import Fraction
from typing import Union


class Bits(tuple):
    """An immutable string of bits, e.g. ``Bits("01")``; ``Bits("")`` is the empty string."""

    def __new__(cls, bits=()):
        if isinstance(bits, str):
            if any(ch not in "01" for ch in bits):
                raise ValueError(f"not a bit string: {bits!r}")
            bits = [int(ch) for ch in bits]
        items = tuple(int(b) for b in bits)
        if any(b not in (0, 1) for b in items):
            raise ValueError(f"not a bit string: {bits!r}")
        return super().__new__(cls, items)

    def __str__(self) -> str:
        return "".join(str(b) for b in self)

    def __repr__(self) -> str:
        return f"'{self}'"

    # tuples compare equal across subclasses; keep bit strings distinct from plain tuples
    def __eq__(self, other):
        return isinstance(other, Bits) and tuple.__eq__(self, other)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(("bits", tuple(self)))


Value = Union[Fraction, Bits]


def as_value(v) -> Value:
    """Coerce ints, floats, strings of bits and Fractions to a canonical value."""
    if isinstance(v, Bits):
        return v
    if isinstance(v, bool):
        raise TypeError("booleans are not classical data values")
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10**9)
    if isinstance(v, str):
        return Bits(v)
    raise TypeError(f"cannot interpret {v!r} as a classical value")


def format_value(v: Value) -> str:
    """Concrete syntax for a value; reparses to the same value."""
    if isinstance(v, Bits):
        return f"'{v}'"
    if v.denominator == 1:
        return str(v.numerator)
    d = v.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d == 1:
        # terminating decimal
        s = f"{float(v):.{20}f}".rstrip("0")
        if Fraction(s) == v:
            return s
    return f"#{v.numerator}/{v.denominator}"


def value_to_json(v: Value):
    if isinstance(v, Bits):
        return str(v)
    if v.denominator == 1:
        return v.numerator
    return float(v)


def all_bit_strings(min_len: int, max_len: int) -> list[Bits]:
    out = []
    for n in range(min_len, max_len + 1):
        for i in range(2**n):
            out.append(Bits(format(i, f"0{n}b") if n else ""))
    return out
