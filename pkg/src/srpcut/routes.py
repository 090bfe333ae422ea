"""Route types and route values.

A route type describes the finite set of values a routing message can
take: bounded integers, booleans, options, tuples and finite enums.
Route values are plain Python data tagged just enough to be unambiguous:

    BoundedInt -> int
    BoolType   -> bool
    OptionType -> None or Some(inner value)
    TupleType  -> tuple of values
    EnumType   -> variant name (str)

Every route type is finite, so value sets can be enumerated exhaustively.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Union


class RouteTypeError(ValueError):
    """Raised for malformed route type declarations."""


@dataclass(frozen=True)
class BoundedInt:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise RouteTypeError(f"empty integer range [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class BoolType:
    pass


@dataclass(frozen=True)
class OptionType:
    inner: "RouteType"


@dataclass(frozen=True)
class TupleType:
    elements: tuple["RouteType", ...]

    def __post_init__(self):
        if len(self.elements) < 1:
            raise RouteTypeError("tuple type needs at least one element")


@dataclass(frozen=True)
class EnumType:
    variants: tuple[str, ...]

    def __post_init__(self):
        if len(self.variants) < 1:
            raise RouteTypeError("enum type needs at least one variant")
        if len(set(self.variants)) != len(self.variants):
            raise RouteTypeError(f"duplicate enum variants in {self.variants}")


RouteType = Union[BoundedInt, BoolType, OptionType, TupleType, EnumType]


@dataclass(frozen=True)
class Some:
    """Present option payload. Absent options are plain None."""

    value: object

    def __repr__(self):
        return f"Some({self.value!r})"


Value = object  # int | bool | None | Some | tuple | str


def conforms(value: Value, rtype: RouteType) -> bool:
    """Check that a value belongs to a route type.

    bool is checked before int since Python bools are ints.
    """
    if isinstance(rtype, BoundedInt):
        return (
            isinstance(value, int)
            and not isinstance(value, bool)
            and rtype.lo <= value <= rtype.hi
        )
    if isinstance(rtype, BoolType):
        return isinstance(value, bool)
    if isinstance(rtype, OptionType):
        if value is None:
            return True
        return isinstance(value, Some) and conforms(value.value, rtype.inner)
    if isinstance(rtype, TupleType):
        return (
            isinstance(value, tuple)
            and len(value) == len(rtype.elements)
            and all(conforms(v, t) for v, t in zip(value, rtype.elements))
        )
    if isinstance(rtype, EnumType):
        return isinstance(value, str) and value in rtype.variants
    raise RouteTypeError(f"not a route type: {rtype!r}")


def all_values(rtype: RouteType) -> Iterator[Value]:
    """Enumerate every value of a route type, in a fixed canonical order."""
    if isinstance(rtype, BoundedInt):
        yield from range(rtype.lo, rtype.hi + 1)
    elif isinstance(rtype, BoolType):
        yield False
        yield True
    elif isinstance(rtype, OptionType):
        yield None
        for v in all_values(rtype.inner):
            yield Some(v)
    elif isinstance(rtype, TupleType):
        for combo in itertools.product(*(all_values(t) for t in rtype.elements)):
            yield tuple(combo)
    elif isinstance(rtype, EnumType):
        yield from rtype.variants
    else:
        raise RouteTypeError(f"not a route type: {rtype!r}")


def cardinality(rtype: RouteType) -> int:
    if isinstance(rtype, BoundedInt):
        return rtype.hi - rtype.lo + 1
    if isinstance(rtype, BoolType):
        return 2
    if isinstance(rtype, OptionType):
        return 1 + cardinality(rtype.inner)
    if isinstance(rtype, TupleType):
        n = 1
        for t in rtype.elements:
            n *= cardinality(t)
        return n
    if isinstance(rtype, EnumType):
        return len(rtype.variants)
    raise RouteTypeError(f"not a route type: {rtype!r}")


def default_value(rtype: RouteType) -> Value:
    """A canonical inhabitant, used for don't-care payloads."""
    if isinstance(rtype, BoundedInt):
        return rtype.lo
    if isinstance(rtype, BoolType):
        return False
    if isinstance(rtype, OptionType):
        return None
    if isinstance(rtype, TupleType):
        return tuple(default_value(t) for t in rtype.elements)
    if isinstance(rtype, EnumType):
        return rtype.variants[0]
    raise RouteTypeError(f"not a route type: {rtype!r}")


def format_value(value: Value) -> str:
    """Human-readable rendering: Some 3, None, (1, up), true."""
    if value is None:
        return "None"
    if isinstance(value, Some):
        return f"Some {format_value(value.value)}"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return "(" + ", ".join(format_value(v) for v in value) + ")"
    return str(value)


def format_type(rtype: RouteType) -> str:
    if isinstance(rtype, BoundedInt):
        return f"int[{rtype.lo},{rtype.hi}]"
    if isinstance(rtype, BoolType):
        return "bool"
    if isinstance(rtype, OptionType):
        return f"option<{format_type(rtype.inner)}>"
    if isinstance(rtype, TupleType):
        return "(" + " * ".join(format_type(t) for t in rtype.elements) + ")"
    if isinstance(rtype, EnumType):
        return "enum{" + ", ".join(rtype.variants) + "}"
    raise RouteTypeError(f"not a route type: {rtype!r}")
