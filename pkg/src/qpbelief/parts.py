"""Query parts: the atoms belief is expressed over.

A query part is a group-by level, a measure, or a member used in an
equality filter ``level = member``. Each part has a canonical string id
used as a graph vertex, a CSV key and an alignment key when comparing
belief vectors::

    L:<hierarchy>/<level>
    M:<measure>
    V:<hierarchy>/<level>=<member>
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property


class PartKind(enum.Enum):
    LEVEL = "L"
    MEASURE = "M"
    MEMBER = "V"


@dataclass(frozen=True)
class QueryPart:
    kind: PartKind
    hierarchy: str = ""
    level: str = ""
    measure: str = ""
    value: str = ""

    @classmethod
    def level_part(cls, hierarchy: str, level: str) -> "QueryPart":
        return cls(PartKind.LEVEL, hierarchy=hierarchy, level=level)

    @classmethod
    def measure_part(cls, measure: str) -> "QueryPart":
        return cls(PartKind.MEASURE, measure=measure)

    @classmethod
    def member_part(cls, hierarchy: str, level: str, value: str) -> "QueryPart":
        return cls(PartKind.MEMBER, hierarchy=hierarchy, level=level, value=value)

    @cached_property
    def id(self) -> str:
        if self.kind is PartKind.LEVEL:
            return f"L:{self.hierarchy}/{self.level}"
        if self.kind is PartKind.MEASURE:
            return f"M:{self.measure}"
        return f"V:{self.hierarchy}/{self.level}={self.value}"

    @classmethod
    def from_id(cls, part_id: str) -> "QueryPart":
        """Parse a canonical id back into a part.

        Raises ValueError for strings that are not canonical ids.
        """
        tag, sep, rest = part_id.partition(":")
        if not sep or not rest:
            raise ValueError(f"not a query part id: {part_id!r}")
        if tag == "M":
            return cls.measure_part(rest)
        hierarchy, sep, tail = rest.partition("/")
        if not sep or not hierarchy or not tail:
            raise ValueError(f"not a query part id: {part_id!r}")
        if tag == "L":
            return cls.level_part(hierarchy, tail)
        if tag == "V":
            level, sep, value = tail.partition("=")
            if not sep or not level:
                raise ValueError(f"not a query part id: {part_id!r}")
            return cls.member_part(hierarchy, level, value)
        raise ValueError(f"not a query part id: {part_id!r}")

    def __lt__(self, other: "QueryPart") -> bool:
        return self.id < other.id

    def __str__(self) -> str:
        return self.id
