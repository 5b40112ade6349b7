"""Multidimensional cube schemas: hierarchies, levels, members and measures.

Schemas are immutable once built. They can be read from (and written to)
a small JSON document::

    {"name": "SSB",
     "measures": ["REVENUE"],
     "hierarchies": [
        {"name": "CUSTOMER",
         "levels": ["ALL", "REGION"],
         "members": {"ALL": {"all": ["AMERICA", "EUROPE"]},
                     "REGION": {"AMERICA": [], "EUROPE": []}}}]}

``members`` maps each level to its members, and each member to the list of
its children at the next level. Bottom-level members map to empty lists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import SchemaError
from .parts import QueryPart

ALL_MEMBER = "all"

_FORBIDDEN = {"hierarchy": "/:", "level": "/=:", "measure": ""}


def _check_name(kind: str, name: str, context: str) -> None:
    if not isinstance(name, str) or not name:
        raise SchemaError(f"{context}: {kind} name must be a nonempty string, got {name!r}")
    bad = [c for c in _FORBIDDEN[kind] if c in name]
    if bad:
        raise SchemaError(f"{context}: {kind} name {name!r} contains reserved character {bad[0]!r}")


@dataclass(frozen=True)
class Hierarchy:
    """A dimension hierarchy with levels ordered from ALL down to the finest level.

    ``members[level]`` is the ordered tuple of members of ``level`` and
    ``child_map[(level, member)]`` the ordered tuple of its children at the
    next level.
    """

    name: str
    levels: tuple[str, ...]
    members: Mapping[str, tuple[str, ...]]
    child_map: Mapping[tuple[str, str], tuple[str, ...]]
    _parents: Mapping[tuple[str, str], str] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        self._validate()
        parents = {}
        for depth, level in enumerate(self.levels[:-1]):
            below = self.levels[depth + 1]
            for member in self.members[level]:
                for child in self.child_map[(level, member)]:
                    parents[(below, child)] = member
        object.__setattr__(self, "members", dict(self.members))
        object.__setattr__(self, "child_map", dict(self.child_map))
        object.__setattr__(self, "_parents", parents)

    def _validate(self) -> None:
        ctx = f"hierarchy {self.name!r}"
        _check_name("hierarchy", self.name, "schema")
        if len(self.levels) < 2:
            raise SchemaError(f"{ctx}: needs at least 2 levels (ALL plus one), got {len(self.levels)}")
        if len(set(self.levels)) != len(self.levels):
            raise SchemaError(f"{ctx}: duplicate level names in {list(self.levels)}")
        for level in self.levels:
            _check_name("level", level, ctx)
            if level not in self.members:
                raise SchemaError(f"{ctx}: level {level!r} has no member table")
        extra = set(self.members) - set(self.levels)
        if extra:
            raise SchemaError(f"{ctx}: members given for unknown levels {sorted(extra)}")
        top = self.levels[0]
        if tuple(self.members[top]) != (ALL_MEMBER,):
            raise SchemaError(
                f"{ctx}: missing ALL level: top level {top!r} must have exactly one member "
                f"{ALL_MEMBER!r}, got {list(self.members[top])}"
            )
        for level in self.levels:
            ms = self.members[level]
            if len(ms) == 0:
                raise SchemaError(f"{ctx}, level {level!r}: no members")
            if len(set(ms)) != len(ms):
                raise SchemaError(f"{ctx}, level {level!r}: duplicate member names")
        for depth, level in enumerate(self.levels):
            below = self.levels[depth + 1] if depth + 1 < len(self.levels) else None
            below_set = set(self.members[below]) if below else set()
            seen: dict[str, str] = {}
            for member in self.members[level]:
                kids = self.child_map.get((level, member))
                if kids is None:
                    raise SchemaError(f"{ctx}, level {level!r}: member {member!r} has no child list")
                if below is None:
                    if kids:
                        raise SchemaError(
                            f"{ctx}, level {level!r}: bottom member {member!r} cannot have children"
                        )
                    continue
                if not kids:
                    raise SchemaError(
                        f"{ctx}, level {level!r}: member {member!r} has no children at {below!r}"
                    )
                for kid in kids:
                    if kid not in below_set:
                        raise SchemaError(
                            f"{ctx}, level {below!r}: child {kid!r} of {member!r} is not a member of the level"
                        )
                    if kid in seen:
                        raise SchemaError(
                            f"{ctx}, level {below!r}: member {kid!r} has two parents "
                            f"({seen[kid]!r} and {member!r})"
                        )
                    seen[kid] = member
            if below is not None:
                orphans = [m for m in self.members[below] if m not in seen]
                if orphans:
                    raise SchemaError(
                        f"{ctx}, level {below!r}: orphan member {orphans[0]!r} has no parent"
                    )
        stray = [k for k in self.child_map if k[0] not in self.members or k[1] not in self.members[k[0]]]
        if stray:
            raise SchemaError(f"{ctx}: child list for unknown member {stray[0]!r}")

    @property
    def depth(self) -> int:
        return len(self.levels)

    def level_index(self, level: str) -> int:
        return self.levels.index(level)

    def children(self, level: str, member: str) -> tuple[str, ...]:
        return self.child_map[(level, member)]

    def parent(self, level: str, member: str) -> str | None:
        return self._parents.get((level, member))

    def member_count(self) -> int:
        return sum(len(ms) for ms in self.members.values())


@dataclass(frozen=True)
class CubeSchema:
    name: str
    hierarchies: tuple[Hierarchy, ...]
    measures: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "hierarchies", tuple(self.hierarchies))
        object.__setattr__(self, "measures", tuple(self.measures))
        names = [h.name for h in self.hierarchies]
        if not names:
            raise SchemaError(f"schema {self.name!r}: no hierarchies")
        if len(set(names)) != len(names):
            raise SchemaError(f"schema {self.name!r}: duplicate hierarchy names {names}")
        if not self.measures:
            raise SchemaError(f"schema {self.name!r}: no measures")
        if len(set(self.measures)) != len(self.measures):
            raise SchemaError(f"schema {self.name!r}: duplicate measure names {list(self.measures)}")
        for m in self.measures:
            _check_name("measure", m, f"schema {self.name!r}")
        clash = set(names) & set(self.measures)
        if clash:
            raise SchemaError(f"schema {self.name!r}: names used as both hierarchy and measure: {sorted(clash)}")

    def hierarchy(self, name: str) -> Hierarchy:
        for h in self.hierarchies:
            if h.name == name:
                return h
        raise KeyError(name)

    def has_part(self, part: QueryPart) -> bool:
        return part.id in self.part_ids()

    def part_ids(self) -> frozenset[str]:
        cached = self.__dict__.get("_part_ids")
        if cached is None:
            cached = frozenset(p.id for p in enumerate_query_parts(self))
            object.__setattr__(self, "_part_ids", cached)
        return cached

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "measures": list(self.measures),
            "hierarchies": [
                {
                    "name": h.name,
                    "levels": list(h.levels),
                    "members": {
                        level: {m: list(h.child_map[(level, m)]) for m in h.members[level]}
                        for level in h.levels
                    },
                }
                for h in self.hierarchies
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=2, ensure_ascii=False) + "\n"


def schema_from_document(doc: Mapping) -> CubeSchema:
    """Build a validated CubeSchema from a parsed schema document."""
    if not isinstance(doc, Mapping):
        raise SchemaError("schema document must be a JSON object")
    for key in ("name", "measures", "hierarchies"):
        if key not in doc:
            raise SchemaError(f"schema document lacks required key {key!r}")
    hierarchies = []
    for i, hdoc in enumerate(doc["hierarchies"]):
        if not isinstance(hdoc, Mapping) or not {"name", "levels", "members"} <= set(hdoc):
            raise SchemaError(f"hierarchy #{i}: expected object with name, levels, members")
        hname = hdoc["name"]
        levels = tuple(hdoc["levels"])
        members: dict[str, tuple[str, ...]] = {}
        child_map: dict[tuple[str, str], tuple[str, ...]] = {}
        for level, table in hdoc["members"].items():
            if not isinstance(table, Mapping):
                raise SchemaError(f"hierarchy {hname!r}, level {level!r}: member table must be an object")
            members[level] = tuple(table)
            for member, kids in table.items():
                child_map[(level, member)] = tuple(kids)
        hierarchies.append(Hierarchy(hname, levels, members, child_map))
    return CubeSchema(doc["name"], tuple(hierarchies), tuple(doc["measures"]))


def load_schema(source) -> CubeSchema:
    """Load a schema from a path, a JSON string, or an already parsed mapping."""
    if isinstance(source, Mapping):
        return schema_from_document(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema document is not valid JSON: {exc}") from exc
    return schema_from_document(doc)


def save_schema(schema: CubeSchema, path) -> None:
    Path(path).write_text(schema.dumps(), encoding="utf-8")


def enumerate_query_parts(schema: CubeSchema) -> list[QueryPart]:
    """All query parts of the schema: levels, then measures, then members."""
    parts = []
    for h in schema.hierarchies:
        for level in h.levels:
            parts.append(QueryPart.level_part(h.name, level))
    for m in schema.measures:
        parts.append(QueryPart.measure_part(m))
    for h in schema.hierarchies:
        for level in h.levels:
            for member in h.members[level]:
                parts.append(QueryPart.member_part(h.name, level, member))
    return parts


# -- synthetic schemas -------------------------------------------------------

_HIERARCHY_NAMES = ("CUSTOMER", "SUPPLIER", "PART", "DATE")
_LEVEL_NAMES = {
    "CUSTOMER": ("REGION", "NATION", "CITY", "CUSTOMER"),
    "SUPPLIER": ("REGION", "NATION", "CITY", "SUPPLIER"),
    "PART": ("MFGR", "CATEGORY", "BRAND", "PART"),
    "DATE": ("YEAR", "MONTH", "DAY", "HOUR"),
}
_MEASURE_NAMES = ("REVENUE", "QUANTITY", "DISCOUNT", "SUPPLYCOST")


@dataclass(frozen=True)
class SchemaSpec:
    """Shape of a synthetic schema. Depth counts the ALL level."""

    hierarchies: int = 4
    depth: tuple[int, int] = (3, 4)
    branching: tuple[int, int] = (2, 5)
    measures: int = 4
    name: str = "synthetic"

    def __post_init__(self):
        if self.hierarchies < 1 or self.measures < 1:
            raise ValueError("hierarchy and measure counts must be >= 1")
        lo, hi = self.depth
        if lo < 2 or hi < lo:
            raise ValueError(f"depth range must satisfy 2 <= min <= max, got {self.depth}")
        lo, hi = self.branching
        if lo < 1 or hi < lo:
            raise ValueError(f"branching range must satisfy 1 <= min <= max, got {self.branching}")


PRESETS = {
    "ssb-like": SchemaSpec(hierarchies=4, depth=(3, 4), branching=(2, 5), measures=4, name="ssb-like"),
}


def _hierarchy_name(i: int) -> str:
    return _HIERARCHY_NAMES[i] if i < len(_HIERARCHY_NAMES) else f"DIM{i + 1}"


def _level_name(hname: str, depth: int) -> str:
    names = _LEVEL_NAMES.get(hname, ())
    return names[depth - 1] if depth - 1 < len(names) else f"{hname}_L{depth}"


def generate_schema(spec: SchemaSpec | str = "ssb-like", seed: int = 0) -> CubeSchema:
    """Generate a random schema; a pure function of ``(spec, seed)``.

    Each level below ALL gets one branching factor drawn from the range,
    so the member count of a level is the product of the branchings above it.
    """
    if isinstance(spec, str):
        spec = PRESETS[spec]
    rng = np.random.Generator(np.random.PCG64(seed))
    hierarchies = []
    for i in range(spec.hierarchies):
        hname = _hierarchy_name(i)
        depth = int(rng.integers(spec.depth[0], spec.depth[1] + 1))
        levels = ["ALL"] + [_level_name(hname, d) for d in range(1, depth)]
        members = {"ALL": (ALL_MEMBER,)}
        child_map = {}
        above = [ALL_MEMBER]
        for d in range(1, depth):
            b = int(rng.integers(spec.branching[0], spec.branching[1] + 1))
            level = levels[d]
            current = []
            for parent in above:
                kids = tuple(f"{level}{len(current) + j + 1}" for j in range(b))
                child_map[(levels[d - 1], parent)] = kids
                current.extend(kids)
            members[level] = tuple(current)
            above = current
        for m in above:
            child_map[(levels[-1], m)] = ()
        hierarchies.append(Hierarchy(hname, tuple(levels), members, child_map))
    measures = tuple(
        _MEASURE_NAMES[j] if j < len(_MEASURE_NAMES) else f"MEASURE{j + 1}" for j in range(spec.measures)
    )
    return CubeSchema(spec.name, tuple(hierarchies), measures)


def spec_from_mapping(values: Mapping[str, str]) -> SchemaSpec:
    """Build a SchemaSpec from key/value strings (``depth = 3-4`` style ranges)."""

    def rng_of(text: str) -> tuple[int, int]:
        lo, _, hi = str(text).partition("-")
        return int(lo), int(hi or lo)

    kwargs = {}
    if "hierarchies" in values:
        kwargs["hierarchies"] = int(values["hierarchies"])
    if "measures" in values:
        kwargs["measures"] = int(values["measures"])
    if "depth" in values:
        kwargs["depth"] = rng_of(values["depth"])
    if "branching" in values:
        kwargs["branching"] = rng_of(values["branching"])
    if "name" in values:
        kwargs["name"] = str(values["name"])
    return SchemaSpec(**kwargs)
