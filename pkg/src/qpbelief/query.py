"""Queries, sessions and logs, with JSON log I/O.

A query is identified with its set of query parts. A session is an ordered
list of queries issued by one user; a log is a collection of sessions.

Log document layout::

    {"sessions": [{"id": "s1", "user": "u1", "template": "slice_all",
                   "queries": [{"measures": ["REVENUE"],
                                "groupBy": [{"hierarchy": "CUSTOMER", "level": "CITY"}],
                                "filters": [{"hierarchy": "CUSTOMER", "level": "REGION",
                                             "member": "AMERICA"}]}]}]}

``template`` may be null. An optional ``meta`` object per session carries
generator notes and round-trips untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import LogError
from .parts import PartKind, QueryPart
from .schema import CubeSchema


@dataclass(frozen=True)
class Query:
    """A multidimensional query seen as a set of query parts.

    Needs at least one measure and one group-by level, and at most one
    member filter per hierarchy.
    """

    parts: frozenset[QueryPart]

    def __post_init__(self):
        object.__setattr__(self, "parts", frozenset(self.parts))
        if not any(p.kind is PartKind.MEASURE for p in self.parts):
            raise LogError("query has no measure")
        if not any(p.kind is PartKind.LEVEL for p in self.parts):
            raise LogError("query has no group-by level")
        seen = set()
        for p in self.parts:
            if p.kind is PartKind.MEMBER:
                if p.hierarchy in seen:
                    raise LogError(f"query has two filters on hierarchy {p.hierarchy!r}")
                seen.add(p.hierarchy)

    @classmethod
    def build(cls, measures: Iterable[str], group_by: Iterable[tuple[str, str]] = (),
              filters: Iterable[tuple[str, str, str]] = ()) -> "Query":
        parts = [QueryPart.measure_part(m) for m in measures]
        parts += [QueryPart.level_part(h, lv) for h, lv in group_by]
        parts += [QueryPart.member_part(h, lv, v) for h, lv, v in filters]
        return cls(frozenset(parts))

    @property
    def measures(self) -> list[str]:
        return sorted(p.measure for p in self.parts if p.kind is PartKind.MEASURE)

    @property
    def group_by(self) -> list[tuple[str, str]]:
        return sorted((p.hierarchy, p.level) for p in self.parts if p.kind is PartKind.LEVEL)

    @property
    def filters(self) -> list[tuple[str, str, str]]:
        return sorted((p.hierarchy, p.level, p.value) for p in self.parts if p.kind is PartKind.MEMBER)

    def part_ids(self) -> list[str]:
        return sorted(p.id for p in self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def to_document(self) -> dict:
        return {
            "measures": self.measures,
            "groupBy": [{"hierarchy": h, "level": lv} for h, lv in self.group_by],
            "filters": [{"hierarchy": h, "level": lv, "member": v} for h, lv, v in self.filters],
        }


def parts(query: Query) -> frozenset[QueryPart]:
    return query.parts


@dataclass(frozen=True)
class Session:
    id: str
    user: str
    queries: tuple[Query, ...]
    template_label: str | None = None
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))
        if not self.queries:
            raise LogError(f"session {self.id!r} is empty")

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self) -> Iterator[Query]:
        return iter(self.queries)

    def to_document(self) -> dict:
        doc = {
            "id": self.id,
            "user": self.user,
            "template": self.template_label,
            "queries": [q.to_document() for q in self.queries],
        }
        if self.meta:
            doc["meta"] = dict(self.meta)
        return doc


@dataclass(frozen=True)
class Log:
    sessions: tuple[Session, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sessions", tuple(self.sessions))
        ids = set()
        for s in self.sessions:
            if s.id in ids:
                raise LogError(f"duplicate session id {s.id!r}")
            ids.add(s.id)

    def __len__(self) -> int:
        return len(self.sessions)

    def __iter__(self) -> Iterator[Session]:
        return iter(self.sessions)

    def session(self, session_id: str) -> Session:
        for s in self.sessions:
            if s.id == session_id:
                return s
        raise KeyError(session_id)

    def without(self, session_id: str) -> "Log":
        return Log(tuple(s for s in self.sessions if s.id != session_id))

    def query_count(self) -> int:
        return sum(len(s) for s in self.sessions)

    def to_document(self) -> dict:
        return {"sessions": [s.to_document() for s in self.sessions]}

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=1, ensure_ascii=False) + "\n"


def validate_query(query: Query, schema: CubeSchema, context: str = "query") -> None:
    """Check every part of ``query`` against the schema's part universe."""
    known = schema.part_ids()
    for p in sorted(query.parts):
        if p.id not in known:
            raise LogError(f"{context}: unknown query part {p.id}")


def _query_from_document(doc: Mapping, schema: CubeSchema, context: str) -> Query:
    if not isinstance(doc, Mapping):
        raise LogError(f"{context}: query must be an object")
    try:
        measures = list(doc.get("measures", []))
        group_by = [(g["hierarchy"], g["level"]) for g in doc.get("groupBy", [])]
        filters = [(f["hierarchy"], f["level"], f["member"]) for f in doc.get("filters", [])]
    except (KeyError, TypeError) as exc:
        raise LogError(f"{context}: malformed query entry ({exc})") from exc
    hnames = {h.name for h in schema.hierarchies}
    for h, lv in group_by + [(f[0], f[1]) for f in filters]:
        if h not in hnames:
            raise LogError(f"{context}: unknown hierarchy {h!r}")
        if lv not in schema.hierarchy(h).levels:
            raise LogError(f"{context}: unknown level {lv!r} in hierarchy {h!r}")
    for m in measures:
        if m not in schema.measures:
            raise LogError(f"{context}: unknown measure {m!r} (part M:{m})")
    for h, lv, v in filters:
        if v not in schema.hierarchy(h).members[lv]:
            raise LogError(f"{context}: unknown member {v!r} (part V:{h}/{lv}={v})")
    try:
        q = Query.build(measures, group_by, filters)
    except LogError as exc:
        raise LogError(f"{context}: {exc}") from exc
    return q


def log_from_document(doc: Mapping, schema: CubeSchema) -> Log:
    if not isinstance(doc, Mapping) or "sessions" not in doc:
        raise LogError("log document must be an object with a 'sessions' list")
    sessions = []
    seen = set()
    for i, sdoc in enumerate(doc["sessions"]):
        sid = sdoc.get("id")
        if not isinstance(sid, str) or not sid:
            raise LogError(f"session #{i}: missing id")
        if sid in seen:
            raise LogError(f"duplicate session id {sid!r}")
        seen.add(sid)
        qdocs = sdoc.get("queries") or []
        if not qdocs:
            raise LogError(f"session {sid!r}: empty session")
        queries = [
            _query_from_document(q, schema, f"session {sid!r}, query {j}") for j, q in enumerate(qdocs)
        ]
        sessions.append(
            Session(
                id=sid,
                user=str(sdoc.get("user", "")),
                queries=tuple(queries),
                template_label=sdoc.get("template"),
                meta=dict(sdoc.get("meta") or {}),
            )
        )
    return Log(tuple(sessions))


def load_log(source, schema: CubeSchema) -> Log:
    """Load and validate a log from a path, JSON text or parsed mapping."""
    if isinstance(source, Mapping):
        return log_from_document(source, schema)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LogError(f"log document is not valid JSON: {exc}") from exc
    return log_from_document(doc, schema)


def save_log(log: Log, path=None) -> str:
    """Serialize ``log``; also write it to ``path`` when given."""
    text = log.dumps()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text

