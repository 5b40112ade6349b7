"""Weighted directed graphs over query parts.

Three builders produce the random-walk graph:

* :func:`build_schema_graph` links every member to its children and to its
  level, and consecutive levels to each other (all weights 1, both ways);
* :func:`build_log_graph` adds usage: +1 for every ordered pair of parts of
  the same query (self pairs included) and +1 from every part of a query to
  every part of the next query in the session;
* :func:`merge` blends two graphs as ``(1 - alpha) * g1 + alpha * g2``.

Graphs are values: every function returns a new graph.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import GraphError
from .parts import PartKind, QueryPart
from .query import Log, Query, Session
from .schema import ALL_MEMBER, CubeSchema, enumerate_query_parts


class QueryPartGraph:
    """Vertices are canonical part ids; edges map ``(src, dst)`` to a positive weight."""

    __slots__ = ("_vertices", "_edges", "_order")

    def __init__(self, vertices: Iterable[str] = (), edges: Mapping[tuple[str, str], float] | None = None):
        verts = set(vertices)
        clean = {}
        for (u, v), w in (edges or {}).items():
            if w < 0:
                raise GraphError(f"negative weight {w} on edge {u}->{v}")
            if w == 0:
                continue
            clean[(u, v)] = w
            verts.add(u)
            verts.add(v)
        self._vertices = frozenset(verts)
        self._edges = clean
        self._order = None

    @classmethod
    def _trusted(cls, vertices: frozenset[str], edges: dict) -> "QueryPartGraph":
        g = cls.__new__(cls)
        g._vertices = vertices
        g._edges = edges
        g._order = None
        return g

    @property
    def vertices(self) -> frozenset[str]:
        return self._vertices

    @property
    def edges(self) -> Mapping[tuple[str, str], float]:
        return dict(self._edges)

    def weight(self, src: str, dst: str) -> float:
        return self._edges.get((src, dst), 0)

    def edge_count(self) -> int:
        return len(self._edges)

    def __len__(self) -> int:
        return len(self._vertices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QueryPartGraph):
            return NotImplemented
        return self._vertices == other._vertices and self._edges == other._edges

    def __repr__(self) -> str:
        return f"QueryPartGraph({len(self._vertices)} vertices, {len(self._edges)} edges)"

    def __getstate__(self):
        return (self._vertices, self._edges)

    def __setstate__(self, state):
        self._vertices, self._edges = state
        self._order = None

    def vertex_order(self) -> list[str]:
        if self._order is None:
            self._order = sorted(self._vertices)
        return self._order

    def out_weights(self) -> dict[str, float]:
        out: dict[str, float] = defaultdict(float)
        for (u, _), w in self._edges.items():
            out[u] += w
        return dict(out)

    def to_sparse(self) -> tuple[sp.csr_matrix, list[str]]:
        """Weighted adjacency matrix over sorted vertex ids (row = source)."""
        order = self.vertex_order()
        index = {v: i for i, v in enumerate(order)}
        n = len(order)
        if not self._edges:
            return sp.csr_matrix((n, n)), order
        keys = sorted(self._edges)
        rows = np.fromiter((index[u] for u, _ in keys), dtype=np.int64, count=len(keys))
        cols = np.fromiter((index[v] for _, v in keys), dtype=np.int64, count=len(keys))
        data = np.fromiter((float(self._edges[k]) for k in keys), dtype=np.float64, count=len(keys))
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n)), order

    def to_csv(self, path=None) -> str:
        """Dump as ``src_id,dst_id,weight`` sorted by (src, dst), 9 significant digits."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["src_id", "dst_id", "weight"])
        for (u, v) in sorted(self._edges):
            writer.writerow([u, v, f"{float(self._edges[(u, v)]):.9g}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, source, vertices: Iterable[str] = ()) -> "QueryPartGraph":
        text = Path(source).read_text(encoding="utf-8") if not str(source).startswith("src_id") else source
        rows = list(csv.reader(io.StringIO(text)))
        edges = {(r[0], r[1]): float(r[2]) for r in rows[1:] if r}
        return cls(vertices, edges)


def build_schema_graph(schema: CubeSchema) -> QueryPartGraph:
    """Topology graph of the schema. Measures are vertices without edges."""
    vertices = frozenset(p.id for p in enumerate_query_parts(schema))
    edges: dict[tuple[str, str], int] = {}

    def link(a: str, b: str) -> None:
        edges[(a, b)] = 1
        edges[(b, a)] = 1

    for h in schema.hierarchies:
        # Walk the member tree from all_i.
        stack = [(0, ALL_MEMBER)]
        while stack:
            depth, member = stack.pop()
            level = h.levels[depth]
            mid = QueryPart.member_part(h.name, level, member).id
            for child in h.children(level, member):
                link(mid, QueryPart.member_part(h.name, h.levels[depth + 1], child).id)
                stack.append((depth + 1, child))
        for level in h.levels:
            lid = QueryPart.level_part(h.name, level).id
            for member in h.members[level]:
                link(QueryPart.member_part(h.name, level, member).id, lid)
        for upper, lower in zip(h.levels, h.levels[1:]):
            link(QueryPart.level_part(h.name, upper).id, QueryPart.level_part(h.name, lower).id)
    return QueryPartGraph._trusted(vertices, edges)


def _add_query(edges: dict, previous_ids: list[str] | None, ids: list[str]) -> None:
    get = edges.get
    for p1 in ids:
        for p2 in ids:
            key = (p1, p2)
            edges[key] = get(key, 0) + 1
    if previous_ids:
        for p1 in previous_ids:
            for p2 in ids:
                key = (p1, p2)
                edges[key] = get(key, 0) + 1


def _session_ids(session: Session) -> list[list[str]]:
    return [q.part_ids() for q in session.queries]


def _check_universe(ids: Iterable[str], universe: frozenset[str] | None, context: str) -> None:
    if universe is None:
        return
    for i in ids:
        if i not in universe:
            raise GraphError(f"{context}: query part {i} is not a vertex of the base graph")


def build_log_graph(log: Log | Iterable[Session], base: QueryPartGraph | None = None,
                    strict: bool = True) -> QueryPartGraph:
    """Add the usage evidence of ``log`` on top of ``base``.

    Every query contributes its intra-query pairs, the last one included, and
    every consecutive pair of queries contributes previous -> next pairs.
    With ``strict`` and a nonempty base, parts outside the base vertex set
    are rejected.
    """
    base = base if base is not None else QueryPartGraph()
    universe = base.vertices if strict and base.vertices else None
    edges = dict(base._edges)
    vertices = set(base.vertices)
    sessions = log.sessions if isinstance(log, Log) else tuple(log)
    for s in sessions:
        prev = None
        for qi, ids in enumerate(_session_ids(s)):
            _check_universe(ids, universe, f"session {s.id!r}, query {qi}")
            vertices.update(ids)
            _add_query(edges, prev, ids)
            prev = ids
    return QueryPartGraph._trusted(frozenset(vertices), edges)


def add_query_increment(graph: QueryPartGraph, previous: Query | None, new_query: Query) -> QueryPartGraph:
    """Session graph update for one incoming query."""
    edges = dict(graph._edges)
    ids = new_query.part_ids()
    prev = previous.part_ids() if previous is not None else None
    _add_query(edges, prev, ids)
    return QueryPartGraph._trusted(graph.vertices | frozenset(ids), edges)


def merge(g1: QueryPartGraph, g2: QueryPartGraph, alpha: float) -> QueryPartGraph:
    """Blend two graphs: weight = (1 - alpha) * w1 + alpha * w2, absent weights are 0."""
    if not (0.0 <= alpha < 1.0):
        raise GraphError(f"alpha must lie in [0, 1), got {alpha}")
    keep = 1.0 - alpha
    edges = {k: keep * w for k, w in g1._edges.items()}
    get = edges.get
    for k, w in g2._edges.items():
        edges[k] = get(k, 0.0) + alpha * w
    edges = {k: w for k, w in edges.items() if w != 0.0}
    return QueryPartGraph._trusted(g1.vertices | g2.vertices, edges)


@dataclass(frozen=True)
class ConnectivityReport:
    strongly_connected: bool
    component_count: int
    unreached_measures: frozenset[str]
    dangling: frozenset[str] = frozenset()

    def describe(self) -> str:
        bits = [f"{self.component_count} strongly connected component(s)"]
        if self.unreached_measures:
            bits.append("unreached measures: " + ", ".join(sorted(self.unreached_measures)))
        if self.dangling:
            shown = sorted(self.dangling)
            more = f" (+{len(shown) - 5} more)" if len(shown) > 5 else ""
            bits.append("dangling vertices: " + ", ".join(shown[:5]) + more)
        return "; ".join(bits)


def check_connectivity(graph: QueryPartGraph) -> ConnectivityReport:
    """Strong connectivity of the positive-weight edges, plus isolated measures."""
    mat, order = graph.to_sparse()
    n = len(order)
    if n == 0:
        return ConnectivityReport(False, 0, frozenset())
    count, _ = connected_components(mat, directed=True, connection="strong")
    degree = np.asarray((mat != 0).sum(axis=1)).ravel() + np.asarray((mat != 0).sum(axis=0)).ravel()
    out_deg = np.asarray((mat != 0).sum(axis=1)).ravel()
    unreached = frozenset(
        v for v, d in zip(order, degree) if d == 0 and QueryPart.from_id(v).kind is PartKind.MEASURE
    )
    dangling = frozenset(v for v, d in zip(order, out_deg) if d == 0)
    return ConnectivityReport(int(count) == 1, int(count), unreached, dangling)
