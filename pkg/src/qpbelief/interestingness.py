"""Subjective interestingness of queries: surprise divided by complexity.

The surprise of a query is the information content of its parts under the
belief, ``-sum(ln belief(p))`` in nats, treating parts as independent. The
complexity is the number of parts.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .belief import BeliefVector, PageRankConfig, stationary_power
from .errors import BeliefError, ConnectivityError
from .graph import QueryPartGraph, add_query_increment, build_log_graph, build_schema_graph, check_connectivity
from .query import Log, Query, Session
from .schema import CubeSchema

LOG_BASE = "e"


@dataclass(frozen=True)
class SIScore:
    session_id: str
    query_index: int
    surprise: float
    complexity: int
    si: float


def surprise(query: Query | Iterable[str], belief: BeliefVector) -> float:
    """Information content of the query's parts, in nats."""
    ids = [p.id for p in query.parts] if isinstance(query, Query) else list(query)
    terms = []
    for pid in sorted(ids):
        prob = belief.probabilities.get(pid)
        if prob is None:
            raise BeliefError(f"part {pid} is missing from the belief support")
        if not prob > 0.0:
            raise BeliefError(f"part {pid} has zero belief")
        terms.append(-math.log(prob))
    return math.fsum(terms)


def si(query: Query, belief: BeliefVector, session_id: str = "", query_index: int = 1) -> SIScore:
    s = surprise(query, belief)
    k = len(query.parts)
    return SIScore(session_id, query_index, s, k, s / k)


class _BlendedWalk:
    """Belief on ``(1 - alpha) * topology + alpha * session`` over a fixed vertex order.

    Keeps the topology matrix once so each step only rebuilds the session part.
    """

    def __init__(self, topology: QueryPartGraph, alpha: float, config: PageRankConfig):
        self.base, self.order = topology.to_sparse()
        self.index = {v: i for i, v in enumerate(self.order)}
        self.alpha = alpha
        self.config = config
        self.base = (1.0 - alpha) * self.base

    def belief(self, session_graph: QueryPartGraph) -> BeliefVector:
        n = len(self.order)
        missing = session_graph.vertices - self.index.keys()
        if missing:
            raise ConnectivityError(f"session parts outside the topology graph: {sorted(missing)[:5]}")
        edges = session_graph._edges
        if edges and self.alpha > 0.0:
            rows = np.fromiter((self.index[u] for u, _ in edges), dtype=np.int64, count=len(edges))
            cols = np.fromiter((self.index[v] for _, v in edges), dtype=np.int64, count=len(edges))
            data = np.fromiter((float(w) for w in edges.values()), dtype=np.float64, count=len(edges))
            mat = (self.base + sp.csr_matrix((self.alpha * data, (rows, cols)), shape=(n, n))).tocsr()
        else:
            mat = self.base.tocsr()
        count, _ = connected_components(mat, directed=True, connection="strong")
        if count != 1:
            raise ConnectivityError(f"blended graph has {count} strongly connected components")
        out = np.asarray(mat.sum(axis=1)).ravel()
        trans = (sp.diags(1.0 / out) @ mat).tocsr()
        x, iterations, residual = stationary_power(trans, self.config)
        return BeliefVector(dict(zip(self.order, x.tolist())), iterations, residual)


def session_beliefs(session: Session, topology: QueryPartGraph, alpha: float,
                    config: PageRankConfig | None = None,
                    history: QueryPartGraph | None = None):
    """Yield the belief after each query of ``session`` has been added to the session graph."""
    config = config or PageRankConfig()
    walk = _BlendedWalk(topology, alpha, config)
    gs = history if history is not None else QueryPartGraph()
    prev = None
    for q in session.queries:
        gs = add_query_increment(gs, prev, q)
        prev = q
        yield q, walk.belief(gs)


def evaluate_session(session: Session, global_log: Log | None, schema: CubeSchema | None,
                     alpha: float = 0.9, config: PageRankConfig | None = None, *,
                     history: Log | QueryPartGraph | None = None,
                     topology: QueryPartGraph | None = None) -> list[SIScore]:
    """Score every query of a session against the belief updated up to that query.

    The topology graph is the schema graph plus the global log, unless a
    prebuilt ``topology`` is given. ``history`` seeds the session graph with
    the user's past sessions.
    """
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if topology is None:
        if schema is None:
            raise ValueError("either schema or topology is required")
        topology = build_log_graph(global_log or Log(), build_schema_graph(schema))
        report = check_connectivity(topology)
        if not report.strongly_connected:
            raise ConnectivityError(f"topology graph is not strongly connected: {report.describe()}", report)
    if isinstance(history, Log):
        history = build_log_graph(history)
    scores = []
    for t, (q, belief) in enumerate(session_beliefs(session, topology, alpha, config, history), start=1):
        scores.append(si(q, belief, session.id, t))
    return scores


def scores_to_csv(scores: Iterable[SIScore], path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["session_id", "query_index", "surprise", "complexity", "si"])
    for s in scores:
        writer.writerow([s.session_id, s.query_index, f"{s.surprise:.9g}", s.complexity, f"{s.si:.9g}"])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
