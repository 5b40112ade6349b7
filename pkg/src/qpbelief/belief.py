"""Belief over query parts as the stationary distribution of a random walk.

The transition matrix normalizes each vertex's outgoing weights. No damping
or teleportation is used: the graph must be strongly connected and every
vertex needs an outgoing edge. Self-loops coming from the usage graph make
the chain aperiodic.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .errors import BeliefError, ConnectivityError, ConvergenceError
from .graph import QueryPartGraph, check_connectivity, merge

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PageRankConfig:
    tolerance: float = 1e-10
    max_iterations: int = 10_000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass(frozen=True)
class BeliefVector:
    """Probability per part id, with the power-iteration diagnostics."""

    probabilities: Mapping[str, float]
    iteration_count: int = 0
    residual: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "probabilities", dict(self.probabilities))

    def __getitem__(self, part_id: str) -> float:
        return self.probabilities[part_id]

    def get(self, part_id: str, default: float = 0.0) -> float:
        return self.probabilities.get(part_id, default)

    def __len__(self) -> int:
        return len(self.probabilities)

    @property
    def support(self) -> frozenset[str]:
        return frozenset(self.probabilities)

    def total(self) -> float:
        return math.fsum(self.probabilities.values())

    def as_array(self, order) -> np.ndarray:
        return np.array([self.probabilities.get(k, 0.0) for k in order])

    def ranked(self) -> list[tuple[str, float]]:
        """Entries by descending probability, ties by id."""
        return sorted(self.probabilities.items(), key=lambda kv: (-kv[1], kv[0]))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["part_id", "probability"])
        for k, p in self.ranked():
            writer.writerow([k, f"{p:.12g}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, source) -> "BeliefVector":
        text = source if str(source).startswith("part_id") else Path(source).read_text(encoding="utf-8")
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][:2] != ["part_id", "probability"]:
            raise BeliefError("belief CSV must start with a 'part_id,probability' header")
        try:
            probs = {r[0]: float(r[1]) for r in rows[1:] if r}
        except (IndexError, ValueError) as exc:
            raise BeliefError(f"malformed belief CSV row: {exc}") from exc
        return cls(probs)


def transition_matrix(graph: QueryPartGraph) -> tuple[sp.csr_matrix, list[str]]:
    """Row-stochastic transition matrix over sorted vertex ids.

    Raises ConnectivityError when some vertex has no outgoing weight.
    """
    mat, order = graph.to_sparse()
    out = np.asarray(mat.sum(axis=1)).ravel()
    if len(order) and np.any(out <= 0):
        dangling = [order[i] for i in np.flatnonzero(out <= 0)]
        raise ConnectivityError(
            f"dangling vertices without outgoing edges: {', '.join(dangling[:5])}"
            + (f" (+{len(dangling) - 5} more)" if len(dangling) > 5 else "")
        )
    inv = sp.diags(1.0 / out)
    return (inv @ mat).tocsr(), order


def stationary_power(trans: sp.csr_matrix, config: PageRankConfig) -> tuple[np.ndarray, int, float]:
    """Iterate ``x <- x M`` from the uniform vector until the L1 step is below tolerance."""
    n = trans.shape[0]
    mt = trans.T.tocsr()
    x = np.full(n, 1.0 / n)
    step = math.inf
    for it in range(1, config.max_iterations + 1):
        nxt = mt @ x
        nxt /= nxt.sum()
        step = float(np.abs(nxt - x).sum())
        x = nxt
        if step < config.tolerance:
            break
    else:
        raise ConvergenceError(
            f"power iteration did not converge in {config.max_iterations} iterations "
            f"(last L1 step {step:.3e})",
            residual=step,
            iterations=config.max_iterations,
        )
    residual = float(np.abs(mt @ x - x).sum())
    return x, it, residual


def pagerank(graph: QueryPartGraph, config: PageRankConfig | None = None,
             check: bool = True) -> BeliefVector:
    """Stationary distribution of the random walk on ``graph``.

    With ``check`` the graph is first tested for strong connectivity, and a
    ConnectivityError carrying the report is raised when it fails.
    """
    config = config or PageRankConfig()
    if len(graph) == 0:
        raise ConnectivityError("empty graph")
    if check:
        report = check_connectivity(graph)
        if not report.strongly_connected:
            raise ConnectivityError(f"graph is not strongly connected: {report.describe()}", report)
    trans, order = transition_matrix(graph)
    x, iterations, residual = stationary_power(trans, config)
    log.debug("pagerank: %d vertices, %d iterations, residual %.3e", len(order), iterations, residual)
    return BeliefVector(dict(zip(order, x.tolist())), iterations, residual)


def compute_belief(topology: QueryPartGraph, user: QueryPartGraph, alpha: float,
                   config: PageRankConfig | None = None) -> BeliefVector:
    """Belief on the alpha-blend of the topology graph and a user graph."""
    return pagerank(merge(topology, user, alpha), config)
