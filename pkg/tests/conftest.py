import numpy as np
import pytest

from qpbelief import Query, Session, generate_schema, load_schema

REGION_DOC = {
    "name": "tiny",
    "measures": ["REVENUE"],
    "hierarchies": [
        {
            "name": "CUSTOMER",
            "levels": ["ALL", "REGION"],
            "members": {
                "ALL": {"all": ["AMERICA", "EUROPE"]},
                "REGION": {"AMERICA": [], "EUROPE": []},
            },
        }
    ],
}


@pytest.fixture
def region_schema():
    return load_schema(REGION_DOC)


@pytest.fixture(scope="session")
def ssb_schema():
    return generate_schema("ssb-like", 42)


def make_session(sid, queries, user="u", template=None):
    return Session(sid, user, tuple(queries), template)


def q(measures, group_by=(), filters=()):
    return Query.build(measures, group_by, filters)


RAND_LEVELS = {"H1": ["ALL", "A", "B"], "H2": ["ALL", "X"]}
RAND_MEASURES = ["m1", "m2", "m3"]


def random_query(rng):
    """A small valid query over a fixed toy vocabulary."""
    measures = list(rng.choice(RAND_MEASURES, size=int(rng.integers(1, 3)), replace=False))
    hs = list(rng.choice(sorted(RAND_LEVELS), size=int(rng.integers(1, 3)), replace=False))
    group_by = [(h, RAND_LEVELS[h][int(rng.integers(len(RAND_LEVELS[h])))]) for h in hs]
    filters = []
    for h in sorted(RAND_LEVELS):
        if rng.random() < 0.4:
            lv = RAND_LEVELS[h][int(rng.integers(1, len(RAND_LEVELS[h])))]
            filters.append((h, lv, f"v{int(rng.integers(3))}"))
    return Query.build(measures, group_by, filters)


def random_session(rng, sid, max_len=20):
    return make_session(sid, [random_query(rng) for _ in range(int(rng.integers(1, max_len + 1)))])


def random_strong_graph(rng, n_max=50):
    """Random strongly connected, aperiodic weighted graph on at most ``n_max`` vertices.

    A random Hamiltonian cycle makes it strongly connected; at least one
    self-loop makes it aperiodic.
    """
    from qpbelief import QueryPartGraph

    n = int(rng.integers(1, n_max + 1))
    names = [f"M:v{i:02d}" for i in range(n)]
    order = rng.permutation(n)
    edges = {}
    for i in range(n):
        edges[(names[order[i]], names[order[(i + 1) % n]])] = float(rng.uniform(0.1, 5.0))
    for _ in range(int(rng.integers(0, 3 * n + 1))):
        u, v = rng.integers(n, size=2)
        edges[(names[u], names[v])] = float(rng.uniform(0.1, 5.0))
    loops = rng.random(n) < 0.3
    loops[int(rng.integers(n))] = True
    for i in np.flatnonzero(loops):
        edges[(names[i], names[i])] = float(rng.uniform(0.1, 5.0))
    return QueryPartGraph(names, edges)


def dense_stationary(graph):
    """Dominant left eigenvector of the row-normalized weight matrix, by dense eigen-solve."""
    order = sorted(graph.vertices)
    idx = {v: i for i, v in enumerate(order)}
    w = np.zeros((len(order), len(order)))
    for (u, v), x in graph.edges.items():
        w[idx[u], idx[v]] = x
    m = w / w.sum(axis=1, keepdims=True)
    vals, vecs = np.linalg.eig(m.T)
    k = int(np.argmin(np.abs(vals - 1.0)))
    pi = np.real(vecs[:, k])
    pi = pi / pi.sum()
    return dict(zip(order, pi))


ACCEPTANCE_LINES: dict[int, str] = {}


def report_criterion(number, title, ok, detail=""):
    """Record one acceptance line; printed in the terminal summary and echoed now."""
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
