import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpbelief import (
    BeliefVector,
    ConnectivityError,
    ConvergenceError,
    PageRankConfig,
    QueryPartGraph,
    build_log_graph,
    build_schema_graph,
    compute_belief,
    even_mix,
    generate_log,
    pagerank,
    transition_matrix,
)
from qpbelief.workload import Template, TemplateParams

from conftest import dense_stationary, random_strong_graph


def test_single_vertex():
    b = pagerank(QueryPartGraph(edges={("M:v", "M:v"): 1}))
    assert b.probabilities == {"M:v": 1.0}


def test_two_vertices_symmetric():
    g = QueryPartGraph(edges={("M:u", "M:v"): 1, ("M:v", "M:u"): 1, ("M:u", "M:u"): 1, ("M:v", "M:v"): 1})
    b = pagerank(g)
    assert b["M:u"] == pytest.approx(0.5, abs=1e-12)
    assert b["M:v"] == pytest.approx(0.5, abs=1e-12)


def test_three_vertex_balance():
    g = QueryPartGraph(edges={
        ("M:a", "M:b"): 2, ("M:a", "M:c"): 1, ("M:b", "M:a"): 1, ("M:c", "M:a"): 1,
        ("M:a", "M:a"): 1, ("M:b", "M:b"): 1, ("M:c", "M:c"): 1,
    })
    b = pagerank(g)
    oracle = dense_stationary(g)
    for v, expected in {"M:a": 0.4, "M:b": 0.4, "M:c": 0.2}.items():
        assert b[v] == pytest.approx(expected, abs=1e-9)
        assert oracle[v] == pytest.approx(expected, abs=1e-12)


def test_transition_rows_sum_to_one():
    rng = np.random.default_rng(0)
    mat, order = transition_matrix(random_strong_graph(rng, 30))
    np.testing.assert_allclose(np.asarray(mat.sum(axis=1)).ravel(), 1.0, atol=1e-12)
    assert order == sorted(order)


def test_errors():
    with pytest.raises(ConnectivityError, match="not strongly connected"):
        pagerank(QueryPartGraph(edges={("M:a", "M:a"): 1, ("M:b", "M:b"): 1}))
    with pytest.raises(ConnectivityError, match="dangling"):
        pagerank(QueryPartGraph(edges={("M:a", "M:b"): 1, ("M:a", "M:a"): 1}), check=False)
    with pytest.raises(ConnectivityError):
        pagerank(QueryPartGraph())
    periodic = QueryPartGraph(edges={("M:a", "M:b"): 1, ("M:b", "M:a"): 1, ("M:a", "M:a"): 1e-9})
    with pytest.raises(ConvergenceError) as info:
        pagerank(periodic, PageRankConfig(max_iterations=5))
    assert info.value.residual > 0
    with pytest.raises(ValueError):
        PageRankConfig(tolerance=0)
    with pytest.raises(ValueError):
        PageRankConfig(max_iterations=0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 1e3))
def test_pagerank_properties(seed, scale):
    rng = np.random.default_rng(seed)
    g = random_strong_graph(rng, 50)
    b = pagerank(g)
    assert b.support == g.vertices
    assert all(p >= 0 for p in b.probabilities.values())
    assert abs(b.total() - 1.0) < 1e-9
    assert b.residual < 10 * PageRankConfig().tolerance
    oracle = dense_stationary(g)
    for v, p in oracle.items():
        assert abs(b[v] - p) < 1e-6
    scaled = pagerank(QueryPartGraph(g.vertices, {k: w * scale for k, w in g.edges.items()}))
    for v in g.vertices:
        assert abs(scaled[v] - b[v]) < 1e-9
    assert pagerank(g).probabilities == b.probabilities


def _fixture(schema, seed):
    topo = build_log_graph(generate_log(schema, even_mix(43), seed), build_schema_graph(schema))
    user_log = generate_log(schema, [(TemplateParams(Template.SLICE_ALL), 7)], seed + 1000, start_index=43)
    return topo, build_log_graph(user_log), user_log


def test_empty_user_or_zero_alpha_is_topology(ssb_schema):
    topo, user, _ = _fixture(ssb_schema, 42)
    base = pagerank(topo)
    for alpha in (0.0, 0.5):
        b = compute_belief(topo, QueryPartGraph(), alpha)
        for v in topo.vertices:
            assert b[v] == pytest.approx(base[v], abs=1e-12)
    b = compute_belief(topo, user, 0.0)
    for v in topo.vertices:
        assert b[v] == pytest.approx(base[v], abs=1e-12)


def test_alpha_shifts_mass_toward_user_parts(ssb_schema):
    for seed in range(20):
        topo, user, _ = _fixture(ssb_schema, seed)
        visited = user.vertices
        low = math.fsum(compute_belief(topo, user, 0.2)[v] for v in visited)
        high = math.fsum(compute_belief(topo, user, 0.8)[v] for v in visited)
        assert high > low


def test_belief_csv_round_trip():
    b = pagerank(random_strong_graph(np.random.default_rng(3), 20))
    text = b.to_csv()
    rows = text.splitlines()
    assert rows[0] == "part_id,probability"
    again = BeliefVector.from_csv(text)
    assert again.probabilities.keys() == b.probabilities.keys()
    for k, p in b.probabilities.items():
        assert again[k] == pytest.approx(p, rel=1e-11)
    probs = [float(r.split(",")[1]) for r in rows[1:]]
    assert probs == sorted(probs, reverse=True)
