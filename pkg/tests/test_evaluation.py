import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpbelief import (
    BeliefError,
    BeliefVector,
    Log,
    SeriesBundle,
    alpha_sweep,
    build_log_graph,
    build_schema_graph,
    compute_belief,
    cumulative_unique_parts,
    even_mix,
    generate_log,
    hellinger,
    pagerank,
    reco_impact,
    recommend,
    sorted_distribution,
    write_results,
)
from qpbelief.evaluation import aggregate_rows, plateau_width, reference_beliefs, si_profiles
from qpbelief.workload import TEMPLATES, Template, TemplateParams

from conftest import make_session, q

QA = q(["a"], [("H", "ALL")])
QB = q(["b"], [("H", "ALL")])
QC = q(["c"], [("G", "ALL")])
QD = q(["d"], [("G", "X")])


def test_hellinger_examples():
    assert hellinger({"M:a": 0.5, "M:b": 0.5}, {"M:a": 0.5, "M:b": 0.5}) == 0.0
    assert hellinger({"M:a": 1.0}, {"M:b": 1.0}) == pytest.approx(1.0, abs=1e-12)
    d = hellinger({"M:a": 0.5, "M:b": 0.5}, {"M:a": 1.0, "M:b": 0.0})
    # sqrt(1 - 1/sqrt(2)), evaluated independently
    assert d == pytest.approx(0.5411961001461969, abs=1e-12)


def test_hellinger_rejects_non_distributions():
    with pytest.raises(BeliefError, match="does not sum to 1"):
        hellinger({"M:a": 0.5}, {"M:a": 1.0})
    with pytest.raises(BeliefError, match="negative"):
        hellinger({"M:a": 1.5, "M:b": -0.5}, {"M:a": 1.0})


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 30))
def test_hellinger_properties(seed, n):
    rng = np.random.default_rng(seed)
    keys = [f"M:k{i}" for i in range(n)]
    p = dict(zip(keys, rng.dirichlet(np.ones(n))))
    qk = rng.choice(keys + ["M:extra"], size=max(1, n // 2), replace=False)
    qq = dict(zip(qk, rng.dirichlet(np.ones(len(qk)))))
    d = hellinger(p, qq)
    assert abs(d - hellinger(qq, p)) < 1e-12
    assert hellinger(p, p) < 1e-12
    assert 0.0 <= d <= 1.0


def test_sorted_distribution():
    s = sorted_distribution(BeliefVector({f"M:{c}": 0.25 for c in "abcd"}))
    assert list(s.y) == [0.25] * 4
    assert list(s.x) == [1, 2, 3, 4]
    assert plateau_width(s.y) == 4
    assert plateau_width([1.0, 0.96, 0.94, 0.99]) == 2
    assert plateau_width([]) == 0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_sorted_distribution_is_non_increasing(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    b = BeliefVector(dict(zip([f"M:{i}" for i in range(n)], rng.dirichlet(np.ones(n)))))
    y = sorted_distribution(b).y
    assert np.all(np.diff(y) <= 0)
    assert abs(math.fsum(y) - 1.0) < 1e-9


@pytest.mark.xfail(reason="leading plateau of the slice-all belief is not wider on these fixtures; "
                          "widths measured in the decisions ledger", strict=False)
def test_slice_all_plateau_wider_than_topology(ssb_schema):
    wider = 0
    for seed in range(20):
        topo = build_log_graph(generate_log(ssb_schema, even_mix(43), seed), build_schema_graph(ssb_schema))
        user = build_log_graph(generate_log(ssb_schema, [(TemplateParams(Template.SLICE_ALL), 7)], seed + 1,
                                            start_index=43))
        a = plateau_width(sorted_distribution(pagerank(topo)).y)
        b = plateau_width(sorted_distribution(compute_belief(topo, user, 0.8)).y)
        wider += b > a
    assert wider == 20


def test_cumulative_unique_parts():
    s = make_session("s", [QA, q(["a", "b"], [("H", "ALL")]), QB])
    assert list(cumulative_unique_parts(s).y) == [2, 3, 3]
    assert list(cumulative_unique_parts(make_session("t", [QD])).y) == [2]


def test_series_and_aggregation():
    with pytest.raises(ValueError):
        SeriesBundle("bad", [1, 1], [0, 0], [0, 0])
    agg = aggregate_rows("r", [[1.0, 2.0, 3.0], [3.0, 4.0]])
    assert list(agg.y) == [2.0, 3.0, 3.0]
    assert list(agg.n) == [2, 2, 1]
    assert agg.y_sd[0] == pytest.approx(math.sqrt(2))
    assert agg.to_csv().splitlines()[:2] == ["x,y,y_sd,n", "1,2,1.41421356,2"]


def test_recommend_continues_matching_session():
    prefix = make_session("p", [QA, QB])
    train = [make_session("t1", [QA, QB, QC, QD]), make_session("t0", [QD, QD, QC])]
    assert recommend(train, prefix, k=5) == [QC, QD]
    assert recommend(train, prefix, k=1) == [QC]


def test_recommend_prefers_overlap_over_disjoint():
    prefix = make_session("p", [QA])
    overlap = make_session("z-overlap", [q(["a", "b"], [("H", "ALL")]), QC, QD])
    disjoint = make_session("a-disjoint", [QD, QD, QC])
    assert recommend([disjoint, overlap], prefix, k=2) == [QC, QD]


def test_recommend_tie_breaks_by_session_id():
    prefix = make_session("p", [QA])
    s1 = make_session("b", [QA, QB])
    s2 = make_session("a", [QA, QC])
    assert recommend([s1, s2], prefix, k=1) == [QC]


def test_recommend_errors():
    with pytest.raises(ValueError):
        recommend([], make_session("p", [QA]))
    with pytest.raises(ValueError):
        recommend([make_session("t", [QA, QB])], make_session("p", [QA]), k=0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_recommend_never_picks_a_disjoint_session(seed):
    rng = np.random.default_rng(seed)
    vocab = [q([f"m{i}"], [("H", "ALL")]) for i in range(6)]
    other = [q([f"z{i}"], [("G", "X")]) for i in range(4)]
    prefix = make_session("p", [vocab[i] for i in rng.integers(6, size=2)])
    near = make_session(f"s{int(rng.integers(100))}", [vocab[i] for i in rng.integers(6, size=4)])
    far = make_session(f"s{int(rng.integers(100, 200))}", [other[i] for i in rng.integers(4, size=4)])
    recs = recommend([far, near], prefix, k=3)
    assert recs and all(r in near.queries for r in recs)


def test_alpha_sweep_small(ssb_schema):
    table = alpha_sweep(ssb_schema, alphas=(0.0, 0.5, 0.9), runs=2, seed=42)
    assert table.rows == [t.value for t in TEMPLATES]
    assert table.cols == ["0", "0.5", "0.9"]
    assert np.all(np.abs(table.mean[:, 0]) < 1e-9)
    assert np.all((table.runs >= 0) & (table.runs <= 1))
    again = alpha_sweep(ssb_schema, alphas=(0.0, 0.5, 0.9), runs=2, seed=42, jobs=2)
    assert again.to_csv() == table.to_csv()


def test_reco_impact_small(ssb_schema):
    kw = dict(runs=1, seed=42, templates=(Template.SLICE_ALL, Template.EXPLORATIVE))
    ident = reco_impact(ssb_schema, "identical", **kw)
    indep = reco_impact(ssb_schema, "independent", **kw)
    for t in (ident, indep):
        assert np.all((t.mean >= 0) & (t.mean <= 1))
        assert t.rows == t.cols == ["slice_all", "explorative"]
    with pytest.raises(ValueError):
        reco_impact(ssb_schema, "other", runs=1)


def test_reference_side_is_scenario_independent(ssb_schema):
    a = reference_beliefs(ssb_schema, 0, 42)
    b = reference_beliefs(ssb_schema, 0, 42)
    assert a.keys() == {t.value for t in TEMPLATES}
    for key in a:
        assert a[key].to_csv() == b[key].to_csv()


def test_si_profiles_small(ssb_schema):
    prof = si_profiles(ssb_schema, per_template_sessions=3, seed=1)
    assert set(prof.si) == {t.value for t in TEMPLATES}
    for name, series in prof.si.items():
        assert 1 <= len(series) <= 12
        assert np.all(series.y >= 0)
        assert len(prof.cumulative[name]) == len(series)
    with pytest.raises(ValueError):
        si_profiles(ssb_schema, per_template_sessions=1)


def test_write_results_layout(tmp_path, ssb_schema):
    table = alpha_sweep(ssb_schema, alphas=(0.1,), runs=1, seed=0, user_template=(Template.SLICE_ALL,))
    series = {"x": SeriesBundle("x", [1, 2], [0.5, 0.6], [0.0, 0.1])}
    out = write_results(tmp_path, "alpha-sweep", table=table, series=series, meta={"seed": 0}, timestamp="t0")
    again = write_results(tmp_path, "alpha-sweep", table=table, meta={"seed": 0}, timestamp="t0")
    assert out == tmp_path / "alpha-sweep" / "t0"
    assert again.name == "t0-1"
    assert sorted(p.name for p in out.iterdir()) == ["meta.json", "series-x.csv", "table.csv"]
    meta = json.loads((out / "meta.json").read_text())
    assert meta["seed"] == 0 and meta["log_base"] == "e" and meta["experiment"] == "alpha-sweep"
    assert (out / "table.csv").read_text().startswith("row,col,mean,sd,runs\n")


def test_user_log_layout_matches_protocol(ssb_schema):
    # 43 topology sessions then 7 user sessions of one template
    mix = even_mix(43) + [(TemplateParams(Template.SLICE_ALL), 7)]
    log = generate_log(ssb_schema, mix, 42)
    assert len(log) == 50
    assert [s.template_label for s in log.sessions[43:]] == ["slice_all"] * 7
    assert isinstance(Log(log.sessions[:43]), Log)
