"""Distribution comparison and the canned belief / interestingness experiments.

Experiments
-----------
:func:`alpha_sweep`
    Hellinger distance between the topology belief and the user-biased
    belief, per user template and blend weight.
:func:`si_profiles`
    Subjective interestingness by query position for each template.
:func:`reco_impact`
    Distance between a reference belief and the belief induced by recommended
    queries, when the recommender is trained on the same log as the reference
    (``identical``) or on a freshly generated one (``independent``).

The recommender used by :func:`reco_impact` is a stand-in: a nearest-session
recommender over Jaccard similarity of cumulative part sets (:func:`recommend`).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .belief import BeliefVector, PageRankConfig, compute_belief, pagerank
from .errors import BeliefError
from .graph import QueryPartGraph, build_log_graph, build_schema_graph
from .interestingness import SIScore, evaluate_session
from .query import Log, Query, Session
from .schema import CubeSchema
from .workload import TEMPLATES, Template, TemplateParams, derive_seed, even_mix, generate_log

FORMAT_VERSION = "1"


# -- distances and series ------------------------------------------------------

def _check_total(b: BeliefVector | Mapping[str, float], name: str) -> Mapping[str, float]:
    probs = b.probabilities if isinstance(b, BeliefVector) else b
    total = math.fsum(probs.values())
    if abs(total - 1.0) > 1e-6:
        raise BeliefError(f"{name} does not sum to 1 (sum = {total:.9f})")
    if any(v < 0 for v in probs.values()):
        raise BeliefError(f"{name} has negative probabilities")
    return probs


def hellinger(p: BeliefVector | Mapping[str, float], q: BeliefVector | Mapping[str, float]) -> float:
    """Discrete Hellinger distance, aligning supports over the union of part ids."""
    pp = _check_total(p, "first distribution")
    qq = _check_total(q, "second distribution")
    keys = sorted(set(pp) | set(qq))
    acc = math.fsum((math.sqrt(pp.get(k, 0.0)) - math.sqrt(qq.get(k, 0.0))) ** 2 for k in keys)
    return min(1.0, math.sqrt(acc) / math.sqrt(2.0))


@dataclass
class SeriesBundle:
    label: str
    x: np.ndarray
    y: np.ndarray
    y_sd: np.ndarray
    n: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x)
        self.y = np.asarray(self.y, dtype=float)
        self.y_sd = np.asarray(self.y_sd, dtype=float)
        if len(self.x) > 1 and not np.all(np.diff(self.x) > 0):
            raise ValueError("series x must be strictly increasing")

    def __len__(self) -> int:
        return len(self.x)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "y_sd", "n"])
        counts = self.n if self.n is not None else [""] * len(self.x)
        for x, y, sd, c in zip(self.x, self.y, self.y_sd, counts):
            writer.writerow([int(x), f"{y:.9g}", f"{sd:.9g}", "" if c == "" else int(c)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def sorted_distribution(belief: BeliefVector, label: str = "belief") -> SeriesBundle:
    """Probabilities in decreasing order, against rank 1..n."""
    y = np.sort(np.fromiter(belief.probabilities.values(), dtype=float))[::-1]
    return SeriesBundle(label, np.arange(1, len(y) + 1), y, np.zeros_like(y))


def plateau_width(y: Sequence[float], rel: float = 0.05) -> int:
    """Length of the leading run of values within ``rel`` of the first one."""
    y = np.asarray(y)
    if len(y) == 0:
        return 0
    inside = y >= y[0] * (1.0 - rel)
    return int(np.argmin(inside)) if not inside.all() else len(y)


def cumulative_unique_parts(session: Session, label: str | None = None) -> SeriesBundle:
    seen: set = set()
    y = []
    for q in session.queries:
        seen |= q.parts
        y.append(len(seen))
    return SeriesBundle(label or session.id, np.arange(1, len(y) + 1), np.array(y, float), np.zeros(len(y)))


def aggregate_rows(label: str, rows: Sequence[Sequence[float]]) -> SeriesBundle:
    """Position-wise mean and sample sd over ragged rows (position t keeps rows of length >= t)."""
    width = max(len(r) for r in rows)
    mean, sd, count = [], [], []
    for t in range(width):
        col = np.array([r[t] for r in rows if len(r) > t])
        mean.append(col.mean())
        sd.append(col.std(ddof=1) if len(col) > 1 else 0.0)
        count.append(len(col))
    return SeriesBundle(label, np.arange(1, width + 1), np.array(mean), np.array(sd), np.array(count))


@dataclass
class DistanceTable:
    rows: list[str]
    cols: list[str]
    mean: np.ndarray
    sd: np.ndarray
    run_count: int
    runs: np.ndarray | None = field(default=None, repr=False)

    def cell(self, row: str, col: str) -> float:
        return float(self.mean[self.rows.index(row), self.cols.index(col)])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["row", "col", "mean", "sd", "runs"])
        for i, r in enumerate(self.rows):
            for j, c in enumerate(self.cols):
                writer.writerow([r, c, f"{self.mean[i, j]:.9g}", f"{self.sd[i, j]:.9g}", self.run_count])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def pretty(self, digits: int = 3) -> str:
        width = max(len(r) for r in self.rows) + 2
        head = " " * width + " ".join(f"{c:>9.9}" for c in self.cols)
        lines = [head]
        for i, r in enumerate(self.rows):
            lines.append(f"{r:<{width}}" + " ".join(f"{self.mean[i, j]:>9.{digits}f}" for j in range(len(self.cols))))
        return "\n".join(lines)


def _table(rows, cols, samples: np.ndarray) -> DistanceTable:
    """``samples`` has shape (runs, len(rows), len(cols))."""
    runs = samples.shape[0]
    sd = samples.std(axis=0, ddof=1) if runs > 1 else np.zeros(samples.shape[1:])
    return DistanceTable(list(rows), list(cols), samples.mean(axis=0), sd, runs, samples)


def _map_runs(fn: Callable, args: Sequence, jobs: int) -> list:
    if jobs is None or jobs <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args))


# -- alpha sweep ---------------------------------------------------------------

DEFAULT_ALPHAS = tuple(round(0.1 * i, 1) for i in range(1, 10))


@dataclass(frozen=True)
class _SweepRun:
    schema: CubeSchema
    topology_mix: tuple
    templates: tuple
    user_sessions: int
    alphas: tuple
    seed: int
    run: int
    config: PageRankConfig
    session_length: tuple


def _sweep_once(job: _SweepRun) -> np.ndarray:
    schema = job.schema
    n_topo = sum(c for _, c in job.topology_mix)
    topo_log = generate_log(schema, job.topology_mix, derive_seed(job.seed, 2 * job.run))
    gt = build_log_graph(topo_log, build_schema_graph(schema))
    base = pagerank(gt, job.config)
    out = np.zeros((len(job.templates), len(job.alphas)))
    user_seed = derive_seed(job.seed, 2 * job.run + 1)
    for i, t in enumerate(job.templates):
        params = TemplateParams(t, session_length=job.session_length)
        user_log = generate_log(schema, [(params, job.user_sessions)], derive_seed(user_seed, i),
                                start_index=n_topo, user=f"user-{t.value}")
        gu = build_log_graph(user_log)
        for j, a in enumerate(job.alphas):
            if a == 0.0:
                out[i, j] = hellinger(base, pagerank(gt, job.config))
            else:
                out[i, j] = hellinger(base, compute_belief(gt, gu, a, job.config))
    return out


def alpha_sweep(schema: CubeSchema, topology_mix=None, user_template: Template | Sequence[Template] = TEMPLATES,
                alphas: Sequence[float] = DEFAULT_ALPHAS, runs: int = 20, seed: int = 0, *,
                user_sessions: int = 7, config: PageRankConfig | None = None, jobs: int = 1,
                session_length: tuple[int, int] = (4, 12)) -> DistanceTable:
    """Mean Hellinger distance between topology belief and user-biased belief.

    Each run draws a fresh topology log (default: 43 sessions, templates
    evenly mixed) and, per user template, a 7-session user log.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    alphas = tuple(float(a) for a in alphas)
    if any(not 0.0 <= a < 1.0 for a in alphas):
        raise ValueError("alphas must lie in [0, 1)")
    if topology_mix is None:
        topology_mix = even_mix(43, session_length=session_length)
    templates = (Template.parse(user_template),) if isinstance(user_template, (str, Template)) \
        else tuple(Template.parse(t) for t in user_template)
    jobs_list = [
        _SweepRun(schema, tuple(topology_mix), templates, user_sessions, alphas, seed, r,
                  config or PageRankConfig(), tuple(session_length))
        for r in range(runs)
    ]
    samples = np.stack(_map_runs(_sweep_once, jobs_list, jobs))
    return _table([t.value for t in templates], [f"{a:g}" for a in alphas], samples)


# -- subjective interestingness by profile -------------------------------------

def _subtract(total: dict, part: dict) -> dict:
    out = dict(total)
    for k, w in part.items():
        left = out[k] - w
        if left:
            out[k] = left
        else:
            del out[k]
    return out


@dataclass
class SIProfiles:
    si: dict[str, SeriesBundle]
    cumulative: dict[str, SeriesBundle]
    scores: dict[str, list[list[SIScore]]]
    finals: dict[str, list[int]]

    def mean_si(self, template: str) -> float:
        """Mean of the per-position mean SI series."""
        return float(self.si[template].y.mean())

    def pooled_si(self, template: str) -> float:
        return float(np.mean([s.si for row in self.scores[template] for s in row]))

    def final_cumulative(self, template: str) -> float:
        """Mean over sessions of the last cumulative unique-part count."""
        return float(np.mean(self.finals[template]))


def profile_pool(schema: CubeSchema, per_template_sessions: int, seed: int,
                 templates: Sequence[Template] = TEMPLATES, session_length=(4, 12)) -> dict[str, Log]:
    return {
        t.value: generate_log(schema, [(TemplateParams(t, session_length=session_length), per_template_sessions)],
                              derive_seed(seed, i), user=f"user-{t.value}")
        for i, t in enumerate(templates)
    }


def si_profiles(schema: CubeSchema, per_template_sessions: int = 50, alpha: float = 0.9, seed: int = 0, *,
                templates: Sequence[Template] = TEMPLATES, config: PageRankConfig | None = None,
                session_length: tuple[int, int] = (4, 12), pool: Mapping[str, Log] | None = None) -> SIProfiles:
    """SI by query position for each template.

    Every session is scored with beliefs updated query by query. The other
    sessions of the same template play the user's past log and seed the
    session graph; the topology graph holds the schema plus every other
    generated session, all templates included.
    """
    if per_template_sessions < 2:
        raise ValueError("per_template_sessions must be >= 2")
    templates = tuple(Template.parse(t) for t in templates)
    pool = dict(pool) if pool is not None else profile_pool(schema, per_template_sessions, seed, templates,
                                                              session_length)
    schema_graph = build_schema_graph(schema)
    contrib = {s.id: build_log_graph([s])._edges for log in pool.values() for s in log}
    everything = build_log_graph([s for log in pool.values() for s in log], schema_graph)
    si_series, cum_series, scores, finals = {}, {}, {}, {}
    for t in templates:
        name = t.value
        same = build_log_graph(pool[name])._edges
        rows = []
        cum_rows = []
        for s in pool[name]:
            gt = QueryPartGraph._trusted(everything.vertices, _subtract(everything._edges, contrib[s.id]))
            hist_edges = _subtract(same, contrib[s.id])
            hist = QueryPartGraph._trusted(frozenset(v for e in hist_edges for v in e), hist_edges)
            rows.append(evaluate_session(s, None, None, alpha, config, history=hist, topology=gt))
            cum_rows.append(cumulative_unique_parts(s).y)
        scores[name] = rows
        finals[name] = [int(r[-1]) for r in cum_rows]
        si_series[name] = aggregate_rows(name, [[x.si for x in r] for r in rows])
        cum_series[name] = aggregate_rows(name, cum_rows)
    return SIProfiles(si_series, cum_series, scores, finals)


# -- recommender surrogate and impact protocol ---------------------------------

def _jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def recommend(training: Log | Sequence[Session], seed_prefix: Session | Sequence[Query], k: int = 5) -> list[Query]:
    """Continuation of the training session that best matches the prefix.

    Every training session is aligned at every point ``j`` (its first ``j``
    queries) and scored by Jaccard similarity between the parts used up to
    ``j`` and the parts of the whole prefix. The next ``k`` queries after the
    best alignment are returned. Ties go to the alignment closest to the
    prefix length, then to the lowest session id.
    """
    sessions = sorted(training.sessions if isinstance(training, Log) else training, key=lambda s: s.id)
    if not sessions:
        raise ValueError("training log is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    prefix_queries = seed_prefix.queries if isinstance(seed_prefix, Session) else tuple(seed_prefix)
    target = frozenset().union(*(q.parts for q in prefix_queries))
    best = None
    for s in sessions:
        seen: frozenset = frozenset()
        for j, q in enumerate(s.queries, start=1):
            seen = seen | q.parts
            if j == len(s.queries) and len(s.queries) > 1:
                break
            key = (-_jaccard(seen, target), abs(j - len(prefix_queries)), s.id, j)
            if best is None or key < best[0]:
                best = (key, s, j)
    _, s, j = best
    return list(s.queries[j:j + k])


SCENARIOS = ("identical", "independent")


@dataclass(frozen=True)
class _ImpactRun:
    schema: CubeSchema
    scenario: str
    templates: tuple
    alpha: float
    k: int
    seed: int
    run: int
    topology_sessions: int
    user_sessions: int
    training_sessions: int
    config: PageRankConfig
    session_length: tuple


def _reference_side(job: _ImpactRun):
    """Reference logs and beliefs; depends only on (seed, run), never on the scenario."""
    schema = job.schema
    ref_seed = derive_seed(job.seed, 3 * job.run)
    topo = generate_log(schema, even_mix(job.topology_sessions, job.templates, session_length=job.session_length),
                        derive_seed(ref_seed, 0))
    gt = build_log_graph(topo, build_schema_graph(schema))
    logs, beliefs = {}, {}
    for i, r in enumerate(job.templates):
        users = generate_log(schema, [(TemplateParams(r, session_length=job.session_length), job.user_sessions)],
                             derive_seed(ref_seed, 1 + i), start_index=job.topology_sessions, user="reference")
        logs[r] = Log(topo.sessions + users.sessions)
        beliefs[r] = compute_belief(gt, build_log_graph(users), job.alpha, job.config)
    return topo, gt, logs, beliefs


def _fresh_log(job: _ImpactRun, reference: Template, index: int) -> tuple[Log, Log]:
    """Independent log with the reference layout, as (topology part, whole log)."""
    fresh_seed = derive_seed(job.seed, 3 * job.run + 1)
    schema = job.schema
    topo = generate_log(schema, even_mix(job.topology_sessions, job.templates, session_length=job.session_length),
                        derive_seed(fresh_seed, 100 + index))
    users = generate_log(schema, [(TemplateParams(reference, session_length=job.session_length), job.user_sessions)],
                         derive_seed(fresh_seed, 200 + index), start_index=job.topology_sessions)
    return topo, Log(topo.sessions + users.sessions)


def _draw_training(source: Log, template: Template, n_train: int, rng: np.random.Generator):
    pool = [s for s in source if s.template_label == template.value]
    order = rng.permutation(len(pool))
    picked = [pool[i] for i in order]
    seed_session = picked[0]
    training = picked[1:1 + n_train]
    truncated = seed_session.queries[: max(1, len(seed_session) // 2)]
    return training, truncated


def _impact_once(job: _ImpactRun) -> np.ndarray:
    _, gt, ref_logs, ref_beliefs = _reference_side(job)
    schema_graph = build_schema_graph(job.schema)
    out = np.zeros((len(job.templates), len(job.templates)))
    test_seed = derive_seed(job.seed, 3 * job.run + 2)
    for j, ref in enumerate(job.templates):
        # The test belief is learned on the log the recommender draws from.
        if job.scenario == "identical":
            source, test_gt = ref_logs[ref], gt
        else:
            topo, source = _fresh_log(job, ref, j)
            test_gt = build_log_graph(topo, schema_graph)
        for i, test in enumerate(job.templates):
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([test_seed, i, j])))
            training, prefix = _draw_training(source, test, job.training_sessions, rng)
            recs = recommend(training, prefix, job.k) or list(prefix)
            reco_session = Session("recommended", "test", tuple(recs))
            test_belief = compute_belief(test_gt, build_log_graph([reco_session]), job.alpha, job.config)
            out[i, j] = hellinger(ref_beliefs[ref], test_belief)
    return out


def reference_beliefs(schema: CubeSchema, run: int, seed: int, *, alpha: float = 0.8,
                      templates: Sequence[Template] = TEMPLATES, config: PageRankConfig | None = None,
                      topology_sessions: int = 43, user_sessions: int = 7,
                      session_length=(4, 12)) -> dict[str, BeliefVector]:
    """Reference beliefs of one impact run, per reference template."""
    job = _ImpactRun(schema, "identical", tuple(Template.parse(t) for t in templates), alpha, 5, seed, run,
                     topology_sessions, user_sessions, 10, config or PageRankConfig(), tuple(session_length))
    _, _, _, beliefs = _reference_side(job)
    return {t.value: b for t, b in beliefs.items()}


def reco_impact(schema: CubeSchema, scenario: str = "identical", runs: int = 10, seed: int = 0, *,
                alpha: float = 0.8, k: int = 5, templates: Sequence[Template] = TEMPLATES,
                topology_sessions: int = 43, user_sessions: int = 7, training_sessions: int = 10,
                config: PageRankConfig | None = None, jobs: int = 1,
                session_length: tuple[int, int] = (4, 12)) -> DistanceTable:
    """Distance between reference beliefs and recommendation-induced beliefs.

    Rows are test (recommender) templates, columns reference templates.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    templates = tuple(Template.parse(t) for t in templates)
    jobs_list = [
        _ImpactRun(schema, scenario, templates, alpha, k, seed, r, topology_sessions, user_sessions,
                   training_sessions, config or PageRankConfig(), tuple(session_length))
        for r in range(runs)
    ]
    samples = np.stack(_map_runs(_impact_once, jobs_list, jobs))
    names = [t.value for t in templates]
    return _table(names, names, samples)


# -- results directory ---------------------------------------------------------

def write_results(root, experiment: str, *, table: DistanceTable | None = None,
                  tables: Mapping[str, DistanceTable] | None = None,
                  series: Mapping[str, SeriesBundle] | None = None, meta: Mapping | None = None,
                  timestamp: str | None = None, table_text: str | None = None) -> Path:
    """Write ``<root>/<experiment>/<timestamp>/`` with table.csv, series-*.csv and meta.json."""
    stamp = timestamp or datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    base = Path(root) / experiment
    out = base / stamp
    n = 1
    while out.exists():
        out = base / f"{stamp}-{n}"
        n += 1
    out.mkdir(parents=True)
    if table is not None:
        table.to_csv(out / "table.csv")
    elif table_text is not None:
        (out / "table.csv").write_text(table_text, encoding="utf-8")
    for name, t in (tables or {}).items():
        t.to_csv(out / f"table-{name}.csv")
    for label, s in (series or {}).items():
        s.to_csv(out / f"series-{label}.csv")
    payload = {"experiment": experiment, "format_version": FORMAT_VERSION, "log_base": "e"}
    payload.update(meta or {})
    (out / "meta.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out
