"""Synthetic exploration sessions following four prototypical templates.

Templates:

``slice_all``
    One seed query; every following query keeps measures and group-by and
    only moves the member filter over the members of one fixed level.
``slice_and_drill``
    Alternates sibling moves (another member at the current filter level)
    and drill moves (filter on a child member, group-by one level finer).
    Every query introduces at least one never seen part.
``goal_oriented``
    A seed and a goal query; each step applies one atomic mutation that
    brings the query strictly closer to the goal, and the session ends on it.
``explorative``
    Random atomic mutations from the seed for the first half, then a walk
    biased toward "surprising" queries built from parts unused so far.

All templates draw from the same closed vocabulary of atomic mutations:
roll-up or drill-down of one group-by level, filter member swap within a
level, filter add or remove, measure add or remove.

Randomness comes from numpy's PCG64 bit generator, seeded with a
``SeedSequence`` over ``(params.seed, crc32(session id))``. Sessions are
therefore a pure function of ``(schema, params, id)``.
"""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import WorkloadError
from .query import Log, Query, Session
from .schema import CubeSchema


class Template(str, enum.Enum):
    EXPLORATIVE = "explorative"
    GOAL_ORIENTED = "goal_oriented"
    SLICE_ALL = "slice_all"
    SLICE_AND_DRILL = "slice_and_drill"

    @classmethod
    def parse(cls, text: "str | Template") -> "Template":
        if isinstance(text, Template):
            return text
        key = str(text).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"goal": "goal_oriented", "goaloriented": "goal_oriented", "sliceall": "slice_all",
                   "sliceanddrill": "slice_and_drill", "slice_drill": "slice_and_drill"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown template {text!r}; expected one of {[t.value for t in cls]}") from None


TEMPLATES = (Template.EXPLORATIVE, Template.GOAL_ORIENTED, Template.SLICE_ALL, Template.SLICE_AND_DRILL)


@dataclass(frozen=True)
class TemplateParams:
    template: Template
    session_length: tuple[int, int] = (4, 12)
    seed: int = 0
    surprise_hops: int = 2
    goal_distance: int | None = None
    bias: float = 0.8
    seed_queries: int = 4
    pool_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "template", Template.parse(self.template))
        lo, hi = self.session_length
        if lo < 2 or hi < lo:
            raise ValueError(f"session_length must satisfy 2 <= min <= max, got {self.session_length}")
        if self.surprise_hops < 1:
            raise ValueError("surprise_hops must be >= 1")
        if self.goal_distance is not None and self.goal_distance < 1:
            raise ValueError("goal_distance must be >= 1")
        if not 0.0 <= self.bias <= 1.0:
            raise ValueError("bias must lie in [0, 1]")
        if self.seed_queries < 0:
            raise ValueError("seed_queries must be >= 0")


# -- query state and atomic mutations ------------------------------------------

@dataclass(frozen=True)
class QueryState:
    """Structured view of a generated query.

    ``levels`` maps group-by hierarchies to level indexes (0 is ALL);
    ``filters`` maps filtered hierarchies to ``(level index, member)``.
    The set of group-by hierarchies never changes under mutations.
    """

    measures: frozenset
    levels: tuple  # sorted tuple of (hierarchy, level index)
    filters: tuple  # sorted tuple of (hierarchy, (level index, member))

    @staticmethod
    def make(measures: Iterable[str], levels: dict, filters: dict) -> "QueryState":
        return QueryState(frozenset(measures), tuple(sorted(levels.items())), tuple(sorted(filters.items())))

    @property
    def level_map(self) -> dict:
        return dict(self.levels)

    @property
    def filter_map(self) -> dict:
        return dict(self.filters)

    def to_query(self, schema: CubeSchema) -> Query:
        group_by = [(h, schema.hierarchy(h).levels[i]) for h, i in self.levels]
        filters = [(h, schema.hierarchy(h).levels[i], m) for h, (i, m) in self.filters]
        return Query.build(sorted(self.measures), group_by, filters)


def edit_distance(a: QueryState, b: QueryState) -> int:
    """Minimal number of atomic mutations turning ``a`` into ``b``.

    Both states must group by the same hierarchies.
    """
    la, lb = a.level_map, b.level_map
    if la.keys() != lb.keys():
        raise WorkloadError("edit distance needs equal group-by hierarchy sets")
    d = sum(abs(la[h] - lb[h]) for h in la)
    fa, fb = a.filter_map, b.filter_map
    for h in set(fa) | set(fb):
        x, y = fa.get(h), fb.get(h)
        if x == y:
            continue
        if x is None or y is None:
            d += 1
        elif x[0] == y[0]:
            d += 1
        else:
            d += 2
    d += len(a.measures ^ b.measures)
    return d


class _Mutator:
    """Enumerates and applies atomic mutations on QueryState values."""

    def __init__(self, schema: CubeSchema, rng: np.random.Generator):
        self.schema = schema
        self.rng = rng
        self.h = {h.name: h for h in schema.hierarchies}
        self.hnames = [h.name for h in schema.hierarchies]

    # random draws -- always over sorted sequences for determinism
    def pick(self, seq: Sequence):
        return seq[int(self.rng.integers(len(seq)))]

    def members(self, hname: str, level: int) -> tuple[str, ...]:
        hier = self.h[hname]
        return hier.members[hier.levels[level]]

    def random_seed(self, group_by: Iterable[str] | None = None) -> QueryState:
        """Random query; ``group_by`` pins the set of group-by hierarchies."""
        n_meas = 1 if self.rng.random() < 0.6 else 2
        n_meas = min(n_meas, len(self.schema.measures))
        meas_idx = self.rng.choice(len(self.schema.measures), size=n_meas, replace=False)
        measures = [self.schema.measures[int(i)] for i in sorted(meas_idx)]
        if group_by is None:
            n_gb = int(self.rng.integers(1, min(3, len(self.hnames)) + 1))
            gb = sorted(int(i) for i in self.rng.choice(len(self.hnames), size=n_gb, replace=False))
        else:
            gb = sorted(self.hnames.index(h) for h in group_by)
        levels = {}
        for i in gb:
            hier = self.h[self.hnames[i]]
            levels[hier.name] = int(self.rng.integers(1, hier.depth))
        n_f = int(self.rng.integers(0, min(2, len(self.hnames)) + 1))
        filters = {}
        for i in sorted(int(i) for i in self.rng.choice(len(self.hnames), size=n_f, replace=False)):
            hier = self.h[self.hnames[i]]
            lv = int(self.rng.integers(1, hier.depth))
            filters[hier.name] = (lv, self.pick(hier.members[hier.levels[lv]]))
        return QueryState.make(measures, levels, filters)

    def moves(self, s: QueryState) -> dict[str, list]:
        """Applicable mutations grouped by type."""
        out: dict[str, list] = {}
        lv = s.level_map
        fl = s.filter_map
        drill = [("drill", h) for h, i in s.levels if i < self.h[h].depth - 1]
        roll = [("roll", h) for h, i in s.levels if i > 0]
        swap = []
        for h, (i, m) in s.filters:
            swap += [("swap", h, o) for o in self.members(h, i) if o != m]
        add_f = []
        for h in self.hnames:
            if h in fl:
                continue
            for i in range(1, self.h[h].depth):
                add_f += [("add_filter", h, i, m) for m in self.members(h, i)]
        rem_f = [("remove_filter", h) for h, _ in s.filters]
        add_m = [("add_measure", m) for m in self.schema.measures if m not in s.measures]
        rem_m = [("remove_measure", m) for m in sorted(s.measures)] if len(s.measures) > 1 else []
        for name, lst in (("drill", drill), ("roll", roll), ("swap", swap), ("add_filter", add_f),
                          ("remove_filter", rem_f), ("add_measure", add_m), ("remove_measure", rem_m)):
            if lst:
                out[name] = lst
        del lv
        return out

    @staticmethod
    def apply(s: QueryState, move: tuple) -> QueryState:
        kind = move[0]
        levels, filters, measures = s.level_map, s.filter_map, set(s.measures)
        if kind == "drill":
            levels[move[1]] += 1
        elif kind == "roll":
            levels[move[1]] -= 1
        elif kind == "swap":
            filters[move[1]] = (filters[move[1]][0], move[2])
        elif kind == "add_filter":
            filters[move[1]] = (move[2], move[3])
        elif kind == "remove_filter":
            del filters[move[1]]
        elif kind == "add_measure":
            measures.add(move[1])
        elif kind == "remove_measure":
            measures.discard(move[1])
        else:
            raise ValueError(f"unknown mutation {move!r}")
        return QueryState.make(measures, levels, filters)

    def random_move(self, s: QueryState, avoid: set | None = None) -> QueryState:
        """Apply a random mutation: first a type, then a concrete move of that type."""
        by_type = self.moves(s)
        for _ in range(8):
            kind = self.pick(sorted(by_type))
            nxt = self.apply(s, self.pick(by_type[kind]))
            if not avoid or nxt not in avoid:
                return nxt
        return nxt

    def toward(self, s: QueryState, target: QueryState) -> list[tuple]:
        """All atomic moves that reduce the edit distance to ``target`` by one."""
        out = []
        tl, sl = target.level_map, s.level_map
        for h in sorted(sl):
            if sl[h] < tl[h]:
                out.append(("drill", h))
            elif sl[h] > tl[h]:
                out.append(("roll", h))
        sf, tf = s.filter_map, target.filter_map
        for h in sorted(set(sf) | set(tf)):
            x, y = sf.get(h), tf.get(h)
            if x == y:
                continue
            if x is None:
                out.append(("add_filter", h, y[0], y[1]))
            elif y is None or x[0] != y[0]:
                out.append(("remove_filter", h))
            else:
                out.append(("swap", h, y[1]))
        for m in sorted(target.measures - s.measures):
            out.append(("add_measure", m))
        extra = sorted(s.measures - target.measures)
        if len(s.measures) > 1:
            out += [("remove_measure", m) for m in extra]
        return out


# -- templates -----------------------------------------------------------------

def _rng_for(params: TemplateParams, session_id: str) -> np.random.Generator:
    ss = np.random.SeedSequence([int(params.seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(session_id.encode("utf-8"))])
    return np.random.Generator(np.random.PCG64(ss))


def seed_pool(schema: CubeSchema, params: TemplateParams) -> list[QueryState]:
    """Seed queries shared by every session drawn with the same pool seed and template."""
    base = params.pool_seed if params.pool_seed is not None else params.seed
    ss = np.random.SeedSequence([int(base) & 0xFFFFFFFFFFFFFFFF,
                                 zlib.crc32(f"seed-pool/{params.template.value}".encode("utf-8"))])
    mut = _Mutator(schema, np.random.Generator(np.random.PCG64(ss)))
    return [mut.random_seed() for _ in range(params.seed_queries)]


def _seed_choice(seed: QueryState, schema: CubeSchema, options: Sequence):
    """Pick from ``options`` as a function of the seed query alone."""
    key = "|".join(seed.to_query(schema).part_ids())
    return options[zlib.crc32(key.encode("utf-8")) % len(options)]


def _slice_all(mut: _Mutator, n: int, seed: QueryState, params: TemplateParams,
               meta: dict) -> list[QueryState]:
    levels = seed.level_map
    base_filters = seed.filter_map
    candidates = [(h, i) for h in mut.hnames for i in range(1, mut.h[h].depth)]
    # The sliced level depends on the seed only, so sessions sharing a seed
    # slice the same level.
    big = [c for c in candidates if len(mut.members(*c)) >= params.session_length[1]] \
        or [c for c in candidates if len(mut.members(*c)) >= n]
    used_levels = []

    def start_pool(pool, from_seed=False):
        # Members are scanned in schema order, siblings first; the starting
        # parent is a function of the seed for the first pool.
        h, i = pool[0] if from_seed else mut.pick(pool)
        used_levels.append((h, i))
        hier = mut.h[h]
        parents = hier.members[hier.levels[i - 1]]
        parent = _seed_choice(seed, mut.schema, parents) if from_seed else mut.pick(parents)
        k = parents.index(parent)
        order = []
        for p in parents[k:] + parents[:k]:
            order.extend(hier.children(hier.levels[i - 1], p))
        return h, i, order

    h, i, order = start_pool([_seed_choice(seed, mut.schema, big or candidates)], from_seed=True)
    states = []
    while len(states) < n:
        if not order:
            remaining = [c for c in candidates if c not in used_levels] or candidates
            h, i, order = start_pool(remaining)
            meta.setdefault("reseeded", []).append(
                {"at": len(states) + 1, "hierarchy": h, "level": mut.h[h].levels[i]}
            )
        sliced = {lh for lh, _ in used_levels}
        filters = {k: v for k, v in base_filters.items() if k not in sliced}
        filters[h] = (i, order.pop(0))
        states.append(QueryState.make(seed.measures, levels, filters))
    return states


def _slice_and_drill(mut: _Mutator, n: int, seed: QueryState, meta: dict) -> list[QueryState]:
    deep = [h for h in mut.hnames if mut.h[h].depth >= 3]
    if not deep:
        raise WorkloadError("slice_and_drill needs a hierarchy with at least 3 levels (ALL included)")
    measures = seed.measures
    levels = seed.level_map
    filters = seed.filter_map
    used: set[tuple[str, int, str]] = set()

    def focus(h: str, member_level: int, member: str):
        hier = mut.h[h]
        filters[h] = (member_level, member)
        levels[h] = min(member_level + 1, hier.depth - 1)
        used.add((h, member_level, member))

    # Drill along a hierarchy the seed already groups by, from its top level.
    grouped = [x for x in deep if x in levels]
    h = mut.pick(grouped or deep)
    focus(h, 1, mut.pick(mut.members(h, 1)))
    states = [QueryState.make(measures, levels, filters)]
    want_drill = False
    visited_h = [h]
    while len(states) < n:
        i, m = filters[h]
        hier = mut.h[h]
        can_drill = i < hier.depth - 1
        parent = hier.parent(hier.levels[i], m)
        sibs = [c for c in hier.children(hier.levels[i - 1], parent) if (h, i, c) not in used]
        cousins = [c for c in mut.members(h, i) if (h, i, c) not in used]
        if want_drill and can_drill:
            focus(h, i + 1, mut.pick(hier.children(hier.levels[i], m)))
        elif sibs:
            focus(h, i, mut.pick(sibs))
        elif cousins:
            focus(h, i, mut.pick(cousins))
        elif can_drill:
            focus(h, i + 1, mut.pick(hier.children(hier.levels[i], m)))
        else:
            fresh = [x for x in mut.hnames if x not in visited_h] or [x for x in mut.hnames if x != h]
            if not fresh:
                raise WorkloadError("slice_and_drill ran out of unvisited members")
            old = h
            h = mut.pick(fresh)
            visited_h.append(h)
            filters.pop(old, None)
            meta.setdefault("reseeded", []).append({"at": len(states) + 1, "hierarchy": h})
            cands = [c for c in mut.members(h, 1) if (h, 1, c) not in used]
            focus(h, 1, mut.pick(cands))
        want_drill = not want_drill
        states.append(QueryState.make(measures, levels, filters))
    return states


def _goal_oriented(mut: _Mutator, n: int, seed: QueryState, params: TemplateParams,
                   meta: dict) -> list[QueryState]:
    # The goal is an independent random query; among a few draws keep the one
    # whose walk length is closest to the wanted distance.
    distance = params.goal_distance if params.goal_distance is not None else n - 1
    goal, best = None, None
    for _ in range(64):
        cand = mut.random_seed(group_by=[h for h, _ in seed.levels])
        d = edit_distance(seed, cand)
        if d == 0:
            continue
        if best is None or abs(d - distance) < abs(best - distance):
            goal, best = cand, d
        if d == distance:
            break
    if goal is None:
        goal = mut.random_move(seed)
        best = edit_distance(seed, goal)
    if best != distance:
        meta["goal_distance"] = best
    states = [seed]
    cur = seed
    while cur != goal:
        cur = mut.apply(cur, mut.pick(mut.toward(cur, goal)))
        states.append(cur)
    meta["goal"] = goal.to_query(mut.schema).part_ids()
    return states


def _surprising(mut: _Mutator, like: QueryState, history: list[QueryState]) -> QueryState:
    """A query over the same group-by hierarchies, built from parts unused in ``history``."""
    used_levels = {(h, i) for s in history for h, i in s.levels}
    used_members = {(h, f) for s in history for h, f in s.filters}
    used_measures = set().union(*(s.measures for s in history))
    levels = {}
    for h, _ in like.levels:
        fresh = [i for i in range(mut.h[h].depth) if (h, i) not in used_levels]
        levels[h] = mut.pick(fresh) if fresh else int(mut.rng.integers(mut.h[h].depth))
    meas_pool = [m for m in mut.schema.measures if m not in used_measures] or list(mut.schema.measures)
    measures = [mut.pick(meas_pool)]
    filters = {}
    n_f = int(mut.rng.integers(1, min(2, len(mut.hnames)) + 1))
    for k in sorted(int(x) for x in mut.rng.choice(len(mut.hnames), size=n_f, replace=False)):
        h = mut.hnames[k]
        for _ in range(8):
            lv = int(mut.rng.integers(1, mut.h[h].depth))
            m = mut.pick(mut.members(h, lv))
            if (h, (lv, m)) not in used_members:
                break
        filters[h] = (lv, m)
    return QueryState.make(measures, levels, filters)


def _explorative(mut: _Mutator, n: int, seed: QueryState, params: TemplateParams,
                 meta: dict) -> list[QueryState]:
    states = [seed]
    first_half = max(1, n // 2)
    while len(states) < first_half:
        states.append(mut.random_move(states[-1], avoid=set(states)))
    remaining = n - len(states)
    hops = max(1, min(params.surprise_hops, remaining))
    targets = []
    for k in range(hops):
        budget = remaining // hops + (1 if k < remaining % hops else 0)
        target = _surprising(mut, seed, states)
        targets.append(target.to_query(mut.schema).part_ids())
        for _ in range(budget):
            cur = states[-1]
            moves = mut.toward(cur, target) if cur != target else []
            if moves and mut.rng.random() < params.bias:
                states.append(mut.apply(cur, mut.pick(moves)))
            else:
                states.append(mut.random_move(cur, avoid=set(states)))
    meta["surprising"] = targets
    return states


def generate_session(schema: CubeSchema, params: TemplateParams, session_id: str,
                     user: str | None = None) -> Session:
    """Generate one session; deterministic in ``(schema, params, session_id)``."""
    rng = _rng_for(params, session_id)
    mut = _Mutator(schema, rng)
    lo, hi = params.session_length
    n = int(rng.integers(lo, hi + 1))
    meta: dict = {}
    if params.seed_queries:
        k = int(rng.integers(params.seed_queries))
        seed = seed_pool(schema, params)[k]
        meta["seed_query"] = k
    else:
        seed = mut.random_seed()
    t = params.template
    if t is Template.SLICE_ALL:
        states = _slice_all(mut, n, seed, params, meta)
    elif t is Template.SLICE_AND_DRILL:
        states = _slice_and_drill(mut, n, seed, meta)
    elif t is Template.GOAL_ORIENTED:
        states = _goal_oriented(mut, n, seed, params, meta)
    else:
        states = _explorative(mut, n, seed, params, meta)
    queries = tuple(s.to_query(schema) for s in states)
    return Session(session_id, user if user is not None else session_id, queries, t.value, meta)


def derive_seed(seed: int, index: int) -> int:
    """Per-session seed from a log seed and a session index."""
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)]).generate_state(1, np.uint64)[0])


def generate_log(schema: CubeSchema, mix: Sequence[tuple[TemplateParams, int]], seed: int,
                 start_index: int = 0, user: str | None = None) -> Log:
    """Concatenate sessions for each ``(params, count)`` entry of ``mix``.

    Session ids are ``"{template}-{index}"`` with a running index over the
    whole log; each session gets the seed derived from ``(seed, index)``.
    """
    sessions = []
    index = start_index
    for params, count in mix:
        if count < 0:
            raise ValueError(f"session count must be >= 0, got {count}")
        for _ in range(count):
            sid = f"{params.template.value}-{index}"
            pool = params.pool_seed if params.pool_seed is not None else seed
            p = replace(params, seed=derive_seed(seed, index), pool_seed=pool)
            sessions.append(generate_session(schema, p, sid, user=user))
            index += 1
    return Log(tuple(sessions))


def even_mix(total: int, templates: Sequence[Template] = TEMPLATES, **kwargs) -> list[tuple[TemplateParams, int]]:
    """Split ``total`` sessions as evenly as possible over ``templates``, in order."""
    k = len(templates)
    return [(TemplateParams(t, **kwargs), total // k + (1 if j < total % k else 0)) for j, t in enumerate(templates)]
