"""Command-line entry point.

Exit status is 0 on success, 1 when an input fails validation (bad schema,
disconnected graph, ...) and 2 on usage errors. Set ``QPB_LOG_LEVEL`` (for
example to ``DEBUG``) for progress logging on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .belief import BeliefVector, PageRankConfig, compute_belief, pagerank
from .errors import QPBeliefError
from .evaluation import (
    DEFAULT_ALPHAS,
    SCENARIOS,
    alpha_sweep,
    hellinger,
    reco_impact,
    si_profiles,
    write_results,
)
from .graph import build_log_graph, build_schema_graph
from .interestingness import evaluate_session, scores_to_csv
from .query import load_log, save_log
from .schema import PRESETS, generate_schema, load_schema, spec_from_mapping
from .workload import TEMPLATES, Template, TemplateParams, even_mix, generate_log

log = logging.getLogger("qpbelief")


class ConfigError(QPBeliefError):
    """Malformed key=value configuration file."""


class UsageError(Exception):
    """Flag combination the parser cannot reject on its own."""


# -- helpers -------------------------------------------------------------------

def read_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{n}: expected 'key = value', got {raw.strip()!r}")
        values[key.strip().lower().replace("-", "_")] = value.strip()
    return values


def _int_range(text: str, name: str) -> tuple[int, int]:
    lo, _, hi = str(text).partition("-")
    try:
        return int(lo), int(hi or lo)
    except ValueError:
        raise ConfigError(f"{name} must look like '4-12', got {text!r}") from None


def _typed(values: dict, key: str, kind, default):
    if key not in values:
        return default
    try:
        return kind(values[key])
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {values[key]!r}") from None


def _templates(text: str | None) -> tuple[Template, ...]:
    if not text:
        return TEMPLATES
    try:
        return tuple(Template.parse(t) for t in text.split(","))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _mix(text: str, total: int | None, session_length: tuple[int, int]):
    """``even`` (needs a total) or ``template:count,...``."""
    if text.strip().lower() == "even":
        if total is None:
            raise UsageError("--mix even needs --sessions")
        return even_mix(total, session_length=session_length)
    mix = []
    for item in text.split(","):
        name, sep, count = item.partition(":")
        if not sep:
            raise UsageError(f"--mix entry {item!r} must be template:count")
        try:
            mix.append((TemplateParams(Template.parse(name), session_length=session_length), int(count)))
        except ValueError as exc:
            raise UsageError(f"--mix: {exc}") from None
    return mix


def _alpha(value: str) -> float:
    try:
        a = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None
    if not 0.0 <= a < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in [0, 1), got {a}")
    return a


def _write_text(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _schema_from_config(values: dict):
    if "schema" in values:
        return load_schema(values["schema"]), {"schema": values["schema"]}
    preset = values.get("preset", "ssb-like")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
    schema_seed = _typed(values, "schema_seed", int, 0)
    return generate_schema(preset, schema_seed), {"preset": preset, "schema_seed": schema_seed}


def _check_keys(values: dict, allowed: set[str], what: str) -> None:
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ConfigError(f"unknown {what} config key(s): {', '.join(unknown)}")


# -- subcommands ---------------------------------------------------------------

def cmd_gen_schema(args) -> int:
    if args.spec:
        values = read_config(args.spec)
        _check_keys(values, {"hierarchies", "depth", "branching", "measures", "name"}, "schema")
        spec = spec_from_mapping(values)
    else:
        spec = args.preset
    schema = generate_schema(spec, args.seed)
    _write_text(schema.dumps(), args.out)
    return 0


def cmd_gen_log(args) -> int:
    schema = load_schema(args.schema)
    length = _int_range(args.session_length, "--session-length")
    if args.template:
        if args.sessions is None:
            raise UsageError("--template needs --sessions")
        mix = [(TemplateParams(Template.parse(args.template), session_length=length), args.sessions)]
    else:
        mix = _mix(args.mix, args.sessions, length)
    out = generate_log(schema, mix, args.seed)
    _write_text(save_log(out), args.out)
    return 0


def _config(args) -> PageRankConfig:
    return PageRankConfig(args.tolerance, args.max_iterations)


def cmd_belief(args) -> int:
    schema = load_schema(args.schema)
    topology = build_log_graph(load_log(args.log, schema), build_schema_graph(schema))
    if args.user_log:
        if args.alpha is None:
            raise UsageError("--user-log needs --alpha")
        user = build_log_graph(load_log(args.user_log, schema))
        belief = compute_belief(topology, user, args.alpha, _config(args))
    else:
        belief = pagerank(topology, _config(args))
    log.info("belief: %d parts, %d iterations, residual %.2e", len(belief), belief.iteration_count,
             belief.residual)
    _write_text(belief.to_csv(), args.out)
    return 0


def cmd_si(args) -> int:
    schema = load_schema(args.schema)
    full = load_log(args.log, schema)
    try:
        session = full.session(args.session_id)
    except KeyError:
        raise UsageError(f"--session-id: no session {args.session_id!r} in {args.log}") from None
    history = load_log(args.history, schema) if args.history else None
    scores = evaluate_session(session, full.without(args.session_id), schema, args.alpha, _config(args),
                              history=history)
    _write_text(scores_to_csv(scores), args.out)
    return 0


def cmd_hellinger(args) -> int:
    d = hellinger(BeliefVector.from_csv(args.a), BeliefVector.from_csv(args.b))
    print(f"{d:.12f}")
    return 0


_COMMON_KEYS = {"schema", "preset", "schema_seed", "seed", "runs", "templates", "session_length", "jobs"}


def cmd_experiment(args) -> int:
    values = read_config(args.config) if args.config else {}
    schema, schema_meta = _schema_from_config(values)
    seed = args.seed if args.seed is not None else _typed(values, "seed", int, 0)
    jobs = args.jobs if args.jobs is not None else _typed(values, "jobs", int, os.cpu_count() or 1)
    templates = _templates(values.get("templates"))
    length = _int_range(values.get("session_length", "4-12"), "session_length")
    meta = {"seed": seed, "templates": [t.value for t in templates], "session_length": list(length),
            "package_version": __version__, **schema_meta}
    name = args.name
    if name == "alpha-sweep":
        _check_keys(values, _COMMON_KEYS | {"alphas", "topology_sessions", "user_sessions"}, name)
        runs = args.runs if args.runs is not None else _typed(values, "runs", int, 20)
        alphas = tuple(float(a) for a in values["alphas"].split(",")) if "alphas" in values else DEFAULT_ALPHAS
        n_topo = _typed(values, "topology_sessions", int, 43)
        n_user = _typed(values, "user_sessions", int, 7)
        table = alpha_sweep(schema, even_mix(n_topo, session_length=length), templates, alphas, runs, seed,
                            user_sessions=n_user, jobs=jobs, session_length=length)
        meta.update(runs=runs, alphas=list(alphas), topology_sessions=n_topo, user_sessions=n_user,
                    topology_mix="even")
        out = write_results(args.out, name, table=table, meta=meta, timestamp=args.run_name)
        print(table.pretty())
    elif name == "si-profiles":
        _check_keys(values, _COMMON_KEYS | {"sessions", "alpha"}, name)
        n = _typed(values, "sessions", int, 50)
        alpha = args.alpha if args.alpha is not None else _typed(values, "alpha", float, 0.9)
        prof = si_profiles(schema, n, alpha, seed, templates=templates, session_length=length)
        rows = ["template,mean_si,pooled_si,si_position_variance,final_cumulative_parts"]
        for t in templates:
            k = t.value
            rows.append(f"{k},{prof.mean_si(k):.9g},{prof.pooled_si(k):.9g},"
                        f"{float(prof.si[k].y.var()):.9g},{prof.final_cumulative(k):.9g}")
        series = {f"si-{k}": s for k, s in prof.si.items()}
        series.update({f"cumulative-{k}": s for k, s in prof.cumulative.items()})
        meta.update(sessions_per_template=n, alpha=alpha)
        out = write_results(args.out, name, series=series, meta=meta, timestamp=args.run_name,
                            table_text="\n".join(rows) + "\n")
        print("\n".join(rows))
    elif name == "reco-impact":
        _check_keys(values, _COMMON_KEYS | {"scenario", "alpha", "k", "topology_sessions", "user_sessions",
                                           "training_sessions"}, name)
        runs = args.runs if args.runs is not None else _typed(values, "runs", int, 10)
        alpha = args.alpha if args.alpha is not None else _typed(values, "alpha", float, 0.8)
        k = _typed(values, "k", int, 5)
        scenario = values.get("scenario", "both")
        scenarios = SCENARIOS if scenario == "both" else (scenario,)
        if any(s not in SCENARIOS for s in scenarios):
            raise ConfigError(f"scenario must be identical, independent or both, got {scenario!r}")
        extra = dict(topology_sessions=_typed(values, "topology_sessions", int, 43),
                     user_sessions=_typed(values, "user_sessions", int, 7),
                     training_sessions=_typed(values, "training_sessions", int, 10))
        tables = {s: reco_impact(schema, s, runs, seed, alpha=alpha, k=k, templates=templates, jobs=jobs,
                                 session_length=length, **extra) for s in scenarios}
        meta.update(runs=runs, alpha=alpha, k=k, scenarios=list(scenarios), topology_mix="even", **extra)
        out = write_results(args.out, name, tables=tables, meta=meta, timestamp=args.run_name)
        for s, t in tables.items():
            print(f"{s}:\n{t.pretty()}")
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(f"unknown experiment {name!r}")
    print(f"results written to {out}")
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for every random choice")
    common.add_argument("--out", default=None, help="output file (default: stdout) or results root")
    common.add_argument("--alpha", type=_alpha, default=None, help="blend weight in [0, 1)")

    pagerank_opts = argparse.ArgumentParser(add_help=False)
    pagerank_opts.add_argument("--tolerance", type=float, default=1e-10)
    pagerank_opts.add_argument("--max-iterations", type=int, default=10_000)

    parser = argparse.ArgumentParser(prog="qpbelief", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-schema", parents=[common], help="generate a synthetic cube schema")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--preset", choices=sorted(PRESETS), default="ssb-like")
    g.add_argument("--spec", help="key=value file with hierarchies, depth, branching, measures")
    p.set_defaults(func=cmd_gen_schema)

    p = sub.add_parser("gen-log", parents=[common], help="generate a synthetic query log")
    p.add_argument("--schema", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--template", help="one of " + ", ".join(t.value for t in TEMPLATES))
    g.add_argument("--mix", help="'even' or template:count,...")
    p.add_argument("--sessions", type=int, default=None)
    p.add_argument("--session-length", default="4-12", help="min-max queries per session")
    p.set_defaults(func=cmd_gen_log)

    p = sub.add_parser("belief", parents=[common, pagerank_opts], help="belief over query parts as CSV")
    p.add_argument("--schema", required=True)
    p.add_argument("--log", required=True, help="global log for the topology graph")
    p.add_argument("--user-log", help="log of the user biasing the belief")
    p.set_defaults(func=cmd_belief)

    p = sub.add_parser("si", parents=[common, pagerank_opts], help="subjective interestingness of a session")
    p.add_argument("--schema", required=True)
    p.add_argument("--log", required=True, help="log holding the session; the other sessions are the global log")
    p.add_argument("--session-id", required=True)
    p.add_argument("--history", help="log of the user's past sessions, folded into the session graph")
    p.set_defaults(func=cmd_si, alpha=0.9)

    p = sub.add_parser("hellinger", help="Hellinger distance between two belief CSVs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_hellinger)

    p = sub.add_parser("experiment", parents=[common], help="run a canned experiment")
    p.add_argument("name", choices=["alpha-sweep", "si-profiles", "reco-impact"])
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (results do not depend on it)")
    p.add_argument("--run-name", default=None, help="result directory name instead of a UTC timestamp")
    p.set_defaults(func=cmd_experiment)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("QPB_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "seed", 0) is None and args.command != "experiment":
        args.seed = 0
    if args.command == "experiment" and args.out is None:
        args.out = "results"
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (QPBeliefError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
