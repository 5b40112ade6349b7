"""Walk through belief and interestingness on a generated cube.

Builds the topology graph from a mixed log, biases it with one user's
sessions, and scores a fresh session query by query.

    python3 demos/belief_walkthrough.py
"""

from qpbelief import (
    Log,
    build_log_graph,
    build_schema_graph,
    check_connectivity,
    compute_belief,
    evaluate_session,
    even_mix,
    generate_log,
    generate_schema,
    hellinger,
    pagerank,
)
from qpbelief.workload import Template, TemplateParams

schema = generate_schema("ssb-like", seed=42)
print(f"schema {schema.name}: {len(schema.hierarchies)} hierarchies, {len(schema.part_ids())} query parts")

# Schema edges alone leave the measures isolated; the log links them in.
schema_graph = build_schema_graph(schema)
print("schema graph alone:", check_connectivity(schema_graph).describe())

past = generate_log(schema, even_mix(43), seed=42)
topology = build_log_graph(past, schema_graph)
print("with 43 past sessions:", check_connectivity(topology).describe())

shared = pagerank(topology)
print("\nmost believed parts overall:")
for part, p in shared.ranked()[:5]:
    print(f"  {p:.4f}  {part}")

user_log = generate_log(schema, [(TemplateParams(Template.SLICE_ALL), 7)], seed=7, start_index=43)
user = build_log_graph(user_log)
for alpha in (0.2, 0.5, 0.8):
    b = compute_belief(topology, user, alpha)
    print(f"alpha {alpha}: Hellinger distance to the shared belief {hellinger(shared, b):.4f}")

# Score a new session against the shared log, with the user's past sessions
# folded into the session graph.
session = generate_log(schema, [(TemplateParams(Template.SLICE_AND_DRILL), 1)], seed=3, start_index=50).sessions[0]
print(f"\nsession {session.id} ({len(session)} queries), alpha 0.9:")
for score in evaluate_session(session, past, schema, alpha=0.9, history=Log(user_log.sessions)):
    print(f"  q{score.query_index:<2} parts {score.complexity}  surprise {score.surprise:7.3f}  SI {score.si:.3f}")
