"""Belief over OLAP query parts and the subjective interestingness of queries.

The belief of a user is the stationary distribution of a random walk on a
weighted graph of query parts, built from the cube schema, past query logs
and the user's own sessions. Queries made of improbable parts are
surprising; surprise over complexity is their subjective interestingness.
"""

from .belief import BeliefVector, PageRankConfig, compute_belief, pagerank, transition_matrix
from .errors import (
    BeliefError,
    ConnectivityError,
    ConvergenceError,
    GraphError,
    LogError,
    QPBeliefError,
    SchemaError,
    WorkloadError,
)
from .evaluation import (
    DistanceTable,
    SeriesBundle,
    SIProfiles,
    alpha_sweep,
    cumulative_unique_parts,
    hellinger,
    reco_impact,
    recommend,
    si_profiles,
    sorted_distribution,
    write_results,
)
from .graph import (
    ConnectivityReport,
    QueryPartGraph,
    add_query_increment,
    build_log_graph,
    build_schema_graph,
    check_connectivity,
    merge,
)
from .interestingness import SIScore, evaluate_session, si, surprise
from .parts import PartKind, QueryPart
from .query import Log, Query, Session, load_log, parts, save_log
from .schema import CubeSchema, Hierarchy, SchemaSpec, enumerate_query_parts, generate_schema, load_schema, save_schema
from .workload import Template, TemplateParams, even_mix, generate_log, generate_session

__version__ = "0.1.0"
