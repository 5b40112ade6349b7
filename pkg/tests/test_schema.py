import copy
import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from qpbelief import SchemaError, SchemaSpec, enumerate_query_parts, generate_schema, load_schema
from qpbelief.parts import PartKind

from conftest import REGION_DOC

FIXTURE = Path(__file__).parent / "data" / "ssb_fixture.json"


def test_load_region_schema(region_schema):
    assert len(region_schema.hierarchies) == 1
    h = region_schema.hierarchies[0]
    assert h.levels == ("ALL", "REGION")
    assert h.member_count() == 3
    assert h.children("ALL", "all") == ("AMERICA", "EUROPE")
    assert h.parent("REGION", "EUROPE") == "all"


def test_orphan_member_is_reported():
    doc = copy.deepcopy(REGION_DOC)
    doc["hierarchies"][0]["members"]["ALL"]["all"] = ["AMERICA"]
    with pytest.raises(SchemaError, match="orphan member 'EUROPE'"):
        load_schema(doc)


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d["hierarchies"][0]["members"]["ALL"].update({"other": []}), "missing ALL level"),
        (lambda d: d["hierarchies"].append(copy.deepcopy(d["hierarchies"][0])), "duplicate hierarchy"),
        (lambda d: d["measures"].append("REVENUE"), "duplicate measure"),
        (lambda d: d["measures"].append("CUSTOMER"), "both hierarchy and measure"),
        (lambda d: d["hierarchies"][0].update(levels=["ALL"]), "at least 2 levels"),
        (lambda d: d["hierarchies"][0]["members"]["ALL"].update({"all": ["AMERICA", "EUROPE", "ASIA"]}),
         "not a member"),
    ],
)
def test_invalid_documents(mutate, message):
    doc = copy.deepcopy(REGION_DOC)
    mutate(doc)
    with pytest.raises(SchemaError, match=message):
        load_schema(doc)


def test_not_json():
    with pytest.raises(SchemaError, match="not valid JSON"):
        load_schema("{nope")


def test_fixture_counts_match_file_scan():
    schema = load_schema(FIXTURE)
    raw = json.loads(FIXTURE.read_text())
    # recount straight from the document
    levels = sum(len(h["levels"]) for h in raw["hierarchies"])
    members = sum(len(table) for h in raw["hierarchies"] for table in h["members"].values())
    assert len(schema.measures) == 4 == len(raw["measures"])
    assert len(schema.hierarchies) == 4
    parts = enumerate_query_parts(schema)
    assert len(parts) == levels + 4 + members == 11 + 4 + 24


def test_enumerate_region_parts(region_schema):
    ids = sorted(p.id for p in enumerate_query_parts(region_schema))
    assert ids == [
        "L:CUSTOMER/ALL",
        "L:CUSTOMER/REGION",
        "M:REVENUE",
        "V:CUSTOMER/ALL=all",
        "V:CUSTOMER/REGION=AMERICA",
        "V:CUSTOMER/REGION=EUROPE",
    ]


def test_generate_single_hierarchy():
    schema = generate_schema(SchemaSpec(hierarchies=1, depth=(2, 2), branching=(3, 3), measures=1), 7)
    h = schema.hierarchies[0]
    assert len(h.members[h.levels[-1]]) == 3


def test_generate_is_deterministic():
    spec = SchemaSpec(hierarchies=4, depth=(3, 4), branching=(2, 5), measures=4)
    assert generate_schema(spec, 1).dumps() == generate_schema(spec, 1).dumps()
    assert generate_schema(spec, 1).dumps() != generate_schema(spec, 2).dumps()


def test_generated_totals_match_child_map_recount():
    spec = SchemaSpec(hierarchies=4, depth=(3, 4), branching=(2, 5), measures=4)
    doc = json.loads(generate_schema(spec, 1).dumps())
    for h in doc["hierarchies"]:
        # members reachable from "all" through the child lists, level by level
        frontier = ["all"]
        for depth, level in enumerate(h["levels"]):
            assert sorted(frontier) == sorted(h["members"][level])
            frontier = [kid for m in frontier for kid in h["members"][level][m]]
        assert frontier == []


def test_document_round_trip(ssb_schema):
    again = load_schema(ssb_schema.dumps())
    assert again.dumps() == ssb_schema.dumps()


specs = st.builds(
    SchemaSpec,
    hierarchies=st.integers(1, 4),
    depth=st.tuples(st.integers(2, 3), st.integers(0, 1)).map(lambda t: (t[0], t[0] + t[1])),
    branching=st.tuples(st.integers(1, 3), st.integers(0, 2)).map(lambda t: (t[0], t[0] + t[1])),
    measures=st.integers(1, 5),
)


@settings(max_examples=40, deadline=None)
@given(spec=specs, seed=st.integers(0, 2**32 - 1))
def test_generated_schema_invariants(spec, seed):
    schema = generate_schema(spec, seed)
    assert schema.dumps() == generate_schema(spec, seed).dumps()
    parts = enumerate_query_parts(schema)
    ids = [p.id for p in parts]
    assert len(set(ids)) == len(ids)
    n_levels = sum(h.depth for h in schema.hierarchies)
    n_members = sum(h.member_count() for h in schema.hierarchies)
    assert len(ids) == n_levels + len(schema.measures) + n_members
    assert sum(p.kind is PartKind.MEASURE for p in parts) == len(schema.measures)
    for h in schema.hierarchies:
        assert h.members["ALL"] == ("all",)
        for level in h.levels[:-1]:
            below = h.levels[h.level_index(level) + 1]
            for m in h.members[level]:
                kids = h.children(level, m)
                assert kids
                assert all(h.parent(below, k) == m for k in kids)
