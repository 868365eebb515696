from __future__ import annotations

import random
from collections import deque

import pytest

from causalrag.errors import ArtifactError, IngestionError, NotFoundError, ValidationError
from causalrag.graph import (
    ConceptNode,
    KgEdge,
    KnowledgeGraph,
    ingest_triples,
    load_graph,
    save_graph,
    shortest_path_length,
)

from .conftest import make_graph

HEADER = "subject_cui\tsubject_name\tsubject_semtypes\tpredicate\tobject_cui\tobject_name\tobject_semtypes"
HEADER_WITH_STRENGTH = HEADER + "\tstrength"


def row(subj, subj_name, predicate, obj, obj_name, subj_types="", obj_types="", strength=None):
    fields = [subj, subj_name, subj_types, predicate, obj, obj_name, obj_types]
    if strength is not None:
        fields.append(str(strength))
    return "\t".join(fields)


# -- ingestion --------------------------------------------------------------


def test_ingest_two_rows_shared_subject():
    graph = ingest_triples(
        [
            HEADER,
            row("C1", "Alpha", "CAUSES", "C2", "Beta"),
            row("C1", "Alpha", "CAUSES", "C3", "Gamma"),
        ]
    )
    assert graph.node_count == 3
    assert graph.edge_count == 2


def test_ingest_missing_object_column_is_malformed_not_fatal():
    graph = ingest_triples(
        [
            HEADER,
            row("C1", "Alpha", "CAUSES", "C2", "Beta"),
            "C1\tAlpha\t\tCAUSES",
        ]
    )
    assert graph.edge_count == 1
    assert graph.stats.malformed_rows == 1


def test_ingest_duplicate_triple_collapses_with_warning(caplog):
    with caplog.at_level("WARNING"):
        graph = ingest_triples(
            [
                HEADER,
                row("C1", "Alpha", "CAUSES", "C2", "Beta"),
                row("C1", "Alpha", "CAUSES", "C2", "Beta"),
            ]
        )
    assert graph.edge_count == 1
    assert graph.stats.duplicate_triples == 1
    assert any("duplicate triple" in message for message in caplog.messages)


def test_ingest_conflicting_strength_keeps_max():
    graph = ingest_triples(
        [
            HEADER_WITH_STRENGTH,
            row("C1", "Alpha", "CAUSES", "C2", "Beta", strength=0.4),
            row("C1", "Alpha", "CAUSES", "C2", "Beta", strength=0.8),
        ]
    )
    assert graph.edge_count == 1
    assert graph.edges[0].strength == 0.8


def test_ingest_empty_stream_is_error():
    with pytest.raises(IngestionError):
        ingest_triples([])
    with pytest.raises(IngestionError):
        ingest_triples([HEADER])


def test_ingest_all_malformed_is_error():
    with pytest.raises(IngestionError, match="malformed"):
        ingest_triples([HEADER, "only\ttwo", "three\tbad\tfields"])


def test_ingest_requires_header():
    with pytest.raises(IngestionError, match="header"):
        ingest_triples([row("C1", "Alpha", "CAUSES", "C2", "Beta")])


def test_ingest_merges_names_types_and_aliases():
    graph = ingest_triples(
        [
            HEADER,
            row("C1", "Myocardial Infarction", "CAUSES", "C2", "Beta", subj_types="dsyn"),
            row("C1", "Heart Attack", "AFFECTS", "C3", "Gamma", subj_types="fndg,dsyn"),
        ]
    )
    node = graph.node("C1")
    assert node.name == "Myocardial Infarction"
    assert node.aliases == {"Heart Attack"}
    assert node.semantic_types == {"dsyn", "fndg"}


def test_ingest_strength_defaults_to_causality_table():
    graph = ingest_triples(
        [
            HEADER,
            row("C1", "Alpha", "CAUSES", "C2", "Beta"),
            row("C1", "Alpha", "UNHEARD_OF", "C3", "Gamma"),
        ]
    )
    by_predicate = {e.predicate: e.strength for e in graph.edges}
    assert by_predicate["CAUSES"] == 0.9
    assert by_predicate["UNHEARD_OF"] == 0.05


def test_ingest_skips_comments_and_blank_lines():
    graph = ingest_triples(
        [
            "# comment before the header",
            HEADER,
            "",
            row("C1", "Alpha", "CAUSES", "C2", "Beta"),
            "# trailing comment",
        ]
    )
    assert graph.edge_count == 1
    assert graph.stats.rows_total == 1


def test_ingest_out_of_range_strength_is_malformed():
    graph = ingest_triples(
        [
            HEADER_WITH_STRENGTH,
            row("C1", "Alpha", "CAUSES", "C2", "Beta", strength=0.5),
            row("C1", "Alpha", "CAUSES", "C3", "Gamma", strength=1.3),
        ]
    )
    assert graph.edge_count == 1
    assert graph.stats.malformed_rows == 1


def test_ingest_idempotent():
    lines = [
        HEADER,
        row("C1", "Alpha", "CAUSES", "C2", "Beta", subj_types="dsyn"),
        row("C2", "Beta", "TREATS", "C3", "Gamma"),
    ]
    first = ingest_triples(lines)
    second = ingest_triples(lines)
    assert [(n.id, n.name, n.semantic_types, n.aliases) for n in first.nodes()] == [
        (n.id, n.name, n.semantic_types, n.aliases) for n in second.nodes()
    ]
    assert first.edges == second.edges


# -- structure invariants -----------------------------------------------------


def test_adjacency_covers_every_edge_once_each_direction():
    graph = make_graph(
        [
            ("A", "CAUSES", "B", 0.9),
            ("B", "CAUSES", "C", 0.8),
            ("A", "TREATS", "C", 0.7),
            ("C", "CAUSES", "C", 0.6),
        ]
    )
    forward = [i for node in graph.node_ids() for i in graph.out_edges(node)]
    reverse = [i for node in graph.node_ids() for i in graph.in_edges(node)]
    assert sorted(forward) == list(range(graph.edge_count))
    assert sorted(reverse) == list(range(graph.edge_count))


def test_graph_rejects_unknown_endpoints_and_bad_strength():
    with pytest.raises(ValidationError):
        KnowledgeGraph(
            [ConceptNode(id="A", name="A")],
            [KgEdge(subject="A", predicate="CAUSES", object="B", strength=0.5)],
        )
    with pytest.raises(ValidationError):
        make_graph([("A", "CAUSES", "B", 1.5)])


def test_neighbors_directions():
    graph = make_graph(
        [
            ("N", "CAUSES", "X", 0.9),
            ("N", "CAUSES", "Y", 0.9),
            ("Z", "CAUSES", "N", 0.9),
        ]
    )
    assert len(graph.neighbors("N", "out")) == 2
    assert len(graph.neighbors("N", "in")) == 1
    assert len(graph.neighbors("N", "both")) == 3
    assert graph.neighbors("X", "out") == []


def test_neighbors_unknown_node_and_direction():
    graph = make_graph([("A", "CAUSES", "B", 0.9)])
    with pytest.raises(NotFoundError):
        graph.neighbors("missing")
    with pytest.raises(ValidationError):
        graph.neighbors("A", "sideways")


def test_neighbors_self_loop_counted_once_for_both():
    graph = make_graph([("A", "CAUSES", "A", 0.9)])
    assert len(graph.neighbors("A", "both")) == 1


# -- shortest paths -----------------------------------------------------------


def test_shortest_path_identity_and_chain(chain_graph):
    assert shortest_path_length(chain_graph, "A", "A", 4) == 0
    assert shortest_path_length(chain_graph, "A", "C", 4) == 1  # weak direct edge counts here
    assert shortest_path_length(chain_graph, "A", "B", 4) == 1
    assert shortest_path_length(chain_graph, "B", "C", 4) == 1


def test_shortest_path_pure_chain():
    graph = make_graph([("A", "CAUSES", "B", 0.9), ("B", "CAUSES", "C", 0.8)])
    assert shortest_path_length(graph, "A", "C", 4) == 2


def test_shortest_path_disconnected_within_bound():
    graph = make_graph([("A", "CAUSES", "B", 0.9), ("C", "CAUSES", "D", 0.9)])
    assert shortest_path_length(graph, "A", "D", 4) is None


def test_shortest_path_unknown_node():
    graph = make_graph([("A", "CAUSES", "B", 0.9)])
    with pytest.raises(NotFoundError):
        shortest_path_length(graph, "A", "missing", 3)


def _bfs_oracle(graph, start, goal, max_hops):
    if start == goal:
        return 0
    queue = deque([(start, 0)])
    seen = {start}
    while queue:
        node, depth = queue.popleft()
        if depth == max_hops:
            continue
        for idx in graph.out_edges(node):
            target = graph.edge(idx).object
            if target == goal:
                return depth + 1
            if target not in seen:
                seen.add(target)
                queue.append((target, depth + 1))
    return None


def test_shortest_path_matches_bruteforce_on_random_graphs():
    rng = random.Random(20250810)
    for _ in range(60):
        node_count = rng.randint(2, 12)
        names = [f"N{i}" for i in range(node_count)]
        edges = []
        seen = set()
        for _ in range(rng.randint(1, 30)):
            s, o = rng.choice(names), rng.choice(names)
            triple = (s, "REL", o)
            if triple in seen:
                continue
            seen.add(triple)
            edges.append((s, "REL", o, rng.random()))
        if not edges:
            continue
        graph = make_graph(edges)
        max_hops = rng.randint(1, 4)
        for _ in range(10):
            a, b = rng.choice(names), rng.choice(names)
            if not (graph.has_node(a) and graph.has_node(b)):
                continue
            assert shortest_path_length(graph, a, b, max_hops) == _bfs_oracle(
                graph, a, b, max_hops
            )


# -- artifact round trip --------------------------------------------------------


def test_artifact_round_trip(tmp_path):
    graph = ingest_triples(
        [
            HEADER,
            row("C1", "Alpha", "CAUSES", "C2", "Beta", subj_types="dsyn"),
            row("C2", "Beta", "TREATS", "C3", "Gamma"),
        ]
    )
    path = tmp_path / "graph.crag"
    save_graph(graph, path)
    loaded = load_graph(path)
    assert loaded.edges == graph.edges
    assert [n.id for n in loaded.nodes()] == [n.id for n in graph.nodes()]
    assert loaded.node("C1").semantic_types == {"dsyn"}
    assert loaded.stats == graph.stats


def test_artifact_rejects_bad_magic_and_version(tmp_path):
    bogus = tmp_path / "bogus.crag"
    bogus.write_bytes(b"NOPE" + b"\x00\x01" + b"junk")
    with pytest.raises(ArtifactError, match="not a causalrag"):
        load_graph(bogus)

    graph = make_graph([("A", "CAUSES", "B", 0.9)])
    path = tmp_path / "graph.crag"
    save_graph(graph, path)
    blob = bytearray(path.read_bytes())
    blob[5] = 99  # bump version byte
    path.write_bytes(bytes(blob))
    with pytest.raises(ArtifactError, match="version"):
        load_graph(path)
