import itertools
import json
import math

import networkx as nx
import pytest

from network import (
    NetworkFormatError,
    NetworkValidationError,
    build_benchmark_network,
    distance_matrix,
    hydraulic_distance,
    load_network,
    network_to_dict,
    save_network,
    shortest_hydraulic_path,
    validate_network_file,
)
from tests.builders import graph, junction, pipe, reservoir


def test_load_three_node_fixture(three_node):
    assert len(three_node.nodes) == 3
    assert len(three_node.edges) == 2
    assert three_node.node("T1").tank_area == 50.0


def test_load_duplicate_node_id(example_dir):
    with pytest.raises(NetworkValidationError) as exc:
        load_network(example_dir / "networks" / "duplicate_id.json")
    assert "duplicate node id 'J1'" in str(exc.value)


def test_load_missing_endpoint_names_node(example_dir):
    with pytest.raises(NetworkValidationError) as exc:
        load_network(example_dir / "networks" / "missing_node.json")
    assert "'X'" in str(exc.value)


def test_load_disconnected_names_component(example_dir):
    with pytest.raises(NetworkValidationError) as exc:
        load_network(example_dir / "networks" / "disconnected.json")
    assert "disconnected component containing node J7" in exc.value.errors


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError) as exc:
        load_network(tmp_path / "absent.json")
    assert "Please verify the file path" in str(exc.value)


def test_load_invalid_json_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"nodes": [\n  {"id": "A",}\n]}')
    with pytest.raises(NetworkFormatError) as exc:
        load_network(path)
    assert "line 2" in str(exc.value)


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "extra.json"
    path.write_text(json.dumps({
        "nodes": [{"id": "R", "kind": "reservoir", "elevation_z": 0, "fixed_head": 10, "color": "blue"}],
        "edges": [],
    }))
    with pytest.raises(NetworkFormatError) as exc:
        load_network(path)
    assert "nodes.0" in str(exc.value)
    assert "color" in str(exc.value)


def test_roughness_out_of_range():
    with pytest.raises(NetworkValidationError) as exc:
        graph([reservoir("A"), junction("B")], [pipe("P", "A", "B", roughness=200.0)])
    assert "roughness_C" in str(exc.value)


def test_save_load_round_trip(tmp_path, pumped_loop):
    path = tmp_path / "net.json"
    save_network(pumped_loop, path)
    reloaded = load_network(path)
    assert reloaded == pumped_loop
    assert network_to_dict(reloaded) == network_to_dict(pumped_loop)


def test_validate_network_file_collects_errors(example_dir):
    result = validate_network_file(example_dir / "networks" / "missing_node.json")
    assert result.success is False
    assert any("'X'" in e for e in result.errors)


def test_validate_network_file_success(example_dir):
    result = validate_network_file(example_dir / "networks" / "three_node.json")
    assert result.success is True
    assert "3 nodes, 2 edges" in result.message
    assert result.errors is None


def test_adjacency_matches_edges(pumped_loop):
    for e in pumped_loop.edges:
        assert e.to_node in pumped_loop.neighbors(e.from_node)
        assert e.from_node in pumped_loop.neighbors(e.to_node)
        assert e.id in pumped_loop.out_edges(e.from_node)
        assert e.id in pumped_loop.in_edges(e.to_node)
    for node_id in pumped_loop.node_ids:
        for other in pumped_loop.neighbors(node_id):
            assert node_id in pumped_loop.neighbors(other)


class TestHydraulicDistance:
    def test_path_sum(self, path_graph):
        assert hydraulic_distance(path_graph, "A", "C") == 300.0

    def test_identity(self, path_graph):
        assert hydraulic_distance(path_graph, "A", "A") == 0.0

    def test_triangle_takes_two_hop_route(self):
        g = graph(
            [reservoir("A"), junction("B"), junction("C")],
            [pipe("AB", "A", "B", 100.0), pipe("BC", "B", "C", 100.0), pipe("AC", "A", "C", 250.0)],
        )
        brute = min(
            sum(g.nx_graph[u][v]["length"] for u, v in zip(p, p[1:]))
            for p in nx.all_simple_paths(g.nx_graph, "A", "C")
        )
        assert hydraulic_distance(g, "A", "C") == brute == 200.0

    def test_pump_weighs_nothing(self, pumped_loop):
        assert hydraulic_distance(pumped_loop, "R1", "J1") == 0.0

    def test_unknown_node(self, path_graph):
        with pytest.raises(KeyError):
            hydraulic_distance(path_graph, "A", "Z")

    def test_symmetry_and_triangle_inequality(self, pumped_loop):
        ids = pumped_loop.node_ids
        for i, j in itertools.product(ids, ids):
            assert hydraulic_distance(pumped_loop, i, j) == hydraulic_distance(pumped_loop, j, i)
        for i, j, k in itertools.product(ids, ids, ids):
            d = hydraulic_distance
            assert d(pumped_loop, i, k) <= d(pumped_loop, i, j) + d(pumped_loop, j, k) + 1e-9

    def test_distance_matrix_matches_pairwise(self, pumped_loop):
        frame = distance_matrix(pumped_loop)
        assert frame.loc["J1", "T1"] == hydraulic_distance(pumped_loop, "J1", "T1")
        assert frame.loc["J3", "J3"] == 0.0
        assert not frame.isin([math.inf]).any().any()


class TestShortestPath:
    def test_unique_path(self, path_graph):
        assert shortest_hydraulic_path(path_graph, "A", "C") == ["A", "B", "C"]

    def test_identity(self, path_graph):
        assert shortest_hydraulic_path(path_graph, "B", "B") == ["B"]

    def test_lexicographic_tie_break(self):
        g = graph(
            [reservoir("A"), junction("C"), junction("B"), junction("D")],
            [pipe("P1", "A", "C", 100.0), pipe("P2", "C", "D", 100.0),
             pipe("P3", "A", "B", 100.0), pipe("P4", "B", "D", 100.0)],
        )
        routes = sorted(nx.all_simple_paths(g.nx_graph, "A", "D"))
        assert shortest_hydraulic_path(g, "A", "D") == routes[0] == ["A", "B", "D"]


class TestBenchmarkNetwork:
    def test_shape(self, benchmark_network):
        assert len(benchmark_network.nodes) == 30
        assert len(benchmark_network.edges_of_kind("pump")) == 1
        assert len(benchmark_network.nodes_of_kind("tank")) == 1
        assert sum(n.measured for n in benchmark_network.nodes) == 23

    def test_deterministic(self, benchmark_network):
        assert build_benchmark_network() == benchmark_network
