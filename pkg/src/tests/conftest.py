from pathlib import Path

import pytest

from hydrosim import generate_series
from network import NetworkGraph, build_benchmark_network, load_network
from tests.builders import graph, junction, pipe, reservoir

EXAMPLE_DIR = Path(__file__).resolve().parents[2] / "example"


@pytest.fixture
def example_dir() -> Path:
    if not EXAMPLE_DIR.exists():
        pytest.skip(f"Example directory not found: {EXAMPLE_DIR}")
    return EXAMPLE_DIR


@pytest.fixture
def three_node(example_dir: Path) -> NetworkGraph:
    return load_network(example_dir / "networks" / "three_node.json")


@pytest.fixture
def pumped_loop(example_dir: Path) -> NetworkGraph:
    return load_network(example_dir / "networks" / "pumped_loop.json")


@pytest.fixture
def path_graph() -> NetworkGraph:
    """A–B–C with pipe lengths 100 and 200, fed at A."""
    return graph(
        [reservoir("A"), junction("B"), junction("C")],
        [pipe("AB", "A", "B", length=100.0), pipe("BC", "B", "C", length=200.0)],
    )


@pytest.fixture(scope="session")
def benchmark_network() -> NetworkGraph:
    return build_benchmark_network()


@pytest.fixture
def clean_loop_series(pumped_loop):
    return generate_series(pumped_loop, days=7, noise_std=0.0, seed=3)
