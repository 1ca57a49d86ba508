from network.graph import Edge, NetworkGraph, NetworkValidationError, Node, check_network
from network.io import (
    NetworkFormatError,
    load_network,
    network_from_dict,
    network_to_dict,
    save_network,
    validate_network_file,
)
from network.distance import distance_matrix, hydraulic_distance, shortest_hydraulic_path
from network.synthetic import build_benchmark_network

__all__ = [
    "Edge",
    "NetworkGraph",
    "NetworkValidationError",
    "NetworkFormatError",
    "Node",
    "build_benchmark_network",
    "check_network",
    "distance_matrix",
    "hydraulic_distance",
    "load_network",
    "network_from_dict",
    "network_to_dict",
    "save_network",
    "shortest_hydraulic_path",
    "validate_network_file",
]
