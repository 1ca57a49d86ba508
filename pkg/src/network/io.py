import json
from pathlib import Path
from typing import Any

from jsonschema import Draft7Validator

from network.graph import Edge, NetworkGraph, NetworkValidationError, Node, check_network
from utils.dtos import ValidationResult
from utils.io import write_json


class NetworkFormatError(ValueError):
    """Raised when a network file cannot be parsed or does not match the file format."""


_NUMBER = {"type": "number"}

NETWORK_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["nodes", "edges"],
    "additionalProperties": False,
    "properties": {
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "kind", "elevation_z"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "kind": {"enum": ["junction", "tank", "reservoir"]},
                    "elevation_z": _NUMBER,
                    "base_demand": _NUMBER,
                    "measured": {"type": "boolean"},
                    "tank_area": _NUMBER,
                    "fixed_head": _NUMBER,
                    "init_level": _NUMBER,
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "from", "to", "kind"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "from": {"type": "string"},
                    "to": {"type": "string"},
                    "kind": {"enum": ["pipe", "pump"]},
                    "length_L": _NUMBER,
                    "diameter_D": _NUMBER,
                    "roughness_C": _NUMBER,
                    "pump_shutoff_head_h0": _NUMBER,
                    "pump_curve_coeff_r": _NUMBER,
                    "status": {"enum": ["open", "closed"]},
                },
            },
        },
    },
}

_NODE_OPTIONAL = ("base_demand", "measured", "tank_area", "fixed_head", "init_level")
_EDGE_OPTIONAL = (
    "length_L", "diameter_D", "roughness_C", "pump_shutoff_head_h0", "pump_curve_coeff_r", "status",
)


def _schema_errors(payload: Any) -> list[str]:
    validator = Draft7Validator(NETWORK_SCHEMA)
    errors = sorted(validator.iter_errors(payload), key=lambda e: list(e.path))
    return [f"Validation error at {'.'.join(str(p) for p in e.path) or '<root>'}: {e.message}" for e in errors]


def _read_payload(path: str | Path) -> Any:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"Network file not found: {path}. "
            "Please verify the file path is correct and the file exists."
        )
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise NetworkFormatError(
            f"Invalid JSON in network file {path} at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e


def _build(payload: dict[str, Any]) -> tuple[tuple[Node, ...], tuple[Edge, ...]]:
    nodes = tuple(
        Node(
            id=raw["id"],
            kind=raw["kind"],
            elevation_z=float(raw["elevation_z"]),
            **{key: raw[key] for key in _NODE_OPTIONAL if key in raw},
        )
        for raw in payload["nodes"]
    )
    edges = tuple(
        Edge(
            id=raw["id"],
            from_node=raw["from"],
            to_node=raw["to"],
            kind=raw["kind"],
            **{key: raw[key] for key in _EDGE_OPTIONAL if key in raw},
        )
        for raw in payload["edges"]
    )
    return nodes, edges


def network_from_dict(payload: Any, source: str = "<dict>") -> NetworkGraph:
    """Build a validated NetworkGraph from the JSON object form."""
    errors = _schema_errors(payload)
    if errors:
        raise NetworkFormatError(f"Network {source} does not match the network format: " + "; ".join(errors))
    nodes, edges = _build(payload)
    return NetworkGraph(nodes=nodes, edges=edges)


def network_to_dict(g: NetworkGraph) -> dict[str, Any]:
    """Canonical JSON object form; optional fields are emitted only when set."""
    nodes = []
    for n in g.nodes:
        raw: dict[str, Any] = {"id": n.id, "kind": n.kind, "elevation_z": n.elevation_z, "measured": n.measured}
        if n.kind == "junction":
            raw["base_demand"] = n.base_demand
        for key in ("tank_area", "fixed_head", "init_level"):
            if getattr(n, key) is not None:
                raw[key] = getattr(n, key)
        nodes.append(raw)
    edges = []
    for e in g.edges:
        raw = {"id": e.id, "from": e.from_node, "to": e.to_node, "kind": e.kind, "status": e.status}
        for key in ("length_L", "diameter_D", "roughness_C", "pump_shutoff_head_h0", "pump_curve_coeff_r"):
            if getattr(e, key) is not None:
                raw[key] = getattr(e, key)
        edges.append(raw)
    return {"nodes": nodes, "edges": edges}


def load_network(path: str | Path) -> NetworkGraph:
    """Load and validate a network JSON file.

    Args:
        path: Path to the network file

    Returns:
        NetworkGraph with every invariant checked

    Raises:
        FileNotFoundError: If the file doesn't exist
        NetworkFormatError: If the file is not valid JSON or violates the file format
        NetworkValidationError: If the network violates a structural invariant
    """
    payload = _read_payload(path)
    return network_from_dict(payload, source=str(path))


def save_network(g: NetworkGraph, path: str | Path) -> None:
    write_json(path, network_to_dict(g))


def validate_network_file(path: str | Path) -> ValidationResult:
    """Validate a network file and report every problem found instead of raising.

    Returns:
        ValidationResult: success flag, summary message, and the list of schema
        and invariant errors when validation failed
    """
    try:
        payload = _read_payload(path)
    except (FileNotFoundError, NetworkFormatError) as e:
        return ValidationResult(success=False, message=str(e), errors=[str(e)])

    errors = _schema_errors(payload)
    if errors:
        return ValidationResult(
            success=False,
            message=f"Schema validation failed for {path}",
            errors=errors,
        )

    nodes, edges = _build(payload)
    errors = check_network(nodes, edges)
    if errors:
        return ValidationResult(
            success=False,
            message=f"Invariant validation failed for {path}",
            errors=errors,
        )

    try:
        g = NetworkGraph(nodes=nodes, edges=edges)
    except NetworkValidationError as e:
        return ValidationResult(success=False, message=f"Invariant validation failed for {path}", errors=e.errors)

    return ValidationResult(
        success=True,
        message=f"Validation successful for {path}: {len(g.nodes)} nodes, {len(g.edges)} edges",
    )
