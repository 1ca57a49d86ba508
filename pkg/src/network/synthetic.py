import numpy as np

from network.graph import Edge, NetworkGraph, Node

GRID_ROWS = 4
GRID_COLS = 7


def _junction_id(row: int, col: int) -> str:
    return f"J{row * GRID_COLS + col + 1:02d}"


def build_benchmark_network(seed: int = 7) -> NetworkGraph:
    """Deterministic 30-node looped network used by the detection benchmark.

    A 4 x 7 junction grid fed by a reservoir through a pump at J01, with a
    floating tank at the far corner (J28). Every fourth junction carries no
    pressure sensor.
    """
    rng = np.random.default_rng(seed)
    nodes: list[Node] = [
        Node(id="R1", kind="reservoir", elevation_z=0.0, fixed_head=20.0, measured=True),
        Node(id="T1", kind="tank", elevation_z=55.0, tank_area=2000.0, init_level=5.0, measured=True),
    ]
    for row in range(GRID_ROWS):
        for col in range(GRID_COLS):
            index = row * GRID_COLS + col
            nodes.append(
                Node(
                    id=_junction_id(row, col),
                    kind="junction",
                    elevation_z=round(5.0 + 1.5 * col + float(rng.uniform(0.0, 3.0)), 3),
                    base_demand=round(float(rng.uniform(0.001, 0.003)), 6),
                    measured=index % 4 != 3,
                )
            )

    edges: list[Edge] = [
        Edge(
            id="PU1", from_node="R1", to_node=_junction_id(0, 0), kind="pump",
            pump_shutoff_head_h0=55.0, pump_curve_coeff_r=3000.0,
        )
    ]
    pipe_no = 0

    def add_pipe(a: str, b: str, main: bool) -> None:
        nonlocal pipe_no
        pipe_no += 1
        edges.append(
            Edge(
                id=f"P{pipe_no:02d}", from_node=a, to_node=b, kind="pipe",
                length_L=round(float(rng.uniform(150.0, 300.0)), 1),
                diameter_D=0.3 if main else 0.2,
                roughness_C=round(float(rng.uniform(95.0, 130.0)), 1),
            )
        )

    for row in range(GRID_ROWS):
        for col in range(GRID_COLS - 1):
            add_pipe(_junction_id(row, col), _junction_id(row, col + 1), main=row == 0)
    for row in range(GRID_ROWS - 1):
        for col in range(GRID_COLS):
            add_pipe(_junction_id(row, col), _junction_id(row + 1, col), main=col == 0)
    add_pipe(_junction_id(GRID_ROWS - 1, GRID_COLS - 1), "T1", main=True)

    return NetworkGraph(nodes=tuple(nodes), edges=tuple(edges))
