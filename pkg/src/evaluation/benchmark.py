"""Deterministic train/validation/test scenario sets on the 30-node network."""
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from hydrosim import AttackSpec, ScadaSeries, generate_series, inject_attack
from network.graph import NetworkGraph
from network.synthetic import build_benchmark_network
from physics_features.features import FeatureSettings, FeatureTensor

logger = logging.getLogger(__name__)

ATTACK_KINDS = ("sensor_offset", "sensor_replay", "pump_shutdown", "flow_manipulation")
DURATION_RANGE = (4, 9)
LEAD_IN = 24
TAIL = 6


@dataclass
class BenchmarkSplit:
    """Attacked series for training, validation and testing.

    Training series carry one attack of every kind in disjoint slots; every
    test series carries exactly one attack.

    Attributes:
        g (NetworkGraph): Network the series were simulated on
        train (list[ScadaSeries]): Training series
        val (list[ScadaSeries]): Validation series
        test (list[ScadaSeries]): Test series, `scenarios_per_kind` per attack kind
        seed (int): Seed the split was built from
    """
    g: NetworkGraph
    train: list[ScadaSeries] = field(default_factory=list)
    val: list[ScadaSeries] = field(default_factory=list)
    test: list[ScadaSeries] = field(default_factory=list)
    seed: int = 0

    def features(
        self, part: str, settings: FeatureSettings, roughness_delta: float = 0.0, demand_error: float = 0.0
    ) -> list[FeatureTensor]:
        """Feature tensors of the "train", "val" or "test" series."""
        if part not in ("train", "val", "test"):
            raise ValueError(f"Unknown split part '{part}'. Use train, val or test.")
        series: list[ScadaSeries] = getattr(self, part)
        return [settings.assemble(s, self.g, roughness_delta, demand_error) for s in series]


def random_attack(
    g: NetworkGraph, s: ScadaSeries, kind: str, start: int, duration: int, rng: np.random.Generator, attack_id: str
) -> AttackSpec:
    """Draw a target and magnitude for one attack of `kind` starting at `start`."""
    junctions = [n.id for n in g.nodes if n.kind == "junction"]
    if kind == "sensor_offset":
        target = str(rng.choice([n for n in s.measured_nodes if n in junctions]))
        magnitude = float(rng.uniform(0.1, 0.2))
    elif kind == "sensor_replay":
        target = str(rng.choice([e.id for e in g.edges if e.kind == "pipe"]))
        magnitude = 0.0
    elif kind == "pump_shutdown":
        target = str(rng.choice([e.id for e in g.edges if e.kind == "pump"]))
        magnitude = 0.0
    elif kind == "flow_manipulation":
        target = str(rng.choice(junctions))
        magnitude = float(rng.uniform(2.5, 4.0))
    else:
        raise ValueError(f"Unknown attack kind '{kind}'")
    return AttackSpec(kind, target, start, duration, magnitude, id=attack_id)  # type: ignore[arg-type]


def attacked_series(
    g: NetworkGraph,
    kinds: Sequence[str],
    days: int,
    seed: int,
    noise_std: float,
    name: str,
) -> ScadaSeries:
    """Simulate a series and place one attack per kind in disjoint slots after a one-day lead-in."""
    rng = np.random.default_rng(seed)
    s = generate_series(g, days=days, noise_std=noise_std, seed=seed)
    slot = (s.n_steps - LEAD_IN - TAIL) // max(len(kinds), 1)
    if slot < DURATION_RANGE[1] + 1:
        raise ValueError(f"{days} day(s) leave no room for {len(kinds)} attack(s)")
    for k, kind in enumerate(kinds):
        duration = int(rng.integers(*DURATION_RANGE))
        start = LEAD_IN + k * slot + int(rng.integers(0, slot - duration))
        s = inject_attack(s, g, random_attack(g, s, kind, start, duration, rng, f"{name}-{k}"))
    return s


def build_split(
    g: NetworkGraph | None = None,
    seed: int = 0,
    n_train: int = 4,
    n_val: int = 2,
    scenarios_per_kind: int = 5,
    train_days: int = 7,
    test_days: int = 3,
    noise_std: float = 0.005,
) -> BenchmarkSplit:
    """Build the benchmark scenario sets; identical for identical arguments."""
    g = g or build_benchmark_network()
    rng = np.random.default_rng(seed)
    seeds = iter(rng.integers(0, 2**31 - 1, size=n_train + n_val + scenarios_per_kind * len(ATTACK_KINDS)))
    split = BenchmarkSplit(g=g, seed=seed)
    for k in range(n_train):
        kinds = [str(kind) for kind in rng.permutation(ATTACK_KINDS)]
        split.train.append(attacked_series(g, kinds, train_days, int(next(seeds)), noise_std, f"train{k}"))
    for k in range(n_val):
        kinds = [str(kind) for kind in rng.permutation(ATTACK_KINDS)][:2]
        split.val.append(attacked_series(g, kinds, test_days, int(next(seeds)), noise_std, f"val{k}"))
    for kind in ATTACK_KINDS:
        for k in range(scenarios_per_kind):
            split.test.append(attacked_series(g, [kind], test_days, int(next(seeds)), noise_std, f"{kind}{k}"))
    logger.info(
        "Built benchmark split: %d train, %d val, %d test series (seed %d)",
        len(split.train), len(split.val), len(split.test), seed,
    )
    return split
