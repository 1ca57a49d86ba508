import math

import numpy as np
import pytest

from physics_features import (
    ObservedState,
    energy_violation,
    energy_violations,
    head_loss,
    hw_resistance,
    mass_violation,
    mass_violations,
    node_energy_violation,
    node_energy_violations,
)
from network import Edge
from tests.builders import graph, junction, pipe, reservoir


@pytest.fixture
def star():
    """Junction J fed by A and B, supplying C."""
    return graph(
        [reservoir("A"), junction("B"), junction("C"), junction("J")],
        [pipe("AJ", "A", "J"), pipe("BJ", "B", "J"), pipe("JC", "J", "C")],
    )


@pytest.fixture
def two_pipes():
    return graph(
        [reservoir("A", head=50.0), junction("B"), junction("C")],
        [pipe("AB", "A", "B", 1000.0, 0.3, 100.0), pipe("BC", "B", "C", 500.0, 0.2, 120.0)],
    )


def flow_for_loss(loss: float, length: float, diameter: float, roughness: float) -> float:
    return float((loss / hw_resistance(length, diameter, roughness)) ** (1.0 / 1.852))


class TestHeadLoss:
    def test_zero_flow(self):
        assert head_loss(0.0, 1000.0, 0.3, 100.0) == 0.0

    def test_odd_symmetry(self):
        assert head_loss(-0.05, 1000.0, 0.3, 100.0) == -head_loss(0.05, 1000.0, 0.3, 100.0)

    def test_closed_form(self):
        expected = 10.67 * 1000.0 * 0.05 ** 1.852 / (100.0 ** 1.852 * 0.3 ** 4.87)
        assert head_loss(0.05, 1000.0, 0.3, 100.0) == pytest.approx(expected, rel=1e-9)

    def test_vectorized(self):
        q = np.array([0.0, 0.01, -0.02])
        np.testing.assert_allclose(
            head_loss(q, 100.0, 0.2, 100.0), [head_loss(float(v), 100.0, 0.2, 100.0) for v in q]
        )

    def test_non_positive_parameters(self):
        with pytest.raises(ValueError):
            head_loss(0.01, 0.0, 0.3, 100.0)


class TestMassViolation:
    def test_exact_balance(self, star):
        state = ObservedState(flows={"AJ": 10.0, "BJ": 5.0, "JC": 12.0}, demand={"J": 3.0})
        assert mass_violation(star, state, "J", eps=0.0) == 0.0

    def test_direct_arithmetic(self, star):
        state = ObservedState(flows={"AJ": 10.0, "BJ": 0.0, "JC": 6.0}, demand={"J": 2.0})
        assert mass_violation(star, state, "J", eps=1e-12) == pytest.approx(0.2)

    def test_all_zero(self, star):
        state = ObservedState(flows={"AJ": 0.0, "BJ": 0.0, "JC": 0.0}, demand={"J": 0.0})
        assert mass_violation(star, state, "J") == 0.0

    def test_reverse_flow_counts_as_inflow(self, star):
        # JC carries 4 back into J, BJ carries 4 out of J
        state = ObservedState(flows={"AJ": 6.0, "BJ": -4.0, "JC": -4.0}, demand={"J": 6.0})
        assert mass_violation(star, state, "J", eps=0.0) == 0.0

    def test_fixed_head_nodes_return_zero(self, star):
        state = ObservedState(flows={"AJ": 10.0, "BJ": 0.0, "JC": 0.0})
        assert mass_violation(star, state, "A") == 0.0

    def test_raw_residual_without_normalization(self, star):
        state = ObservedState(flows={"AJ": 10.0, "BJ": 0.0, "JC": 6.0}, demand={"J": 2.0})
        assert mass_violation(star, state, "J", normalize=False) == pytest.approx(2.0)

    @pytest.mark.parametrize("kappa", [0.5, 2.0, 10.0])
    def test_scale_invariance(self, star, kappa):
        base = ObservedState(flows={"AJ": 0.01, "BJ": 0.004, "JC": 0.009}, demand={"J": 0.003})
        scaled = ObservedState(
            flows={k: kappa * v for k, v in base.flows.items()},
            demand={k: kappa * v for k, v in base.demand.items()},
        )
        assert mass_violation(star, scaled, "J", eps=0.0) == pytest.approx(mass_violation(star, base, "J", eps=0.0))


class TestEnergyViolation:
    def test_consistent_state(self, two_pipes):
        q = flow_for_loss(5.0, 1000.0, 0.3, 100.0)
        state = ObservedState(flows={"AB": q, "BC": 0.0}, heads={"A": 50.0, "B": 45.0, "C": 45.0})
        assert energy_violation(two_pipes, state, "AB") == pytest.approx(0.0, abs=1e-12)

    def test_direct_arithmetic(self, two_pipes):
        q = flow_for_loss(3.0, 1000.0, 0.3, 100.0)
        state = ObservedState(flows={"AB": q, "BC": 0.0}, heads={"A": 50.0, "B": 45.0, "C": 45.0})
        assert energy_violation(two_pipes, state, "AB") == pytest.approx(0.04)

    def test_reverse_flow_orientation(self, two_pipes):
        q = flow_for_loss(3.0, 1000.0, 0.3, 100.0)
        state = ObservedState(flows={"AB": -q, "BC": 0.0}, heads={"A": 45.0, "B": 50.0, "C": 50.0})
        assert energy_violation(two_pipes, state, "AB") == pytest.approx(0.04)

    def test_static_equilibrium(self, two_pipes):
        state = ObservedState(flows={"AB": 0.0, "BC": 0.0}, heads={"A": 50.0, "B": 50.0, "C": 50.0})
        assert energy_violation(two_pipes, state, "BC") == 0.0

    def test_non_physical_heads(self, two_pipes):
        state = ObservedState(flows={"AB": 0.0, "BC": 0.0}, heads={"A": 0.0, "B": -1.0, "C": 0.0})
        with pytest.raises(ValueError) as exc:
            energy_violation(two_pipes, state, "AB")
        assert "Non-physical" in str(exc.value)

    def test_perturbed_roughness_is_detected(self, two_pipes):
        q = flow_for_loss(5.0, 1000.0, 0.3, 100.0)
        state = ObservedState(flows={"AB": q, "BC": 0.0}, heads={"A": 50.0, "B": 45.0, "C": 45.0})
        assert energy_violation(two_pipes, state, "AB", roughness_scale=1.15) > 0.0


class TestNodeEnergyViolation:
    def test_max_over_incident_pipes(self, two_pipes):
        q_ab = flow_for_loss(3.0, 1000.0, 0.3, 100.0)
        state = ObservedState(flows={"AB": q_ab, "BC": 0.0}, heads={"A": 50.0, "B": 45.0, "C": 44.55})
        expected = max(energy_violation(two_pipes, state, "AB"), energy_violation(two_pipes, state, "BC"))
        assert node_energy_violation(two_pipes, state, "B") == pytest.approx(expected)
        assert expected == pytest.approx(0.04)

    def test_single_pipe(self, two_pipes):
        q = flow_for_loss(3.0, 1000.0, 0.3, 100.0)
        state = ObservedState(flows={"AB": q, "BC": 0.0}, heads={"A": 50.0, "B": 45.0, "C": 45.0})
        assert node_energy_violation(two_pipes, state, "A") == energy_violation(two_pipes, state, "AB")

    def test_closed_pipes_give_zero(self):
        g = graph(
            [reservoir("A"), junction("B")],
            [Edge(id="AB", from_node="A", to_node="B", kind="pipe", length_L=100.0, diameter_D=0.2,
                  roughness_C=100.0, status="closed")],
        )
        state = ObservedState(flows={"AB": 0.3}, heads={"A": 50.0, "B": 10.0})
        assert node_energy_violation(g, state, "B") == 0.0


class TestVectorized:
    def test_matches_scalar_forms(self, two_pipes):
        rng = np.random.default_rng(0)
        flows = rng.uniform(-0.05, 0.05, size=(4, 2))
        heads = rng.uniform(30.0, 60.0, size=(4, 3))
        demand = rng.uniform(0.0, 0.01, size=(4, 3))
        mass = mass_violations(two_pipes, flows, demand)
        energy = energy_violations(two_pipes, heads, flows)
        node_energy = node_energy_violations(two_pipes, heads, flows)
        for t in range(4):
            state = ObservedState(
                flows=dict(zip(two_pipes.edge_ids, flows[t])),
                heads=dict(zip(two_pipes.node_ids, heads[t])),
                demand=dict(zip(two_pipes.node_ids, demand[t])),
            )
            for k, node_id in enumerate(two_pipes.node_ids):
                assert mass[t, k] == pytest.approx(mass_violation(two_pipes, state, node_id))
                assert node_energy[t, k] == pytest.approx(node_energy_violation(two_pipes, state, node_id))
            for k, edge_id in enumerate(two_pipes.edge_ids):
                assert energy[t, k] == pytest.approx(energy_violation(two_pipes, state, edge_id))

    def test_energy_bounded_when_heads_dominate(self, two_pipes):
        flows = np.array([[0.01, 0.005]])
        heads = np.array([[50.0, 49.0, 48.5]])
        assert math.isfinite(energy_violations(two_pipes, heads, flows).max())
        assert energy_violations(two_pipes, heads, flows).max() <= 1.0
