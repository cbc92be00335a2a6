import numpy as np
import pytest

from resilinet.damage import DamageScenario, apply_damage, remaining_adjacency
from resilinet.gcn import Hyperparams, ModelWeights
from resilinet.planner import (METHOD_CENTERING, METHOD_FALLBACK, METHOD_LEARNED,
                               RecoveryPlan, load_plan, plan_centering,
                               plan_learned, save_plan, verify_plan)
from resilinet.swarm import SwarmTopology, count_subnets, generate_swarm

from _oracles import eigencount_components
from resilinet.swarm import build_adjacency

TINY = Hyperparams(hidden_dim=8, blocks=1, dropout=0.0, online_iters=25,
                   pretrain_iters=1)


def square_topology():
    positions = np.array([[0.0, 0.0], [100.0, 0.0], [0.0, 100.0], [100.0, 100.0]])
    return SwarmTopology(positions=positions, comm_range=120.0, side=100.0)


class TestPlanCentering:
    def test_square_with_one_corner_destroyed(self):
        topo = square_topology()
        scenario = DamageScenario(destroyed=np.array([3]),
                                  remaining=np.array([0, 1, 2]))
        plan = plan_centering(topo, scenario, max_speed=10.0)
        assert np.allclose(plan.targets, [[50.0, 50.0]] * 3)
        assert plan.planned_time == pytest.approx(np.sqrt(2) * 50.0 / 10.0)
        assert plan.method == METHOD_CENTERING

    def test_planned_time_equals_worst_case_bound(self):
        topo = generate_swarm(25, 200.0, 120.0, seed=2)
        scenario = apply_damage(topo, 12, seed=3)
        plan = plan_centering(topo, scenario, max_speed=10.0)
        center = topo.positions.mean(axis=0)
        start = topo.positions[scenario.remaining]
        bound = np.linalg.norm(start - center, axis=1).max() / 10.0
        assert plan.planned_time == pytest.approx(bound)

    def test_always_verifies(self):
        for seed in range(5):
            topo = generate_swarm(20, 200.0, 120.0, seed=seed)
            scenario = apply_damage(topo, 10, seed=seed + 50)
            plan = plan_centering(topo, scenario)
            assert verify_plan(plan, topo.comm_range)


class TestVerifyPlan:
    def test_identity_plan_fails_on_split_scenario(self):
        topo = generate_swarm(20, 200.0, 120.0, seed=4)
        scenario = apply_damage(topo, 10, seed=5)
        identity = RecoveryPlan(targets=topo.positions[scenario.remaining].copy(),
                                planned_time=0.0, method=METHOD_CENTERING)
        assert not verify_plan(identity, topo.comm_range)
        assert count_subnets(remaining_adjacency(topo, scenario)) >= 2

    def test_matches_eigencount_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            targets = rng.uniform(0, 400, size=(12, 2))
            plan = RecoveryPlan(targets=targets, planned_time=0.0,
                                method=METHOD_CENTERING)
            adjacency = build_adjacency(targets, 120.0)
            assert verify_plan(plan, 120.0) == (eigencount_components(adjacency) == 1)


class TestPlanLearned:
    def test_already_connected_scenario_is_zero_motion(self):
        topo = generate_swarm(14, 200.0, 120.0, seed=8)
        # find a draw that does not split the survivors
        for seed in range(100):
            scenario = apply_damage(topo, 3, seed=seed, require_split=False)
            if count_subnets(remaining_adjacency(topo, scenario)) == 1:
                break
        weights = ModelWeights.init_scaled_uniform(8, 1, seed=0)
        plan = plan_learned(topo, scenario, weights, TINY)
        assert plan.method == METHOD_LEARNED
        assert plan.planned_time == 0.0
        assert np.array_equal(plan.targets, topo.positions[scenario.remaining])

    def test_total_guarantee_on_split_cases(self):
        weights = ModelWeights.init_scaled_uniform(8, 1, seed=1)
        for seed in range(6):
            topo = generate_swarm(16, 200.0, 120.0, seed=seed + 20)
            scenario = apply_damage(topo, 7, seed=seed + 70)
            plan = plan_learned(topo, scenario, weights, TINY, seed=seed)
            assert plan.method in (METHOD_LEARNED, METHOD_FALLBACK)
            assert verify_plan(plan, topo.comm_range)
            center = topo.positions.mean(axis=0)
            start = topo.positions[scenario.remaining]
            bound = np.linalg.norm(start - center, axis=1).max() / TINY.max_speed
            assert plan.planned_time <= bound + 1e-9

    def test_planned_time_matches_target_distances(self):
        weights = ModelWeights.init_scaled_uniform(8, 1, seed=1)
        topo = generate_swarm(16, 200.0, 120.0, seed=26)
        scenario = apply_damage(topo, 7, seed=76)
        plan = plan_learned(topo, scenario, weights, TINY, seed=0)
        start = topo.positions[scenario.remaining]
        expected = np.linalg.norm(plan.targets - start, axis=1).max() / TINY.max_speed
        assert plan.planned_time == pytest.approx(expected)


class TestPlanFile:
    def test_round_trip(self, tmp_path):
        topo = generate_swarm(16, 200.0, 120.0, seed=9)
        scenario = apply_damage(topo, 7, seed=10)
        plan = plan_centering(topo, scenario)
        path = tmp_path / "plan.json"
        save_plan(path, plan, scenario_ref="scenario.json")
        loaded = load_plan(path)
        assert loaded.method == plan.method
        assert loaded.planned_time == pytest.approx(plan.planned_time)
        assert np.allclose(loaded.targets, plan.targets)
