"""End-to-end acceptance checks, one per release criterion.

Each test prints a single PASS/FAIL line with its runtime and asserts the
stated tolerance and time budget.  Run with -s to see the lines live.
"""

import dataclasses
import json
import time

import numpy as np

from conftest import deterministic, make_t1
from efleet import engine, envserver, obsgraph, planners
from efleet.charging import cccv_power, integrate_charge
from efleet.netmodel import GeneratorParams, generate_instance
from oracles import enumerate_min_cost, reference_charge


def _timed(name, budget_s, body):
    t0 = time.perf_counter()
    try:
        body()
    except BaseException:
        print(f"[FAIL] {name} ({time.perf_counter() - t0:.1f}s)")
        raise
    elapsed = time.perf_counter() - t0
    print(f"[PASS] {name} ({elapsed:.1f}s)")
    assert elapsed < budget_s, f"{name} exceeded {budget_s}s budget ({elapsed:.1f}s)"


def _run_world(inst, policy, seed):
    world, _ = engine.reset(inst, seed)
    obs = obsgraph.encode_observation(world)
    while not world.done:
        action = policy(obs, world)
        engine.step(world, action)
        if not world.done:
            obs = obsgraph.encode_observation(world)
    return world


def test_acceptance_cccv_profile():
    def body():
        assert cccv_power(0.0, 50, 5) == 30.0
        assert cccv_power(0.30, 50, 5) == 47.5
        assert cccv_power(0.65, 50, 5) == 50.0
        assert cccv_power(1.0, 50, 5) == 20.0
        # continuity at the segment boundaries: compare the analytic segment
        # formulas evaluated at each junction
        p_max, p_min = 50.0, 5.0
        joins = [
            (p_max * (0.6 + 3.0 * 0.10), p_max * (0.9 + 0.25 * 0.0)),
            (p_max * (0.9 + 0.25 * 0.40), p_max),
            (p_max, max(p_min, p_max * (1.0 - 0.6 * 0.0**1.5))),
        ]
        for left, right in joins:
            assert abs(left - right) < 1e-9

    _timed("cccv profile points and continuity", 1.0, body)


def test_acceptance_charging_integration():
    def body():
        # constant-power region: 1 h at eta*p_max = 42.5 kW from 200 kWh
        b_after, _ = integrate_charge(200.0, 400.0, 1.0, 0.85, 50.0, 5.0, 0.01)
        assert abs(b_after - 242.5) < 0.5
        # taper region against a fine-step reference
        b_coarse, _ = integrate_charge(340.0, 400.0, 1.0, 0.85, 50.0, 5.0, 0.01)
        b_fine = reference_charge(340.0, 400.0, 1.0, 0.85, 50.0, 5.0, dt=1e-4)
        assert abs(b_coarse - b_fine) < 0.2
        # capacity is never exceeded over randomized sessions
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            capacity = rng.uniform(50.0, 500.0)
            battery = rng.uniform(0.0, capacity)
            duration = rng.uniform(0.0, 2.0)
            eta = rng.uniform(0.7, 1.0)
            p_max = rng.uniform(20.0, 150.0)
            p_min = rng.uniform(1.0, 10.0)
            b, added = integrate_charge(battery, capacity, duration, eta, p_max, p_min, 0.01)
            assert b <= capacity + 1e-12
            assert added >= 0.0

    _timed("charging integration vs closed form and reference", 10.0, body)


def test_acceptance_queue_port_invariants():
    def body():
        params = GeneratorParams(
            n_nodes=8, n_chargers=2, n_trucks=3, stops_per_truck=2, port_range=(1, 1)
        )
        for seed in range(200):
            inst = generate_instance(params, seed)
            # port capacity is asserted inside the engine at every event
            world = _run_world(inst, planners.RandomPolicy(), seed)
            by_station: dict[int, list[dict]] = {}
            for rec in world.session_log:
                by_station.setdefault(rec["station"], []).append(rec)
            waited_total = 0.0
            for sessions in by_station.values():
                # first come, first served: earlier arrival never starts later
                for a in sessions:
                    for b in sessions:
                        if a["arrive"] < b["arrive"] - 1e-12:
                            assert a["start"] <= b["start"] + 1e-12
                for rec in sessions:
                    assert abs((rec["start"] - rec["arrive"]) - rec["waited"]) < 1e-9
                    waited_total += rec["waited"]
            metrics = engine.collect_metrics(world)
            assert abs(waited_total - metrics.waiting_time_h) < 1e-9

    _timed("queue/port invariants over 200 episodes", 60.0, body)


def test_acceptance_mask_soundness():
    def body():
        params = GeneratorParams(n_nodes=8, n_chargers=2, n_trucks=2, stops_per_truck=2)
        failures_unmasked = 0
        for seed in range(200):
            inst = generate_instance(params, seed)
            world = _run_world(inst, planners.RandomPolicy(), seed)
            assert not any(t.stranded_mid_edge for t in world.trucks), (
                f"mid-edge stranding under masked policy, seed {seed}"
            )
            world = _run_world(inst, planners.RandomPolicy(allow_infeasible=True), seed)
            failures_unmasked += sum(
                1
                for t in world.trucks
                if t.terminated_reason in ("stranded", "infeasible_action")
            )
        assert failures_unmasked > 0

    _timed("mask soundness over 200 masked/unmasked episodes", 60.0, body)


def test_acceptance_oracle_equivalence():
    def body():
        t1 = deterministic(make_t1())
        _, cost = planners.optimal_search(t1, t1.trucks[0])
        assert cost == 2.4

        params = GeneratorParams(n_nodes=7, n_chargers=2, n_trucks=1, stops_per_truck=3)
        checked = 0
        seed = 0
        while checked < 50:
            inst = deterministic(generate_instance(params, seed))
            seed += 1
            truck = inst.trucks[0]
            _, cost = planners.optimal_search(inst, truck)
            brute = enumerate_min_cost(inst, truck)
            assert abs(cost - brute) < 1e-9, f"seed {seed - 1}: {cost} vs {brute}"
            metrics, _ = engine.run_episode(inst, planners.heuristic_policy, 0, record_trace=False)
            if metrics.success:
                assert metrics.total_time_h >= cost - 1e-9
            checked += 1

    _timed("oracle equivalence on 50 deterministic instances", 120.0, body)


def test_acceptance_determinism_replay():
    def body():
        inst = make_t1()
        factories = {
            "heuristic": lambda: planners.heuristic_policy,
            "planner": planners.PlannerPolicy,
            "random": planners.RandomPolicy,
        }
        for name, factory in factories.items():
            for seed in range(100):
                _, trace = engine.run_episode(inst, factory(), seed)
                report = envserver.replay(trace, inst)
                assert report.ok, f"{name} seed {seed}: {report.error or report.first_divergence()}"
                _, trace2 = engine.run_episode(inst, factory(), seed)
                assert json.dumps(trace, sort_keys=True) == json.dumps(trace2, sort_keys=True), (
                    f"{name} seed {seed}: rerun not byte-identical"
                )

    _timed("determinism and replay, 100 seeds x 3 policies", 120.0, body)


def test_acceptance_benchmark_ordering():
    def body():
        params = GeneratorParams(n_nodes=20, n_chargers=3, n_trucks=5, stops_per_truck=3)
        factories = {
            "planner": planners.PlannerPolicy,
            "heuristic": lambda: planners.heuristic_policy,
            "random": planners.RandomPolicy,
        }
        rewards = {name: [] for name in factories}
        success = {name: 0 for name in factories}
        for k in range(100):
            inst = generate_instance(params, 1000 + k)
            # common random numbers: every policy replays the same episode seed
            for name, factory in factories.items():
                metrics, _ = engine.run_episode(inst, factory(), k, record_trace=False)
                rewards[name].append(metrics.reward_total)
                success[name] += int(metrics.success)
        mean = {name: sum(v) / len(v) for name, v in rewards.items()}
        assert mean["planner"] >= mean["heuristic"] >= mean["random"]
        assert success["planner"] >= success["heuristic"]
        wins = {name: 0 for name in factories}
        ties = 0
        for k in range(100):
            vals = {name: rewards[name][k] for name in factories}
            best = max(vals.values())
            leaders = [name for name, v in vals.items() if v == best]
            if len(leaders) == 1:
                wins[leaders[0]] += 1
            else:
                ties += 1
        assert sum(wins.values()) + ties == 100
        assert sum(wins.values()) <= 100

    _timed("benchmark ordering over 100 common-random-number scenarios", 600.0, body)
