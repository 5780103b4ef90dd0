import dataclasses
import json

import numpy as np
import pytest

from conftest import deterministic, make_t1
from efleet.netmodel import (
    GenerationInfeasible,
    GeneratorParams,
    ParseError,
    TruckSpec,
    ValidationError,
    generate_instance,
    instance_from_dict,
    load_instance,
    q9,
    save_instance,
    validate_assignment,
    validate_instance,
)

MINIMAL_DOC = {
    "meta": {"format": "etfrp-instance/1"},
    "nodes": [
        {"id": 0, "kind": "depot", "x": 0.0, "y": 0.0},
        {"id": 1, "kind": "delivery", "x": 1.0, "y": 0.0},
    ],
    "tau": [[0.0, 1.0], [1.0, 0.0]],
    "energy": [[0.0, 40.0], [40.0, 0.0]],
    "chargers": [],
    "trucks": [
        {
            "id": 0,
            "start_node": 0,
            "battery_capacity": 400.0,
            "initial_battery": 400.0,
            "battery_floor": 0.0,
            "deliveries": [1],
            "mode": "sequential",
        }
    ],
    "config": {},
}


def test_minimal_two_node_document():
    inst = instance_from_dict(MINIMAL_DOC)
    assert inst.n_nodes == 2
    assert inst.chargers == ()


def test_t1_round_trip_identity(t1):
    assert load_instance(save_instance(t1)) == t1


def test_round_trip_preserves_asymmetric_entries(t1):
    back = load_instance(save_instance(t1))
    assert np.array_equal(back.tau, t1.tau)
    assert back.tau[0][1] != back.tau[1][0]


def test_negative_cost_rejected():
    doc = json.loads(json.dumps(MINIMAL_DOC))
    doc["tau"][0][1] = -1.0
    with pytest.raises(ValidationError, match="negative|>= 0|non-negative"):
        instance_from_dict(doc)


def test_missing_key_names_path():
    doc = {k: v for k, v in MINIMAL_DOC.items() if k != "tau"}
    with pytest.raises(ParseError, match="tau"):
        instance_from_dict(doc)


def test_validation_collects_all_failures(t1):
    bad_tau = t1.tau.copy()
    bad_tau[0][0] = 1.0
    bad_tau[0][1] = -2.0
    inst = dataclasses.replace(t1, tau=bad_tau)
    with pytest.raises(ValidationError) as exc:
        validate_instance(inst)
    assert len(exc.value.failures) >= 2


def test_q9_nine_significant_digits():
    assert q9(1.0 / 3.0) == float(f"{1.0 / 3.0:.9g}")
    assert q9(2.0) == 2.0


def test_generator_determinism():
    params = GeneratorParams(n_nodes=10, n_chargers=2, n_trucks=1, stops_per_truck=3)
    a = generate_instance(params, 7)
    b = generate_instance(params, 7)
    assert save_instance(a) == save_instance(b)


def test_generator_zero_jitter_symmetric():
    params = GeneratorParams(n_nodes=10, n_chargers=2, n_trucks=1, stops_per_truck=3)
    inst = generate_instance(params, 7)
    assert np.array_equal(inst.tau, inst.tau.T)
    assert np.array_equal(inst.energy, inst.energy.T)


def test_generator_speed_and_energy_scaling():
    params = GeneratorParams(n_nodes=8, n_chargers=2, n_trucks=1, stops_per_truck=2)
    inst = generate_instance(params, 3)
    for u in range(inst.n_nodes):
        for v in range(inst.n_nodes):
            if u == v:
                continue
            dist = float(np.hypot(inst.nodes[u].x - inst.nodes[v].x, inst.nodes[u].y - inst.nodes[v].y))
            assert inst.tau[u][v] == pytest.approx(dist / 40.0, rel=1e-6)
            assert inst.energy[u][v] == pytest.approx(dist * 1.0, rel=1e-6)


def test_generator_jitter_breaks_symmetry():
    params = GeneratorParams(
        n_nodes=10, n_chargers=2, n_trucks=1, stops_per_truck=3, asymmetry_jitter=0.2
    )
    inst = generate_instance(params, 11)
    assert not np.array_equal(inst.tau, inst.tau.T)


def test_generator_assignments_always_feasible():
    params = GeneratorParams(n_nodes=15, n_chargers=2, n_trucks=3, stops_per_truck=3)
    for seed in range(5):
        inst = generate_instance(params, seed)
        for truck in inst.trucks:
            assert validate_assignment(inst, truck).feasible


def test_generator_round_trip_ten_trucks():
    params = GeneratorParams(n_nodes=30, n_chargers=3, n_trucks=10, stops_per_truck=2)
    inst = generate_instance(params, 5)
    assert load_instance(save_instance(inst)) == inst


def test_generator_infeasible_precondition():
    params = GeneratorParams(n_nodes=3, n_chargers=2, n_trucks=1, stops_per_truck=3)
    with pytest.raises((ValueError, GenerationInfeasible)):
        generate_instance(params, 0)


def test_validate_assignment_full_battery(t1):
    report = validate_assignment(t1, t1.trucks[0])
    assert report.feasible
    assert report.required_stops == ()


def test_validate_assignment_needs_charge_stop():
    inst = make_t1(initial_battery=60.0)
    report = validate_assignment(inst, inst.trucks[0])
    assert report.feasible
    assert report.required_stops == ((0, 3),)


def test_validate_assignment_infeasible_leg():
    doc = json.loads(json.dumps(MINIMAL_DOC))
    doc["energy"] = [[0.0, 400.0], [400.0, 0.0]]
    inst = instance_from_dict(doc)
    report = validate_assignment(inst, inst.trucks[0])
    assert not report.feasible


def test_deterministic_helper_round_trips(t1):
    det = deterministic(t1)
    assert det.config.stochastic.deterministic
    assert load_instance(save_instance(det)) == det
