import dataclasses

import numpy as np
import pytest

from efleet.netmodel import (
    ChargerSpec,
    NetworkInstance,
    PoiNode,
    ScenarioConfig,
    TruckSpec,
    validate_instance,
)

T1_TAU = np.array(
    [
        [0.0, 1.0, 2.0, 0.5],
        [1.2, 0.0, 1.0, 0.6],
        [2.2, 1.1, 0.0, 1.5],
        [0.5, 0.5, 1.4, 0.0],
    ]
)


def make_t1(initial_battery=400.0, mode="sequential", config=None) -> NetworkInstance:
    """Four-node fixture: depot, two deliveries, one single-port charger."""
    nodes = (
        PoiNode(0, "depot", 0.0, 0.0),
        PoiNode(1, "delivery", 1.0, 0.0),
        PoiNode(2, "delivery", 2.0, 0.0),
        PoiNode(3, "charger", 0.5, 0.5),
    )
    chargers = (ChargerSpec(node=3, p_max=50.0, p_min=5.0, eta=0.85, ports=1),)
    truck = TruckSpec(
        id=0,
        start_node=0,
        battery_capacity=400.0,
        initial_battery=initial_battery,
        battery_floor=0.0,
        deliveries=(1, 2),
        mode=mode,
    )
    inst = NetworkInstance(
        nodes=nodes,
        tau=T1_TAU.copy(),
        energy=40.0 * T1_TAU,
        chargers=chargers,
        trucks=(truck,),
        config=config or ScenarioConfig(),
    )
    validate_instance(inst)
    return inst


def deterministic(inst: NetworkInstance) -> NetworkInstance:
    sp = dataclasses.replace(inst.config.stochastic, deterministic=True)
    cfg = dataclasses.replace(inst.config, stochastic=sp)
    return dataclasses.replace(inst, config=cfg)


@pytest.fixture
def t1() -> NetworkInstance:
    return make_t1()


@pytest.fixture
def t1_det() -> NetworkInstance:
    return deterministic(make_t1())
