"""State-dependent feasible action construction and masking.

Canonical enumeration order for a truck with assignment D_i:
all charger-navigation slots (station id order), then all delivery slots
(assignment order), then all charge-duration slots (ascending).  Slot count
is always |C| + |D_i| + |H|; infeasible slots keep their features but are
masked out.
"""

from __future__ import annotations

from dataclasses import dataclass

from .charging import integrate_charge

NAVIGATE_CHARGER = "NavigateCharger"
NAVIGATE_DELIVERY = "NavigateDelivery"
CHARGE = "Charge"


@dataclass(frozen=True)
class ActionDescriptor:
    index: int
    kind: str
    target: int
    duration: float | None = None
    feasible: bool = False
    est_battery_after: float = 0.0
    est_completion: float = 0.0


@dataclass(frozen=True)
class ActionSet:
    actions: tuple[ActionDescriptor, ...]
    mask: tuple[int, ...]

    @property
    def fixed_size(self) -> int:
        return len(self.actions)

    def feasible_indices(self) -> list[int]:
        return [i for i, m in enumerate(self.mask) if m]


def reference_delivery(world, truck) -> int | None:
    """Next delivery in sequential mode; nearest remaining one in flexible mode."""
    if not truck.remaining:
        return None
    if truck.spec.mode == "sequential":
        return truck.remaining[0]
    tau = world.inst.tau
    n = truck.node
    # ties break by ascending node id
    return min(truck.remaining, key=lambda d: (tau[n][d], d))


def charger_detour(world, truck, station_node: int) -> float:
    d_ref = reference_delivery(world, truck)
    tau = world.inst.tau
    n = truck.node
    return tau[n][station_node] + tau[station_node][d_ref] - tau[n][d_ref]


def candidate_chargers(world, truck, k_chg: int) -> list[int]:
    """Up to k_chg station nodes with smallest detour; ties by station id."""
    if not truck.remaining:
        return []
    ranked = sorted(
        world.inst.charger_nodes,
        key=lambda c: (charger_detour(world, truck, c), c),
    )
    return ranked[:k_chg]


def estimate_post_state(world, truck, action: ActionDescriptor) -> tuple[float, float]:
    """(estimated battery after, estimated completion time) under nominal costs."""
    inst = world.inst
    now = world.clock
    if action.kind == CHARGE:
        spec = inst.charger_at(action.target)
        b_after, _ = integrate_charge(
            truck.battery,
            truck.spec.battery_capacity,
            action.duration,
            spec.eta,
            spec.p_max,
            spec.p_min,
            inst.config.charge_dt,
        )
        return b_after, now + action.duration
    b_after = truck.battery - inst.energy[truck.node][action.target]
    return b_after, now + inst.tau[truck.node][action.target]


def build_action_set(world, truck, config=None) -> ActionSet:
    """Fixed-size enumeration with the feasibility mask for an acting truck."""
    cfg = config or world.inst.config
    inst = world.inst
    alpha = cfg.alpha
    battery = truck.battery
    floor = truck.spec.battery_floor
    n = truck.node

    candidates = set(candidate_chargers(world, truck, cfg.k_chg))
    if truck.spec.mode == "sequential":
        nav_deliveries = {truck.remaining[0]} if truck.remaining else set()
    else:
        nav_deliveries = set(truck.remaining)

    station = inst.charger_at(n)
    at_station = station is not None
    charge_ok = at_station and truck.remaining and (
        not cfg.mask_full_stations or world.station_of(n).has_free_port()
    )

    def headroom(v: int) -> bool:
        return alpha * inst.energy[n][v] < battery - floor

    actions: list[ActionDescriptor] = []
    idx = 0
    for c in inst.charger_nodes:
        # navigating to the node the truck already occupies is a no-op; masked
        feasible = c in candidates and c != n and headroom(c)
        a = ActionDescriptor(index=idx, kind=NAVIGATE_CHARGER, target=c, feasible=feasible)
        b_hat, t_hat = estimate_post_state(world, truck, a)
        actions.append(
            ActionDescriptor(idx, NAVIGATE_CHARGER, c, None, feasible, b_hat, t_hat)
        )
        idx += 1
    for d in truck.spec.deliveries:
        feasible = d in nav_deliveries and headroom(d)
        a = ActionDescriptor(index=idx, kind=NAVIGATE_DELIVERY, target=d, feasible=feasible)
        b_hat, t_hat = estimate_post_state(world, truck, a)
        actions.append(
            ActionDescriptor(idx, NAVIGATE_DELIVERY, d, None, feasible, b_hat, t_hat)
        )
        idx += 1
    for h in cfg.duration_set:
        feasible = bool(charge_ok)
        target = n if at_station else inst.charger_nodes[0] if inst.chargers else -1
        if at_station:
            a = ActionDescriptor(index=idx, kind=CHARGE, target=n, duration=h, feasible=feasible)
            b_hat, t_hat = estimate_post_state(world, truck, a)
        else:
            b_hat, t_hat = battery, world.clock
        actions.append(ActionDescriptor(idx, CHARGE, target, h, feasible, b_hat, t_hat))
        idx += 1

    mask = tuple(1 if a.feasible else 0 for a in actions)
    return ActionSet(actions=tuple(actions), mask=mask)
