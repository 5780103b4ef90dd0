"""Non-learning policies: rule-based heuristic, NN+2-opt ordering, a nominal
uniform-cost search oracle, plan-following execution, and random baselines."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from . import actionspace
from .actionspace import CHARGE, NAVIGATE_CHARGER, NAVIGATE_DELIVERY
from .charging import integrate_charge
from .netmodel import NetworkInstance, TruckSpec


class SearchResourceError(RuntimeError):
    """max_expansions exceeded; best_plan/best_cost hold the non-optimal best."""

    def __init__(self, best_plan, best_cost):
        super().__init__("optimal_search exceeded max_expansions")
        self.best_plan = best_plan
        self.best_cost = best_cost


@dataclass(frozen=True)
class PlanStep:
    kind: str
    target: int
    duration: float | None = None


@dataclass
class PlanNode:
    location: int
    battery_bucket: int
    remaining_mask: int
    g_cost: float


# ---------------------------------------------------------------------------
# rule-based heuristic


def heuristic_policy(obs, world) -> int:
    """Feasibility-first rules: deliver if possible, otherwise charge or detour.

    At a station the smallest duration is chosen whose nominal post-charge
    battery covers the next delivery leg plus a reserve for the cheapest
    onward charger leg; if none suffices, the longest duration is chosen.
    """
    aset = world.current_action_set
    truck = world.trucks[world.active_truck]
    inst = world.inst
    alpha = inst.config.alpha
    floor = truck.spec.battery_floor
    d_ref = actionspace.reference_delivery(world, truck)

    # rule 1: reference delivery directly reachable
    for a in aset.actions:
        if a.kind == NAVIGATE_DELIVERY and a.target == d_ref and a.feasible:
            return a.index

    # rule 2: already at a station -> pick a charge duration
    charge_slots = [a for a in aset.actions if a.kind == CHARGE and a.feasible]
    if charge_slots:
        leg = alpha * inst.energy[truck.node][d_ref]
        reserve = alpha * min(
            (inst.energy[d_ref][c] for c in inst.charger_nodes), default=0.0
        )
        need = floor + leg + reserve
        for a in charge_slots:  # ascending durations by construction
            if a.est_battery_after > need:
                return a.index
        return charge_slots[-1].index

    # rule 3: navigate to the min-detour feasible candidate charger
    nav_chg = [a for a in aset.actions if a.kind == NAVIGATE_CHARGER and a.feasible]
    if nav_chg:
        best = min(nav_chg, key=lambda a: (actionspace.charger_detour(world, truck, a.target), a.target))
        return best.index

    # rule 4: any remaining feasible action, else surrender (engine terminates)
    feas = aset.feasible_indices()
    if feas:
        return feas[0]
    return next(i for i, a in enumerate(aset.actions) if not a.feasible)


# ---------------------------------------------------------------------------
# nearest neighbor + 2-opt ordering (flexible mode)


def _path_cost(costs: np.ndarray, path: list[int]) -> float:
    return float(sum(costs[u][v] for u, v in zip(path, path[1:])))


def tsp_order(costs: np.ndarray) -> list[int]:
    """Open-tour ordering over a submatrix whose row/col 0 is the start.

    Nearest-neighbor construction followed by 2-opt segment reversals
    (asymmetric-aware: reversed segments are re-costed with the directed
    matrix; only strict improvements are accepted).  Returns the visit order
    of indices 1..m.
    """
    m = costs.shape[0] - 1
    if m < 1:
        raise ValueError("need at least one delivery")
    unvisited = set(range(1, m + 1))
    path = [0]
    while unvisited:
        u = path[-1]
        nxt = min(unvisited, key=lambda v: (costs[u][v], v))
        path.append(nxt)
        unvisited.remove(nxt)

    improved = True
    best_cost = _path_cost(costs, path)
    while improved:
        improved = False
        for i in range(1, m + 1):
            for j in range(i + 1, m + 1):
                cand = path[:i] + path[i : j + 1][::-1] + path[j + 1 :]
                cand_cost = _path_cost(costs, cand)
                if cand_cost < best_cost - 1e-12:
                    path, best_cost = cand, cand_cost
                    improved = True
    return path[1:]


def order_deliveries(inst: NetworkInstance, start: int, deliveries: list[int]) -> list[int]:
    ids = [start] + list(deliveries)
    sub = inst.tau[np.ix_(ids, ids)]
    return [ids[i] for i in tsp_order(sub)]


# ---------------------------------------------------------------------------
# nominal-model optimal search


class _PlanTruck:
    def __init__(self, spec, node, battery, remaining):
        self.spec = spec
        self.node = node
        self.battery = battery
        self.remaining = remaining


class _AlwaysFreeStation:
    @staticmethod
    def has_free_port() -> bool:
        return True


class _PlanWorld:
    # queue-free nominal context for build_action_set
    def __init__(self, inst):
        self.inst = inst
        self.clock = 0.0

    def station_of(self, node):
        return _AlwaysFreeStation()


def optimal_search(
    inst: NetworkInstance,
    truck: TruckSpec,
    limits: dict | None = None,
    *,
    start_node: int | None = None,
    battery: float | None = None,
    remaining: list[int] | None = None,
) -> tuple[list[PlanStep], float]:
    """Minimum nominal-total-time plan for a single truck, queue-free.

    Uniform-cost search over (node, remaining deliveries, battery) with the
    same action construction as the live engine under nominal dynamics.
    Labels dominated at a (node, remaining) pair (earlier pop with at least
    as much battery) are pruned, so the result is exact regardless of the
    battery_bucket display quantum.
    """
    limits = limits or {}
    quantum = float(limits.get("battery_quantum", 1.0))
    max_expansions = int(limits.get("max_expansions", 500_000))
    unload = inst.config.stochastic.unloading_nominal

    node0 = truck.start_node if start_node is None else start_node
    b0 = truck.initial_battery if battery is None else battery
    rem0 = tuple(truck.deliveries) if remaining is None else tuple(remaining)
    if not rem0:
        return [], 0.0

    pworld = _PlanWorld(inst)
    popped: dict[tuple, list[float]] = {}
    counter = 0
    heap: list[tuple[float, int, int, tuple, float, tuple]] = []
    heap.append((0.0, counter, node0, rem0, b0, ()))
    expansions = 0
    best_plan: tuple = ()
    best_cost = float("inf")
    best_rem = len(rem0)

    while heap:
        cost, _, node, rem, b, plan = heapq.heappop(heap)
        if not rem:
            return list(plan), cost
        key = (node, rem)
        doms = popped.setdefault(key, [])
        if any(pb >= b - 1e-9 for pb in doms):
            continue
        doms.append(b)
        if len(rem) < best_rem or (len(rem) == best_rem and cost < best_cost):
            best_plan, best_cost, best_rem = plan, cost, len(rem)
        expansions += 1
        if expansions > max_expansions:
            raise SearchResourceError(list(best_plan), best_cost)

        ptruck = _PlanTruck(truck, node, b, list(rem))
        aset = actionspace.build_action_set(pworld, ptruck, inst.config)
        for a in aset.actions:
            if not a.feasible:
                continue
            counter += 1
            if a.kind == CHARGE:
                spec = inst.charger_at(node)
                b2, _ = integrate_charge(
                    b, truck.battery_capacity, a.duration, spec.eta, spec.p_max, spec.p_min, inst.config.charge_dt
                )
                heapq.heappush(
                    heap,
                    (cost + a.duration, counter, node, rem, b2, plan + (PlanStep(CHARGE, node, a.duration),)),
                )
            elif a.kind == NAVIGATE_DELIVERY:
                b2 = b - inst.energy[node][a.target]
                rem2 = tuple(d for d in rem if d != a.target)
                step_cost = inst.tau[node][a.target] + unload
                heapq.heappush(
                    heap,
                    (cost + step_cost, counter, a.target, rem2, b2, plan + (PlanStep(NAVIGATE_DELIVERY, a.target),)),
                )
            else:
                b2 = b - inst.energy[node][a.target]
                heapq.heappush(
                    heap,
                    (
                        cost + inst.tau[node][a.target],
                        counter,
                        a.target,
                        rem,
                        b2,
                        plan + (PlanStep(NAVIGATE_CHARGER, a.target),),
                    ),
                )
    return list(best_plan), float("inf") if best_rem > 0 else best_cost


# ---------------------------------------------------------------------------
# plan-following policy with online replanning


class PlannerPolicy:
    """Follows a per-truck nominal plan; replans when execution diverges."""

    def __init__(self, limits: dict | None = None):
        self.limits = limits or {}
        self.plans: dict[int, list[PlanStep]] = {}

    def _replan(self, world, truck) -> list[PlanStep]:
        try:
            plan, _ = optimal_search(
                world.inst,
                truck.spec,
                self.limits,
                start_node=truck.node,
                battery=truck.battery,
                remaining=list(truck.remaining),
            )
            return plan
        except SearchResourceError as exc:
            return list(exc.best_plan)

    def __call__(self, obs, world) -> int:
        aset = world.current_action_set
        truck = world.trucks[world.active_truck]
        tid = truck.spec.id
        plan = self.plans.get(tid)

        def match(step_: PlanStep):
            for a in aset.actions:
                if a.kind == step_.kind and a.target == step_.target and (
                    step_.duration is None or a.duration == step_.duration
                ):
                    return a
            return None

        if plan:
            a = match(plan[0])
            if a is not None and a.feasible:
                self.plans[tid] = plan[1:]
                return a.index
        plan = self._replan(world, truck)
        if plan:
            a = match(plan[0])
            if a is not None and a.feasible:
                self.plans[tid] = plan[1:]
                return a.index
        self.plans[tid] = []
        return heuristic_policy(obs, world)


# ---------------------------------------------------------------------------
# random baselines


class RandomPolicy:
    """Uniform over feasible actions; with allow_infeasible, uniform over all."""

    def __init__(self, allow_infeasible: bool = False):
        self.allow_infeasible = allow_infeasible

    def __call__(self, obs, world) -> int:
        aset = world.current_action_set
        if self.allow_infeasible:
            return world.streams.integers("tiebreak", aset.fixed_size)
        feas = aset.feasible_indices()
        return feas[world.streams.integers("tiebreak", len(feas))]


def random_policy(obs, world, allow_infeasible: bool = False) -> int:
    return RandomPolicy(allow_infeasible)(obs, world)
