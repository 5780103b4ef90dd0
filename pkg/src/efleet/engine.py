"""Event-driven fleet simulation core.

Continuous-time event queue over per-truck state machines.  Control returns
to the caller whenever a truck is selected to act; `step` applies the chosen
action and advances the world until the next decision point (or episode end).
Rewards follow -lambda1*dt + lambda2*deliveries + lambda3*failure, finalized
per truck whenever it reaches its next decision point or terminates.
"""

from __future__ import annotations

import heapq
import time as _time
from dataclasses import dataclass, field

from . import actionspace, stochastic
from .actionspace import ActionSet, CHARGE, NAVIGATE_DELIVERY
from .charging import StationState, integrate_charge
from .netmodel import NetworkInstance, RewardParams, TruckSpec
from .stochastic import RandomStreams, sample_energy_coeff, sample_travel_time, sample_unloading

# FSM states
ACTION_PENDING = "ActionPending"
ROUTING = "Routing"
WAITING = "WaitingOnChargerQueue"
CHARGING = "Charging"
UNLOADING = "Unloading"
TERMINATED = "Terminated"

FSM_STATES = (ACTION_PENDING, ROUTING, WAITING, CHARGING, UNLOADING, TERMINATED)

# event kinds
EV_ARRIVAL = "Arrival"
EV_CHARGE_END = "ChargeSessionEnd"
EV_UNLOAD_END = "UnloadingEnd"
EV_ADMITTED = "AdmittedFromQueue"
EV_DECISION = "DecisionRequired"


class ProtocolError(RuntimeError):
    """Action index out of range for the issued action set."""


class EpisodeLogicError(RuntimeError):
    """Stepping a finished episode or other engine misuse."""


@dataclass
class TruckCounters:
    routing_h: float = 0.0
    charging_h: float = 0.0
    waiting_h: float = 0.0
    unloading_h: float = 0.0
    sessions: int = 0
    deliveries: int = 0


@dataclass
class TruckRuntime:
    spec: TruckSpec
    fsm: str = ACTION_PENDING
    terminated_reason: str | None = None
    stranded_mid_edge: bool = False
    battery: float = 0.0
    node: int = 0
    dest: int | None = None
    remaining: list[int] = field(default_factory=list)
    last_decision_time: float = 0.0
    next_ready_estimate: float = 0.0
    counters: TruckCounters = field(default_factory=TruckCounters)
    has_acted: bool = False
    pending_bonus: int = 0
    in_transit_energy: float = 0.0
    pending_unload: bool = False
    unload_target: int | None = None
    requested_duration: float = 0.0
    queue_arrival: float = 0.0
    waited_current: float = 0.0
    # energy ledgers for the conservation invariant
    energy_spent: float = 0.0
    energy_added: float = 0.0

    @property
    def alive(self) -> bool:
        return self.fsm != TERMINATED


@dataclass
class StepResult:
    reward: float
    done: bool
    active_truck: int | None
    elapsed: float
    info: dict = field(default_factory=dict)


@dataclass
class EpisodeMetrics:
    reward_total: float = 0.0
    success: bool = False
    deliveries_completed: int = 0
    charging_sessions: int = 0
    charging_time_h: float = 0.0
    waiting_time_h: float = 0.0
    routing_time_h: float = 0.0
    unloading_time_h: float = 0.0
    total_time_h: float = 0.0
    avg_finish_soc: float = 0.0
    wall_clock_s: float = 0.0

    def to_dict(self, include_wall_clock: bool = True) -> dict:
        d = {
            "reward_total": self.reward_total,
            "success": self.success,
            "deliveries_completed": self.deliveries_completed,
            "charging_sessions": self.charging_sessions,
            "charging_time_h": self.charging_time_h,
            "waiting_time_h": self.waiting_time_h,
            "routing_time_h": self.routing_time_h,
            "unloading_time_h": self.unloading_time_h,
            "total_time_h": self.total_time_h,
            "avg_finish_soc": self.avg_finish_soc,
        }
        if include_wall_clock:
            d["wall_clock_s"] = self.wall_clock_s
        return d


def compute_reward(delta_t: float, delivered: int, failed: bool, params: RewardParams) -> float:
    if delta_t < 0:
        raise ValueError("delta_t must be >= 0")
    return -params.lambda1 * delta_t + params.lambda2 * delivered + params.lambda3 * (1 if failed else 0)


class WorldState:
    """Mutable simulation state for one episode; never shared across episodes."""

    def __init__(self, inst: NetworkInstance, streams: RandomStreams):
        self.inst = inst
        self.streams = streams
        self.clock = 0.0
        self.episode_step = 0
        self._heap: list[tuple[float, int, str, int]] = []
        self._seq = 0
        self.trucks = [
            TruckRuntime(
                spec=t,
                battery=t.initial_battery,
                node=t.start_node,
                remaining=list(t.deliveries),
            )
            for t in inst.trucks
        ]
        self.stations = {c.node: StationState(spec=c) for c in inst.chargers}
        self.active_truck: int | None = None
        self.current_action_set: ActionSet | None = None
        self.done = False
        self.reward_total = 0.0
        self.last_elapsed = 0.0
        self.session_log: list[dict] = []
        self.event_log: list[dict] = []
        self._pending_rewards: list[dict] = []

    def station_of(self, node: int) -> StationState:
        return self.stations[node]

    def schedule(self, t: float, kind: str, truck_id: int) -> None:
        heapq.heappush(self._heap, (t, self._seq, kind, truck_id))
        self._seq += 1

    def all_terminated(self) -> bool:
        return all(not t.alive for t in self.trucks)

    # -- internal helpers -------------------------------------------------

    def _assert_port_capacity(self):
        for st in self.stations.values():
            assert len(st.occupants) <= st.spec.ports, "port capacity exceeded"

    def _finalize_reward(self, truck: TruckRuntime, t: float, failed: bool) -> None:
        delta = (t - truck.last_decision_time) if truck.has_acted else 0.0
        delivered = truck.pending_bonus
        if not truck.has_acted and delivered == 0 and not failed:
            return
        value = compute_reward(delta, delivered, failed, self.inst.config.reward)
        truck.pending_bonus = 0
        self.reward_total += value
        self._pending_rewards.append(
            {"truck": truck.spec.id, "reward": value, "delta_t": delta, "delivered": delivered, "failed": failed}
        )

    def _terminate(self, truck: TruckRuntime, t: float, reason: str, mid_edge: bool = False) -> None:
        self._finalize_reward(truck, t, failed=reason in ("stranded", "infeasible_action"))
        truck.fsm = TERMINATED
        truck.terminated_reason = reason
        truck.stranded_mid_edge = mid_edge
        truck.next_ready_estimate = t
        self.event_log.append(
            {"t": t, "kind": "Terminated", "truck": truck.spec.id, "reason": reason, "mid_edge": mid_edge}
        )


def reset(
    inst: NetworkInstance, seed: int, replay: bool = False, streams: RandomStreams | None = None
) -> tuple[WorldState, int]:
    """Fresh world with every truck ActionPending at its start node."""
    if streams is None:
        streams = RandomStreams(seed, replay=replay)
    world = WorldState(inst, streams)
    for truck in world.trucks:
        world.schedule(0.0, EV_DECISION, truck.spec.id)
    _advance(world)
    if world.active_truck is None:
        raise EpisodeLogicError("no active truck after reset")
    return world, world.active_truck


def step(world: WorldState, action_index: int) -> StepResult:
    """Apply the chosen action for the active truck and advance to the next decision."""
    if world.done:
        raise EpisodeLogicError("episode already finished")
    if world.active_truck is None or world.current_action_set is None:
        raise EpisodeLogicError("no pending decision")
    aset = world.current_action_set
    if not (0 <= action_index < aset.fixed_size):
        raise ProtocolError(f"action index {action_index} out of range [0,{aset.fixed_size})")

    truck = world.trucks[world.active_truck]
    action = aset.actions[action_index]
    world.episode_step += 1
    truck.has_acted = True
    truck.last_decision_time = world.clock
    world.active_truck = None
    world.current_action_set = None

    if not action.feasible:
        world._terminate(truck, world.clock, "infeasible_action")
    elif action.kind == CHARGE:
        _apply_charge(world, truck, action)
    else:
        _apply_navigate(world, truck, action)

    _advance(world)
    rewards = world._pending_rewards
    world._pending_rewards = []
    reward = sum(r["reward"] for r in rewards)
    return StepResult(
        reward=reward,
        done=world.done,
        active_truck=world.active_truck,
        elapsed=world.last_elapsed,
        info={"reward_events": rewards, "t": world.clock},
    )


def _apply_navigate(world: WorldState, truck: TruckRuntime, action) -> None:
    inst = world.inst
    sp = inst.config.stochastic
    u, v = truck.node, action.target
    tau_nom = float(inst.tau[u][v])
    e_nom = float(inst.energy[u][v])
    if tau_nom > 0:
        realized_tau = sample_travel_time(tau_nom, world.clock, sp, world.streams)
        xi = sample_energy_coeff(realized_tau, tau_nom, sp, world.streams)
    else:
        realized_tau, xi = 0.0, 1.0
    truck.in_transit_energy = e_nom * xi
    truck.dest = v
    truck.fsm = ROUTING
    truck.pending_unload = action.kind == NAVIGATE_DELIVERY
    truck.counters.routing_h += realized_tau
    est_unload = sp.unloading_nominal if truck.pending_unload else 0.0
    truck.next_ready_estimate = world.clock + tau_nom + est_unload
    world.schedule(world.clock + realized_tau, EV_ARRIVAL, truck.spec.id)


def _apply_charge(world: WorldState, truck: TruckRuntime, action) -> None:
    st = world.station_of(truck.node)
    h = action.duration
    truck.requested_duration = h
    outcome = st.station_arrive(truck.spec.id, world.clock, h)
    if outcome.started_at is not None:
        truck.fsm = CHARGING
        truck.waited_current = 0.0
        truck.counters.sessions += 1
        truck.session_start = world.clock
        world.session_log.append(
            {
                "station": truck.node,
                "truck": truck.spec.id,
                "arrive": world.clock,
                "start": world.clock,
                "end": world.clock + h,
                "waited": 0.0,
            }
        )
        world.schedule(world.clock + h, EV_CHARGE_END, truck.spec.id)
    else:
        truck.fsm = WAITING
        truck.queue_arrival = world.clock
    truck.next_ready_estimate = world.clock + h
    world._assert_port_capacity()


def _advance(world: WorldState) -> None:
    """Process events until a truck is selected to act or the episode ends."""
    while True:
        if world.all_terminated():
            world.done = True
            world.active_truck = None
            world.last_elapsed = 0.0
            return
        if not world._heap:
            raise EpisodeLogicError("event queue empty with live trucks")
        t, seq, kind, tid = heapq.heappop(world._heap)
        assert t >= world.clock - 1e-12, "clock must be monotone"
        world.clock = max(world.clock, t)
        truck = world.trucks[tid]
        if not truck.alive:
            continue

        if kind == EV_ARRIVAL:
            _on_arrival(world, truck, t)
        elif kind == EV_UNLOAD_END:
            _on_unload_end(world, truck, t)
        elif kind == EV_CHARGE_END:
            _on_charge_end(world, truck, t)
        elif kind == EV_ADMITTED:
            _on_admitted(world, truck, t)
        elif kind == EV_DECISION:
            if truck.fsm != ACTION_PENDING:
                continue  # stale marker
            chosen = _select_ready_truck(world, t, tid)
            truck = world.trucks[chosen]
            elapsed = (t - truck.last_decision_time) if truck.has_acted else 0.0
            world._finalize_reward(truck, t, failed=False)
            # reward interval is closed here; a subsequent failure at this
            # same decision point carries delta_t = 0
            truck.last_decision_time = t
            if not truck.remaining:
                truck.fsm = TERMINATED
                truck.terminated_reason = "success"
                truck.next_ready_estimate = t
                continue
            aset = actionspace.build_action_set(world, truck)
            if not any(aset.mask):
                world._terminate(truck, t, "stranded")
                continue
            world.last_elapsed = elapsed
            world.active_truck = chosen
            world.current_action_set = aset
            return
        world._assert_port_capacity()


def _select_ready_truck(world: WorldState, t: float, tid: int) -> int:
    """Seeded tie-break among trucks whose decisions fall at the same instant."""
    simultaneous = [tid]
    rest = []
    while world._heap and world._heap[0][0] == t and world._heap[0][2] == EV_DECISION:
        item = heapq.heappop(world._heap)
        other = world.trucks[item[3]]
        if other.alive and other.fsm == ACTION_PENDING and item[3] not in simultaneous:
            simultaneous.append(item[3])
        else:
            rest.append(item)
    for item in rest:
        heapq.heappush(world._heap, item)
    if len(simultaneous) == 1:
        return tid
    pick = world.streams.integers("tiebreak", len(simultaneous))
    chosen = simultaneous[pick]
    for other in simultaneous:
        if other != chosen:
            world.schedule(t, EV_DECISION, other)
    return chosen


def _on_arrival(world: WorldState, truck: TruckRuntime, t: float) -> None:
    e = truck.in_transit_energy
    truck.energy_spent += e
    if truck.battery - e < -1e-12:
        truck.battery = 0.0
        world._terminate(truck, t, "stranded", mid_edge=True)
        return
    truck.battery = max(0.0, truck.battery - e)
    truck.node = truck.dest
    truck.dest = None
    truck.in_transit_energy = 0.0
    if truck.pending_unload and truck.node in truck.remaining:
        q = sample_unloading(world.inst.config.stochastic, world.streams)
        truck.unload_target = truck.node
        truck.fsm = UNLOADING
        truck.counters.unloading_h += q
        truck.next_ready_estimate = t + q
        world.schedule(t + q, EV_UNLOAD_END, truck.spec.id)
    else:
        truck.fsm = ACTION_PENDING
        truck.next_ready_estimate = t
        world.schedule(t, EV_DECISION, truck.spec.id)
    truck.pending_unload = False


def _on_unload_end(world: WorldState, truck: TruckRuntime, t: float) -> None:
    truck.remaining.remove(truck.unload_target)
    truck.unload_target = None
    truck.counters.deliveries += 1
    truck.pending_bonus += 1
    truck.fsm = ACTION_PENDING
    truck.next_ready_estimate = t
    world.schedule(t, EV_DECISION, truck.spec.id)


def _on_charge_end(world: WorldState, truck: TruckRuntime, t: float) -> None:
    st = world.station_of(truck.node)
    spec = st.spec
    b_after, added = integrate_charge(
        truck.battery,
        truck.spec.battery_capacity,
        truck.requested_duration,
        spec.eta,
        spec.p_max,
        spec.p_min,
        world.inst.config.charge_dt,
    )
    truck.battery = b_after
    truck.energy_added += added
    truck.counters.charging_h += truck.requested_duration
    for rec in reversed(world.session_log):
        if rec["truck"] == truck.spec.id and rec["end"] == t:
            rec["energy_added"] = added
            break
    admission = st.station_release(truck.spec.id, t)
    if admission is not None:
        next_id, start, duration, waited = admission
        nxt = world.trucks[next_id]
        nxt.waited_current = waited
        world.schedule(start, EV_ADMITTED, next_id)
    truck.fsm = ACTION_PENDING
    truck.next_ready_estimate = t
    world.schedule(t, EV_DECISION, truck.spec.id)


def _on_admitted(world: WorldState, truck: TruckRuntime, t: float) -> None:
    assert truck.fsm == WAITING
    truck.fsm = CHARGING
    truck.counters.waiting_h += truck.waited_current
    truck.counters.sessions += 1
    world.session_log.append(
        {
            "station": truck.node,
            "truck": truck.spec.id,
            "arrive": truck.queue_arrival,
            "start": t,
            "end": t + truck.requested_duration,
            "waited": truck.waited_current,
        }
    )
    truck.next_ready_estimate = t + truck.requested_duration
    world.schedule(t + truck.requested_duration, EV_CHARGE_END, truck.spec.id)


def collect_metrics(world: WorldState) -> EpisodeMetrics:
    m = EpisodeMetrics()
    m.reward_total = world.reward_total
    m.success = all(t.terminated_reason == "success" for t in world.trucks)
    for t in world.trucks:
        m.deliveries_completed += t.counters.deliveries
        m.charging_sessions += t.counters.sessions
        m.charging_time_h += t.counters.charging_h
        m.waiting_time_h += t.counters.waiting_h
        m.routing_time_h += t.counters.routing_h
        m.unloading_time_h += t.counters.unloading_h
        m.avg_finish_soc += t.battery / t.spec.battery_capacity
    m.total_time_h = m.routing_time_h + m.charging_time_h + m.waiting_time_h + m.unloading_time_h
    m.avg_finish_soc /= max(1, len(world.trucks))
    return m


def run_episode(
    inst: NetworkInstance,
    policy,
    seed: int,
    record_trace: bool = True,
    max_steps: int = 100_000,
):
    """Run one full episode; returns (EpisodeMetrics, trace dict or None).

    `policy` is called as policy(obs, world) -> action index for every
    decision.  The trace captures every realized draw, action, reward and
    observation digest, sufficient for bit-exact replay.
    """
    from . import obsgraph

    start_wall = _time.perf_counter()
    world, active = reset(inst, seed)
    records: list[dict] = []
    obs = obsgraph.encode_observation(world)
    if record_trace:
        records.append(
            {
                "t": world.clock,
                "event_kind": "reset",
                "truck": active,
                "obs_digest": obsgraph.observation_digest(obs),
                "random_draws": world.streams.take_log(),
            }
        )
    else:
        world.streams.take_log()

    steps = 0
    while not world.done:
        if steps >= max_steps:
            raise EpisodeLogicError(f"episode exceeded {max_steps} steps")
        acting = world.active_truck
        t_decision = world.clock
        try:
            action = policy(obs, world)
        except Exception as exc:
            exc.partial_trace = records  # type: ignore[attr-defined]
            raise
        # draws made by the policy itself are recorded ahead of the engine's
        # so replay can fast-forward them without re-running the policy
        policy_draws = world.streams.take_log()
        result = step(world, action)
        obs = obsgraph.encode_observation(world) if not world.done else None
        if record_trace:
            records.append(
                {
                    "t": t_decision,
                    "event_kind": "step",
                    "truck": acting,
                    "action": int(action),
                    "reward": result.reward,
                    "obs_digest": obsgraph.observation_digest(obs) if obs is not None else None,
                    "random_draws": policy_draws + world.streams.take_log(),
                    "policy_draws": len(policy_draws),
                }
            )
        else:
            world.streams.take_log()
        steps += 1

    metrics = collect_metrics(world)
    metrics.wall_clock_s = _time.perf_counter() - start_wall
    trace = None
    if record_trace:
        records.append(
            {
                "t": world.clock,
                "event_kind": "episode_end",
                # wall clock excluded: traces must be byte-identical across runs
                "metrics": metrics.to_dict(include_wall_clock=False),
            }
        )
        trace = {
            "header": {
                "format_version": "etfrp-trace/1",
                "instance_digest": inst.digest(),
                "master_seed": seed,
                "config": {"deterministic": inst.config.stochastic.deterministic},
            },
            "records": records,
        }
    return metrics, trace
