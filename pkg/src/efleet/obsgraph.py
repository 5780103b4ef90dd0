"""Heterogeneous state-graph and action-graph encoding of WorldState.

Feature layouts (row-major, fixed order):
  truck row    [soc, status_idx/5, remaining_frac, elapsed_frac, next_ready_frac]
  delivery row [node_id/N, remaining_frac_of_owner]
  charger row  [node_id/N, p_max_norm, eta, ports_norm, occupancy_frac, queue_len_norm]
  edge         (src_type, src_idx, dst_type, dst_idx, tau_norm, e_norm) over all
               ordered pairs of trucks + pending deliveries + chargers
  action row   [kind_code, est_battery/capacity, est_completion/T (clamped at 2)]

A full per-truck status one-hot is carried alongside the compact scalar so
no information is lost downstream.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .actionspace import CHARGE, NAVIGATE_CHARGER, NAVIGATE_DELIVERY

STATUS_ORDER = (
    "ActionPending",
    "Routing",
    "WaitingOnChargerQueue",
    "Charging",
    "Unloading",
    "Terminated",
)

KIND_CODE = {NAVIGATE_CHARGER: 0.0, NAVIGATE_DELIVERY: 0.5, CHARGE: 1.0}


@dataclass
class ObservationGraph:
    truck_feats: list[list[float]]
    truck_status_onehot: list[list[float]]
    delivery_feats: list[list[float]]
    charger_feats: list[list[float]]
    edges: list[tuple]
    action_feats: list[list[float]]
    mask: list[int]
    active_truck: int
    episode_step: int = 0
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "truck_feats": self.truck_feats,
            "truck_status_onehot": self.truck_status_onehot,
            "delivery_feats": self.delivery_feats,
            "charger_feats": self.charger_feats,
            "edges": [list(e) for e in self.edges],
            "action_feats": self.action_feats,
            "mask": list(self.mask),
            "active_truck": self.active_truck,
            "episode_step": self.episode_step,
        }


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def encode_state_graph(world) -> ObservationGraph:
    """State part: node features for trucks, pending deliveries and chargers."""
    inst = world.inst
    n_nodes = max(1, inst.n_nodes)
    horizon = inst.config.horizon_T
    max_tau = max(float(inst.tau.max()), 1e-9)
    max_e = max(float(inst.energy.max()), 1e-9)
    max_pmax = max((c.p_max for c in inst.chargers), default=1.0)
    max_ports = max((c.ports for c in inst.chargers), default=1)
    q_max = max(1, len(world.trucks))

    truck_feats = []
    truck_onehot = []
    for t in world.trucks:
        soc = t.battery / t.spec.battery_capacity
        status_idx = STATUS_ORDER.index(t.fsm)
        remaining_frac = len(t.remaining) / len(t.spec.deliveries)
        elapsed_frac = _clamp01(world.clock / horizon)
        next_ready = _clamp01(max(0.0, t.next_ready_estimate - world.clock) / horizon)
        truck_feats.append([soc, status_idx / 5.0, remaining_frac, elapsed_frac, next_ready])
        onehot = [0.0] * len(STATUS_ORDER)
        onehot[status_idx] = 1.0
        truck_onehot.append(onehot)

    # pending deliveries across the fleet, in (truck id, assignment order)
    delivery_entities = []  # (node_id, owner_truck_idx)
    delivery_feats = []
    for ti, t in enumerate(world.trucks):
        for d in t.spec.deliveries:
            if d in t.remaining:
                delivery_entities.append((d, ti))
                delivery_feats.append([d / n_nodes, len(t.remaining) / len(t.spec.deliveries)])

    charger_feats = []
    for c in inst.chargers:
        st = world.stations[c.node]
        charger_feats.append(
            [
                c.node / n_nodes,
                c.p_max / max_pmax,
                c.eta,
                c.ports / max_ports,
                len(st.occupants) / c.ports,
                min(1.0, len(st.queue) / q_max),
            ]
        )

    # entity locations; in-transit trucks are anchored at their destination
    entities = []
    for ti, t in enumerate(world.trucks):
        loc = t.dest if (t.dest is not None) else t.node
        entities.append(("truck", ti, loc))
    for di, (d, _) in enumerate(delivery_entities):
        entities.append(("delivery", di, d))
    for ci, c in enumerate(inst.chargers):
        entities.append(("charger", ci, c.node))

    edges = []
    for st_, si, su in entities:
        for dt_, di, dv in entities:
            if (st_, si) == (dt_, di):
                continue
            edges.append(
                (st_, si, dt_, di, float(inst.tau[su][dv]) / max_tau, float(inst.energy[su][dv]) / max_e)
            )

    return ObservationGraph(
        truck_feats=truck_feats,
        truck_status_onehot=truck_onehot,
        delivery_feats=delivery_feats,
        charger_feats=charger_feats,
        edges=edges,
        action_feats=[],
        mask=[],
        active_truck=world.active_truck if world.active_truck is not None else -1,
        episode_step=world.episode_step,
    )


def encode_action_graph(action_set, world) -> tuple[list[list[float]], list[int]]:
    """Action part: one feature row per fixed slot plus the binary mask."""
    horizon = world.inst.config.horizon_T
    feats = []
    for a in action_set.actions:
        truck = world.trucks[world.active_truck] if world.active_truck is not None else world.trucks[0]
        cap = truck.spec.battery_capacity
        t_hat = min(2.0, a.est_completion / horizon)
        feats.append([KIND_CODE[a.kind], a.est_battery_after / cap, t_hat])
    return feats, list(action_set.mask)


def encode_observation(world) -> ObservationGraph:
    """Full observation for the current decision point."""
    obs = encode_state_graph(world)
    if world.current_action_set is not None:
        obs.action_feats, obs.mask = encode_action_graph(world.current_action_set, world)
    return obs


def observation_digest(obs: ObservationGraph) -> int:
    """Stable 64-bit hash of the canonical serialization."""
    payload = json.dumps(obs.to_dict(), sort_keys=True, separators=(",", ":"))
    return int.from_bytes(hashlib.blake2b(payload.encode(), digest_size=8).digest(), "big")
