"""Problem instances: nodes, cost matrices, chargers, trucks and scenario config.

The canonical representation is a pair of asymmetric node-to-node matrices
(nominal travel time in hours, nominal traversal energy in kWh) plus charger
and truck metadata.  Instances can be loaded/saved as JSON documents
(format "etfrp-instance/1"), generated synthetically, or filled from a raw
road graph via all-pairs shortest paths.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

FORMAT_VERSION = "etfrp-instance/1"

NODE_KINDS = ("plain", "delivery", "charger", "depot")
TRUCK_MODES = ("sequential", "flexible")


class ParseError(ValueError):
    """Instance document does not conform to the schema."""


class ValidationError(ValueError):
    """Instance violates one or more invariants."""

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("; ".join(self.failures))


class GenerationInfeasible(RuntimeError):
    """Retry budget exhausted while generating a feasible instance."""


def q9(x: float) -> float:
    """Quantize to 9 significant decimal digits (round-half-even)."""
    return float(f"{float(x):.9g}")


@dataclass(frozen=True)
class PoiNode:
    id: int
    kind: str
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class ChargerSpec:
    node: int
    p_max: float
    p_min: float
    eta: float
    ports: int


@dataclass(frozen=True)
class TruckSpec:
    id: int
    start_node: int
    battery_capacity: float
    initial_battery: float
    battery_floor: float
    deliveries: tuple[int, ...]
    mode: str = "sequential"


@dataclass(frozen=True)
class StochasticParams:
    travel_std_factor: float = 0.15
    rush_multiplier: float = 2.0
    rush_windows: tuple[tuple[float, float], ...] = ((7.0, 9.0), (16.0, 19.0))
    travel_clip: tuple[float, float] = (0.5, 2.0)
    energy_clip: tuple[float, float] = (0.90, 1.20)
    energy_noise_std: float = 0.02
    # either a fixed duration (float) or (mean, std, (lo, hi))
    unloading: float | tuple = 0.2
    deterministic: bool = False

    @property
    def unloading_nominal(self) -> float:
        if isinstance(self.unloading, (int, float)):
            return float(self.unloading)
        return float(self.unloading[0])


@dataclass(frozen=True)
class RewardParams:
    lambda1: float = 1.0
    lambda2: float = 500.0
    lambda3: float = -1000.0


@dataclass(frozen=True)
class ScenarioConfig:
    alpha: float = 1.2
    duration_set: tuple[float, ...] = tuple(float(h) for h in range(1, 13))
    charge_dt: float = 0.01
    horizon_T: float = 100.0
    stochastic: StochasticParams = field(default_factory=StochasticParams)
    reward: RewardParams = field(default_factory=RewardParams)
    k_chg: int = 5
    mask_full_stations: bool = False
    # acknowledge that alpha < upper energy clip makes stranding possible
    allow_risky_alpha: bool = False

    @property
    def unloading_time(self) -> float:
        return self.stochastic.unloading_nominal


@dataclass(frozen=True)
class NetworkInstance:
    nodes: tuple[PoiNode, ...]
    tau: np.ndarray
    energy: np.ndarray
    chargers: tuple[ChargerSpec, ...]
    trucks: tuple[TruckSpec, ...]
    config: ScenarioConfig

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def charger_nodes(self) -> tuple[int, ...]:
        return tuple(c.node for c in self.chargers)

    def charger_at(self, node: int) -> ChargerSpec | None:
        for c in self.chargers:
            if c.node == node:
                return c
        return None

    def digest(self) -> str:
        doc = save_instance(self)
        return hashlib.blake2b(doc.encode("utf-8"), digest_size=16).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, NetworkInstance):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and np.array_equal(self.tau, other.tau)
            and np.array_equal(self.energy, other.energy)
            and self.chargers == other.chargers
            and self.trucks == other.trucks
            and self.config == other.config
        )

    def __hash__(self):
        return hash((self.nodes, self.chargers, self.trucks))


def validate_instance(inst: NetworkInstance) -> None:
    """Check all structural invariants, raising ValidationError with every failure."""
    failures = []
    n = inst.n_nodes
    for i, node in enumerate(inst.nodes):
        if node.id != i:
            failures.append(f"node ids must be dense 0..N-1, got {node.id} at position {i}")
        if node.kind not in NODE_KINDS:
            failures.append(f"node {node.id}: unknown kind {node.kind!r}")
    for name, mat in (("tau", inst.tau), ("energy", inst.energy)):
        if mat.shape != (n, n):
            failures.append(f"{name} must be {n}x{n}, got {mat.shape}")
            continue
        if not np.all(np.isfinite(mat)):
            failures.append(f"{name} has non-finite entries")
        elif np.any(mat < 0):
            failures.append(f"{name} has negative cost entries")
        if np.any(np.diag(mat) != 0):
            failures.append(f"{name} diagonal must be zero")
    for c in inst.chargers:
        if not (0 <= c.node < n):
            failures.append(f"charger node {c.node} out of range")
        elif inst.nodes[c.node].kind != "charger":
            failures.append(f"charger at node {c.node} but node kind is {inst.nodes[c.node].kind!r}")
        if not (0 < c.p_min <= c.p_max):
            failures.append(f"charger {c.node}: need 0 < p_min <= p_max")
        if not (0 < c.eta <= 1):
            failures.append(f"charger {c.node}: eta must be in (0,1]")
        if c.ports < 1:
            failures.append(f"charger {c.node}: ports must be >= 1")
    for t in inst.trucks:
        if not (0 <= t.start_node < n):
            failures.append(f"truck {t.id}: start node {t.start_node} out of range")
        if t.mode not in TRUCK_MODES:
            failures.append(f"truck {t.id}: unknown mode {t.mode!r}")
        if not (0 <= t.battery_floor < t.initial_battery <= t.battery_capacity):
            failures.append(f"truck {t.id}: need 0 <= floor < initial <= capacity")
        if not t.deliveries:
            failures.append(f"truck {t.id}: deliveries must be non-empty")
        if len(set(t.deliveries)) != len(t.deliveries):
            failures.append(f"truck {t.id}: duplicate delivery ids")
        for d in t.deliveries:
            if not (0 <= d < n):
                failures.append(f"truck {t.id}: delivery {d} out of range")
            elif inst.nodes[d].kind != "delivery":
                failures.append(f"truck {t.id}: node {d} is not a delivery node")
    cfg = inst.config
    if cfg.alpha < 1:
        failures.append("alpha must be >= 1")
    if cfg.alpha < cfg.stochastic.energy_clip[1] and not cfg.allow_risky_alpha:
        failures.append(
            "alpha below upper energy clip bound makes stranding possible; "
            "set allow_risky_alpha to accept"
        )
    ds = cfg.duration_set
    if not ds or any(d <= 0 for d in ds) or any(b <= a for a, b in zip(ds, ds[1:])):
        failures.append("duration_set must be strictly increasing and positive")
    if cfg.charge_dt <= 0:
        failures.append("charge_dt must be positive")
    sp = cfg.stochastic
    if sp.travel_std_factor < 0:
        failures.append("travel_std_factor must be >= 0")
    if not (sp.energy_clip[0] <= 1 <= sp.energy_clip[1]):
        failures.append("energy_clip must bracket 1")
    if sp.travel_clip[0] <= 0:
        failures.append("travel_clip low bound must be > 0")
    if failures:
        raise ValidationError(failures)


# ---------------------------------------------------------------------------
# serialization


def _matrix_to_lists(mat: np.ndarray) -> list[list[float]]:
    return [[q9(v) for v in row] for row in mat.tolist()]


def _stochastic_to_dict(sp: StochasticParams) -> dict:
    unloading = sp.unloading
    if not isinstance(unloading, (int, float)):
        mean, std, clip = unloading
        unloading = [q9(mean), q9(std), [q9(clip[0]), q9(clip[1])]]
    else:
        unloading = q9(unloading)
    return {
        "travel_std_factor": q9(sp.travel_std_factor),
        "rush_multiplier": q9(sp.rush_multiplier),
        "rush_windows": [[q9(a), q9(b)] for a, b in sp.rush_windows],
        "travel_clip": [q9(sp.travel_clip[0]), q9(sp.travel_clip[1])],
        "energy_clip": [q9(sp.energy_clip[0]), q9(sp.energy_clip[1])],
        "energy_noise_std": q9(sp.energy_noise_std),
        "unloading": unloading,
        "deterministic": sp.deterministic,
    }


def _stochastic_from_dict(d: dict) -> StochasticParams:
    unloading = d.get("unloading", 0.2)
    if isinstance(unloading, list):
        mean, std, clip = unloading
        unloading = (float(mean), float(std), (float(clip[0]), float(clip[1])))
    else:
        unloading = float(unloading)
    return StochasticParams(
        travel_std_factor=float(d.get("travel_std_factor", 0.15)),
        rush_multiplier=float(d.get("rush_multiplier", 2.0)),
        rush_windows=tuple((float(a), float(b)) for a, b in d.get("rush_windows", [[7, 9], [16, 19]])),
        travel_clip=tuple(float(v) for v in d.get("travel_clip", [0.5, 2.0])),
        energy_clip=tuple(float(v) for v in d.get("energy_clip", [0.90, 1.20])),
        energy_noise_std=float(d.get("energy_noise_std", 0.02)),
        unloading=unloading,
        deterministic=bool(d.get("deterministic", False)),
    )


def _config_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "alpha": q9(cfg.alpha),
        "duration_set": [q9(h) for h in cfg.duration_set],
        "charge_dt": q9(cfg.charge_dt),
        "horizon_T": q9(cfg.horizon_T),
        "stochastic": _stochastic_to_dict(cfg.stochastic),
        "reward": {
            "lambda1": q9(cfg.reward.lambda1),
            "lambda2": q9(cfg.reward.lambda2),
            "lambda3": q9(cfg.reward.lambda3),
        },
        "k_chg": cfg.k_chg,
        "mask_full_stations": cfg.mask_full_stations,
        "allow_risky_alpha": cfg.allow_risky_alpha,
    }


def _config_from_dict(d: dict) -> ScenarioConfig:
    reward = d.get("reward", {})
    return ScenarioConfig(
        alpha=float(d.get("alpha", 1.2)),
        duration_set=tuple(float(h) for h in d.get("duration_set", range(1, 13))),
        charge_dt=float(d.get("charge_dt", 0.01)),
        horizon_T=float(d.get("horizon_T", 100.0)),
        stochastic=_stochastic_from_dict(d.get("stochastic", {})),
        reward=RewardParams(
            lambda1=float(reward.get("lambda1", 1.0)),
            lambda2=float(reward.get("lambda2", 500.0)),
            lambda3=float(reward.get("lambda3", -1000.0)),
        ),
        k_chg=int(d.get("k_chg", 5)),
        mask_full_stations=bool(d.get("mask_full_stations", False)),
        allow_risky_alpha=bool(d.get("allow_risky_alpha", False)),
    )


def instance_to_dict(inst: NetworkInstance) -> dict:
    return {
        "meta": {"format": FORMAT_VERSION},
        "nodes": [
            {"id": nd.id, "kind": nd.kind, "x": q9(nd.x), "y": q9(nd.y)} for nd in inst.nodes
        ],
        "tau": _matrix_to_lists(inst.tau),
        "energy": _matrix_to_lists(inst.energy),
        "chargers": [
            {
                "node": c.node,
                "p_max": q9(c.p_max),
                "p_min": q9(c.p_min),
                "eta": q9(c.eta),
                "ports": c.ports,
            }
            for c in inst.chargers
        ],
        "trucks": [
            {
                "id": t.id,
                "start_node": t.start_node,
                "battery_capacity": q9(t.battery_capacity),
                "initial_battery": q9(t.initial_battery),
                "battery_floor": q9(t.battery_floor),
                "deliveries": list(t.deliveries),
                "mode": t.mode,
            }
            for t in inst.trucks
        ],
        "config": _config_to_dict(inst.config),
    }


class _Float9(float):
    # json emits floats via repr(); force 9-significant-digit decimal text
    def __repr__(self):
        return format(float(self), ".9g")


def _wrap_floats(obj):
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return _Float9(obj)
    if isinstance(obj, list):
        return [_wrap_floats(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _wrap_floats(v) for k, v in obj.items()}
    return obj


def save_instance(inst: NetworkInstance) -> str:
    """Serialize a validated instance to its canonical JSON document."""
    validate_instance(inst)
    doc = _wrap_floats(instance_to_dict(inst))
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ParseError(f"missing key {path}.{key}")
    return d[key]


def instance_from_dict(doc: dict) -> NetworkInstance:
    meta = _require(doc, "meta", "$")
    fmt = meta.get("format")
    if fmt != FORMAT_VERSION:
        raise ParseError(f"unsupported format {fmt!r} at $.meta.format")
    try:
        nodes = tuple(
            PoiNode(id=int(nd["id"]), kind=str(nd["kind"]), x=float(nd.get("x", 0.0)), y=float(nd.get("y", 0.0)))
            for nd in _require(doc, "nodes", "$")
        )
        tau = np.array(_require(doc, "tau", "$"), dtype=float)
        energy = np.array(_require(doc, "energy", "$"), dtype=float)
        chargers = tuple(
            ChargerSpec(
                node=int(c["node"]),
                p_max=float(c["p_max"]),
                p_min=float(c["p_min"]),
                eta=float(c["eta"]),
                ports=int(c["ports"]),
            )
            for c in _require(doc, "chargers", "$")
        )
        trucks = tuple(
            TruckSpec(
                id=int(t["id"]),
                start_node=int(t["start_node"]),
                battery_capacity=float(t["battery_capacity"]),
                initial_battery=float(t["initial_battery"]),
                battery_floor=float(t["battery_floor"]),
                deliveries=tuple(int(d) for d in t["deliveries"]),
                mode=str(t.get("mode", "sequential")),
            )
            for t in _require(doc, "trucks", "$")
        )
        config = _config_from_dict(_require(doc, "config", "$"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed instance document: {exc}") from exc
    if tau.ndim != 2 or energy.ndim != 2:
        raise ParseError("tau/energy must be 2-d row-major arrays")
    inst = NetworkInstance(nodes=nodes, tau=tau, energy=energy, chargers=chargers, trucks=trucks, config=config)
    validate_instance(inst)
    return inst


def load_instance(text: str) -> NetworkInstance:
    """Parse and validate an instance document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("top-level document must be an object")
    return instance_from_dict(doc)


# ---------------------------------------------------------------------------
# feasibility of delivery assignments


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    required_stops: tuple[tuple[int, int], ...] = ()


def _leg_ok(inst: NetworkInstance, truck: TruckSpec, u: int, v: int, battery: float) -> bool:
    return inst.config.alpha * inst.energy[u][v] < battery - truck.battery_floor


def validate_assignment(inst: NetworkInstance, truck: TruckSpec) -> FeasibilityReport:
    """Conservative reachability check with recharge-to-full at chargers.

    A leg (u, v) is traversable when alpha * energy[u][v] < battery - floor at
    departure.  Charging duration is ignored: any visited charger restores the
    battery to full capacity.  required_stops pairs are (deliveries completed
    before the detour, charger node id); the reported plan minimizes the
    number of charging stops.
    """
    chargers = inst.charger_nodes
    full = truck.battery_capacity

    if truck.mode == "sequential":
        orders = [truck.deliveries]
    else:
        import itertools

        orders = list(itertools.permutations(truck.deliveries))

    best: tuple[tuple[int, int], ...] | None = None
    for order in orders:
        # Pareto frontier of (battery, charging stops so far); charging early
        # can beat a still-feasible direct leg, so all options are kept
        frontier: list[tuple[float, tuple[tuple[int, int], ...]]] = [
            (truck.initial_battery, ())
        ]
        node = truck.start_node
        for k, dest in enumerate(order):
            nxt: list[tuple[float, tuple[tuple[int, int], ...]]] = []
            for battery, stops in frontier:
                for b2, via in _leg_options(inst, truck, node, battery, dest, chargers, full):
                    nxt.append((b2, stops + tuple((k, c) for c in via)))
            frontier = _pareto(nxt)
            node = dest
            if not frontier:
                break
        if frontier:
            cand = min(frontier, key=lambda s: len(s[1]))[1]
            if best is None or len(cand) < len(best):
                best = cand
    if best is None:
        return FeasibilityReport(feasible=False)
    return FeasibilityReport(feasible=True, required_stops=best)


def _pareto(states):
    """Keep states not dominated in (fewer stops, more battery)."""
    states = sorted(states, key=lambda s: (len(s[1]), -s[0]))
    kept = []
    best_battery = -float("inf")
    for battery, stops in states:
        if battery > best_battery:
            kept.append((battery, stops))
            best_battery = battery
    return kept


def _leg_options(inst, truck, start, battery, dest, chargers, full):
    """All ways to traverse one leg: direct, or via a minimal charger chain.

    Yields (battery at dest, charger stops used); one entry per last charger
    with its fewest-hop chain, plus the direct traversal when feasible.
    """
    from collections import deque

    options = []
    if _leg_ok(inst, truck, start, dest, battery):
        options.append((battery - inst.energy[start][dest], ()))
    seen = {}
    queue = deque()
    for c in chargers:
        if _leg_ok(inst, truck, start, c, battery):
            seen[c] = (c,)
            queue.append(c)
    while queue:
        node = queue.popleft()
        via = seen[node]
        if _leg_ok(inst, truck, node, dest, full):
            options.append((full - inst.energy[node][dest], via))
        for c in chargers:
            if c not in seen and _leg_ok(inst, truck, node, c, full):
                seen[c] = via + (c,)
                queue.append(c)
    return options


# ---------------------------------------------------------------------------
# synthetic generation


@dataclass(frozen=True)
class GeneratorParams:
    n_nodes: int
    n_chargers: int
    n_trucks: int
    stops_per_truck: int
    area_km: float = 200.0
    speed_kmh: float = 40.0
    kwh_per_km: float = 1.0
    asymmetry_jitter: float = 0.0
    port_range: tuple[int, int] = (1, 3)
    battery_capacity: float = 400.0
    battery_floor: float = 0.0
    p_max: float = 50.0
    p_min: float = 5.0
    eta: float = 0.85
    mode: str = "sequential"
    config: ScenarioConfig = field(default_factory=ScenarioConfig)


def generate_instance(params: GeneratorParams, seed: int, max_retries: int = 200) -> NetworkInstance:
    """Deterministically generate a validated instance from (params, seed)."""
    if params.n_nodes < params.n_chargers + params.stops_per_truck + 1:
        raise ValueError("n_nodes must be >= n_chargers + stops_per_truck + 1")
    from .stochastic import substream

    rng = substream(seed, "generator")
    n = params.n_nodes
    xs = rng.uniform(0.0, params.area_km, size=n)
    ys = rng.uniform(0.0, params.area_km, size=n)
    xs = np.array([q9(v) for v in xs])
    ys = np.array([q9(v) for v in ys])

    dist = np.hypot(xs[:, None] - xs[None, :], ys[:, None] - ys[None, :])
    jit = rng.uniform(0.0, params.asymmetry_jitter, size=(n, n)) if params.asymmetry_jitter > 0 else np.zeros((n, n))
    tau = dist / params.speed_kmh * (1.0 + jit)
    energy = dist * params.kwh_per_km * (1.0 + jit)
    np.fill_diagonal(tau, 0.0)
    np.fill_diagonal(energy, 0.0)
    tau = np.vectorize(q9)(tau)
    energy = np.vectorize(q9)(energy)

    # charger nodes first, then delivery pool; remaining nodes are plain/depot
    perm = rng.permutation(n)
    charger_ids = sorted(int(i) for i in perm[: params.n_chargers])
    delivery_pool = [int(i) for i in perm[params.n_chargers :]]

    chargers = tuple(
        ChargerSpec(
            node=c,
            p_max=params.p_max,
            p_min=params.p_min,
            eta=params.eta,
            ports=int(rng.integers(params.port_range[0], params.port_range[1] + 1)),
        )
        for c in charger_ids
    )

    kinds = {c: "charger" for c in charger_ids}
    trucks = []
    delivery_ids: set[int] = set()
    base = NetworkInstance(
        nodes=tuple(PoiNode(i, "plain", float(xs[i]), float(ys[i])) for i in range(n)),
        tau=tau,
        energy=energy,
        chargers=chargers,
        trucks=(),
        config=params.config,
    )
    for tid in range(params.n_trucks):
        for attempt in range(max_retries):
            picks = rng.choice(len(delivery_pool), size=params.stops_per_truck + 1, replace=False)
            start = delivery_pool[int(picks[0])]
            stops = tuple(delivery_pool[int(i)] for i in picks[1:])
            truck = TruckSpec(
                id=tid,
                start_node=start,
                battery_capacity=params.battery_capacity,
                initial_battery=params.battery_capacity,
                battery_floor=params.battery_floor,
                deliveries=stops,
                mode=params.mode,
            )
            if validate_assignment(base, truck).feasible:
                trucks.append(truck)
                kinds.setdefault(start, "depot")
                for d in stops:
                    kinds[d] = "delivery"
                    delivery_ids.add(d)
                break
        else:
            raise GenerationInfeasible(
                f"could not draw a feasible assignment for truck {tid} in {max_retries} tries"
            )

    # delivery kind wins over depot when a start node is delivered to by another truck
    nodes = tuple(
        PoiNode(i, kinds.get(i, "plain"), float(xs[i]), float(ys[i])) for i in range(n)
    )
    # a truck may start on another truck's delivery node; keep delivery kind
    inst = NetworkInstance(nodes=nodes, tau=tau, energy=energy, chargers=chargers, trucks=tuple(trucks), config=params.config)
    validate_instance(inst)
    return inst


# ---------------------------------------------------------------------------
# optional road-graph loader


def matrices_from_road_graph(
    n_road_nodes: int,
    edges: list[tuple[int, int, float, float]],
    poi_road_nodes: list[int],
) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs POI matrices from a raw road graph.

    edges are (u, v, travel_hours, energy_kwh) with nonnegative weights;
    shortest paths minimize travel time, and the energy matrix accumulates
    energy along the time-shortest path.
    """
    import heapq

    adj: list[list[tuple[int, float, float]]] = [[] for _ in range(n_road_nodes)]
    for u, v, t, e in edges:
        if t < 0 or e < 0:
            raise ValueError("road edge weights must be nonnegative")
        adj[u].append((v, t, e))

    m = len(poi_road_nodes)
    tau = np.full((m, m), np.inf)
    energy = np.full((m, m), np.inf)
    index_of = {rn: i for i, rn in enumerate(poi_road_nodes)}
    for src_i, src in enumerate(poi_road_nodes):
        dist = [math.inf] * n_road_nodes
        en = [math.inf] * n_road_nodes
        dist[src] = 0.0
        en[src] = 0.0
        heap = [(0.0, src)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for v, t, e in adj[u]:
                nd = d + t
                if nd < dist[v]:
                    dist[v] = nd
                    en[v] = en[u] + e
                    heapq.heappush(heap, (nd, v))
        for rn, j in index_of.items():
            tau[src_i][j] = dist[rn]
            energy[src_i][j] = en[rn]
    if not np.all(np.isfinite(tau)):
        raise ValueError("road graph does not connect all POI nodes")
    np.fill_diagonal(tau, 0.0)
    np.fill_diagonal(energy, 0.0)
    return np.vectorize(q9)(tau), np.vectorize(q9)(energy)
