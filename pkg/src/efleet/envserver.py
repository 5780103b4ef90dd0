"""Wire-protocol environment service and deterministic episode replay.

Messages are newline-delimited UTF-8 JSON objects, one per line, one response
per request.  Trace files are newline-delimited JSON records with the header
as the first line (extension .trace.jsonl).  Each connection owns its own
episode state; sessions never share mutable state.
"""

from __future__ import annotations

import json
import socket
import socketserver
import sys
from dataclasses import dataclass, field

from . import engine, obsgraph
from .netmodel import NetworkInstance, instance_from_dict, load_instance
from .stochastic import RandomStreams, ReplayDivergence

PROTOCOL = "etfrp/1"
TRACE_FORMAT = "etfrp-trace/1"


# ---------------------------------------------------------------------------
# trace files


def save_trace(trace: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(trace["header"], sort_keys=True) + "\n")
        for rec in trace["records"]:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def load_trace(path: str) -> dict:
    with open(path, encoding="utf-8") as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"empty trace file: {path}")
    header = json.loads(lines[0])
    records = [json.loads(ln) for ln in lines[1:]]
    return {"header": header, "records": records}


# ---------------------------------------------------------------------------
# replay verification


@dataclass
class ReplayReport:
    ok: bool
    checked_records: int = 0
    divergences: list[dict] = field(default_factory=list)
    error: str | None = None

    def first_divergence(self) -> dict | None:
        return self.divergences[0] if self.divergences else None


def _draws_of(rec: dict) -> list[tuple[str, int, float]]:
    return [(d[0], int(d[1]), float(d[2])) for d in rec.get("random_draws", [])]


def replay(trace: dict, inst: NetworkInstance) -> ReplayReport:
    """Re-execute a trace injecting its recorded draws; verify digests/rewards.

    The report lists every divergence (record index, field, expected, actual);
    an instance-digest mismatch in the header aborts before execution.
    """
    header = trace["header"]
    if header.get("format_version") != TRACE_FORMAT:
        return ReplayReport(ok=False, error=f"unsupported trace format {header.get('format_version')!r}")
    if header.get("instance_digest") != inst.digest():
        return ReplayReport(ok=False, error="instance digest mismatch between trace header and instance")

    report = ReplayReport(ok=True)

    def diverge(idx: int, fld: str, expected, actual) -> None:
        report.ok = False
        report.divergences.append({"record": idx, "field": fld, "expected": expected, "actual": actual})

    records = trace["records"]
    if not records or records[0].get("event_kind") != "reset":
        return ReplayReport(ok=False, error="trace does not start with a reset record")

    seed = int(header["master_seed"])
    streams = RandomStreams(seed, replay=True)
    streams.inject(_draws_of(records[0]))
    try:
        world, _ = engine.reset(inst, seed, streams=streams)
    except ReplayDivergence as exc:
        return ReplayReport(ok=False, checked_records=1, divergences=[{"record": 0, "field": "random_draws", "expected": None, "actual": str(exc)}])
    obs = obsgraph.encode_observation(world)
    digest = obsgraph.observation_digest(obs)
    if digest != records[0].get("obs_digest"):
        diverge(0, "obs_digest", records[0].get("obs_digest"), digest)
    report.checked_records = 1

    for idx, rec in enumerate(records[1:], start=1):
        kind = rec.get("event_kind")
        if kind == "episode_end":
            metrics = engine.collect_metrics(world).to_dict(include_wall_clock=False)
            for k, v in rec.get("metrics", {}).items():
                if metrics.get(k) != v:
                    diverge(idx, f"metrics.{k}", v, metrics.get(k))
            report.checked_records += 1
            continue
        if kind != "step":
            diverge(idx, "event_kind", "step", kind)
            break
        if world.done:
            diverge(idx, "done", False, True)
            break
        draws = _draws_of(rec)
        streams.inject(draws)
        try:
            # draws the policy made originally are consumed verbatim
            for stream, _, _ in draws[: rec.get("policy_draws", 0)]:
                streams.replay_consume(stream)
            result = engine.step(world, int(rec["action"]))
            world.streams.take_log()
        except (ReplayDivergence, engine.ProtocolError, engine.EpisodeLogicError) as exc:
            diverge(idx, "execution", None, str(exc))
            break
        if result.reward != rec.get("reward"):
            diverge(idx, "reward", rec.get("reward"), result.reward)
        digest = None
        if not world.done:
            digest = obsgraph.observation_digest(obsgraph.encode_observation(world))
        if digest != rec.get("obs_digest"):
            diverge(idx, "obs_digest", rec.get("obs_digest"), digest)
        report.checked_records += 1

    return report


# ---------------------------------------------------------------------------
# wire protocol


def _obs_message(world, reward: float, done: bool, msg_id=None, info: dict | None = None) -> dict:
    obs = obsgraph.encode_observation(world)
    d = obs.to_dict()
    msg = {
        "type": "obs",
        "episode_step": d["episode_step"],
        "active_truck": d["active_truck"],
        "state": {
            "truck_feats": d["truck_feats"],
            "truck_status_onehot": d["truck_status_onehot"],
            "delivery_feats": d["delivery_feats"],
            "charger_feats": d["charger_feats"],
            "edges": d["edges"],
        },
        "actions": {"feats": d["action_feats"], "mask": d["mask"]},
        "reward": reward,
        "done": done,
        "info": info or {},
    }
    if msg_id is not None:
        msg["id"] = msg_id
    return msg


class Session:
    """One environment per connection; processes requests strictly in order."""

    def __init__(self, default_instance: NetworkInstance | None = None):
        self.default_instance = default_instance
        self.inst: NetworkInstance | None = None
        self.world = None

    def handle(self, line: str) -> dict:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            return {"type": "error", "message": f"malformed JSON: {exc}"}
        if not isinstance(msg, dict) or "type" not in msg:
            return {"type": "error", "message": "message must be an object with a 'type' field"}
        msg_id = msg.get("id")
        try:
            reply = self._dispatch(msg)
        except Exception as exc:  # session must survive bad requests
            reply = {"type": "error", "message": f"{type(exc).__name__}: {exc}"}
        if msg_id is not None:
            reply["id"] = msg_id
        return reply

    def _dispatch(self, msg: dict) -> dict:
        kind = msg["type"]
        if kind == "hello":
            fixed_size = None
            inst = self.inst or self.default_instance
            if inst is not None:
                fixed_size = len(inst.chargers) + max(len(t.deliveries) for t in inst.trucks) + len(
                    inst.config.duration_set
                )
            return {"type": "hello", "protocol": PROTOCOL, "fixed_size": fixed_size}
        if kind == "reset":
            if "instance_inline" in msg:
                self.inst = instance_from_dict(msg["instance_inline"])
            elif "instance_path" in msg:
                with open(msg["instance_path"], encoding="utf-8") as f:
                    self.inst = load_instance(f.read())
            elif self.inst is None:
                self.inst = self.default_instance
            if self.inst is None:
                return {"type": "error", "message": "no instance configured; pass instance_inline or instance_path"}
            seed = int(msg.get("seed", 0))
            self.world, _ = engine.reset(self.inst, seed)
            return _obs_message(self.world, reward=0.0, done=False)
        if kind == "step":
            if self.world is None or self.world.done:
                return {"type": "error", "message": "no active episode; send reset first"}
            try:
                result = engine.step(self.world, int(msg["action"]))
            except engine.ProtocolError as exc:
                return {"type": "error", "message": str(exc)}
            if result.done:
                metrics = engine.collect_metrics(self.world)
                return {
                    "type": "episode_end",
                    "reward": result.reward,
                    "metrics": metrics.to_dict(include_wall_clock=False),
                }
            return _obs_message(self.world, reward=result.reward, done=False, info={"t": result.info["t"]})
        return {"type": "error", "message": f"unknown message type {kind!r}"}


def serve_stream(rfile, wfile, default_instance: NetworkInstance | None = None) -> None:
    """Run one session over a pair of text streams until EOF."""
    session = Session(default_instance)
    for line in rfile:
        if not line.strip():
            continue
        reply = session.handle(line)
        wfile.write(json.dumps(reply, sort_keys=True) + "\n")
        wfile.flush()


def serve(transport: str, default_instance: NetworkInstance | None = None) -> None:
    """Serve sessions over 'stdio' or 'tcp:PORT' until the transport closes."""
    if transport == "stdio":
        serve_stream(sys.stdin, sys.stdout, default_instance)
        return
    if transport.startswith("tcp:"):
        port = int(transport.split(":", 1)[1])

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                rfile = self.rfile
                wfile = self.wfile
                session = Session(default_instance)
                for raw in rfile:
                    line = raw.decode("utf-8")
                    if not line.strip():
                        continue
                    reply = session.handle(line)
                    wfile.write((json.dumps(reply, sort_keys=True) + "\n").encode("utf-8"))
                    wfile.flush()

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        with Server(("127.0.0.1", port), Handler) as srv:
            srv.serve_forever()
        return
    raise ValueError(f"unknown transport {transport!r}; expected 'stdio' or 'tcp:PORT'")


class ExternPolicy:
    """Drives a remote agent: sends observations, receives action indices.

    Counterpart protocol: we connect to ADDR; for every decision we send an
    obs message and expect {"type": "action", "action": int} back.
    """

    def __init__(self, address: str):
        host, port = address.rsplit(":", 1)
        self.sock = socket.create_connection((host or "127.0.0.1", int(port)))
        self.rfile = self.sock.makefile("r", encoding="utf-8")
        self.wfile = self.sock.makefile("w", encoding="utf-8")

    def __call__(self, obs, world) -> int:
        msg = _obs_message(world, reward=0.0, done=False)
        self.wfile.write(json.dumps(msg, sort_keys=True) + "\n")
        self.wfile.flush()
        line = self.rfile.readline()
        if not line:
            raise ConnectionError("extern policy connection closed")
        reply = json.loads(line)
        return int(reply["action"])

    def close(self) -> None:
        self.sock.close()
