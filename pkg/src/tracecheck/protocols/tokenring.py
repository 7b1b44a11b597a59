"""Token-ring termination detection: reference state machine and a
simulated, instrumented implementation.

n nodes sit on a ring; node 0 initiates.  Nodes do some work and go
inactive for good.  Once inactive, node 0 launches a probe by handing
the token to node n-1; an inactive node passes the token down; when it
returns to node 0, every node must have gone quiet, so termination is
detected and a victory token makes one last lap.

The detector's trace-level event DetectAndInit covers two spec steps
at once (flag the detection, then relaunch the token), so validation
needs a composition mapping for it; ``run_tokenring`` advertises one
in its result.

Known deviations to inject:

  bug="self-message"   node 1 wakes itself up after going inactive,
                       violating the no-reactivation assumption.
  bug="eternal-token"  nodes keep forwarding the victory token as if
                       the probe were still live, logging token passes
                       after detection.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from ..machine import ActionSchema, GuardClause, Spec, SpecState
from ..tracer import InMemoryClock, Tracer
from ..values import VBool, VInt, VRec
from .common import RECORD_LEVELS, Recorder, RunResult, finalize_run
from .sim import SimNetwork, SimScheduler

COMPOSITION = {"DetectAndInit": ("DetectTermination", "InitiateProbe")}


def build_tokenring_spec(n: int) -> Spec:
    """The ring state machine for n >= 2 nodes."""
    if n < 2:
        raise ValueError("the ring needs at least 2 nodes")
    ids = tuple(VInt(i) for i in range(n))

    init = SpecState({
        "token": VInt(0),
        "active": VRec([(str(i), VBool(True)) for i in range(n)]),
        "detected": VBool(False),
    })

    def is_active(s: SpecState, i: int) -> bool:
        return s["active"][str(i)] == VBool(True)

    def deactivate(s, p):
        i = p["i"].n
        rec = s["active"]
        return [{"active": VRec([(k, VBool(False) if k == str(i) else v)
                                 for k, v in rec.fields])}]

    actions = [
        ActionSchema(
            "Deactivate", (("i", ids),),
            (GuardClause("node i is active",
                         lambda s, p: is_active(s, p["i"].n)),),
            deactivate),
        ActionSchema(
            "PassToken", (("i", ids),),
            (GuardClause("node i holds the token",
                         lambda s, p: s["token"] == p["i"]),
             GuardClause("i is not the initiator",
                         lambda s, p: p["i"].n != 0),
             GuardClause("node i is inactive",
                         lambda s, p: not is_active(s, p["i"].n)),
             GuardClause("termination not yet detected",
                         lambda s, p: s["detected"] == VBool(False))),
            lambda s, p: [{"token": VInt(p["i"].n - 1)}]),
        ActionSchema(
            # No detected-clause here: the probe may be relaunched right
            # after detection, which is what DetectAndInit composes.
            "InitiateProbe", (),
            (GuardClause("the initiator holds the token",
                         lambda s, p: s["token"] == VInt(0)),
             GuardClause("the initiator is inactive",
                         lambda s, p: not is_active(s, 0))),
            lambda s, p: [{"token": VInt(n - 1)}]),
        ActionSchema(
            "DetectTermination", (),
            (GuardClause("the initiator holds the token",
                         lambda s, p: s["token"] == VInt(0)),
             GuardClause("every node is inactive",
                         lambda s, p: all(not is_active(s, i)
                                          for i in range(n))),
             GuardClause("termination not yet detected",
                         lambda s, p: s["detected"] == VBool(False))),
            lambda s, p: [{"detected": VBool(True)}]),
    ]

    def quiet_when_detected(s: SpecState) -> bool:
        if s["detected"] == VBool(False):
            return True
        return all(v == VBool(False) for _, v in s["active"].fields)

    return Spec(
        variables=("token", "active", "detected"),
        init=[init],
        actions=actions,
        invariants={"QuietWhenDetected": quiet_when_detected},
        name="tokenring",
    )


# --- simulator --------------------------------------------------------

@dataclass
class TokenRingConfig:
    n: int = 3
    seed: int = 0
    record: str = "vea"
    bug: str | None = None     # None | "self-message" | "eternal-token"
    delay: tuple[float, float] = (1.0, 2.0)
    work: tuple[float, float] = (1.0, 5.0)
    time_limit: float = 100_000.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("the ring needs at least 2 nodes")
        if self.record not in RECORD_LEVELS:
            raise ValueError(f"record must be one of {RECORD_LEVELS}")
        if self.bug not in (None, "self-message", "eternal-token"):
            raise ValueError(f"unknown bug {self.bug!r}")


class _Node:
    def __init__(self, i: int, runner: "_RingRunner", rec: Recorder):
        self.i = i
        self.runner = runner
        self.rec = rec
        self.active = True
        self.has_token = i == 0
        self.probing = False       # initiator: probe already launched

    @property
    def name(self) -> str:
        return f"node-{self.i}"

    def deactivate(self) -> None:
        if not self.active:
            return
        self.active = False
        self.rec.notify("active", "Update", path=(str(self.i),),
                        args=(False,))
        self.rec.log("Deactivate", [self.i])
        if self.runner.cfg.bug == "self-message" and self.i == 1 \
                and not self.runner.woke_once:
            # Deviation: schedules a message to itself that will wake
            # it back up, breaking "inactive for good".
            self.runner.woke_once = True
            self.runner.net.send(self.name, self.name, ("wake",))
        self.maybe_move_token()

    def maybe_move_token(self) -> None:
        if self.active or not self.has_token:
            return
        runner = self.runner
        n = runner.cfg.n
        if self.i == 0:
            self.has_token = False
            if not self.probing:
                self.probing = True
                self.rec.notify("token", "Update", args=(n - 1,))
                self.rec.log("InitiateProbe")
                runner.net.send(self.name, f"node-{n - 1}", ("token",))
            else:
                # The probe came home: all nodes went quiet.  Flag it
                # and send the token on a victory lap.  One handler
                # activation, one trace entry, two spec steps.
                self.rec.notify("detected", "Update", args=(True,))
                self.rec.notify("token", "Update", args=(n - 1,))
                self.rec.log("DetectAndInit")
                runner.detected = True
                runner.net.send(self.name, f"node-{n - 1}", ("victory",))
        else:
            self.has_token = False
            self.rec.notify("token", "Update", args=(self.i - 1,))
            self.rec.log("PassToken", [self.i])
            runner.net.send(self.name, f"node-{self.i - 1}", ("token",))

    def on_message(self, src: str, payload: tuple) -> None:
        kind = payload[0]
        if kind == "token":
            self.has_token = True
            self.maybe_move_token()
        elif kind == "victory":
            if self.runner.cfg.bug == "eternal-token" and self.i != 0:
                # Deviation: treats the victory lap like a live probe
                # and logs a real token pass after detection.
                self.rec.notify("token", "Update", args=(self.i - 1,))
                self.rec.log("PassToken", [self.i])
                self.runner.net.send(self.name, f"node-{self.i - 1}",
                                     ("victory",))
            else:
                self.runner.victory_done = True
        elif kind == "wake":
            if not self.active:
                self.active = True
                self.rec.notify("active", "Update", path=(str(self.i),),
                                args=(True,))
                self.rec.log()
                self.runner.sched.at(1.0, self.deactivate)


class _RingRunner:
    def __init__(self, cfg: TokenRingConfig):
        self.cfg = cfg
        self.sched = SimScheduler()
        self.rng = random.Random(cfg.seed)
        self.net = SimNetwork(self.sched, self.rng, cfg.delay, loss=0.0)
        self.detected = False
        self.victory_done = False
        self.woke_once = False


def run_tokenring(cfg: TokenRingConfig, out_dir) -> RunResult:
    """Simulate a run and leave its traces in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = _RingRunner(cfg)
    clock = InMemoryClock()

    files: list[Path] = []
    tracers: list[Tracer] = []
    nodes: list[_Node] = []
    for i in range(cfg.n):
        path = out / f"node-{i}.ndjson"
        files.append(path)
        tracer = Tracer(str(path), clock=clock)
        tracers.append(tracer)
        rec = Recorder(tracer, cfg.record, privileged=(i == 0))
        node = _Node(i, runner, rec)
        nodes.append(node)
        runner.net.register(node.name, node.on_message)

    for node in nodes:
        runner.sched.at(runner.rng.uniform(*cfg.work), node.deactivate)

    def done() -> bool:
        return runner.detected and runner.victory_done

    try:
        runner.sched.run(cfg.time_limit, done)
    finally:
        for t in tracers:
            t.close()

    spec = build_tokenring_spec(cfg.n)
    return finalize_run("tokenring", out, cfg, files, spec,
                        composition=dict(COMPOSITION))
