"""Two-phase commit: reference state machine and a simulated,
instrumented implementation.

The state machine has a transaction manager (TM) and a set of resource
managers (RMs).  RMs prepare spontaneously; the TM commits once every
RM has prepared, or may abort unilaterally while undecided.  Decision
messages overwrite RM state regardless of what the RM was doing, and
receive actions stay enabled while their message is in flight, so
duplicate deliveries are part of the model.

The simulator runs one TM and n RM processes over a lossy network,
each logging through its own Tracer against a shared logical clock.
A run writes per-process NDJSON files, the merged trace, and a
manifest; identical (config, seed) pairs produce identical bytes.

Known deviations to inject:

  bug="counter"   the TM counts Prepared messages instead of tracking
                  which RMs sent them, so a duplicate (e.g. a resend)
                  makes it commit before every RM has prepared.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from ..machine import ActionSchema, GuardClause, Spec, SpecState
from ..tracer import InMemoryClock, Tracer
from ..values import Value, VRec, VSet, VStr
from .common import RECORD_LEVELS, Recorder, RunResult, finalize_run
from .sim import SimNetwork, SimScheduler

RM_STATES = ("working", "prepared", "committed", "aborted")


def _prepared_msg(rm: str) -> VRec:
    return VRec([("type", VStr("Prepared")), ("rm", VStr(rm))])


_COMMIT_MSG = VRec([("type", VStr("Commit"))])
_ABORT_MSG = VRec([("type", VStr("Abort"))])


def _rec_set(rec: VRec, key: str, val: Value) -> VRec:
    return VRec([(k, val if k == key else v) for k, v in rec.fields])


def _set_add(s: VSet, elem: Value) -> VSet:
    return VSet(s.items + (elem,))


def build_twophase_spec(rms) -> Spec:
    """The two-phase commit state machine over the given RM names."""
    rm_names = tuple(rms)
    rm_dom = tuple(VStr(r) for r in rm_names)
    all_rms = VSet(rm_dom)

    init = SpecState({
        "rmState": VRec([(r, VStr("working")) for r in rm_names]),
        "tmState": VStr("init"),
        "tmPrepared": VSet(),
        "msgs": VSet(),
    })

    def rm_state_is(state_name: str):
        return lambda s, p: s["rmState"][p["r"].text] == VStr(state_name)

    tm_undecided = GuardClause(
        'tmState = "init"', lambda s, p: s["tmState"] == VStr("init"))

    actions = [
        ActionSchema(
            "RMPrepare", (("r", rm_dom),),
            (GuardClause('rmState[r] = "working"', rm_state_is("working")),),
            lambda s, p: [{
                "rmState": _rec_set(s["rmState"], p["r"].text,
                                    VStr("prepared")),
                "msgs": _set_add(s["msgs"], _prepared_msg(p["r"].text)),
            }]),
        ActionSchema(
            "RMRcvCommitMsg", (("r", rm_dom),),
            (GuardClause("a Commit message is in msgs",
                         lambda s, p: _COMMIT_MSG in s["msgs"]),),
            lambda s, p: [{
                "rmState": _rec_set(s["rmState"], p["r"].text,
                                    VStr("committed")),
            }]),
        ActionSchema(
            "RMRcvAbortMsg", (("r", rm_dom),),
            (GuardClause("an Abort message is in msgs",
                         lambda s, p: _ABORT_MSG in s["msgs"]),),
            lambda s, p: [{
                "rmState": _rec_set(s["rmState"], p["r"].text,
                                    VStr("aborted")),
            }]),
        ActionSchema(
            "TMRcvPrepared", (("r", rm_dom),),
            (tm_undecided,
             GuardClause("a Prepared message from r is in msgs",
                         lambda s, p:
                         _prepared_msg(p["r"].text) in s["msgs"])),
            lambda s, p: [{
                "tmPrepared": _set_add(s["tmPrepared"], p["r"]),
            }]),
        ActionSchema(
            "TMCommit", (),
            (tm_undecided,
             GuardClause("every RM is in tmPrepared",
                         lambda s, p: s["tmPrepared"] == all_rms)),
            lambda s, p: [{
                "tmState": VStr("done"),
                "msgs": _set_add(s["msgs"], _COMMIT_MSG),
            }]),
        ActionSchema(
            "TMAbort", (),
            (tm_undecided,),
            lambda s, p: [{
                "tmState": VStr("done"),
                "msgs": _set_add(s["msgs"], _ABORT_MSG),
            }]),
    ]

    legal = tuple(VStr(x) for x in RM_STATES)

    def type_ok(s: SpecState) -> bool:
        rec = s["rmState"]
        if not isinstance(rec, VRec) or set(rec.keys()) != set(rm_names):
            return False
        return all(v in legal for _, v in rec.fields)

    def consistent(s: SpecState) -> bool:
        states = [v for _, v in s["rmState"].fields]
        aborted = any(v == VStr("aborted") for v in states)
        committed = any(v == VStr("committed") for v in states)
        return not (aborted and committed)

    return Spec(
        variables=("rmState", "tmState", "tmPrepared", "msgs"),
        init=[init],
        actions=actions,
        invariants={"TypeOK": type_ok, "Consistent": consistent},
        name="twophase",
    )


# --- simulator --------------------------------------------------------

@dataclass
class TwoPhaseConfig:
    rms: tuple[str, ...] = ("rm-0", "rm-1")
    seed: int = 0
    record: str = "vea"
    bug: str | None = None              # None | "counter"
    loss: float = 0.0
    delay: tuple[float, float] = (1.0, 2.0)
    work: tuple[float, float] = (1.0, 5.0)
    timeout: float = 60.0               # Prepared resend period
    abort_after: float | None = None    # TM decides Abort at this time
    force_resend: bool = False
    resend_logging: str = "stutter"     # "stutter" | "silent"
    time_limit: float = 100_000.0

    def __post_init__(self):
        if not self.rms:
            raise ValueError("at least one RM required")
        if len(set(self.rms)) != len(self.rms):
            raise ValueError("duplicate RM names")
        if self.record not in RECORD_LEVELS:
            raise ValueError(f"record must be one of {RECORD_LEVELS}")
        if self.bug not in (None, "counter"):
            raise ValueError(f"unknown bug {self.bug!r}")
        if self.resend_logging not in ("stutter", "silent"):
            raise ValueError("resend_logging must be 'stutter' or 'silent'")


def rm_names(n: int) -> tuple[str, ...]:
    return tuple(f"rm-{i}" for i in range(n))


class _RM:
    def __init__(self, name: str, runner: "_Runner", rec: Recorder,
                 timeout: float):
        self.name = name
        self.runner = runner
        self.rec = rec
        self.timeout = timeout
        self.decided = False

    def prepare(self) -> None:
        if self.decided:
            # The TM decided (e.g. an early abort) before this RM got
            # around to preparing; a real RM would not prepare now.
            return
        rec = self.rec
        rec.notify("rmState", "Update", path=(self.name,),
                   args=("prepared",))
        rec.notify("msgs", "Add",
                   args=({"type": "Prepared", "rm": self.name},))
        rec.log("RMPrepare", [self.name])
        self.runner.net.send(self.name, "tm", ("Prepared", self.name))
        self.runner.sched.at(self.timeout, self.resend)

    def resend(self) -> None:
        if self.decided:
            return
        # The decision is late: push Prepared again.  With "stutter"
        # logging the retry is recorded even though nothing changed.
        if self.runner.cfg.resend_logging == "stutter":
            rec = self.rec
            rec.notify("rmState", "Update", path=(self.name,),
                       args=("prepared",))
            rec.notify("msgs", "Add",
                       args=({"type": "Prepared", "rm": self.name},))
            rec.log()
        self.runner.net.send(self.name, "tm", ("Prepared", self.name))
        self.runner.sched.at(self.timeout, self.resend)

    def on_message(self, src: str, payload: tuple) -> None:
        if self.decided:
            return
        kind = payload[0]
        if kind == "Commit":
            self.decided = True
            self.rec.notify("rmState", "Update", path=(self.name,),
                            args=("committed",))
            self.rec.log("RMRcvCommitMsg", [self.name])
        elif kind == "Abort":
            self.decided = True
            self.rec.notify("rmState", "Update", path=(self.name,),
                            args=("aborted",))
            self.rec.log("RMRcvAbortMsg", [self.name])


class _TM:
    def __init__(self, runner: "_Runner", rec: Recorder):
        self.runner = runner
        self.rec = rec
        self.prepared: set[str] = set()
        self.counter = 0
        self.decision: str | None = None

    def on_message(self, src: str, payload: tuple) -> None:
        if payload[0] != "Prepared":
            return
        rm = payload[1]
        if self.decision is not None:
            # Already decided; remind the sender, no new step.
            self.runner.net.send("tm", rm, (self.decision,))
            return
        self.rec.notify("tmPrepared", "Add", args=(rm,))
        self.rec.log("TMRcvPrepared", [rm])
        n = len(self.runner.cfg.rms)
        if self.runner.cfg.bug == "counter":
            # Deviation: tallies receipts, so duplicates count twice.
            self.counter += 1
            if self.counter >= n:
                self.commit()
        else:
            self.prepared.add(rm)
            if len(self.prepared) == n:
                self.commit()

    def commit(self) -> None:
        self.decision = "Commit"
        self.rec.notify("tmState", "Update", args=("done",))
        self.rec.notify("msgs", "Add", args=({"type": "Commit"},))
        self.rec.log("TMCommit")
        self._broadcast_decision()

    def abort(self) -> None:
        if self.decision is not None:
            return
        self.decision = "Abort"
        self.rec.notify("tmState", "Update", args=("done",))
        self.rec.notify("msgs", "Add", args=({"type": "Abort"},))
        self.rec.log("TMAbort")
        self._broadcast_decision()

    def _broadcast_decision(self) -> None:
        for rm in self.runner.cfg.rms:
            self.runner.net.send("tm", rm, (self.decision,))
        if self.runner.cfg.loss > 0.0:
            # Lossy link: repeat until the run completes.  Resends are
            # housekeeping, not protocol steps, so nothing is logged.
            self.runner.sched.at(self.runner.cfg.timeout,
                                 self._broadcast_decision)


class _Runner:
    def __init__(self, cfg: TwoPhaseConfig):
        self.cfg = cfg
        self.sched = SimScheduler()
        self.rng = random.Random(cfg.seed)
        self.net = SimNetwork(self.sched, self.rng, cfg.delay, cfg.loss)


def run_twophase(cfg: TwoPhaseConfig, out_dir) -> RunResult:
    """Simulate a run and leave its traces in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = _Runner(cfg)
    clock = InMemoryClock()

    files: list[Path] = []
    tracers: list[Tracer] = []

    def make_recorder(name: str, privileged: bool) -> Recorder:
        path = out / f"{name}.ndjson"
        files.append(path)
        tracer = Tracer(str(path), clock=clock)
        tracers.append(tracer)
        return Recorder(tracer, cfg.record, privileged=privileged)

    tm = _TM(runner, make_recorder("tm", privileged=True))
    runner.net.register("tm", tm.on_message)

    rms: list[_RM] = []
    for i, name in enumerate(cfg.rms):
        timeout = cfg.timeout
        if cfg.force_resend and i == 0:
            timeout = 3.0
        rm = _RM(name, runner, make_recorder(name, privileged=False),
                 timeout)
        rms.append(rm)
        runner.net.register(name, rm.on_message)

    # Work times are drawn up front, in RM order, so a seed pins them.
    last = len(cfg.rms) - 1
    for i, rm in enumerate(rms):
        if cfg.force_resend:
            # First RM prepares early and retries fast; the last one is
            # slow enough that its Prepared cannot arrive before the
            # first RM's duplicate does.
            work = 1.0 if i == 0 else (50.0 if i == last else 2.0)
        else:
            work = runner.rng.uniform(*cfg.work)
        runner.sched.at(work, rm.prepare)

    if cfg.abort_after is not None:
        runner.sched.at(cfg.abort_after, tm.abort)

    def done() -> bool:
        return tm.decision is not None and all(rm.decided for rm in rms)

    try:
        runner.sched.run(cfg.time_limit, done)
    finally:
        for t in tracers:
            t.close()

    spec = build_twophase_spec(cfg.rms)
    return finalize_run("twophase", out, cfg, files, spec, composition={})
