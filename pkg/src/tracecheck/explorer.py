"""Check a recorded trace against a state-machine spec.

The check is a reachability search over pairs (spec state, trace
position).  A node (s, l) means: s is reachable by replaying some
matching behavior for the first l-1 entries.  Its successors are the
spec transitions that both fire in s and agree with everything entry l
recorded: the entry's event (if any) names the action or a configured
composed action, leading event_args pin the leading parameters, and
every recorded variable v must end up exactly at the value obtained by
replaying the entry's update list for v on s.  Unrecorded variables
are unconstrained.  The trace is accepted exactly when some node
consumes the whole trace.

``validate`` runs BFS or DFS over deduplicated nodes; ``oracle_validate``
re-derives acceptance by brute-force enumeration of behaviors with no
dedup and no shared matching code, as an independent cross-check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import GuardFailed, TracecheckError, UnknownEvent
from .machine import ActionSchema, ComposedAction, Spec, SpecState, step
from .traces import Trace, TraceEntry, serialize_entry
from .values import (Value, apply_entry_updates, render_event_arg,
                     value_to_json)

STUTTER = "(stutter)"


@dataclass(frozen=True)
class ExplorerConfig:
    search: str = "bfs"                      # "bfs" | "dfs"
    allow_stutter: bool = False
    composition: dict[str, tuple[str, ...]] = field(default_factory=dict)
    max_states: int | None = None
    max_seconds: float | None = None

    def __post_init__(self):
        if self.search not in ("bfs", "dfs"):
            raise ValueError(f"search must be 'bfs' or 'dfs', got "
                             f"{self.search!r}")
        object.__setattr__(
            self, "composition",
            {k: tuple(v) for k, v in self.composition.items()})


def _check_composition(spec: Spec, cfg: ExplorerConfig) -> dict[str, ComposedAction]:
    out = {}
    for event, stages in cfg.composition.items():
        if len(stages) < 2:
            raise ValueError(
                f"composition for {event!r} needs at least 2 stages")
        for name in stages:
            if spec.action(name) is None:
                raise ValueError(
                    f"composition for {event!r} references unknown "
                    f"action {name!r}")
        out[event] = ComposedAction(event, tuple(stages))
    return out


@dataclass(frozen=True)
class Attempt:
    """One candidate that failed to match an entry, and why."""

    candidate: str
    reason: str            # GuardFailed | UpdateMismatch | UpdateError |
                           # CompositionStageFailed | UnknownEvent |
                           # NoCandidateAction
    detail: str
    values: tuple[Value, ...] | None = None
    variable: str | None = None
    expected: Value | None = None
    actual: Value | None = None
    stage: int | None = None

    def describe(self) -> str:
        head = self.candidate
        if self.values:
            head += "(" + ", ".join(render_event_arg(v)
                                    for v in self.values) + ")"
        return f"{head}: {self.detail}"


@dataclass(frozen=True)
class Match:
    """One successful way to consume an entry from a given state."""

    state: SpecState
    name: str                                     # action/composed/STUTTER
    values: tuple[Value, ...] = ()
    stage_values: tuple[tuple[Value, ...], ...] | None = None

    def label(self) -> str:
        if self.name == STUTTER:
            return STUTTER
        if self.stage_values is not None:
            return self.name
        if not self.values:
            return self.name
        return (self.name + "(" +
                ", ".join(render_event_arg(v) for v in self.values) + ")")


@dataclass
class FailureReport:
    entry_index: int               # 1-based
    state: SpecState
    attempts: list[Attempt]


@dataclass
class WitnessStep:
    entry_index: int               # 1-based
    name: str                      # action name, composed name, or STUTTER
    values: tuple[Value, ...]
    state: SpecState
    stage_values: tuple[tuple[Value, ...], ...] | None = None


@dataclass
class Verdict:
    accepted: bool
    consumed_max: int
    distinct_states: int
    trace_length: int
    witness: list[WitnessStep] | None = None
    failures: list[FailureReport] = field(default_factory=list)
    inconclusive: bool = False
    budget_reason: str | None = None
    search: str = "bfs"
    # Explored constrained graph, for DOT export: nodes are
    # (state, line) pairs, edges carry the matched step label.
    nodes: list[tuple[SpecState, int]] = field(default_factory=list)
    edges: list[tuple[int, str, int]] = field(default_factory=list)

    def status(self) -> str:
        if self.accepted:
            return "accepted"
        if self.inconclusive:
            return "inconclusive"
        return "rejected"

    def to_jsonable(self) -> dict:
        out = {
            "status": self.status(),
            "accepted": self.accepted,
            "inconclusive": self.inconclusive,
            "consumed_max": self.consumed_max,
            "trace_length": self.trace_length,
            "distinct_states": self.distinct_states,
            "search": self.search,
            "failures": [
                {
                    "entry": f.entry_index,
                    "state": {k: value_to_json(v)
                              for k, v in sorted(f.state.bindings.items())},
                    "attempts": [
                        {
                            "candidate": a.candidate,
                            "reason": a.reason,
                            "detail": a.detail,
                        }
                        for a in f.attempts
                    ],
                }
                for f in self.failures
            ],
        }
        if self.budget_reason is not None:
            out["budget_reason"] = self.budget_reason
        if self.witness is not None:
            out["witness"] = [
                {
                    "entry": w.entry_index,
                    "step": Match(w.state, w.name, w.values,
                                  w.stage_values).label(),
                    "state": {k: value_to_json(v)
                              for k, v in sorted(w.state.bindings.items())},
                }
                for w in self.witness
            ]
        return out


def _prefix_matches(values: Sequence[Value],
                    event_args: Sequence[str] | None) -> bool:
    if not event_args:
        return True
    if len(event_args) > len(values):
        return False
    return all(render_event_arg(values[i]) == event_args[i]
               for i in range(len(event_args)))


def _expected_values(state: SpecState, entry: TraceEntry
                     ) -> tuple[dict[str, Value] | None, Attempt | None]:
    """Replay the entry's updates per variable on the pre-state."""
    expected: dict[str, Value] = {}
    for var, ops in entry.updates.items():
        if var not in state:
            return None, Attempt(
                candidate="(updates)", reason="UpdateError",
                detail=f"entry updates unknown variable {var!r}",
                variable=var)
        try:
            expected[var] = apply_entry_updates(state[var], ops)
        except TracecheckError as exc:
            return None, Attempt(
                candidate="(updates)", reason="UpdateError",
                detail=f"variable {var!r}: {exc}", variable=var)
    return expected, None


def _filter_outs(outs: Iterable[SpecState], expected: dict[str, Value]
                 ) -> tuple[list[SpecState], tuple[str, Value, Value] | None]:
    """Keep successors agreeing with every recorded variable."""
    kept = []
    first_miss: tuple[str, Value, Value] | None = None
    for t in outs:
        miss = None
        for var, want in expected.items():
            got = t[var]
            if got != want:
                miss = (var, want, got)
                break
        if miss is None:
            kept.append(t)
        elif first_miss is None:
            first_miss = miss
    return kept, first_miss


def _composed_matches(spec: Spec, state: SpecState, comp: ComposedAction,
                      event_args: Sequence[str] | None
                      ) -> tuple[list[tuple[SpecState, tuple[tuple[Value, ...], ...]]], int]:
    """All chain outcomes of a composed action.

    event_args pin the leading parameters of the first stage; later
    stages range over their enabled valuations.  Returns (outcomes,
    deepest stage entered), so a caller can report which stage a dead
    chain reached.
    """
    outcomes: list[tuple[SpecState, tuple[tuple[Value, ...], ...]]] = []
    seen: set[bytes] = set()
    deepest = 0

    def rec(s: SpecState, idx: int, used: list[tuple[Value, ...]]) -> None:
        nonlocal deepest
        deepest = max(deepest, idx)
        if idx == len(comp.stages):
            fp = s.fingerprint()
            if fp not in seen:
                seen.add(fp)
                outcomes.append((s, tuple(used)))
            return
        schema = spec.action(comp.stages[idx])
        assert schema is not None
        for vals in schema.valuations():
            if idx == 0 and not _prefix_matches(vals, event_args):
                continue
            try:
                outs = step(spec, s, schema.name, vals)
            except GuardFailed:
                continue
            for t in outs:
                rec(t, idx + 1, used + [vals])

    rec(state, 0, [])
    return outcomes, deepest


def match_entry(spec: Spec, state: SpecState, entry: TraceEntry,
                cfg: ExplorerConfig) -> tuple[list[Match], list[Attempt]]:
    """All distinct ways to consume ``entry`` from ``state``.

    Returns (matches, attempts): matches are deduplicated successor
    states with the step that produced them; attempts explain every
    candidate that failed.  Raises UnknownEvent when the entry names
    an event with neither an action nor a composition entry.
    """
    composition = _check_composition(spec, cfg)
    expected, bad = _expected_values(state, entry)
    if expected is None:
        assert bad is not None
        return [], [bad]

    matches: list[Match] = []
    attempts: list[Attempt] = []
    seen: set[bytes] = set()

    def keep(m: Match) -> None:
        fp = m.state.fingerprint()
        if fp not in seen:
            seen.add(fp)
            matches.append(m)

    def try_action(schema: ActionSchema, constrain_args: bool) -> None:
        any_instance = False
        for vals in schema.valuations():
            if constrain_args and not _prefix_matches(vals, entry.event_args):
                continue
            any_instance = True
            try:
                outs = step(spec, state, schema.name, vals)
            except GuardFailed as exc:
                attempts.append(Attempt(
                    candidate=schema.name, values=vals,
                    reason="GuardFailed",
                    detail=f"guard failed: {exc.description}"))
                continue
            kept, miss = _filter_outs(outs, expected)
            if kept:
                for t in kept:
                    keep(Match(t, schema.name, vals))
            elif miss is not None:
                var, want, got = miss
                attempts.append(Attempt(
                    candidate=schema.name, values=vals,
                    reason="UpdateMismatch",
                    detail=(f"variable {var!r}: trace updates give "
                            f"{value_to_json(want)}, spec step gives "
                            f"{value_to_json(got)}"),
                    variable=var, expected=want, actual=got))
        if constrain_args and not any_instance:
            attempts.append(Attempt(
                candidate=schema.name, reason="NoCandidateAction",
                detail=(f"no parameter valuation renders as "
                        f"{list(entry.event_args or ())}")))

    if entry.event is not None:
        if entry.event in composition:
            comp = composition[entry.event]
            outcomes, deepest = _composed_matches(
                spec, state, comp, entry.event_args)
            kept, miss = _filter_outs([s for s, _ in outcomes], expected)
            if outcomes and kept:
                kept_fps = {t.fingerprint() for t in kept}
                for s, used in outcomes:
                    if s.fingerprint() in kept_fps:
                        keep(Match(s, comp.name, (), used))
            elif not outcomes:
                attempts.append(Attempt(
                    candidate=comp.name, reason="CompositionStageFailed",
                    stage=deepest,
                    detail=(f"stage {deepest} ({comp.stages[deepest]}) "
                            "cannot fire on any intermediate state")))
            elif miss is not None:
                var, want, got = miss
                attempts.append(Attempt(
                    candidate=comp.name, reason="UpdateMismatch",
                    detail=(f"variable {var!r}: trace updates give "
                            f"{value_to_json(want)}, composed step gives "
                            f"{value_to_json(got)}"),
                    variable=var, expected=want, actual=got))
        else:
            schema = spec.action(entry.event)
            if schema is None:
                raise UnknownEvent(entry.event)
            try_action(schema, constrain_args=True)
    else:
        for schema in spec.actions:
            try_action(schema, constrain_args=False)
        if cfg.allow_stutter:
            still = all(state[v] == want for v, want in expected.items())
            if still:
                keep(Match(state, STUTTER))
            else:
                bad_var = next(v for v, want in expected.items()
                               if state[v] != want)
                attempts.append(Attempt(
                    candidate=STUTTER, reason="UpdateMismatch",
                    detail=(f"variable {bad_var!r} changes, so the entry "
                            "is not a stutter"),
                    variable=bad_var, expected=expected[bad_var],
                    actual=state[bad_var]))

    if not matches and not attempts:
        attempts.append(Attempt(
            candidate="(none)", reason="NoCandidateAction",
            detail="no candidate action for this entry"))
    return matches, attempts


def validate(spec: Spec, trace: Trace, cfg: ExplorerConfig | None = None
             ) -> Verdict:
    """Search for a spec behavior matching the whole trace.

    BFS and DFS return the same accepted/consumed_max; they may differ
    in distinct_states (DFS stops at the first witness) and in the
    order of diagnostics.  Exceeding max_states/max_seconds yields an
    inconclusive verdict, never a rejection.
    """
    cfg = cfg or ExplorerConfig()
    _check_composition(spec, cfg)
    t0 = time.monotonic()
    length = len(trace)

    states: list[SpecState] = []         # node id -> state
    lines: list[int] = []                # node id -> line (1-based)
    ids: dict[tuple[bytes, int], int] = {}
    parent: list[tuple[int, Match] | None] = []
    edges: list[tuple[int, str, int]] = []
    dead: list[tuple[int, list[Attempt]]] = []

    def intern(state: SpecState, line: int) -> int | None:
        key = (state.fingerprint(), line)
        if key in ids:
            return None
        nid = len(states)
        ids[key] = nid
        states.append(state)
        lines.append(line)
        parent.append(None)
        return nid

    frontier: list[int] = []
    for s in spec.init:
        nid = intern(s, 1)
        if nid is not None:
            frontier.append(nid)

    bfs = cfg.search == "bfs"
    cursor = 0                           # BFS reads frontier as a queue
    goal: int | None = None
    budget_reason: str | None = None

    while goal is None:
        if bfs:
            if cursor >= len(frontier):
                break
            nid = frontier[cursor]
            cursor += 1
        else:
            if not frontier:
                break
            nid = frontier.pop()
        if cfg.max_seconds is not None \
                and time.monotonic() - t0 > cfg.max_seconds:
            budget_reason = f"max_seconds={cfg.max_seconds} exceeded"
            break
        state, line = states[nid], lines[nid]
        if line == length + 1:
            goal = nid
            break
        entry = trace[line - 1]
        try:
            matches, attempts = match_entry(spec, state, entry, cfg)
        except UnknownEvent as exc:
            matches = []
            attempts = [Attempt(
                candidate=entry.event or "?", reason="UnknownEvent",
                detail=(f"{exc}; if the implementation fuses several "
                        "actions into this event, map it in the "
                        "composition config"))]
        if not matches:
            dead.append((nid, attempts))
            continue
        succ_ids = []
        for m in matches:
            key = (m.state.fingerprint(), line + 1)
            if key in ids:
                edges.append((nid, m.label(), ids[key]))
                continue
            if line + 1 == length + 1:
                # Acceptance is definitive even at the budget edge.
                child = intern(m.state, line + 1)
                assert child is not None
                parent[child] = (nid, m)
                edges.append((nid, m.label(), child))
                goal = child
                break
            if cfg.max_states is not None and len(states) >= cfg.max_states:
                budget_reason = f"max_states={cfg.max_states} exceeded"
                break
            child = intern(m.state, line + 1)
            assert child is not None
            parent[child] = (nid, m)
            edges.append((nid, m.label(), child))
            succ_ids.append(child)
        if budget_reason is not None or goal is not None:
            break
        if bfs:
            frontier.extend(succ_ids)
        else:
            frontier.extend(reversed(succ_ids))

    consumed_max = max(lines) - 1 if lines else 0
    accepted = goal is not None
    witness = None
    if accepted:
        chain: list[WitnessStep] = []
        at = goal
        while parent[at] is not None:
            prev, m = parent[at]
            chain.append(WitnessStep(
                entry_index=lines[at] - 1, name=m.name, values=m.values,
                state=states[at], stage_values=m.stage_values))
            at = prev
        chain.reverse()
        witness = chain

    failures = []
    if not accepted:
        deepest = consumed_max + 1
        for nid, attempts in dead:
            if lines[nid] == deepest:
                failures.append(FailureReport(
                    entry_index=deepest, state=states[nid],
                    attempts=list(attempts)))

    return Verdict(
        accepted=accepted,
        consumed_max=consumed_max,
        distinct_states=len(states),
        trace_length=length,
        witness=witness,
        failures=failures,
        inconclusive=budget_reason is not None,
        budget_reason=budget_reason,
        search=cfg.search,
        nodes=list(zip(states, lines)),
        edges=edges,
    )


def oracle_validate(spec: Spec, trace: Trace,
                    cfg: ExplorerConfig | None = None) -> bool:
    """Definitional acceptance: enumerate behaviors outright.

    No visited set, no deduplication, no shared matching code with
    ``validate``; exists as a slow cross-check of the search.
    """
    cfg = cfg or ExplorerConfig()
    composition = _check_composition(spec, cfg)
    entries = list(trace)
    length = len(entries)

    def arg_prefix_ok(schema: ActionSchema, vals: tuple[Value, ...],
                      event_args) -> bool:
        if not event_args:
            return True
        if len(event_args) > len(vals):
            return False
        return all(render_event_arg(vals[i]) == event_args[i]
                   for i in range(len(event_args)))

    def replay_ok(s: SpecState, idx: int) -> bool:
        if idx == length:
            return True
        e = entries[idx]
        try:
            wanted = {v: apply_entry_updates(s[v], ops)
                      for v, ops in e.updates.items()
                      if v in s.bindings}
            if len(wanted) != len(e.updates):
                return False
        except TracecheckError:
            return False

        def agrees(t: SpecState) -> bool:
            return all(t[v] == w for v, w in wanted.items())

        if e.event is not None:
            if e.event in composition:
                stages = composition[e.event].stages

                def chain(s2: SpecState, k: int) -> bool:
                    if k == len(stages):
                        return agrees(s2) and replay_ok(s2, idx + 1)
                    schema2 = spec.action(stages[k])
                    for vals in schema2.valuations():
                        if k == 0 and not arg_prefix_ok(schema2, vals,
                                                        e.event_args):
                            continue
                        try:
                            outs = step(spec, s2, stages[k], vals)
                        except GuardFailed:
                            continue
                        for t in outs:
                            if chain(t, k + 1):
                                return True
                    return False

                return chain(s, 0)
            schema = spec.action(e.event)
            if schema is None:
                return False
            for vals in schema.valuations():
                if not arg_prefix_ok(schema, vals, e.event_args):
                    continue
                try:
                    outs = step(spec, s, e.event, vals)
                except GuardFailed:
                    continue
                for t in outs:
                    if agrees(t) and replay_ok(t, idx + 1):
                        return True
            return False

        for schema in spec.actions:
            for vals in schema.valuations():
                try:
                    outs = step(spec, s, schema.name, vals)
                except GuardFailed:
                    continue
                for t in outs:
                    if agrees(t) and replay_ok(t, idx + 1):
                        return True
        if cfg.allow_stutter and agrees(s) and replay_ok(s, idx + 1):
            return True
        return False

    return any(replay_ok(s0, 0) for s0 in spec.init)


# --- reporting --------------------------------------------------------

def _duplicate_add_hint(report: FailureReport, entry: TraceEntry) -> str | None:
    """Spot Add-of-present-element updates: the signature of a resent
    message logged as if it were a fresh step."""
    from .values import VSet  # local to avoid a wide import

    for var, ops in entry.updates.items():
        if var not in report.state:
            continue
        base = report.state[var]
        for u in ops:
            if u.op == "Add" and isinstance(base, VSet) and u.args \
                    and u.args[0] in base:
                return (f"note: update {u.op} on {var!r} re-adds an element "
                        "already present (a resend recorded as a fresh "
                        "step?); --allow-stutter accepts such entries when "
                        "nothing changes")
    return None


def explain(verdict: Verdict, spec: Spec, trace: Trace,
            max_reports: int = 5) -> str:
    """Human-readable account of a verdict."""
    lines = []
    lines.append(
        f"{verdict.status()}: consumed {verdict.consumed_max} of "
        f"{verdict.trace_length} entries "
        f"({verdict.distinct_states} distinct search nodes, "
        f"{verdict.search})")
    if verdict.inconclusive:
        lines.append(f"search stopped early: {verdict.budget_reason}")
        lines.append("the verdict is inconclusive; raise the budget for a "
                     "definitive answer")
    if verdict.witness is not None:
        lines.append("witness behavior:")
        for w in verdict.witness:
            label = Match(w.state, w.name, w.values, w.stage_values).label()
            lines.append(f"  entry {w.entry_index}: {label}")
    if not verdict.accepted and verdict.failures:
        k = verdict.failures[0].entry_index
        entry = trace[k - 1]
        lines.append(f"entry {k} cannot be matched from any reached state:")
        lines.append(f"  {serialize_entry(entry)}")
        for report in verdict.failures[:max_reports]:
            lines.append(f"  blocked state: {report.state.describe()}")
            for attempt in report.attempts:
                lines.append(f"    - {attempt.describe()}")
            hint = _duplicate_add_hint(report, entry)
            if hint is not None:
                lines.append(f"    {hint}")
        extra = len(verdict.failures) - max_reports
        if extra > 0:
            lines.append(f"  ... and {extra} more blocked state(s)")
    return "\n".join(lines)


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def explored_dot(verdict: Verdict, trace: Trace) -> str:
    """The explored constrained graph in DOT form.

    Dead-end nodes get dashed edges to a pseudo-node for the entry
    that could not be matched.
    """
    out = ["digraph trace_exploration {",
           "  rankdir=LR;",
           "  node [shape=box, fontsize=10];"]
    dead_lines = {f.entry_index for f in verdict.failures}
    blocked_fps = {(f.state.fingerprint(), f.entry_index)
                   for f in verdict.failures}
    for i, (state, line) in enumerate(verdict.nodes):
        label = f"after {line - 1} entr" + ("y" if line == 2 else "ies")
        label += "\\n" + state.describe().replace('"', "'")
        attrs = f"label={_dot_quote(label)}"
        if (state.fingerprint(), line) in blocked_fps:
            attrs += ", color=red"
        out.append(f"  n{i} [{attrs}];")
    for src, label, dst in verdict.edges:
        out.append(f"  n{src} -> n{dst} [label={_dot_quote(label)}];")
    if dead_lines:
        k = min(dead_lines)
        entry_label = serialize_entry(trace[k - 1]).replace('"', "'")
        out.append(f"  blocked [shape=note, label={_dot_quote('entry ' + str(k) + ': ' + entry_label)}];")
        for i, (state, line) in enumerate(verdict.nodes):
            if (state.fingerprint(), line) in blocked_fps:
                out.append(f"  n{i} -> blocked [style=dashed];")
    out.append("}")
    return "\n".join(out) + "\n"
