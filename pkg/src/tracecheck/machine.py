"""Finite state-machine specifications.

A spec declares variables, one or more initial states, guarded actions
over finite parameter domains, and named invariants.  Actions are
generators, not two-state predicates: an effect returns the variables
it changes and everything unbound is copied from the pre-state, so
"unchanged" never has to be spelled out.

Guards are lists of named clauses; the first false clause's
description is reported when a step is refused, which is what the
trace explorer surfaces in its diagnostics.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .errors import GuardFailed, UnknownInvariant
from .values import Value, value_to_json


class SpecState:
    """Immutable total assignment of variables to Values."""

    __slots__ = ("bindings", "_fp")

    def __init__(self, bindings: Mapping[str, Value]):
        for k, v in bindings.items():
            if not isinstance(k, str) or not isinstance(v, Value):
                raise TypeError("bindings must map str to Value")
        self.bindings = dict(bindings)
        self._fp: bytes | None = None

    def fingerprint(self) -> bytes:
        fp = self._fp
        if fp is None:
            h = hashlib.sha256()
            for name in sorted(self.bindings):
                h.update(name.encode("utf-8"))
                h.update(b"=")
                h.update(self.bindings[name].canonical())
                h.update(b";")
            fp = h.digest()
            self._fp = fp
        return fp

    def __getitem__(self, name: str) -> Value:
        return self.bindings[name]

    def __contains__(self, name: str) -> bool:
        return name in self.bindings

    def updated(self, changes: Mapping[str, Value]) -> "SpecState":
        merged = dict(self.bindings)
        merged.update(changes)
        return SpecState(merged)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpecState):
            return NotImplemented
        return self.fingerprint() == other.fingerprint()

    def __hash__(self) -> int:
        return hash(self.fingerprint())

    def describe(self) -> str:
        return ", ".join(f"{k}={value_to_json(v)}"
                         for k, v in sorted(self.bindings.items()))

    def __repr__(self) -> str:
        return f"SpecState({self.describe()})"


Params = dict[str, Value]


@dataclass(frozen=True)
class GuardClause:
    description: str
    holds: Callable[[SpecState, Params], bool]


# An effect maps (pre-state, params) to a list of partial updates, one
# per nondeterministic successor.  Unlisted variables stay unchanged.
Effect = Callable[[SpecState, Params], list[dict[str, Value]]]


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[tuple[str, tuple[Value, ...]], ...]
    guard: tuple[GuardClause, ...]
    effect: Effect

    def param_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.params)

    def valuations(self) -> Iterable[tuple[Value, ...]]:
        """Cartesian product of the parameter domains, declared order."""
        domains = [dom for _, dom in self.params]
        return itertools.product(*domains)

    def bind(self, values: Sequence[Value]) -> Params:
        names = self.param_names()
        if len(values) != len(names):
            raise ValueError(
                f"{self.name} takes {len(names)} parameter(s), "
                f"got {len(values)}")
        return dict(zip(names, values))

    def failing_clause(self, state: SpecState,
                       params: Params) -> GuardClause | None:
        for clause in self.guard:
            if not clause.holds(state, params):
                return clause
        return None


@dataclass(frozen=True)
class ComposedAction:
    """Several actions fused into one trace-level step, in order."""

    name: str
    stages: tuple[str, ...]

    def __post_init__(self):
        if len(self.stages) < 2:
            raise ValueError("a composed action needs at least 2 stages")


@dataclass
class Spec:
    variables: tuple[str, ...]
    init: list[SpecState]
    actions: list[ActionSchema]
    invariants: dict[str, Callable[[SpecState], bool]] = field(
        default_factory=dict)
    name: str = "spec"

    def __post_init__(self):
        if not self.init:
            raise ValueError("a spec needs at least one initial state")
        names = [a.name for a in self.actions]
        if len(set(names)) != len(names):
            raise ValueError("duplicate action name")
        declared = set(self.variables)
        for s in self.init:
            if set(s.bindings) != declared:
                raise ValueError(
                    "initial state does not bind exactly the declared "
                    f"variables: {sorted(s.bindings)} vs {sorted(declared)}")

    def action(self, name: str) -> ActionSchema | None:
        for a in self.actions:
            if a.name == name:
                return a
        return None


def _complete(spec: Spec, pre: SpecState,
              partial: dict[str, Value]) -> SpecState:
    unknown = set(partial) - set(spec.variables)
    if unknown:
        raise ValueError(f"effect wrote undeclared variables: {sorted(unknown)}")
    return pre.updated(partial)


def step(spec: Spec, state: SpecState, action_name: str,
         values: Sequence[Value]) -> list[SpecState]:
    """All successors of firing one action instance.

    Raises GuardFailed (with the failing clause's description) when the
    instance is not enabled.
    """
    schema = spec.action(action_name)
    if schema is None:
        raise KeyError(f"no action named {action_name!r}")
    params = schema.bind(values)
    clause = schema.failing_clause(state, params)
    if clause is not None:
        raise GuardFailed(action_name, clause.description)
    partials = schema.effect(state, params)
    if not partials:
        raise ValueError(
            f"{action_name}: effect produced no successor despite a "
            "true guard")
    return [_complete(spec, state, p) for p in partials]


def enabled_instances(spec: Spec,
                      state: SpecState) -> list[tuple[str, tuple[Value, ...]]]:
    """Enabled (action, valuation) pairs in deterministic order:
    actions as declared, valuations in domain product order."""
    out = []
    for schema in spec.actions:
        for values in schema.valuations():
            if schema.failing_clause(state, schema.bind(values)) is None:
                out.append((schema.name, values))
    return out


def _chain(spec: Spec, state: SpecState, stages: Sequence[str],
           stage_values: Sequence[Sequence[Value] | None]
           ) -> tuple[list[SpecState], int | None]:
    """Run a stage list from ``state``.

    A stage with ``None`` values ranges over every enabled valuation of
    its action.  Returns (final states, deepest stage that fired
    nowhere) -- the stage index is None when some chain completed.
    """
    frontier = [state]
    for idx, stage_name in enumerate(stages):
        schema = spec.action(stage_name)
        if schema is None:
            raise KeyError(f"no action named {stage_name!r}")
        wanted = stage_values[idx]
        nxt: list[SpecState] = []
        seen: set[bytes] = set()
        for mid in frontier:
            if wanted is not None:
                candidates = [tuple(wanted)]
            else:
                candidates = [
                    vals for vals in schema.valuations()
                    if schema.failing_clause(mid, schema.bind(vals)) is None
                ]
            for vals in candidates:
                try:
                    outs = step(spec, mid, stage_name, vals)
                except GuardFailed:
                    continue
                for t in outs:
                    fp = t.fingerprint()
                    if fp not in seen:
                        seen.add(fp)
                        nxt.append(t)
        if not nxt:
            return [], idx
        frontier = nxt
    return frontier, None


def step_composed(spec: Spec, state: SpecState, composed: ComposedAction,
                  stage_values: Sequence[Sequence[Value] | None] | None = None
                  ) -> list[SpecState]:
    """Successors of a composed action: stage 1 from ``state``, each
    later stage from every intermediate, deduplicated.

    Stage 1 must be able to fire (GuardFailed otherwise, reporting
    stage 0); a later stage that fires nowhere yields [].
    """
    if stage_values is None:
        stage_values = [None] * len(composed.stages)
    if len(stage_values) != len(composed.stages):
        raise ValueError("one value list (or None) per stage required")
    finals, dead = _chain(spec, state, composed.stages, stage_values)
    if dead == 0:
        raise GuardFailed(
            composed.name,
            f"stage 0 ({composed.stages[0]}) cannot fire")
    return finals


def check_invariant(spec: Spec, state: SpecState, name: str) -> bool:
    try:
        pred = spec.invariants[name]
    except KeyError:
        raise UnknownInvariant(
            f"{spec.name} has no invariant {name!r}") from None
    return bool(pred(state))


def next_states(spec: Spec, state: SpecState) -> list[SpecState]:
    """Deduplicated successors under every enabled action instance."""
    out: list[SpecState] = []
    seen: set[bytes] = set()
    for name, values in enabled_instances(spec, state):
        for t in step(spec, state, name, values):
            fp = t.fingerprint()
            if fp not in seen:
                seen.add(fp)
                out.append(t)
    return out


def explore(spec: Spec, max_states: int = 10_000
            ) -> tuple[list[SpecState], list[tuple[int, str, tuple[Value, ...], int]]]:
    """Breadth-first reachability up to ``max_states`` states.

    Returns (states, edges); edges are (from index, action, values,
    to index) and self-loops (stuttering steps) are skipped.
    """
    states: list[SpecState] = []
    index: dict[bytes, int] = {}
    edges: list[tuple[int, str, tuple[Value, ...], int]] = []

    for s in spec.init:
        fp = s.fingerprint()
        if fp not in index:
            index[fp] = len(states)
            states.append(s)

    cursor = 0
    while cursor < len(states):
        s = states[cursor]
        for name, values in enabled_instances(spec, s):
            for t in step(spec, s, name, values):
                fp = t.fingerprint()
                if fp not in index:
                    if len(states) >= max_states:
                        raise ValueError(
                            f"state space exceeds {max_states} states")
                    index[fp] = len(states)
                    states.append(t)
                if index[fp] != cursor:
                    edges.append((cursor, name, values, index[fp]))
        cursor += 1
    return states, edges


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(spec: Spec, max_states: int = 10_000) -> str:
    """The unconstrained reachable state graph in DOT form."""
    states, edges = explore(spec, max_states)
    init_fps = {s.fingerprint() for s in spec.init}
    lines = [
        f"digraph {_dot_quote(spec.name)} {{",
        "  // stuttering self-loops omitted",
        "  node [shape=box, fontsize=10];",
    ]
    for i, s in enumerate(states):
        attrs = f"label={_dot_quote(s.describe())}"
        if s.fingerprint() in init_fps:
            attrs += ", style=bold"
        lines.append(f"  s{i} [{attrs}];")
    for src, name, values, dst in edges:
        label = name
        if values:
            label += "(" + ", ".join(value_to_json(v) for v in values) + ")"
        lines.append(f"  s{src} -> s{dst} [label={_dot_quote(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
