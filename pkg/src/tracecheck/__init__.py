"""Validate recorded execution traces against state-machine specs.

A distributed program logs variable updates and named events through a
Tracer; per-process NDJSON logs are merged on a shared logical clock;
the explorer then searches the spec's constrained state space for a
behavior that explains the whole trace.
"""

from .errors import (BagUnderflow, GuardFailed, MissingClock, OpTypeError,
                     ParseError, PathError, SchemaError, SimDeadlock,
                     TracecheckError, UnknownEvent, UnknownInvariant,
                     UnknownOp)
from .explorer import (STUTTER, Attempt, ExplorerConfig, FailureReport,
                       Match, Verdict, WitnessStep, explain, explored_dot,
                       match_entry, oracle_validate, validate)
from .machine import (ActionSchema, ComposedAction, GuardClause, Spec,
                      SpecState, check_invariant, enabled_instances,
                      explore, export_dot, next_states, step, step_composed)
from .tracer import (TRACE_PATH_ENV, Clock, ExplicitClock, FileBasedClock,
                     InMemoryClock, Tracer, VirtualField, get_tracer)
from .traces import (Trace, TraceEntry, merge, parse_ndjson,
                     read_trace_file, serialize_entry, serialize_trace,
                     validate_entry, write_trace_file)
from .values import (UpdateOp, Value, VBag, VBool, VInt, VRec, VSeq, VSet,
                     VStr, apply_entry_updates, apply_update, fingerprint,
                     json_to_value, jsonable_to_value, mk, render_event_arg,
                     value_to_json, value_to_jsonable)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "TracecheckError", "PathError", "OpTypeError", "BagUnderflow",
    "UnknownOp", "ParseError", "SchemaError", "MissingClock", "GuardFailed",
    "UnknownInvariant", "UnknownEvent", "SimDeadlock",
    # values
    "Value", "VStr", "VInt", "VBool", "VSeq", "VSet", "VBag", "VRec",
    "UpdateOp", "mk", "fingerprint", "apply_update", "apply_entry_updates",
    "value_to_json", "json_to_value", "value_to_jsonable",
    "jsonable_to_value", "render_event_arg",
    # traces
    "Trace", "TraceEntry", "validate_entry", "parse_ndjson",
    "read_trace_file", "serialize_entry", "serialize_trace", "merge",
    "write_trace_file",
    # tracer
    "Tracer", "get_tracer", "VirtualField", "Clock", "InMemoryClock",
    "FileBasedClock", "ExplicitClock", "TRACE_PATH_ENV",
    # machine
    "SpecState", "GuardClause", "ActionSchema", "ComposedAction", "Spec",
    "step", "step_composed", "enabled_instances", "check_invariant",
    "next_states", "explore", "export_dot",
    # explorer
    "STUTTER", "ExplorerConfig", "Match", "Attempt", "FailureReport",
    "WitnessStep", "Verdict", "match_entry", "validate", "oracle_validate",
    "explain", "explored_dot",
]
