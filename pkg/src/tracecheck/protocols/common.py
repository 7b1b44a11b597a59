"""Shared plumbing for the example protocol runners.

A Recorder sits between a process and its Tracer and applies the
configured recording level, so one implementation can emit anything
from full traces down to event names only:

  vea   variable updates + event names + event arguments
  v     variable updates only
  vpea  variable updates everywhere, events/args only at the
        privileged process (the coordinator)
  ea    event names + arguments, no variable updates
  e     event names only
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from ..machine import Spec
from ..tracer import Tracer
from ..traces import Trace, merge, read_trace_file, write_trace_file

RECORD_LEVELS = ("vea", "v", "vpea", "ea", "e")


class Recorder:
    def __init__(self, tracer: Tracer, level: str, privileged: bool = False):
        if level not in RECORD_LEVELS:
            raise ValueError(f"record level must be one of {RECORD_LEVELS}, "
                             f"got {level!r}")
        self.tracer = tracer
        self.level = level
        self.privileged = privileged

    @property
    def records_vars(self) -> bool:
        return self.level in ("vea", "v", "vpea")

    @property
    def records_events(self) -> bool:
        if self.level in ("vea", "ea", "e"):
            return True
        return self.level == "vpea" and self.privileged

    @property
    def records_args(self) -> bool:
        if self.level in ("vea", "ea"):
            return True
        return self.level == "vpea" and self.privileged

    def notify(self, variable: str, op: str, path=(), args=()) -> None:
        if self.records_vars:
            self.tracer.notify_change(variable, op, path=path, args=args)

    def log(self, event: str | None = None, event_args=None) -> int:
        ev = event if self.records_events else None
        args = event_args if (ev is not None and self.records_args) else None
        return self.tracer.log(event=ev, event_args=args)


@dataclass
class RunResult:
    """Everything a run leaves behind, parsed and on disk."""

    protocol: str
    out_dir: Path
    trace_files: list[Path]
    merged_file: Path
    manifest_file: Path
    trace: Trace
    spec: Spec
    composition: dict[str, tuple[str, ...]]


def finalize_run(protocol: str, out_dir: Path, cfg, files: list[Path],
                 spec: Spec, composition: dict[str, tuple[str, ...]]
                 ) -> RunResult:
    """Merge the per-process traces and write the run manifest."""
    traces = [read_trace_file(p) for p in files]
    merged = merge(traces, labels=[p.stem for p in files])
    merged_file = out_dir / "merged.ndjson"
    write_trace_file(merged_file, merged)

    manifest = {
        "protocol": protocol,
        "seed": cfg.seed,
        "config": dataclasses.asdict(cfg),
        "files": [p.name for p in files],
        "merged": merged_file.name,
        "entries": len(merged),
        "composition": {k: list(v) for k, v in composition.items()},
    }
    manifest_file = out_dir / "manifest.json"
    manifest_file.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")

    return RunResult(
        protocol=protocol, out_dir=out_dir, trace_files=list(files),
        merged_file=merged_file, manifest_file=manifest_file,
        trace=merged, spec=spec, composition=dict(composition))
