"""Shared generators for the property-style suites.

Everything is driven by seeded random.Random instances so failures
reproduce exactly.
"""

from __future__ import annotations

import random

from tracecheck import (TraceEntry, UpdateOp, VBag, VBool, VInt, VRec, VSeq,
                        VSet, VStr, mk)

I64_MIN = -(2 ** 63)
I64_MAX = 2 ** 63 - 1

_CHARS = "abcxyz 0/\\\"é世"


def gen_value(rng: random.Random, depth: int = 3):
    """One random Value; containers shrink with depth."""
    kinds = ["str", "int", "bool"]
    if depth > 0:
        kinds += ["seq", "set", "bag", "rec"]
    kind = rng.choice(kinds)
    if kind == "str":
        return VStr("".join(rng.choice(_CHARS)
                            for _ in range(rng.randint(0, 6))))
    if kind == "int":
        return VInt(rng.choice((
            rng.randint(-100, 100),
            rng.randint(I64_MIN, I64_MAX))))
    if kind == "bool":
        return VBool(rng.random() < 0.5)
    n = rng.randint(0, 3)
    if kind == "seq":
        return VSeq([gen_value(rng, depth - 1) for _ in range(n)])
    if kind == "set":
        return VSet([gen_value(rng, depth - 1) for _ in range(n)])
    if kind == "bag":
        return VBag([(gen_value(rng, depth - 1), rng.randint(1, 3))
                     for _ in range(n)])
    return VRec([(f"k{i}", gen_value(rng, depth - 1)) for i in range(n)])


def has_set_or_bag(v) -> bool:
    if isinstance(v, (VSet, VBag)):
        return True
    if isinstance(v, VSeq):
        return any(has_set_or_bag(x) for x in v.items)
    if isinstance(v, VBag):
        return True
    if isinstance(v, VRec):
        return any(has_set_or_bag(x) for _, x in v.fields)
    return False


_OPS = ("Update", "Init", "Add", "Remove", "AddToBag", "RemoveFromBag",
        "Clear", "Append")


def gen_update(rng: random.Random) -> UpdateOp:
    op = rng.choice(_OPS)
    path = tuple(rng.choice(("f", "g")) for _ in range(rng.randint(0, 1)))
    if op == "Clear":
        args = ()
    else:
        # Args live in the parse domain (arrays read back as Seq), so
        # normalize sets/bags the same way a wire round-trip would.
        from tracecheck import jsonable_to_value, value_to_jsonable
        raw = gen_value(rng, 1)
        args = (jsonable_to_value(value_to_jsonable(raw)),)
    return UpdateOp(op, path=path, args=args)


def gen_entry(rng: random.Random, clock: int) -> TraceEntry:
    variables = rng.sample(("x", "y", "state", "Event"),
                           k=rng.randint(0, 3))
    updates = {
        var: tuple(gen_update(rng) for _ in range(rng.randint(1, 3)))
        for var in variables
    }
    event = rng.choice((None, "Step", "Move"))
    event_args = None
    if event is not None and rng.random() < 0.7:
        event_args = tuple(rng.choice(("a", "b", "7"))
                           for _ in range(rng.randint(0, 2)))
    return TraceEntry(clock=clock, updates=updates, event=event,
                      event_args=event_args)


def mkv(obj):
    """Shorthand for building Values from plain Python data."""
    return mk(obj)
