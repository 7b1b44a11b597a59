"""Structured values and the update operators that rewrite them.

The value domain has seven variants: strings, 64-bit signed integers,
booleans, sequences, sets, bags (multisets with positive counts) and
records (string-keyed mappings).  Every value is immutable, carries a
cached canonical byte form, and compares/hashes by that form, so sets
and record keys are order-insensitive by construction.

Wire mapping (bit-exact, used when values appear inside trace files):

    String  <-> JSON string
    Int     <-> JSON number (integral, 64-bit signed)
    Bool    <-> JSON true/false
    Seq     <-> JSON array
    Set      -> JSON array in canonical element order
    Bag      -> JSON array of [element, count] pairs in canonical order
    Record  <-> JSON object, keys in lexicographic order

JSON arrays are ambiguous on the way back in: a set, a bag and a
sequence all serialize to arrays.  ``json_to_value`` resolves every
array to a Seq.  ``Update``/``Init`` compensate with a one-level
coercion: replacing a Set (or Bag) with a Seq argument re-reads the
argument as a set (or as [element, count] pairs).  See ``apply_update``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .errors import BagUnderflow, OpTypeError, ParseError, PathError, UnknownOp

I64_MIN = -(2**63)
I64_MAX = 2**63 - 1


class Value:
    """Base class; concrete variants are the V* classes below."""

    __slots__ = ("_canon",)

    def canonical(self) -> bytes:
        """Deterministic byte form; equal values have equal bytes."""
        c = self._canon
        if c is None:
            c = self._render()
            self._canon = c
        return c

    def _render(self) -> bytes:
        raise NotImplementedError

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Value):
            return NotImplemented
        return self.canonical() == other.canonical()

    def __ne__(self, other: object) -> bool:
        if not isinstance(other, Value):
            return NotImplemented
        return self.canonical() != other.canonical()

    def __hash__(self) -> int:
        return hash(self.canonical())

    def __repr__(self) -> str:
        return f"{type(self).__name__}({value_to_json(self)})"


class VStr(Value):
    __slots__ = ("text",)

    def __init__(self, text: str):
        if not isinstance(text, str):
            raise TypeError(f"VStr needs str, got {type(text).__name__}")
        self._canon = None
        self.text = text

    def _render(self) -> bytes:
        raw = self.text.encode("utf-8")
        return b"s%d:%s" % (len(raw), raw)


class VInt(Value):
    __slots__ = ("n",)

    def __init__(self, n: int):
        if isinstance(n, bool) or not isinstance(n, int):
            raise TypeError(f"VInt needs int, got {type(n).__name__}")
        if not (I64_MIN <= n <= I64_MAX):
            raise OverflowError(f"integer out of 64-bit signed range: {n}")
        self._canon = None
        self.n = n

    def _render(self) -> bytes:
        return b"i%d;" % self.n


class VBool(Value):
    __slots__ = ("flag",)

    def __init__(self, flag: bool):
        if not isinstance(flag, bool):
            raise TypeError(f"VBool needs bool, got {type(flag).__name__}")
        self._canon = None
        self.flag = flag

    def _render(self) -> bytes:
        return b"b1" if self.flag else b"b0"


class VSeq(Value):
    __slots__ = ("items",)

    def __init__(self, items: Iterable[Value] = ()):
        items = tuple(items)
        for x in items:
            _require_value(x)
        self._canon = None
        self.items = items

    def _render(self) -> bytes:
        return b"q[" + b"".join(x.canonical() for x in self.items) + b"]"

    def __len__(self) -> int:
        return len(self.items)


class VSet(Value):
    """Finite set; elements are deduplicated and kept in canonical order."""

    __slots__ = ("items",)

    def __init__(self, items: Iterable[Value] = ()):
        ordered = sorted((_require_value(x) for x in items),
                         key=Value.canonical)
        dedup: list[Value] = []
        for x in ordered:
            if not dedup or dedup[-1].canonical() != x.canonical():
                dedup.append(x)
        self._canon = None
        self.items = tuple(dedup)

    def _render(self) -> bytes:
        return b"S[" + b"".join(x.canonical() for x in self.items) + b"]"

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, x: Value) -> bool:
        return any(x == y for y in self.items)


class VBag(Value):
    """Multiset; counts are strictly positive."""

    __slots__ = ("pairs",)

    def __init__(self, pairs: Iterable[tuple[Value, int]] = ()):
        merged: dict[bytes, tuple[Value, int]] = {}
        for elem, count in pairs:
            _require_value(elem)
            if isinstance(count, bool) or not isinstance(count, int):
                raise TypeError("bag count must be int")
            if count <= 0:
                raise ValueError(f"bag count must be positive, got {count}")
            key = elem.canonical()
            if key in merged:
                merged[key] = (elem, merged[key][1] + count)
            else:
                merged[key] = (elem, count)
        self._canon = None
        self.pairs = tuple(sorted(merged.values(),
                                  key=lambda ec: ec[0].canonical()))

    def _render(self) -> bytes:
        body = b"".join(b"%s*%d;" % (e.canonical(), c) for e, c in self.pairs)
        return b"B[" + body + b"]"

    def count(self, x: Value) -> int:
        for elem, c in self.pairs:
            if elem == x:
                return c
        return 0

    def __len__(self) -> int:
        return sum(c for _, c in self.pairs)


class VRec(Value):
    """Record / finite function with string keys, kept in key order."""

    __slots__ = ("fields",)

    def __init__(self, fields: Iterable[tuple[str, Value]] = ()):
        items = list(fields)
        for k, v in items:
            if not isinstance(k, str):
                raise TypeError("record keys must be str")
            _require_value(v)
        keys = [k for k, _ in items]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate record key")
        self._canon = None
        self.fields = tuple(sorted(items, key=lambda kv: kv[0]))

    def _render(self) -> bytes:
        parts = []
        for k, v in self.fields:
            raw = k.encode("utf-8")
            parts.append(b"k%d:%s=%s" % (len(raw), raw, v.canonical()))
        return b"R{" + b"".join(parts) + b"}"

    def keys(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.fields)

    def get(self, key: str) -> Value | None:
        for k, v in self.fields:
            if k == key:
                return v
        return None

    def __getitem__(self, key: str) -> Value:
        v = self.get(key)
        if v is None:
            raise KeyError(key)
        return v


def _require_value(x: Any) -> Value:
    if not isinstance(x, Value):
        raise TypeError(f"expected Value, got {type(x).__name__}")
    return x


def mk(obj: Any) -> Value:
    """Lift plain Python data into the value domain.

    bool/int/str map to the scalar variants, list/tuple to Seq,
    set/frozenset to Set, dict to Record.  Values pass through.
    Bags have no plain-Python spelling; construct VBag directly.
    """
    if isinstance(obj, Value):
        return obj
    if isinstance(obj, bool):
        return VBool(obj)
    if isinstance(obj, int):
        return VInt(obj)
    if isinstance(obj, str):
        return VStr(obj)
    if isinstance(obj, (list, tuple)):
        return VSeq(mk(x) for x in obj)
    if isinstance(obj, (set, frozenset)):
        return VSet(mk(x) for x in obj)
    if isinstance(obj, dict):
        return VRec((k, mk(v)) for k, v in obj.items())
    raise TypeError(f"cannot lift {type(obj).__name__} into a Value")


def fingerprint(v: Value) -> bytes:
    """32-byte digest of the canonical form."""
    return hashlib.sha256(v.canonical()).digest()


# --- JSON mapping -----------------------------------------------------

def value_to_jsonable(v: Value) -> Any:
    if isinstance(v, VStr):
        return v.text
    if isinstance(v, VInt):
        return v.n
    if isinstance(v, VBool):
        return v.flag
    if isinstance(v, VSeq):
        return [value_to_jsonable(x) for x in v.items]
    if isinstance(v, VSet):
        return [value_to_jsonable(x) for x in v.items]
    if isinstance(v, VBag):
        return [[value_to_jsonable(e), c] for e, c in v.pairs]
    if isinstance(v, VRec):
        return {k: value_to_jsonable(x) for k, x in v.fields}
    raise TypeError(f"not a Value: {type(v).__name__}")


def jsonable_to_value(obj: Any) -> Value:
    """Decode parsed JSON.  Arrays become Seq; see the module docstring."""
    if isinstance(obj, bool):
        return VBool(obj)
    if isinstance(obj, int):
        if not (I64_MIN <= obj <= I64_MAX):
            raise ParseError(f"integer out of 64-bit signed range: {obj}")
        return VInt(obj)
    if isinstance(obj, str):
        return VStr(obj)
    if isinstance(obj, float):
        raise ParseError(f"non-integral number not supported: {obj!r}")
    if obj is None:
        raise ParseError("null is not a supported value")
    if isinstance(obj, list):
        return VSeq(jsonable_to_value(x) for x in obj)
    if isinstance(obj, dict):
        return VRec((k, jsonable_to_value(v)) for k, v in obj.items())
    raise ParseError(f"unsupported JSON construct: {type(obj).__name__}")


def value_to_json(v: Value) -> str:
    """Compact JSON text under the wire mapping; deterministic."""
    return json.dumps(value_to_jsonable(v), separators=(",", ":"),
                      ensure_ascii=False)


def json_to_value(text: str) -> Value:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    return jsonable_to_value(obj)


def render_event_arg(v: Value) -> str:
    """Event parameters render as JSON, except bare strings stay unquoted."""
    if isinstance(v, VStr):
        return v.text
    return value_to_json(v)


# --- update operators -------------------------------------------------

@dataclass(frozen=True)
class UpdateOp:
    """One recorded mutation: operator name, record path, arguments."""

    op: str
    path: tuple[str, ...] = ()
    args: tuple[Value, ...] = ()

    def __post_init__(self):
        if self.op not in OP_NAMES:
            raise UnknownOp(f"unknown operator: {self.op!r}")
        object.__setattr__(self, "path", tuple(self.path))
        object.__setattr__(self, "args", tuple(self.args))
        for seg in self.path:
            if not isinstance(seg, str):
                raise TypeError("path segments must be str")
        for a in self.args:
            _require_value(a)


OP_NAMES = frozenset([
    "Update", "Init", "Add", "Remove",
    "AddToBag", "RemoveFromBag", "Clear", "Append",
])


def _seq_as_set(seq: VSeq) -> VSet:
    return VSet(seq.items)


def _seq_as_bag(seq: VSeq) -> VBag | None:
    pairs = []
    for item in seq.items:
        if not (isinstance(item, VSeq) and len(item.items) == 2
                and isinstance(item.items[1], VInt)
                and item.items[1].n > 0):
            return None
        pairs.append((item.items[0], item.items[1].n))
    return VBag(pairs)


def _arity(op: str, args: tuple[Value, ...], want: int) -> None:
    if len(args) != want:
        raise OpTypeError(f"{op} takes {want} argument(s), got {len(args)}")


def _apply_here(v: Value, op: str, args: tuple[Value, ...]) -> Value:
    if op in ("Update", "Init"):
        _arity(op, args, 1)
        new = args[0]
        # The wire format cannot distinguish a set or bag from a
        # sequence, so a Seq replacing a Set or Bag is re-read in the
        # shape of the value it replaces (one level deep only).
        if isinstance(new, VSeq):
            if isinstance(v, VSet):
                return _seq_as_set(new)
            if isinstance(v, VBag):
                coerced = _seq_as_bag(new)
                if coerced is not None:
                    return coerced
        return new
    if op == "Add":
        _arity(op, args, 1)
        if not isinstance(v, VSet):
            raise OpTypeError(f"Add needs a set, got {type(v).__name__}")
        return VSet(v.items + (args[0],))
    if op == "Remove":
        _arity(op, args, 1)
        if not isinstance(v, VSet):
            raise OpTypeError(f"Remove needs a set, got {type(v).__name__}")
        return VSet(x for x in v.items if x != args[0])
    if op == "AddToBag":
        _arity(op, args, 1)
        if not isinstance(v, VBag):
            raise OpTypeError(f"AddToBag needs a bag, got {type(v).__name__}")
        return VBag(v.pairs + ((args[0], 1),))
    if op == "RemoveFromBag":
        _arity(op, args, 1)
        if not isinstance(v, VBag):
            raise OpTypeError(
                f"RemoveFromBag needs a bag, got {type(v).__name__}")
        if v.count(args[0]) == 0:
            raise BagUnderflow(
                f"RemoveFromBag: element not in bag: {value_to_json(args[0])}")
        return VBag((e, c - 1 if e == args[0] else c)
                    for e, c in v.pairs
                    if not (e == args[0] and c == 1))
    if op == "Clear":
        _arity(op, args, 0)
        if isinstance(v, VSet):
            return VSet()
        if isinstance(v, VBag):
            return VBag()
        raise OpTypeError(f"Clear needs a set or bag, got {type(v).__name__}")
    if op == "Append":
        _arity(op, args, 1)
        if not isinstance(v, VSeq):
            raise OpTypeError(f"Append needs a sequence, got {type(v).__name__}")
        return VSeq(v.items + (args[0],))
    raise UnknownOp(f"unknown operator: {op!r}")


def apply_update(v: Value, u: UpdateOp) -> Value:
    """Apply one update at its path and return the rewritten value.

    Paths descend record fields only; every segment must resolve
    (updates never create fields).  The empty path targets v itself.
    """
    if not u.path:
        return _apply_here(v, u.op, u.args)
    if not isinstance(v, VRec):
        raise PathError(
            f"path segment {u.path[0]!r} descends into {type(v).__name__}, "
            "not a record")
    head, rest = u.path[0], u.path[1:]
    sub = v.get(head)
    if sub is None:
        raise PathError(f"record has no field {head!r}")
    new_sub = apply_update(sub, UpdateOp(u.op, rest, u.args))
    return VRec((k, new_sub if k == head else old) for k, old in v.fields)


def apply_entry_updates(v: Value, updates: Sequence[UpdateOp]) -> Value:
    """Left-to-right fold of apply_update.

    Errors gain a 1-based "update N of M" annotation but keep their type.
    """
    out = v
    for i, u in enumerate(updates):
        try:
            out = apply_update(out, u)
        except (PathError, OpTypeError, BagUnderflow, UnknownOp) as exc:
            exc.args = (f"update {i + 1} of {len(updates)} ({u.op}): "
                        f"{exc.args[0]}",)
            raise
    return out
