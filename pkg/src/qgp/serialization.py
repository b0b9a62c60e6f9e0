"""JSON/CSV encoding of matrices, states, maps and channel spec files.

Complex arrays become nested lists whose innermost items are ``[re, im]``
pairs. Floats are written with Python's shortest round-trip repr, so
``parse(serialize(x))`` reproduces every bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from urllib.parse import parse_qsl

import numpy as np

from .channels import (
    KrausChannel,
    SideInfoChannel,
    defective_memory_channel,
    depolarizing_channel,
    identity_channel,
    pauli_reveal_channel,
)
from .exceptions import QGPError, StateValidationError
from .tensor_core import DensityOperator, Layout, LinearMap, PureState

SPEC_ROLES = ("A'", "S", "S'", "B")


class SpecParseError(QGPError, ValueError):
    """Malformed channel spec; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


# ---------------------------------------------------------------------------
# generic encoders


def encode_complex(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def decode_complex(obj, field: str = "value") -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise SpecParseError(field, "expected nested numeric [re, im] arrays") from None
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise SpecParseError(field, f"innermost entries must be [re, im] pairs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SpecParseError(field, "contains non-finite numbers")
    out = np.empty(arr.shape[:-1], dtype=complex)
    out.real = arr[..., 0]
    out.imag = arr[..., 1]
    return out


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_complex(obj)
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if not math.isfinite(x):
            return repr(x)
        return x
    return obj


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def csv_text(rows) -> str:
    """CSV from an iterable whose first item is the header."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def layout_to_list(layout: Layout) -> list:
    return [[lab, d] for lab, d in layout]


def layout_from_list(obj, field: str = "layout") -> Layout:
    if not isinstance(obj, list):
        raise SpecParseError(field, "expected a list of [label, dim] pairs")
    items = []
    for k, item in enumerate(obj):
        if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], str)
                and isinstance(item[1], int) and not isinstance(item[1], bool)):
            raise SpecParseError(f"{field}[{k}]", "expected [label, dim] with a string label and integer dim")
        items.append((item[0], item[1]))
    try:
        return Layout(items)
    except ValueError as e:
        raise SpecParseError(field, str(e)) from None


def linear_map_to_dict(m: LinearMap) -> dict:
    return {"in_layout": layout_to_list(m.in_layout), "out_layout": layout_to_list(m.out_layout),
            "kind": m.kind, "matrix": encode_complex(m.matrix)}


def linear_map_from_dict(d: dict) -> LinearMap:
    return LinearMap(decode_complex(d["matrix"], "matrix"), layout_from_list(d["in_layout"], "in_layout"),
                     layout_from_list(d["out_layout"], "out_layout"), d.get("kind", "isometry"))


def density_to_dict(rho: DensityOperator) -> dict:
    return {"layout": layout_to_list(rho.layout), "matrix": encode_complex(rho.matrix)}


def density_from_dict(d: dict) -> DensityOperator:
    if not isinstance(d, dict):
        raise SpecParseError("state", "expected an object with layout and matrix")
    for key in ("layout", "matrix"):
        if key not in d:
            raise SpecParseError(key, "missing")
    layout = layout_from_list(d["layout"])
    m = decode_complex(d["matrix"], "matrix")
    if m.shape != (layout.total_dim, layout.total_dim):
        raise SpecParseError("matrix", f"shape {m.shape} does not match layout dimension {layout.total_dim}")
    try:
        return DensityOperator(m, layout)
    except StateValidationError as e:
        raise SpecParseError("matrix", str(e)) from None


# ---------------------------------------------------------------------------
# channel spec files


@dataclass
class ChannelSpecFile:
    """On-disk description of a single-use channel with side information.

    ``layouts`` maps each role ``A'``, ``S``, ``S'``, ``B`` to its dimension.
    Kraus operators act on ``A' (x) S`` (``A'`` slowest) and the side state
    is an amplitude vector on ``S (x) S'``.
    """

    name: str
    layouts: dict
    kraus: np.ndarray
    side_state: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, ChannelSpecFile):
            return NotImplemented
        return self.to_json_dict() == other.to_json_dict()

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "layouts": [[role, int(self.layouts[role])] for role in SPEC_ROLES],
            "kraus": encode_complex(self.kraus),
            "side_state": encode_complex(self.side_state),
            "metadata": _plain(self.metadata),
        }

    def to_channel(self) -> SideInfoChannel:
        d = self.layouts
        in_layout = [("A'", d["A'"]), ("S", d["S"])]
        try:
            ch = KrausChannel(self.kraus, in_layout, [("B", d["B"])], check=False)
            side = PureState(self.side_state, [("S", d["S"]), ("S'", d["S'"])], check=False)
            return SideInfoChannel(ch, side, name=self.name)
        except StateValidationError as e:
            fld = "side_state" if "side state" in str(e) else "kraus"
            raise SpecParseError(fld, str(e)) from None

    @classmethod
    def from_channel(cls, ch: SideInfoChannel, metadata: dict | None = None) -> "ChannelSpecFile":
        if ch.n != 1:
            raise ValueError("spec files describe single-use channels")
        use = ch.uses[0]
        comp = ch.channel
        if comp.in_layout.labels != (use.a, use.s) or ch.side_state.layout.labels != (use.s, use.sp):
            raise ValueError("channel must be ordered as (A', S) -> B with side state on (S, S')")
        layouts = {"A'": comp.in_layout.dim(use.a), "S": comp.in_layout.dim(use.s),
                   "S'": ch.side_state.layout.dim(use.sp), "B": comp.out_layout.total_dim}
        return cls(ch.name, layouts, comp.kraus_ops.copy(), ch.side_state.vector.copy(), dict(metadata or {}))


def serialize_spec(spec: ChannelSpecFile) -> str:
    return dumps(spec.to_json_dict())


def parse_spec(text: str) -> ChannelSpecFile:
    """Parse spec JSON with diagnostics naming the offending line or field."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecParseError(f"line {e.lineno} column {e.colno}", e.msg) from None
    if not isinstance(obj, dict):
        raise SpecParseError("<root>", "expected a JSON object")
    for key in ("name", "layouts", "kraus", "side_state"):
        if key not in obj:
            raise SpecParseError(key, "missing required field")
    unknown = set(obj) - {"name", "layouts", "kraus", "side_state", "metadata"}
    if unknown:
        raise SpecParseError(sorted(unknown)[0], "unknown field")
    if not isinstance(obj["name"], str):
        raise SpecParseError("name", "expected a string")
    lay = obj["layouts"]
    if not isinstance(lay, list):
        raise SpecParseError("layouts", "expected a list of [label, dim] pairs")
    layouts = {}
    for k, item in enumerate(lay):
        if not (isinstance(item, list) and len(item) == 2 and item[0] in SPEC_ROLES
                and isinstance(item[1], int) and not isinstance(item[1], bool) and item[1] >= 1):
            raise SpecParseError(f"layouts[{k}]", f"expected [role, dim] with role in {list(SPEC_ROLES)} and dim >= 1")
        if item[0] in layouts:
            raise SpecParseError(f"layouts[{k}]", f"duplicate role {item[0]!r}")
        layouts[item[0]] = item[1]
    for role in SPEC_ROLES:
        if role not in layouts:
            raise SpecParseError("layouts", f"missing role {role!r}")
    if not isinstance(obj["kraus"], list) or not obj["kraus"]:
        raise SpecParseError("kraus", "expected a non-empty list of matrices")
    din, dout = layouts["A'"] * layouts["S"], layouts["B"]
    mats = []
    for k, m in enumerate(obj["kraus"]):
        mat = decode_complex(m, f"kraus[{k}]")
        if mat.shape != (dout, din):
            raise SpecParseError(f"kraus[{k}]", f"shape {mat.shape}, expected ({dout}, {din})")
        mats.append(mat)
    side = decode_complex(obj["side_state"], "side_state")
    d_side = layouts["S"] * layouts["S'"]
    if side.shape != (d_side,):
        raise SpecParseError("side_state", f"shape {side.shape}, expected ({d_side},)")
    meta = obj.get("metadata", {})
    if not isinstance(meta, dict):
        raise SpecParseError("metadata", "expected an object")
    spec = ChannelSpecFile(obj["name"], layouts, np.array(mats), side, meta)
    spec.to_channel()
    return spec


BUILTINS = {
    "pauli_reveal": (pauli_reveal_channel, {}),
    "defective_memory": (defective_memory_channel, {"p": 0.5, "depol": 0.0}),
    "identity": (identity_channel, {"dim": 2}),
    "depolarizing": (depolarizing_channel, {"depol": 0.5}),
}


def builtin_channel(ref: str) -> tuple[SideInfoChannel, dict]:
    """Resolve ``builtin:<name>?k=v&...``; returns the channel and the parameters used."""
    body = ref[len("builtin:"):] if ref.startswith("builtin:") else ref
    name, _, query = body.partition("?")
    if name not in BUILTINS:
        raise SpecParseError("builtin", f"unknown channel {name!r}; choose from {sorted(BUILTINS)}")
    factory, defaults = BUILTINS[name]
    params = dict(defaults)
    for key, val in parse_qsl(query, keep_blank_values=True, strict_parsing=bool(query)):
        if key not in defaults:
            raise SpecParseError(f"builtin:{name}", f"unknown parameter {key!r}")
        try:
            params[key] = int(val) if isinstance(defaults[key], int) else float(val)
        except ValueError:
            raise SpecParseError(f"builtin:{name}.{key}", f"not a number: {val!r}") from None
    try:
        ch = factory(**params)
    except ValueError as e:
        raise SpecParseError(f"builtin:{name}", str(e)) from None
    return ch, {"builtin": name, **params}


def load_channel(ref: str) -> tuple[SideInfoChannel, dict]:
    """A ``builtin:`` reference or a path to a spec file."""
    if ref.startswith("builtin:"):
        return builtin_channel(ref)
    try:
        with open(ref, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise SpecParseError("spec", f"cannot read {ref!r}: {e.strerror}") from None
    spec = parse_spec(text)
    return spec.to_channel(), {"spec_file": spec.name, "metadata": spec.metadata}
