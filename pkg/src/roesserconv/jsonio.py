"""JSON interchange for signals, kernels, realizations and reports.

Every array is written as a flat row-major list (channel index innermost) and
floats use Python's shortest round-trip ``repr``, so writing and re-reading a
document reproduces the object bit for bit. See ``docs/formats.md`` for the
field-by-field layout.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import FormatError, RoesserError
from .realization import RoesserRealization, StridedRealization
from .tensorcore import Kernel, Signal


def _floats(array: np.ndarray) -> list[float]:
    return [float(x) for x in np.asarray(array, dtype=np.float64).ravel()]


def _array(values: Any, shape: tuple[int, ...], what: str) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{what}: data is not a list of numbers") from exc
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{what}: data contains NaN or infinity")
    if arr.ndim != 1 or arr.size != int(np.prod(shape, dtype=int)):
        raise FormatError(f"{what}: expected {int(np.prod(shape, dtype=int))} values for shape {shape}, got {arr.size}")
    return arr.reshape(shape)


def _require(doc: dict, kind: str, *keys: str) -> None:
    if not isinstance(doc, dict):
        raise FormatError(f"expected a JSON object for {kind}")
    if doc.get("kind", kind) != kind:
        raise FormatError(f"expected kind {kind!r}, got {doc.get('kind')!r}")
    missing = [k for k in keys if k not in doc]
    if missing:
        raise FormatError(f"{kind}: missing fields {missing}")


def _extents(doc: dict, what: str) -> tuple[int, ...]:
    extents = doc["extents"]
    if not isinstance(extents, list) or len(extents) != doc["dim"] or any(
        not isinstance(e, int) or e < 0 for e in extents
    ):
        raise FormatError(f"{what}: extents {extents!r} do not match dim {doc['dim']}")
    return tuple(extents)


def signal_to_dict(signal: Signal) -> dict:
    return {
        "kind": "signal",
        "dim": signal.dim,
        "extents": list(signal.extent),
        "channels": signal.channels,
        "data": _floats(signal.data),
    }


def signal_from_dict(doc: dict) -> Signal:
    _require(doc, "signal", "dim", "extents", "channels", "data")
    extents = _extents(doc, "signal")
    shape = tuple(n + 1 for n in extents) + (int(doc["channels"]),)
    return Signal(_array(doc["data"], shape, "signal"))


def kernel_to_dict(kernel: Kernel) -> dict:
    return {
        "kind": "kernel",
        "dim": kernel.dim,
        "extents": list(kernel.extents),
        "c_in": kernel.c_in,
        "c_out": kernel.c_out,
        "data": _floats(kernel.coeffs),
        "bias": _floats(kernel.bias),
    }


def kernel_from_dict(doc: dict) -> Kernel:
    _require(doc, "kernel", "dim", "extents", "c_in", "c_out", "data")
    extents = _extents(doc, "kernel")
    c_out, c_in = int(doc["c_out"]), int(doc["c_in"])
    coeffs = _array(doc["data"], tuple(r + 1 for r in extents) + (c_out, c_in), "kernel")
    bias = _array(doc.get("bias", [0.0] * c_out), (c_out,), "kernel bias")
    return Kernel(coeffs, bias)


def _block(array: np.ndarray) -> dict:
    return {"shape": list(array.shape), "data": _floats(array)}


def _unblock(doc: dict, key: str) -> np.ndarray:
    if key not in doc:
        raise FormatError(f"realization: missing block {key!r}")
    entry = doc[key]
    if not isinstance(entry, dict) or "shape" not in entry or "data" not in entry:
        raise FormatError(f"realization: block {key!r} needs 'shape' and 'data'")
    return _array(entry["data"], tuple(entry["shape"]), f"block {key}")


def realization_to_dict(realization: RoesserRealization) -> dict:
    d = realization.dim
    if d > 9:
        raise FormatError("block keys like 'A_kl' are only defined for dim <= 9")
    doc: dict[str, Any] = {
        "kind": "roesser",
        "dim": d,
        "state_dims": list(realization.state_dims),
        "input_dim": realization.input_dim,
        "output_dim": realization.output_dim,
    }
    for k in range(d):
        for l in range(d):
            doc[f"A_{k + 1}{l + 1}"] = _block(realization.a_block(k, l))
    for k in range(d):
        doc[f"B_{k + 1}"] = _block(realization.b_block(k))
    for k in range(d):
        doc[f"C_{k + 1}"] = _block(realization.c_block(k))
    doc["D"] = _block(realization.D)
    for k in range(d):
        doc[f"f_{k + 1}"] = _block(realization.f_block(k))
    doc["g"] = _block(realization.g)
    return doc


def realization_from_dict(doc: dict) -> RoesserRealization:
    _require(doc, "roesser", "dim", "state_dims")
    d = int(doc["dim"])
    dims = tuple(int(n) for n in doc["state_dims"])
    if len(dims) != d:
        raise FormatError(f"realization: state_dims {dims} do not match dim {d}")
    D = _unblock(doc, "D")
    if D.ndim != 2:
        raise FormatError("realization: D must be a matrix")
    n_y, n_u = D.shape
    for key, want in (("input_dim", n_u), ("output_dim", n_y)):
        if key in doc and int(doc[key]) != want:
            raise FormatError(f"realization: {key}={doc[key]} but D is {D.shape}")

    def checked(key, shape):
        arr = _unblock(doc, key)
        if arr.shape != shape:
            raise FormatError(f"realization: block {key} has shape {arr.shape}, expected {shape}")
        return arr

    A = np.block([[checked(f"A_{k + 1}{l + 1}", (dims[k], dims[l])) for l in range(d)] for k in range(d)])
    B = np.vstack([checked(f"B_{k + 1}", (dims[k], n_u)) for k in range(d)])
    C = np.hstack([checked(f"C_{k + 1}", (n_y, dims[k])) for k in range(d)])
    f = np.concatenate([checked(f"f_{k + 1}", (dims[k],)) for k in range(d)])
    g = checked("g", (n_y,))
    return RoesserRealization(dims, A, B, C, D, f, g)


def strided_to_dict(realization: StridedRealization) -> dict:
    return {
        "kind": "strided_roesser",
        "stride": list(realization.stride),
        "patch_order": realization.patch_order,
        "realization": realization_to_dict(realization.inner),
    }


def strided_from_dict(doc: dict) -> StridedRealization:
    _require(doc, "strided_roesser", "stride", "realization")
    inner = realization_from_dict(doc["realization"])
    return StridedRealization(inner, tuple(doc["stride"]), doc.get("patch_order", "lexicographic"))


def to_dict(obj) -> dict:
    if isinstance(obj, Signal):
        return signal_to_dict(obj)
    if isinstance(obj, Kernel):
        return kernel_to_dict(obj)
    if isinstance(obj, RoesserRealization):
        return realization_to_dict(obj)
    if isinstance(obj, StridedRealization):
        return strided_to_dict(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


_READERS = {
    "signal": signal_from_dict,
    "kernel": kernel_from_dict,
    "roesser": realization_from_dict,
    "strided_roesser": strided_from_dict,
}


def from_dict(doc: dict, kind: str | None = None):
    """Rebuild an object from its JSON document, dispatching on ``kind``."""
    if not isinstance(doc, dict):
        raise FormatError("expected a JSON object")
    kind = kind or doc.get("kind")
    if kind not in _READERS:
        raise FormatError(f"unknown document kind {kind!r}")
    try:
        return _READERS[kind](doc)
    except RoesserError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed {kind} document: {exc}") from exc


def dumps(obj) -> str:
    return json.dumps(to_dict(obj), allow_nan=False) + "\n"


def loads(text: str, kind: str | None = None):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    return from_dict(doc, kind)


def save(obj, path: str | Path) -> None:
    Path(path).write_text(dumps(obj))


def load(path: str | Path, kind: str | None = None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return loads(text, kind)
