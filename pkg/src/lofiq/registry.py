"""Format selectors and role conventions shared by the harness and the CLI.

Selector grammar (one canonical string per codec, parameters as suffixes):

    int8[:sym|:asym][:axis=N]      integer baseline, 8 or 4 bit
    int4[:sym|:asym][:axis=N]
    e4m3 | e5m2 | e3m2 | e2m3 | e2m1   direct elementwise cast
    mx:<elem>[:k=N][:axis=N]       block scaling; elem in e4m3,e5m2,e3m2,e2m3,e2m1,int8
    mxfp8-e4m3 | mxfp8-e5m2 | mxfp6-e3m2 | mxfp6-e2m3 | mxfp4 | mxint8   mx aliases
    nvfp4[:axis=N]
    hif8
    hif8-scaled[:K=X][:axis=N]
    hif4[:axis=N][:mode=literal|halfrange]

Role conventions (defaults, overridable with axis=):
  per-channel/per-axis grouping: weights group along the last axis (output
  channels), activations and KV states along axis 0 (tokens). Block formats
  run along the reduction axis: axis 0 for weights, the last axis for
  activations and KV states. Integer codecs default to symmetric for
  weights and asymmetric (zero-point) elsewhere.
"""

import numpy as np

from . import hif4, hif8, intquant, mx, nvfp4
from .codebook import builtin_spec, enumerate_codebook, project
from .errors import UnknownFormat
from .tensor import Tensor

__all__ = ["ROLES", "parse_format", "group_axis_for", "block_axis_for"]


def _as_array(t):
    return t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)

ROLES = ("weight", "activation", "kv")

_MX_ALIASES = {
    "mxfp8-e4m3": "e4m3",
    "mxfp8-e5m2": "e5m2",
    "mxfp6-e3m2": "e3m2",
    "mxfp6-e2m3": "e2m3",
    "mxfp4": "e2m1",
    "mxint8": "int8",
}
_CAST_NAMES = ("e4m3", "e5m2", "e3m2", "e2m3", "e2m1")


def _check_role(role):
    if role not in ROLES:
        raise ValueError(f"role must be one of {ROLES}, got {role!r}")


def group_axis_for(role, ndim):
    """Axis whose slices form the scale groups (per-channel / per-token)."""
    _check_role(role)
    if ndim <= 1:
        return 0
    return ndim - 1 if role == "weight" else 0


def block_axis_for(role, ndim):
    """Axis blocks run along (the reduction dimension of a matmul)."""
    _check_role(role)
    if ndim <= 1:
        return 0
    return 0 if role == "weight" else ndim - 1


class _Codec:
    selector = ""

    def pad_multiple(self):
        return None

    def pad_axis(self, role, ndim):
        return None

    def granularity(self, role, ndim):
        raise NotImplementedError

    def config(self, role):
        return {}

    def reconstruct(self, arr, role):
        raise NotImplementedError

    def __repr__(self):
        return f"<codec {self.selector}>"


class IntCodec(_Codec):
    def __init__(self, bits, mode=None, axis=None):
        self.bits = bits
        self.mode = mode
        self.axis = axis
        suffix = f":{mode}" if mode else ""
        suffix += f":axis={axis}" if axis is not None else ""
        self.selector = f"int{bits}{suffix}"

    def _resolve(self, role, ndim):
        mode = self.mode or ("sym" if role == "weight" else "asym")
        axis = self.axis if self.axis is not None else group_axis_for(role, ndim)
        return mode, axis

    def granularity(self, role, ndim):
        mode, axis = self._resolve(role, ndim)
        kind = "per-channel" if role == "weight" else "per-token"
        return f"{kind}(axis={axis},{mode})"

    def config(self, role):
        mode, _ = self._resolve(role, 2)
        return {"bits": self.bits, "mode": mode}

    def reconstruct(self, arr, role):
        arr = _as_array(arr)
        mode, axis = self._resolve(role, arr.ndim)
        if mode == "sym":
            q = intquant.int_quantize_symmetric(arr, axis, self.bits)
        else:
            q = intquant.int_quantize_asymmetric(arr, axis, self.bits)
        return intquant.int_dequantize(q).data


class CastCodec(_Codec):
    def __init__(self, name):
        self.selector = name
        self.cb = enumerate_codebook(builtin_spec(name))

    def granularity(self, role, ndim):
        return "elementwise"

    def reconstruct(self, arr, role):
        return project(self.cb, _as_array(arr))


class MxCodec(_Codec):
    def __init__(self, element, k=mx.DEFAULT_BLOCK, axis=None):
        self.element = element
        self.k = k
        self.axis = axis
        suffix = f":k={k}" if k != mx.DEFAULT_BLOCK else ""
        suffix += f":axis={axis}" if axis is not None else ""
        self.selector = f"mx:{element}{suffix}"

    def pad_multiple(self):
        return self.k

    def _axis(self, role, ndim):
        return self.axis if self.axis is not None else block_axis_for(role, ndim)

    def pad_axis(self, role, ndim):
        return self._axis(role, ndim)

    def granularity(self, role, ndim):
        return f"block(k={self.k},axis={self._axis(role, ndim)})"

    def config(self, role):
        return {"element": self.element, "k": self.k}

    def reconstruct(self, arr, role):
        arr = _as_array(arr)
        q = mx.mx_quantize(arr, self._axis(role, arr.ndim), self.element, self.k)
        return mx.mx_dequantize(q).data


class Nvfp4Codec(_Codec):
    def __init__(self, axis=None):
        self.axis = axis
        self.selector = "nvfp4" + (f":axis={axis}" if axis is not None else "")

    def pad_multiple(self):
        return nvfp4.BLOCK

    def _axis(self, role, ndim):
        return self.axis if self.axis is not None else block_axis_for(role, ndim)

    def pad_axis(self, role, ndim):
        return self._axis(role, ndim)

    def granularity(self, role, ndim):
        return f"per-tensor+block(k=16,axis={self._axis(role, ndim)})"

    def config(self, role):
        return {"k": nvfp4.BLOCK}

    def reconstruct(self, arr, role):
        arr = _as_array(arr)
        q = nvfp4.nvfp4_quantize(arr, self._axis(role, arr.ndim))
        return nvfp4.nvfp4_dequantize(q).data


class Hif8Codec(_Codec):
    selector = "hif8"

    def granularity(self, role, ndim):
        return "elementwise"

    def reconstruct(self, arr, role):
        return hif8.hif8_quantize(_as_array(arr)).data


class ScaledHif8Codec(_Codec):
    def __init__(self, K=None, axis=None):
        self.K = K
        self.axis = axis
        suffix = f":K={K:g}" if K is not None else ""
        suffix += f":axis={axis}" if axis is not None else ""
        self.selector = f"hif8-scaled{suffix}"

    def _resolve(self, role, ndim):
        K = self.K if self.K is not None else hif8.DEFAULT_K[role]
        axis = self.axis if self.axis is not None else group_axis_for(role, ndim)
        return K, axis

    def granularity(self, role, ndim):
        K, axis = self._resolve(role, ndim)
        return f"per-axis(K={K:g},axis={axis})"

    def config(self, role):
        K, _ = self._resolve(role, 2)
        return {"K": K}

    def reconstruct(self, arr, role):
        arr = _as_array(arr)
        K, axis = self._resolve(role, arr.ndim)
        q = hif8.hif8_scaled_quantize(arr, axis, K)
        return hif8.hif8_scaled_dequantize(q).data


class Hif4Codec(_Codec):
    def __init__(self, axis=None, mode="literal"):
        self.axis = axis
        self.mode = mode
        suffix = f":axis={axis}" if axis is not None else ""
        suffix += f":mode={mode}" if mode != "literal" else ""
        self.selector = f"hif4{suffix}"

    def pad_multiple(self):
        return hif4.BLOCK

    def _axis(self, role, ndim):
        return self.axis if self.axis is not None else block_axis_for(role, ndim)

    def pad_axis(self, role, ndim):
        return self._axis(role, ndim)

    def granularity(self, role, ndim):
        return f"hier(64/8/4,axis={self._axis(role, ndim)})"

    def config(self, role):
        return {"mode": self.mode}

    def reconstruct(self, arr, role):
        arr = _as_array(arr)
        q = hif4.hif4_quantize(arr, self._axis(role, arr.ndim), self.mode)
        return hif4.hif4_dequantize(q).data


def _parse_params(parts, selector):
    """Split trailing 'key=value' / bare-flag parameters."""
    params = {}
    flags = []
    for part in parts:
        if "=" in part:
            key, _, val = part.partition("=")
            params[key] = val
        else:
            flags.append(part)
    return params, flags


def _as_int(params, key, selector):
    try:
        return int(params[key])
    except ValueError as exc:
        raise UnknownFormat(f"{selector!r}: bad integer for {key}") from exc


def parse_format(selector):
    """Parse one selector string into a codec; raises UnknownFormat."""
    sel = selector.strip()
    parts = sel.split(":")
    head = parts[0].lower()
    params, flags = _parse_params(parts[1:], sel)
    axis = _as_int(params, "axis", sel) if "axis" in params else None

    try:
        if head in ("int8", "int4"):
            mode = None
            for flag in flags:
                if flag in ("sym", "asym"):
                    mode = flag
                else:
                    raise UnknownFormat(f"{sel!r}: unknown flag {flag!r}")
            return IntCodec(int(head[3]), mode, axis)
        if head in _CAST_NAMES and not parts[1:]:
            return CastCodec(head)
        if head == "mx":
            if not flags:
                raise UnknownFormat(f"{sel!r}: mx needs an element type, e.g. mx:e2m1")
            element = flags[0].lower()
            mx.resolve_element(element)
            k = _as_int(params, "k", sel) if "k" in params else mx.DEFAULT_BLOCK
            return MxCodec(element, k, axis)
        if head in _MX_ALIASES:
            k = _as_int(params, "k", sel) if "k" in params else mx.DEFAULT_BLOCK
            return MxCodec(_MX_ALIASES[head], k, axis)
        if head == "nvfp4":
            return Nvfp4Codec(axis)
        if head == "hif8":
            return Hif8Codec()
        if head == "hif8-scaled":
            K = float(params["K"]) if "K" in params else (
                float(params["k"]) if "k" in params else None)
            return ScaledHif8Codec(K, axis)
        if head == "hif4":
            return Hif4Codec(axis, params.get("mode", "literal"))
    except UnknownFormat:
        raise
    except (ValueError, KeyError) as exc:
        raise UnknownFormat(f"bad format selector {selector!r}: {exc}") from exc
    raise UnknownFormat(f"unknown format {selector!r}")
