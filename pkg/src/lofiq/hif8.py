"""8-bit adaptive-precision format: mantissa width shrinks as |exponent| grows.

Quantization maps a real x with binary exponent e = floor(log2|x|) onto the
grid of step 2**(e - n_m), where the mantissa width n_m is 3 for |e| <= 3,
2 for |e| <= 7, 1 for |e| <= 15 and 0 beyond; the grid index is
floor(|x| / 2**(e - n_m) + 0.5). Results saturate at the format maximum
2**15; nonzero magnitudes below the minimum 2**-22 land on +-2**-22.

The exponent is extracted from the binary representation of |x| itself
(never a floating log); the epsilon parameter only pins the x == 0 path,
where the grid index rounds to 0.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._accel import USE_NUMBA, njit, prange
from .codebook import Codebook, FpFormatSpec
from .tensor import Tensor, group_reduce_layout, groups_to_axis

__all__ = [
    "MAX_NORMAL",
    "MIN_NORMAL",
    "MAX_SUBNORMAL",
    "MIN_SUBNORMAL",
    "DEFAULT_EPS",
    "DEFAULT_K",
    "Hif8Value",
    "hif8_decompose",
    "hif8_quantize_value",
    "hif8_quantize",
    "hif8_enumerate",
    "hif8_scaled_quantize",
    "hif8_scaled_dequantize",
    "ScaledHif8Quantized",
]

MAX_NORMAL = 2.0**15
MIN_NORMAL = 2.0**-15
MAX_SUBNORMAL = 2.0**-16
MIN_SUBNORMAL = 2.0**-22
DEFAULT_EPS = 2.0**-45

# Target maximum magnitude for the scaled variant, by tensor role.
DEFAULT_K = {"weight": 16.0, "activation": 4.0, "kv": 1.0}


def _mantissa_bits(abs_e):
    if abs_e <= 3:
        return 3
    if abs_e <= 7:
        return 2
    if abs_e <= 15:
        return 1
    return 0


@dataclass(frozen=True)
class Hif8Value:
    """Decomposed quantization of one real: sign * code * 2**(exponent - mantissa_bits)."""

    sign: int  # +1 or -1
    exponent: int
    mantissa_bits: int
    code: int  # grid index in [0, 2**(mantissa_bits + 1)]

    @property
    def value(self):
        return self.sign * math.ldexp(self.code, self.exponent - self.mantissa_bits)


def hif8_decompose(x, eps=DEFAULT_EPS):
    """Sign/exponent/width/code fields of the quantization of ``x``.

    Saturated and underflowed inputs report the fields of the clamp target
    (2**15 and 2**-22), so .value always equals hif8_quantize_value(x).
    """
    sign = -1 if x < 0 else 1
    ax = abs(x)
    if ax == 0.0:
        e = math.floor(math.log2(eps))
        return Hif8Value(sign, e, _mantissa_bits(abs(e)), 0)
    _, be = math.frexp(ax)
    e = be - 1
    if e > 15:
        return Hif8Value(sign, 15, 1, 2)
    if e < -22:
        return Hif8Value(sign, -22, 0, 1)
    nm = _mantissa_bits(abs(e))
    code = int(math.floor(math.ldexp(ax, nm - e) + 0.5))
    if math.ldexp(code, e - nm) > MAX_NORMAL:
        return Hif8Value(sign, 15, 1, 2)
    return Hif8Value(sign, e, nm, code)


def hif8_quantize_value(x, eps=DEFAULT_EPS):
    """Quantize one finite real; scalar twin of the array kernel."""
    ax = abs(x)
    if ax == 0.0:
        # eps pins the zero-input exponent; the grid index floor(0 + 0.5)
        # rounds to 0 for any eps below the subnormal range.
        return 0.0
    _, be = math.frexp(ax)
    e = be - 1
    if e > 15:  # any grid point of these binades exceeds the format maximum
        return math.copysign(MAX_NORMAL, x)
    if e < -22:
        return math.copysign(MIN_SUBNORMAL, x)
    nm = _mantissa_bits(abs(e))
    xh = math.floor(math.ldexp(ax, nm - e) + 0.5)
    val = math.ldexp(xh, e - nm)
    if val > MAX_NORMAL:
        val = MAX_NORMAL
    return math.copysign(val, x)


def _hif8_numpy(arr):
    ax = np.abs(arr)
    _, e = np.frexp(ax)
    e = e.astype(np.int64) - 1
    ae = np.abs(e)
    nm = np.select([ae <= 3, ae <= 7, ae <= 15], [3, 2, 1], default=0)
    xh = np.floor(np.ldexp(ax, nm - e) + 0.5)
    val = np.ldexp(xh, e - nm)
    val = np.where((ax > 0) & (e < -22), MIN_SUBNORMAL, val)
    np.minimum(val, MAX_NORMAL, out=val)
    return np.copysign(val, arr)


@njit(cache=True, parallel=True)
def _hif8_numba(arr, out):  # pragma: no cover - jitted
    for i in prange(arr.size):
        x = arr[i]
        ax = abs(x)
        if ax == 0.0:
            out[i] = 0.0
            continue
        _, be = math.frexp(ax)
        e = be - 1
        if e > 15:
            out[i] = -MAX_NORMAL if x < 0 else MAX_NORMAL
            continue
        if e < -22:
            out[i] = -MIN_SUBNORMAL if x < 0 else MIN_SUBNORMAL
            continue
        ae = abs(e)
        if ae <= 3:
            nm = 3
        elif ae <= 7:
            nm = 2
        elif ae <= 15:
            nm = 1
        else:
            nm = 0
        xh = math.floor(math.ldexp(ax, nm - e) + 0.5)
        val = math.ldexp(xh, e - nm)
        if val > MAX_NORMAL:
            val = MAX_NORMAL
        out[i] = -val if x < 0 else val


def _quantize_array(arr):
    if USE_NUMBA and arr.size >= 4096:
        flat = np.ascontiguousarray(arr, dtype=np.float64).ravel()
        out = np.empty_like(flat)
        _hif8_numba(flat, out)
        return out.reshape(arr.shape)
    return _hif8_numpy(np.asarray(arr, dtype=np.float64))


def hif8_quantize(t):
    """Elementwise quantize-dequantize of a whole tensor."""
    arr = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
    out = _quantize_array(arr)
    return Tensor(out, getattr(t, "name", None))


def hif8_enumerate():
    """Full sorted codebook of representable values.

    Built straight from the legal (e, n_m, grid index) space: pure powers of
    two below the normal range, then each normal binade at its mantissa
    width; values above the saturation bound are not representable.
    """
    vals = [0.0]
    codes = [0]
    for i, e in enumerate(range(-22, -15)):  # 2**-22 .. 2**-16
        vals.append(math.ldexp(1.0, e))
        codes.append(i + 1)
    for e in range(-15, 16):
        nm = _mantissa_bits(abs(e))
        for xh in range(2**nm, 2 ** (nm + 1)):
            v = math.ldexp(xh, e - nm)
            if v <= MAX_NORMAL:
                vals.append(v)
                codes.append(xh)
    pos = np.array(vals)
    pos_codes = np.array(codes, dtype=np.int64)
    values = np.concatenate([-pos[:0:-1], pos])
    all_codes = np.concatenate([pos_codes[:0:-1], pos_codes])
    spec = FpFormatSpec("hif8", 5, 3, bias=15)
    return Codebook(spec, values, all_codes)


@dataclass(frozen=True)
class ScaledHif8Quantized:
    """Per-group scaled quantization record; dequantization divides by scales."""

    values: np.ndarray  # quantized values of the scaled tensor, original shape
    scales: np.ndarray  # one positive scale per group along axis
    K: float
    axis: int
    eps: float
    name: str = None

    @property
    def shape(self):
        return self.values.shape


def hif8_scaled_quantize(t, axis, K, eps=1e-12):
    """Scale each group along ``axis`` to target max magnitude K, then quantize.

    The per-group scale is K / (max|x| + eps); a group of zeros gets a huge
    scale but every element still quantizes to zero, so dequantization
    reproduces zeros.
    """
    if K <= 0:
        raise ValueError("K must be positive")
    arr = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
    grouped, moved_shape = group_reduce_layout(arr, axis)
    gmax = np.max(np.abs(grouped), axis=1)
    scales = K / (gmax + eps)
    scaled = grouped * scales[:, None]
    values = groups_to_axis(_quantize_array(scaled), moved_shape, axis)
    return ScaledHif8Quantized(values, scales, float(K), axis, float(eps),
                               getattr(t, "name", None))


def hif8_scaled_dequantize(q):
    grouped, moved_shape = group_reduce_layout(q.values, q.axis)
    out = grouped / q.scales[:, None]
    return Tensor(groups_to_axis(out, moved_shape, q.axis), q.name)
