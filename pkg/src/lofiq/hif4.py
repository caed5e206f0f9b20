"""Three-level hierarchical 4-bit quantization over 64-element blocks.

Each 64-element block is reshaped to 8 sub-blocks x 2 micro-pairs x 4
elements. Max-abs reductions run innermost-out (A3 per micro-block, A2 per
sub-block, A1 per block); the block scale S1 = M1 * 2**(E1-2) encodes
A1 / 7 in an unsigned mantissa-exponent form clipped to [2**-48, 1.5*2**15],
and the sub-block / micro-block refinements are single-bit exponents E2, E3.
Element magnitudes are normalized by S1*S2*S3, clipped to 1.75 and rounded
onto the quarter-step grid {0 .. 7} / 4.

Dequantization is sign * M1 * 2**(E1+E2+E3-4) * Xhat: integer exponent
addition plus a shift, bit-identical to multiplying the three scales.

The literal sub-scale rule sets E2 = 1 only when A2/S1 clips at exactly 4
(and E3 likewise at 2); ``subscale_mode="halfrange"`` switches both
thresholds to half the range for sensitivity studies.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._accel import USE_NUMBA, njit, prange
from .tensor import Tensor, axis_to_blocks, blocks_to_axis

__all__ = ["BLOCK", "Q_MIN", "Q_MAX", "Hif4Quantized", "hif4_quantize", "hif4_dequantize"]

BLOCK = 64
Q_MIN = 2.0**-48
Q_MAX = 1.5 * 2.0**15
_MODES = ("literal", "halfrange")


@dataclass(frozen=True)
class Hif4Quantized:
    axis: int
    shape: tuple
    e1: np.ndarray  # (B,) block exponents
    m1: np.ndarray  # (B,) block mantissae, 4..8
    e2: np.ndarray  # (B, 8) sub-block exponent bits
    e3: np.ndarray  # (B, 8, 2) micro-block exponent bits
    signs: np.ndarray  # (B, 8, 2, 4) in {-1, +1}
    xhat: np.ndarray  # (B, 8, 2, 4) element codes 0..7
    subscale_mode: str = "literal"
    name: str = None


def _quantize_numpy(X, halfrange):
    A = np.abs(X)
    A3 = A.max(axis=3)
    A2 = A3.max(axis=2)
    A1 = A2.max(axis=1)

    At1 = np.clip(A1 / 7.0, Q_MIN, Q_MAX)
    _, ex = np.frexp(At1)
    E1 = ex.astype(np.int64) - 1
    M1 = np.floor(np.ldexp(At1, 2 - E1) + 0.5).astype(np.int64)  # 4..8
    S1 = np.ldexp(M1.astype(np.float64), E1 - 2)

    At2 = A2 / S1[:, None]
    t2 = 2.0 if halfrange else 4.0
    E2 = (At2 >= t2).astype(np.int64)

    At3 = A3 / np.ldexp(S1[:, None, None], E2[:, :, None])
    t3 = 1.0 if halfrange else 2.0
    E3 = (At3 >= t3).astype(np.int64)

    denom = np.ldexp(S1[:, None, None, None], (E2[:, :, None] + E3)[..., None])
    Xt = np.minimum(A / denom, 1.75)
    Xh = np.floor(4.0 * Xt + 0.5).astype(np.uint8)
    signs = np.where(X < 0, -1, 1).astype(np.int8)
    return E1, M1, E2, E3, signs, Xh


@njit(cache=True, parallel=True)
def _quantize_numba(x, halfrange, e1, m1, e2, e3, signs, xhat):  # pragma: no cover - jitted
    B = x.shape[0]
    t2 = 2.0 if halfrange else 4.0
    t3 = 1.0 if halfrange else 2.0
    for b in prange(B):
        a1 = 0.0
        for i in range(8):
            a2 = 0.0
            for j in range(2):
                a3 = 0.0
                for l in range(4):
                    v = abs(x[b, i * 8 + j * 4 + l])
                    if v > a3:
                        a3 = v
                e3[b, i, j] = 0  # filled below once S1 is known
                if a3 > a2:
                    a2 = a3
            e2[b, i] = 0
            if a2 > a1:
                a1 = a2
        at1 = a1 / 7.0
        if at1 < Q_MIN:
            at1 = Q_MIN
        elif at1 > Q_MAX:
            at1 = Q_MAX
        _, ex = math.frexp(at1)
        be1 = ex - 1
        bm1 = int(math.floor(math.ldexp(at1, 2 - be1) + 0.5))
        s1 = math.ldexp(float(bm1), be1 - 2)
        e1[b] = be1
        m1[b] = bm1
        for i in range(8):
            a2 = 0.0
            for j in range(2):
                a3 = 0.0
                for l in range(4):
                    v = abs(x[b, i * 8 + j * 4 + l])
                    if v > a3:
                        a3 = v
                if a3 > a2:
                    a2 = a3
            at2 = a2 / s1
            if at2 > 4.0:
                at2 = 4.0
            be2 = 1 if at2 >= t2 else 0
            e2[b, i] = be2
            s12 = math.ldexp(s1, be2)
            for j in range(2):
                a3 = 0.0
                for l in range(4):
                    v = abs(x[b, i * 8 + j * 4 + l])
                    if v > a3:
                        a3 = v
                at3 = a3 / s12
                if at3 > 2.0:
                    at3 = 2.0
                be3 = 1 if at3 >= t3 else 0
                e3[b, i, j] = be3
                denom = math.ldexp(s12, be3)
                for l in range(4):
                    v = x[b, i * 8 + j * 4 + l]
                    xt = abs(v) / denom
                    if xt > 1.75:
                        xt = 1.75
                    xhat[b, i, j, l] = np.uint8(math.floor(4.0 * xt + 0.5))
                    signs[b, i, j, l] = -1 if v < 0 else 1


def hif4_quantize(t, axis, subscale_mode="literal"):
    """Quantize ``t`` in 64-element blocks along ``axis``."""
    if subscale_mode not in _MODES:
        raise ValueError(f"subscale_mode must be one of {_MODES}")
    arr = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
    blocked, _ = axis_to_blocks(arr, axis, BLOCK)
    B = blocked.shape[0]
    halfrange = subscale_mode == "halfrange"

    if USE_NUMBA and blocked.size >= 4096:
        blocked = np.ascontiguousarray(blocked)
        e1 = np.empty(B, dtype=np.int64)
        m1 = np.empty(B, dtype=np.int64)
        e2 = np.empty((B, 8), dtype=np.int64)
        e3 = np.empty((B, 8, 2), dtype=np.int64)
        signs = np.empty((B, 8, 2, 4), dtype=np.int8)
        xhat = np.empty((B, 8, 2, 4), dtype=np.uint8)
        _quantize_numba(blocked, halfrange, e1, m1, e2, e3, signs, xhat)
    else:
        X = blocked.reshape(B, 8, 2, 4)
        e1, m1, e2, e3, signs, xhat = _quantize_numpy(X, halfrange)

    return Hif4Quantized(axis, arr.shape, e1, m1, e2, e3, signs, xhat,
                         subscale_mode, getattr(t, "name", None))


def hif4_dequantize(q):
    """Reconstruct sign * M1 * 2**(E1+E2+E3-4) * Xhat and restore the layout."""
    exp = q.e1[:, None, None, None] + q.e2[:, :, None, None] + q.e3[:, :, :, None] - 4
    mag = np.ldexp((q.m1[:, None, None, None] * q.xhat.astype(np.int64)).astype(np.float64), exp)
    vals = (mag * q.signs).reshape(len(q.e1), BLOCK)
    dims = list(q.shape)
    dims.append(dims.pop(q.axis))
    return Tensor(blocks_to_axis(vals, tuple(dims), q.axis), q.name)
