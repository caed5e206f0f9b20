"""Generic ExMy floating-point formats: specs, exhaustive value sets, projection.

Every element format in this package (FP8/FP6/FP4 variants, the power-of-two
scale format, the unsigned block-scale format) is described by an FpFormatSpec
and realized as a Codebook: the complete sorted set of finite representable
values. Rounding a real onto a codebook uses round-to-nearest with ties to
the even mantissa code.

Conventions baked into the builtin specs:
  * E4M3 has no infinities; the top codepoint per sign (exp and mantissa all
    ones) is NaN, so the max finite value is 1.75 * 2**8 = 448.
  * E5M2 reserves the all-ones exponent for Inf/NaN, so the max finite value
    is 1.75 * 2**15.
  * E3M2, E2M3, E2M1 have neither Inf nor NaN: every codepoint is finite.
  * E8M0 is an unsigned pure power-of-two format, bias 127, one NaN
    codepoint, values 2**-127 .. 2**127. It encodes no zero.
  * E6M2U is the unsigned block-scale format with values m * 2**(e-2),
    m in 4..7, clipped to [2**-48, 1.5 * 2**15].
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import USE_NUMBA, njit, prange
from .errors import EmptyTensor, UnknownFormat
from .tensor import Tensor

__all__ = [
    "FpFormatSpec",
    "Codebook",
    "builtin_spec",
    "builtin_names",
    "enumerate_codebook",
    "mxint8_codebook",
    "project",
    "density_in_interval",
    "empirical_cdf",
]


@dataclass(frozen=True)
class FpFormatSpec:
    """Declarative description of an ExMy format.

    ``nan_encodings`` counts codepoints (per sign) reserved as NaN at the top
    of the encoding space when the format has no infinities. ``kind`` selects
    the enumeration rule: "standard" IEEE-like layouts, "pow2" for the
    exponent-only scale format, "scale-u8" for the unsigned mantissa-scale
    format defined by its m * 2**(e-2) encode rule.
    """

    name: str
    exponent_bits: int
    mantissa_bits: int
    signed: bool = True
    bias: int = 0
    has_inf: bool = False
    nan_encodings: int = 0
    kind: str = "standard"

    @property
    def max_finite(self):
        if self.kind == "pow2":
            return 2.0 ** (2**self.exponent_bits - 2 - self.bias)
        if self.kind == "scale-u8":
            return 1.5 * 2.0**15
        top_exp = 2**self.exponent_bits - 1 - (1 if self.has_inf else 0)
        top_man = 2**self.mantissa_bits - 1 - (0 if self.has_inf else self.nan_encodings)
        return (1.0 + top_man / 2.0**self.mantissa_bits) * 2.0 ** (top_exp - self.bias)

    @property
    def min_normal(self):
        if self.kind == "pow2":
            return 2.0**-self.bias
        if self.kind == "scale-u8":
            return 2.0**-48
        return 2.0 ** (1 - self.bias)

    @property
    def min_subnormal(self):
        """Smallest positive value (equals min_normal when subnormal-free)."""
        if self.kind in ("pow2", "scale-u8") or self.mantissa_bits == 0:
            return self.min_normal
        return 2.0 ** (1 - self.bias - self.mantissa_bits)

    @property
    def max_subnormal(self):
        if self.kind in ("pow2", "scale-u8") or self.mantissa_bits == 0:
            return None
        frac = (2**self.mantissa_bits - 1) / 2**self.mantissa_bits
        return frac * 2.0 ** (1 - self.bias)

    @property
    def has_zero(self):
        return self.kind != "pow2"


_BUILTINS = {
    "e5m2": FpFormatSpec("e5m2", 5, 2, bias=15, has_inf=True),
    "e4m3": FpFormatSpec("e4m3", 4, 3, bias=7, nan_encodings=1),
    "e3m2": FpFormatSpec("e3m2", 3, 2, bias=3),
    "e2m3": FpFormatSpec("e2m3", 2, 3, bias=1),
    "e2m1": FpFormatSpec("e2m1", 2, 1, bias=1),
    "e8m0": FpFormatSpec("e8m0", 8, 0, signed=False, bias=127, nan_encodings=1, kind="pow2"),
    "e6m2u": FpFormatSpec("e6m2u", 6, 2, signed=False, bias=48, kind="scale-u8"),
}


def builtin_names():
    return sorted(_BUILTINS)


def builtin_spec(name):
    """Look up one of the built-in format specs by (case-insensitive) name."""
    key = name.strip().lower()
    if key not in _BUILTINS:
        raise UnknownFormat(f"unknown format {name!r}; known: {', '.join(builtin_names())}")
    return _BUILTINS[key]


@dataclass(frozen=True)
class Codebook:
    """All finite values of a format, sorted ascending, with tie-break codes.

    ``codes[i]`` is the mantissa (or grid) integer of values[i]; adjacent
    values always carry codes of opposite parity, which makes the
    ties-to-even rule in project() well defined.
    """

    spec: FpFormatSpec
    values: np.ndarray
    codes: np.ndarray
    _mids: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        c = np.ascontiguousarray(self.codes, dtype=np.int64)
        # Midpoints are exact in float64 for every builtin format: neighbours
        # share (or nearly share) a binade and have few mantissa bits.
        mids = (v[:-1] + v[1:]) * 0.5
        for arr in (v, c, mids):
            arr.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "codes", c)
        object.__setattr__(self, "_mids", mids)

    def __len__(self):
        return len(self.values)

    @property
    def max_finite(self):
        return float(self.values[-1])

    def contains(self, x):
        i = np.searchsorted(self.values, x)
        return bool(np.all((i < len(self.values)) & (self.values[np.minimum(i, len(self.values) - 1)] == x)))


def enumerate_codebook(spec):
    """Enumerate every finite representable value of ``spec`` exactly once."""
    if isinstance(spec, str):
        spec = builtin_spec(spec)
    if spec.kind == "pow2":
        codes = np.arange(0, 2**spec.exponent_bits - spec.nan_encodings, dtype=np.int64)
        values = np.ldexp(1.0, codes - spec.bias)
        return Codebook(spec, values, codes)
    if spec.kind == "scale-u8":
        vals, codes = [], []
        for e in range(-spec.bias, 2**spec.exponent_bits - spec.bias):
            for m in range(4, 8):
                v = math.ldexp(m, e - 2)
                if v <= spec.max_finite:
                    vals.append(v)
                    codes.append(m)
        return Codebook(spec, np.array(vals), np.array(codes))

    y = spec.mantissa_bits
    vals = [0.0]
    codes = [0]
    for m in range(1, 2**y):  # subnormals
        vals.append(math.ldexp(m, 1 - spec.bias - y))
        codes.append(m)
    top_exp = 2**spec.exponent_bits - 1 - (1 if spec.has_inf else 0)
    for c in range(1, top_exp + 1):
        man_top = 2**y - 1
        if not spec.has_inf and c == top_exp:
            man_top -= spec.nan_encodings
        for m in range(0, man_top + 1):
            vals.append(math.ldexp(2**y + m, c - spec.bias - y))
            codes.append(m)
    pos = np.array(vals)
    pos_codes = np.array(codes, dtype=np.int64)
    if spec.signed:
        values = np.concatenate([-pos[:0:-1], pos])
        all_codes = np.concatenate([pos_codes[:0:-1], pos_codes])
    else:
        values, all_codes = pos, pos_codes
    return Codebook(spec, values, all_codes)


def mxint8_codebook():
    """Symmetric integer element grid {-127..127}/64 used by the MX int config."""
    codes = np.arange(-127, 128, dtype=np.int64)
    spec = FpFormatSpec("int8", 0, 7, bias=0)
    return Codebook(spec, codes / 64.0, codes)


# -- round-to-nearest projection ---------------------------------------------
#
# Nearest-value search never compares rounded distances: the midpoint of two
# adjacent codebook values is exact in float64, so strict inequality against
# it is the exact nearest test and equality is the exact tie test.

def _project_numpy(values, codes, mids, x):
    xc = np.clip(x, values[0], values[-1])
    i = np.searchsorted(values, xc)
    i = np.clip(i, 1, len(values) - 1)
    left = values[i - 1]
    right = values[i]
    mid = mids[i - 1]
    out = np.where(xc > mid, right, left)
    tie = xc == mid
    if np.any(tie):
        swap = tie & (codes[i - 1] % 2 != 0) & (codes[i] % 2 == 0)
        out = np.where(swap, right, out)
    return out


@njit(cache=True)
def _project_scalar(values, codes, mids, v):  # pragma: no cover - jitted
    n = len(values)
    if v <= values[0]:
        return values[0]
    if v >= values[n - 1]:
        return values[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid_i = (lo + hi) // 2
        if values[mid_i] < v:
            lo = mid_i
        else:
            hi = mid_i
    mid = mids[lo]
    if v > mid:
        return values[hi]
    if v < mid:
        return values[lo]
    if codes[lo] % 2 == 0:
        return values[lo]
    if codes[hi] % 2 == 0:
        return values[hi]
    return values[lo]


@njit(cache=True, parallel=True)
def _project_numba(values, codes, mids, x, out):  # pragma: no cover - jitted
    for j in prange(x.size):
        out[j] = _project_scalar(values, codes, mids, x[j])


def project(cb, x):
    """Round finite input(s) onto the nearest codebook value.

    Values beyond the extremes clip to them; exact midpoints resolve to the
    neighbour with the even mantissa code.
    """
    scalar = np.isscalar(x) or np.ndim(x) == 0
    arr = np.ascontiguousarray(x, dtype=np.float64)
    flat = arr.reshape(-1)
    if USE_NUMBA and flat.size >= 4096:
        out = np.empty_like(flat)
        _project_numba(cb.values, cb.codes, cb._mids, flat, out)
    else:
        out = _project_numpy(cb.values, cb.codes, cb._mids, flat)
    return float(out[0]) if scalar else out.reshape(arr.shape)


def density_in_interval(cb, lo, hi):
    """Count codebook values v with lo <= v <= hi."""
    if lo > hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    left = np.searchsorted(cb.values, lo, side="left")
    right = np.searchsorted(cb.values, hi, side="right")
    return int(right - left)


def empirical_cdf(t, n_points):
    """CDF of absolute values sampled at n_points order-statistic quantiles.

    Returns a list of (magnitude, cumulative fraction) pairs where the
    fraction is the exact rank of that magnitude; step-evaluating the pairs
    reproduces the empirical distribution of |values|.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    arr = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
    if arr.size == 0:
        raise EmptyTensor("cannot build a CDF from an empty tensor")
    mags = np.sort(np.abs(arr), axis=None)
    qs = np.linspace(0.0, 1.0, n_points)
    points = np.quantile(mags, qs, method="lower")
    fractions = np.searchsorted(mags, points, side="right") / mags.size
    return [(float(m), float(f)) for m, f in zip(points, fractions)]
