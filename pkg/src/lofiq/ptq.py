"""Post-training transforms: per-channel difficulty migration and low-rank splitting.

Both transforms are format-agnostic: they rewrite (X, W) so that a
downstream codec sees easier distributions, while the exact product X @ W
is preserved (smoothing) or reproduced by a high-precision side branch
(low-rank split).

Smoothing rewrites Y = X W as (X diag(s)^-1)(diag(s) W) with
s_j = max|X[:, j]|**alpha / max|W[j, :]|**(1 - alpha); alpha in [0, 1]
controls how much outlier mass migrates from activations into weights.

The low-rank split W = L1 @ L2 + residual keeps the top singular
directions exact and quantizes only the residual.
"""

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, NonConvergence, RankOutOfRange, ShapeMismatch
from .registry import parse_format
from .tensor import Tensor

__all__ = [
    "ALPHA_GRID",
    "SmoothingPlan",
    "LowRankBranch",
    "smooth_scales",
    "apply_smoothing",
    "invert_smoothing",
    "search_alpha",
    "svd_split",
    "smoothquant_pipeline",
    "svdquant_pipeline",
    "SmoothReport",
    "PipelineReport",
]

ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))  # 0.1 .. 0.9
_MAX_FLOOR = 1e-8
_S_LO, _S_HI = 1e-5, 1e5


def _as_array(t):
    return t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)


def _as_codec(fmt):
    return parse_format(fmt) if isinstance(fmt, str) else fmt


@dataclass(frozen=True)
class SmoothingPlan:
    scales: np.ndarray  # one positive scale per inner-dimension channel
    alpha: float
    activation_max: np.ndarray
    weight_max: np.ndarray


@dataclass(frozen=True)
class LowRankBranch:
    l1: np.ndarray  # (d, r)
    l2: np.ndarray  # (r, n)
    rank: int
    residual: np.ndarray  # (d, n); l1 @ l2 + residual == input matrix

    @property
    def product(self):
        return self.l1 @ self.l2


def smooth_scales(x_colmax, w_rowmax, alpha):
    """Per-channel scales from column maxima of X and row maxima of W.

    Maxima are floored at 1e-8 and scales clamped to [1e-5, 1e5] so
    degenerate (all-zero) channels cannot produce zero or infinite scales.
    """
    xm = np.asarray(x_colmax, dtype=np.float64).ravel()
    wm = np.asarray(w_rowmax, dtype=np.float64).ravel()
    if xm.shape != wm.shape:
        raise LengthMismatch(f"activation maxima ({xm.size}) vs weight maxima ({wm.size})")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    xm = np.maximum(xm, _MAX_FLOOR)
    wm = np.maximum(wm, _MAX_FLOOR)
    s = np.clip(xm**alpha / wm ** (1.0 - alpha), _S_LO, _S_HI)
    return SmoothingPlan(s, float(alpha), xm, wm)


def plan_for(x, w, alpha):
    """Build a SmoothingPlan from the tensors themselves."""
    xa, wa = _as_array(x), _as_array(w)
    if xa.shape[-1] != wa.shape[0]:
        raise ShapeMismatch(f"inner dims differ: x {xa.shape} vs w {wa.shape}")
    return smooth_scales(np.max(np.abs(xa), axis=0), np.max(np.abs(wa), axis=1), alpha)


def apply_smoothing(x, w, plan):
    """Return (x / s columnwise, s * w rowwise); the product is unchanged."""
    xa, wa = _as_array(x), _as_array(w)
    s = plan.scales
    if xa.shape[-1] != s.size or wa.shape[0] != s.size:
        raise ShapeMismatch(
            f"plan length {s.size} does not match x {xa.shape} / w {wa.shape}")
    return Tensor(xa / s, getattr(x, "name", None)), Tensor(s[:, None] * wa, getattr(w, "name", None))


def invert_smoothing(x_s, w_s, plan):
    """Undo apply_smoothing; exact in exact arithmetic."""
    xa, wa = _as_array(x_s), _as_array(w_s)
    s = plan.scales
    return Tensor(xa * s), Tensor(wa / s[:, None])


def _product_error(x, w, codec, alpha):
    plan = plan_for(x, w, alpha)
    xs, ws = apply_smoothing(x, w, plan)
    qx = codec.reconstruct(xs.data, "activation")
    qw = codec.reconstruct(ws.data, "weight")
    ref = _as_array(x) @ _as_array(w)
    return float(np.linalg.norm(qx @ qw - ref)), plan


def search_alpha(x, w, fmt, grid=ALPHA_GRID):
    """Grid-search the migration strength minimizing |Q(x')Q(w') - xw|_F.

    Ties resolve to the smaller alpha.
    """
    codec = _as_codec(fmt)
    if len(grid) == 0:
        raise ValueError("alpha grid is empty")
    best = None
    for alpha in grid:
        err, plan = _product_error(x, w, codec, alpha)
        if best is None or err < best[0]:
            best = (err, alpha, plan)
    return best[1], best[2]


def svd_split(w, rank):
    """Split a matrix into its top-``rank`` singular part plus a residual."""
    wa = _as_array(w)
    if wa.ndim != 2:
        raise ShapeMismatch(f"svd_split needs a matrix, got shape {wa.shape}")
    if not 1 <= rank <= min(wa.shape):
        raise RankOutOfRange(f"rank {rank} not in [1, {min(wa.shape)}] for shape {wa.shape}")
    try:
        u, s, vh = np.linalg.svd(wa, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"SVD failed to converge: {exc}") from exc
    l1 = u[:, :rank] * s[:rank]
    l2 = vh[:rank]
    return LowRankBranch(l1, l2, int(rank), wa - l1 @ l2)


@dataclass(frozen=True)
class PipelineReport:
    """Relative reconstruction errors of the three pipeline stages."""

    alpha: float
    rank: int
    rtn_rel_err: float
    smooth_rel_err: float
    svdq_rel_err: float
    format: str

    def to_dict(self):
        return {
            "format": self.format,
            "alpha": self.alpha,
            "rank": self.rank,
            "rtn_rel_err": self.rtn_rel_err,
            "smooth_rel_err": self.smooth_rel_err,
            "svdq_rel_err": self.svdq_rel_err,
        }


@dataclass(frozen=True)
class SmoothReport:
    alpha: float
    rtn_rel_err: float
    smooth_rel_err: float
    format: str

    def to_dict(self):
        return {
            "format": self.format,
            "alpha": self.alpha,
            "rtn_rel_err": self.rtn_rel_err,
            "smooth_rel_err": self.smooth_rel_err,
        }


def smoothquant_pipeline(x, w, fmt, alpha_grid=ALPHA_GRID, alpha=None):
    """Migration-only pipeline: reports plain-RTN and smoothed product errors."""
    codec = _as_codec(fmt)
    xa, wa = _as_array(x), _as_array(w)
    ref = xa @ wa
    ref_norm = float(np.linalg.norm(ref))
    if ref_norm == 0.0:
        raise ShapeMismatch("x @ w vanishes; relative errors are undefined")
    rtn = codec.reconstruct(xa, "activation") @ codec.reconstruct(wa, "weight")
    rtn_err = float(np.linalg.norm(rtn - ref)) / ref_norm
    if alpha is None:
        alpha, _ = search_alpha(x, w, codec, alpha_grid)
    err, _ = _product_error(x, w, codec, alpha)
    return SmoothReport(float(alpha), rtn_err, err / ref_norm, codec.selector)


def svdquant_pipeline(x, w, fmt, alpha_grid=ALPHA_GRID, rank=16, smooth=True, alpha=None):
    """Smooth, split the smoothed weight, quantize residual and activations.

    The reconstruction is x' @ L1L2 + Q(x') @ Q(residual); its relative
    Frobenius error is reported next to the smoothing-only and plain
    round-to-nearest figures. The migration strength comes from the
    smoothing objective (or ``alpha`` when given); ``smooth=False`` skips
    the migration entirely for ablation.
    """
    codec = _as_codec(fmt)
    xa, wa = _as_array(x), _as_array(w)
    ref = xa @ wa
    ref_norm = float(np.linalg.norm(ref))
    if ref_norm == 0.0:
        raise ShapeMismatch("x @ w vanishes; relative errors are undefined")

    rtn = codec.reconstruct(xa, "activation") @ codec.reconstruct(wa, "weight")
    rtn_err = float(np.linalg.norm(rtn - ref)) / ref_norm

    if smooth:
        if alpha is None:
            alpha, plan = search_alpha(x, w, codec, alpha_grid)
        else:
            plan = plan_for(x, w, alpha)
    else:
        alpha, plan = 0.0, None

    if plan is not None:
        xs, ws = apply_smoothing(x, w, plan)
    else:
        xs, ws = Tensor(xa), Tensor(wa)
    qx = codec.reconstruct(xs.data, "activation")
    qw = codec.reconstruct(ws.data, "weight")
    smooth_err = float(np.linalg.norm(qx @ qw - ref)) / ref_norm

    branch = svd_split(ws.data, rank)
    qres = codec.reconstruct(branch.residual, "weight")
    recon = xs.data @ branch.product + qx @ qres
    svdq_err = float(np.linalg.norm(recon - ref)) / ref_norm

    return PipelineReport(float(alpha), int(rank), rtn_err, smooth_err, svdq_err,
                          codec.selector)
