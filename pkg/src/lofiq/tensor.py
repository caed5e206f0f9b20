"""Dense float64 tensor container, axis/block partitioning, and the LQT1 file format.

All codecs in this package consume and produce 64-bit tensors; narrower
on-disk dtypes are widened losslessly on load. Non-finite values are
rejected at every ingest point since no codec defines them.
"""

import json
import struct

import numpy as np

from .errors import (
    AxisOutOfRange,
    BadMagic,
    BadVersion,
    HeaderParse,
    NonFiniteValue,
    NotDivisible,
    OffsetOutOfBounds,
)

MAGIC = b"LQT1"
VERSION = 1

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


class Tensor:
    """Immutable dense tensor of finite float64 values with an optional name."""

    __slots__ = ("data", "name")

    def __init__(self, values, name=None):
        arr = np.ascontiguousarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            label = name or "<unnamed>"
            raise NonFiniteValue(f"tensor {label!r} contains NaN or Inf")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "name", name)

    def __setattr__(self, key, value):
        raise AttributeError("Tensor is immutable")

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label} shape={self.shape}"


def tensor(values, name=None):
    """Build a Tensor from any array-like of finite reals."""
    return Tensor(values, name)


class BlockView:
    """Partition of one tensor axis into contiguous blocks of fixed size.

    ``block_count`` counts blocks along the partitioned axis; iteration
    yields every block of every slice in row-major order.
    """

    def __init__(self, t, axis, block_size):
        arr = t.data if isinstance(t, Tensor) else np.asarray(t)
        if not 0 <= axis < arr.ndim:
            raise AxisOutOfRange(f"axis {axis} out of range for rank {arr.ndim}")
        extent = arr.shape[axis]
        if block_size <= 0 or extent % block_size != 0:
            raise NotDivisible(extent, block_size, axis)
        self.axis = axis
        self.block_size = block_size
        self.block_count = extent // block_size
        self._arr = arr

    @property
    def total_blocks(self):
        return self._arr.size // self.block_size

    def as_matrix(self):
        """All blocks stacked as a (total_blocks, block_size) array."""
        blocked, _ = axis_to_blocks(self._arr, self.axis, self.block_size)
        return blocked

    def __iter__(self):
        mat = self.as_matrix()
        for row in mat:
            yield row

    def reassemble(self, blocked):
        """Inverse of as_matrix: scatter (total_blocks, block_size) back in place."""
        moved_shape = np.moveaxis(self._arr, self.axis, -1).shape
        return blocks_to_axis(np.asarray(blocked), moved_shape, self.axis)


def block_view(t, axis, block_size):
    """Partition ``axis`` of ``t`` into contiguous blocks of ``block_size``."""
    return BlockView(t, axis, block_size)


def axis_to_blocks(arr, axis, k):
    """Reshape so blocks of k contiguous-along-axis elements become rows.

    Returns (blocked, moved_shape); blocked is (arr.size // k, k) and
    moved_shape is the intermediate layout needed by blocks_to_axis.
    """
    extent = arr.shape[axis]
    if extent % k != 0:
        raise NotDivisible(extent, k, axis)
    moved = np.moveaxis(arr, axis, -1)
    return moved.reshape(-1, k), moved.shape


def blocks_to_axis(blocked, moved_shape, axis):
    """Inverse of axis_to_blocks."""
    return np.moveaxis(blocked.reshape(moved_shape), -1, axis)


def group_reduce_layout(arr, axis):
    """View with the grouping axis first and everything else flattened.

    Per-channel / per-token codecs treat each index along ``axis`` as one
    group; the result is (n_groups, group_size).
    """
    if not 0 <= axis < arr.ndim:
        raise AxisOutOfRange(f"axis {axis} out of range for rank {arr.ndim}")
    moved = np.moveaxis(arr, axis, 0)
    return moved.reshape(arr.shape[axis], -1), moved.shape


def groups_to_axis(grouped, moved_shape, axis):
    """Inverse of group_reduce_layout."""
    return np.moveaxis(grouped.reshape(moved_shape), 0, axis)


def save_tensors(tensors, path, dtype="f64"):
    """Write tensors to an LQT1 container.

    f32 narrowing uses the hardware round-to-nearest-even conversion; a
    value that overflows f32 becomes Inf on disk and is rejected on load.
    """
    if dtype not in _DTYPES:
        raise ValueError(f"dtype must be f32 or f64, got {dtype!r}")
    np_dtype = _DTYPES[dtype]
    entries = []
    payload = bytearray()
    for i, t in enumerate(tensors):
        arr = t.data if isinstance(t, Tensor) else np.ascontiguousarray(t, dtype=np.float64)
        name = (t.name if isinstance(t, Tensor) else None) or f"tensor_{i}"
        raw = np.ascontiguousarray(arr, dtype=np_dtype).tobytes()
        entries.append(
            {"name": name, "dtype": dtype, "shape": list(arr.shape), "offset": len(payload)}
        )
        payload.extend(raw)
    header = json.dumps({"tensors": entries}, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(payload)


def load_tensors(path):
    """Read an LQT1 container into a list of Tensors (f32 widened losslessly)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise BadMagic(f"{path}: not an LQT1 file")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise BadVersion(f"{path}: unsupported version {version}")
    (header_len,) = struct.unpack_from("<Q", blob, 8)
    if 16 + header_len > len(blob):
        raise HeaderParse(f"{path}: header length {header_len} exceeds file size")
    try:
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
        entries = header["tensors"]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise HeaderParse(f"{path}: bad header ({exc})") from exc

    payload = blob[16 + header_len :]
    out = []
    prev_end = 0
    for entry in entries:
        try:
            name = entry["name"]
            dtype = entry["dtype"]
            shape = tuple(int(s) for s in entry["shape"])
            offset = int(entry["offset"])
        except (KeyError, TypeError, ValueError) as exc:
            raise HeaderParse(f"{path}: malformed tensor entry ({exc})") from exc
        if dtype not in _DTYPES:
            raise HeaderParse(f"{path}: unknown dtype {dtype!r} for tensor {name!r}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * _DTYPES[dtype].itemsize
        if offset < prev_end or offset + nbytes > len(payload):
            raise OffsetOutOfBounds(
                f"{path}: tensor {name!r} at offset {offset} (+{nbytes}B) "
                f"outside payload of {len(payload)}B"
            )
        prev_end = offset + nbytes
        arr = np.frombuffer(payload, dtype=_DTYPES[dtype], count=count, offset=offset)
        arr = arr.reshape(shape).astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"{path}: tensor {name!r} contains NaN or Inf")
        out.append(Tensor(arr, name))
    return out
