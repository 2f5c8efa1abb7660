"""Minimal tensor kernel: 2-D cross-correlation, activations, pooling, and
the binary tensor file format used to exchange detector head outputs.

Storage is 32-bit float throughout.  Every reduction accumulates in 64-bit
and visits its operands in a fixed (input channel, kernel row, kernel
column) order, so results are bitwise reproducible across runs and across
the vectorized / scalar implementations.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

TENSOR_MAGIC = b"TNSR"


def _finite_f32(values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class Tensor:
    """Positive extents plus a flat row-major float32 payload."""

    dims: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError("Tensor.dims must be non-empty")
        for axis, extent in enumerate(dims):
            if extent < 1:
                raise ValueError(f"Tensor.dims[{axis}] must be positive, got {extent}")
        data = _finite_f32(self.data, "Tensor.data").reshape(-1)
        if data.size != math.prod(dims):
            raise ValueError(
                f"Tensor.data has {data.size} values, dims {dims} require {math.prod(dims)}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array) -> "Tensor":
        arr = np.asarray(array, dtype=np.float32)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        return cls(dims=arr.shape, data=arr.reshape(-1))

    def as_array(self) -> np.ndarray:
        """Payload viewed with its declared shape (read-only, shares storage)."""
        return self.data.reshape(self.dims)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.dims == other.dims and bool(np.array_equal(self.data, other.data))

    def __repr__(self) -> str:
        return f"Tensor(dims={self.dims})"


@dataclass(frozen=True)
class ConvLayer:
    """Bank of 2-D kernels with one bias per *input* channel.

    ``kernels`` has shape (out_channels, in_channels, kh, kw).  Output
    feature i is the sum over input channels j of cross-correlate(input_j,
    kernels[i, j]) + biases[j]; the bias term is indexed by input channel,
    so all output channels share the same additive constant.
    """

    kernels: np.ndarray
    biases: np.ndarray
    stride: int = 1

    def __post_init__(self) -> None:
        kernels = _finite_f32(self.kernels, "ConvLayer.kernels")
        if kernels.ndim != 4:
            raise ValueError(
                f"ConvLayer.kernels must be 4-D (out, in, kh, kw), got {kernels.ndim}-D"
            )
        for axis, name in enumerate(("out_channels", "in_channels", "kh", "kw")):
            if kernels.shape[axis] < 1:
                raise ValueError(f"ConvLayer.kernels {name} must be positive, got {kernels.shape[axis]}")
        biases = _finite_f32(self.biases, "ConvLayer.biases").reshape(-1)
        if biases.size != kernels.shape[1]:
            raise ValueError(
                f"ConvLayer.biases has {biases.size} entries, expected one per input "
                f"channel ({kernels.shape[1]})"
            )
        stride = int(self.stride)
        if stride < 1:
            raise ValueError(f"ConvLayer.stride must be >= 1, got {self.stride}")
        kernels.setflags(write=False)
        biases.setflags(write=False)
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "stride", stride)


class ActivationKind(str, Enum):
    TANH = "tanh"
    RELU = "relu"
    SIGMOID = "sigmoid"
    IDENTITY = "identity"


class PoolMode(str, Enum):
    MAX = "max"
    MIN = "min"
    AVERAGE = "average"


@dataclass(frozen=True)
class PoolSpec:
    """Square window, stride, and reduction mode for 2-D pooling."""

    window: int
    stride: int
    mode: PoolMode

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError(f"PoolSpec.window must be >= 1, got {self.window}")
        if self.stride < 1:
            raise ValueError(f"PoolSpec.stride must be >= 1, got {self.stride}")
        object.__setattr__(self, "mode", PoolMode(self.mode))


def _out_extent(extent: int, window: int, stride: int) -> int:
    return (extent - window) // stride + 1


def _windows(plane: np.ndarray, wy: int, wx: int, out_h: int, out_w: int, stride: int) -> np.ndarray:
    """Strided slice of the (wy, wx) window offset across all output positions."""
    return plane[
        ...,
        wy : wy + (out_h - 1) * stride + 1 : stride,
        wx : wx + (out_w - 1) * stride + 1 : stride,
    ]


def convolve2d(x: Tensor, layer: ConvLayer) -> Tensor:
    """Valid-padding 2-D cross-correlation of a (channels, H, W) tensor.

    Output extents follow floor((H - kh) / stride) + 1.  Accumulation is
    float64, visiting input channels outermost and adding the channel's
    bias right after its spatial sum; the result equals the scalar
    reference loop bit for bit.
    """
    if len(x.dims) != 3:
        raise ValueError(f"convolve2d input must be 3-D (channels, H, W), got dims {x.dims}")
    c_in, h, w = x.dims
    out_c, k_in, kh, kw = layer.kernels.shape
    if k_in != c_in:
        raise ValueError(f"input has {c_in} channels, kernels expect {k_in}")
    if kh > h:
        raise ValueError(f"kernel height {kh} exceeds input height {h}")
    if kw > w:
        raise ValueError(f"kernel width {kw} exceeds input width {w}")
    stride = layer.stride
    out_h = _out_extent(h, kh, stride)
    out_w = _out_extent(w, kw, stride)

    planes = x.as_array().astype(np.float64)
    kern = layer.kernels.astype(np.float64)
    biases = layer.biases.astype(np.float64)
    acc = np.zeros((out_c, out_h, out_w), dtype=np.float64)
    for j in range(c_in):
        for ky in range(kh):
            for kx in range(kw):
                patch = _windows(planes[j], ky, kx, out_h, out_w, stride)
                acc += kern[:, j, ky, kx][:, None, None] * patch[None, :, :]
        acc += biases[j]
    return Tensor((out_c, out_h, out_w), acc.astype(np.float32))


def sigmoid(v: np.ndarray) -> np.ndarray:
    """Numerically stable logistic; never exponentiates a positive value."""
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    pos = v >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def activate(t: Tensor, kind: ActivationKind | str) -> Tensor:
    """Elementwise nonlinearity, computed in float64 and rounded to float32."""
    kind = ActivationKind(kind)
    if kind is ActivationKind.IDENTITY:
        return t
    v = t.data.astype(np.float64)
    if kind is ActivationKind.RELU:
        out = np.where(v > 0.0, v, 0.0)
    elif kind is ActivationKind.TANH:
        out = np.tanh(v)
    else:
        out = sigmoid(v)
    return Tensor(t.dims, out.astype(np.float32))


def pool(t: Tensor, spec: PoolSpec) -> Tensor:
    """Per-channel windowed reduction over a (channels, H, W) tensor."""
    if len(t.dims) != 3:
        raise ValueError(f"pool input must be 3-D (channels, H, W), got dims {t.dims}")
    c, h, w = t.dims
    m, stride = spec.window, spec.stride
    if m > h:
        raise ValueError(f"pool window {m} exceeds input height {h}")
    if m > w:
        raise ValueError(f"pool window {m} exceeds input width {w}")
    out_h = _out_extent(h, m, stride)
    out_w = _out_extent(w, m, stride)
    planes = t.as_array()

    if spec.mode is PoolMode.AVERAGE:
        acc = np.zeros((c, out_h, out_w), dtype=np.float64)
        for wy in range(m):
            for wx in range(m):
                acc += _windows(planes, wy, wx, out_h, out_w, stride).astype(np.float64)
        out = (acc / (m * m)).astype(np.float32)
    else:
        reduce = np.maximum if spec.mode is PoolMode.MAX else np.minimum
        out = None
        for wy in range(m):
            for wx in range(m):
                patch = _windows(planes, wy, wx, out_h, out_w, stride)
                out = patch.copy() if out is None else reduce(out, patch)
    return Tensor((c, out_h, out_w), out)


def tensor_to_bytes(t: Tensor) -> bytes:
    """Magic ``TNSR``, int32-LE ndim and extents, float32-LE payload."""
    return (
        TENSOR_MAGIC
        + struct.pack("<i", len(t.dims))
        + struct.pack(f"<{len(t.dims)}i", *t.dims)
        + t.data.astype("<f4").tobytes()
    )


def tensor_from_bytes(blob: bytes, source: str = "<bytes>") -> Tensor:
    """Parse a serialized tensor, validating the layout."""
    if len(blob) < 8:
        raise ValueError(f"{source}: truncated tensor header ({len(blob)} bytes)")
    if blob[:4] != TENSOR_MAGIC:
        raise ValueError(f"{source}: bad magic {blob[:4]!r}, expected {TENSOR_MAGIC!r}")
    (ndim,) = struct.unpack_from("<i", blob, 4)
    if ndim < 1:
        raise ValueError(f"{source}: ndim must be >= 1, got {ndim}")
    header_end = 8 + 4 * ndim
    if len(blob) < header_end:
        raise ValueError(f"{source}: truncated extents (ndim={ndim}, {len(blob)} bytes)")
    dims = struct.unpack_from(f"<{ndim}i", blob, 8)
    for axis, extent in enumerate(dims):
        if extent < 1:
            raise ValueError(f"{source}: extent[{axis}] must be positive, got {extent}")
    expected = math.prod(dims) * 4
    payload = blob[header_end:]
    if len(payload) != expected:
        raise ValueError(
            f"{source}: payload is {len(payload)} bytes, dims {dims} require {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4")
    return Tensor(dims, data)


def write_tensor(t: Tensor, path) -> None:
    """Write the serialized form of :func:`tensor_to_bytes` to a file."""
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(t))


def read_tensor(path) -> Tensor:
    """Read a tensor file written by :func:`write_tensor`, validating layout."""
    with open(path, "rb") as fh:
        blob = fh.read()
    return tensor_from_bytes(blob, source=str(path))
