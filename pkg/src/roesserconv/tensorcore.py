"""Signal and kernel containers plus the direct convolution that serves as ground truth.

Grid data is stored row-major with the channel index innermost, so the channel
vector of one pixel is contiguous. A grid whose largest index is ``N`` along
some direction has ``N + 1`` samples there; this module calls ``N`` the
*extent* and likewise calls the largest kernel index ``r`` the kernel extent
(a "3x3 kernel" has ``r = (2, 2)``).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import ShapeError

MultiIndex = Tuple[int, ...]


def as_index(values: Sequence[int] | int, dim: int | None = None, *, minimum: int = 0) -> MultiIndex:
    """Coerce ``values`` to a multi-index of non-negative ints, optionally broadcasting a scalar."""
    if isinstance(values, (int, np.integer)):
        if dim is None:
            raise ShapeError("cannot broadcast a scalar index without a dimension")
        values = (int(values),) * dim
    idx = tuple(int(v) for v in values)
    if dim is not None and len(idx) != dim:
        raise ShapeError(f"expected a multi-index of length {dim}, got {idx}")
    if not idx:
        raise ShapeError("multi-index must have at least one entry")
    if any(v < minimum for v in idx):
        raise ShapeError(f"multi-index entries must be >= {minimum}, got {idx}")
    return idx


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Signal:
    """A channel-vector valued signal on the grid ``[0, extent]``.

    ``data`` has shape ``(N_1 + 1, ..., N_d + 1, channels)``.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim < 2:
            raise ShapeError("signal data needs at least one grid axis and a channel axis")
        if any(n == 0 for n in data.shape):
            raise ShapeError(f"signal has an empty axis: shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ShapeError("signal contains non-finite entries")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def dim(self) -> int:
        return self.data.ndim - 1

    @property
    def channels(self) -> int:
        return self.data.shape[-1]

    @property
    def extent(self) -> MultiIndex:
        return tuple(n - 1 for n in self.data.shape[:-1])

    @property
    def grid_shape(self) -> MultiIndex:
        return self.data.shape[:-1]

    @classmethod
    def zeros(cls, extent: Sequence[int], channels: int) -> "Signal":
        return cls(np.zeros(tuple(n + 1 for n in extent) + (channels,)))

    @classmethod
    def impulse(cls, extent: Sequence[int], channels: int, channel: int) -> "Signal":
        """Unit impulse at the origin in one channel."""
        data = np.zeros(tuple(n + 1 for n in extent) + (channels,))
        data[(0,) * len(extent) + (channel,)] = 1.0
        return cls(data)

    def equals(self, other: "Signal") -> bool:
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))


@dataclass(frozen=True, eq=False)
class Kernel:
    """Convolution kernel ``K[t]`` for ``t`` in ``[0, r]`` plus a bias.

    ``coeffs`` has shape ``(r_1 + 1, ..., r_d + 1, c_out, c_in)`` so that
    ``coeffs[t]`` is the ``c_out x c_in`` matrix acting on ``u[i - t]``.
    A missing bias defaults to zero.
    """

    coeffs: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if coeffs.ndim < 3:
            raise ShapeError("kernel coeffs need at least one grid axis plus (c_out, c_in)")
        if any(n == 0 for n in coeffs.shape):
            raise ShapeError(f"kernel has an empty axis: shape {coeffs.shape}")
        c_out = coeffs.shape[-2]
        bias = np.zeros(c_out) if self.bias is None else np.asarray(self.bias, dtype=np.float64)
        if bias.shape != (c_out,):
            raise ShapeError(f"bias shape {bias.shape} does not match c_out={c_out}")
        if not (np.all(np.isfinite(coeffs)) and np.all(np.isfinite(bias))):
            raise ShapeError("kernel contains non-finite entries")
        object.__setattr__(self, "coeffs", _frozen(coeffs))
        object.__setattr__(self, "bias", _frozen(bias))

    @property
    def dim(self) -> int:
        return self.coeffs.ndim - 2

    @property
    def c_out(self) -> int:
        return self.coeffs.shape[-2]

    @property
    def c_in(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def extents(self) -> MultiIndex:
        return tuple(n - 1 for n in self.coeffs.shape[:-2])

    def __getitem__(self, t) -> np.ndarray:
        return self.coeffs[tuple(t)]

    def leading(self) -> np.ndarray:
        """The coefficient ``K[r]`` at the far corner of the kernel."""
        return self.coeffs[self.extents]

    def scaled(self, alpha: float) -> "Kernel":
        return Kernel(alpha * self.coeffs, self.bias)

    def equals(self, other: "Kernel") -> bool:
        return (
            self.coeffs.shape == other.coeffs.shape
            and bool(np.array_equal(self.coeffs, other.coeffs))
            and bool(np.array_equal(self.bias, other.bias))
        )


class Padding(str, enum.Enum):
    FULL = "full"
    SAME = "same"
    NONE = "none"


@dataclass(frozen=True)
class ConvConfig:
    """Stride, dilation and zero-padding mode of a layer. ``None`` means all ones."""

    stride: MultiIndex | None = None
    dilation: MultiIndex | None = None
    padding: Padding = Padding.FULL

    def __post_init__(self):
        if self.stride is not None:
            object.__setattr__(self, "stride", as_index(self.stride, minimum=1))
        if self.dilation is not None:
            object.__setattr__(self, "dilation", as_index(self.dilation, minimum=1))
        object.__setattr__(self, "padding", Padding(self.padding))
        if self.stride is not None and self.dilation is not None and len(self.stride) != len(self.dilation):
            raise ShapeError("stride and dilation must have the same length")

    def resolved(self, dim: int) -> Tuple[MultiIndex, MultiIndex]:
        """Return ``(stride, dilation)`` expanded to length ``dim``."""
        stride = self.stride if self.stride is not None else (1,) * dim
        dilation = self.dilation if self.dilation is not None else (1,) * dim
        if len(stride) != dim or len(dilation) != dim:
            raise ShapeError(f"config has stride {stride} / dilation {dilation}, kernel dim is {dim}")
        return stride, dilation


def _check_pair(kernel: Kernel, signal: Signal) -> None:
    if kernel.dim != signal.dim:
        raise ShapeError(f"kernel dim {kernel.dim} != signal dim {signal.dim}")
    if kernel.c_in != signal.channels:
        raise ShapeError(f"kernel expects {kernel.c_in} input channels, signal has {signal.channels}")


def dilate_kernel(kernel: Kernel, dilation: Sequence[int]) -> Kernel:
    """Spread the taps of ``kernel`` apart by ``dilation``, filling the gaps with zeros.

    The result has extents ``dilation * r`` and ``K_eff[dilation * t] = K[t]``.
    """
    dilation = as_index(dilation, kernel.dim, minimum=1)
    r_eff = tuple(q * r for q, r in zip(dilation, kernel.extents))
    coeffs = np.zeros(tuple(n + 1 for n in r_eff) + (kernel.c_out, kernel.c_in))
    coeffs[tuple(slice(None, None, q) for q in dilation)] = kernel.coeffs
    return Kernel(coeffs, kernel.bias)


def convolve_full(kernel: Kernel, signal: Signal, stride: Sequence[int] | None = None) -> Signal:
    """Zero-padded (strided) convolution ``y[i] = b + sum_t K[t] u[s*i - t]``.

    Reads outside ``[0, N]`` contribute zero. The output covers every ``i``
    with ``s*i <= N``, so its extent is ``N // s``.
    """
    _check_pair(kernel, signal)
    d = kernel.dim
    s = as_index(stride if stride is not None else 1, d, minimum=1)
    n = signal.extent
    m = tuple(nk // sk for nk, sk in zip(n, s))
    u = signal.data
    y = np.zeros(tuple(mk + 1 for mk in m) + (kernel.c_out,))
    for t in itertools.product(*(range(rk + 1) for rk in kernel.extents)):
        # output indices i with 0 <= s*i - t <= N
        lo = [-(-tk // sk) for tk, sk in zip(t, s)]
        hi = [min(mk, (nk + tk) // sk) for mk, nk, tk, sk in zip(m, n, t, s)]
        if any(h < l for l, h in zip(lo, hi)):
            continue
        out_sl = tuple(slice(l, h + 1) for l, h in zip(lo, hi))
        in_sl = tuple(slice(sk * l - tk, sk * h - tk + 1, sk) for l, h, tk, sk in zip(lo, hi, t, s))
        y[out_sl] += u[in_sl] @ kernel.coeffs[t].T
    y += kernel.bias
    return Signal(y)


def crop_window(extent: Sequence[int], r: Sequence[int], mode: Padding | str) -> Tuple[MultiIndex, MultiIndex]:
    """Kept support ``(lo, hi)`` of a full-padding output on ``[0, extent]``.

    ``none`` keeps ``[r, N - r]``, ``same`` keeps ``[r // 2, N - ceil(r / 2)]``
    and ``full`` keeps everything.
    """
    mode = Padding(mode)
    n = tuple(extent)
    r = as_index(r, len(n))
    if mode is Padding.FULL:
        lo, hi = (0,) * len(n), n
    elif mode is Padding.NONE:
        lo = r
        hi = tuple(nk - rk for nk, rk in zip(n, r))
    else:
        lo = tuple(rk // 2 for rk in r)
        hi = tuple(nk - (rk + 1) // 2 for nk, rk in zip(n, r))
    if any(h < l for l, h in zip(lo, hi)):
        raise ShapeError(f"{mode.value} cropping of extent {n} with kernel extent {r} leaves nothing")
    return lo, hi


def crop_for_padding(
    y: Signal,
    r: Sequence[int],
    mode: Padding | str,
    *,
    stride: Sequence[int] | None = None,
    input_extent: Sequence[int] | None = None,
) -> Signal:
    """Crop a full-padding output to the support of the requested padding mode.

    For a strided output pass ``stride`` and the ``input_extent`` it was
    computed from: the window is taken on the input grid and output ``i`` is
    kept when ``s*i`` falls inside it.
    """
    d = y.dim
    if stride is None or all(sk == 1 for sk in as_index(stride, d, minimum=1)):
        lo, hi = crop_window(y.extent, r, mode)
    else:
        s = as_index(stride, d, minimum=1)
        if input_extent is None:
            raise ShapeError("strided cropping needs the input extent")
        lo_in, hi_in = crop_window(as_index(input_extent, d), r, mode)
        lo = tuple(-(-l // sk) for l, sk in zip(lo_in, s))
        hi = tuple(min(h // sk, m) for h, sk, m in zip(hi_in, s, y.extent))
        if any(h < l for l, h in zip(lo, hi)):
            raise ShapeError("strided cropping window contains no output sample")
    return Signal(y.data[tuple(slice(l, h + 1) for l, h in zip(lo, hi))])


def convolve(kernel: Kernel, signal: Signal, config: ConvConfig | None = None) -> Signal:
    """Direct convolutional layer: dilate, convolve with stride, crop per padding mode."""
    config = config or ConvConfig()
    _check_pair(kernel, signal)
    stride, dilation = config.resolved(kernel.dim)
    k_eff = dilate_kernel(kernel, dilation)
    y = convolve_full(k_eff, signal, stride)
    return crop_for_padding(y, k_eff.extents, config.padding, stride=stride, input_extent=signal.extent)


def pad_leading(signal: Signal, amount: Sequence[int]) -> Signal:
    """Prepend ``amount[k]`` zero samples along each direction ``k``."""
    amount = as_index(amount, signal.dim)
    widths = [(a, 0) for a in amount] + [(0, 0)]
    return Signal(np.pad(signal.data, widths))


def patch_offsets(stride: Sequence[int]) -> list[MultiIndex]:
    """Offsets ``t`` in ``[0, s[`` in patch order: lexicographic, last index fastest."""
    return list(itertools.product(*(range(sk) for sk in stride)))


def reshape_strided(signal: Signal, stride: Sequence[int]) -> Signal:
    """Lump each ``s``-patch of pixels into one channel vector.

    Output sample ``i`` is the stack of ``u[s*i + t]`` over ``t`` in
    :func:`patch_offsets` order, so it has ``channels * prod(s)`` channels.
    Only complete patches are kept; trailing pixels that do not fill a patch
    are dropped.
    """
    d = signal.dim
    s = as_index(stride, d, minimum=1)
    counts = tuple(n // sk for n, sk in zip(signal.grid_shape, s))
    if any(c == 0 for c in counts):
        raise ShapeError(f"grid {signal.grid_shape} holds no complete {s} patch")
    c = signal.channels
    u = signal.data[tuple(slice(0, ck * sk) for ck, sk in zip(counts, s))]
    split = u.reshape(tuple(x for pair in zip(counts, s) for x in pair) + (c,))
    order = tuple(range(0, 2 * d, 2)) + tuple(range(1, 2 * d, 2)) + (2 * d,)
    patches = split.transpose(order)
    return Signal(patches.reshape(counts + (int(np.prod(s)) * c,)))


def assemble_patches(signal: Signal, stride: Sequence[int]) -> Signal:
    """Inverse of :func:`reshape_strided` on the covered support."""
    d = signal.dim
    s = as_index(stride, d, minimum=1)
    size = int(np.prod(s))
    if signal.channels % size:
        raise ShapeError(f"{signal.channels} channels do not split into patches of {size}")
    c = signal.channels // size
    counts = signal.grid_shape
    patches = signal.data.reshape(counts + s + (c,))
    order = tuple(x for k in range(d) for x in (k, d + k)) + (2 * d,)
    grid = patches.transpose(order).reshape(tuple(ck * sk for ck, sk in zip(counts, s)) + (c,))
    return Signal(grid)


def strided_patch_kernel(kernel: Kernel, stride: Sequence[int]) -> Kernel:
    """Stride-one kernel acting on patch vectors that reproduces a strided layer.

    With ``v = reshape_strided(pad_leading(u, s - 1), s)`` the strided output
    equals ``b + sum_a P[a] v[i - a]``. Block ``t`` of ``P[a]`` (in patch
    order) is ``K[s*a + s - 1 - t]``, zero where that index exceeds ``r``.
    """
    d = kernel.dim
    s = as_index(stride, d, minimum=1)
    r = kernel.extents
    a_max = tuple(rk // sk for rk, sk in zip(r, s))
    offsets = patch_offsets(s)
    c_in = kernel.c_in
    coeffs = np.zeros(tuple(a + 1 for a in a_max) + (kernel.c_out, c_in * len(offsets)))
    for a in itertools.product(*(range(x + 1) for x in a_max)):
        for j, o in enumerate(offsets):
            t = tuple(sk * ak + sk - 1 - ok for sk, ak, ok in zip(s, a, o))
            if all(tk <= rk for tk, rk in zip(t, r)):
                coeffs[a + (slice(None), slice(j * c_in, (j + 1) * c_in))] = kernel.coeffs[t]
    return Kernel(coeffs, kernel.bias)
