"""Roesser state-space realizations of convolutional layers.

A Roesser model on a d-dimensional grid carries one state ``x_k`` per
direction; ``x_k`` advances along direction ``k``::

    x_k[i + e_k] = f_k + sum_l A_kl x_l[i] + B_k u[i]
    y[i]         = g   + sum_l C_l  x_l[i] + D   u[i]

:class:`RoesserRealization` stores the lumped matrices ``A, B, C, D, f, g``
together with the per-direction state dimensions that partition them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import ShapeError, UnsupportedError
from .tensorcore import (
    ConvConfig,
    Kernel,
    MultiIndex,
    as_index,
    dilate_kernel,
    patch_offsets,
)


def _frozen(array, shape) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True).reshape(shape)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class RoesserRealization:
    """Affine Roesser model with lumped matrices partitioned by ``state_dims``.

    Parameters
    ----------
    state_dims : tuple of int
        ``(n_1, ..., n_d)``; zero entries are allowed and give empty blocks.
    A, B, C, D : ndarray
        Lumped matrices of shapes ``(n, n)``, ``(n, n_u)``, ``(n_y, n)`` and
        ``(n_y, n_u)`` with ``n = sum(state_dims)``.
    f, g : ndarray, optional
        State and output offsets, zero when omitted.
    """

    state_dims: Tuple[int, ...]
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    f: np.ndarray | None = None
    g: np.ndarray | None = None

    def __post_init__(self):
        dims = tuple(int(n) for n in self.state_dims)
        if not dims or any(n < 0 for n in dims):
            raise ShapeError(f"invalid state dims {dims}")
        n = sum(dims)
        D = np.atleast_2d(np.asarray(self.D, dtype=np.float64))
        n_y, n_u = D.shape
        object.__setattr__(self, "state_dims", dims)
        object.__setattr__(self, "D", _frozen(D, (n_y, n_u)))
        for name, shape in (("A", (n, n)), ("B", (n, n_u)), ("C", (n_y, n))):
            value = np.asarray(getattr(self, name), dtype=np.float64)
            if value.size != shape[0] * shape[1] or (value.ndim == 2 and value.shape != shape):
                raise ShapeError(f"{name} has shape {value.shape}, expected {shape}")
            object.__setattr__(self, name, _frozen(value, shape))
        f = np.zeros(n) if self.f is None else np.asarray(self.f, dtype=np.float64)
        g = np.zeros(n_y) if self.g is None else np.asarray(self.g, dtype=np.float64)
        if f.shape != (n,) or g.shape != (n_y,):
            raise ShapeError(f"offset shapes {f.shape}, {g.shape} do not match n={n}, n_y={n_y}")
        object.__setattr__(self, "f", _frozen(f, (n,)))
        object.__setattr__(self, "g", _frozen(g, (n_y,)))
        for name in ("A", "B", "C", "D", "f", "g"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ShapeError(f"{name} contains non-finite entries")

    @property
    def dim(self) -> int:
        return len(self.state_dims)

    @property
    def n(self) -> int:
        return sum(self.state_dims)

    @property
    def input_dim(self) -> int:
        return self.D.shape[1]

    @property
    def output_dim(self) -> int:
        return self.D.shape[0]

    def _slice(self, k: int) -> slice:
        start = sum(self.state_dims[:k])
        return slice(start, start + self.state_dims[k])

    # Block accessors use 0-based direction indices.
    def a_block(self, k: int, l: int) -> np.ndarray:
        return self.A[self._slice(k), self._slice(l)]

    def b_block(self, k: int) -> np.ndarray:
        return self.B[self._slice(k)]

    def c_block(self, k: int) -> np.ndarray:
        return self.C[:, self._slice(k)]

    def f_block(self, k: int) -> np.ndarray:
        return self.f[self._slice(k)]

    def system_matrix(self) -> np.ndarray:
        """The affine block matrix ``[[f, A, B], [g, C, D]]`` acting on ``[1; x; u]``."""
        top = np.hstack([self.f[:, None], self.A, self.B])
        bottom = np.hstack([self.g[:, None], self.C, self.D])
        return np.vstack([top, bottom])

    def linear_part(self) -> "RoesserRealization":
        return RoesserRealization(self.state_dims, self.A, self.B, self.C, self.D)

    def is_block_upper_triangular(self) -> bool:
        return all(
            not np.any(self.a_block(k, l)) for k in range(self.dim) for l in range(k)
        )

    def equals(self, other: "RoesserRealization") -> bool:
        """Exact equality of dimensions and all matrices."""
        if self.state_dims != other.state_dims or self.D.shape != other.D.shape:
            return False
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("A", "B", "C", "D", "f", "g")
        )


@dataclass(frozen=True, eq=False)
class StridedRealization:
    """Roesser model acting on ``reshape_strided(pad_leading(u, s - 1), s)``.

    ``patch_order`` names the channel layout of the reshaped input; the only
    supported order is ``"lexicographic"`` (see ``tensorcore.patch_offsets``).
    """

    inner: RoesserRealization
    stride: MultiIndex
    patch_order: str = "lexicographic"

    def __post_init__(self):
        object.__setattr__(self, "stride", as_index(self.stride, self.inner.dim, minimum=1))
        if self.patch_order != "lexicographic":
            raise ShapeError(f"unknown patch order {self.patch_order!r}")

    @property
    def patch_size(self) -> int:
        return int(np.prod(self.stride))

    @property
    def dim(self) -> int:
        return self.inner.dim


def _shift_down(blocks: int, size: int) -> np.ndarray:
    """Block sub-diagonal identity: block ``j`` receives block ``j - 1``."""
    return np.kron(np.eye(blocks, k=-1), np.eye(size))


def _shift_up(blocks: int, size: int) -> np.ndarray:
    """Block super-diagonal identity: block ``j`` receives block ``j + 1``."""
    return np.kron(np.eye(blocks, k=1), np.eye(size))


def _last_block(blocks: int, size: int) -> np.ndarray:
    """``[0, ..., 0, I]`` as a ``size x blocks*size`` row."""
    out = np.zeros((size, blocks * size))
    if blocks:
        out[:, -size:] = np.eye(size)
    return out


def build_1d(kernel: Kernel) -> RoesserRealization:
    """Shift-register realization of a 1-D convolution.

    The state holds the last ``r`` inputs, oldest first, so ``C = [K[r] ... K[1]]``,
    ``D = K[0]`` and the state dimension is ``r * c_in``.
    """
    if kernel.dim != 1:
        raise ShapeError(f"build_1d needs a 1-D kernel, got dim {kernel.dim}")
    (r,) = kernel.extents
    c_in = kernel.c_in
    A = _shift_up(r, c_in)
    B = _last_block(r, c_in).T
    C = np.hstack([kernel[(t,)] for t in range(r, 0, -1)]) if r else np.zeros((kernel.c_out, 0))
    return RoesserRealization((r * c_in,), A, B, C, kernel[(0,)], g=kernel.bias)


def build_2d(kernel: Kernel) -> RoesserRealization:
    """Realization of a 2-D layer with ``n_1 = c_out*r_1`` and ``n_2 = c_in*r_2``.

    ``[A_12 B_1; C_2 D]`` is the kernel grid with both indices reversed, so
    ``K[r_1, r_2]`` sits top-left and ``K[0, 0]`` is ``D``. ``x_1`` is a
    delay line of partial output sums and ``x_2`` a delay line of inputs.
    """
    if kernel.dim != 2:
        raise ShapeError(f"build_2d needs a 2-D kernel, got dim {kernel.dim}")
    r1, r2 = kernel.extents
    c_in, c_out = kernel.c_in, kernel.c_out
    n1, n2 = c_out * r1, c_in * r2
    grid = np.block(
        [[kernel[(t1, t2)] for t2 in range(r2, -1, -1)] for t1 in range(r1, -1, -1)]
    )
    A12, B1 = grid[:n1, :n2], grid[:n1, n2:]
    C2, D = grid[n1:, :n2], grid[n1:, n2:]
    A = np.block(
        [
            [_shift_down(r1, c_out), A12],
            [np.zeros((n2, n1)), _shift_up(r2, c_in)],
        ]
    )
    B = np.vstack([B1, _last_block(r2, c_in).T])
    C = np.hstack([_last_block(r1, c_out), C2])
    return RoesserRealization((n1, n2), A, B, C, D, g=kernel.bias)


def _reversed_grid(extents: Sequence[int]):
    return itertools.product(*(range(r, -1, -1) for r in extents))


def mat(kernel: Kernel) -> np.ndarray:
    """Flatten a kernel into the ``[A_1. B_1; C_. D]`` block matrix.

    Block rows run over ``t_1 = r_1, ..., 0``; block columns run over
    ``(t_2, ..., t_d)`` in reversed lexicographic order with ``t_d`` varying
    fastest. The shape is ``c_out*(r_1+1) x c_in*prod_{k>=2}(r_k+1)``.
    """
    if kernel.dim < 2:
        raise ShapeError("mat needs a kernel of dimension >= 2")
    r = kernel.extents
    return np.block(
        [
            [kernel[(t1,) + rest] for rest in _reversed_grid(r[1:])]
            for t1 in range(r[0], -1, -1)
        ]
    )


def nd_state_dims(extents: Sequence[int], c_in: int, c_out: int) -> Tuple[int, ...]:
    """State dimensions of :func:`build_nd`.

    ``n_1 = c_out*r_1`` and ``n_k = c_in*r_k*prod_{j>k}(r_j + 1)`` for ``k >= 2``;
    ``n_2 + ... + n_d + c_in`` then equals the column count of :func:`mat`.
    """
    r = tuple(extents)
    dims = [c_out * r[0]]
    for k in range(1, len(r)):
        dims.append(c_in * r[k] * int(np.prod([rj + 1 for rj in r[k + 1:]], dtype=int)))
    return tuple(dims)


def build_nd(kernel: Kernel) -> RoesserRealization:
    """Realization of a d-dimensional layer, ``d >= 2``.

    ``x_k`` for ``k >= 2`` stores the input samples ``u[i - (0, .., t_k, .., t_d)]``
    with ``t_k >= 1``, ordered like the columns of :func:`mat`; advancing along
    direction ``k`` shifts it by one block, which gives the ``[0 I]`` rows. The
    state is block upper triangular across directions.
    """
    d = kernel.dim
    if d == 1:
        raise ShapeError("build_nd needs dim >= 2; use build_1d for 1-D kernels")
    r = kernel.extents
    c_in, c_out = kernel.c_in, kernel.c_out
    dims = nd_state_dims(r, c_in, c_out)
    n, n1 = sum(dims), dims[0]
    m = mat(kernel)
    AB = np.zeros((n, n + c_in))
    AB[:n1, :n1] = _shift_down(r[0], c_out)
    AB[:n1, n1:] = m[:n1]
    start = n1
    for nk in dims[1:]:
        # [A_kk ... A_kd B_k] = [0 I]; the identity covers the last n_k columns
        width = n + c_in - start
        AB[start:start + nk, start + width - nk:start + width] = np.eye(nk)
        start += nk
    C = np.hstack([_last_block(r[0], c_out), m[n1:, :n - n1]])
    D = m[n1:, n - n1:]
    return RoesserRealization(dims, AB[:, :n], AB[:, n:], C, D, g=kernel.bias)


def build_dilated(kernel: Kernel, dilation: Sequence[int]) -> RoesserRealization:
    """Realization of a dilated layer: expand the kernel, then realize it."""
    expanded = dilate_kernel(kernel, dilation)
    return build_1d(expanded) if expanded.dim == 1 else build_nd(expanded)


def strided_state_dims(extents: Sequence[int], stride: Sequence[int], c_in: int, c_out: int) -> Tuple[int, int]:
    r1, r2 = extents
    s1, s2 = stride
    return c_out * -(-(r1 - s1 + 1) // s1), c_in * (r2 - s2 + 1) * s1


def build_strided(kernel: Kernel, stride: Sequence[int]) -> StridedRealization:
    """Realization of a 2-D strided layer acting on reshaped input patches.

    The input is first padded with ``s - 1`` leading zeros and reshaped into
    ``s``-patches (lexicographic order), so patch ``i`` ends at pixel ``s*i``
    and the output at ``i`` is ``b + sum_t K[t] u[s*i - t]``.

    ``x_1`` holds ``r_1 // s_1`` blocks of partial sums over earlier patch
    rows. ``x_2`` holds, for each of the ``s_1`` rows of the current patch
    row, the ``r_2 - s_2 + 1`` earlier pixel columns at lags ``r_2, ..., s_2``.
    Rows of kernel indices beyond ``r_1`` are zero-padded on the oldest side.
    """
    if kernel.dim != 2:
        raise UnsupportedError(f"strided realizations are built for 2-D kernels only, got dim {kernel.dim}")
    s1, s2 = s = as_index(stride, 2, minimum=1)
    r1, r2 = r = kernel.extents
    if s1 > r1 + 1 or s2 > r2 + 1:
        raise ShapeError(f"stride {s} exceeds kernel size {(r1 + 1, r2 + 1)}")
    c_in, c_out = kernel.c_in, kernel.c_out
    lags1 = r1 // s1
    cols = r2 - s2 + 1
    n1, n2 = c_out * lags1, c_in * s1 * cols
    n = n1 + n2
    offsets = patch_offsets(s)
    n_u = c_in * len(offsets)

    def K(t1, t2):
        if t1 > r1 or t2 > r2:
            return np.zeros((c_out, c_in))
        return kernel[(t1, t2)]

    def x1(j):
        return slice(j * c_out, (j + 1) * c_out)

    def x2(o1, t2):
        q = o1 * cols + (r2 - t2)
        return slice(n1 + q * c_in, n1 + (q + 1) * c_in)

    def patch(o1, o2):
        j = offsets.index((o1, o2))
        return slice(j * c_in, (j + 1) * c_in)

    A = np.zeros((n, n))
    B = np.zeros((n, n_u))
    C = np.zeros((c_out, n))
    D = np.zeros((c_out, n_u))
    for j in range(lags1):
        lag = lags1 - j
        if j:
            A[x1(j), x1(j - 1)] = np.eye(c_out)
        for o1 in range(s1):
            t1 = s1 * lag + s1 - 1 - o1
            for t2 in range(r2, s2 - 1, -1):
                A[x1(j), x2(o1, t2)] = K(t1, t2)
            for o2 in range(s2):
                B[x1(j), patch(o1, o2)] = K(t1, s2 - 1 - o2)
    if lags1:
        C[:, x1(lags1 - 1)] = np.eye(c_out)
    for o1 in range(s1):
        t1 = s1 - 1 - o1
        for t2 in range(r2, s2 - 1, -1):
            C[:, x2(o1, t2)] = K(t1, t2)
            if t2 >= 2 * s2:
                A[x2(o1, t2), x2(o1, t2 - s2)] = np.eye(c_in)
            else:
                B[x2(o1, t2), patch(o1, 2 * s2 - 1 - t2)] = np.eye(c_in)
        for o2 in range(s2):
            D[:, patch(o1, o2)] = K(t1, s2 - 1 - o2)
    inner = RoesserRealization((n1, n2), A, B, C, D, g=kernel.bias)
    return StridedRealization(inner, s)


def realize(kernel: Kernel, config: ConvConfig | None = None) -> RoesserRealization | StridedRealization:
    """Pick the builder matching ``config``: dilation first, then stride."""
    config = config or ConvConfig()
    stride, dilation = config.resolved(kernel.dim)
    expanded = dilate_kernel(kernel, dilation)
    if any(sk > 1 for sk in stride):
        if kernel.dim != 2:
            raise UnsupportedError("strided realizations are only available for 2-D kernels")
        return build_strided(expanded, stride)
    return build_1d(expanded) if expanded.dim == 1 else build_nd(expanded)
