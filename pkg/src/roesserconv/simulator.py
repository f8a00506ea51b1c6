"""Finite-grid evaluation of Roesser models with zero initial conditions."""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .realization import (
    RoesserRealization,
    StridedRealization,
    build_1d,
    build_nd,
    build_strided,
)
from .tensorcore import (
    ConvConfig,
    Kernel,
    Signal,
    as_index,
    crop_for_padding,
    dilate_kernel,
    pad_leading,
    reshape_strided,
    strided_patch_kernel,
)

ORDERS = ("row-major", "wavefront")


def _check(realization: RoesserRealization, signal: Signal) -> None:
    if signal.dim != realization.dim:
        raise ShapeError(f"signal dim {signal.dim} != realization dim {realization.dim}")
    if signal.channels != realization.input_dim:
        raise ShapeError(
            f"realization expects {realization.input_dim} input channels, signal has {signal.channels}"
        )


class _Stepper:
    """One grid point of the recursion: ``[x_next; y] = M [1; x; u]``."""

    def __init__(self, realization: RoesserRealization):
        self.M = realization.system_matrix()
        self.n = realization.n
        bounds = np.cumsum((0,) + realization.state_dims)
        self.parts = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        self.one = np.ones(1)

    def __call__(self, states, u):
        out = self.M @ np.concatenate([self.one, *states, u])
        return [out[p] for p in self.parts], out[self.n:]


def _row_major(realization: RoesserRealization, signal: Signal) -> np.ndarray:
    # x_k written at i is read at i + e_k, one full sweep of the trailing
    # directions later, so keep one slot per trailing index (i_{k+1}, ..., i_d).
    step = _Stepper(realization)
    shape = signal.grid_shape
    d = len(shape)
    dims = realization.state_dims
    frontier = [np.zeros(shape[k + 1:] + (dims[k],)) for k in range(d)]
    zeros = [np.zeros(nk) for nk in dims]
    y = np.empty(shape + (realization.output_dim,))
    for i in itertools.product(*(range(n) for n in shape)):
        states = [zeros[k] if i[k] == 0 else frontier[k][i[k + 1:]] for k in range(d)]
        nxt, y[i] = step(states, signal.data[i])
        for k in range(d):
            frontier[k][i[k + 1:]] = nxt[k]
    return y


def _wavefront(realization: RoesserRealization, signal: Signal) -> np.ndarray:
    # Points with equal index sum only depend on the previous anti-diagonal.
    step = _Stepper(realization)
    shape = signal.grid_shape
    d = len(shape)
    dims = realization.state_dims
    store = [np.zeros(shape + (dims[k],)) for k in range(d)]
    y = np.empty(shape + (realization.output_dim,))
    points = sorted(itertools.product(*(range(n) for n in shape)), key=sum)
    for i in points:
        nxt, y[i] = step([store[k][i] for k in range(d)], signal.data[i])
        for k in range(d):
            if i[k] + 1 < shape[k]:
                store[k][i[:k] + (i[k] + 1,) + i[k + 1:]] = nxt[k]
    return y


def simulate(realization: RoesserRealization, signal: Signal, order: str = "row-major") -> Signal:
    """Run the affine Roesser recursion over the grid of ``signal``.

    States ``x_k`` are zero on the face ``i_k = 0``; the output has the same
    extent as the input. ``order`` selects the sweep (``"row-major"`` keeps
    only the state frontier, ``"wavefront"`` sweeps anti-diagonals over a full
    state grid); both give bit-identical results.
    """
    _check(realization, signal)
    if order == "row-major":
        return Signal(_row_major(realization, signal))
    if order == "wavefront":
        return Signal(_wavefront(realization, signal))
    raise ValueError(f"unknown order {order!r}, expected one of {ORDERS}")


def simulate_strided(realization: StridedRealization, signal: Signal) -> Signal:
    """Pad, reshape into patches and run the inner model. Output extent is ``N // s``."""
    s = realization.stride
    patches = reshape_strided(pad_leading(signal, tuple(sk - 1 for sk in s)), s)
    return simulate(realization.inner, patches)


def impulse_response(realization: RoesserRealization, extent: Sequence[int]) -> np.ndarray:
    """Response to a unit impulse per input channel with the offsets ``f, g`` removed.

    Returns ``H`` of shape ``(N_1 + 1, ..., N_d + 1, n_y, n_u)``; for a
    realization of a kernel, ``H[t] = K[t]`` on ``[0, r]`` and zero elsewhere.
    """
    extent = as_index(extent, realization.dim)
    linear = realization.linear_part()
    n_u = realization.input_dim
    H = np.zeros(tuple(n + 1 for n in extent) + (realization.output_dim, n_u))
    for j in range(n_u):
        H[..., j] = simulate(linear, Signal.impulse(extent, n_u, j)).data
    return H


def run_layer(kernel: Kernel, config: ConvConfig | None, signal: Signal) -> Signal:
    """Evaluate a convolutional layer through its state-space realization.

    Dilation expands the kernel; a stride reshapes the padded input into
    patches (2-D kernels use :func:`build_strided`, other dimensions realize the
    stride-one patch kernel); padding modes crop the result.
    """
    config = config or ConvConfig()
    if kernel.dim != signal.dim or kernel.c_in != signal.channels:
        raise ShapeError(
            f"kernel (dim {kernel.dim}, c_in {kernel.c_in}) does not match signal "
            f"(dim {signal.dim}, channels {signal.channels})"
        )
    stride, dilation = config.resolved(kernel.dim)
    expanded = dilate_kernel(kernel, dilation)
    r = expanded.extents
    if all(sk == 1 for sk in stride):
        real = build_1d(expanded) if expanded.dim == 1 else build_nd(expanded)
        y = simulate(real, signal)
    elif expanded.dim == 2 and all(sk <= rk + 1 for sk, rk in zip(stride, r)):
        y = simulate_strided(build_strided(expanded, stride), signal)
    else:
        patch_kernel = strided_patch_kernel(expanded, stride)
        real = build_1d(patch_kernel) if patch_kernel.dim == 1 else build_nd(patch_kernel)
        patches = reshape_strided(pad_leading(signal, tuple(sk - 1 for sk in stride)), stride)
        y = simulate(real, patches)
    return crop_for_padding(y, r, config.padding, stride=stride, input_extent=signal.extent)
