"""Executable checks for realizations: equivalence, kernel recovery, ranks and dimensions.

Numerical rank uses the usual SVD convention: singular values above
``max(shape) * sigma_max * eps`` count.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ShapeError, UnsupportedError
from .realization import (
    RoesserRealization,
    StridedRealization,
    nd_state_dims,
    realize,
    strided_state_dims,
)
from .simulator import impulse_response, simulate, simulate_strided
from .tensorcore import (
    ConvConfig,
    Kernel,
    Signal,
    as_index,
    convolve,
    crop_for_padding,
    dilate_kernel,
    strided_patch_kernel,
)

EQUIVALENCE_TOL = 1e-12
COEFF_TOL = 1e-12
CLI_RESIDUAL_TOL = 1e-9


def numerical_rank(M: np.ndarray) -> tuple[int, np.ndarray, float]:
    """Rank of ``M`` with the tolerance ``max(shape) * sigma_max * eps``.

    Returns ``(rank, singular_values, tolerance)``; empty matrices have rank 0.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0, np.zeros(0), 0.0
    sigma = np.linalg.svd(M, compute_uv=False)
    tol = max(M.shape) * sigma[0] * np.finfo(np.float64).eps
    return int(np.sum(sigma > tol)), sigma, float(tol)


def controllability_matrix(A: np.ndarray, B: np.ndarray, steps: int | None = None) -> np.ndarray:
    """``[B, AB, ..., A^{steps-1} B]``, with ``steps`` defaulting to the state dimension."""
    steps = A.shape[0] if steps is None else steps
    blocks, P = [], B
    for _ in range(steps):
        blocks.append(P)
        P = A @ P
    return np.hstack(blocks) if blocks else np.zeros((A.shape[0], 0))


def observability_matrix(A: np.ndarray, C: np.ndarray, steps: int | None = None) -> np.ndarray:
    """``[C; CA; ...; C A^{steps-1}]``."""
    steps = A.shape[0] if steps is None else steps
    blocks, P = [], C
    for _ in range(steps):
        blocks.append(P)
        P = P @ A
    return np.vstack(blocks) if blocks else np.zeros((0, A.shape[0]))


def lumped_ranks(realization: RoesserRealization) -> tuple[int, int]:
    """Controllability and observability ranks of the lumped pair ``(A, B, C)``."""
    A, B, C = realization.A, realization.B, realization.C
    return (
        numerical_rank(controllability_matrix(A, B))[0],
        numerical_rank(observability_matrix(A, C))[0],
    )


@dataclass(frozen=True)
class RankCertificate:
    """Outcome of the rank test ``rank(O_r R_r) >= c_in * (r_1 + r_2)``.

    ``required`` and ``holds`` are ``None`` when the hypotheses (``c_in == c_out``
    and ``K[r_1, r_2]`` of full column rank) fail. ``rank`` is a lower bound
    on the state dimension of every realization of the kernel either way.
    """

    order: int
    rank: int
    required: int | None
    holds: bool | None
    applicable: bool
    reason: str
    sigma_min: float
    square: bool
    leading_residual: float
    nilpotency_residual: float
    coefficients_ok: bool
    tolerance: float

    def to_dict(self) -> dict:
        return asdict(self)


def certificate_product(realization: RoesserRealization, order: int) -> np.ndarray:
    """``[C; CA; ...; CA^{r-1}] [A^{r-1}B, ..., AB, B]`` for ``r = order``."""
    A, B, C = realization.A, realization.B, realization.C
    O = observability_matrix(A, C, order)
    R = controllability_matrix(A, B, order)
    # reverse the block columns: A^{r-1} B first
    n_u = B.shape[1]
    R = np.hstack([R[:, j * n_u:(j + 1) * n_u] for j in range(order - 1, -1, -1)]) if order else R
    return O @ R


def coefficient_sums(kernel: Kernel) -> list[np.ndarray]:
    """``S[m] = sum over |t| = m of K[t]`` for ``m = 0 .. r_1 + r_2``."""
    r = kernel.extents
    sums = [np.zeros((kernel.c_out, kernel.c_in)) for _ in range(sum(r) + 1)]
    for t in np.ndindex(*(rk + 1 for rk in r)):
        sums[sum(t)] += kernel[t]
    return sums


def certificate_product_from_kernel(kernel: Kernel) -> np.ndarray:
    """The same product computed from kernel coefficients alone.

    Block ``(i, j)`` is ``S[r + i - j]``, zero above total degree ``r``. Any
    realization of the kernel has ``C A^k B = S[k + 1]``, so this matrix does
    not depend on which realization is used.
    """
    if kernel.dim != 2:
        raise UnsupportedError("the rank certificate is defined for 2-D kernels")
    S = coefficient_sums(kernel)
    r = len(S) - 1
    zero = np.zeros((kernel.c_out, kernel.c_in))
    if r == 0:
        return np.zeros((0, 0))
    return np.block(
        [[S[r + i - j] if r + i - j <= r else zero for j in range(r)] for i in range(r)]
    )


def _pow_products(realization: RoesserRealization, ks: Sequence[int]) -> dict[int, np.ndarray]:
    A, B, C = realization.A, realization.B, realization.C
    out, P = {}, B
    for k in range(max(ks) + 1):
        if k in ks:
            out[k] = C @ P
        P = A @ P
    return out


def minimality_certificate(realization: RoesserRealization, kernel: Kernel) -> RankCertificate:
    """Rank certificate that the realization's state dimension cannot be reduced.

    Builds ``O_r R_r`` from the lumped matrices with ``r = r_1 + r_2`` and
    checks the coefficient identities ``C A^{r-1} B = K[r_1, r_2]`` and
    ``C A^k B = 0`` for ``r <= k <= r + 2`` (``D = K[0, 0]`` when ``r = 0``).
    """
    if realization.dim != 2 or kernel.dim != 2:
        raise UnsupportedError("minimality certificate is only defined for 2-D realizations")
    if realization.input_dim != kernel.c_in or realization.output_dim != kernel.c_out:
        raise ShapeError("realization and kernel channel counts differ")
    r = sum(kernel.extents)
    lead = kernel.leading()
    lead_rank, lead_sigma, _ = numerical_rank(lead)
    full_column = lead_rank == kernel.c_in
    square = kernel.c_in == kernel.c_out
    applicable = square and full_column
    if applicable:
        reason = "c_in == c_out and K[r1, r2] has full column rank"
    elif not square:
        reason = "not applicable: c_in != c_out"
    else:
        reason = "not applicable: K[r1, r2] lacks full column rank"

    rank, _, _ = numerical_rank(certificate_product(realization, r))
    required = kernel.c_in * r if applicable else None
    holds = (rank >= required) if applicable else None

    products = _pow_products(realization, [k for k in (r - 1, r, r + 1, r + 2) if k >= 0])
    leading_term = products[r - 1] if r >= 1 else realization.D
    leading_residual = float(np.max(np.abs(leading_term - lead), initial=0.0))
    nilpotency_residual = float(
        max(np.max(np.abs(products[k]), initial=0.0) for k in (r, r + 1, r + 2))
    )
    tol = COEFF_TOL * max(1.0, float(np.max(np.abs(kernel.coeffs), initial=0.0)))
    return RankCertificate(
        order=r,
        rank=rank,
        required=required,
        holds=holds,
        applicable=applicable,
        reason=reason,
        sigma_min=float(lead_sigma[-1]) if lead_sigma.size else 0.0,
        square=square,
        leading_residual=leading_residual,
        nilpotency_residual=nilpotency_residual,
        coefficients_ok=leading_residual <= tol and nilpotency_residual <= tol,
        tolerance=tol,
    )


@dataclass(frozen=True)
class Observability1D:
    controllable: bool
    observable: bool
    controllability_rank: int
    observability_rank: int
    state_dim: int
    leading_full_column_rank: bool


def observability_1d(realization: RoesserRealization, kernel: Kernel) -> Observability1D:
    """Controllability and observability of a 1-D realization.

    For the shift-register realization the pair ``(A, B)`` is always
    controllable and ``(A, C)`` is observable exactly when ``K[r]`` has full
    column rank (for ``r >= 1``), in which case the realization is minimal.
    """
    if realization.dim != 1:
        raise UnsupportedError("observability_1d needs a 1-D realization")
    n = realization.n
    ctrb, obsv = lumped_ranks(realization)
    lead_rank = numerical_rank(kernel.leading())[0]
    return Observability1D(
        controllable=ctrb == n,
        observable=obsv == n,
        controllability_rank=ctrb,
        observability_rank=obsv,
        state_dim=n,
        leading_full_column_rank=lead_rank == kernel.c_in,
    )


def hankel_rank(kernel: Kernel) -> int:
    """Rank of the block Hankel matrix ``[K[i + j + 1]]`` of a 1-D kernel, its McMillan degree."""
    if kernel.dim != 1:
        raise UnsupportedError("hankel_rank needs a 1-D kernel")
    (r,) = kernel.extents
    if r == 0:
        return 0
    zero = np.zeros((kernel.c_out, kernel.c_in))
    H = np.block([[kernel[(i + j + 1,)] if i + j + 1 <= r else zero for j in range(r)] for i in range(r)])
    return numerical_rank(H)[0]


@dataclass(frozen=True)
class DimReport:
    state_dims: tuple[int, ...]
    total: int
    expected: tuple[int, ...] | None
    matches: bool | None

    def rows(self) -> list[tuple[str, str]]:
        rows = [(f"n_{k + 1}", str(n)) for k, n in enumerate(self.state_dims)]
        rows.append(("total", str(self.total)))
        if self.expected is not None:
            rows.append(("expected", " ".join(map(str, self.expected))))
            rows.append(("matches", str(self.matches)))
        return rows


def expected_state_dims(kernel: Kernel, stride: Sequence[int] | None = None) -> tuple[int, ...]:
    """State dimensions the builders produce for ``kernel`` (already dilated)."""
    r = kernel.extents
    if stride is not None and any(s > 1 for s in stride):
        return strided_state_dims(r, stride, kernel.c_in, kernel.c_out)
    if kernel.dim == 1:
        return (kernel.c_in * r[0],)
    return nd_state_dims(r, kernel.c_in, kernel.c_out)


def dim_report(
    realization: RoesserRealization | StridedRealization,
    kernel: Kernel | None = None,
) -> DimReport:
    """State dimensions of a realization, compared against the builder formulas when a kernel is given."""
    stride = None
    if isinstance(realization, StridedRealization):
        stride = realization.stride
        realization = realization.inner
    dims = realization.state_dims
    if kernel is None:
        return DimReport(dims, sum(dims), None, None)
    expected = expected_state_dims(kernel, stride)
    return DimReport(dims, sum(dims), expected, expected == dims)


@dataclass
class VerificationReport:
    max_abs_residual: float
    kernel_recovered: bool
    state_dims: tuple[int, ...]
    dim_lower_bound: int | None
    rank_certificate: RankCertificate | None
    controllability_rank: int
    observability_rank: int
    trials: int
    extent: tuple[int, ...]
    seed: int
    notes: list[str] = field(default_factory=list)

    @property
    def certificate_ok(self) -> bool:
        cert = self.rank_certificate
        if cert is None:
            return True
        return cert.coefficients_ok and cert.holds is not False

    @property
    def passed(self) -> bool:
        return (
            self.max_abs_residual <= CLI_RESIDUAL_TOL
            and self.kernel_recovered
            and self.certificate_ok
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["state_dims"] = list(self.state_dims)
        out["extent"] = list(self.extent)
        out["passed"] = self.passed
        return out


def _layer_output(
    realization: RoesserRealization | StridedRealization,
    r_eff: Sequence[int],
    config: ConvConfig,
    signal: Signal,
) -> Signal:
    if isinstance(realization, StridedRealization):
        y = simulate_strided(realization, signal)
        stride = realization.stride
    else:
        y = simulate(realization, signal)
        stride = None
    return crop_for_padding(y, r_eff, config.padding, stride=stride, input_extent=signal.extent)


def verify_equivalence(
    kernel: Kernel,
    config: ConvConfig | None = None,
    trials: int = 5,
    extent: Sequence[int] | None = None,
    seed: int = 0,
    realization: RoesserRealization | StridedRealization | None = None,
) -> VerificationReport:
    """Compare a realization against the direct convolution and recover its kernel.

    Random inputs are drawn from ``numpy.random.Generator(PCG64(seed))``. When
    ``realization`` is omitted the builder chosen by ``config`` is used.
    Kernel recovery probes the linear part with impulses over ``[0, r + 1]``
    and requires ``H = K`` (or the patch kernel for strided models) to
    ``1e-12`` with zeros beyond ``r``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    config = config or ConvConfig()
    stride, dilation = config.resolved(kernel.dim)
    expanded = dilate_kernel(kernel, dilation)
    r_eff = expanded.extents
    if realization is None:
        realization = realize(kernel, config)
    strided = isinstance(realization, StridedRealization)
    if strided and tuple(realization.stride) != tuple(stride):
        raise ShapeError(f"realization stride {realization.stride} != configured stride {stride}")
    if not strided and any(sk > 1 for sk in stride):
        raise ShapeError("a plain realization cannot evaluate a strided layer")
    inner = realization.inner if strided else realization
    if inner.dim != kernel.dim:
        raise ShapeError(f"realization dim {inner.dim} != kernel dim {kernel.dim}")
    if extent is None:
        extent = tuple(rk + 2 * sk + 1 for rk, sk in zip(r_eff, stride))
    extent = as_index(extent, kernel.dim)

    rng = np.random.Generator(np.random.PCG64(seed))
    grid = tuple(n + 1 for n in extent)
    residual = 0.0
    for _ in range(trials):
        u = Signal(rng.standard_normal(grid + (kernel.c_in,)))
        expected = convolve(kernel, u, config)
        got = _layer_output(realization, r_eff, config, u)
        if got.data.shape != expected.data.shape:
            residual = float("inf")
            break
        residual = max(residual, float(np.max(np.abs(got.data - expected.data))))

    target = strided_patch_kernel(expanded, stride) if strided else expanded
    probe = tuple(rk + 1 for rk in target.extents)
    notes = []
    if inner.input_dim != target.c_in or inner.output_dim != target.c_out:
        recovered = False
        notes.append("realization channel counts do not match the kernel")
    else:
        H = impulse_response(inner, probe)
        window = tuple(slice(0, rk + 1) for rk in target.extents)
        outside = H.copy()
        outside[window] = 0.0
        recovered = bool(
            np.max(np.abs(H[window] - target.coeffs)) <= EQUIVALENCE_TOL
            and np.max(np.abs(outside)) <= EQUIVALENCE_TOL
        )

    certificate = None
    lower_bound = None
    if inner.dim == 2 and not strided:
        certificate = minimality_certificate(inner, expanded)
        lower_bound = certificate.rank
    elif inner.dim == 1 and not strided:
        lower_bound = hankel_rank(expanded)
    else:
        notes.append("rank certificate not applicable (strided or d > 2)")
    ctrb, obsv = lumped_ranks(inner)
    return VerificationReport(
        max_abs_residual=residual,
        kernel_recovered=recovered,
        state_dims=inner.state_dims,
        dim_lower_bound=lower_bound,
        rank_certificate=certificate,
        controllability_rank=ctrb,
        observability_rank=obsv,
        trials=trials,
        extent=tuple(extent),
        seed=seed,
        notes=notes,
    )
