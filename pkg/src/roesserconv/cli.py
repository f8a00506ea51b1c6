"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 unsupported
combination.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from . import jsonio
from .analysis import (
    dim_report,
    lumped_ranks,
    minimality_certificate,
    observability_1d,
    verify_equivalence,
)
from .errors import FormatError, RoesserError, ShapeError, UnsupportedError
from .realization import RoesserRealization, StridedRealization, realize
from .simulator import simulate, simulate_strided
from .tensorcore import ConvConfig, Kernel, Padding, Signal, convolve, dilate_kernel

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_UNSUPPORTED = 0, 1, 2, 3


def generate_kernel(dim: int, extents: Sequence[int], c_in: int, c_out: int, seed: int) -> Kernel:
    """Standard-normal kernel from PCG64(seed): coefficients (row-major) first, then bias."""
    if len(extents) != dim or any(r < 0 for r in extents) or c_in < 1 or c_out < 1:
        raise ShapeError("kernel needs dim extents >= 0 and positive channel counts")
    rng = np.random.Generator(np.random.PCG64(seed))
    coeffs = rng.standard_normal(tuple(r + 1 for r in extents) + (c_out, c_in))
    bias = rng.standard_normal(c_out)
    return Kernel(coeffs, bias)


def generate_signal(dim: int, extents: Sequence[int], channels: int, seed: int) -> Signal:
    """Standard-normal signal from PCG64(seed), row-major with channel innermost."""
    if len(extents) != dim or any(n < 0 for n in extents) or channels < 1:
        raise ShapeError("signal needs dim extents >= 0 and a positive channel count")
    rng = np.random.Generator(np.random.PCG64(seed))
    return Signal(rng.standard_normal(tuple(n + 1 for n in extents) + (channels,)))


def _table(rows, out=None) -> None:
    out = out or sys.stdout
    width = max((len(k) for k, _ in rows), default=0)
    for key, value in rows:
        print(f"{key:<{width}}  {value}", file=out)


def _emit(obj, path: str | None) -> None:
    if path:
        jsonio.save(obj, path)
    else:
        sys.stdout.write(jsonio.dumps(obj))


def _config(args) -> ConvConfig:
    return ConvConfig(
        stride=tuple(args.stride) if args.stride else None,
        dilation=tuple(args.dilation) if args.dilation else None,
        padding=getattr(args, "padding", "full"),
    )


def cmd_gen(args) -> int:
    if args.what == "kernel":
        if args.r is None:
            raise ShapeError("gen kernel needs -r")
        obj = generate_kernel(args.d, args.r, args.cin, args.cout, args.seed)
    else:
        if args.N is None:
            raise ShapeError("gen signal needs -N")
        obj = generate_signal(args.d, args.N, args.c, args.seed)
    _emit(obj, args.output)
    return EXIT_OK


def cmd_realize(args) -> int:
    kernel = jsonio.load(args.kernel, "kernel")
    config = _config(args)
    real = realize(kernel, config)
    _emit(real, args.output)
    if not args.quiet:
        _, dilation = config.resolved(kernel.dim)
        report = dim_report(real, dilate_kernel(kernel, dilation))
        _table(report.rows(), sys.stdout if args.output else sys.stderr)
    return EXIT_OK


def cmd_convolve(args) -> int:
    kernel = jsonio.load(args.kernel, "kernel")
    signal = jsonio.load(args.signal, "signal")
    _emit(convolve(kernel, signal, _config(args)), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    real = jsonio.load(args.realization)
    signal = jsonio.load(args.signal, "signal")
    if isinstance(real, StridedRealization):
        y = simulate_strided(real, signal)
    elif isinstance(real, RoesserRealization):
        y = simulate(real, signal)
    else:
        raise FormatError("expected a realization document")
    _emit(y, args.output)
    return EXIT_OK


def _report_rows(report) -> list[tuple[str, str]]:
    rows = [
        ("max_abs_residual", f"{report.max_abs_residual:.3e}"),
        ("kernel_recovered", str(report.kernel_recovered)),
        ("state_dims", " ".join(map(str, report.state_dims))),
        ("total_state_dim", str(sum(report.state_dims))),
        ("dim_lower_bound", str(report.dim_lower_bound)),
        ("controllability_rank", str(report.controllability_rank)),
        ("observability_rank", str(report.observability_rank)),
    ]
    cert = report.rank_certificate
    if cert is None:
        rows.append(("rank_certificate", "n/a"))
    elif cert.applicable:
        rows.append(("rank_certificate", f"{cert.rank}/{cert.required} holds={cert.holds}"))
    else:
        rows.append(("rank_certificate", f"rank {cert.rank}, {cert.reason}"))
    if cert is not None:
        rows.append(("coefficients_ok", str(cert.coefficients_ok)))
    rows.append(("passed", str(report.passed)))
    return rows


def cmd_verify(args) -> int:
    kernel = jsonio.load(args.kernel, "kernel")
    real = jsonio.load(args.realization) if args.realization else None
    config = _config(args)
    if isinstance(real, StridedRealization) and not args.stride:
        config = ConvConfig(stride=real.stride, dilation=config.dilation, padding=config.padding)
    report = verify_equivalence(
        kernel,
        config,
        trials=args.trials,
        extent=tuple(args.extent) if args.extent else None,
        seed=args.seed,
        realization=real,
    )
    if args.json:
        jsonio.save(report, args.json)
    if not args.quiet:
        _table(_report_rows(report))
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_analyze(args) -> int:
    real = jsonio.load(args.realization)
    kernel = jsonio.load(args.kernel, "kernel") if args.kernel else None
    inner = real.inner if isinstance(real, StridedRealization) else real
    report = dim_report(real, kernel)
    rows = report.rows()
    ctrb, obsv = lumped_ranks(inner)
    rows += [("controllability_rank", str(ctrb)), ("observability_rank", str(obsv))]
    ok = report.matches is not False
    if kernel is not None and not isinstance(real, StridedRealization):
        if inner.dim == 2:
            cert = minimality_certificate(inner, kernel)
            rows += [
                ("certificate_rank", str(cert.rank)),
                ("certificate_required", str(cert.required)),
                ("certificate_holds", str(cert.holds)),
                ("coefficients_ok", str(cert.coefficients_ok)),
                ("sigma_min_K_r", f"{cert.sigma_min:.3e}"),
            ]
            ok = ok and cert.coefficients_ok and cert.holds is not False
        elif inner.dim == 1:
            obs = observability_1d(inner, kernel)
            rows += [("controllable", str(obs.controllable)), ("observable", str(obs.observable))]
    if not args.quiet:
        _table(rows)
    return EXIT_OK if ok else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roesserconv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def layer_flags(p, padding=True):
        p.add_argument("--stride", type=int, nargs="+")
        p.add_argument("--dilation", type=int, nargs="+")
        if padding:
            p.add_argument("--padding", choices=[m.value for m in Padding], default="full")

    p = sub.add_parser("gen", help="write a seeded random kernel or signal")
    p.add_argument("what", choices=["kernel", "signal"])
    p.add_argument("-d", type=int, required=True, help="signal dimension")
    p.add_argument("-r", type=int, nargs="+", help="kernel extents (largest index per direction)")
    p.add_argument("-N", type=int, nargs="+", help="signal extents (largest index per direction)")
    p.add_argument("--cin", type=int, default=1)
    p.add_argument("--cout", type=int, default=1)
    p.add_argument("-c", type=int, default=1, help="signal channels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("realize", help="build a Roesser realization of a kernel")
    p.add_argument("-k", "--kernel", required=True)
    p.add_argument("-o", "--output")
    layer_flags(p, padding=False)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("convolve", help="direct convolution of a signal")
    p.add_argument("-k", "--kernel", required=True)
    p.add_argument("-s", "--signal", required=True)
    p.add_argument("-o", "--output")
    layer_flags(p)
    p.set_defaults(func=cmd_convolve)

    p = sub.add_parser("simulate", help="run a realization over a signal")
    p.add_argument("-r", "--realization", required=True)
    p.add_argument("-s", "--signal", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check a realization against direct convolution")
    p.add_argument("-k", "--kernel", required=True)
    p.add_argument("-r", "--realization")
    layer_flags(p)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--extent", type=int, nargs="+")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="also write the report as JSON")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("analyze", help="dimension report and rank tests of a realization")
    p.add_argument("-r", "--realization", required=True)
    p.add_argument("-k", "--kernel")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (RoesserError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
