"""Acceptance criteria, one test per criterion.

Each check returns ``(ok, detail)``; the outcome is printed as a
``criterion N: PASS|FAIL`` line in the pytest terminal summary, and running
this file directly prints the same lines.
"""

import itertools
import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import golden  # noqa: E402
from conftest import random_kernel, random_signal, symbolic_kernel  # noqa: E402
from oracles import naive_convolution  # noqa: E402
from roesserconv.analysis import minimality_certificate, observability_1d  # noqa: E402
from roesserconv.cli import main  # noqa: E402
from roesserconv.errors import ShapeError  # noqa: E402
from roesserconv.realization import (  # noqa: E402
    build_1d,
    build_2d,
    build_dilated,
    build_nd,
    build_strided,
)
from roesserconv.simulator import impulse_response, run_layer, simulate  # noqa: E402
from roesserconv.tensorcore import (  # noqa: E402
    ConvConfig,
    Kernel,
    Padding,
    convolve,
    crop_for_padding,
    crop_window,
    dilate_kernel,
    strided_patch_kernel,
)

RESULTS = {}


def _max_abs(a, b):
    return float(np.max(np.abs(a - b), initial=0.0))


def check_goldens():
    start = time.perf_counter()
    cases = [
        ((2, 2), build_2d, golden.kernel_3x3),
        ((1, 2), build_2d, golden.kernel_2x3),
        ((2, 1), build_2d, golden.kernel_3x2),
        ((1, 1, 1), build_nd, golden.kernel_2x2x2),
        ((2, 2), lambda k: build_strided(k, (2, 2)).inner, golden.strided_3x3),
        ((4, 4), lambda k: build_strided(k, (2, 2)).inner, golden.strided_5x5),
    ]
    count = 0
    for (extents, builder, expected), (ci, co) in itertools.product(cases, [(1, 1), (2, 2), (2, 3)]):
        k = symbolic_kernel(extents, ci, co)
        golden.assert_matches(builder(k), expected(k))
        count += 1
    k = symbolic_kernel((2, 2))
    assert np.array_equal(dilate_kernel(k, (2, 2)).coeffs[..., 0, 0], golden.dilated_3x3_expanded(k))
    elapsed = time.perf_counter() - start
    return elapsed < 1.0, f"{count + 1} exact matches in {elapsed:.3f}s"


def _equivalence(d, instances, r_max, n_max, seed):
    rng = np.random.default_rng(seed)
    worst, sim_time = 0.0, 0.0
    for _ in range(instances):
        extents = tuple(int(v) for v in rng.integers(0, r_max + 1, size=d))
        ci, co = (int(v) for v in rng.integers(1, 4, size=2))
        k = random_kernel(rng, extents, ci, co)
        u = random_signal(rng, tuple(int(v) for v in rng.integers(0, n_max, size=d)), ci)
        start = time.perf_counter()
        y = simulate(build_2d(k) if d == 2 else build_nd(k), u)
        sim_time += time.perf_counter() - start
        worst = max(worst, _max_abs(y.data, convolve(k, u).data))
    return worst, sim_time


def check_equivalence_2d():
    # grids of up to 10 x 10 samples
    worst, elapsed = _equivalence(2, 200, 3, 10, seed=2)
    return worst <= 1e-12 and elapsed < 10.0, f"200 instances, max abs. diff {worst:.2e}, {elapsed:.2f}s"


def check_equivalence_3d():
    worst, elapsed = _equivalence(3, 50, 3, 6, seed=3)
    return worst <= 1e-12, f"50 instances, max abs. diff {worst:.2e}, {elapsed:.2f}s"


def check_strided_dilated():
    rng = np.random.default_rng(4)
    worst_s = worst_q = 0.0
    remainders = 0
    for i in range(100):
        strided = i < 50
        d = 2 if strided and i % 5 else int(rng.integers(1, 4))
        extents = tuple(int(v) for v in rng.integers(0, 4 if d < 3 else 3, size=d))
        ci, co = (int(v) for v in rng.integers(1, 4, size=2))
        k = random_kernel(rng, extents, ci, co)
        if strided:
            stride = tuple(int(v) for v in rng.integers(1, 4, size=d))
            dilation = (1,) * d
        else:
            stride = (1,) * d
            dilation = tuple(int(v) for v in rng.integers(1, 4, size=d))
        n = tuple(int(v) for v in rng.integers(2, 10 if d < 3 else 6, size=d))
        remainders += strided and any((nk + 1) % sk for nk, sk in zip(n, stride))
        u = random_signal(rng, n, ci)
        expected = naive_convolution(k.coeffs, k.bias, u.data, stride, dilation)
        y = run_layer(k, ConvConfig(stride=stride, dilation=dilation), u)
        if y.data.shape != expected.shape:
            return False, f"shape {y.data.shape} != {expected.shape} at instance {i}"
        err = _max_abs(y.data, expected)
        if strided:
            worst_s = max(worst_s, err)
        else:
            worst_q = max(worst_q, err)
    ok = max(worst_s, worst_q) <= 1e-12 and remainders > 0
    return ok, f"strided {worst_s:.2e}, dilated {worst_q:.2e}, {remainders} non-divisible grids"


def check_certificate():
    rng = np.random.default_rng(5)
    failures = []
    worst = 0.0
    for i in range(50):
        c = int(rng.integers(1, 4))
        r1, r2 = (int(v) for v in rng.integers(0, 4, size=2))
        if r1 + r2 == 0:
            r1 = 1
        coeffs = rng.standard_normal((r1 + 1, r2 + 1, c, c))
        # leading coefficient pushed away from singularity
        coeffs[r1, r2] += 2.0 * np.eye(c) * np.sign(rng.standard_normal())
        k = Kernel(coeffs, rng.standard_normal(c))
        real = build_2d(k)
        cert = minimality_certificate(real, k)
        worst = max(worst, cert.leading_residual, cert.nilpotency_residual)
        ok = (
            cert.applicable
            and cert.rank == c * (r1 + r2) == real.n
            and cert.leading_residual <= 1e-12
            and cert.nilpotency_residual <= 1e-12
        )
        if not ok:
            failures.append(i)
    return not failures, f"50 kernels, failures {failures}, worst coefficient residual {worst:.1e}"


def _nd_dims(r, ci, co):
    tail = [ci * r[k] * int(np.prod([rj + 1 for rj in r[k + 1:]])) for k in range(1, len(r))]
    return (co * r[0], *tail)


def check_dimension_laws():
    rng = np.random.default_rng(6)
    checked = 0
    for ci, co in itertools.product(range(1, 4), repeat=2):
        for r in itertools.product(range(4), repeat=1):
            assert build_1d(random_kernel(rng, r, ci, co)).state_dims == (ci * r[0],)
            checked += 1
        for r in itertools.product(range(4), repeat=2):
            k = random_kernel(rng, r, ci, co)
            assert build_2d(k).state_dims == (co * r[0], ci * r[1])
            q = tuple(int(v) for v in rng.integers(1, 4, size=2))
            assert build_dilated(k, q).state_dims == (co * q[0] * r[0], ci * q[1] * r[1])
            for s in itertools.product(range(1, 4), repeat=2):
                if all(sk <= rk + 1 for sk, rk in zip(s, r)):
                    dims = build_strided(k, s).inner.state_dims
                    assert dims == (co * -(-(r[0] - s[0] + 1) // s[0]), ci * (r[1] - s[1] + 1) * s[0])
                    checked += 1
            checked += 2
        for r in itertools.product(range(3), repeat=3):
            assert build_nd(random_kernel(rng, r, ci, co)).state_dims == _nd_dims(r, ci, co)
            checked += 1
    r = (1, 1, 1, 1)
    assert build_nd(random_kernel(rng, r, 1, 1)).state_dims == _nd_dims(r, 1, 1)
    return True, f"{checked + 1} builder outputs"


def check_1d_observability():
    rng = np.random.default_rng(7)
    deficient = 0
    failures = []
    for i in range(50):
        r = int(rng.integers(1, 5))
        ci, co = (int(v) for v in rng.integers(1, 4, size=2))
        coeffs = rng.standard_normal((r + 1, co, ci))
        if i % 3 == 0:
            rank = int(rng.integers(0, min(ci, co)))
            coeffs[r] = rng.standard_normal((co, rank)) @ rng.standard_normal((rank, ci))
        k = Kernel(coeffs)
        full = np.linalg.matrix_rank(coeffs[r]) == ci
        deficient += not full
        obs = observability_1d(build_1d(k), k)
        if not obs.controllable or obs.observable != full:
            failures.append(i)
    return not failures and deficient > 0, f"50 instances ({deficient} rank-deficient), failures {failures}"


def check_padding_intervals():
    rng = np.random.default_rng(8)
    empty = 0
    for r in itertools.product(range(5), repeat=2):
        for n in itertools.product(range(5, 9), repeat=2):
            y = random_signal(rng, n, 1)
            for mode, lo, hi in (
                (Padding.NONE, r, tuple(nk - rk for nk, rk in zip(n, r))),
                (Padding.SAME, tuple(rk // 2 for rk in r), tuple(nk - (rk + 1) // 2 for nk, rk in zip(n, r))),
            ):
                if any(a > b for a, b in zip(lo, hi)):
                    with pytest.raises(ShapeError):
                        crop_window(n, r, mode)
                    empty += 1
                    continue
                assert crop_window(n, r, mode) == (lo, hi)
                out = crop_for_padding(y, r, mode)
                window = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
                assert np.array_equal(out.data, y.data[window])
    return True, f"{25 * 16 * 2} cases, {empty} empty windows raise"


def check_fir():
    rng = np.random.default_rng(9)
    worst = 0.0
    cases = 0

    def probe(real, target):
        H = impulse_response(real, tuple(rk + 2 for rk in target.extents))
        window = tuple(slice(0, rk + 1) for rk in target.extents)
        outside = H.copy()
        outside[window] = 0.0
        return max(float(np.max(np.abs(outside))), _max_abs(H[window], target.coeffs))

    for _ in range(10):
        ci, co = (int(v) for v in rng.integers(1, 3, size=2))
        k1 = random_kernel(rng, (int(rng.integers(0, 4)),), ci, co)
        k2 = random_kernel(rng, tuple(int(v) for v in rng.integers(0, 4, size=2)), ci, co)
        k3 = random_kernel(rng, tuple(int(v) for v in rng.integers(0, 3, size=3)), ci, co)
        q = tuple(int(v) for v in rng.integers(1, 3, size=2))
        s = tuple(int(min(v, rk + 1)) for v, rk in zip(rng.integers(1, 3, size=2), k2.extents))
        worst = max(
            worst,
            probe(build_1d(k1), k1),
            probe(build_2d(k2), k2),
            probe(build_nd(k3), k3),
            probe(build_dilated(k2, q), dilate_kernel(k2, q)),
            probe(build_strided(k2, s).inner, strided_patch_kernel(k2, s)),
        )
        cases += 5
    return worst <= 1e-14, f"{cases} realizations, max deviation {worst:.1e}"


CLI_CONFIGS = [
    (["-d", "1", "-r", "3", "--cin", "2", "--cout", "1"], []),
    (["-d", "2", "-r", "2", "2", "--cin", "2", "--cout", "2"], []),
    (["-d", "2", "-r", "1", "2", "--cin", "1", "--cout", "3"], []),
    (["-d", "2", "-r", "0", "0", "--cin", "2", "--cout", "2"], []),
    (["-d", "3", "-r", "1", "1", "1", "--cin", "1", "--cout", "1"], []),
    (["-d", "3", "-r", "2", "0", "1", "--cin", "2", "--cout", "1"], []),
    (["-d", "2", "-r", "2", "2", "--cin", "1", "--cout", "2"], ["--stride", "2", "2"]),
    (["-d", "2", "-r", "4", "4", "--cin", "1", "--cout", "1"], ["--stride", "2", "2"]),
    (["-d", "2", "-r", "2", "2", "--cin", "2", "--cout", "2"], ["--dilation", "2", "2"]),
    (["-d", "1", "-r", "2", "--cin", "1", "--cout", "1"], ["--dilation", "3"]),
]


def check_cli(tmp_path):
    codes = []
    for seed, (gen_flags, layer_flags) in enumerate(CLI_CONFIGS):
        k, r = tmp_path / f"k{seed}.json", tmp_path / f"r{seed}.json"
        main(["gen", "kernel", *gen_flags, "--seed", str(seed), "-o", str(k)])
        main(["realize", "-k", str(k), "-o", str(r), "--quiet", *layer_flags])
        codes.append(main(["verify", "-k", str(k), "-r", str(r), "--quiet", *layer_flags]))
    doc = json.loads((tmp_path / "r1.json").read_text())
    doc["A_12"]["data"][0] += 1.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    negative = main(["verify", "-k", str(tmp_path / "k1.json"), "-r", str(bad), "--quiet"])
    ok = codes == [0] * len(CLI_CONFIGS) and negative == 1
    return ok, f"exit codes {codes}, corrupted realization -> {negative}"


CRITERIA = [
    (1, "golden structure", check_goldens),
    (2, "2-D equivalence", check_equivalence_2d),
    (3, "3-D equivalence", check_equivalence_3d),
    (4, "strided/dilated equivalence", check_strided_dilated),
    (5, "rank certificate", check_certificate),
    (6, "dimension laws", check_dimension_laws),
    (7, "1-D controllability/observability", check_1d_observability),
    (8, "padding intervals", check_padding_intervals),
    (9, "FIR impulse response", check_fir),
    (10, "CLI end-to-end", check_cli),
]


def _run(number, name, check, *args):
    try:
        ok, detail = check(*args)
    except AssertionError as exc:
        ok, detail = False, f"assertion failed: {exc}"
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    RESULTS[number] = line
    print(line)
    return ok, line


@pytest.mark.parametrize("number,name,check", CRITERIA, ids=[c[1].replace(" ", "-") for c in CRITERIA])
def test_criterion(number, name, check, tmp_path):
    args = (tmp_path,) if check is check_cli else ()
    ok, line = _run(number, name, check, *args)
    assert ok, line


if __name__ == "__main__":
    import tempfile

    results = []
    with tempfile.TemporaryDirectory() as tmp:
        for number, name, check in CRITERIA:
            args = (Path(tmp),) if check is check_cli else ()
            results.append(_run(number, name, check, *args)[0])
    sys.exit(0 if all(results) else 1)
