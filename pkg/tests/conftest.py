import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from roesserconv.tensorcore import Kernel, Signal  # noqa: E402


def random_kernel(rng, extents, c_in, c_out, bias=True):
    coeffs = rng.standard_normal(tuple(r + 1 for r in extents) + (c_out, c_in))
    b = rng.standard_normal(c_out) if bias else None
    return Kernel(coeffs, b)


def random_signal(rng, extent, channels):
    return Signal(rng.standard_normal(tuple(n + 1 for n in extent) + (channels,)))


def symbolic_kernel(extents, c_in=1, c_out=1):
    """Kernel whose entries are distinct integers, standing in for symbols.

    Entry ``(a, b)`` of ``K[t]`` is ``1000 * (1 + flat index of t) + 10 * a + b + 1``.
    """
    shape = tuple(r + 1 for r in extents)
    coeffs = np.zeros(shape + (c_out, c_in))
    for flat, t in enumerate(np.ndindex(*shape)):
        for a in range(c_out):
            for b in range(c_in):
                coeffs[t + (a, b)] = 1000 * (flat + 1) + 10 * a + b + 1
    return Kernel(coeffs)


def assemble(grid, row_sizes, col_sizes):
    """Block matrix from a grid whose entries are arrays, ``0`` or ``"I"``."""
    rows = []
    for entries, m in zip(grid, row_sizes):
        row = []
        for entry, n in zip(entries, col_sizes):
            if isinstance(entry, str):
                assert entry == "I" and m == n
                row.append(np.eye(m))
            elif isinstance(entry, int) and entry == 0:
                row.append(np.zeros((m, n)))
            else:
                assert entry.shape == (m, n)
                row.append(entry)
        rows.append(row)
    return np.block(rows)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    results = sys.modules.get("test_acceptance")
    if results is None or not results.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results.RESULTS):
        terminalreporter.write_line(results.RESULTS[number])
