import itertools
from functools import reduce

import numpy as np
import pytest

from dfsqkd.quantum import Basis

S = 1 / np.sqrt(2)
VEC = {
    ("Z", 0): np.array([1, 0], complex),
    ("Z", 1): np.array([0, 1], complex),
    ("X", 0): np.array([S, S], complex),
    ("X", 1): np.array([S, -S], complex),
}


def brute_distribution(amplitudes, plan):
    """Oracle: Born probabilities from explicit product projectors.

    Unmeasured qubits are summed over computational basis vectors; this never
    touches the library's measurement code.
    """
    amps = np.asarray(amplitudes, complex)
    n = int(np.log2(amps.size))
    measured = {i: b for i, b in plan}
    free = [q for q in range(n) if q not in measured]
    out = {}
    for outcome in itertools.product((0, 1), repeat=len(plan)):
        values = {plan[k][0]: outcome[k] for k in range(len(plan))}
        total = 0.0
        for rest in itertools.product((0, 1), repeat=len(free)):
            vals = dict(values)
            vals.update(zip(free, rest))
            vecs = [
                VEC[(Basis(measured[q]).value, vals[q])] if q in measured else VEC[("Z", vals[q])]
                for q in range(n)
            ]
            total += abs(np.vdot(reduce(np.kron, vecs), amps)) ** 2
        out[outcome] = total
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_ACCEPTANCE_LINES = []


def record_acceptance(label: str, passed: bool, detail: str = "") -> None:
    _ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
