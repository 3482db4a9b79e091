"""Dense state-vector simulation for 1-4 qubits.

Qubit 0 is the leftmost symbol in ket notation and the most significant bit
of the amplitude index, so ``|01>`` has amplitude 1 at index 1.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from math import sqrt
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 4
TOL = 1e-12


class ValidationError(ValueError):
    pass


class CapacityError(ValidationError):
    pass


class Basis(enum.Enum):
    Z = "Z"
    X = "X"

    @property
    def vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvectors for outcome 0 and outcome 1."""
        return _BASIS_VECTORS[self]

    def __str__(self) -> str:
        return self.value


_S = 1 / sqrt(2)
_BASIS_VECTORS = {
    Basis.Z: (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)),
    Basis.X: (np.array([_S, _S], dtype=complex), np.array([_S, -_S], dtype=complex)),
}


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        size = amps.size
        n = size.bit_length() - 1
        if size < 2 or 1 << n != size:
            raise ValidationError(f"amplitude vector length {size} is not 2^n with n >= 1")
        if n > MAX_QUBITS:
            raise CapacityError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit capacity")
        if not np.all(np.isfinite(amps)):
            raise ValidationError("amplitudes must be finite")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > TOL:
            raise ValidationError(f"state is not normalized (norm^2 = {norm!r})")
        labels = tuple(self.labels) if self.labels else ("data",) * n
        if len(labels) != n:
            raise ValidationError(f"expected {n} qubit labels, got {len(labels)}")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "labels", labels)

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    @classmethod
    def from_amplitudes(cls, amplitudes, labels: Sequence[str] = (), normalize: bool = False) -> PureState:
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise ValidationError("cannot normalize the zero vector")
            amps = amps / norm
        return cls(amps, tuple(labels))

    @classmethod
    def basis_state(cls, bits: str, labels: Sequence[str] = ()) -> PureState:
        """Computational basis state from a bit string such as ``"01"``."""
        if not bits or set(bits) - {"0", "1"}:
            raise ValidationError(f"bad basis label {bits!r}")
        amps = np.zeros(1 << len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(amps, tuple(labels))

    def relabel(self, labels: Sequence[str]) -> PureState:
        return PureState(self.amplitudes, tuple(labels))

    def __repr__(self) -> str:
        terms = [
            f"({a.real:+.4f}{a.imag:+.4f}j)|{i:0{self.num_qubits}b}>"
            for i, a in enumerate(self.amplitudes)
            if abs(a) > 1e-9
        ]
        return "PureState(" + " ".join(terms) + ")"


@dataclass(frozen=True, eq=False)
class Gate:
    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"gate matrix must be square, got shape {m.shape}")
        dim = m.shape[0]
        if dim < 2 or dim & (dim - 1):
            raise ValidationError(f"gate dimension {dim} is not a power of two >= 2")
        if dim > 1 << MAX_QUBITS:
            raise CapacityError(f"gate on {dim.bit_length() - 1} qubits exceeds the {MAX_QUBITS}-qubit capacity")
        err = np.max(np.abs(m.conj().T @ m - np.eye(dim)))
        if err > TOL:
            raise ValidationError(f"gate {self.name or '?'} is not unitary (max deviation {err:.3e})")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def kron(self, other: Gate) -> Gate:
        return Gate(np.kron(self.matrix, other.matrix), f"{self.name}*{other.name}")


I = Gate(np.eye(2), "I")
PAULI_X = Gate([[0, 1], [1, 0]], "X")
SIGMA_Z = Gate([[1, 0], [0, -1]], "Z")
HADAMARD = Gate(np.array([[1, 1], [1, -1]]) * _S, "H")
# Column action: |0> -> -|1>, |1> -> |0>.
SIGMA = Gate([[0, 1], [-1, 0]], "Sigma")
SWAP = Gate(np.eye(4)[[0, 2, 1, 3]], "SWAP")
CNOT = Gate(np.eye(4)[[0, 1, 3, 2]], "CNOT")

KET0 = PureState.basis_state("0")
KET1 = PureState.basis_state("1")
PLUS = PureState(np.array([_S, _S]))
MINUS = PureState(np.array([_S, -_S]))
PHI_PLUS = PureState(np.array([_S, 0, 0, _S]))
PSI_MINUS = PureState(np.array([0, _S, -_S, 0]))


def zeros(num_qubits: int, label: str = "eve-ancilla") -> PureState:
    return PureState.basis_state("0" * num_qubits, (label,) * num_qubits)


def tensor(a: PureState, b: PureState) -> PureState:
    """Kronecker product with ``a``'s qubits first."""
    if a.num_qubits + b.num_qubits > MAX_QUBITS:
        raise CapacityError(
            f"tensor of {a.num_qubits} and {b.num_qubits} qubits exceeds {MAX_QUBITS}"
        )
    return PureState(np.kron(a.amplitudes, b.amplitudes), a.labels + b.labels)


def _check_targets(n: int, targets: Sequence[int]) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValidationError(f"target qubits must be distinct: {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise ValidationError(f"qubit index {t} out of range for {n} qubits")
    return targets


def apply_matrix(state: PureState, matrix: np.ndarray, targets: Sequence[int]) -> PureState:
    """Apply ``matrix`` (already known to be unitary) to ``targets``."""
    n = state.num_qubits
    targets = _check_targets(n, targets)
    k = len(targets)
    if matrix.shape != (1 << k, 1 << k):
        raise ValidationError(f"gate of dim {matrix.shape[0]} does not act on {k} target qubit(s)")
    psi = state.amplitudes.reshape((2,) * n)
    op = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), targets))
    out = np.moveaxis(out, list(range(k)), targets)
    return PureState(out.reshape(-1), state.labels)


def apply_gate(state: PureState, gate: Gate, targets: Sequence[int]) -> PureState:
    return apply_matrix(state, gate.matrix, targets)


def project(state: PureState, index: int, basis: Basis, value: int) -> tuple[float, PureState | None]:
    """Probability of ``value`` on qubit ``index`` and the renormalized remainder.

    The remainder drops the measured qubit; it is ``None`` when the branch has
    zero probability or no qubits are left.
    """
    n = state.num_qubits
    _check_targets(n, [index])
    vec = basis.vectors[value]
    psi = np.moveaxis(state.amplitudes.reshape((2,) * n), index, 0)
    rest = np.tensordot(vec.conj(), psi, axes=(0, 0)).reshape(-1)
    prob = float(np.vdot(rest, rest).real)
    if n == 1 or prob <= 0.0:
        return prob, None
    labels = state.labels[:index] + state.labels[index + 1:]
    return prob, PureState(rest / sqrt(prob), labels)


@dataclass(frozen=True)
class MeasurementOutcome:
    basis: Basis
    value: int
    probability: float
    post_state: PureState | None = field(repr=False)


def measure_qubit(state: PureState, index: int, basis: Basis, randomness: float) -> MeasurementOutcome:
    """Born-rule measurement driven by an explicit uniform draw in [0, 1).

    Outcome 0 is chosen iff ``randomness < P(0)``, so a branch of exactly zero
    probability can never be selected.
    """
    if not 0.0 <= randomness < 1.0:
        raise ValidationError(f"randomness must lie in [0, 1), got {randomness}")
    p0, post0 = project(state, index, basis, 0)
    if randomness < p0:
        return MeasurementOutcome(basis, 0, p0, post0)
    p1, post1 = project(state, index, basis, 1)
    return MeasurementOutcome(basis, 1, p1, post1)


def outcome_distribution(state: PureState, plan: Sequence[tuple[int, Basis]]) -> dict[tuple[int, ...], float]:
    """Exact joint distribution of measuring the listed qubits in the given bases.

    Computed by rotating X-measured qubits with a Hadamard and marginalizing
    ``|amplitude|^2``; every one of the 2^k outcome tuples is present.
    """
    n = state.num_qubits
    indices = _check_targets(n, [i for i, _ in plan])
    rotated = state
    for idx, basis in plan:
        if basis is Basis.X:
            rotated = apply_gate(rotated, HADAMARD, [idx])
    probs = np.abs(rotated.amplitudes.reshape((2,) * n)) ** 2
    others = tuple(i for i in range(n) if i not in indices)
    marg = probs.sum(axis=others) if others else probs
    # Axes of ``marg`` follow ascending qubit order; reorder to the plan's.
    order = sorted(indices)
    marg = np.transpose(marg, [order.index(i) for i in indices]) if indices else marg
    return {
        outcome: float(marg[outcome])
        for outcome in itertools.product((0, 1), repeat=len(indices))
    }


def global_phase_equal(a: PureState, b: PureState, tol: float = TOL) -> bool:
    """True iff ``a == exp(i*gamma) * b`` amplitude-wise within ``tol``."""
    if a.num_qubits != b.num_qubits:
        raise ValidationError("states have different qubit counts")
    overlap = np.vdot(b.amplitudes, a.amplitudes)
    if abs(overlap) < tol:
        return False
    phase = overlap / abs(overlap)
    return bool(np.max(np.abs(a.amplitudes - phase * b.amplitudes)) <= tol)


def fidelity(a: PureState, b: PureState) -> float:
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def basis_vector_state(basis: Basis, value: int, label: str = "data") -> PureState:
    return PureState(basis.vectors[value], (label,))


def merge_distributions(items: Iterable[tuple[tuple, float]]) -> dict[tuple, float]:
    out: dict[tuple, float] = {}
    for key, p in items:
        out[key] = out.get(key, 0.0) + p
    return out
