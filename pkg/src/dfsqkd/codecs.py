"""Two-qubit decoherence-free codes and Bob's decoders.

Protocol 1 (collective dephasing) stores the data qubit on the left and the
ancilla on the right: ``|0>|0> -> |01>`` and ``|1>|0> -> |10>``. Decoding
measures the ancilla in X and undoes a ``-`` outcome with sigma_z.

Protocol 2 (collective rotation) maps ``|0>|0> -> phi+`` and
``|1>|0> -> psi-``. Decoding measures qubit 1 in Z and undoes a ``1``
outcome with Sigma = [[0, 1], [-1, 0]].

The passive decoders skip the conditional gate and read the bit from a
table of joint outcomes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Sequence

import numpy as np

from .quantum import (
    CNOT,
    PAULI_X,
    SIGMA,
    SIGMA_Z,
    SWAP,
    Basis,
    Gate,
    PureState,
    ValidationError,
    apply_gate,
    basis_vector_state,
    measure_qubit,
    outcome_distribution,
    project,
    tensor,
)

P1_LABELS = ("data", "ancilla")
P2_LABELS = ("qubit1", "qubit2")
P1_DATA, P1_ANCILLA = 0, 1
P2_CONTROL, P2_TARGET = 0, 1

Z, X = Basis.Z, Basis.X

# Completion of |00> -> |01>, |10> -> |10> to a full unitary.
ENCODER_P1 = Gate(CNOT.matrix @ np.kron(np.eye(2), PAULI_X.matrix), "encode-p1")

_S = 1 / sqrt(2)
# Columns are the images of |00>, |01>, |10>, |11>. Only the |x0> columns
# are fixed by the code; the other two complete the unitary.
ENCODER_P2 = Gate(
    np.array(
        [
            [_S, 0, 0, _S],
            [0, _S, _S, 0],
            [0, _S, -_S, 0],
            [_S, 0, 0, -_S],
        ]
    ),
    "encode-p2",
)

# Joint-outcome tables: (control outcome, data basis, data outcome) -> bit.
# Protocol 1: control is the ancilla measured in X (0 = |+>, 1 = |->).
PASSIVE_TABLE_P1 = {
    (0, Z, 0): 0, (1, Z, 0): 0, (0, X, 0): 0, (1, X, 1): 0,
    (0, Z, 1): 1, (1, Z, 1): 1, (0, X, 1): 1, (1, X, 0): 1,
}
# Protocol 2: control is qubit 1 measured in Z.
PASSIVE_TABLE_P2 = {
    (0, Z, 0): 0, (1, Z, 1): 0, (0, X, 0): 0, (1, X, 1): 0,
    (0, Z, 1): 1, (1, Z, 0): 1, (0, X, 1): 1, (1, X, 0): 1,
}


@dataclass(frozen=True)
class BB84State:
    basis: Basis
    bit: int

    def __post_init__(self):
        if self.bit not in (0, 1):
            raise ValidationError(f"bit must be 0 or 1, got {self.bit}")

    def state(self, label: str = "data") -> PureState:
        return basis_vector_state(self.basis, self.bit, label)


ALL_BB84 = tuple(BB84State(b, v) for b in (Z, X) for v in (0, 1))


@dataclass(frozen=True)
class CodeRecord:
    protocol: int
    prep_basis: Basis
    bit: int
    state: PureState = field(repr=False)


@dataclass(frozen=True)
class Click:
    detector: str
    slot: int


@dataclass(frozen=True)
class DetectionEvent:
    accepted: bool
    declared_basis: Basis | None = None
    bit: int | None = None
    clicks: tuple[Click, ...] = ()
    outcomes: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.accepted and (self.bit is not None or self.declared_basis is not None):
            raise ValidationError("a rejected event carries no bit or basis")
        if self.accepted and (self.bit is None or self.declared_basis is None):
            raise ValidationError("an accepted event needs a bit and a basis")

    @classmethod
    def rejected(cls, clicks: Sequence[Click] = ()) -> DetectionEvent:
        return cls(False, clicks=tuple(clicks))

    def as_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "basis": None if self.declared_basis is None else self.declared_basis.value,
            "bit": self.bit,
            "clicks": [[c.detector, c.slot] for c in self.clicks],
            "outcomes": list(self.outcomes),
        }


def _check_protocol(protocol: int) -> int:
    if protocol not in (1, 2):
        raise ValidationError(f"protocol must be 1 or 2, got {protocol}")
    return protocol


def _check_code(state: PureState) -> None:
    if state.num_qubits != 2:
        raise ValidationError(f"decoders take 2-qubit codes, got {state.num_qubits} qubits")


def encoder(protocol: int) -> Gate:
    return ENCODER_P1 if _check_protocol(protocol) == 1 else ENCODER_P2


def encode_state(qubit: PureState, protocol: int) -> PureState:
    """Encode an arbitrary single-qubit state with a fresh |0> ancilla."""
    if qubit.num_qubits != 1:
        raise ValidationError("encode_state takes a single qubit")
    labels = P1_LABELS if _check_protocol(protocol) == 1 else P2_LABELS
    joined = tensor(qubit, PureState.basis_state("0"))
    return apply_gate(joined, encoder(protocol), [0, 1]).relabel(labels)


def encode_p1(source: BB84State) -> CodeRecord:
    return CodeRecord(1, source.basis, source.bit, encode_state(source.state(), 1))


def encode_p2(source: BB84State) -> CodeRecord:
    return CodeRecord(2, source.basis, source.bit, encode_state(source.state(), 2))


def encode(source: BB84State, protocol: int) -> CodeRecord:
    return encode_p1(source) if _check_protocol(protocol) == 1 else encode_p2(source)


# --- active decoders -------------------------------------------------------

def correction(protocol: int, control: int) -> Gate | None:
    """Gate applied to the data qubit after the control outcome, if any."""
    if control == 0:
        return None
    return SIGMA_Z if _check_protocol(protocol) == 1 else SIGMA


def control_plan(protocol: int) -> tuple[int, Basis]:
    return (P1_ANCILLA, X) if _check_protocol(protocol) == 1 else (P2_CONTROL, Z)


def active_branches(state: PureState, protocol: int) -> list[tuple[float, int, PureState]]:
    """Exact branches of the active decoder: (probability, control outcome, corrected qubit).

    Works on codes that carry extra qubits after the two code qubits; those
    qubits stay attached to the returned remainder.
    """
    index, basis = control_plan(protocol)
    out = []
    for control in (0, 1):
        prob, rest = project(state, index, basis, control)
        if rest is None or prob <= 0.0:
            continue
        gate = correction(protocol, control)
        if gate is not None:
            rest = apply_gate(rest, gate, [0])
        out.append((prob, control, rest))
    return out


def _decode_active(state: PureState, meas_basis: Basis, rng: np.random.Generator, protocol: int) -> DetectionEvent:
    _check_code(state)
    index, basis = control_plan(protocol)
    first = measure_qubit(state, index, basis, rng.random())
    data = first.post_state
    gate = correction(protocol, first.value)
    if gate is not None:
        data = apply_gate(data, gate, [0])
    second = measure_qubit(data, 0, meas_basis, rng.random())
    return DetectionEvent(True, meas_basis, second.value, outcomes=(first.value, second.value))


def decode_p1_active(state: PureState, meas_basis: Basis, rng: np.random.Generator) -> DetectionEvent:
    return _decode_active(state, meas_basis, rng, 1)


def decode_p2_active(state: PureState, meas_basis: Basis, rng: np.random.Generator) -> DetectionEvent:
    return _decode_active(state, meas_basis, rng, 2)


# --- passive decoders ------------------------------------------------------

def passive_bit(protocol: int, control: int, meas_basis: Basis, value: int) -> int:
    table = PASSIVE_TABLE_P1 if _check_protocol(protocol) == 1 else PASSIVE_TABLE_P2
    return table[(control, meas_basis, value)]


def passive_plan(protocol: int, meas_basis: Basis) -> list[tuple[int, Basis]]:
    """Measurement plan [(control qubit, basis), (data qubit, basis)]."""
    if _check_protocol(protocol) == 1:
        return [(P1_ANCILLA, X), (P1_DATA, meas_basis)]
    return [(P2_CONTROL, Z), (P2_TARGET, meas_basis)]


def _decode_passive(state: PureState, meas_basis: Basis, rng: np.random.Generator, protocol: int) -> DetectionEvent:
    _check_code(state)
    (ci, cb), (di, db) = passive_plan(protocol, meas_basis)
    first = measure_qubit(state, ci, cb, rng.random())
    # Removing qubit ``ci`` leaves the data qubit at index 0.
    second = measure_qubit(first.post_state, 0, db, rng.random())
    bit = passive_bit(protocol, first.value, meas_basis, second.value)
    return DetectionEvent(True, meas_basis, bit, outcomes=(first.value, second.value))


def decode_p1_passive(state: PureState, meas_basis: Basis, rng: np.random.Generator) -> DetectionEvent:
    return _decode_passive(state, meas_basis, rng, 1)


def decode_p2_passive(
    state: PureState, meas_basis: Basis, rng: np.random.Generator, swap: bool = False
) -> DetectionEvent:
    """Passive protocol-2 decoding; ``swap`` exchanges the qubits first."""
    _check_code(state)
    if swap:
        state = apply_gate(state, SWAP, [0, 1])
    return _decode_passive(state, meas_basis, rng, 2)


# --- exact decoder statistics ----------------------------------------------

def decoder_distribution(
    state: PureState, protocol: int, meas_basis: Basis, mode: str = "active", swap: bool = False
) -> dict[int, float]:
    """Exact distribution of Bob's decoded bit for one measurement basis."""
    _check_code(state)
    dist = {0: 0.0, 1: 0.0}
    if mode == "active":
        for prob, _, qubit in active_branches(state, protocol):
            for (value,), p in outcome_distribution(qubit, [(0, meas_basis)]).items():
                dist[value] += prob * p
    elif mode == "passive":
        if swap:
            state = apply_gate(state, SWAP, [0, 1])
        for (control, value), p in outcome_distribution(state, passive_plan(protocol, meas_basis)).items():
            dist[passive_bit(protocol, control, meas_basis, value)] += p
    else:
        raise ValidationError(f"unknown decoder mode {mode!r}")
    return dist


# --- detector models -------------------------------------------------------

def decode_p1_fig2(state: PureState, rng: np.random.Generator) -> DetectionEvent:
    """Single-line passive decoder for protocol 1.

    Each photon takes either arm of a 50:50 splitter. Arm A holds the X
    analyzer (detector D1) for the ancilla; arm B splits again into a Z
    analyzer (D2) and an X analyzer (D3) for the data photon. Only the
    routing ancilla -> A, data -> B gives a simultaneous coincidence, so a
    quarter of the codes are kept. Photon q occupies time slot q.
    """
    _check_code(state)
    route = rng.random(2) < 0.5  # True: arm A
    basis_draw = rng.random()
    u = rng.random(2)
    data_basis = Z if basis_draw < 0.5 else X
    data_detector = "D2" if data_basis is Z else "D3"

    def detector(photon: int) -> str:
        return "D1" if route[photon] else data_detector

    clicks = tuple(Click(detector(q), q) for q in (P1_DATA, P1_ANCILLA))
    if not (route[P1_ANCILLA] and not route[P1_DATA]):
        return DetectionEvent.rejected(clicks)
    first = measure_qubit(state, P1_ANCILLA, X, u[0])
    second = measure_qubit(first.post_state, 0, data_basis, u[1])
    bit = passive_bit(1, first.value, data_basis, second.value)
    return DetectionEvent(True, data_basis, bit, clicks, (first.value, second.value))


FIG3_DETECTORS = {(Z, 0): "D1", (X, 0): "D2", (Z, 1): "D3", (X, 1): "D4"}
FIG3_Z_DETECTORS = frozenset({"D1", "D3"})


def fig3_accepts(detectors: Sequence[str]) -> bool:
    """A 2-fold click is kept iff it involves D1 or D3."""
    return any(d in FIG3_Z_DETECTORS for d in detectors)


def decode_p2_fig3(state: PureState, rng: np.random.Generator, slot_aware: bool = False) -> DetectionEvent:
    """Single-line passive decoder for protocol 2.

    Each photon is routed 50:50 to a Z analyzer (D1 = |0>, D3 = |1>) or an X
    analyzer (D2 = |+>, D4 = |->). Mixed events use the Z-side photon as
    qubit 1 and declare basis X; both-Z events declare basis Z.

    With ``slot_aware`` Bob also uses the time slot: when the Z-side photon is
    the one from slot 1, the X-basis bit is inverted, which is the table for
    the exchanged control/target roles.
    """
    _check_code(state)
    to_z = rng.random(2) < 0.5
    u = rng.random(2)
    bases = [Z if to_z[q] else X for q in (0, 1)]
    first = measure_qubit(state, 0, bases[0], u[0])
    second = measure_qubit(first.post_state, 0, bases[1], u[1])
    values = (first.value, second.value)
    clicks = tuple(Click(FIG3_DETECTORS[(bases[q], values[q])], q) for q in (0, 1))
    if not fig3_accepts([c.detector for c in clicks]):
        return DetectionEvent.rejected(clicks)
    if bases[0] is Z and bases[1] is Z:
        return DetectionEvent(True, Z, passive_bit(2, values[0], Z, values[1]), clicks, values)
    z_slot = 0 if bases[0] is Z else 1
    x_slot = 1 - z_slot
    bit = passive_bit(2, values[z_slot], X, values[x_slot])
    if slot_aware and z_slot == 1:
        bit ^= 1
    return DetectionEvent(True, X, bit, clicks, values)


def decode(
    state: PureState,
    protocol: int,
    decoder: str,
    meas_basis: Basis,
    rng: np.random.Generator,
    *,
    swap: bool = False,
    slot_aware: bool = False,
) -> DetectionEvent:
    """Dispatch to the configured decoder. Detector models choose their own basis."""
    if decoder == "active":
        return _decode_active(state, meas_basis, rng, _check_protocol(protocol))
    if decoder == "passive":
        if protocol == 2:
            return decode_p2_passive(state, meas_basis, rng, swap)
        return decode_p1_passive(state, meas_basis, rng)
    if decoder == "detector-model":
        if protocol == 1:
            return decode_p1_fig2(state, rng)
        return decode_p2_fig3(state, rng, slot_aware)
    raise ValidationError(f"unknown decoder {decoder!r}")
