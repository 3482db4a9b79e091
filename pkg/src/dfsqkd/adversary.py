"""Eavesdropper models and the encode/attack/decode reduction.

An attack on the coded protocol is lifted to an attack on plain BB84 by
letting Eve run Alice's encoder and Bob's decoder herself. The check below
compares the two games by exact enumeration of every measurement branch.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import codecs
from .codecs import ALL_BB84, BB84State
from .quantum import (
    MAX_QUBITS,
    SIGMA_Z,
    TOL,
    Basis,
    CapacityError,
    Gate,
    PureState,
    ValidationError,
    apply_gate,
    basis_vector_state,
    measure_qubit,
    outcome_distribution,
    project,
    tensor,
    zeros,
)

Z, X = Basis.Z, Basis.X


@dataclass(frozen=True)
class AttackScheme:
    """Unitary ``attack_unitary`` on (2 code qubits + Eve's ancillas), then
    Eve measures her ancillas per ``eve_measurement`` (ancilla index, basis)."""

    ancilla_qubits: int
    attack_unitary: Gate
    eve_measurement: tuple[tuple[int, Basis], ...] = ()
    name: str = "unitary"

    def __post_init__(self):
        total = 2 + self.ancilla_qubits
        if self.ancilla_qubits < 0:
            raise ValidationError("ancilla_qubits must be >= 0")
        # The wrapped attack also needs the BB84 qubit plus the encoding ancilla.
        if total > MAX_QUBITS:
            raise CapacityError(f"attack on {total} qubits exceeds the {MAX_QUBITS}-qubit capacity")
        if self.attack_unitary.num_qubits != total:
            raise ValidationError(
                f"attack unitary acts on {self.attack_unitary.num_qubits} qubits, expected {total}"
            )
        plan = tuple((int(i), Basis(b)) for i, b in self.eve_measurement)
        if sorted(i for i, _ in plan) != list(range(self.ancilla_qubits)):
            raise ValidationError("eve_measurement must measure every ancilla exactly once")
        object.__setattr__(self, "eve_measurement", plan)

    @classmethod
    def identity(cls) -> AttackScheme:
        return cls(0, Gate(np.eye(4), "I"), (), "identity")

    @classmethod
    def random(cls, rng: np.random.Generator, ancilla_qubits: int = 0, name: str = "random") -> AttackScheme:
        from scipy.stats import unitary_group

        dim = 1 << (2 + ancilla_qubits)
        u = unitary_group.rvs(dim, random_state=rng)
        # Polish to unitarity at machine precision.
        q, r = np.linalg.qr(u)
        u = q * (np.diag(r) / np.abs(np.diag(r)))
        plan = tuple((i, Z if rng.random() < 0.5 else X) for i in range(ancilla_qubits))
        return cls(ancilla_qubits, Gate(u, name), plan, name)


@dataclass(frozen=True)
class InterceptResendStrategy:
    basis_rule: str = "random"

    def __post_init__(self):
        if self.basis_rule not in ("Z", "X", "random"):
            raise ValidationError(f"unknown intercept basis rule {self.basis_rule!r}")

    @property
    def name(self) -> str:
        return f"intercept-{self.basis_rule.lower()}"

    def weights(self) -> list[tuple[Basis, float]]:
        if self.basis_rule == "random":
            return [(Z, 0.5), (X, 0.5)]
        return [(Basis(self.basis_rule), 1.0)]

    def choose(self, rng: np.random.Generator) -> Basis:
        u = rng.random()
        if self.basis_rule == "random":
            return Z if u < 0.5 else X
        return Basis(self.basis_rule)


Attack = Union[AttackScheme, InterceptResendStrategy]


@dataclass(frozen=True)
class AttackOutcome:
    resent_state: PureState | None = field(repr=False)
    eve_bits: tuple[int, ...] = ()
    eve_basis_record: tuple[Basis, ...] = ()

    @property
    def lost(self) -> bool:
        return self.resent_state is None

    def as_dict(self) -> dict:
        return {
            "lost": self.lost,
            "eve_bits": list(self.eve_bits),
            "eve_bases": [b.value for b in self.eve_basis_record],
        }


@dataclass(frozen=True)
class Branch:
    probability: float
    eve_record: tuple
    state: PureState = field(repr=False)


# --- intercept-resend ------------------------------------------------------

def intercept_resend_code(
    code: PureState, protocol: int, strategy: InterceptResendStrategy, rng: np.random.Generator
) -> AttackOutcome:
    """Eve decodes passively in her chosen basis and resends a fresh code."""
    basis = strategy.choose(rng)
    event = codecs.decode(code, protocol, "passive", basis, rng)
    resent = codecs.encode(BB84State(basis, event.bit), protocol).state
    return AttackOutcome(resent, (event.bit,), (basis,))


def intercept_resend_qubit(
    qubit: PureState, strategy: InterceptResendStrategy, rng: np.random.Generator
) -> AttackOutcome:
    basis = strategy.choose(rng)
    outcome = measure_qubit(qubit, 0, basis, rng.random())
    return AttackOutcome(basis_vector_state(basis, outcome.value), (outcome.value,), (basis,))


def intercept_resend_branches(code: PureState, protocol: int, strategy: InterceptResendStrategy) -> list[Branch]:
    out = []
    for basis, weight in strategy.weights():
        dist = codecs.decoder_distribution(code, protocol, basis, mode="passive")
        for bit, p in dist.items():
            if p > 0.0:
                resent = codecs.encode(BB84State(basis, bit), protocol).state
                out.append(Branch(weight * p, (basis.value, bit), resent))
    return out


def intercept_resend_qubit_branches(qubit: PureState, strategy: InterceptResendStrategy) -> list[Branch]:
    out = []
    for basis, weight in strategy.weights():
        for value in (0, 1):
            p, _ = project(qubit, 0, basis, value)
            if p > 0.0:
                out.append(Branch(weight * p, (basis.value, value), basis_vector_state(basis, value)))
    return out


# --- unitary attacks -------------------------------------------------------

def unitary_attack_branches(code: PureState, attack: AttackScheme) -> list[Branch]:
    """Apply the attack, then enumerate Eve's ancilla measurement sequentially."""
    state = code
    if attack.ancilla_qubits:
        state = tensor(code, zeros(attack.ancilla_qubits))
    state = apply_gate(state, attack.attack_unitary, range(state.num_qubits))
    branches = [(1.0, (), state)]
    # Measure from the highest ancilla index down so lower indices stay put.
    for idx, basis in sorted(attack.eve_measurement, key=lambda ib: -ib[0]):
        nxt = []
        for prob, record, st in branches:
            for value in (0, 1):
                p, rest = project(st, 2 + idx, basis, value)
                if rest is not None and p > 0.0:
                    nxt.append((prob * p, ((idx, value),) + record, rest))
        branches = nxt
    return [Branch(p, tuple(v for _, v in sorted(rec)), st) for p, rec, st in branches]


def attack_branches(code: PureState, attack: Attack, protocol: int) -> list[Branch]:
    if isinstance(attack, InterceptResendStrategy):
        return intercept_resend_branches(code, protocol, attack)
    return unitary_attack_branches(code, attack)


# --- the reduction ---------------------------------------------------------

@dataclass(frozen=True)
class WrappedAttack:
    """Single-qubit attack: encode, run the code-level attack, decode actively.

    Eve keeps the decoded qubit, forwards it to Bob and drops the control
    qubit after using its outcome for the correction.
    """

    inner: Attack
    protocol: int

    def branches(self, qubit: PureState) -> list[Branch]:
        code = codecs.encode_state(qubit, self.protocol)
        out = []
        for br in attack_branches(code, self.inner, self.protocol):
            for p, _control, forwarded in codecs.active_branches(br.state, self.protocol):
                out.append(Branch(br.probability * p, br.eve_record, forwarded))
        return out


def wrap_attack(attack: Attack, protocol: int) -> WrappedAttack:
    if protocol not in (1, 2):
        raise ValidationError(f"protocol must be 1 or 2, got {protocol}")
    if isinstance(attack, AttackScheme) and attack.ancilla_qubits + 2 > MAX_QUBITS:
        raise CapacityError("wrapped attack exceeds qubit capacity")
    return WrappedAttack(attack, protocol)


def _coded_game(source: BB84State, bob_basis: Basis, attack: Attack, protocol: int) -> dict[tuple, float]:
    """Coded protocol under ``attack``, Bob decoding passively.

    Unitary attacks are evaluated on the full joint state in one
    ``outcome_distribution`` call over Bob's and Eve's qubits together.
    """
    code = codecs.encode(source, protocol).state
    dist: dict[tuple, float] = {}
    bob_plan = codecs.passive_plan(protocol, bob_basis)
    if isinstance(attack, AttackScheme):
        state = code
        if attack.ancilla_qubits:
            state = tensor(code, zeros(attack.ancilla_qubits))
        state = apply_gate(state, attack.attack_unitary, range(state.num_qubits))
        eve_plan = sorted(attack.eve_measurement)
        plan = bob_plan + [(2 + i, b) for i, b in eve_plan]
        for outcome, p in outcome_distribution(state, plan).items():
            bit = codecs.passive_bit(protocol, outcome[0], bob_basis, outcome[1])
            key = (bit, tuple(outcome[2:]))
            dist[key] = dist.get(key, 0.0) + p
        return dist
    for br in intercept_resend_branches(code, protocol, attack):
        for bit, p in codecs.decoder_distribution(br.state, protocol, bob_basis, mode="passive").items():
            key = (bit, br.eve_record)
            dist[key] = dist.get(key, 0.0) + br.probability * p
    return dist


def _bb84_game(source: BB84State, bob_basis: Basis, wrapped: WrappedAttack) -> dict[tuple, float]:
    dist: dict[tuple, float] = {}
    for br in wrapped.branches(source.state()):
        for (bit,), p in outcome_distribution(br.state, [(0, bob_basis)]).items():
            key = (bit, br.eve_record)
            dist[key] = dist.get(key, 0.0) + br.probability * p
    return dist


@dataclass
class ReductionReport:
    attack: str
    protocol: int
    equivalent: bool
    max_deviation: float
    cases: dict = field(default_factory=dict, repr=False)


def compare_distributions(a: dict, b: dict) -> float:
    return max((abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b)), default=0.0)


def reduction_equivalence_check(attack: Attack, protocol: int, tol: float = TOL) -> ReductionReport:
    """Compare (coded protocol + attack) with (BB84 + wrapped attack).

    For each BB84 input and each Bob basis the joint distribution over
    (Bob's bit, Eve's record) is computed exactly on both sides.
    """
    wrapped = wrap_attack(attack, protocol)
    cases = {}
    worst = 0.0
    for source, bob_basis in itertools.product(ALL_BB84, (Z, X)):
        coded = _coded_game(source, bob_basis, attack, protocol)
        plain = _bb84_game(source, bob_basis, wrapped)
        dev = compare_distributions(coded, plain)
        worst = max(worst, dev)
        cases[(source.basis.value, source.bit, bob_basis.value)] = {"coded": coded, "bb84": plain, "deviation": dev}
    return ReductionReport(attack.name, protocol, worst <= tol, worst, cases)


# --- photon-blocking attack ------------------------------------------------

FIG2_SURVIVAL = 0.25


def fig2_forward(code: PureState, x_outcome: int) -> tuple[float, PureState | None]:
    """Eve's X measurement on the ancilla beam and sigma_z correction of the data photon."""
    p, data = project(code, codecs.P1_ANCILLA, X, x_outcome)
    if data is not None and x_outcome == 1:
        data = apply_gate(data, SIGMA_Z, [0])
    return p, data


def fig2_blocking_attack(code: PureState, rng: np.random.Generator) -> AttackOutcome:
    """Eve replaces Bob's single-line decoder with her own.

    Both photons cross a 50:50 splitter. Eve measures the ancilla-side beam
    in X and checks for a photon on the other beam without touching its
    polarization. Unless the ancilla photon is in her X beam and the data
    photon in the other, she blocks the code; otherwise she applies the
    conditional correction and forwards the data photon.
    """
    if code.num_qubits != 2:
        raise ValidationError("fig2_blocking_attack takes a 2-qubit protocol-1 code")
    route = rng.random(2) < 0.5  # True: Eve's X beam
    u = rng.random()
    if not (route[codecs.P1_ANCILLA] and not route[codecs.P1_DATA]):
        return AttackOutcome(None)
    outcome = measure_qubit(code, codecs.P1_ANCILLA, X, u)
    data = outcome.post_state
    if outcome.value == 1:
        data = apply_gate(data, SIGMA_Z, [0])
    return AttackOutcome(data, (outcome.value,), (X,))


def parse_attack(name: str | None) -> Attack | str | None:
    """Resolve a preset name to an attack object (``fig2-blocking`` stays a string)."""
    if name in (None, "", "none"):
        return None
    presets = {
        "intercept-z": InterceptResendStrategy("Z"),
        "intercept-x": InterceptResendStrategy("X"),
        "intercept-random": InterceptResendStrategy("random"),
    }
    if name in presets:
        return presets[name]
    if name == "fig2-blocking":
        return name
    raise ValidationError(f"unknown attack preset {name!r}")


ATTACK_PRESETS: Sequence[str] = ("none", "intercept-z", "intercept-x", "intercept-random", "fig2-blocking")
