"""Classical post-processing: sifting, check bits, and CSS key distillation."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import gf2
from .codecs import CodeRecord, DetectionEvent
from .quantum import ValidationError

DEFAULT_THRESHOLD = 0.11


class ProtocolAbort(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class SiftedKey:
    bits: tuple[int, ...]
    positions: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) != len(self.positions):
            raise ValidationError("sifted key bits and positions differ in length")

    def __len__(self) -> int:
        return len(self.bits)


def sift(alice: Sequence[CodeRecord], bob: Sequence[DetectionEvent]) -> tuple[SiftedKey, SiftedKey]:
    if len(alice) != len(bob):
        raise ValidationError(f"alice has {len(alice)} records, bob has {len(bob)}")
    keep = [
        i for i, (a, b) in enumerate(zip(alice, bob))
        if b.accepted and b.declared_basis is a.prep_basis
    ]
    positions = tuple(keep)
    return (
        SiftedKey(tuple(alice[i].bit for i in keep), positions),
        SiftedKey(tuple(bob[i].bit for i in keep), positions),
    )


def select_check_bits(key_len: int, n: int, rng: np.random.Generator) -> tuple[list[int], list[int]]:
    """Random split of ``key_len`` sifted bits into check bits and ``n`` data bits.

    Both index lists are returned sorted.
    """
    if n < 1:
        raise ValidationError("n must be positive")
    if key_len < 2 * n:
        raise ProtocolAbort("insufficient sifted bits")
    perm = rng.permutation(key_len)
    data = sorted(int(i) for i in perm[:n])
    check = sorted(int(i) for i in perm[n:])
    return check, data


@dataclass(frozen=True)
class CheckBitReport:
    check_positions: tuple[int, ...]
    alice_bits: tuple[int, ...]
    bob_bits: tuple[int, ...]
    errors: int = field(init=False)
    error_rate: float = field(init=False)

    def __post_init__(self):
        if not len(self.alice_bits) == len(self.bob_bits) == len(self.check_positions):
            raise ValidationError("check-bit vectors differ in length")
        errors = sum(a != b for a, b in zip(self.alice_bits, self.bob_bits))
        object.__setattr__(self, "errors", errors)
        rate = errors / len(self.alice_bits) if self.alice_bits else float("nan")
        object.__setattr__(self, "error_rate", rate)

    @classmethod
    def from_keys(cls, alice: SiftedKey, bob: SiftedKey, check: Sequence[int]) -> CheckBitReport:
        return cls(
            tuple(alice.positions[i] for i in check),
            tuple(alice.bits[i] for i in check),
            tuple(bob.bits[i] for i in check),
        )


class Decision(enum.Enum):
    PROCEED = "proceed"
    ABORT = "abort"


def estimate_and_decide(report: CheckBitReport, threshold: float = DEFAULT_THRESHOLD) -> Decision:
    """Abort iff the check-bit error rate is strictly above ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0,1)")
    if not report.check_positions:
        raise ValidationError("no check bits to estimate from")
    return Decision.ABORT if report.error_rate > threshold else Decision.PROCEED


@dataclass(frozen=True, eq=False)
class CSSCodePair:
    """Nested binary codes C2 < C1 of length ``n``.

    The key of a block is the label of its C1 codeword's coset modulo C2,
    i.e. k1 - k2 bits per block.
    """

    n: int
    generator_C1: np.ndarray
    generator_C2: np.ndarray
    parity_check_C1: np.ndarray
    t: int

    def __post_init__(self):
        g1, g2, h1 = (gf2.as_gf2(m) for m in (self.generator_C1, self.generator_C2, self.parity_check_C1))
        for name, m in (("generator_C1", g1), ("generator_C2", g2), ("parity_check_C1", h1)):
            if m.shape[1] != self.n:
                raise ValidationError(f"{name} has {m.shape[1]} columns, expected n = {self.n}")
            if gf2.rank(m) != m.shape[0]:
                raise ValidationError(f"{name} rows are linearly dependent")
        for i, row in enumerate(g2):
            if not gf2.in_rowspace(row, g1):
                raise ValidationError(f"generator_C2 row {i} ({gf2.format_rows(row)[0]}) is not in C1")
        if gf2.mul(h1, g1.T).any():
            raise ValidationError("parity_check_C1 * generator_C1^T is not zero")
        if h1.shape[0] != self.n - g1.shape[0]:
            raise ValidationError("parity_check_C1 rank does not match n - k1")
        if self.t < 0:
            raise ValidationError("t must be >= 0")
        if g1.shape[0] == g2.shape[0]:
            raise ValidationError("C2 equals C1: no key bits per block")
        for name, m in (("generator_C1", g1), ("generator_C2", g2), ("parity_check_C1", h1)):
            m.flags.writeable = False
            object.__setattr__(self, name, m)
        object.__setattr__(self, "_complement", self._coset_complement())
        object.__setattr__(self, "_leaders", self._syndrome_table())

    @classmethod
    def hamming_7_4(cls) -> CSSCodePair:
        """C1 = [7,4,3] Hamming, C2 = its [7,3] dual (simplex) code; t = 1."""
        h = gf2.parse_rows(["0001111", "0110011", "1010101"])
        g1 = gf2.parse_rows(["1110000", "1001100", "0101010", "1101001"])
        return cls(7, g1, h.copy(), h, 1)

    @property
    def k1(self) -> int:
        return self.generator_C1.shape[0]

    @property
    def k2(self) -> int:
        return self.generator_C2.shape[0]

    @property
    def key_bits_per_block(self) -> int:
        return self.k1 - self.k2

    def _coset_complement(self) -> np.ndarray:
        # Extend the C2 basis to a C1 basis; the added rows index the cosets.
        basis = self.generator_C2
        extra = []
        for row in self.generator_C1:
            cand = np.vstack([basis, row])
            if gf2.rank(cand) > basis.shape[0]:
                basis = cand
                extra.append(row)
        return np.array(extra, dtype=np.uint8)

    def _syndrome_table(self) -> dict[tuple[int, ...], np.ndarray]:
        table: dict[tuple[int, ...], np.ndarray] = {}
        for w in range(self.t + 1):
            for support in itertools.combinations(range(self.n), w):
                e = np.zeros(self.n, dtype=np.uint8)
                e[list(support)] = 1
                table.setdefault(self.syndrome(e), e)
        return table

    def syndrome(self, v) -> tuple[int, ...]:
        return tuple(int(x) for x in gf2.mul(self.parity_check_C1, gf2.as_gf2(v).reshape(-1, 1)).reshape(-1))

    def encode_message(self, msg) -> np.ndarray:
        return gf2.mul(gf2.as_gf2(msg), self.generator_C1).reshape(-1)

    def correct(self, v) -> np.ndarray | None:
        """Nearest C1 codeword via the syndrome table, or None if uncorrectable."""
        v = gf2.as_gf2(v).reshape(-1)
        leader = self._leaders.get(self.syndrome(v))
        if leader is None:
            return None
        return v ^ leader

    def coset_label(self, codeword) -> tuple[int, ...]:
        basis = np.vstack([self.generator_C2, self._complement])
        coeffs = gf2.solve_left(basis, codeword)
        if coeffs is None:
            raise ValidationError("vector is not a C1 codeword")
        return tuple(int(c) for c in coeffs[self.k2:])

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "generator_C1": gf2.format_rows(self.generator_C1),
            "generator_C2": gf2.format_rows(self.generator_C2),
            "parity_check_C1": gf2.format_rows(self.parity_check_C1),
            "t": self.t,
        }


@dataclass(frozen=True)
class FinalKey:
    bits: tuple[int, ...] = ()
    blocks_used: int = 0
    aborted: bool = False
    abort_reason: str = ""
    uncorrectable_blocks: int = 0

    def __post_init__(self):
        if self.aborted and self.bits:
            raise ValidationError("an aborted key must be empty")

    @classmethod
    def abort(cls, reason: str) -> FinalKey:
        return cls(aborted=True, abort_reason=reason)


def css_distill(
    alice_key: Sequence[int], bob_key: Sequence[int], code: CSSCodePair, rng: np.random.Generator
) -> tuple[FinalKey, FinalKey]:
    """One-way CSS distillation, block by block.

    Alice picks a uniformly random C1 codeword u and announces block XOR u.
    Bob strips the announcement, corrects to the nearest C1 codeword and both
    keep the C2-coset label. Blocks with an uncorrectable syndrome are dropped
    by both sides. Trailing bits short of a block are ignored.
    """
    if len(alice_key) != len(bob_key):
        raise ValidationError("alice and bob keys differ in length")
    a = np.asarray(alice_key, dtype=np.uint8)
    b = np.asarray(bob_key, dtype=np.uint8)
    blocks = len(a) // code.n
    ka: list[int] = []
    kb: list[int] = []
    used = dropped = 0
    for j in range(blocks):
        sl = slice(j * code.n, (j + 1) * code.n)
        u = code.encode_message(rng.integers(0, 2, code.k1))
        announced = a[sl] ^ u
        fixed = code.correct(b[sl] ^ announced)
        if fixed is None:
            dropped += 1
            continue
        ka.extend(code.coset_label(u))
        kb.extend(code.coset_label(fixed))
        used += 1
    return (
        FinalKey(tuple(ka), used, uncorrectable_blocks=dropped),
        FinalKey(tuple(kb), used, uncorrectable_blocks=dropped),
    )


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def key_rate_estimate(error_rate: float) -> float:
    """Asymptotic CSS key rate 1 - 2 H2(e), floored at zero."""
    if error_rate < 0:
        raise ValidationError("error rate must be non-negative")
    if error_rate >= 0.5:
        return 0.0
    return max(0.0, 1.0 - 2.0 * binary_entropy(error_rate))
