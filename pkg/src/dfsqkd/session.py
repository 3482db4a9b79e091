"""End-to-end protocol runs with per-role random streams.

Codes are simulated in fixed-size blocks. Each (role, block) pair gets its
own generator derived from the master seed, so output does not depend on
how blocks are spread over worker processes.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import adversary, codecs
from .codecs import BB84State, DetectionEvent, encode, encode_state
from .noise import ChannelConfig, ChannelSample, apply_draw, sample_channel
from .postprocessing import (
    CheckBitReport,
    CSSCodePair,
    Decision,
    FinalKey,
    ProtocolAbort,
    SiftedKey,
    css_distill,
    estimate_and_decide,
    key_rate_estimate,
    select_check_bits,
    sift,
)
from .quantum import Basis, ValidationError, measure_qubit

BLOCK_SIZE = 512
ROLES = {"alice": 0, "channel": 1, "eve": 2, "bob": 3, "classical": 4}
DECODERS = ("active", "passive", "detector-model")
ATTACK_POSITIONS = ("after-channel", "before-channel")

Z, X = Basis.Z, Basis.X


@dataclass(frozen=True)
class SessionConfig:
    protocol: int = 1
    n: int = 128
    delta_pad: float = 0.5
    channel: ChannelConfig = ChannelConfig()
    decoder: str = "active"
    attack: str | None = None
    attack_position: str = "after-channel"
    threshold: float = 0.11
    css: CSSCodePair = field(default_factory=CSSCodePair.hamming_7_4)
    seed: int = 0
    passive_swap: bool = False
    fig3_slot_aware: bool = False

    def __post_init__(self):
        if self.protocol not in (1, 2):
            raise ValidationError("protocol must be 1 or 2")
        if self.n < 1:
            raise ValidationError("n must be a positive integer")
        if self.delta_pad < 0:
            raise ValidationError("delta_pad must be >= 0")
        if self.decoder not in DECODERS:
            raise ValidationError(f"decoder must be one of {DECODERS}")
        if self.attack_position not in ATTACK_POSITIONS:
            raise ValidationError(f"attack_position must be one of {ATTACK_POSITIONS}")
        if not 0.0 < self.threshold < 1.0:
            raise ValidationError("threshold must lie in (0,1)")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        adversary.parse_attack(self.attack)

    @property
    def num_codes(self) -> int:
        return math.floor((4 + self.delta_pad) * self.n + 0.5)

    def as_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "n": self.n,
            "delta_pad": self.delta_pad,
            "channel": self.channel.as_dict(),
            "decoder": self.decoder,
            "attack": self.attack or "none",
            "attack_position": self.attack_position,
            "threshold": self.threshold,
            "css": self.css.as_dict(),
            "seed": self.seed,
            "passive_swap": self.passive_swap,
            "fig3_slot_aware": self.fig3_slot_aware,
        }


@dataclass(frozen=True)
class CodeTrace:
    index: int
    prep_basis: Basis
    bit: int
    channel: ChannelSample
    eve: adversary.AttackOutcome | None
    event: DetectionEvent

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "prep_basis": self.prep_basis.value,
            "bit": self.bit,
            "channel": self.channel.as_dict(),
            "eve": None if self.eve is None else self.eve.as_dict(),
            "event": self.event.as_dict(),
        }


def role_rng(seed: int, role: str, block: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(ROLES[role], block)))


def _random_basis(rng: np.random.Generator) -> Basis:
    return Z if rng.random() < 0.5 else X


def _simulate_block(config: SessionConfig, baseline: bool, block: int) -> list[CodeTrace]:
    start = block * BLOCK_SIZE
    stop = min(start + BLOCK_SIZE, config.num_codes)
    rngs = {role: role_rng(config.seed, role, block) for role in ("alice", "channel", "eve", "bob")}
    step = _baseline_code if baseline else _coded_code
    attack = adversary.parse_attack(config.attack)
    return [step(config, attack, i, rngs) for i in range(start, stop)]


def _coded_code(config: SessionConfig, attack, index: int, rngs) -> CodeTrace:
    alice, bob, eve = rngs["alice"], rngs["bob"], rngs["eve"]
    source = BB84State(_random_basis(alice), int(alice.random() < 0.5))
    record = encode(source, config.protocol)
    sample = sample_channel(config.channel, rngs["channel"], photons=2)
    bob_basis = _random_basis(bob)
    outcome = None
    state = record.state

    def intercept(st):
        return adversary.intercept_resend_code(st, config.protocol, attack, eve)

    if sample.lost:
        return CodeTrace(index, source.basis, source.bit, sample, None, DetectionEvent.rejected())
    if attack is not None and config.attack_position == "before-channel":
        outcome = intercept(state)
        state = outcome.resent_state
    state = apply_draw(state, sample.draw)
    if attack is not None and config.attack_position == "after-channel":
        outcome = intercept(state)
        state = outcome.resent_state
    if sample.lost_photons:
        event = DetectionEvent.rejected()
    else:
        event = codecs.decode(
            state, config.protocol, config.decoder, bob_basis, bob,
            swap=config.passive_swap, slot_aware=config.fig3_slot_aware,
        )
    return CodeTrace(index, source.basis, source.bit, sample, outcome, event)


def _baseline_code(config: SessionConfig, attack, index: int, rngs) -> CodeTrace:
    alice, bob, eve = rngs["alice"], rngs["bob"], rngs["eve"]
    source = BB84State(_random_basis(alice), int(alice.random() < 0.5))
    blocking = attack == "fig2-blocking"
    sample = sample_channel(config.channel, rngs["channel"], photons=2 if blocking else 1)
    bob_basis = _random_basis(bob)
    bob_u = bob.random()
    if sample.lost or sample.lost_photons:
        return CodeTrace(index, source.basis, source.bit, sample, None, DetectionEvent.rejected())
    outcome = None
    qubit = source.state()
    if blocking:
        # Eve encodes the qubit herself, sends the code down the line and
        # replaces Bob's decoder with her blocking measurement.
        code = apply_draw(encode_state(qubit, 1), sample.draw)
        outcome = adversary.fig2_blocking_attack(code, eve)
        qubit = outcome.resent_state
    else:
        if attack is not None and config.attack_position == "before-channel":
            outcome = adversary.intercept_resend_qubit(qubit, attack, eve)
            qubit = outcome.resent_state
        qubit = apply_draw(qubit, sample.draw)
        if attack is not None and config.attack_position == "after-channel":
            outcome = adversary.intercept_resend_qubit(qubit, attack, eve)
            qubit = outcome.resent_state
    if qubit is None:
        return CodeTrace(index, source.basis, source.bit, sample, outcome, DetectionEvent.rejected())
    m = measure_qubit(qubit, 0, bob_basis, bob_u)
    event = DetectionEvent(True, bob_basis, m.value, outcomes=(m.value,))
    return CodeTrace(index, source.basis, source.bit, sample, outcome, event)


@dataclass(frozen=True)
class SessionStats:
    codes_sent: int
    accepted: int
    sifted: int
    check_bits: int
    check_errors: int
    error_rate: float | None
    sifted_errors: int
    aborted: bool
    abort_reason: str
    key_bits: int
    key_rate: float
    keys_match: bool
    sift_fraction: float
    accept_fraction: float
    asymptotic_rate: float | None
    blocks_used: int
    uncorrectable_blocks: int
    truncated_bits: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class SessionTranscript:
    config: SessionConfig
    baseline: bool
    records: tuple[CodeTrace, ...]
    alice_sifted: SiftedKey
    bob_sifted: SiftedKey
    check: CheckBitReport | None
    data_indices: tuple[int, ...]
    alice_key: FinalKey
    bob_key: FinalKey
    stats: SessionStats

    @property
    def aborted(self) -> bool:
        return self.stats.aborted

    def recompute_stats(self) -> SessionStats:
        """Rebuild the summary from the per-code records alone."""
        a, b = sift(self.records, [r.event for r in self.records])
        check = None
        if self.check is not None:
            where = {p: i for i, p in enumerate(a.positions)}
            idx = [where[p] for p in self.check.check_positions]
            check = CheckBitReport.from_keys(a, b, idx)
        return _stats(self.config, self.records, a, b, check, self.alice_key, self.bob_key)

    def is_self_consistent(self) -> bool:
        return self.recompute_stats() == self.stats

    def row(self) -> dict:
        return csv_row(self)

    def as_dict(self) -> dict:
        return {
            "kind": "baseline-bb84" if self.baseline else f"protocol-{self.config.protocol}",
            "config": self.config.as_dict(),
            "stats": self.stats.as_dict(),
            "sifted_positions": list(self.alice_sifted.positions),
            "check_positions": [] if self.check is None else list(self.check.check_positions),
            "data_indices": list(self.data_indices),
            "alice_key": list(self.alice_key.bits),
            "bob_key": list(self.bob_key.bits),
            "records": [r.as_dict() for r in self.records],
        }


def _stats(config, records, a: SiftedKey, b: SiftedKey, check, alice_key: FinalKey, bob_key: FinalKey) -> SessionStats:
    sent = len(records)
    accepted = sum(r.event.accepted for r in records)
    sifted = len(a)
    aborted = alice_key.aborted
    key_bits = len(alice_key.bits)
    error_rate = None if check is None else check.error_rate
    used_bits = alice_key.blocks_used * config.css.n
    data_bits = 0 if aborted else config.n
    return SessionStats(
        codes_sent=sent,
        accepted=accepted,
        sifted=sifted,
        check_bits=0 if check is None else len(check.check_positions),
        check_errors=0 if check is None else check.errors,
        error_rate=error_rate,
        sifted_errors=sum(x != y for x, y in zip(a.bits, b.bits)),
        aborted=aborted,
        abort_reason=alice_key.abort_reason,
        key_bits=key_bits,
        key_rate=key_bits / sent if sent else 0.0,
        keys_match=alice_key.bits == bob_key.bits,
        sift_fraction=sifted / accepted if accepted else 0.0,
        accept_fraction=accepted / sent if sent else 0.0,
        asymptotic_rate=None if error_rate is None else key_rate_estimate(error_rate),
        blocks_used=alice_key.blocks_used,
        uncorrectable_blocks=alice_key.uncorrectable_blocks,
        truncated_bits=0 if aborted else data_bits - used_bits - alice_key.uncorrectable_blocks * config.css.n,
    )


def _simulate(config: SessionConfig, baseline: bool, workers: int) -> list[CodeTrace]:
    blocks = range(math.ceil(config.num_codes / BLOCK_SIZE))
    if workers <= 1 or len(blocks) <= 1:
        chunks = [_simulate_block(config, baseline, b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_simulate_block, [config] * len(blocks), [baseline] * len(blocks), blocks))
    return [r for chunk in chunks for r in chunk]


def _finish(config: SessionConfig, baseline: bool, records: list[CodeTrace]) -> SessionTranscript:
    a, b = sift(records, [r.event for r in records])
    classical = role_rng(config.seed, "classical")
    check = None
    data: list[int] = []
    try:
        check_idx, data = select_check_bits(len(a), config.n, classical)
        check = CheckBitReport.from_keys(a, b, check_idx)
        if estimate_and_decide(check, config.threshold) is Decision.ABORT:
            raise ProtocolAbort("error rate above threshold")
    except ProtocolAbort as exc:
        ka = kb = FinalKey.abort(exc.reason)
    else:
        ka, kb = css_distill([a.bits[i] for i in data], [b.bits[i] for i in data], config.css, classical)
    records = tuple(records)
    stats = _stats(config, records, a, b, check, ka, kb)
    return SessionTranscript(config, baseline, records, a, b, check, tuple(data), ka, kb, stats)


def run_session(config: SessionConfig, workers: int = 1) -> SessionTranscript:
    """Run protocol 1 or 2 end to end over the configured channel and decoder."""
    if config.attack == "fig2-blocking":
        raise ValidationError("the fig2-blocking attack replaces Bob's decoder; use run_baseline_bb84")
    return _finish(config, False, _simulate(config, False, workers))


def run_baseline_bb84(config: SessionConfig, workers: int = 1) -> SessionTranscript:
    """Plain BB84 (single qubits) over the same channel and post-processing."""
    return _finish(config, True, _simulate(config, True, workers))


@dataclass(frozen=True)
class AggregateSummary:
    sessions: int
    aborts: int
    totals: dict
    means: dict
    std_errors: dict
    first: SessionTranscript = field(repr=False, compare=False)


_AVERAGED = ("error_rate", "key_rate", "sift_fraction", "accept_fraction", "key_bits")
_SUMMED = ("codes_sent", "accepted", "sifted", "check_bits", "check_errors", "key_bits")


def aggregate(transcripts: Sequence[SessionTranscript]) -> AggregateSummary:
    if not transcripts:
        raise ValidationError("aggregate needs at least one transcript")
    means, ses = {}, {}
    for name in _AVERAGED:
        vals = np.array([getattr(t.stats, name) for t in transcripts if getattr(t.stats, name) is not None], float)
        means[name] = float(vals.mean()) if vals.size else None
        ses[name] = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    totals = {name: int(sum(getattr(t.stats, name) for t in transcripts)) for name in _SUMMED}
    aborts = sum(t.aborted for t in transcripts)
    return AggregateSummary(len(transcripts), aborts, totals, means, ses, transcripts[0])


CSV_COLUMNS = (
    "seed", "protocol", "channel", "decoder", "attack", "codes_sent", "accepted",
    "sifted", "check_bits", "error_rate", "aborted", "key_bits", "key_rate",
)


def csv_row(t: SessionTranscript) -> dict:
    c, s = t.config, t.stats
    return {
        "seed": c.seed,
        "protocol": "bb84" if t.baseline else c.protocol,
        "channel": c.channel.kind,
        "decoder": "bb84" if t.baseline else c.decoder,
        "attack": c.attack or "none",
        "codes_sent": s.codes_sent,
        "accepted": s.accepted,
        "sifted": s.sifted,
        "check_bits": s.check_bits,
        "error_rate": s.error_rate,
        "aborted": s.aborted,
        "key_bits": s.key_bits,
        "key_rate": s.key_rate,
    }


def aggregate_row(summary: AggregateSummary) -> dict:
    """CSV row for a group of sessions: counts summed, rates averaged.

    ``aborted`` is true only when every session aborted; ``aborts`` gives the count.
    """
    row = csv_row(summary.first)
    row.update({k: summary.totals[k] for k in ("codes_sent", "accepted", "sifted", "check_bits", "key_bits")})
    row["error_rate"] = summary.means["error_rate"]
    row["key_rate"] = summary.means["key_rate"]
    row["aborted"] = summary.aborts == summary.sessions
    row.update(
        sessions=summary.sessions,
        aborts=summary.aborts,
        error_rate_se=summary.std_errors["error_rate"],
        key_rate_se=summary.std_errors["key_rate"],
    )
    return row


def with_seed(config: SessionConfig, seed: int) -> SessionConfig:
    return replace(config, seed=seed)
