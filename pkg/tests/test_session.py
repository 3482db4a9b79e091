import math
from dataclasses import replace

import numpy as np
import pytest

from dfsqkd.noise import ChannelConfig
from dfsqkd.quantum import ValidationError
from dfsqkd.session import (
    BLOCK_SIZE,
    SessionConfig,
    aggregate,
    aggregate_row,
    role_rng,
    run_baseline_bb84,
    run_session,
    with_seed,
)

DEPHASING = ChannelConfig("collective-dephasing")
ROTATION = ChannelConfig("collective-rotation")


class TestConfig:
    def test_num_codes_rounds_half_up(self):
        assert SessionConfig(n=128, delta_pad=0.5).num_codes == 576
        assert SessionConfig(n=1, delta_pad=0.5).num_codes == 5

    @pytest.mark.parametrize(
        "kwargs",
        [{"protocol": 3}, {"n": 0}, {"delta_pad": -1}, {"decoder": "x"}, {"threshold": 1.5}, {"attack": "nope"}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            SessionConfig(**kwargs)

    def test_role_streams_differ(self):
        a = role_rng(1, "alice").random(4)
        b = role_rng(1, "bob").random(4)
        c = role_rng(1, "alice", 1).random(4)
        assert not np.array_equal(a, b) and not np.array_equal(a, c)


class TestRunSession:
    def test_p1_dephasing_clean(self):
        t = run_session(SessionConfig(protocol=1, n=128, channel=DEPHASING, seed=3))
        s = t.stats
        assert not s.aborted and s.error_rate == 0.0 and s.sifted_errors == 0
        assert s.keys_match and s.key_bits == 128 // 7
        assert t.alice_key.bits == t.bob_key.bits

    def test_p1_intercept_aborts(self):
        cfg = SessionConfig(protocol=1, n=128, channel=DEPHASING, attack="intercept-random", seed=4)
        s = run_session(cfg).stats
        assert abs(s.error_rate - 0.25) < 4 * math.sqrt(0.25 * 0.75 / s.check_bits)
        assert s.aborted and s.abort_reason == "error rate above threshold" and s.key_bits == 0

    def test_p2_fig3_slot_aware(self):
        cfg = SessionConfig(
            protocol=2, n=128, delta_pad=4.0, channel=ROTATION, decoder="detector-model",
            fig3_slot_aware=True, seed=5,
        )
        s = run_session(cfg).stats
        assert abs(s.accept_fraction - 0.75) < 4 * math.sqrt(0.75 * 0.25 / s.codes_sent)
        assert s.error_rate == 0.0 and not s.aborted

    def test_p2_fig3_plain_inverts_some_x_bits(self):
        # Without slot information, swapped-role X events decode inverted.
        cfg = SessionConfig(
            protocol=2, n=64, delta_pad=8.0, channel=ROTATION, decoder="detector-model", seed=5
        )
        s = run_session(cfg).stats
        # Z events (a third of sifted bits) are right; half the X events are inverted.
        assert abs(s.sifted_errors / s.sifted - 1 / 3) < 4 * math.sqrt(2 / 9 / s.sifted)

    def test_p1_fig2(self):
        cfg = SessionConfig(protocol=1, n=32, delta_pad=20.0, channel=DEPHASING, decoder="detector-model", seed=6)
        s = run_session(cfg).stats
        assert abs(s.accept_fraction - 0.25) < 4 * math.sqrt(0.25 * 0.75 / s.codes_sent)
        assert s.error_rate == 0.0 and not s.aborted

    @pytest.mark.parametrize("decoder", ["active", "passive"])
    @pytest.mark.parametrize("protocol, channel", [(1, DEPHASING), (2, ROTATION)])
    def test_decoders_clean(self, decoder, protocol, channel):
        s = run_session(SessionConfig(protocol=protocol, channel=channel, decoder=decoder, n=64, seed=7)).stats
        assert s.sifted_errors == 0 and not s.aborted

    def test_insufficient_sifted_bits(self):
        s = run_session(SessionConfig(n=64, delta_pad=0.0, seed=1, channel=ChannelConfig("identity", loss_prob=0.9))).stats
        assert s.aborted and s.abort_reason == "insufficient sifted bits"

    def test_attack_before_channel(self):
        cfg = SessionConfig(n=64, channel=DEPHASING, attack="intercept-z", attack_position="before-channel", seed=2)
        assert run_session(cfg).stats.error_rate > 0.1

    def test_fig2_blocking_rejected(self):
        with pytest.raises(ValidationError):
            run_session(SessionConfig(attack="fig2-blocking"))


class TestReproducibility:
    def test_same_seed_same_transcript(self):
        cfg = SessionConfig(n=64, channel=DEPHASING, attack="intercept-random", seed=11)
        assert run_session(cfg).as_dict() == run_session(cfg).as_dict()

    def test_different_seed_differs(self):
        cfg = SessionConfig(n=64, channel=DEPHASING, seed=11)
        assert run_session(cfg).as_dict() != run_session(with_seed(cfg, 12)).as_dict()

    def test_workers_do_not_matter(self):
        cfg = SessionConfig(n=300, channel=DEPHASING, seed=13)
        assert cfg.num_codes > 2 * BLOCK_SIZE
        assert run_session(cfg, workers=1).as_dict() == run_session(cfg, workers=2).as_dict()

    @pytest.mark.parametrize("attack", [None, "intercept-random"])
    def test_self_consistent(self, attack):
        t = run_session(SessionConfig(n=64, channel=DEPHASING, attack=attack, seed=14))
        assert t.is_self_consistent()

    def test_tampered_stats_detected(self):
        t = run_session(SessionConfig(n=64, seed=15))
        forged = replace(t, stats=replace(t.stats, sifted=t.stats.sifted + 1))
        assert not forged.is_self_consistent()


class TestBaseline:
    def test_identity_clean(self):
        s = run_baseline_bb84(SessionConfig(n=64, seed=1)).stats
        assert s.error_rate == 0.0 and not s.aborted

    def test_dephasing_quarter(self):
        s = run_baseline_bb84(SessionConfig(n=128, channel=DEPHASING, seed=2)).stats
        rate = s.sifted_errors / s.sifted
        assert abs(rate - 0.25) < 4 * math.sqrt(0.25 * 0.75 / s.sifted)
        assert s.aborted

    def test_fig2_blocking(self):
        cfg = SessionConfig(n=64, delta_pad=20.0, channel=DEPHASING, attack="fig2-blocking", seed=3)
        t = run_baseline_bb84(cfg)
        lost = sum(r.eve.lost for r in t.records)
        assert abs(lost / len(t.records) - 0.75) < 4 * math.sqrt(0.75 * 0.25 / len(t.records))
        assert t.stats.sifted_errors == 0 and not t.stats.aborted


class TestAggregate:
    def test_single(self):
        t = run_session(SessionConfig(n=32, seed=1))
        summary = aggregate([t])
        assert summary.means["error_rate"] == t.stats.error_rate
        assert summary.totals["codes_sent"] == t.stats.codes_sent

    def test_noiseless_zero_variance(self):
        ts = [run_session(SessionConfig(n=16, channel=DEPHASING, seed=s)) for s in range(20)]
        summary = aggregate(ts)
        assert summary.means["error_rate"] == 0.0 and summary.std_errors["error_rate"] == 0.0

    def test_intercept_mean(self):
        cfg = SessionConfig(n=32, channel=DEPHASING, attack="intercept-random")
        ts = [run_session(with_seed(cfg, s)) for s in range(40)]
        summary = aggregate(ts)
        bound = 4 * math.sqrt(0.25 * 0.75 / 32) / math.sqrt(40)
        assert abs(summary.means["error_rate"] - 0.25) < bound
        row = aggregate_row(summary)
        assert row["aborts"] == summary.aborts and row["sessions"] == 40

    def test_empty(self):
        with pytest.raises(ValidationError):
            aggregate([])
