import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfsqkd.codecs import ALL_BB84, encode_p1, encode_p2
from dfsqkd.noise import (
    AngleDistribution,
    ChannelConfig,
    DephasingDraw,
    IdentityDraw,
    RotationDraw,
    apply_collective_dephasing,
    apply_collective_rotation,
    sample_channel,
)
from dfsqkd.quantum import (
    KET0,
    PHI_PLUS,
    MINUS,
    PLUS,
    PSI_MINUS,
    Basis,
    PureState,
    ValidationError,
    global_phase_equal,
    outcome_distribution,
)

angles = st.floats(0, 2 * math.pi, exclude_max=True, allow_nan=False)


class TestDephasing:
    def test_delta_is_sum(self):
        d = DephasingDraw(0.4, 1.9)
        assert d.delta == 0.4 + 1.9

    @given(angles, angles)
    def test_01_gets_delta_phase(self, phi0, phi1):
        draw = DephasingDraw(phi0, phi1)
        out = apply_collective_dephasing(PureState.basis_state("01"), draw, [0, 1])
        expected = np.zeros(4, complex)
        expected[1] = np.exp(1j * draw.delta)
        np.testing.assert_allclose(out.amplitudes, expected, atol=1e-12)

    @given(angles, angles)
    def test_singlet_robust(self, phi0, phi1):
        out = apply_collective_dephasing(PSI_MINUS, DephasingDraw(phi0, phi1), [0, 1])
        assert global_phase_equal(out, PSI_MINUS, 1e-12)

    def test_single_plus_flips(self):
        out = apply_collective_dephasing(PLUS, DephasingDraw(0.0, math.pi), [0])
        assert global_phase_equal(out, MINUS, 1e-12)

    @settings(max_examples=200, deadline=None)
    @given(angles, angles, st.sampled_from(ALL_BB84))
    def test_dfs_invariance_all_codes(self, phi0, phi1, source):
        code = encode_p1(source).state
        out = apply_collective_dephasing(code, DephasingDraw(phi0, phi1), [0, 1])
        assert global_phase_equal(out, code, 1e-12)
        assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-12

    @pytest.mark.parametrize("k", range(8))
    def test_single_qubit_x_error(self, k):
        gap = 2 * math.pi * k / 8
        out = apply_collective_dephasing(PLUS, DephasingDraw(0.3, 0.3 + gap), [0])
        err = outcome_distribution(out, [(0, Basis.X)])[(1,)]
        assert err == pytest.approx(math.sin(gap / 2) ** 2, abs=1e-12)

    def test_distinct_targets(self):
        with pytest.raises(ValidationError):
            apply_collective_dephasing(PSI_MINUS, DephasingDraw(0, 1), [0, 0])


class TestRotation:
    @given(angles)
    def test_bell_states_invariant(self, theta):
        draw = RotationDraw(theta)
        for psi in (PSI_MINUS, PHI_PLUS):
            assert global_phase_equal(apply_collective_rotation(psi, draw, [0, 1]), psi, 1e-12)

    def test_zero_to_minus_one(self):
        out = apply_collective_rotation(KET0, RotationDraw(math.pi / 2), [0])
        np.testing.assert_allclose(out.amplitudes, [0, -1], atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(angles, st.sampled_from(ALL_BB84))
    def test_dfs_invariance_all_codes(self, theta, source):
        code = encode_p2(source).state
        out = apply_collective_rotation(code, RotationDraw(theta), [0, 1])
        assert global_phase_equal(out, code, 1e-12)

    def test_triplet_not_invariant(self):
        psi_plus = PureState(np.array([0, 1, 1, 0]) / math.sqrt(2))
        out = apply_collective_rotation(psi_plus, RotationDraw(0.4), [0, 1])
        assert not global_phase_equal(out, psi_plus, 1e-6)

    def test_angle_range(self):
        with pytest.raises(ValidationError):
            RotationDraw(2 * math.pi)


class TestSampling:
    def test_identity_no_loss(self, rng):
        s = sample_channel(ChannelConfig("identity"), rng)
        assert isinstance(s.draw, IdentityDraw) and not s.lost and s.delivered

    def test_dephasing_uniform(self, rng):
        cfg = ChannelConfig("collective-dephasing")
        draws = [sample_channel(cfg, rng).draw for _ in range(4000)]
        phi0 = np.array([d.phi0 for d in draws])
        assert all(d.delta == d.phi0 + d.phi1 for d in draws)
        assert phi0.min() >= 0 and phi0.max() < 2 * math.pi
        # Uniform on [0, 2pi): mean pi, sd 2pi/sqrt(12).
        assert abs(phi0.mean() - math.pi) < 4 * (2 * math.pi / math.sqrt(12)) / math.sqrt(4000)

    def test_always_lost(self, rng):
        cfg = ChannelConfig("collective-rotation", loss_prob=1.0)
        assert all(sample_channel(cfg, rng).lost for _ in range(100))

    def test_loss_rate(self, rng):
        cfg = ChannelConfig("identity", loss_prob=0.3)
        lost = np.mean([sample_channel(cfg, rng).lost for _ in range(20000)])
        assert abs(lost - 0.3) < 4 * math.sqrt(0.21 / 20000)

    def test_photon_loss(self, rng):
        cfg = ChannelConfig("identity", photon_loss_prob=1.0)
        s = sample_channel(cfg, rng, photons=2)
        assert s.lost_photons == (0, 1) and not s.delivered

    def test_fixed_distribution(self, rng):
        cfg = ChannelConfig("collective-rotation", noise_distribution=AngleDistribution("fixed", value=1.0))
        assert sample_channel(cfg, rng).draw.theta == 1.0

    def test_gaussian_wrapped(self, rng):
        dist = AngleDistribution("gaussian", value=0.0, sigma=0.1)
        cfg = ChannelConfig("collective-rotation", noise_distribution=dist)
        thetas = [sample_channel(cfg, rng).draw.theta for _ in range(500)]
        assert all(0 <= t < 2 * math.pi for t in thetas)

    def test_reproducible(self):
        cfg = ChannelConfig("collective-dephasing", loss_prob=0.2)
        a = [sample_channel(cfg, np.random.default_rng(5)) for _ in range(3)]
        b = [sample_channel(cfg, np.random.default_rng(5)) for _ in range(3)]
        assert a == b

    def test_invalid_config(self):
        with pytest.raises(ValidationError):
            ChannelConfig("depolarizing")
        with pytest.raises(ValidationError):
            ChannelConfig("identity", loss_prob=1.5)
