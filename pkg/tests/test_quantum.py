import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_distribution
from dfsqkd.quantum import (
    HADAMARD,
    I,
    KET0,
    KET1,
    MINUS,
    PHI_PLUS,
    PLUS,
    PSI_MINUS,
    SIGMA,
    SIGMA_Z,
    Basis,
    CapacityError,
    Gate,
    PureState,
    ValidationError,
    apply_gate,
    global_phase_equal,
    measure_qubit,
    outcome_distribution,
    tensor,
)

S = 1 / np.sqrt(2)


def amps(*values):
    return np.array(values, dtype=complex)


def random_state(seed, n):
    r = np.random.default_rng(seed)
    v = r.normal(size=2**n) + 1j * r.normal(size=2**n)
    return PureState.from_amplitudes(v, normalize=True)


class TestPureState:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValidationError):
            PureState(amps(1, 1))

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValidationError):
            PureState(amps(1, 0, 0))

    def test_rejects_nan(self):
        with pytest.raises(ValidationError):
            PureState(amps(np.nan, 0))

    def test_capacity(self):
        with pytest.raises(CapacityError):
            PureState.basis_state("00000")

    def test_basis_state_index(self):
        assert PureState.basis_state("01").amplitudes[1] == 1

    def test_labels_default_and_length(self):
        assert PureState.basis_state("01").labels == ("data", "data")
        with pytest.raises(ValidationError):
            PureState.basis_state("01", ("data",))


class TestTensor:
    def test_basis_product(self):
        out = tensor(KET0, KET1)
        np.testing.assert_array_equal(out.amplitudes, amps(0, 1, 0, 0))

    def test_plus_zero(self):
        np.testing.assert_allclose(tensor(PLUS, KET0).amplitudes, amps(S, 0, S, 0))

    def test_bell_times_zero(self):
        out = tensor(PHI_PLUS, KET0)
        expected = np.zeros(8, complex)
        expected[0b000] = expected[0b110] = S
        np.testing.assert_allclose(out.amplitudes, expected)

    def test_overflow(self):
        with pytest.raises(CapacityError):
            tensor(PHI_PLUS, tensor(PHI_PLUS, KET0))


class TestGates:
    def test_sigma_z_on_one(self):
        np.testing.assert_allclose(apply_gate(KET1, SIGMA_Z, [0]).amplitudes, amps(0, -1))

    def test_sigma_on_one(self):
        np.testing.assert_allclose(apply_gate(KET1, SIGMA, [0]).amplitudes, amps(1, 0))

    def test_identity(self):
        psi = random_state(3, 3)
        out = apply_gate(psi, I, [1])
        np.testing.assert_allclose(out.amplitudes, psi.amplitudes)

    def test_non_unitary_rejected(self):
        with pytest.raises(ValidationError):
            Gate([[1, 1], [0, 1]])

    def test_tiny_non_unitarity_rejected(self):
        with pytest.raises(ValidationError):
            Gate([[1 + 1e-9, 0], [0, 1]])

    def test_bad_targets(self):
        with pytest.raises(ValidationError):
            apply_gate(PHI_PLUS, SIGMA_Z, [2])
        with pytest.raises(ValidationError):
            apply_gate(PHI_PLUS, Gate(np.eye(4)), [0, 0])
        with pytest.raises(ValidationError):
            apply_gate(PHI_PLUS, SIGMA_Z, [0, 1])

    def test_target_ordering_matches_kron(self):
        # Gate on qubits (2, 0) of a 3-qubit state equals the explicit permuted kron.
        psi = random_state(11, 3)
        u = Gate(np.linalg.qr(np.random.default_rng(1).normal(size=(4, 4)))[0])
        out = apply_gate(psi, u, [2, 0])
        t = psi.amplitudes.reshape(2, 2, 2)
        ref = np.einsum("abcd,dxc->bxa", u.matrix.reshape(2, 2, 2, 2), t)
        np.testing.assert_allclose(out.amplitudes, ref.reshape(-1), atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    def test_norm_preserved(self, seed, n):
        psi = random_state(seed, n)
        r = np.random.default_rng(seed)
        target = int(r.integers(n))
        q = np.linalg.qr(r.normal(size=(2, 2)) + 1j * r.normal(size=(2, 2)))[0]
        out = apply_gate(psi, Gate(q), [target])
        assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-12


class TestMeasurement:
    def test_eigenstate(self):
        for u in (0.0, 0.5, 0.999999):
            assert measure_qubit(PLUS, 0, Basis.X, u).value == 0

    def test_psi_minus_branch(self):
        out = measure_qubit(PSI_MINUS, 0, Basis.Z, 0.3)
        oracle = brute_distribution(PSI_MINUS.amplitudes, [(0, "Z")])
        assert oracle[(0,)] == pytest.approx(0.5, abs=1e-12)
        assert out.value == 0
        assert global_phase_equal(out.post_state, KET1)

    def test_zero_in_x_is_fair(self):
        dist = outcome_distribution(KET0, [(0, Basis.X)])
        assert dist[(0,)] == pytest.approx(0.5, abs=1e-12)
        assert measure_qubit(KET0, 0, Basis.X, 0.49).value == 0
        assert measure_qubit(KET0, 0, Basis.X, 0.51).value == 1

    def test_zero_probability_branch_never_selected(self):
        assert measure_qubit(KET0, 0, Basis.Z, 0.0).value == 0
        assert measure_qubit(KET1, 0, Basis.Z, 0.0).value == 1

    def test_randomness_range(self):
        with pytest.raises(ValidationError):
            measure_qubit(KET0, 0, Basis.Z, 1.0)

    def test_post_state_drops_qubit(self):
        out = measure_qubit(tensor(PLUS, KET1), 0, Basis.Z, 0.7)
        assert out.post_state.num_qubits == 1
        assert global_phase_equal(out.post_state, KET1)

    @pytest.mark.parametrize("basis_state", [KET0, KET1, PLUS, MINUS])
    def test_tensor_measure_round_trip(self, basis_state):
        psi = tensor(random_state(5, 2), basis_state)
        basis = Basis.Z if basis_state in (KET0, KET1) else Basis.X
        value = 0 if basis_state in (KET0, PLUS) else 1
        dist = outcome_distribution(psi, [(2, basis)])
        assert dist[(value,)] == pytest.approx(1.0, abs=1e-12)

    def test_marginals_match_distribution(self):
        psi = random_state(42, 3)
        exact = outcome_distribution(psi, [(1, Basis.X)])[(0,)]
        r = np.random.default_rng(7)
        trials = 100_000
        hits = sum(measure_qubit(psi, 1, Basis.X, u).value == 0 for u in r.random(trials))
        se = np.sqrt(exact * (1 - exact) / trials)
        assert abs(hits / trials - exact) < 4 * se


class TestOutcomeDistribution:
    def test_bell_zz(self):
        d = outcome_distribution(PHI_PLUS, [(0, Basis.Z), (1, Basis.Z)])
        assert d == pytest.approx({(0, 0): 0.5, (1, 1): 0.5, (0, 1): 0, (1, 0): 0}, abs=1e-12)

    def test_one_in_x(self):
        psi = PureState.basis_state("01")
        d = outcome_distribution(psi, [(1, Basis.X)])
        assert d == pytest.approx({(0,): 0.5, (1,): 0.5}, abs=1e-12)

    def test_p1_plus_code_xx(self):
        psi = PureState(amps(0, S, S, 0), ("data", "ancilla"))
        plan = [(1, Basis.X), (0, Basis.X)]
        d = outcome_distribution(psi, plan)
        oracle = brute_distribution(psi.amplitudes, [(1, "X"), (0, "X")])
        assert d == pytest.approx(oracle, abs=1e-12)
        assert d == pytest.approx({(0, 0): 0.5, (1, 1): 0.5, (0, 1): 0, (1, 0): 0}, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.data())
    def test_matches_brute_force(self, seed, n, data):
        psi = random_state(seed, n)
        k = data.draw(st.integers(1, n))
        qubits = data.draw(st.permutations(range(n)))[:k]
        bases = data.draw(st.lists(st.sampled_from([Basis.Z, Basis.X]), min_size=k, max_size=k))
        plan = list(zip(qubits, bases))
        d = outcome_distribution(psi, plan)
        oracle = brute_distribution(psi.amplitudes, [(q, b.value) for q, b in plan])
        assert d == pytest.approx(oracle, abs=1e-12)
        assert sum(d.values()) == pytest.approx(1.0, abs=1e-12)

    def test_duplicate_indices(self):
        with pytest.raises(ValidationError):
            outcome_distribution(PHI_PLUS, [(0, Basis.Z), (0, Basis.X)])


class TestGlobalPhase:
    @pytest.mark.parametrize("delta", [0.0, 0.3, np.pi, 5.0])
    def test_phase_on_01(self, delta):
        a = PureState.basis_state("01")
        b = PureState(np.exp(1j * delta) * a.amplitudes)
        assert global_phase_equal(a, b)

    def test_orthogonal(self):
        assert not global_phase_equal(KET0, KET1)

    def test_minus_sign(self):
        assert global_phase_equal(PureState(-PLUS.amplitudes), PLUS)

    def test_relative_phase_detected(self):
        assert not global_phase_equal(PLUS, MINUS)
        assert not global_phase_equal(apply_gate(PLUS, HADAMARD, [0]), PLUS)
