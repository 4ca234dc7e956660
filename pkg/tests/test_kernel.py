import math

import numpy as np
import pytest

from qvn import gates
from qvn.errors import NumericalError, ValidationError
from qvn.kernel import (
    DensityOperator,
    KrausChannel,
    Observable,
    PureState,
    RngStream,
    UnitaryOp,
    apply_channel,
    eig_unitary,
    expectation,
    haar_random_unitary,
    kron,
    measure,
    partial_trace,
    purity,
    random_cptp_channel,
    random_density,
    random_pure_state,
)


class TestTypes:
    def test_pure_state_normalization_enforced(self):
        with pytest.raises(ValidationError):
            PureState([1.0, 1.0])

    def test_pure_state_subsystem_product(self):
        with pytest.raises(ValidationError):
            PureState([1, 0, 0, 0], (2, 3))

    def test_density_negative_eigenvalue_rejected(self):
        m = np.diag([1.5, -0.5])
        with pytest.raises(ValidationError):
            DensityOperator(m)

    def test_density_trace_one(self):
        with pytest.raises(ValidationError):
            DensityOperator(np.eye(2))

    def test_unitary_validation(self):
        with pytest.raises(ValidationError):
            UnitaryOp([[1, 0], [0, 2]])

    def test_kraus_trace_preserving(self):
        with pytest.raises(ValidationError):
            KrausChannel([gates.P0])

    def test_observable_hermitian(self):
        with pytest.raises(ValidationError):
            Observable([[0, 1], [0, 0]])

    def test_values_frozen(self):
        psi = PureState([1, 0])
        with pytest.raises(ValueError):
            psi.amplitudes[0] = 0.0


class TestKron:
    def test_identity(self):
        assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))

    def test_xx_on_00(self):
        v00 = np.array([1, 0, 0, 0], dtype=complex)
        assert np.allclose(kron(gates.X, gates.X) @ v00, [0, 0, 0, 1])

    def test_h_on_first_qubit(self):
        # direct 4-dim arithmetic: H⊗I |00> = (|00> + |10>)/sqrt(2)
        v00 = np.array([1, 0, 0, 0], dtype=complex)
        expected = np.array([1, 0, 1, 0], dtype=complex) / math.sqrt(2)
        assert np.abs(kron(gates.H, np.eye(2)) @ v00 - expected).max() < 1e-15


class TestPartialTrace:
    def test_bell_marginal_maximally_mixed(self):
        bell = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
        rho = DensityOperator(np.outer(bell, bell.conj()), (2, 2))
        for keep in ([0], [1]):
            red = partial_trace(rho, keep)
            assert np.abs(red.matrix - np.eye(2) / 2).max() < 1e-12

    def test_product_state(self, rng):
        a = random_density(2, rng)
        b = random_density(3, rng)
        joint = DensityOperator(np.kron(a.matrix, b.matrix), (2, 3))
        assert np.abs(partial_trace(joint, [0]).matrix - a.matrix).max() < 1e-12
        assert np.abs(partial_trace(joint, [1]).matrix - b.matrix).max() < 1e-12

    def test_keep_everything_is_identity(self, rng):
        rho = random_density(6, rng)
        rho = DensityOperator(rho.matrix, (2, 3))
        assert np.abs(partial_trace(rho, [0, 1]).matrix - rho.matrix).max() < 1e-14

    def test_three_factor_middle(self, rng):
        parts = [random_density(2, rng).matrix for _ in range(3)]
        joint = DensityOperator(
            np.kron(np.kron(parts[0], parts[1]), parts[2]), (2, 2, 2)
        )
        assert np.abs(partial_trace(joint, [1]).matrix - parts[1]).max() < 1e-12

    def test_choi_tail_marginal_is_average_output(self, rng):
        # amplitude-damping style channel: both marginals computed two ways
        g = 0.3
        k0 = np.array([[1, 0], [0, math.sqrt(1 - g)]], dtype=complex)
        k1 = np.array([[0, math.sqrt(g)], [0, 0]], dtype=complex)
        ch = KrausChannel([k0, k1])
        bell = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
        omega = np.outer(bell, bell.conj())
        choi = sum(
            np.kron(k, np.eye(2)) @ omega @ np.kron(k, np.eye(2)).conj().T
            for k in ch.kraus_ops
        )
        rho = DensityOperator(choi, (2, 2))
        e_of_identity = sum(k @ k.conj().T for k in ch.kraus_ops)
        assert np.abs(partial_trace(rho, [0]).matrix - e_of_identity / 2).max() < 1e-12
        assert np.abs(partial_trace(rho, [1]).matrix - np.eye(2) / 2).max() < 1e-12

    def test_invalid_index(self, rng):
        rho = random_density(4, rng)
        with pytest.raises(ValidationError):
            partial_trace(rho, [3])


class TestApplyChannel:
    def test_identity_channel(self, rng):
        ch = KrausChannel([np.eye(2)])
        rho = random_density(2, rng)
        assert np.abs(apply_channel(ch, rho).matrix - rho.matrix).max() < 1e-14

    def test_full_dephasing_on_plus(self):
        ch = KrausChannel([gates.P0, gates.P1])
        plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
        rho = DensityOperator(np.outer(plus, plus))
        assert np.abs(apply_channel(ch, rho).matrix - np.eye(2) / 2).max() < 1e-12

    def test_unitary_channel(self, rng):
        u = haar_random_unitary(3, rng)
        ch = KrausChannel([u.matrix])
        rho = random_density(3, rng)
        expected = u.matrix @ rho.matrix @ u.matrix.conj().T
        assert np.abs(apply_channel(ch, rho).matrix - expected).max() < 1e-12

    def test_random_cptp_preserves_trace_and_positivity(self, rng):
        for d in (2, 3, 4):
            ch = random_cptp_channel(d, 3, rng)
            rho = random_density(d, rng)
            out = apply_channel(ch, rho)  # constructor revalidates
            assert abs(np.trace(out.matrix) - 1) < 1e-10
            assert np.linalg.eigvalsh(out.matrix).min() > -1e-10


class TestPurity:
    def test_pure(self):
        rho = DensityOperator(np.diag([1.0, 0.0]))
        assert abs(purity(rho) - 1.0) < 1e-12

    def test_maximally_mixed(self):
        assert abs(purity(DensityOperator(np.eye(2) / 2)) - 0.5) < 1e-12
        assert abs(purity(DensityOperator(np.eye(4) / 4)) - 0.25) < 1e-12

    def test_bounds_and_rank_one(self, rng):
        for _ in range(20):
            mixed = random_density(4, rng)
            assert purity(mixed) <= 1 + 1e-12
            assert purity(mixed) < 1 - 1e-12  # full-rank states are not pure
            psi = random_pure_state(4, rng)
            assert abs(purity(psi.density()) - 1.0) < 1e-12


class TestMeasure:
    def test_deterministic_outcome(self, rng):
        psi = PureState([1, 0])
        k, p, post = measure(psi, [gates.P0, gates.P1], rng)
        assert k == 0 and abs(p - 1.0) < 1e-12
        assert np.abs(post.amplitudes - psi.amplitudes).max() < 1e-12

    def test_plus_state_is_unbiased(self):
        psi = PureState(np.array([1, 1]) / math.sqrt(2))
        counts = [0, 0]
        n = 10_000
        rng = RngStream(7)
        for _ in range(n):
            k, p, _ = measure(psi, [gates.P0, gates.P1], rng)
            assert abs(p - 0.5) < 1e-12
            counts[k] += 1
        assert abs(counts[0] / n - 0.5) < 4 / math.sqrt(n)

    def test_bell_basis_uniform_on_product_of_mixed(self):
        # h1 and t2 of two stored programs reduce to I/2 ⊗ I/2; every Bell
        # outcome probability is exactly 1/d² = 1/4
        from qvn.uqt import BellBasis

        basis = BellBasis.weyl(2)
        rho = DensityOperator(np.eye(4) / 4, (2, 2))
        probs = [np.trace(p @ rho.matrix).real for p in basis.projectors()]
        assert np.abs(np.array(probs) - 0.25).max() < 1e-12

    def test_incomplete_projector_set_rejected(self, rng):
        with pytest.raises(ValidationError):
            measure(PureState([1, 0]), [gates.P0], rng)

    def test_density_operator_collapse(self, rng):
        rho = DensityOperator(np.diag([0.25, 0.75]))
        k, p, post = measure(rho, [gates.P0, gates.P1], rng)
        assert abs(p - (0.25 if k == 0 else 0.75)) < 1e-12
        expected = np.zeros((2, 2))
        expected[k, k] = 1.0
        assert np.abs(post.matrix - expected).max() < 1e-12

    def test_frequencies_match_probabilities(self, rng):
        psi = random_pure_state(4, rng)
        projs = [np.zeros((4, 4)) for _ in range(4)]
        u = haar_random_unitary(4, rng).matrix
        projs = [np.outer(u[:, i], u[:, i].conj()) for i in range(4)]
        exact = np.array([np.vdot(psi.amplitudes, p @ psi.amplitudes).real for p in projs])
        n = 20_000
        counts = np.zeros(4)
        sampler = RngStream(99)
        for _ in range(n):
            k, _, _ = measure(psi, projs, sampler)
            counts[k] += 1
        assert np.abs(counts / n - exact).max() < 4 / math.sqrt(n)


class TestEigUnitary:
    def test_pauli_z(self):
        vals, v = eig_unitary(UnitaryOp(gates.Z))
        assert sorted(np.round(vals.real, 12)) == [-1.0, 1.0]

    def test_hadamard_spectrum(self):
        # characteristic polynomial of H: λ² − tr(H)λ + det(H) = λ² − 1
        vals, _ = eig_unitary(UnitaryOp(gates.H))
        assert sorted(np.round(vals.real, 10)) == [-1.0, 1.0]
        assert np.abs(vals.imag).max() < 1e-12

    def test_identity(self):
        vals, v = eig_unitary(UnitaryOp(np.eye(3)))
        assert np.abs(vals - 1.0).max() < 1e-12

    def test_reconstruction_random(self, rng):
        for d in (2, 3, 4, 8, 16):
            u = haar_random_unitary(d, rng)
            vals, v = eig_unitary(u)
            recon = v.matrix @ np.diag(vals) @ v.matrix.conj().T
            assert np.abs(recon - u.matrix).max() < 1e-10
            assert np.abs(np.abs(vals) - 1.0).max() < 1e-12

    def test_degenerate_spectrum_gives_unitary_basis(self):
        # Paulis have doubly-degenerate-free spectrum but X⊗X has ±1 twice
        u = UnitaryOp(np.kron(gates.X, gates.X))
        vals, v = eig_unitary(u)
        assert np.abs(v.matrix.conj().T @ v.matrix - np.eye(4)).max() < 1e-12


class TestExpectation:
    def test_z_on_zero(self):
        rho = DensityOperator(np.diag([1.0, 0.0]))
        assert abs(expectation(Observable(gates.Z), rho) - 1.0) < 1e-12

    def test_z_on_mixed(self):
        rho = DensityOperator(np.eye(2) / 2)
        assert abs(expectation(Observable(gates.Z), rho)) < 1e-12

    def test_x_on_plus(self):
        plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
        rho = DensityOperator(np.outer(plus, plus))
        assert abs(expectation(Observable(gates.X), rho) - 1.0) < 1e-12


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(5, 3)
        b = RngStream(5, 3)
        assert [a.random() for _ in range(10)] == [b.random() for _ in range(10)]

    def test_streams_differ(self):
        a = RngStream(5, 0)
        b = RngStream(5, 1)
        assert [a.random() for _ in range(4)] != [b.random() for _ in range(4)]

    def test_choice_rejects_vanishing(self):
        with pytest.raises(NumericalError):
            RngStream(1).choice([0.0, 0.0])
