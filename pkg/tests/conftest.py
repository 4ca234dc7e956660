import numpy as np
import pytest

from qvn.kernel import RngStream


@pytest.fixture
def rng():
    return RngStream(20240811)


def spanning_pure_states(d):
    """d² pure states whose density matrices span the operator space."""
    states = []
    eye = np.eye(d, dtype=complex)
    for i in range(d):
        states.append(eye[:, i])
    for i in range(d):
        for j in range(i + 1, d):
            states.append((eye[:, i] + eye[:, j]) / np.sqrt(2))
            states.append((eye[:, i] + 1j * eye[:, j]) / np.sqrt(2))
    return states


def matrix_units(d):
    """All d² matrix units E_ij, the spanning set for channel equality."""
    units = []
    for i in range(d):
        for j in range(d):
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = 1.0
            units.append(m)
    return units


def kraus_action(kraus_ops, mat):
    """Direct Kraus-sum action on an arbitrary matrix (the dense oracle)."""
    return sum(k @ mat @ k.conj().T for k in kraus_ops)
