"""Matrix-layer tests: superoperators, Choi states, purity figures."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frameport.qmat import (
    ChoiState, DensityMatrix, InvariantViolation, Superoperator,
    UnitaryMatrix, choi, conjugation_superoperator, ensemble_linear_purity,
    linear_map_purity, map_purity, mix, von_neumann_entropy,
)

RNG = np.random.default_rng(42)


def random_unitary(rng=RNG, d: int = 2) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_unitary_matrix_rejects_non_unitary():
    with pytest.raises(InvariantViolation):
        UnitaryMatrix(np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_density_matrix_rejects_bad_trace():
    with pytest.raises(InvariantViolation):
        DensityMatrix(np.eye(2))


def test_conjugation_superoperator_action():
    u = random_unitary()
    s = conjugation_superoperator(UnitaryMatrix(u))
    rho = np.array([[0.7, 0.1 + 0.2j], [0.1 - 0.2j, 0.3]])
    assert np.allclose(s.apply(rho), u @ rho @ u.conj().T, atol=1e-12)


def test_identity_channel_choi_is_maximally_entangled():
    s = Superoperator(np.eye(4), tp=True, cp=True)
    c = choi(s)
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(c.rho.mat, np.outer(phi, phi.conj()), atol=1e-12)


def test_unitary_conjugation_choi_is_pure():
    s = conjugation_superoperator(UnitaryMatrix(random_unitary()))
    ev = choi(s).rho.eigenvalues()
    assert np.max(ev) == pytest.approx(1.0, abs=1e-10)
    assert map_purity(s) == pytest.approx(1.0, abs=1e-10)
    assert linear_map_purity(s) == pytest.approx(1.0, abs=1e-10)


def test_completely_depolarizing_purity():
    # T(rho) = I/2: superop maps everything onto the identity component.
    mat = np.zeros((4, 4), dtype=np.complex128)
    mat[0, 0] = mat[0, 3] = mat[3, 0] = mat[3, 3] = 0.5
    s = Superoperator(mat, tp=True, cp=True)
    assert map_purity(s) == pytest.approx(0.0, abs=1e-12)
    assert linear_map_purity(s) == pytest.approx(0.25, abs=1e-12)


def test_dephasing_choi_spectrum_and_purity():
    # Off-diagonal shrink by f: Choi eigenvalues (1 + f)/2, (1 - f)/2.
    f = 0.5
    mat = np.diag([1.0, f, f, 1.0]).astype(np.complex128)
    s = Superoperator(mat, tp=True, cp=True)
    ev = sorted(choi(s).rho.eigenvalues(), reverse=True)
    assert ev[0] == pytest.approx((1 + f) / 2, abs=1e-12)
    assert ev[1] == pytest.approx((1 - f) / 2, abs=1e-12)
    expected = 1 - (-(0.75 * np.log(0.75) + 0.25 * np.log(0.25))) / np.log(4)
    assert map_purity(s) == pytest.approx(expected, abs=1e-12)
    assert linear_map_purity(s) == pytest.approx(0.625, abs=1e-12)


def test_mix_of_pauli_conjugations_is_depolarizing():
    paulis = [np.eye(2),
              np.array([[0, 1], [1, 0]]),
              np.array([[0, -1j], [1j, 0]]),
              np.array([[1, 0], [0, -1]])]
    parts = [(0.25, conjugation_superoperator(UnitaryMatrix(p)))
             for p in paulis]
    s = mix(parts)
    rho = np.array([[0.9, 0.2], [0.2, 0.1]], dtype=np.complex128)
    assert np.allclose(s.apply(rho), np.eye(2) / 2, atol=1e-12)


def test_von_neumann_entropy_limits():
    assert von_neumann_entropy(DensityMatrix(np.diag([1.0, 0, 0, 0.0]))) \
        == pytest.approx(0.0, abs=1e-12)
    assert von_neumann_entropy(DensityMatrix(np.eye(4) / 4)) \
        == pytest.approx(np.log(4), abs=1e-12)


def test_ensemble_linear_purity_identity_ensemble():
    mats = np.stack([np.eye(2)] * 100)
    mean, err = ensemble_linear_purity(mats, mats)
    assert mean == pytest.approx(1.0, abs=1e-12)
    assert err == pytest.approx(0.0, abs=1e-12)


def test_ensemble_linear_purity_matches_pauli_mix():
    # Uniform Pauli ensemble: linear purity of the depolarizing channel 1/4.
    paulis = np.stack([np.eye(2),
                       np.array([[0, 1], [1, 0]]),
                       np.array([[0, -1j], [1j, 0]]),
                       np.array([[1, 0], [0, -1]])]).astype(np.complex128)
    rng = np.random.default_rng(1)
    a = paulis[rng.integers(0, 4, size=4000)]
    b = paulis[rng.integers(0, 4, size=4000)]
    mean, err = ensemble_linear_purity(a, b)
    assert mean == pytest.approx(0.25, abs=4 * err + 1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_random_unitary_mixture_invariants(seed):
    """Any mixture of unitary conjugations is a channel: TP, CP, Choi PSD
    with unit trace, purities in [0, 1]."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    w = rng.random(k)
    w /= w.sum()
    parts = [(float(wi),
              conjugation_superoperator(UnitaryMatrix(random_unitary(rng))))
             for wi in w]
    s = mix(parts)
    c = choi(s)
    ev = c.rho.eigenvalues()
    assert np.all(ev >= -1e-9)
    assert np.sum(ev) == pytest.approx(1.0, abs=1e-9)
    assert -1e-12 <= map_purity(s) <= 1 + 1e-12
    assert -1e-12 <= linear_map_purity(s) <= 1 + 1e-12


def test_choi_state_channel_dim():
    s = Superoperator(np.eye(4), tp=True, cp=True)
    assert ChoiState(choi(s).rho).channel_dim == 2
