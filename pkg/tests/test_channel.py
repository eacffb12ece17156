"""Channel-assembly tests: conventional, tight, perfect; the single-shot
simulator; the Monte Carlo engine."""
from __future__ import annotations

import numpy as np
import pytest

from frameport import channel as ch
from frameport import encoding as enc
from frameport import groups
from frameport.groups import HaarStream
from frameport.qmat import DensityMatrix, Superoperator, map_purity
from frameport.ueb import equivariance_analysis, pauli_ueb, tetrahedral_ueb

SAMPLES = 2 * 10 ** 5     # unit-test budget; acceptance uses 1e6


def u1_bundle():
    basis = pauli_ueb()
    spec = ch.u1_teleportation_spec(basis)
    eq = equivariance_analysis(basis, groups.z8_physical(),
                               groups.u1_physical_rep())
    return spec, eq


def su2_bundle(basis=None):
    basis = basis or pauli_ueb()
    spec = ch.su2_teleportation_spec(basis)
    eq = equivariance_analysis(basis, groups.binary_octahedral(),
                               groups.su2_defining_rep())
    return spec, eq


# ---------------------------------------------------------------------------
# Protocol specification
# ---------------------------------------------------------------------------

def test_measurement_basis_is_orthonormal():
    for spec, _ in (u1_bundle(), su2_bundle()):
        basis = spec.measurement_basis()
        gram = basis.conj().T @ basis
        assert np.allclose(gram, np.eye(4), atol=1e-12)


def test_su2_resource_is_invariant():
    spec, _ = su2_bundle()
    dev = spec.check_resource_invariance(HaarStream("su2", 0))
    assert dev < 1e-9


def test_premeasurement_unitary_is_unitary():
    spec, _ = su2_bundle()
    for x in range(4):
        m = spec.premeasurement_unitary(x)
        assert np.allclose(m @ m.conj().T, np.eye(2), atol=1e-12)


# ---------------------------------------------------------------------------
# Conventional channel
# ---------------------------------------------------------------------------

def test_u1_conventional_averaged_is_half_dephasing():
    spec, _ = u1_bundle()
    est = ch.conventional_channel(spec, "u1", "averaged", "quadrature")
    expected = np.diag([1.0, 0.5, 0.5, 1.0]).astype(np.complex128)
    assert np.max(np.abs(est.superop.mat - expected)) < 1e-9
    assert map_purity(est.superop) == pytest.approx(0.5943609377704335,
                                                    abs=1e-9)


def test_su2_conventional_result0_is_identity():
    spec, _ = su2_bundle()
    est = ch.conventional_channel(spec, "su2", 0, "mc", samples=10 ** 4)
    assert np.max(np.abs(est.superop.mat - np.eye(4))) < 1e-9


def test_su2_conventional_result1_spectrum():
    spec, _ = su2_bundle()
    est = ch.conventional_channel(spec, "su2", 1, "mc", samples=SAMPLES)
    ev = sorted(est.choi_spectrum(), reverse=True)
    assert np.allclose(ev, [1 / 3, 1 / 3, 1 / 3, 0.0], atol=0.02)
    p, err = est.map_purity_with_error()
    assert p == pytest.approx(1 - np.log(3) / np.log(4), abs=0.01)


def test_conventional_mc_agrees_with_quadrature():
    spec, _ = u1_bundle()
    exact = ch.conventional_channel(spec, "u1", 1, "quadrature")
    mc = ch.conventional_channel(spec, "u1", 1, "mc", samples=SAMPLES)
    tol = 3 * np.maximum(mc.stderr, 1e-4)
    assert np.all(np.abs(mc.superop.mat - exact.superop.mat) <= tol)


# ---------------------------------------------------------------------------
# Tight channel
# ---------------------------------------------------------------------------

def u1_tight_scheme(eq):
    return enc.tight_matched_scheme(enc.matched_scheme_spec(eq, 1))


def test_u1_tight_quadrature_off_diagonal():
    spec, eq = u1_bundle()
    scheme = u1_tight_scheme(eq)
    est = ch.tight_channel(spec, eq, scheme, "u1", "averaged", "quadrature")
    target = 2 / np.pi ** 2 + 0.5
    assert est.superop.mat[1, 1].real == pytest.approx(target, abs=1e-6)
    assert est.superop.mat[2, 2].real == pytest.approx(target, abs=1e-6)


def test_u1_tight_mc_agrees_with_quadrature():
    spec, eq = u1_bundle()
    scheme = u1_tight_scheme(eq)
    exact = ch.tight_channel(spec, eq, scheme, "u1", 1, "quadrature")
    mc = ch.tight_channel(spec, eq, scheme, "u1", 1, "mc", samples=SAMPLES)
    tol = 3 * np.maximum(mc.stderr, 2e-3)
    assert np.all(np.abs(mc.superop.mat - exact.superop.mat) <= tol)


def test_tight_singleton_orbit_is_identity():
    spec, eq = u1_bundle()
    scheme = u1_tight_scheme(eq)
    for i in (0, 3):
        est = ch.tight_channel(spec, eq, scheme, "u1", i, "quadrature")
        assert np.max(np.abs(est.superop.mat - np.eye(4))) < 1e-9


def test_su2_tight_orbit_channels_share_spectrum():
    spec, eq = su2_bundle()
    scheme = enc.tight_matched_scheme(enc.matched_scheme_spec(eq, 1))
    ests = ch.tight_result_estimates(spec, eq, scheme, "su2", "mc",
                                     samples=SAMPLES)
    spectra = [sorted(ests[i].choi_spectrum()) for i in (1, 2, 3)]
    assert np.allclose(spectra[0], spectra[1], atol=1e-9)
    assert np.allclose(spectra[0], spectra[2], atol=1e-9)
    assert np.max(np.abs(ests[0].superop.mat - np.eye(4))) < 1e-9


def test_su2_tight_invariant_under_left_stabilizer_shift():
    """The base integrand is invariant under g -> h g for h stabilizing the
    base element, so shifting the sampled misalignments leaves the channel
    unchanged up to Monte Carlo error."""
    spec, eq = su2_bundle()
    scheme = enc.tight_matched_scheme(enc.matched_scheme_spec(eq, 1))
    h = eq.subgroup.payloads[eq.stabilizers[1][3]]
    plain = ch.tight_channel(spec, eq, scheme, "su2", 1, "mc",
                             samples=SAMPLES, seed=0)
    shifted = ch.tight_channel(spec, eq, scheme, "su2", 1, "mc",
                               samples=SAMPLES, seed=1,
                               g_transform=lambda g: groups.quat_mul(h, g))
    p1, e1 = plain.map_purity_with_error()
    p2, e2 = shifted.map_purity_with_error()
    assert abs(p1 - p2) < 4 * np.hypot(e1, e2) + 5e-3


def test_rod_and_matched_tight_purities_agree():
    """The two rotation-group tight schemes yield nearly identical per-result
    channels (the regions differ, but the stabilizer-averaged overlap weight
    does not)."""
    spec, eq = su2_bundle()
    matched = enc.tight_matched_scheme(enc.matched_scheme_spec(eq, 1))
    rod = enc.rod_scheme()
    pm, em = ch.tight_channel(spec, eq, matched, "su2", 1, "mc",
                              samples=SAMPLES).map_purity_with_error()
    pr, er = ch.tight_channel(spec, eq, rod, "su2", 1, "mc",
                              samples=SAMPLES).map_purity_with_error()
    assert pm == pytest.approx(0.268, abs=0.01)
    assert pr == pytest.approx(0.270, abs=0.01)


# ---------------------------------------------------------------------------
# Perfect channel
# ---------------------------------------------------------------------------

def test_u1_perfect_is_identity():
    spec, eq = u1_bundle()
    scheme = enc.perfect_matched_scheme(enc.matched_scheme_spec(eq, 1))
    est = ch.perfect_channel(spec, eq, scheme, "u1", 1, "quadrature")
    assert np.max(np.abs(est.superop.mat - np.eye(4))) < 1e-9


def test_btet_perfect_mc_is_identity():
    basis = tetrahedral_ueb()
    spec = ch.su2_teleportation_spec(basis)
    eq = equivariance_analysis(basis, groups.binary_tetrahedral(),
                               groups.su2_defining_rep())
    scheme = enc.perfect_matched_scheme(enc.matched_scheme_spec(eq, 0))
    est = ch.perfect_channel(spec, eq, scheme, "su2", 1, "mc",
                             samples=SAMPLES)
    tol = 3 * np.maximum(est.stderr, 1e-6)
    assert np.all(np.abs(est.superop.mat - np.eye(4)) <= tol)


def test_rod_point_encoding_is_perfectly_correctable():
    """A single encoding point per index pins down the frame exactly, so the
    perfect-reconstruction channel is the identity for every result."""
    spec, eq = su2_bundle()
    rod = enc.rod_scheme()
    points = {i: np.eye(3)[i - 1][None] for i in (1, 2, 3)}
    scheme = enc.EncodingScheme("rod-points", rod.space, rod.subgroup,
                                (1, 2, 3), "perfect", rod.decode_fn,
                                lambda i, rng, n: np.tile(points[i][0], (n, 1)),
                                points=points)
    for i in (1, 2, 3):
        est = ch.perfect_channel(spec, eq, scheme, "su2", i, "quadrature")
        assert np.max(np.abs(est.superop.mat - np.eye(4))) < 1e-9


def test_finite_group_check_passes_for_u1():
    spec, eq = u1_bundle()
    ok, info = ch.finite_group_check(spec, eq, u1_tight_scheme(eq))
    assert ok, info


# ---------------------------------------------------------------------------
# Single-shot simulator and engine
# ---------------------------------------------------------------------------

def test_single_shot_conventional_matches_channel():
    spec, _ = u1_bundle()
    sigma = DensityMatrix(np.array([[0.5, 0.5], [0.5, 0.5]],
                                   dtype=np.complex128))
    out, transcript = ch.single_shot_simulate(
        spec, None, "u1", sigma, HaarStream("u1", 21), shots=120000)
    exact = ch.conventional_channel(spec, "u1", "averaged", "quadrature")
    expected = exact.superop.apply(sigma.mat)
    assert np.max(np.abs(out.mat - expected)) < 5e-3
    assert np.allclose(transcript["probs"], 0.25, atol=1e-9)


def test_single_shot_perfect_reconstructs_exactly():
    basis = tetrahedral_ueb()
    spec = ch.su2_teleportation_spec(basis)
    eq = equivariance_analysis(basis, groups.binary_tetrahedral(),
                               groups.su2_defining_rep())
    scheme = enc.perfect_matched_scheme(enc.matched_scheme_spec(eq, 0))
    sigma = DensityMatrix(np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]]))
    out, _ = ch.single_shot_simulate(spec, scheme, "su2", sigma,
                                     HaarStream("su2", 22), shots=500)
    assert np.max(np.abs(out.mat - sigma.mat)) < 1e-9


def test_mc_engine_deterministic_and_correct():
    stream = HaarStream("u1", 13)
    mean1, err1 = ch.mc_engine(50000, stream,
                               lambda rng, m: np.cos(rng.random(m) * 2 * np.pi) ** 2)
    mean2, _ = ch.mc_engine(50000, HaarStream("u1", 13),
                            lambda rng, m: np.cos(rng.random(m) * 2 * np.pi) ** 2)
    assert mean1 == mean2
    assert abs(mean1 - 0.5) < 4 * err1


def test_mc_engine_rejects_tiny_sample_counts():
    with pytest.raises(ValueError):
        ch.mc_engine(10, HaarStream("u1", 0), lambda rng, m: np.ones(m))


def test_mc_channel_estimates_are_seed_deterministic():
    spec, _ = su2_bundle()
    a = ch.conventional_channel(spec, "su2", 1, "mc", samples=2 * 10 ** 4,
                                seed=5)
    b = ch.conventional_channel(spec, "su2", 1, "mc", samples=2 * 10 ** 4,
                                seed=5)
    assert np.array_equal(a.superop.mat, b.superop.mat)
    assert np.array_equal(a.replicates, b.replicates)


def test_estimate_invariants():
    spec, _ = su2_bundle()
    est = ch.conventional_channel(spec, "su2", 1, "mc", samples=2 * 10 ** 4)
    choi = Superoperator(est.superop.mat)._choi_mat()
    assert np.trace(choi).real == pytest.approx(1.0, abs=1e-9)
    assert np.min(np.linalg.eigvalsh(choi)) > -1e-6
