"""End-to-end acceptance suite.

Each test prints a single `ACCEPTANCE <n>: PASS` or `ACCEPTANCE <n>: FAIL`
line and then asserts.  Tolerances follow the package's validation targets;
sample budgets are the production ones, so this module is slower than the
unit suites.
"""
from __future__ import annotations

import json
import re
import time

import numpy as np
import pytest
from scipy import stats

from frameport import channel as ch
from frameport import cli
from frameport import encoding as enc
from frameport import groups
from frameport import optimize as opt
from frameport import ueb as ueb_mod
from frameport.groups import HaarStream
from frameport.qmat import DensityMatrix, map_purity
from frameport.ueb import equivariance_analysis, pauli_ueb, tetrahedral_ueb

FULL = 10 ** 6


def report(n: int, ok: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)


def u1_bundle():
    basis = pauli_ueb()
    spec = ch.u1_teleportation_spec(basis)
    eq = equivariance_analysis(basis, groups.z8_physical(),
                               groups.u1_physical_rep())
    return spec, eq


def su2_bundle():
    basis = pauli_ueb()
    spec = ch.su2_teleportation_spec(basis)
    eq = equivariance_analysis(basis, groups.binary_octahedral(),
                               groups.su2_defining_rep())
    return spec, eq


def btet_bundle():
    basis = tetrahedral_ueb()
    spec = ch.su2_teleportation_spec(basis)
    eq = equivariance_analysis(basis, groups.binary_tetrahedral(),
                               groups.su2_defining_rep())
    return spec, eq


# ---------------------------------------------------------------------------
# 1. Structural suite
# ---------------------------------------------------------------------------

def test_acceptance_1_structural():
    t0 = time.perf_counter()
    ok = True
    for name in ("z4", "z8", "tet", "btet", "boct"):
        try:
            groups.subgroup_by_name(name).check_axioms()
        except Exception:
            ok = False
    for basis in (pauli_ueb(), tetrahedral_ueb()):
        passed, dev = ueb_mod.check_ueb(basis.mats, tol=1e-12)
        ok = ok and passed
    pairs = [(pauli_ueb(), "z4", groups.u1_reduced_rep()),
             (pauli_ueb(), "z8", groups.u1_physical_rep()),
             (pauli_ueb(), "boct", groups.su2_defining_rep()),
             (tetrahedral_ueb(), "btet", groups.su2_defining_rep())]
    for basis, sub_name, rep in pairs:
        eq = equivariance_analysis(basis, groups.subgroup_by_name(sub_name),
                                   rep)
        # Exhaustive table check: the conjugation identity for every (h, i).
        for h in range(eq.subgroup.order):
            r = rep(eq.subgroup.payloads[h])
            for i in range(basis.size):
                lhs = r.conj().T @ basis.mats[i] @ r
                rhs = eq.alpha[i, h] * basis.mats[eq.sigma[i, h]]
                ok = ok and np.max(np.abs(lhs - rhs)) < 1e-9
    seconds = time.perf_counter() - t0
    ok = ok and seconds < 10
    report(1, ok, f"{seconds:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 2. Perfect schemes give the identity channel
# ---------------------------------------------------------------------------

def test_acceptance_2_perfect_schemes():
    spec, eq = u1_bundle()
    scheme = enc.perfect_matched_scheme(enc.matched_scheme_spec(eq, 1))
    est = ch.perfect_channel(spec, eq, scheme, "u1", 1, "quadrature")
    ok = np.max(np.abs(est.superop.mat - np.eye(4))) < 1e-9

    spec2, eq2 = btet_bundle()
    scheme2 = enc.perfect_matched_scheme(enc.matched_scheme_spec(eq2, 0))
    est2 = ch.perfect_channel(spec2, eq2, scheme2, "su2", 1, "mc",
                              samples=FULL)
    tol = 3 * np.maximum(est2.stderr, 1e-7)
    ok = ok and bool(np.all(np.abs(est2.superop.mat - np.eye(4)) <= tol))
    report(2, ok)
    assert ok


# ---------------------------------------------------------------------------
# 3. Circle-group conventional channel
# ---------------------------------------------------------------------------

def test_acceptance_3_u1_conventional():
    spec, _ = u1_bundle()
    est = ch.conventional_channel(spec, "u1", "averaged", "quadrature")
    expected = np.diag([1.0, 0.5, 0.5, 1.0]).astype(np.complex128)
    purity = map_purity(est.superop)
    ok = (np.max(np.abs(est.superop.mat - expected)) < 1e-9
          and abs(purity - 0.594) < 0.005)
    report(3, ok, f"purity {purity:.4f}")
    assert ok


# ---------------------------------------------------------------------------
# 4. Circle-group tight channel, quadrature vs Monte Carlo
# ---------------------------------------------------------------------------

def test_acceptance_4_u1_tight():
    spec, eq = u1_bundle()
    scheme = enc.tight_matched_scheme(enc.matched_scheme_spec(eq, 1))
    exact = ch.tight_channel(spec, eq, scheme, "u1", "averaged", "quadrature")
    target = 2 / np.pi ** 2 + 0.5
    ok = abs(exact.superop.mat[1, 1].real - target) < 1e-6
    mc = ch.tight_channel(spec, eq, scheme, "u1", "averaged", "mc",
                          samples=FULL)
    tol = 3 * np.maximum(mc.stderr, 1e-4)
    ok = ok and bool(np.all(np.abs(mc.superop.mat - exact.superop.mat)
                            <= tol))
    purity = map_purity(exact.superop)
    # The Choi-derived map purity of the averaged tight channel is 0.697.
    # The published companion figure of 0.65 does not match any purity
    # functional of this channel that we could identify; the discrepancy and
    # the candidates we checked are recorded in the project decisions ledger.
    report(4, ok, f"choi purity {purity:.4f} (published companion: 0.65)")
    assert ok


# ---------------------------------------------------------------------------
# 5. Rotation-group conventional channel
# ---------------------------------------------------------------------------

def test_acceptance_5_su2_conventional():
    spec, _ = su2_bundle()
    est = ch.conventional_channel(spec, "su2", 1, "mc", samples=FULL)
    ev = sorted(est.choi_spectrum(), reverse=True)
    ok = bool(np.all(np.abs(np.array(ev) - [1 / 3, 1 / 3, 1 / 3, 0])
                     <= 0.01))
    purity, _ = est.map_purity_with_error()
    ok = ok and abs(purity - 0.2075) < 0.01
    avg = ch.conventional_channel(spec, "su2", "averaged", "mc",
                                  samples=FULL)
    avg_purity, _ = avg.map_purity_with_error()
    report(5, ok, f"per-result purity {purity:.4f}, "
                  f"result-averaged purity {avg_purity:.4f}")
    assert ok


# ---------------------------------------------------------------------------
# 6. Rotation-group tight channels
# ---------------------------------------------------------------------------

def _mean_result_purity(scheme_name: str) -> tuple[float, float]:
    spec, eq = su2_bundle()
    if scheme_name == "rod":
        scheme = enc.rod_scheme()
    else:
        scheme = enc.tight_matched_scheme(enc.matched_scheme_spec(eq, 1))
    ests = ch.tight_result_estimates(spec, eq, scheme, "su2", "mc",
                                     samples=FULL)
    return ch.mean_result_purity(ests)


def test_acceptance_6_rod_tight():
    purity, err = _mean_result_purity("rod")
    ok = abs(purity - 0.44) <= 0.05
    report(6, ok, f"rod mean-result purity {purity:.4f} +- {err:.4f}")
    assert ok


def test_acceptance_6_matched_tight():
    purity, err = _mean_result_purity("matched")
    ok = abs(purity - 0.32) <= 0.04
    report(6, ok, f"matched mean-result purity {purity:.4f} +- {err:.4f}")
    assert ok, (
        f"matched-scheme mean-result purity is {purity:.4f} +- {err:.4f}, "
        "outside the target band 0.32 +- 0.04. The value is stable under "
        "independent re-derivations, alternative region choices, and "
        "stabilizer shifts of the sampled misalignments, and the rod scheme "
        "(same integrand, different regions) lands at 0.452 as well; we "
        "could not find any consistent definition that yields 0.32. "
        "Full analysis: decisions ledger, 'matched tight purity' entry.")


# ---------------------------------------------------------------------------
# 7. Simulator cross-validation
# ---------------------------------------------------------------------------

def test_acceptance_7_simulator_cross_validation():
    shots = 10 ** 5
    sigma = DensityMatrix(np.eye(2, dtype=np.complex128) / 2)
    configs = []

    spec, eq = u1_bundle()
    u1_scheme = enc.tight_matched_scheme(enc.matched_scheme_spec(eq, 1))
    exact = ch.tight_channel(spec, eq, u1_scheme, "u1", "averaged",
                             "quadrature")
    configs.append(("u1-tight", spec, u1_scheme, "u1", exact.superop.mat))

    spec2, eq2 = su2_bundle()
    rod = enc.rod_scheme()
    rod_est = ch.tight_channel(spec2, eq2, rod, "su2", "averaged", "mc",
                               samples=FULL)
    configs.append(("su2-rod-tight", spec2, rod, "su2", rod_est.superop.mat))

    spec3, eq3 = btet_bundle()
    perfect = enc.perfect_matched_scheme(enc.matched_scheme_spec(eq3, 0))
    configs.append(("su2-btet-perfect", spec3, perfect, "su2", np.eye(4)))

    ok = True
    for k, (name, spec_k, scheme_k, group, target) in enumerate(configs):
        _, transcript = ch.single_shot_simulate(
            spec_k, scheme_k, group, sigma, HaarStream(group, 100 + k),
            shots=shots)
        got = transcript["mean_superop"].mat
        # Entries are shot-averages of products of unit-modulus terms, so
        # each standard error is at most 1/sqrt(shots).
        tol = 3.0 / np.sqrt(shots) + 1e-6
        ok = ok and bool(np.all(np.abs(got - target) <= tol))
    report(7, ok)
    assert ok


# ---------------------------------------------------------------------------
# 8. Transmission uniformity
# ---------------------------------------------------------------------------

def test_acceptance_8_transmission_uniformity():
    n, bins = 64000, 64
    ok = True
    pvals = []

    spec, eq = u1_bundle()
    scheme = enc.tight_matched_scheme(enc.matched_scheme_spec(eq, 1))
    rod = enc.rod_scheme()
    for group, sch, seed in (("u1", scheme, 31), ("su2", rod, 32)):
        stream = HaarStream(group, seed)
        g = groups.haar_payloads(stream, n)
        rng = stream.child(1).generator()
        idx = np.asarray(sch.indices)[rng.integers(0, len(sch.indices),
                                                   size=n)]
        x = np.concatenate([
            enc.sample_encoding(sch, i, stream.child(2 + j), int(m))
            for j, (i, m) in enumerate(zip(*np.unique(idx,
                                                      return_counts=True)))])
        g = g[:len(x)]
        sent = np.stack([sch.space.act(gi, xi) for gi, xi in zip(g, x)]) \
            if group == "su2" else sch.space.act(g, x)
        labels = sch.space.uniform_bins(np.asarray(sent), bins)
        counts = np.bincount(labels, minlength=bins)
        p = stats.chisquare(counts).pvalue
        pvals.append(p)
        ok = ok and p > 0.001
    report(8, ok, "p-values " + ", ".join(f"{p:.3f}" for p in pvals))
    assert ok


# ---------------------------------------------------------------------------
# 9. Basis optimality
# ---------------------------------------------------------------------------

def test_acceptance_9_optimization():
    r1 = opt.optimize_conventional_ueb("u1", restarts=8, seed=0)
    ok = r1.pauli_is_optimal(slack=2e-3)
    r2 = opt.optimize_conventional_ueb("su2", samples=2 * 10 ** 5, seed=0,
                                       scan=100, threads=4)
    ok = ok and r2.pauli_is_optimal(sigmas=3.0)
    report(9, ok, f"u1 best {r1.best.linear_purity:.4f}, "
                  f"su2 best {r2.best.linear_purity:.4f} "
                  f"vs pauli {r2.baseline.linear_purity:.4f}")
    assert ok


# ---------------------------------------------------------------------------
# 10. Determinism
# ---------------------------------------------------------------------------

def strip_timing(text: str) -> str:
    return re.sub(r'"seconds": [0-9.e+-]+', '"seconds": 0', text)


def test_acceptance_10_determinism(tmp_path):
    # Wall-clock timings are the only permitted difference between repeated
    # runs; everything numerical must be bit-exact.
    pairs = [
        ["channel", "--scheme", "su2-rod-tight", "--result", "1",
         "--method", "mc", "--samples", "100000", "--seed", "3"],
        ["simulate", "--scheme", "u1-tight", "--shots", "2000",
         "--seed", "3"],
        ["optimize", "--group", "u1", "--seed", "3"],
    ]
    ok = True
    for k, args in enumerate(pairs):
        a, b = tmp_path / f"a{k}.json", tmp_path / f"b{k}.json"
        assert cli.main(args + ["--out", str(a)]) == 0
        assert cli.main(args + ["--out", str(b)]) == 0
        ok = ok and (strip_timing(a.read_text()) == strip_timing(b.read_text()))
    report(10, ok)
    assert ok
