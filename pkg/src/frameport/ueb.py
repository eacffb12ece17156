"""Unitary error bases and their equivariance analysis.

A UEB is a set of d^2 unitaries orthonormal under the normalized
Hilbert-Schmidt inner product (1/d) Tr(U_i+ U_j).  A finite subgroup H of the
frame group acts on an equivariant UEB by conjugation:
rho(h)+ U_i rho(h) = alpha(i, h) U_{sigma(i, h)}, where sigma is a right
action on the index set.  Matching of unitaries is global-phase-insensitive
throughout (|normalized trace overlap| = 1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .groups import FiniteSubgroup, Representation, PAULI_X, PAULI_Y, PAULI_Z
from .qmat import UnitaryMatrix

__all__ = [
    "UnitaryErrorBasis",
    "EquivarianceData",
    "NotEquivariantError",
    "pauli_ueb",
    "tetrahedral_ueb",
    "z4_family_ueb",
    "general_qubit_ueb",
    "check_ueb",
    "equivariance_analysis",
]


@dataclass(frozen=True)
class UnitaryErrorBasis:
    """d^2 ordered unitaries, orthonormal under (1/d) Tr(U_i+ U_j)."""

    mats: np.ndarray    # (d^2, d, d)

    def __post_init__(self):
        mats = np.asarray(self.mats, dtype=np.complex128)
        object.__setattr__(self, "mats", mats)
        ok, dev = check_ueb(mats, tol=1e-9)
        if not ok:
            raise ValueError(f"not a unitary error basis (max deviation {dev:.3e})")

    @property
    def dim(self) -> int:
        return self.mats.shape[1]

    @property
    def size(self) -> int:
        return self.mats.shape[0]

    def unitary(self, i: int) -> UnitaryMatrix:
        return UnitaryMatrix(self.mats[i])


class NotEquivariantError(ValueError):
    """Conjugation by some rho(h) left the basis (up to phase)."""

    def __init__(self, i: int, h: int, best_overlap: float):
        self.i, self.h, self.best_overlap = i, h, best_overlap
        super().__init__(
            f"conjugating U_{i} by element {h} gives best overlap "
            f"{best_overlap:.6f} with the basis")


@dataclass(frozen=True)
class EquivarianceData:
    """Index action of a finite subgroup on an equivariant UEB.

    sigma[i, h] = j and alpha[i, h] the phase with
    rho(h)+ U_i rho(h) = alpha U_j.  Orbits partition the index set; each
    orbit's stabilizer L fixes the base element (lowest index in the orbit)
    and coset_reps[i] is the lowest-index H-element carrying base -> i.
    """

    basis: UnitaryErrorBasis
    subgroup: FiniteSubgroup
    rep: Representation
    sigma: np.ndarray           # (d^2, |H|) int
    alpha: np.ndarray           # (d^2, |H|) complex, unit modulus
    orbits: tuple[tuple[int, ...], ...]
    stabilizers: dict[int, tuple[int, ...]]   # orbit base -> H indices
    coset_reps: dict[int, int]                # UEB index -> H index

    def orbit_of(self, i: int) -> tuple[int, ...]:
        for orb in self.orbits:
            if i in orb:
                return orb
        raise KeyError(i)

    def base_of(self, i: int) -> int:
        return min(self.orbit_of(i))

    def sigma_inv(self, h: int, i: int) -> int:
        """The index j with sigma(j, h) = i, i.e. sigma(i, h^{-1})."""
        return int(self.sigma[i, self.subgroup.inv(h)])

    def to_json(self) -> dict:
        return {
            "subgroup": self.subgroup.name,
            "sigma": self.sigma.tolist(),
            "alpha": [[[z.real, z.imag] for z in row] for row in self.alpha],
            "orbits": [list(o) for o in self.orbits],
            "stabilizers": {str(b): list(s) for b, s in self.stabilizers.items()},
            "coset_reps": {str(i): int(c) for i, c in self.coset_reps.items()},
        }


def pauli_ueb() -> UnitaryErrorBasis:
    """{I, X, Y, Z} in that order."""
    return UnitaryErrorBasis(np.stack([np.eye(2), PAULI_X, PAULI_Y, PAULI_Z]))


def tetrahedral_ueb() -> UnitaryErrorBasis:
    """The tetrahedral qubit UEB (equivariant for the binary tetrahedral
    group)."""
    e2, e4, e5 = (np.exp(1j * k * np.pi / 3) for k in (2, 4, 5))
    s = np.sqrt(2.0)
    v0 = np.diag([1.0, e2])
    v1 = np.array([[1, s * e4], [s * e4, e5]]) / np.sqrt(3)
    v2 = np.array([[1, s * e2], [s, e5]]) / np.sqrt(3)
    v3 = np.array([[1, s], [s * e2, e5]]) / np.sqrt(3)
    return UnitaryErrorBasis(np.stack([v0, v1, v2, v3]))


def _rz(angle: float) -> np.ndarray:
    return np.diag([np.exp(-1j * angle / 2), np.exp(1j * angle / 2)])


def z4_family_ueb(theta: float, phi: float) -> UnitaryErrorBasis:
    """Two-parameter family of Z4-equivariant qubit UEBs; (pi, 0) recovers the
    Pauli UEB up to per-element phases."""
    rp = _rz(phi)
    return UnitaryErrorBasis(np.stack([
        _rz(theta - np.pi),
        rp @ PAULI_X @ rp.conj().T,
        rp @ PAULI_Y @ rp.conj().T,
        _rz(theta),
    ]))


def general_qubit_ueb(U: UnitaryMatrix, V: UnitaryMatrix) -> UnitaryErrorBasis:
    """{U X_i V} for the Pauli basis X_i; any unitary pair gives a UEB."""
    paulis = pauli_ueb().mats
    return UnitaryErrorBasis(np.einsum("ab,nbc,cd->nad", U.mat, paulis, V.mat))


def check_ueb(mats, tol: float = 1e-9) -> tuple[bool, float]:
    """Verify unitarity and Hilbert-Schmidt orthonormality.

    Returns (ok, max deviation); does not raise on failure.
    """
    mats = np.asarray(mats, dtype=np.complex128)
    n, d, _ = mats.shape
    dev = 0.0
    for m in mats:
        dev = max(dev, float(np.max(np.abs(m.conj().T @ m - np.eye(d)))))
    gram = np.einsum("mab,nab->mn", mats.conj(), mats) / d
    dev = max(dev, float(np.max(np.abs(gram - np.eye(n)))))
    return dev <= tol, dev


def equivariance_analysis(basis: UnitaryErrorBasis, sub: FiniteSubgroup,
                          rep: Representation) -> EquivarianceData:
    """Extract the index action sigma, phases alpha, orbits, stabilizers,
    and coset representatives of H acting on the UEB by conjugation."""
    n = basis.size
    d = basis.dim
    mats = basis.mats
    order = sub.order
    sigma = np.empty((n, order), dtype=np.int64)
    alpha = np.empty((n, order), dtype=np.complex128)
    for h in range(order):
        r = rep(sub.element(h))
        conj = np.einsum("ab,nbc,cd->nad", r.conj().T, mats, r)
        # overlaps[i, j] = (1/d) Tr(U_j+ rho+ U_i rho)
        overlaps = np.einsum("iab,jab->ij", conj, mats.conj()) / d
        mags = np.abs(overlaps)
        js = np.argmax(mags, axis=1)
        for i in range(n):
            if abs(mags[i, js[i]] - 1.0) > 1e-9:
                raise NotEquivariantError(i, h, float(mags[i, js[i]]))
            sigma[i, h] = js[i]
            alpha[i, h] = overlaps[i, js[i]]

    # Orbits under the right action.
    seen = [False] * n
    orbits = []
    for i in range(n):
        if seen[i]:
            continue
        orbit = sorted(set(int(j) for j in sigma[i]))
        for j in orbit:
            seen[j] = True
        orbits.append(tuple(orbit))

    stabilizers = {}
    coset_reps: dict[int, int] = {}
    for orbit in orbits:
        base = orbit[0]
        stabilizers[base] = tuple(
            int(h) for h in range(order) if sigma[base, h] == base)
        for i in orbit:
            coset_reps[i] = int(np.argmax(sigma[base] == i))

    return EquivarianceData(basis, sub, rep, sigma, alpha, tuple(orbits),
                            stabilizers, coset_reps)
