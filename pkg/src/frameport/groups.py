"""Reference-frame transformation groups.

Parametrizations, Haar sampling, unitary representations, finite subgroups
with multiplication tables, invariant distance, and fundamental-domain
membership.

Conventions
-----------
Group tags: "u1" (physical polarisation rotations, angle mod 2pi), "u1r" (the
reduced group, angle mod pi), "su2" (unit quaternions), "so3" (quaternions up
to sign, canonicalized so the first nonzero component is positive), and the
names of the finite subgroups below.

A quaternion q = (w, x, y, z) maps to the special unitary
U(q) = w I - i (x X + y Y + z Z), so the rotation by angle a about unit axis n
is (cos(a/2), sin(a/2) n).

The physical U(1) representation on the polarisation qubit is
rho(theta) = diag(1, exp(-2i theta)); its kernel is {0, pi}, so the reduced
group has period pi and the reduced representation diag(1, exp(-2i t)) is
faithful on t in [0, pi).
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numpy.random import Generator, Philox

from .qmat import UnitaryMatrix

__all__ = [
    "GroupElement",
    "Representation",
    "FiniteSubgroup",
    "HaarStream",
    "ReducedGroup",
    "QuadratureError",
    "quat_mul",
    "quat_conj",
    "quat_rotate",
    "axis_angle_quat",
    "su2_matrix",
    "u1_physical_rep",
    "u1_reduced_rep",
    "su2_defining_rep",
    "z4_reduced",
    "z8_physical",
    "binary_octahedral",
    "binary_tetrahedral",
    "tetrahedral",
    "haar_sample",
    "quadrature_average",
    "frobenius_distance",
    "nearest_subgroup_element",
    "in_fundamental_domain",
    "reduced_group",
]

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

# Vertices of the reference regular tetrahedron (v0 along z).
TET_VERTICES = np.array([
    [0.0, 0.0, 1.0],
    [np.sqrt(8.0) / 3.0, 0.0, -1.0 / 3.0],
    [-np.sqrt(2.0) / 3.0, np.sqrt(6.0) / 3.0, -1.0 / 3.0],
    [-np.sqrt(2.0) / 3.0, -np.sqrt(6.0) / 3.0, -1.0 / 3.0],
])


class QuadratureError(RuntimeError):
    """Quadrature failed to converge; carries the last two estimates."""


# ---------------------------------------------------------------------------
# Quaternion algebra (vectorized over leading axes)
# ---------------------------------------------------------------------------

def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of quaternions (..., 4)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    w1, x1, y1, z1 = np.moveaxis(a, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(b, -1, 0)
    return np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=-1)


def quat_conj(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply the rotation of quaternion(s) q (..., 4) to vector(s) v (..., 3)."""
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    w = q[..., :1]
    u = q[..., 1:]
    # Rodrigues form of conjugation by a unit quaternion.
    cross = np.cross(u, v)
    return v + 2.0 * w * cross + 2.0 * np.cross(u, cross)


def axis_angle_quat(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate([[np.cos(angle / 2.0)], np.sin(angle / 2.0) * axis])


def canonical_sign(q: np.ndarray) -> np.ndarray:
    """Flip quaternion signs so the first component larger than 1e-9 in
    absolute value is positive (antipodal representative for SO(3))."""
    q = np.asarray(q, dtype=np.float64)
    flat = np.atleast_2d(q)
    keys = np.where(np.abs(flat) > 1e-9, np.sign(flat), 0.0)
    first = keys[np.arange(len(flat)), np.argmax(np.abs(keys) > 0, axis=1)]
    out = flat * first[:, None]
    return out.reshape(q.shape)


def su2_matrix(q: np.ndarray) -> np.ndarray:
    """2x2 special unitary of quaternion(s) (..., 4) -> (..., 2, 2)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = np.moveaxis(q, -1, 0)
    mat = np.empty(q.shape[:-1] + (2, 2), dtype=np.complex128)
    mat[..., 0, 0] = w - 1j * z
    mat[..., 0, 1] = -y - 1j * x
    mat[..., 1, 0] = y - 1j * x
    mat[..., 1, 1] = w + 1j * z
    return mat


def u1_matrix(theta) -> np.ndarray:
    """Physical-representation matrix diag(1, exp(-2i theta)), vectorized."""
    theta = np.asarray(theta, dtype=np.float64)
    mat = np.zeros(theta.shape + (2, 2), dtype=np.complex128)
    mat[..., 0, 0] = 1.0
    mat[..., 1, 1] = np.exp(-2j * theta)
    return mat


# ---------------------------------------------------------------------------
# Elements and representations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupElement:
    """A point of U(1), SU(2), SO(3), or a finite subgroup.

    Payload: angle for "u1"/"u1r", unit quaternion for "su2"/"so3", table
    index for finite subgroups.
    """

    group: str
    payload: object

    def __post_init__(self):
        if self.group in ("su2", "so3"):
            q = np.asarray(self.payload, dtype=np.float64)
            if abs(np.linalg.norm(q) - 1.0) > 1e-12:
                raise ValueError("quaternion payload is not normalized")
            if self.group == "so3":
                q = canonical_sign(q)
            object.__setattr__(self, "payload", q)

    def angle(self) -> float:
        if self.group not in ("u1", "u1r"):
            raise ValueError(f"no angle payload for group {self.group}")
        return float(self.payload)

    def quaternion(self) -> np.ndarray:
        if self.group not in ("su2", "so3"):
            raise ValueError(f"no quaternion payload for group {self.group}")
        return np.asarray(self.payload)


@dataclass(frozen=True)
class Representation:
    """Unitary representation: group tag, dimension, evaluation rule, and a
    kernel descriptor ("trivial" or a list of kernel angles)."""

    group: str
    dim: int
    matrix: Callable[[object], np.ndarray]
    kernel: tuple

    def __call__(self, g) -> np.ndarray:
        """Evaluate on a GroupElement or a raw payload (vectorized)."""
        payload = g.payload if isinstance(g, GroupElement) else g
        return self.matrix(payload)

    def unitary(self, g) -> UnitaryMatrix:
        return UnitaryMatrix(self(g))


def u1_physical_rep() -> Representation:
    return Representation("u1", 2, u1_matrix, kernel=(0.0, np.pi))


def u1_reduced_rep() -> Representation:
    return Representation("u1r", 2, u1_matrix, kernel=())


def su2_defining_rep() -> Representation:
    return Representation("su2", 2, su2_matrix, kernel=())


# ---------------------------------------------------------------------------
# Finite subgroups
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteSubgroup:
    """A finite subgroup of an ambient group, with exact index tables.

    Elements are ordered lexicographically by payload to make tie-breaking
    deterministic.
    """

    name: str
    ambient: str
    payloads: np.ndarray            # (n,) angles or (n, 4) quaternions
    table: np.ndarray               # (n, n) index multiplication table
    inverse: np.ndarray             # (n,) index inverse table
    identity: int

    @property
    def order(self) -> int:
        return len(self.payloads)

    def element(self, idx: int) -> GroupElement:
        return GroupElement(self.ambient, self.payloads[idx])

    def mul(self, i: int, j: int) -> int:
        return int(self.table[i, j])

    def inv(self, i: int) -> int:
        return int(self.inverse[i])

    def check_axioms(self) -> None:
        """Exact group-axiom checks on the index tables."""
        n = self.order
        t = self.table
        if t.shape != (n, n) or t.min() < 0 or t.max() >= n:
            raise ValueError("multiplication table is not closed")
        if not (np.all(t[self.identity] == np.arange(n))
                and np.all(t[:, self.identity] == np.arange(n))):
            raise ValueError("identity axiom fails")
        for i in range(n):
            if t[i, self.inverse[i]] != self.identity:
                raise ValueError(f"inverse axiom fails at {i}")
        for i in range(n):
            # (i j) k = i (j k) for all j, k, vectorized over the tables.
            if not np.all(t[t[i], :] == t[i, t]):
                raise ValueError(f"associativity fails at {i}")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "ambient": self.ambient,
            "order": self.order,
            "elements": np.asarray(self.payloads).tolist(),
            "table": self.table.tolist(),
        }


def _match_index(payloads: np.ndarray, item: np.ndarray, ambient: str) -> int:
    if ambient in ("u1", "u1r"):
        period = 2 * np.pi if ambient == "u1" else np.pi
        diff = np.abs((payloads - item + period / 2) % period - period / 2)
        idx = int(np.argmin(diff))
        if diff[idx] > 1e-9:
            return -1
        return idx
    dots = payloads @ np.asarray(item)
    if ambient == "so3":
        dots = np.abs(dots)
    idx = int(np.argmax(dots))
    if dots[idx] < 1.0 - 1e-9:
        return -1
    return idx


def _compose(a, b, ambient: str):
    if ambient == "u1":
        return (a + b) % (2 * np.pi)
    if ambient == "u1r":
        return (a + b) % np.pi
    q = quat_mul(a, b)
    return canonical_sign(q) if ambient == "so3" else q


def _build_subgroup(name: str, ambient: str, payloads: list) -> FiniteSubgroup:
    payloads = np.asarray(payloads, dtype=np.float64)
    order = np.lexsort(np.round(np.atleast_2d(payloads.T), 12)[::-1])
    payloads = payloads[order]
    n = len(payloads)
    table = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            k = _match_index(payloads, _compose(payloads[i], payloads[j], ambient),
                             ambient)
            if k < 0:
                raise ValueError(f"{name}: product of {i},{j} not in element list")
            table[i, j] = k
    if ambient in ("u1", "u1r"):
        identity = _match_index(payloads, 0.0, ambient)
    else:
        identity = _match_index(payloads, np.array([1.0, 0, 0, 0]), ambient)
    inverse = np.empty(n, dtype=np.int64)
    for i in range(n):
        inverse[i] = int(np.argmax(table[i] == identity))
    sub = FiniteSubgroup(name, ambient, payloads, table, inverse, identity)
    sub.check_axioms()
    return sub


def _closure(generators: list[np.ndarray]) -> list[np.ndarray]:
    """Close a set of unit quaternions under multiplication (sign-sensitive)."""
    elements = [np.array([1.0, 0, 0, 0])]
    frontier = list(generators)
    while frontier:
        q = frontier.pop()
        if any(np.dot(q, e) > 1 - 1e-9 for e in elements):
            continue
        elements.append(q)
        for e in list(elements):
            frontier.append(quat_mul(q, e))
            frontier.append(quat_mul(e, q))
    return [e / np.linalg.norm(e) for e in elements]


@functools.cache
def z4_reduced() -> FiniteSubgroup:
    return _build_subgroup("z4", "u1r", [k * np.pi / 4 for k in range(4)])


@functools.cache
def z8_physical() -> FiniteSubgroup:
    return _build_subgroup("z8", "u1", [k * np.pi / 4 for k in range(8)])


@functools.cache
def binary_octahedral() -> FiniteSubgroup:
    gens = [axis_angle_quat([0, 0, 1], np.pi / 2),
            axis_angle_quat([1, 0, 0], np.pi / 2)]
    elements = _closure(gens)
    assert len(elements) == 48
    return _build_subgroup("boct", "su2", elements)


@functools.cache
def binary_tetrahedral() -> FiniteSubgroup:
    gens = [axis_angle_quat(TET_VERTICES[0], 2 * np.pi / 3),
            axis_angle_quat(TET_VERTICES[1], 2 * np.pi / 3)]
    elements = _closure(gens)
    assert len(elements) == 24
    return _build_subgroup("btet", "su2", elements)


@functools.cache
def tetrahedral() -> FiniteSubgroup:
    quats = canonical_sign(binary_tetrahedral().payloads)
    unique: list[np.ndarray] = []
    for q in quats:
        if not any(abs(np.dot(q, u)) > 1 - 1e-9 for u in unique):
            unique.append(q)
    assert len(unique) == 12
    return _build_subgroup("tet", "so3", unique)


_SUBGROUPS = {
    "z4": z4_reduced,
    "z8": z8_physical,
    "boct": binary_octahedral,
    "btet": binary_tetrahedral,
    "tet": tetrahedral,
}


def subgroup_by_name(name: str) -> FiniteSubgroup:
    try:
        return _SUBGROUPS[name]()
    except KeyError:
        raise KeyError(f"unknown subgroup {name!r}; available: {sorted(_SUBGROUPS)}")


# ---------------------------------------------------------------------------
# Haar sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HaarStream:
    """Counter-based random stream: identical (seed, counter) always yields
    identical draws.  Parallel workers derive disjoint counter ranges from
    one base seed via child()."""

    group: str
    seed: int
    counter: int = 0

    def generator(self) -> Generator:
        return Generator(Philox(key=self.seed, counter=self.counter << 64))

    def advance(self, n: int = 1) -> "HaarStream":
        return replace(self, counter=self.counter + n)

    def child(self, i: int) -> "HaarStream":
        return replace(self, counter=(self.counter << 16) + i + 1)


@functools.cache
def _theta_cdf_table() -> tuple[np.ndarray, np.ndarray]:
    # Inverse-CDF table for the polar density proportional to sin^2(theta).
    grid = np.linspace(0.0, np.pi, 2 ** 16 + 1)
    cdf = (grid - np.sin(grid) * np.cos(grid)) / np.pi
    return cdf, grid


def sample_su2(rng: Generator, n: int) -> np.ndarray:
    """n Haar-uniform unit quaternions via hyperspherical inverse-CDF."""
    cdf, grid = _theta_cdf_table()
    theta = np.interp(rng.random(n), cdf, grid)
    psi = np.arccos(1.0 - 2.0 * rng.random(n))
    phi = rng.random(n) * 2 * np.pi
    st = np.sin(theta)
    return np.stack([
        np.cos(theta),
        st * np.sin(psi) * np.cos(phi),
        st * np.sin(psi) * np.sin(phi),
        st * np.cos(psi),
    ], axis=-1)


def haar_payloads(stream: HaarStream, n: int) -> np.ndarray:
    """Raw i.i.d. Haar payload array: (n,) angles or (n, 4) quaternions."""
    rng = stream.generator()
    if stream.group == "u1":
        return rng.random(n) * 2 * np.pi
    if stream.group == "u1r":
        return rng.random(n) * np.pi
    if stream.group in ("su2", "so3"):
        q = sample_su2(rng, n)
        return canonical_sign(q) if stream.group == "so3" else q
    raise ValueError(f"no Haar sampler for group {stream.group!r}")


def haar_sample(stream: HaarStream, n: int) -> list[GroupElement]:
    payloads = haar_payloads(stream, n)
    return [GroupElement(stream.group, p) for p in payloads]


# ---------------------------------------------------------------------------
# Quadrature, distance, fundamental domains
# ---------------------------------------------------------------------------

def quadrature_average(f: Callable[[np.ndarray], np.ndarray], group: str = "u1",
                       tol: float = 1e-8, start: int = 2 ** 12,
                       max_points: int = 2 ** 20):
    """Trapezoid average of a vectorized integrand over the circle group.

    On a periodic domain the trapezoid rule is a plain mean over a uniform
    grid; the grid is doubled until successive estimates differ by < tol.
    """
    period = {"u1": 2 * np.pi, "u1r": np.pi}[group]
    n = start
    theta = np.linspace(0.0, period, n, endpoint=False)
    prev = np.mean(np.asarray(f(theta)), axis=0)
    while n <= max_points:
        n *= 2
        theta = np.linspace(0.0, period, n, endpoint=False)
        cur = np.mean(np.asarray(f(theta)), axis=0)
        if np.max(np.abs(cur - prev)) < tol:
            return cur
        prev = cur
    raise QuadratureError(f"no convergence at {n} points", prev, cur)


def frobenius_distance(g1: GroupElement, g2: GroupElement) -> float:
    """sqrt((1/d) Tr[(M1-M2)+(M1-M2)]) on SU(2); equals sqrt(2 - 2 q1.q2)."""
    if g1.group != "su2" or g2.group != "su2":
        raise ValueError("frobenius_distance requires SU(2) elements")
    dot = float(np.dot(g1.quaternion(), g2.quaternion()))
    return float(np.sqrt(max(2.0 - 2.0 * dot, 0.0)))


def nearest_indices(payloads: np.ndarray, sub: FiniteSubgroup,
                    sign_insensitive: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized nearest-element search under the invariant metric.

    Returns (indices, tie counts beyond the winner).  Ties (within 1e-9 of
    the winning distance) are broken by lowest element index.
    """
    payloads = np.asarray(payloads)
    if sub.ambient in ("u1", "u1r"):
        period = 2 * np.pi if sub.ambient == "u1" else np.pi
        diff = payloads[..., None] - sub.payloads
        dist = np.abs((diff + period / 2) % period - period / 2)
    else:
        dots = payloads @ sub.payloads.T
        if sign_insensitive or sub.ambient == "so3":
            dots = np.abs(dots)
        dist = np.sqrt(np.maximum(2.0 - 2.0 * dots, 0.0))
    best = np.min(dist, axis=-1)
    near = dist <= best[..., None] + 1e-9
    idx = np.argmax(near, axis=-1)
    ties = np.sum(near, axis=-1) - 1
    return idx, ties


def nearest_subgroup_element(g: GroupElement, sub: FiniteSubgroup,
                             sign_insensitive: bool = False
                             ) -> tuple[GroupElement, int]:
    payload = np.asarray(g.payload)[None] if sub.ambient in ("su2", "so3") \
        else np.asarray([g.payload])
    idx, ties = nearest_indices(payload, sub, sign_insensitive)
    return sub.element(int(idx[0])), int(ties[0])


def in_fundamental_domain(g: GroupElement, sub: FiniteSubgroup,
                          sign_insensitive: bool = False) -> bool:
    """True iff g lies in the Voronoi cell of the identity element."""
    payload = np.asarray(g.payload)[None] if sub.ambient in ("su2", "so3") \
        else np.asarray([g.payload])
    idx, _ = nearest_indices(payload, sub, sign_insensitive)
    return int(idx[0]) == sub.identity


@dataclass(frozen=True)
class ReducedGroup:
    """Reduced group of a representation: tag plus payload projection."""

    group: str
    project: Callable[[object], object]


def reduced_group(rep: Representation) -> ReducedGroup:
    if rep.group == "u1":
        # Kernel {0, pi}: the reduced group halves the period.
        return ReducedGroup("u1r", lambda theta: np.asarray(theta) % np.pi)
    if rep.group == "su2":
        # Faithful, but the conjugation action factors through SO(3).
        return ReducedGroup("so3", canonical_sign)
    raise ValueError(f"unsupported representation group {rep.group!r}")
