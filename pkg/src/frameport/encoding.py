"""Reading spaces with group actions, encoding/decoding schemes, and the
tight/perfect matched-scheme constructors.

Reading space kinds
-------------------
- "polarisation-axis": linear polarisation axes, angle mod pi.  The physical
  rotation group acts by angle addition; the pi rotation acts trivially.
- "rod-axis": orientation axes, unit vectors with antipodal identification.
  SU(2) acts through its rotation; +-g act identically.
- "frame-torsor": elements of the reduced group itself.  Over the reduced
  circle the action is angle addition; over SO(3) a physical g sends the
  label f to f g^{-1} (a left action on labels, matching how two parties'
  frame labellings transform into each other).

Decoding is everywhere deterministic with lowest-index tie-break; tie sets
have measure zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.random import Generator

from . import groups
from .groups import FiniteSubgroup, HaarStream, canonical_sign, quat_conj, \
    quat_mul, quat_rotate, sample_su2
from .ueb import EquivarianceData

__all__ = [
    "ReadingSpace",
    "EncodingScheme",
    "MatchedSchemeSpec",
    "polarisation_axis_space",
    "rod_axis_space",
    "frame_torsor_space",
    "act",
    "decode",
    "decode_batch",
    "sample_encoding",
    "matched_scheme_spec",
    "tight_matched_scheme",
    "perfect_matched_scheme",
    "rod_scheme",
    "compatibility_check",
]


@dataclass(frozen=True)
class ReadingSpace:
    """A manifold of classical readings with a physical-group action and a
    normalized invariant measure."""

    kind: str
    group: str          # tag of group payloads accepted by the action

    def act(self, g_payload, x: np.ndarray) -> np.ndarray:
        """Apply the action, vectorized over readings (and over g if its
        leading shape matches x)."""
        if self.kind == "polarisation-axis":
            return (np.asarray(x) + np.asarray(g_payload)) % np.pi
        if self.kind == "rod-axis":
            return quat_rotate(np.asarray(g_payload), np.asarray(x))
        if self.kind == "frame-torsor" and self.group == "u1r":
            return (np.asarray(x) + np.asarray(g_payload)) % np.pi
        if self.kind == "frame-torsor":
            return canonical_sign(quat_mul(np.asarray(x),
                                           quat_conj(np.asarray(g_payload))))
        raise ValueError(f"unknown space kind {self.kind!r}")

    def sample(self, rng: Generator, n: int) -> np.ndarray:
        """n uniform readings."""
        if self.kind in ("polarisation-axis",) or self.group == "u1r":
            return rng.random(n) * np.pi
        if self.kind == "rod-axis":
            vec = rng.normal(size=(n, 3))
            return vec / np.linalg.norm(vec, axis=1, keepdims=True)
        return canonical_sign(sample_su2(rng, n))

    def uniform_bins(self, x: np.ndarray, n_bins: int = 64) -> np.ndarray:
        """Assign readings to one of n_bins equal-measure bins (for
        uniformity tests)."""
        x = np.asarray(x)
        if self.kind in ("polarisation-axis",) or self.group == "u1r":
            return np.minimum((x / np.pi * n_bins).astype(int), n_bins - 1)
        if self.kind == "rod-axis":
            side = int(round(np.sqrt(n_bins)))
            # Fold to the upper hemisphere; equal-area bands in |z| times
            # azimuthal sectors.
            v = np.where(x[:, 2:3] < 0, -x, x)
            band = np.minimum((v[:, 2] * side).astype(int), side - 1)
            az = (np.arctan2(v[:, 1], v[:, 0]) % (2 * np.pi)) / (2 * np.pi)
            sector = np.minimum((az * side).astype(int), side - 1)
            return band * side + sector
        raise ValueError(f"no binning rule for {self.kind!r}")


def polarisation_axis_space() -> ReadingSpace:
    return ReadingSpace("polarisation-axis", "u1")


def rod_axis_space() -> ReadingSpace:
    return ReadingSpace("rod-axis", "su2")


def frame_torsor_space(reduced: str) -> ReadingSpace:
    if reduced not in ("u1r", "so3"):
        raise ValueError(f"torsor must be over a reduced group, got {reduced!r}")
    return ReadingSpace("frame-torsor", reduced)


def act(space: ReadingSpace, g, x):
    """Module-level action wrapper accepting GroupElement or raw payload."""
    payload = g.payload if isinstance(g, groups.GroupElement) else g
    return space.act(payload, x)


@dataclass(frozen=True)
class EncodingScheme:
    """Encoding/decoding rule over a reading space for one UEB index orbit.

    decode_fn maps a batch of readings to UEB indices; sample_fn draws
    uniform readings from E_i (region schemes) or X_i (perfect schemes).
    """

    label: str
    space: ReadingSpace
    subgroup: FiniteSubgroup
    indices: tuple[int, ...]
    kind: str                                   # "tight" | "perfect"
    decode_fn: Callable[[np.ndarray], np.ndarray]
    sample_fn: Callable[[int, Generator, int], np.ndarray]
    points: dict[int, np.ndarray] | None = None  # X_i for perfect schemes
    region_measure: float | None = None          # mu(E_i) for tight schemes
    coset_payloads: dict[int, object] | None = None  # c_i ambient payloads

    def to_json(self) -> dict:
        out = {
            "label": self.label,
            "kind": self.kind,
            "space": self.space.kind,
            "subgroup": self.subgroup.name,
            "indices": list(self.indices),
        }
        if self.points is not None:
            out["points"] = {str(i): np.asarray(p).tolist()
                             for i, p in self.points.items()}
        if self.region_measure is not None:
            out["region_measure"] = self.region_measure
        return out


def decode_batch(scheme: EncodingScheme, x: np.ndarray) -> np.ndarray:
    return scheme.decode_fn(np.asarray(x))


def decode(scheme: EncodingScheme, x) -> int:
    """Index of the decoding subset containing reading x."""
    batch = np.asarray(x)[None] if scheme.space.kind == "rod-axis" \
        or scheme.space.group == "so3" else np.asarray([x])
    return int(decode_batch(scheme, batch)[0])


def sample_encoding(scheme: EncodingScheme, i: int, stream: HaarStream,
                    n: int = 1) -> np.ndarray:
    """n uniform readings from E_i (or X_i)."""
    if i not in scheme.indices:
        raise ValueError(f"index {i} not in orbit {scheme.indices}")
    return scheme.sample_fn(i, stream.generator(), n)


# ---------------------------------------------------------------------------
# Matched schemes (torsor regions from a fundamental domain)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchedSchemeSpec:
    """Inputs of the matched-scheme construction: finite subgroup H of the
    reduced group acting on itself, the orbit's stabilizer L, coset
    representatives c_i, and the coset label of each H element.

    The fundamental domain is the Voronoi cell of the identity; the regions
    R_h are its right translates (the Voronoi cells of the elements), so
    membership tests reduce to nearest-element search.
    """

    subgroup: FiniteSubgroup
    indices: tuple[int, ...]
    stabilizer: tuple[int, ...]
    coset_reps: dict[int, int]
    labels: np.ndarray          # (|H|,) UEB index of each H element's coset

    def __post_init__(self):
        if len(self.stabilizer) * len(self.indices) != self.subgroup.order:
            raise ValueError("|L| * |I_k| != |H|")


def matched_scheme_spec(eq: EquivarianceData, orbit_base: int) -> MatchedSchemeSpec:
    """Build the matched-scheme data for the orbit containing orbit_base,
    over the subgroup of the equivariance data projected to the reduced
    group if necessary."""
    sub = eq.subgroup
    if sub.ambient == "u1":
        # Regions live in the reduced group; project the subgroup.
        reduced_angles = sorted(set(round(float(a) % np.pi, 12)
                                    for a in sub.payloads))
        sub = groups._build_subgroup(sub.name + "-reduced", "u1r", reduced_angles)
        eq_sub = _project_equivariance(eq, sub)
    else:
        eq_sub = eq
    orbit = eq_sub.orbit_of(orbit_base)
    base = min(orbit)
    stab = eq_sub.stabilizers[base]
    reps = {i: eq_sub.coset_reps[i] for i in orbit}
    labels = np.full(sub.order, -1, dtype=np.int64)
    for i in orbit:
        for l in stab:
            h = sub.mul(l, reps[i])
            if labels[h] != -1:
                raise ValueError("coset decomposition is not disjoint")
            labels[h] = i
    if np.any(labels < 0):
        raise ValueError("cosets do not cover the subgroup")
    return MatchedSchemeSpec(sub, tuple(orbit), tuple(stab), reps, labels)


def _project_equivariance(eq: EquivarianceData, reduced_sub: FiniteSubgroup
                          ) -> EquivarianceData:
    """Re-index an equivariance table over a physical circle subgroup onto
    its reduced projection (the index action factors through the kernel)."""
    n = eq.sigma.shape[0]
    order = reduced_sub.order
    sigma = np.empty((n, order), dtype=np.int64)
    alpha = np.empty((n, order), dtype=np.complex128)
    for h_old in range(eq.subgroup.order):
        angle = float(eq.subgroup.payloads[h_old]) % np.pi
        h_new = groups._match_index(reduced_sub.payloads, angle, "u1r")
        sigma[:, h_new] = eq.sigma[:, h_old]
        alpha[:, h_new] = eq.alpha[:, h_old]
    stabilizers = {}
    coset_reps: dict[int, int] = {}
    for orbit in eq.orbits:
        base = orbit[0]
        stabilizers[base] = tuple(
            int(h) for h in range(order) if sigma[base, h] == base)
        for i in orbit:
            coset_reps[i] = int(np.argmax(sigma[base] == i))
    return EquivarianceData(eq.basis, reduced_sub, eq.rep, sigma, alpha,
                            eq.orbits, stabilizers, coset_reps)


def _voronoi_decode(spec: MatchedSchemeSpec) -> Callable[[np.ndarray], np.ndarray]:
    sub = spec.subgroup
    labels = spec.labels

    def decode_fn(x: np.ndarray) -> np.ndarray:
        if sub.ambient in ("su2", "so3"):
            lifted = canonical_sign(np.asarray(x))
            idx, _ = groups.nearest_indices(lifted, sub, sign_insensitive=True)
        else:
            idx, _ = groups.nearest_indices(np.asarray(x) % np.pi, sub)
        return labels[idx]

    return decode_fn


def _torsor_space(spec: MatchedSchemeSpec) -> ReadingSpace:
    if spec.subgroup.ambient == "u1r":
        # The circle torsor coincides with the polarisation-axis space.
        return polarisation_axis_space()
    return frame_torsor_space("so3")


def tight_matched_scheme(spec: MatchedSchemeSpec, label: str = "tight-matched"
                         ) -> EncodingScheme:
    """Tight matched scheme: D_i = E_i = union of R_{l c_i} over l in L,
    each of measure 1/|I_k|."""
    space = _torsor_space(spec)
    decode_fn = _voronoi_decode(spec)

    def sample_fn(i: int, rng: Generator, n: int) -> np.ndarray:
        # Rejection sampling of the uniform measure conditioned on E_i.
        out = []
        got = 0
        while got < n:
            cand = space.sample(rng, max(4 * (n - got), 64))
            keep = cand[decode_fn(cand) == i]
            out.append(keep)
            got += len(keep)
        return np.concatenate(out)[:n]

    return EncodingScheme(label, space, spec.subgroup, spec.indices, "tight",
                          decode_fn, sample_fn,
                          region_measure=1.0 / len(spec.indices),
                          coset_payloads=_coset_payloads(spec))


def perfect_matched_scheme(spec: MatchedSchemeSpec,
                           label: str = "perfect-matched") -> EncodingScheme:
    """Perfect matched scheme: E_i is the finite set X_i = {l c_i}; decoding
    subsets are the same Voronoi regions as the tight scheme."""
    space = _torsor_space(spec)
    decode_fn = _voronoi_decode(spec)
    points: dict[int, np.ndarray] = {}
    for i in spec.indices:
        payloads = spec.subgroup.payloads[
            [spec.subgroup.mul(l, spec.coset_reps[i]) for l in spec.stabilizer]]
        if spec.subgroup.ambient in ("su2", "so3"):
            # Distinct SO(3) readings only: fold antipodal quaternion pairs.
            points[i] = np.unique(np.round(canonical_sign(payloads), 12), axis=0)
        else:
            # Distinct readings only (the circle torsor has period pi).
            points[i] = np.unique(np.round(payloads % np.pi, 12))

    def sample_fn(i: int, rng: Generator, n: int) -> np.ndarray:
        pts = points[i]
        return pts[rng.integers(0, len(pts), size=n)]

    return EncodingScheme(label, space, spec.subgroup, spec.indices, "perfect",
                          decode_fn, sample_fn, points=points,
                          coset_payloads=_coset_payloads(spec))


def _coset_payloads(spec: MatchedSchemeSpec) -> dict[int, object]:
    return {i: spec.subgroup.payloads[spec.coset_reps[i]]
            for i in spec.indices}


# ---------------------------------------------------------------------------
# Rod scheme
# ---------------------------------------------------------------------------

def rod_scheme(label: str = "rod") -> EncodingScheme:
    """Rod-orientation scheme: axes sorted by dominant |component|; the axis
    through the a-faces of the axis-aligned cube decodes to UEB index a."""
    space = rod_axis_space()

    def decode_fn(x: np.ndarray) -> np.ndarray:
        return np.argmax(np.abs(np.asarray(x)), axis=-1) + 1

    def sample_fn(i: int, rng: Generator, n: int) -> np.ndarray:
        out = []
        got = 0
        while got < n:
            cand = space.sample(rng, max(4 * (n - got), 64))
            keep = cand[decode_fn(cand) == i]
            out.append(keep)
            got += len(keep)
        return np.concatenate(out)[:n]

    sub = groups.binary_octahedral()
    return EncodingScheme(label, space, sub, (1, 2, 3), "tight",
                          decode_fn, sample_fn, region_measure=1.0 / 3.0)


# ---------------------------------------------------------------------------
# Compatibility
# ---------------------------------------------------------------------------

def compatibility_check(scheme: EncodingScheme, eq: EquivarianceData,
                        stream: HaarStream, samples_per_case: int = 1000
                        ) -> tuple[bool, dict]:
    """Sampled verification that decoding inverts the index action:
    decode(act(h, x)) = sigma(i, h^{-1}) for x drawn from E_i.

    Returns (ok, report); on failure the report carries a counterexample.
    """
    sub = eq.subgroup
    s = stream
    for h in range(sub.order):
        payload = sub.payloads[h]
        expected = {i: eq.sigma_inv(h, i) for i in scheme.indices}
        for i in scheme.indices:
            x = sample_encoding(scheme, i, s, samples_per_case)
            s = s.advance()
            got = decode_batch(scheme, scheme.space.act(payload, x))
            bad = got != expected[i]
            if np.any(bad):
                k = int(np.argmax(bad))
                return False, {
                    "h": h, "i": i, "x": np.asarray(x)[k].tolist(),
                    "expected": expected[i], "got": int(got[k]),
                }
    return True, {"cases": sub.order * len(scheme.indices),
                  "samples_per_case": samples_per_case}
