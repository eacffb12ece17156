"""Assembly of the effective teleportation channels (conventional, tight,
perfect) by quadrature or seeded Monte Carlo, plus an end-to-end single-shot
protocol simulator for cross-validation.

Frame conventions
-----------------
The misalignment g relates the two parties' frames: an operator with matrix M
in Bob's frame has matrix rho(g)+ M rho(g) in Alice's frame.  Input and
output states are both expressed in Alice's frame; the entangled resource is
shared in Alice's frame (for the SU(2) schemes it is the invariant singlet,
so the choice is immaterial up to phase).

With resource eta = (1/sqrt d) sum_k |k> X|k> and measurement basis
|phi_x> = (1/sqrt d) sum_i |i> (U_x X)^T |i>, result x leaves Bob's half in
M_x sigma M_x+ with the unitary M_x = X (U_x X)+, and every result is
equiprobable.  An aligned correction U_x then restores sigma exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numpy.random import Generator

from . import encoding as enc
from . import groups
from ._kernels import conj_superop_sums
from .groups import HaarStream, Representation, canonical_sign, quat_conj, \
    quat_mul
from .qmat import DensityMatrix, Superoperator, UnitaryMatrix, choi, \
    linear_map_purity, map_purity
from .ueb import EquivarianceData, UnitaryErrorBasis

__all__ = [
    "TeleportationSpec",
    "ChannelEstimate",
    "u1_teleportation_spec",
    "su2_teleportation_spec",
    "conventional_channel",
    "tight_channel",
    "tight_result_estimates",
    "mean_result_purity",
    "mix_estimates",
    "perfect_channel",
    "finite_group_check",
    "single_shot_simulate",
    "mc_engine",
]

_BATCH = 1 << 17
_N_BLOCKS = 64
_N_BOOT = 64


# ---------------------------------------------------------------------------
# Protocol specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TeleportationSpec:
    """UEB, frame representation, and entangled-resource choice."""

    basis: UnitaryErrorBasis
    rep: Representation
    resource: UnitaryMatrix          # the X of the resource (1 (x) X)|Phi+>
    invariant_resource: bool = False

    def __post_init__(self):
        basis = self.measurement_basis()
        dev = np.max(np.abs(basis.conj().T @ basis - np.eye(basis.shape[0])))
        if dev > 1e-12:
            raise ValueError(f"measurement basis not orthonormal ({dev:.3e})")

    @property
    def dim(self) -> int:
        return self.basis.dim

    def measurement_basis(self) -> np.ndarray:
        """Columns |phi_x> = (1/sqrt d) sum_i |i> (U_x X)^T |i>."""
        d = self.dim
        cols = [np.einsum("ik->ik", (self.basis.mats[x] @ self.resource.mat)
                          ).reshape(d * d) / np.sqrt(d)
                for x in range(self.basis.size)]
        return np.stack(cols, axis=1)

    def resource_state(self) -> np.ndarray:
        d = self.dim
        return (self.resource.mat.T).reshape(d * d) / np.sqrt(d)

    def premeasurement_unitary(self, x: int) -> np.ndarray:
        """The unitary M_x with Bob's conditional state M_x sigma M_x+."""
        u = self.basis.mats[x]
        xm = self.resource.mat
        return xm @ (u @ xm).conj().T

    def check_resource_invariance(self, stream: HaarStream, n: int = 32) -> float:
        """Max deviation of (g (x) g) eta from eta up to phase, over samples."""
        eta = self.resource_state()
        worst = 0.0
        for g in groups.haar_sample(stream, n):
            r = self.rep(g)
            vec = np.kron(r, r) @ eta
            overlap = np.vdot(eta, vec)
            worst = max(worst, float(np.linalg.norm(vec - overlap * eta)))
        return worst


def u1_teleportation_spec(basis: UnitaryErrorBasis) -> TeleportationSpec:
    return TeleportationSpec(basis, groups.u1_physical_rep(),
                             UnitaryMatrix(np.eye(2)), invariant_resource=False)


def su2_teleportation_spec(basis: UnitaryErrorBasis) -> TeleportationSpec:
    # The singlet resource: X = -iY is the unique choice invariant under
    # g (x) g up to phase.
    singlet_x = UnitaryMatrix(-1j * groups.PAULI_Y)
    return TeleportationSpec(basis, groups.su2_defining_rep(), singlet_x,
                             invariant_resource=True)


# ---------------------------------------------------------------------------
# Channel estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelEstimate:
    """A superoperator with provenance: method, sample count, per-entry
    standard errors, and bootstrap replicates for purity error bars."""

    superop: Superoperator
    method: str                       # "quadrature" | "monte-carlo"
    samples: int
    seed: int | None
    stderr: np.ndarray | None         # (d^2, d^2) per-entry standard error
    pre_norm_deviation: float = 0.0
    replicates: np.ndarray | None = None   # (B, d^2, d^2) bootstrap superops

    def map_purity_with_error(self) -> tuple[float, float]:
        return self._with_error(map_purity)

    def linear_purity_with_error(self) -> tuple[float, float]:
        return self._with_error(linear_map_purity)

    def _with_error(self, metric) -> tuple[float, float]:
        value = metric(self.superop)
        if self.replicates is None:
            return value, 0.0
        vals = [metric(Superoperator(m)) for m in self.replicates]
        return value, float(np.std(vals, ddof=1))

    def choi_spectrum(self) -> np.ndarray:
        return choi(self.superop).rho.eigenvalues()

    def transformed(self, conj_rep_mat: np.ndarray) -> "ChannelEstimate":
        """Pre/post-compose with conjugation by a unitary R:
        T -> [R] o T o [R+]."""
        k = np.kron(conj_rep_mat.conj(), conj_rep_mat)
        kinv = k.conj().T
        sup = Superoperator(k @ self.superop.mat @ kinv,
                            tp=self.superop.tp, cp=self.superop.cp)
        reps = None if self.replicates is None else \
            np.einsum("ab,nbc,cd->nad", k, self.replicates, kinv)
        stderr = None if reps is None else np.std(reps, axis=0, ddof=1)
        return replace(self, superop=sup, replicates=reps, stderr=stderr)


def _exact_estimate(mat: np.ndarray, method: str = "quadrature",
                    samples: int = 0, seed: int | None = None
                    ) -> ChannelEstimate:
    return ChannelEstimate(Superoperator(mat, tp=True, cp=True), method,
                           samples, seed, None)


def mix_estimates(parts: list[tuple[float, ChannelEstimate]]) -> ChannelEstimate:
    """Convex combination of channel estimates.

    Caution: replicates are combined index-aligned, which is the correct
    treatment when the parts derive from the same underlying sample stream
    (orbit-mates of one base channel) and conservative otherwise.
    """
    weights = [w for w, _ in parts]
    if abs(sum(weights) - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1")
    mat = sum(w * e.superop.mat for w, e in parts)
    sup = Superoperator(mat, tp=all(e.superop.tp for _, e in parts),
                        cp=all(e.superop.cp for _, e in parts))
    have_reps = [(w, e) for w, e in parts if e.replicates is not None]
    reps = None
    if have_reps:
        n_rep = have_reps[0][1].replicates.shape[0]
        reps = np.zeros((n_rep,) + mat.shape, dtype=np.complex128)
        for w, e in parts:
            reps += w * (e.replicates if e.replicates is not None
                         else e.superop.mat[None])
    stderr = None
    if reps is not None:
        stderr = np.std(reps, axis=0, ddof=1)
    method = "quadrature" if all(e.method == "quadrature" for _, e in parts) \
        else "monte-carlo"
    return ChannelEstimate(sup, method, max(e.samples for _, e in parts),
                           next((e.seed for _, e in parts if e.seed is not None),
                                None),
                           stderr,
                           max(e.pre_norm_deviation for _, e in parts), reps)


def _finish_mc(block_sums: np.ndarray, block_norms: np.ndarray, samples: int,
               seed: int, pre_norm_deviation: float) -> ChannelEstimate:
    """Turn per-block accumulator sums into a TP-normalized estimate with
    block-bootstrap replicates."""
    total = block_sums.sum(axis=0)
    norm = float(block_norms.sum())
    if norm <= 0:
        raise RuntimeError("no accepted Monte Carlo samples")
    mat = total / norm
    # Exact TP normalization: a mean of conjugation superoperators has Choi
    # trace equal to its weight, so scaling restores trace preservation.
    sup = Superoperator(mat)
    tr = np.trace(sup._choi_mat()).real
    mat = mat / tr
    rng = Generator(np.random.Philox(key=seed ^ 0x5EED_B007))
    n_blocks = block_sums.shape[0]
    picks = rng.integers(0, n_blocks, size=(_N_BOOT, n_blocks))
    reps = np.empty((_N_BOOT,) + mat.shape, dtype=np.complex128)
    for r in range(_N_BOOT):
        bs = block_sums[picks[r]].sum(axis=0)
        bn = float(block_norms[picks[r]].sum())
        m = bs / max(bn, 1.0)
        m = m / np.trace(Superoperator(m)._choi_mat()).real
        reps[r] = m
    stderr = np.std(reps, axis=0, ddof=1)
    return ChannelEstimate(Superoperator(mat, tp=True), "monte-carlo", samples,
                           seed, stderr, pre_norm_deviation, reps)


def _mc_accumulate(sample_fn: Callable[[Generator, int], tuple[np.ndarray, np.ndarray | None]],
                   samples: int, stream: HaarStream) -> tuple[np.ndarray, np.ndarray, int]:
    """Accumulate conjugation superoperators of batch-sampled unitaries into
    _N_BLOCKS block sums.  sample_fn returns (unitaries (m,2,2), accept mask
    or None)."""
    block_sums = np.zeros((_N_BLOCKS, 4, 4), dtype=np.complex128)
    block_norms = np.zeros(_N_BLOCKS, dtype=np.float64)
    accepted = 0
    done = 0
    s = stream
    while done < samples:
        m = min(_BATCH, samples - done)
        rng = s.generator()
        s = s.advance()
        mats, accept = sample_fn(rng, m)
        idx = np.arange(done, done + m)
        if accept is not None:
            mats = mats[accept]
            idx = idx[accept]
        buckets = idx * _N_BLOCKS // samples
        sums, counts = conj_superop_sums(mats, buckets, _N_BLOCKS)
        block_sums += sums
        block_norms += counts
        accepted += len(mats)
        done += m
    return block_sums, block_norms, accepted


def _conj_superop_average(mats: np.ndarray,
                          weights: np.ndarray | None = None) -> np.ndarray:
    """(Weighted) mean of kron(conj(W), W) over a batch of 2x2 unitaries."""
    if weights is None:
        k = np.einsum("nab,ncd->acbd", mats.conj(), mats)
        return k.reshape(4, 4) / len(mats)
    k = np.einsum("n,nab,ncd->acbd", weights, mats.conj(), mats)
    return k.reshape(4, 4) / weights.sum()


def _channel_unitaries(spec: TeleportationSpec, payloads, result: int
                       ) -> np.ndarray:
    """W(g) = rho(g)+ U_i rho(g) U_i+ for a batch of group payloads."""
    r = spec.rep(payloads)
    u = spec.basis.mats[result]
    return np.einsum("...ba,bc,...cd,ed->...ae", r.conj(), u, r, u.conj())


# ---------------------------------------------------------------------------
# Conventional channel
# ---------------------------------------------------------------------------

def conventional_channel(spec: TeleportationSpec, group: str,
                         result: int | str = "averaged",
                         method: str = "quadrature",
                         samples: int = 10 ** 6,
                         seed: int = 0) -> ChannelEstimate:
    """Misalignment-averaged channel of the conventional scheme:
    integral over g of [rho(g)+ U_i rho(g) U_i+], or the equal mix over i."""
    if result == "averaged":
        n = spec.basis.size
        parts = [(1.0 / n, conventional_channel(spec, group, i, method,
                                                samples, seed + i))
                 for i in range(n)]
        return mix_estimates(parts)
    i = int(result)
    if method == "quadrature":
        if group not in ("u1", "u1r"):
            raise ValueError("quadrature path requires the circle group")

        def integrand(theta):
            w = _channel_unitaries(spec, theta, i)
            return np.einsum("nab,ncd->nacbd", w.conj(), w).reshape(-1, 4, 4)

        mat = groups.quadrature_average(integrand, group)
        return _exact_estimate(mat)
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    stream = HaarStream(group, seed)

    def sample_fn(rng, m):
        payloads = _group_batch(group, rng, m)
        return _channel_unitaries(spec, payloads, i), None

    sums, norms, _ = _mc_accumulate(sample_fn, samples, stream)
    return _finish_mc(sums, norms, samples, seed, 0.0)


def _group_batch(group: str, rng: Generator, m: int) -> np.ndarray:
    if group == "u1":
        return rng.random(m) * 2 * np.pi
    if group == "u1r":
        return rng.random(m) * np.pi
    if group == "su2":
        return groups.sample_su2(rng, m)
    raise ValueError(f"no sampler for group {group!r}")


# ---------------------------------------------------------------------------
# Tight channel
# ---------------------------------------------------------------------------

def tight_channel(spec: TeleportationSpec, eq: EquivarianceData,
                  scheme: enc.EncodingScheme, group: str,
                  result: int | str = "averaged",
                  method: str = "mc", samples: int = 10 ** 6,
                  seed: int = 0,
                  g_transform: Callable | None = None) -> ChannelEstimate:
    """Channel of the tight scheme.

    For a result in the scheme's orbit this is
    (|I_k| / mu(E_b)) [rho(c_i)] o integral of p(g) [rho(g)+ U_b rho(g) U_b+]
    o [rho(c_i)+], with the overlap weight p(g) realized by joint rejection
    sampling of (g, x in E_b) (MC) or by the exact arc-overlap function
    (circle-group quadrature).  Results outside the scheme's orbit sit in
    singleton orbits whose label is transmitted speakably, so they receive
    the plain conventional integral.  "averaged" mixes all d^2 results
    equally.

    g_transform optionally pre-composes each sampled misalignment with a
    fixed group element (used to test invariance under g -> h g).
    """
    if result == "averaged":
        per_result = tight_result_estimates(spec, eq, scheme, group, method,
                                            samples, seed, g_transform)
        n = spec.basis.size
        return mix_estimates([(1.0 / n, per_result[i]) for i in range(n)])
    i = int(result)
    if i not in scheme.indices:
        return conventional_channel(spec, group, i,
                                    method if group in ("u1", "u1r") else "mc",
                                    samples, seed)
    base = _tight_base_channel(spec, eq, scheme, group, method, samples, seed,
                               g_transform)
    return _conjugated_orbit_channel(spec, scheme, eq, base, i)


def tight_result_estimates(spec: TeleportationSpec, eq: EquivarianceData,
                           scheme: enc.EncodingScheme, group: str,
                           method: str = "mc", samples: int = 10 ** 6,
                           seed: int = 0,
                           g_transform: Callable | None = None
                           ) -> dict[int, ChannelEstimate]:
    """Per-result tight-scheme channels, computing the shared base integral
    only once.  Orbit results are unitary conjugates of the base channel and
    therefore share its spectrum; singleton-orbit results get the plain
    conventional integral (identity for a commuting basis element)."""
    base = _tight_base_channel(spec, eq, scheme, group, method, samples,
                               seed, g_transform)
    out: dict[int, ChannelEstimate] = {}
    for i in range(spec.basis.size):
        if i in scheme.indices:
            out[i] = _conjugated_orbit_channel(spec, scheme, eq, base, i)
        else:
            out[i] = conventional_channel(
                spec, group, i, method if group in ("u1", "u1r") else "mc",
                samples, seed + 1000 + i)
    return out


def mean_result_purity(estimates: dict[int, ChannelEstimate]
                       ) -> tuple[float, float]:
    """Arithmetic mean of the per-result map purities with its standard
    error.  Orbit channels are conjugates sharing one sample set, so their
    purity errors add coherently."""
    n = len(estimates)
    purities, errors = zip(*(estimates[i].map_purity_with_error()
                             for i in range(n)))
    return float(np.mean(purities)), float(np.sum(errors) / n)


def _conjugated_orbit_channel(spec: TeleportationSpec,
                              scheme: enc.EncodingScheme,
                              eq: EquivarianceData,
                              base: ChannelEstimate, i: int) -> ChannelEstimate:
    b = min(scheme.indices)
    if i == b:
        return base
    if scheme.coset_payloads is not None:
        c_payload = scheme.coset_payloads[i]
    else:
        c_payload = eq.subgroup.payloads[eq.coset_reps[i]]
    return base.transformed(spec.rep(c_payload))


def _tight_base_channel(spec: TeleportationSpec, eq: EquivarianceData,
                        scheme: enc.EncodingScheme, group: str, method: str,
                        samples: int, seed: int,
                        g_transform: Callable | None) -> ChannelEstimate:
    b = min(scheme.indices)
    if method == "quadrature":
        if group not in ("u1", "u1r"):
            raise ValueError("quadrature path requires the circle group")
        weight_fn = _circle_overlap_weight(scheme)

        def integrand(theta):
            w = _channel_unitaries(spec, theta, b)
            p = weight_fn(theta)
            k = np.einsum("n,nab,ncd->nacbd", p, w.conj(), w)
            return k.reshape(-1, 4, 4)

        mat = groups.quadrature_average(integrand, "u1")
        scale = len(scheme.indices) / scheme.region_measure
        mat = mat * scale
        tr = np.trace(Superoperator(mat)._choi_mat()).real
        dev = abs(tr - 1.0)
        return replace(_exact_estimate(mat / tr), pre_norm_deviation=dev)
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    stream = HaarStream(group, seed)

    def sample_fn(rng, m):
        payloads = _group_batch(group, rng, m)
        if g_transform is not None:
            payloads = g_transform(payloads)
        x = scheme.sample_fn(b, rng, m)
        y = scheme.space.act(payloads, x)
        accept = enc.decode_batch(scheme, y) == b
        return _channel_unitaries(spec, payloads, b), accept

    sums, norms, accepted = _mc_accumulate(sample_fn, samples, stream)
    # The un-normalized theorem estimator has Choi trace |I_k| N_acc / N,
    # which should be 1; report its deviation before exact TP rescaling.
    dev = abs(len(scheme.indices) * accepted / samples - 1.0)
    return _finish_mc(sums, norms, samples, seed, dev)


def _circle_overlap_weight(scheme: enc.EncodingScheme) -> Callable:
    """Exact normalized overlap measure s -> mu(E_b intersect (E_b + s)) for
    a circle-torsor region scheme (a union of equal arcs)."""
    spec_sub = scheme.subgroup
    if spec_sub.ambient != "u1r":
        raise ValueError("arc-overlap weight needs a circle-torsor scheme")
    b = min(scheme.indices)
    order = spec_sub.order
    half_width = np.pi / (2 * order)
    # Arc centers of E_b: the subgroup elements whose Voronoi cells carry
    # label b.
    labels = enc.decode_batch(scheme, spec_sub.payloads)
    centers = spec_sub.payloads[labels == b]

    def weight(theta):
        s = np.asarray(theta)[..., None, None]
        diff = centers[None, :, None] + s - centers[None, None, :]
        dist = np.abs((diff + np.pi / 2) % np.pi - np.pi / 2)
        overlap = np.maximum(2 * half_width - dist, 0.0)
        return overlap.sum(axis=(-2, -1)) / np.pi

    return weight


# ---------------------------------------------------------------------------
# Perfect channel
# ---------------------------------------------------------------------------

def perfect_channel(spec: TeleportationSpec, eq: EquivarianceData,
                    scheme: enc.EncodingScheme, group: str,
                    result: int = 0, method: str = "quadrature",
                    samples: int = 10 ** 6, seed: int = 0) -> ChannelEstimate:
    """Channel of the perfect scheme: the integral over the stabilizer of the
    encoded reading of [rho(s)+ U_i rho(s) U_i+].

    On a matched (free) space the stabilizer is trivial and the channel is
    the identity; the quadrature path returns it exactly, while the MC path
    simulates the reconstruction honestly (sample g and x, decode, realign,
    accumulate the net conjugation).  On the rod space with point encoding
    the stabilizer is the axial rotation circle, integrated by quadrature.
    """
    if scheme.kind != "perfect":
        raise ValueError("perfect_channel requires a perfect scheme")
    if scheme.space.kind == "rod-axis":
        return _rod_point_stabilizer_channel(spec, scheme, result)
    if method == "quadrature":
        # Free action: trivial stabilizer, identity channel.
        return _exact_estimate(np.eye(4, dtype=np.complex128))
    stream = HaarStream(group, seed)

    def sample_fn(rng, m):
        payloads = _group_batch(group, rng, m)
        x = scheme.sample_fn(result, rng, m)
        w = _perfect_net_unitaries(spec, scheme, payloads, x, result)
        return w, None

    sums, norms, _ = _mc_accumulate(sample_fn, samples, stream)
    return _finish_mc(sums, norms, samples, seed, 0.0)


def _perfect_net_unitaries(spec: TeleportationSpec, scheme: enc.EncodingScheme,
                           payloads: np.ndarray, x: np.ndarray,
                           result: int) -> np.ndarray:
    """Net protocol unitaries rho(g)+ C_B rho(g) U_i+ where Bob reconstructs
    the alignment from the received reading and corrects accordingly."""
    y = scheme.space.act(payloads, x)
    decoded = enc.decode_batch(scheme, y)
    ghat = _reconstruct_alignment(scheme, y, decoded)
    rg = spec.rep(payloads)
    rhat = spec.rep(ghat)
    corr = np.empty_like(rg)
    for j in scheme.indices:
        mask = decoded == j
        if not np.any(mask):
            continue
        u = spec.basis.mats[j]
        corr[mask] = np.einsum("nab,bc,ndc->nad", rhat[mask], u,
                               rhat[mask].conj())
    u_i = spec.basis.mats[result]
    return np.einsum("nba,nbc,ncd,ed->nae", rg.conj(), corr, rg, u_i.conj())


def _reconstruct_alignment(scheme: enc.EncodingScheme, y: np.ndarray,
                           decoded: np.ndarray) -> np.ndarray:
    """Bob's alignment estimate: the group element carrying the canonical
    point of the decoded set onto the received reading."""
    if scheme.space.group == "u1r" or scheme.space.kind == "polarisation-axis":
        xhat = np.empty_like(np.asarray(y, dtype=np.float64))
        for j in scheme.indices:
            mask = decoded == j
            xhat[mask] = scheme.points[j][0]
        # y = xhat + ghat mod pi
        return (np.asarray(y) - xhat) % np.pi
    xhat = np.empty(np.asarray(y).shape, dtype=np.float64)
    for j in scheme.indices:
        mask = decoded == j
        xhat[mask] = scheme.points[j][0]
    # y = xhat ghat^{-1}  =>  ghat = y^{-1} xhat
    return quat_mul(quat_conj(y), xhat)


def _rod_point_stabilizer_channel(spec: TeleportationSpec,
                                  scheme: enc.EncodingScheme,
                                  result: int) -> ChannelEstimate:
    axis = np.asarray(scheme.points[result][0], dtype=np.float64)

    def integrand(theta):
        quats = np.stack([np.cos(theta / 2),
                          np.sin(theta / 2) * axis[0],
                          np.sin(theta / 2) * axis[1],
                          np.sin(theta / 2) * axis[2]], axis=-1)
        w = _channel_unitaries(spec, quats, result)
        return np.einsum("nab,ncd->nacbd", w.conj(), w).reshape(-1, 4, 4)

    mat = groups.quadrature_average(integrand, "u1")
    return _exact_estimate(mat)


# ---------------------------------------------------------------------------
# Finite-subgroup perfect teleportation check
# ---------------------------------------------------------------------------

def finite_group_check(spec: TeleportationSpec, eq: EquivarianceData,
                       scheme: enc.EncodingScheme,
                       stream: HaarStream | None = None,
                       points_per_case: int = 4) -> tuple[bool, dict]:
    """Exhaustive table check that the protocol is exact whenever the
    misalignment lies in H: for every h and result i, the composite
    correction rho(h)+ U_j rho(h) with j decoded from a transported E_i
    reading is proportional to U_i."""
    sub = eq.subgroup
    d = spec.dim
    stream = stream or HaarStream(scheme.space.group, 0)
    s = stream
    for h in range(sub.order):
        r = spec.rep(sub.payloads[h])
        for i in scheme.indices:
            x = enc.sample_encoding(scheme, i, s, points_per_case)
            s = s.advance()
            decoded = np.unique(enc.decode_batch(
                scheme, scheme.space.act(sub.payloads[h], x)))
            if len(decoded) != 1:
                return False, {"h": h, "i": i, "reason": "ambiguous decode"}
            j = int(decoded[0])
            composite = r.conj().T @ spec.basis.mats[j] @ r
            overlap = abs(np.trace(spec.basis.mats[i].conj().T @ composite)) / d
            if abs(overlap - 1.0) > 1e-9:
                return False, {"h": h, "i": i, "j": j, "overlap": overlap}
    return True, {"cases": sub.order * len(scheme.indices)}


# ---------------------------------------------------------------------------
# Single-shot simulator
# ---------------------------------------------------------------------------

def single_shot_simulate(spec: TeleportationSpec,
                         scheme: enc.EncodingScheme | None,
                         group: str, sigma: DensityMatrix,
                         stream: HaarStream, shots: int = 1,
                         restrict: groups.FiniteSubgroup | None = None
                         ) -> tuple[DensityMatrix, dict]:
    """End-to-end protocol simulation.

    Each shot samples a misalignment (Haar on the group, or uniform on
    `restrict`), Alice's measurement result by Born probabilities, the
    transmitted reading, Bob's decode and correction, and returns the
    ensemble-mean output in Alice's frame together with a transcript.
    """
    d = spec.dim
    n_res = spec.basis.size
    # Born probabilities of the measurement results.
    eta = spec.resource_state()
    joint = np.kron(sigma.mat, np.outer(eta, eta.conj()))
    meas = spec.measurement_basis()
    probs = np.array([
        np.trace(_project_first(joint, meas[:, x], d)).real
        for x in range(n_res)])
    probs = probs / probs.sum()

    rng_results = stream.generator()
    results = rng_results.choice(n_res, size=shots, p=probs)
    if restrict is not None:
        g_payloads = restrict.payloads[
            rng_results.integers(0, restrict.order, size=shots)]
    else:
        g_payloads = _group_batch(group, rng_results, shots)

    pre = np.stack([spec.premeasurement_unitary(x) for x in range(n_res)])
    rg = spec.rep(g_payloads)

    readings = None
    decoded = np.copy(results)
    if scheme is None:
        corr_index = results
        corr = _misaligned_corrections(spec, rg, corr_index)
    else:
        readings = np.empty((shots,) + _reading_shape(scheme), dtype=np.float64)
        rng_read = stream.advance(1 << 40).generator()
        in_orbit = np.isin(results, scheme.indices)
        for i in scheme.indices:
            mask = results == i
            if np.any(mask):
                readings[mask] = scheme.sample_fn(i, rng_read, int(mask.sum()))
        # Singleton-orbit results carry a speakable label; fill a dummy
        # reading for the transcript.
        if np.any(~in_orbit):
            readings[~in_orbit] = scheme.space.sample(rng_read,
                                                      int((~in_orbit).sum()))
        received = scheme.space.act(g_payloads, readings)
        dec = enc.decode_batch(scheme, received)
        decoded = np.where(in_orbit, dec, results)
        if scheme.kind == "perfect":
            corr = np.empty((shots, d, d), dtype=np.complex128)
            if np.any(in_orbit):
                ghat = _reconstruct_alignment(scheme, received[in_orbit],
                                              decoded[in_orbit])
                rhat = spec.rep(ghat)
                sub = decoded[in_orbit]
                c = np.empty((int(in_orbit.sum()), d, d), dtype=np.complex128)
                for j in scheme.indices:
                    m = sub == j
                    if np.any(m):
                        c[m] = np.einsum("nab,bc,ndc->nad", rhat[m],
                                         spec.basis.mats[j], rhat[m].conj())
                bob_corr = c
                corr[in_orbit] = np.einsum("nba,nbc,ncd->nad",
                                           rg[in_orbit].conj(), bob_corr,
                                           rg[in_orbit])
            if np.any(~in_orbit):
                corr[~in_orbit] = _misaligned_corrections(
                    spec, rg[~in_orbit], results[~in_orbit])
        else:
            corr = _misaligned_corrections(spec, rg, decoded)

    # Net shot unitaries V = C_A M_x; ensemble mean via the superop kernel.
    net = np.einsum("nab,nbc->nac", corr, pre[results])
    buckets = np.zeros(shots, dtype=np.int64)
    sums, counts = conj_superop_sums(net, buckets, 1)
    mean_superop = Superoperator(sums[0] / counts[0])
    out = mean_superop.apply(sigma.mat)
    out = 0.5 * (out + out.conj().T)
    out = out / np.trace(out).real
    transcript = {
        "seed": stream.seed,
        "g": g_payloads,
        "result": results,
        "decoded": decoded,
        "readings": readings,
        "probs": probs,
        "mean_superop": mean_superop,
    }
    return DensityMatrix(out), transcript


def _project_first(joint: np.ndarray, phi: np.ndarray, d: int) -> np.ndarray:
    """<phi| acting on the first two tensor factors of a (d^2 * d) system."""
    j = joint.reshape(d * d, d, d * d, d)
    return np.einsum("a,abcd,c->bd", phi.conj(), j, phi)


def _misaligned_corrections(spec: TeleportationSpec, rg: np.ndarray,
                            indices: np.ndarray) -> np.ndarray:
    """rho(g)+ U_j rho(g) batch for per-shot correction indices j."""
    u = spec.basis.mats[indices]
    return np.einsum("nba,nbc,ncd->nad", rg.conj(), u, rg)


def _reading_shape(scheme: enc.EncodingScheme) -> tuple:
    if scheme.space.kind == "rod-axis":
        return (3,)
    if scheme.space.group == "so3":
        return (4,)
    return ()


# ---------------------------------------------------------------------------
# Generic MC engine
# ---------------------------------------------------------------------------

def mc_engine(samples: int, stream: HaarStream,
              integrand: Callable[[Generator, int], np.ndarray]
              ) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error of a vectorized integrand over the stream's
    Haar measure.  integrand(rng, m) returns m sample values (any trailing
    shape); the reduction is an associative sum over counter-partitioned
    batches, so parallel workers produce identical results."""
    if samples < 1000:
        raise ValueError("samples must be at least 1e3")
    total = None
    total_sq = None
    done = 0
    s = stream
    while done < samples:
        m = min(_BATCH, samples - done)
        rng = s.generator()
        s = s.advance()
        vals = np.asarray(integrand(rng, m))
        batch_sum = vals.sum(axis=0)
        batch_sq = (np.abs(vals) ** 2).sum(axis=0)
        total = batch_sum if total is None else total + batch_sum
        total_sq = batch_sq if total_sq is None else total_sq + batch_sq
        done += m
    mean = total / samples
    var = (total_sq / samples - np.abs(mean) ** 2) * samples / (samples - 1)
    stderr = np.sqrt(np.maximum(var, 0.0) / samples)
    return mean, stderr
