"""Derivative-free search for high-purity unitary error bases.

The conventional-scheme channel is a random unitary channel whose linear map
purity is (1/d^2) E |Tr(W+ W')|^2 over independent pairs from the unitary
ensemble.  For qubits the choice of UEB reduces to a handful of angle
parameters; a Nelder-Mead simplex (circle group) or a seeded random scan
(rotation group) over those parameters confirms that the Pauli basis is not
outperformed.

Conventions:
  - All optimizers MAXIMIZE their objective.
  - Objectives are deterministic given (parameters, seed); Monte Carlo
    objectives reuse one frozen sample set across evaluations (common random
    numbers) so the simplex sees a fixed landscape.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .groups import HaarStream, sample_su2, su2_matrix
from .qmat import ensemble_linear_purity

__all__ = [
    "SimplexState",
    "NelderMeadResult",
    "nelder_mead",
    "OptimizationRow",
    "OptimizationReport",
    "u1_conventional_purity",
    "su2_conventional_purity",
    "optimize_conventional_ueb",
]

# Standard Nelder-Mead coefficients: reflection, expansion, contraction,
# shrink.
_ALPHA, _GAMMA, _RHO, _SIGMA = 1.0, 2.0, 0.5, 0.5


@dataclass
class SimplexState:
    """Current simplex of a Nelder-Mead run.

    Vertices are parameter vectors (radians); values their objective values.
    The best value is non-decreasing across iterations.
    """

    vertices: np.ndarray        # (n + 1, n)
    values: np.ndarray          # (n + 1,)
    iterations: int = 0
    evaluations: int = 0

    def __post_init__(self):
        if self.vertices.shape[0] != self.vertices.shape[1] + 1:
            raise ValueError("simplex needs dimension + 1 vertices")

    @property
    def diameter(self) -> float:
        best = self.vertices[np.argmax(self.values)]
        return float(np.max(np.linalg.norm(self.vertices - best, axis=1)))

    @property
    def spread(self) -> float:
        return float(np.max(self.values) - np.min(self.values))

    def order(self) -> None:
        # Descending by value: index 0 is the best vertex (maximization).
        idx = np.argsort(-self.values, kind="stable")
        self.vertices = self.vertices[idx]
        self.values = self.values[idx]


@dataclass(frozen=True)
class NelderMeadResult:
    x: np.ndarray
    value: float
    trace: SimplexState
    capped: bool = False


def nelder_mead(objective: Callable[[np.ndarray], float],
                x0: Sequence[float],
                step: float = 0.25,
                max_iter: int = 10 ** 4,
                diameter_tol: float = 1e-6,
                spread_tol: float = 1e-10) -> NelderMeadResult:
    """Maximize `objective` from the initial point `x0`.

    Standard reflect/expand/contract/shrink moves with coefficients
    (1, 2, 0.5, 0.5).  Stops when the simplex diameter falls below
    `diameter_tol`, the value spread below `spread_tol`, or after `max_iter`
    iterations (the result is then flagged `capped`).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    n = x0.size
    vertices = np.tile(x0, (n + 1, 1))
    for k in range(n):
        vertices[k + 1, k] += step
    values = np.array([objective(v) for v in vertices])
    state = SimplexState(vertices, values, evaluations=n + 1)

    capped = True
    for _ in range(max_iter):
        state.order()
        if state.diameter < diameter_tol or state.spread < spread_tol:
            capped = False
            break
        state.iterations += 1
        centroid = state.vertices[:-1].mean(axis=0)
        worst = state.vertices[-1]
        f_best, f_second, f_worst = (state.values[0], state.values[-2],
                                     state.values[-1])

        reflected = centroid + _ALPHA * (centroid - worst)
        f_r = objective(reflected)
        state.evaluations += 1
        if f_second < f_r <= f_best:
            state.vertices[-1], state.values[-1] = reflected, f_r
            continue
        if f_r > f_best:
            expanded = centroid + _GAMMA * (reflected - centroid)
            f_e = objective(expanded)
            state.evaluations += 1
            if f_e > f_r:
                state.vertices[-1], state.values[-1] = expanded, f_e
            else:
                state.vertices[-1], state.values[-1] = reflected, f_r
            continue
        contracted = centroid + _RHO * (worst - centroid)
        f_c = objective(contracted)
        state.evaluations += 1
        if f_c > f_worst:
            state.vertices[-1], state.values[-1] = contracted, f_c
            continue
        # Shrink toward the best vertex.
        state.vertices[1:] = (state.vertices[0]
                              + _SIGMA * (state.vertices[1:]
                                          - state.vertices[0]))
        state.values[1:] = [objective(v) for v in state.vertices[1:]]
        state.evaluations += n

    state.order()
    return NelderMeadResult(state.vertices[0].copy(),
                            float(state.values[0]), state, capped)


# ---------------------------------------------------------------------------
# Circle-group conventional objective
# ---------------------------------------------------------------------------

def _unit_vector(psi: float, phi: float) -> np.ndarray:
    return np.array([np.sin(psi) * np.cos(phi),
                     np.sin(psi) * np.sin(phi),
                     np.cos(psi)])


def _bloch_rotation(axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """SU(2) lift exp(-i angle/2 axis.sigma) of the Bloch rotation, for a
    batch of angles."""
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    half = angles / 2.0
    w = np.cos(half)
    s = np.sin(half)
    q = np.stack([w, s * axis[0], s * axis[1], s * axis[2]], axis=-1)
    return su2_matrix(q)


def _pi_rotated(i: int, v: np.ndarray) -> np.ndarray:
    """Rotate v by pi about the x, y, or z axis (i = 1, 2, 3); i = 0 is the
    identity rotation."""
    if i == 0:
        return v
    e = np.eye(3)[i - 1]
    return 2.0 * np.dot(v, e) * e - v


def u1_conventional_purity(angles: Sequence[float],
                           grid: int = 32) -> float:
    """Linear map purity of the circle-group conventional channel for the UEB
    determined by unit vectors x(psi_x, phi_x), y(psi_y, phi_y).

    The phase-insensitive channel unitaries are W_i(t) = R_x(t) R_{X_i(y)}(-t)
    with t uniform on the circle, so the purity is the double average of
    (1/4) |Tr(W_i(t1)+ W_j(t2))|^2 over results and angles.  The integrand is
    a trigonometric polynomial of low degree in each angle, so a uniform grid
    evaluates the average exactly.
    """
    psi_x, psi_y, phi_x, phi_y = angles
    xhat = _unit_vector(psi_x, phi_x)
    yhat = _unit_vector(psi_y, phi_y)
    ts = np.arange(grid) * (2 * np.pi / grid)
    rx = _bloch_rotation(xhat, ts)                      # (grid, 2, 2)
    ws = np.stack([np.einsum("tab,tbc->tac", rx,
                             _bloch_rotation(_pi_rotated(i, yhat), -ts))
                   for i in range(4)])                   # (4, grid, 2, 2)
    traces = np.einsum("isab,jtab->isjt", ws.conj(), ws)
    return float(np.mean(np.abs(traces) ** 2) / 4.0)


# ---------------------------------------------------------------------------
# Rotation-group conventional objective
# ---------------------------------------------------------------------------

def su2_conventional_purity(angles: Sequence[float],
                            samples: int = 2 * 10 ** 5,
                            seed: int = 0) -> tuple[float, float]:
    """Linear map purity (with standard error) of the rotation-group
    conventional channel for the UEB {U-tilde X_i} with
    U-tilde = R_axis(psi, phi)(omega), angles = (psi, phi, omega).

    The ensemble members are A_i(Y) = X_i Y X_i U Y+ over Haar Y and uniform
    i; the purity is (1/4) E |Tr(A_i(Y1)+ A_j(Y2))|^2.  The Haar sample set is
    frozen by the seed so different parameter points see common random
    numbers.
    """
    psi, phi, omega = angles
    u = _bloch_rotation(_unit_vector(psi, phi), np.array([omega]))[0]
    rng = HaarStream("su2", seed).generator()
    ys = su2_matrix(sample_su2(rng, 2 * samples))
    idx = rng.integers(0, 4, size=2 * samples)
    paulis = np.stack([np.eye(2),
                       np.array([[0, 1], [1, 0]]),
                       np.array([[0, -1j], [1j, 0]]),
                       np.array([[1, 0], [0, -1]])]).astype(np.complex128)
    xs = paulis[idx]
    a = np.einsum("nab,nbc,ncd,de,nfe->naf",
                  xs, ys, xs, u, ys.conj())
    return ensemble_linear_purity(a[:samples], a[samples:])


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimizationRow:
    label: str
    params: tuple[float, ...]
    linear_purity: float
    stderr: float


@dataclass(frozen=True)
class OptimizationReport:
    group: str
    rows: tuple[OptimizationRow, ...]     # sorted by purity, descending
    baseline: OptimizationRow             # the Pauli point

    @property
    def best(self) -> OptimizationRow:
        return self.rows[0]

    def pauli_is_optimal(self, slack: float = 0.0, sigmas: float = 0.0
                         ) -> bool:
        """True if no row beats the Pauli baseline by more than `slack` plus
        `sigmas` combined standard errors."""
        b = self.baseline
        for row in self.rows:
            margin = slack + sigmas * np.hypot(row.stderr, b.stderr)
            if row.linear_purity > b.linear_purity + margin:
                return False
        return True

    def to_json(self) -> dict:
        return {
            "group": self.group,
            "baseline": vars(self.baseline) | {"params":
                                               list(self.baseline.params)},
            "rows": [vars(r) | {"params": list(r.params)}
                     for r in self.rows],
        }


_U1_BOX = np.array([np.pi, np.pi, 2 * np.pi, 2 * np.pi])


def optimize_conventional_ueb(group: str, samples: int = 2 * 10 ** 5,
                              seed: int = 0, restarts: int = 8,
                              scan: int = 100,
                              threads: int = 1) -> OptimizationReport:
    """Search the conventional-scheme UEB parameter space for linear map
    purity beating the Pauli basis.

    Circle group: Nelder-Mead over the four angles with `restarts` seeded
    random starts (exact grid objective, stderr 0).  Rotation group: evaluate
    `scan` seeded random angle triples plus the Pauli point, all sharing one
    frozen Haar sample set.
    """
    rng = np.random.default_rng(seed)
    if group in ("u1", "u1r"):
        baseline = OptimizationRow("pauli", (0.0, 0.0, 0.0, 0.0),
                                   u1_conventional_purity((0, 0, 0, 0)), 0.0)
        starts = [rng.random(4) * _U1_BOX for _ in range(restarts)]

        def run(k_x0):
            k, x0 = k_x0
            res = nelder_mead(u1_conventional_purity, x0)
            return OptimizationRow(f"restart-{k}", tuple(res.x),
                                   res.value, 0.0)

        rows = _map(run, list(enumerate(starts)), threads)
    elif group == "su2":
        baseline = OptimizationRow(
            "pauli", (0.0, 0.0, 0.0),
            *su2_conventional_purity((0, 0, 0), samples, seed))
        triples = rng.random((scan, 3)) * np.array([np.pi, 2 * np.pi,
                                                    2 * np.pi])

        def run(k_x):
            k, x = k_x
            return OptimizationRow(f"triple-{k}", tuple(x),
                                   *su2_conventional_purity(x, samples, seed))

        rows = _map(run, list(enumerate(triples)), threads)
    else:
        raise ValueError(f"unknown group {group!r}")

    rows = sorted(rows + [baseline],
                  key=lambda r: -r.linear_purity)
    return OptimizationReport(group, tuple(rows), baseline)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
