"""Radiosity bases, second-moment matrices and effective generator matrices.

Fields are represented in the area-weighted indicator basis
``phi_i = e_i / sqrt(A_i)``, so a radiosity ``B`` has coefficients
``sqrt(A) * B`` and Euclidean inner products equal area-weighted L2 ones.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from radcone.errors import EigengapError
from radcone.geometry import Scene
from radcone.radiosity import solve_direct

EIGENGAP_TOL = 1e-10
LP_MAX_DIM = 12


@dataclass(frozen=True, eq=False)
class RadiosityBasis:
    matrix_b: np.ndarray  # (N_o, N_e)

    @property
    def n_o(self) -> int:
        return self.matrix_b.shape[0]

    @property
    def n_e(self) -> int:
        return self.matrix_b.shape[1]

    def coefficients(self, theta) -> np.ndarray:
        return self.matrix_b @ np.asarray(theta, dtype=float)


def to_coefficients(field, areas) -> np.ndarray:
    return np.sqrt(np.asarray(areas, dtype=float)) * np.asarray(field, dtype=float)


def radiosity_basis(scene: Scene) -> RadiosityBasis:
    """One direct solve per basis luminaire, stacked as coefficient columns."""
    emit = scene.luminaires.emittance_basis.T  # (N_p, N_e)
    b = solve_direct(scene, np.ascontiguousarray(emit))
    return RadiosityBasis(np.sqrt(scene.areas)[:, None] * b)


def dirichlet_second_moment(n_e: int, alpha: float) -> np.ndarray:
    """``E[theta theta^T]`` for a symmetric Dirichlet(alpha) on ``n_e`` components."""
    if n_e < 1:
        raise ValueError("n_e must be >= 1")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    a0 = n_e * alpha
    denom = a0 * (a0 + 1.0)
    m = np.full((n_e, n_e), alpha * alpha / denom)
    np.fill_diagonal(m, alpha * (alpha + 1.0) / denom)
    return m


@dataclass(frozen=True, eq=False)
class SecondMoment:
    matrix_c: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray

    @classmethod
    def from_matrix(cls, c, sym_tol: float = 1e-12) -> "SecondMoment":
        c = np.array(c, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"second moment must be square, got shape {c.shape}")
        scale = max(1.0, float(np.abs(c).max(initial=0.0)))
        if np.abs(c - c.T).max(initial=0.0) > sym_tol * scale:
            raise ValueError("second moment matrix is not symmetric")
        c = 0.5 * (c + c.T)
        w, v = np.linalg.eigh(c)
        order = np.argsort(w)[::-1]
        return cls(c, w[order], v[:, order])

    @property
    def n_o(self) -> int:
        return self.matrix_c.shape[0]

    def reconstruction_error(self) -> float:
        recon = (self.eigvecs * self.eigvals) @ self.eigvecs.T
        return float(np.linalg.norm(recon - self.matrix_c))


def second_moment(basis: RadiosityBasis, theta_moment) -> SecondMoment:
    """``C = B E[theta theta^T] B^T``."""
    m = np.asarray(theta_moment, dtype=float)
    if m.shape != (basis.n_e, basis.n_e):
        raise ValueError(f"theta moment must be {basis.n_e}x{basis.n_e}, got {m.shape}")
    if np.abs(m - m.T).max() > 1e-12 * max(1.0, np.abs(m).max()):
        raise ValueError("theta moment is not symmetric")
    b = basis.matrix_b
    return SecondMoment.from_matrix(b @ (0.5 * (m + m.T)) @ b.T)


def empirical_second_moment(samples) -> SecondMoment:
    """``(1/N_s) sum_i b_i b_i^T``."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    if x.shape[0] < 1:
        raise ValueError("need at least one sample")
    return SecondMoment.from_matrix(x.T @ x / x.shape[0])


@dataclass(frozen=True, eq=False)
class Egm:
    matrix_g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.matrix_g, dtype=float)
        if g.ndim == 1:
            g = g[:, None]
        r = g.shape[1]
        if r < 1 or r > g.shape[0]:
            raise ValueError(f"rank {r} outside [1, {g.shape[0]}]")
        if np.abs(g.T @ g - np.eye(r)).max() > 1e-10:
            raise ValueError("generator matrix columns are not orthonormal")
        object.__setattr__(self, "matrix_g", g)

    @property
    def rank(self) -> int:
        return self.matrix_g.shape[1]


def egm_loss(g: Egm, c: SecondMoment) -> float:
    """Expected squared projection error ``Tr C - Tr G^T C G``."""
    if not isinstance(g, Egm):
        g = Egm(g)
    if g.matrix_g.shape[0] != c.n_o:
        raise ValueError(f"generator has {g.matrix_g.shape[0]} rows, moment is {c.n_o}x{c.n_o}")
    gm = g.matrix_g
    return float(np.trace(c.matrix_c) - np.trace(gm.T @ c.matrix_c @ gm))


def egm_fit(c: SecondMoment, r: int) -> Egm:
    """Top-``r`` eigenvectors; raises :class:`EigengapError` on a tie at ``r``."""
    if not 1 <= r <= c.n_o:
        raise ValueError(f"rank must lie in [1, {c.n_o}], got {r}")
    if r < c.n_o and c.eigvals[r - 1] - c.eigvals[r] <= EIGENGAP_TOL:
        raise EigengapError(
            f"eigenvalues {r} and {r + 1} are tied ({c.eigvals[r - 1]:.6g} vs {c.eigvals[r]:.6g}); "
            "perturb the moment matrix or choose a smaller rank"
        )
    return Egm(c.eigvecs[:, :r].copy())


def tail_sum(c: SecondMoment, r: int) -> float:
    return math.fsum(c.eigvals[r:])


def theorem2_regret(c_true: SecondMoment, c_est: SecondMoment, r: int) -> float:
    """Extra loss on ``c_true`` from fitting the generator on ``c_est``."""
    g_hat = egm_fit(c_est, r)
    g = egm_fit(c_true, r)
    return egm_loss(g_hat, c_true) - egm_loss(g, c_true)


def loose_bound(c: SecondMoment, r: int) -> float:
    lam = c.eigvals
    return math.fsum(lam) - math.fsum(lam[lam.shape[0] - r:])


# --- permutation / isotonic bound ---------------------------------------------


def isotonic_nonincreasing(y) -> np.ndarray:
    """Least-squares projection onto nonincreasing sequences (pool adjacent violators)."""
    y = np.asarray(y, dtype=float)
    means: list[float] = []
    counts: list[int] = []
    for v in y:
        means.append(float(v))
        counts.append(1)
        while len(means) > 1 and means[-2] < means[-1]:
            n = counts[-2] + counts[-1]
            m = (means[-2] * counts[-2] + means[-1] * counts[-1]) / n
            means[-2:] = [m]
            counts[-2:] = [n]
    return np.repeat(means, counts)


def isotonic_distance_sq(y) -> float:
    y = np.asarray(y, dtype=float)
    return math.fsum((y - isotonic_nonincreasing(y)) ** 2)


def _check_lp_args(eigvals, r, budget_d):
    lam = np.asarray(eigvals, dtype=float)
    if lam.ndim != 1:
        raise ValueError("eigvals must be a vector")
    if np.any(np.diff(lam) > 0):
        raise ValueError("eigvals must be sorted nonincreasing")
    if not 1 <= r < lam.shape[0]:
        raise ValueError(f"rank must lie in [1, {lam.shape[0] - 1}], got {r}")
    if budget_d < 0:
        raise ValueError("budget must be non-negative")
    return lam


def _lp_min_topr(lam, r, budget_d) -> float:
    n = lam.shape[0]
    best = math.fsum(lam[:r])  # identity is always feasible
    for top in itertools.combinations(range(n), r):
        chosen = set(top)
        head = lam[list(top)]
        total = math.fsum(sorted(head))
        if total >= best:
            continue
        rest = [lam[i] for i in range(n) if i not in chosen]
        arrangement = np.concatenate([np.sort(head)[::-1], np.sort(rest)[::-1]])
        if isotonic_distance_sq(arrangement) <= budget_d:
            best = total
    return best


def lp_regret_bound(eigvals, r: int, budget_d: float) -> float:
    """Regret bound from the smallest top-``r`` sum over rearrangements of the
    spectrum that lie within squared distance ``budget_d`` of the monotone cone.

    Searches ``r``-subsets with both blocks sorted descending; limited to
    ``N_o <= 12``.
    """
    lam = _check_lp_args(eigvals, r, budget_d)
    if lam.shape[0] > LP_MAX_DIM:
        raise ValueError(f"lp bound limited to N_o <= {LP_MAX_DIM}, got {lam.shape[0]}")
    return math.fsum(lam[:r]) - _lp_min_topr(lam, r, budget_d)


def lp_regret_bound_printed(eigvals, r: int, budget_d: float) -> float:
    """Same search, subtracted from the full spectrum sum instead of the top-``r`` sum."""
    lam = _check_lp_args(eigvals, r, budget_d)
    if lam.shape[0] > LP_MAX_DIM:
        raise ValueError(f"lp bound limited to N_o <= {LP_MAX_DIM}, got {lam.shape[0]}")
    return math.fsum(lam) - _lp_min_topr(lam, r, budget_d)


def sample_gap_constant(n_o: int, delta: float, r: float) -> float:
    return n_o**2 * (4 * delta * r**3 + 3 * delta**2 * r**2 + 2 * delta**3 * r + delta**4)
