"""Closed-form radiosity perturbation bounds and their empirical checks.

All empirical norms are area-weighted L2 over the *original* scene's patch
areas, i.e. the shared parameter domain on which both radiosities live.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from radcone.geometry import AffinePerturbation, Scene, apply_affine, condition_number
from radcone.radiosity import as_field, assemble_kernel, solve_direct, weighted_norm

HOLDS_SLACK = 1e-9


def _check_bound_args(eps_E, eps_rho, p, p_prime, cond_c, norm_E):
    if not (0.0 <= p < 1.0 and 0.0 <= p_prime < 1.0):
        raise ValueError(f"p and p' must lie in [0, 1) (got {p}, {p_prime}); the Neumann series diverges")
    if eps_E < 0 or eps_rho < 0 or norm_E < 0:
        raise ValueError("eps_E, eps_rho and norm_E must be non-negative")
    if not cond_c >= 1.0:
        raise ValueError(f"condition number must be >= 1, got {cond_c}")


def theorem1_bound(eps_E, eps_rho, p, p_prime, cond_c, norm_E) -> float:
    """Upper bound on ``||B_V - B_V'||`` for joint luminaire, albedo and affine
    geometry perturbations."""
    _check_bound_args(eps_E, eps_rho, p, p_prime, cond_c, norm_E)
    lum = eps_E / (1.0 - p)
    alb = eps_rho * (1.0 + eps_E) / ((1.0 - p) * (1.0 - p_prime))
    geo = (cond_c**4 - 1.0) * (1.0 + eps_E) / (1.0 - p_prime) ** 2
    return (lum + alb + geo) * norm_E


class LemmaBounds(NamedTuple):
    luminaire: float
    albedo: float
    geometry: float


def lemma_bounds(eps_E, eps_rho, p, p_prime, cond_c, norm_E) -> LemmaBounds:
    """The three single-factor bounds; the geometry one assumes ``p' = p``."""
    _check_bound_args(eps_E, eps_rho, p, p_prime, cond_c, norm_E)
    return LemmaBounds(
        eps_E * norm_E / (1.0 - p),
        eps_rho * norm_E / ((1.0 - p) * (1.0 - p_prime)),
        (cond_c**4 - 1.0) * norm_E / (1.0 - p) ** 2,
    )


@dataclass(frozen=True)
class PerturbationReport:
    eps_E: float
    eps_rho: float
    p: float
    p_prime: float
    cond_c: float
    actual_diff: float
    bound: float
    holds: bool
    norm_E: float = 0.0
    lemma: LemmaBounds | None = None


def perturbed_scene(scene_v: Scene, t: AffinePerturbation, albedo_delta) -> Scene:
    scene = apply_affine(scene_v, t)
    delta = np.broadcast_to(np.asarray(albedo_delta, dtype=float), (scene_v.n_patches,))
    if np.any(delta != 0):
        scene = scene.with_albedo(scene_v.albedo + delta)
    return scene


def verify_perturbation(scene_v: Scene, t: AffinePerturbation, albedo_delta, e, e_prime,
                        bound: str = "joint") -> PerturbationReport:
    """Solve V and its perturbation V' and compare the radiosity gap with a bound.

    ``bound`` selects the reference: ``"joint"`` (all three factors) or one of
    ``"luminaire"``, ``"albedo"``, ``"geometry"`` for a single-factor bound.
    """
    e = as_field(e, scene_v).values
    e_prime = as_field(e_prime, scene_v).values
    if np.any(e < 0) or np.any(e_prime < 0):
        raise ValueError("emittance must be non-negative")
    scene_p = perturbed_scene(scene_v, t, albedo_delta)
    assemble_kernel(scene_p)  # surfaces cap / norm violations before solving
    b = solve_direct(scene_v, e).values
    b_p = solve_direct(scene_p, e_prime).values
    areas = scene_v.areas
    norm_E = weighted_norm(e, areas)
    diff_E = weighted_norm(e - e_prime, areas)
    if norm_E > 0:
        eps_E = diff_E / norm_E
    else:
        eps_E = 0.0 if diff_E == 0 else math.inf
    eps_rho = float(np.max(np.abs(scene_p.albedo - scene_v.albedo)))
    p, p_prime = scene_v.max_albedo, scene_p.max_albedo
    cond_c = condition_number(t)
    actual = weighted_norm(b - b_p, areas)
    lemmas = lemma_bounds(eps_E, eps_rho, p, p_prime, cond_c, norm_E) if math.isfinite(eps_E) else None
    if bound == "joint":
        value = theorem1_bound(eps_E, eps_rho, p, p_prime, cond_c, norm_E) if math.isfinite(eps_E) else math.inf
    elif bound in LemmaBounds._fields:
        value = getattr(lemmas, bound) if lemmas is not None else math.inf
    else:
        raise ValueError(f"unknown bound {bound!r}")
    return PerturbationReport(
        eps_E=eps_E, eps_rho=eps_rho, p=p, p_prime=p_prime, cond_c=cond_c,
        actual_diff=actual, bound=value, holds=bool(actual <= value + HOLDS_SLACK),
        norm_E=norm_E, lemma=lemmas,
    )


def kernel_sandwich_check(scene: Scene, t: AffinePerturbation, f, rel_slack: float = 1e-9) -> bool:
    """Check ``c^-4 K f <= K' f <= c^4 K f`` componentwise for non-negative ``f``.

    ``K'`` is assembled on the transformed geometry and applied to the same
    per-patch values. An absolute floor of ``1e-12 * max(K f)`` absorbs grazing
    pairs whose cosine rounds to a tiny positive number on one side only.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("f must be non-negative")
    k = assemble_kernel(scene, check_norm=False).entries
    k_prime = assemble_kernel(apply_affine(scene, t), check_norm=False).entries
    c4 = condition_number(t) ** 4
    kf, kpf = k @ f, k_prime @ f
    floor = 1e-12 * max(float(kf.max(initial=0.0)), float(kpf.max(initial=0.0)))
    lower_ok = kpf >= kf / c4 * (1.0 - rel_slack) - floor
    upper_ok = kpf <= kf * c4 * (1.0 + rel_slack) + floor
    return bool(np.all(lower_ok & upper_ok))


@dataclass(frozen=True)
class RankOneGapReport:
    delta: float
    r: float
    gap: float
    statement_bound: float
    proof_bound: float

    @property
    def statement_holds(self) -> bool:
        return self.gap <= self.statement_bound * (1 + 1e-12) + 1e-300

    @property
    def proof_holds(self) -> bool:
        return self.gap <= self.proof_bound * (1 + 1e-12) + 1e-300


def rank_one_gap_check(b, c_vec) -> RankOneGapReport:
    """Squared Frobenius gap of ``bb^T - cc^T`` against both printed polynomials
    in ``delta = ||b - c||`` and ``r = ||b||``.

    The proof polynomial dominates the gap whenever ``delta <= r``; it can
    fail once ``delta`` exceeds roughly ``1.19 r`` (e.g. ``c = 3b``).
    """
    b = np.asarray(b, dtype=float)
    c_vec = np.asarray(c_vec, dtype=float)
    delta = float(np.linalg.norm(b - c_vec))
    r = float(np.linalg.norm(b))
    bb, cc, bc = b @ b, c_vec @ c_vec, b @ c_vec
    # ||bb^T - cc^T||_F^2 = |b|^4 + |c|^4 - 2 (b.c)^2, computed without cancellation
    gap = float(np.sum((np.outer(b, b) - np.outer(c_vec, c_vec)) ** 2))
    if gap == 0.0 and (bb != cc or bb * cc != bc * bc):
        gap = float(bb * bb + cc * cc - 2 * bc * bc)
    statement = 3 * delta**2 * r**2 + 4 * delta**3 * r + delta**4
    proof = 4 * delta * r**3 + 3 * delta**2 * r**2 + 2 * delta**3 * r + delta**4
    return RankOneGapReport(delta, r, gap, statement, proof)


# --- gloss predicate ---------------------------------------------------------


def diffuse_brdf(value: float = 1.0 / math.pi):
    def brdf(w_in, w_out):
        w_in = np.asarray(w_in)
        return np.full(w_in.shape[:-1], value)

    return brdf


def phong_brdf(exponent: float, floor: float = 1e-6, normal=(0.0, 0.0, 1.0)):
    """A positive Phong-style lobe ``floor + max(0, mirror(w_in) . w_out)^exponent``."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)

    def brdf(w_in, w_out):
        w_in, w_out = np.asarray(w_in), np.asarray(w_out)
        mirror = 2.0 * (w_in @ n)[..., None] * n - w_in
        cosine = np.maximum(np.sum(mirror * w_out, axis=-1), 0.0)
        return floor + cosine**exponent

    return brdf


def sample_hemisphere(rng, n, normal=(0.0, 0.0, 1.0)):
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    nrm = np.asarray(normal, dtype=float)
    flip = v @ nrm < 0
    v[flip] = -v[flip]
    return v


def gloss_ratio_ok(brdf, alpha, w, w_p, wb, wb_p):
    """Per-quadruple check of the ratio sandwich.

    Returns ``(ok, valid)``; ``valid`` is False where a dot product is
    negative, i.e. outside the domain of the property.
    """
    w, w_p, wb, wb_p = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (w, w_p, wb, wb_p))
    base = brdf(w, wb)
    moved = brdf(w_p, wb_p)
    if np.any(base <= 0) or np.any(moved <= 0):
        raise ValueError("BRDF values must be positive")
    dot_in = np.sum(w_p * w, axis=1)
    dot_out = np.sum(wb_p * wb, axis=1)
    valid = (dot_in > 0) & (dot_out > 0)
    prod = np.where(valid, dot_in * dot_out, 1.0)
    ratio = moved / base
    tol = 1e-12
    ok = (ratio >= prod**alpha * (1 - tol)) & (ratio <= (1.0 / prod) ** alpha * (1 + tol))
    return ok, valid


def gloss_property_check(brdf, alpha: float, n_samples: int, seed: int = 0, quadruples=None) -> bool:
    """True iff every sampled direction quadruple satisfies the gloss ratio bounds.

    ``quadruples`` may supply an explicit ``(w, w', wbar, wbar')`` set instead of
    uniform hemisphere samples.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if quadruples is None:
        rng = np.random.default_rng(seed)
        quadruples = [sample_hemisphere(rng, n_samples) for _ in range(4)]
    w, w_p, wb, wb_p = quadruples
    ok, valid = gloss_ratio_ok(brdf, alpha, w, w_p, wb, wb_p)
    return bool(np.all(ok[valid]))
