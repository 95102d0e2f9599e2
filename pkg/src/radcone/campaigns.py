"""Seeded Monte Carlo campaigns for the perturbation and generator-matrix bounds.

Trial ``i`` of a campaign with seed ``s`` draws everything from
``default_rng(SeedSequence([s, i]))``, so results do not depend on the number
of worker threads or on which trials run together.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from radcone import bounds, egm
from radcone.errors import EigengapError, SceneError
from radcone.geometry import AffinePerturbation, Scene, apply_affine, condition_number
from radcone.radiosity import assemble_kernel, solve_direct, solve_neumann, weighted_norm
from radcone.scenes import random_affine, random_box_scene, random_scene

MAX_RESAMPLE = 50


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial]))


def run_trials(fn, n_trials: int, seed: int, threads: int = 1) -> list:
    """``[fn(trial_rng(seed, i), i) for i in range(n_trials)]``, possibly threaded."""
    jobs = range(n_trials)
    if threads <= 1:
        return [fn(trial_rng(seed, i), i) for i in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: fn(trial_rng(seed, i), i), jobs))


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(row[k]) for k in header])


# --- perturbation campaigns ----------------------------------------------------

PERTURB_COLUMNS = ["trial", "eps_E", "eps_rho", "p", "p_prime", "cond_c", "actual", "bound", "holds"]
FACTORS = ("joint", "luminaire", "albedo", "geometry")


@dataclass(frozen=True)
class PerturbConfig:
    max_cond: float = 1.2
    max_eps_e: float = 0.2
    max_eps_rho: float = 0.2
    max_albedo: float = 0.9
    albedo_range: tuple = (0.05, 0.95)
    patch_range: tuple = (4, 60)
    alpha: float = 1.0


def random_campaign_scene(rng, cfg: PerturbConfig) -> Scene:
    """Alternates between a random parallelogram soup and a random open box."""
    if rng.random() < 0.5:
        n = int(rng.integers(cfg.patch_range[0], cfg.patch_range[1] + 1))
        return random_scene(rng, n, max_albedo=cfg.max_albedo, alpha=cfg.alpha)
    return random_box_scene(rng, grid=(int(rng.integers(2, 5)), 2), max_albedo=cfg.max_albedo, alpha=cfg.alpha)


def admissible_affine(rng, scene: Scene, max_cond: float) -> AffinePerturbation:
    """Draw affine maps until the transformed scene still passes the norm check."""
    for _ in range(MAX_RESAMPLE):
        t = random_affine(rng, max_cond)
        try:
            assemble_kernel(apply_affine(scene, t))
        except SceneError:
            continue
        return t
    raise SceneError("no admissible affine perturbation found")


def draw_perturbation(rng, scene: Scene, cfg: PerturbConfig, factor: str = "joint"):
    """``(t, albedo_delta, e, e_prime)`` for one trial; ``factor`` restricts the
    perturbation to a single ingredient."""
    n = scene.n_patches
    theta = rng.dirichlet(np.full(scene.luminaires.n_luminaires, cfg.alpha))
    e = scene.luminaires.emittance(theta)
    t = AffinePerturbation.identity()
    delta = np.zeros(n)
    e_prime = e
    if factor in ("joint", "luminaire"):
        e_prime = e * (1.0 + rng.uniform(-cfg.max_eps_e, cfg.max_eps_e, size=n))
    if factor in ("joint", "albedo"):
        lo, hi = cfg.albedo_range
        target = np.clip(scene.albedo + rng.uniform(-cfg.max_eps_rho, cfg.max_eps_rho, size=n), lo, hi)
        delta = target - scene.albedo
    if factor in ("joint", "geometry"):
        base = scene if not np.any(delta) else scene.with_albedo(scene.albedo + delta)
        t = admissible_affine(rng, base, cfg.max_cond)
    return t, delta, e, e_prime


def perturbation_trial(rng, trial, cfg: PerturbConfig, factor: str = "joint") -> dict:
    if factor not in FACTORS:
        raise ValueError(f"unknown factor {factor!r}")
    scene = random_campaign_scene(rng, cfg)
    t, delta, e, e_prime = draw_perturbation(rng, scene, cfg, factor)
    which = factor
    rep = bounds.verify_perturbation(scene, t, delta, e, e_prime, bound=which)
    return {
        "trial": trial, "eps_E": rep.eps_E, "eps_rho": rep.eps_rho, "p": rep.p,
        "p_prime": rep.p_prime, "cond_c": rep.cond_c, "actual": rep.actual_diff,
        "bound": rep.bound, "holds": rep.holds,
    }


def perturbation_campaign(n_trials: int, seed: int, factor: str = "joint", threads: int = 1,
                          cfg: PerturbConfig | None = None) -> list[dict]:
    cfg = cfg or PerturbConfig()
    return run_trials(lambda rng, i: perturbation_trial(rng, i, cfg, factor), n_trials, seed, threads)


def fixed_scene_campaign(scene: Scene, n_trials: int, seed: int, threads: int = 1,
                         cfg: PerturbConfig | None = None) -> list[dict]:
    """Joint perturbations of one given scene."""
    cfg = cfg or PerturbConfig()

    def one(rng, i):
        t, delta, e, e_prime = draw_perturbation(rng, scene, cfg, "joint")
        rep = bounds.verify_perturbation(scene, t, delta, e, e_prime)
        return {
            "trial": i, "eps_E": rep.eps_E, "eps_rho": rep.eps_rho, "p": rep.p,
            "p_prime": rep.p_prime, "cond_c": rep.cond_c, "actual": rep.actual_diff,
            "bound": rep.bound, "holds": rep.holds,
        }

    return run_trials(one, n_trials, seed, threads)


# --- solver and kernel campaigns -------------------------------------------------

SOLVER_COLUMNS = ["trial", "n_patches", "p", "bounces", "neumann_norm", "direct_norm", "rel_diff"]


def solver_trial(rng, trial, max_patches: int = 200, max_albedo: float = 0.9) -> dict:
    n = int(rng.integers(2, max_patches + 1))
    scene = random_scene(rng, n, max_albedo=max_albedo, rowsum_limit=1.0)
    e = scene.luminaires.emittance(rng.dirichlet(np.ones(scene.luminaires.n_luminaires)))
    b_n = solve_neumann(scene, e, tol=1e-12)
    b_d = solve_direct(scene, e)
    dn = weighted_norm(b_d, scene)
    return {
        "trial": trial, "n_patches": n, "p": scene.max_albedo, "bounces": b_n.bounces,
        "neumann_norm": weighted_norm(b_n, scene), "direct_norm": dn,
        "rel_diff": weighted_norm(b_n.values - b_d.values, scene) / dn,
    }


SANDWICH_COLUMNS = ["trial", "n_patches", "cond_c", "holds"]


def sandwich_trial(rng, trial, max_cond: float = 1.5) -> dict:
    """Random diagonal stretch with condition number exactly ``max_cond``,
    randomly rotated, on a random scene."""
    from radcone.scenes import random_rotation

    scene = random_campaign_scene(rng, PerturbConfig())
    s = rng.permutation([1.0, rng.uniform(1.0, max_cond), max_cond]) * rng.uniform(0.7, 1.4)
    r = random_rotation(rng)
    t = AffinePerturbation(r @ np.diag(s) @ r.T, rng.uniform(-1, 1, size=3))
    f = rng.random(scene.n_patches)
    return {"trial": trial, "n_patches": scene.n_patches, "cond_c": condition_number(t),
            "holds": bounds.kernel_sandwich_check(scene, t, f)}


# --- generator-matrix campaigns ------------------------------------------------------

EGM_COLUMNS = ["trial", "k_scenes", "frob_err_sq", "regret", "loose_bound", "lp_bound",
               "loose_holds", "lp_holds", "lp_bound_printed", "gap_constant", "lp_le_loose"]


@dataclass(frozen=True)
class EgmConfig:
    rank: int = 2
    alpha: float = 1.0
    n_luminaires: int = 4
    patch_range: tuple = (6, 12)
    k_choices: tuple = (10, 30, 100, 300)
    max_cond: float = 1.05
    albedo_jitter: float = 0.05


def similar_sample(rng, scene: Scene, cfg: EgmConfig):
    """One radiosity coefficient vector from a randomly perturbed copy of ``scene``,
    together with the coefficient vector ``scene`` itself yields for the same lighting."""
    n = scene.n_patches
    theta = rng.dirichlet(np.full(scene.luminaires.n_luminaires, cfg.alpha))
    delta = rng.uniform(-cfg.albedo_jitter, cfg.albedo_jitter, size=n)
    jittered = scene.with_albedo(np.clip(scene.albedo + delta, 0.05, 0.95))
    t = admissible_affine(rng, jittered, cfg.max_cond)
    similar = apply_affine(jittered, t)
    e = scene.luminaires.emittance(theta)
    root_a = np.sqrt(scene.areas)
    b_hat = root_a * solve_direct(similar, e).values
    b_true = root_a * solve_direct(scene, e).values
    return b_hat, b_true


def egm_trial(rng, trial, cfg: EgmConfig) -> dict:
    for _ in range(MAX_RESAMPLE):
        n = int(rng.integers(cfg.patch_range[0], cfg.patch_range[1] + 1))
        scene = random_scene(rng, n, n_luminaires=cfg.n_luminaires, alpha=cfg.alpha)
        basis = egm.radiosity_basis(scene)
        c_true = egm.second_moment(basis, egm.dirichlet_second_moment(cfg.n_luminaires, cfg.alpha))
        k = int(rng.choice(cfg.k_choices))
        pairs = [similar_sample(rng, scene, cfg) for _ in range(k)]
        c_est = egm.empirical_second_moment([p[0] for p in pairs])
        try:
            regret = egm.theorem2_regret(c_true, c_est, cfg.rank)
        except EigengapError:
            continue
        d_budget = float(np.sum((c_true.matrix_c - c_est.matrix_c) ** 2))
        loose = egm.loose_bound(c_true, cfg.rank)
        lp = egm.lp_regret_bound(c_true.eigvals, cfg.rank, d_budget)
        delta = max(float(np.linalg.norm(bh - bt)) for bh, bt in pairs)
        radius = max(float(np.linalg.norm(bt)) for _, bt in pairs)
        return {
            "trial": trial, "k_scenes": k, "frob_err_sq": d_budget, "regret": regret,
            "loose_bound": loose, "lp_bound": lp,
            "loose_holds": -1e-10 <= regret <= loose + 1e-10,
            "lp_holds": regret <= lp + 1e-10,
            "lp_bound_printed": egm.lp_regret_bound_printed(c_true.eigvals, cfg.rank, d_budget),
            "gap_constant": egm.sample_gap_constant(n, delta, radius),
            "lp_le_loose": lp <= loose + 1e-12,
        }
    raise EigengapError("could not draw a trial without an eigengap tie")


def egm_campaign(n_trials: int, seed: int, threads: int = 1, cfg: EgmConfig | None = None) -> list[dict]:
    cfg = cfg or EgmConfig()
    return run_trials(lambda rng, i: egm_trial(rng, i, cfg), n_trials, seed, threads)


SCALING_COLUMNS = ["n_samples", "mean_frob_err_sq", "se"]


def scaling_campaign(basis_b, alpha: float, sizes, n_reps: int, seed: int) -> list[dict]:
    """Mean ``||C_hat - C||_F^2`` over ``n_reps`` replicates at each sample size."""
    b = np.asarray(basis_b, dtype=float)
    n_e = b.shape[1]
    c = b @ egm.dirichlet_second_moment(n_e, alpha) @ b.T
    out = []
    for j, n_s in enumerate(sizes):
        errs = np.empty(n_reps)
        for rep in range(n_reps):
            rng = np.random.default_rng(np.random.SeedSequence([seed, j, rep]))
            x = rng.dirichlet(np.full(n_e, alpha), size=int(n_s)) @ b.T
            errs[rep] = np.sum((x.T @ x / n_s - c) ** 2)
        out.append({"n_samples": int(n_s), "mean_frob_err_sq": float(errs.mean()),
                    "se": float(errs.std(ddof=1) / math.sqrt(n_reps)) if n_reps > 1 else 0.0})
    return out


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
