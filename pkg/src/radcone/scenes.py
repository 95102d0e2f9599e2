"""Bundled fixture scenes and seeded random scene / perturbation generators."""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from radcone.errors import SceneError
from radcone.geometry import AffinePerturbation, LuminaireModel, Patch, Scene, scene_from_dict

BUNDLED = ("single_patch", "two_patch", "open_box")


def single_patch_scene(albedo=0.5) -> Scene:
    patch = Patch([0, 0, 0], [1, 0, 0], [0, 1, 0], albedo)
    return Scene((patch,), LuminaireModel([[1.0]]))


def two_patch_scene(albedo=0.5, size=0.1, distance=1.0) -> Scene:
    """Two parallel square patches facing each other along z; luminaire 0 lights
    patch 0, luminaire 1 lights patch 1."""
    lower = Patch([0, 0, 0], [size, 0, 0], [0, size, 0], albedo)
    upper = Patch([0, 0, distance], [size, 0, 0], [0, -size, 0], albedo)
    areas = np.array([lower.area, upper.area])
    lum, _ = LuminaireModel.normalized(np.eye(2), areas)
    return Scene((lower, upper), lum)


def _face_patches(origin, axis_u, axis_v, nu, nv, albedo, inset=1.0):
    origin, axis_u, axis_v = (np.asarray(x, dtype=float) for x in (origin, axis_u, axis_v))
    du, dv = axis_u / nu, axis_v / nv
    out = []
    for a in range(nu):
        for b in range(nv):
            center = origin + (a + 0.5) * du + (b + 0.5) * dv
            out.append(Patch(center, inset * du, inset * dv, albedo))
    return out


def open_box_scene(width=3.0, depth=3.0, height=1.0, albedo=0.5, grid=(3, 2), n_luminaires=3,
                   inset=0.8) -> Scene:
    """A box with no lid: floor plus four walls, each split into a
    ``grid[0] x grid[1]`` array of patches with inward normals (30 patches by
    default). Each patch covers ``inset`` of its cell along both edges.
    Luminaires light single floor and wall patches."""
    nu, nv = grid
    w, d, h = width, depth, height
    args = (nu, nv, albedo, inset)
    faces = [
        _face_patches([0, 0, 0], [w, 0, 0], [0, d, 0], *args),  # floor, +z
        _face_patches([0, 0, 0], [0, d, 0], [0, 0, h], *args),  # x=0 wall, +x
        _face_patches([w, 0, 0], [0, 0, h], [0, d, 0], *args),  # x=w wall, -x
        _face_patches([0, 0, 0], [0, 0, h], [w, 0, 0], *args),  # y=0 wall, +y
        _face_patches([0, d, 0], [w, 0, 0], [0, 0, h], *args),  # y=d wall, -y
    ]
    patches = tuple(p for face in faces for p in face)
    n = len(patches)
    per_face = nu * nv
    lit = [0, per_face + per_face // 2, 3 * per_face + 1, 4 * per_face + per_face - 1][:n_luminaires]
    basis = np.zeros((len(lit), n))
    for row, idx in enumerate(lit):
        basis[row, idx] = 1.0
    lum, _ = LuminaireModel.normalized(basis, [p.area for p in patches])
    return Scene(patches, lum)


def bundled_scene_dict(name: str) -> dict:
    if name not in BUNDLED:
        raise SceneError(f"unknown bundled scene {name!r}; choose from {BUNDLED}")
    text = resources.files("radcone").joinpath("data", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def bundled_scene(name: str) -> Scene:
    scene, _ = scene_from_dict(bundled_scene_dict(name))
    return scene


# --- random generators -------------------------------------------------------


def random_unit_vectors(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_luminaires(rng, n_patches, n_luminaires, areas, alpha=1.0, max_lit=3) -> LuminaireModel:
    basis = np.zeros((n_luminaires, n_patches))
    for row in range(n_luminaires):
        k = int(rng.integers(1, min(max_lit, n_patches) + 1))
        idx = rng.choice(n_patches, size=k, replace=False)
        basis[row, idx] = rng.uniform(0.5, 1.5, size=k)
    lum, _ = LuminaireModel.normalized(basis, areas, alpha)
    return lum


def random_scene(rng, n_patches, max_albedo=0.9, n_luminaires=3, alpha=1.0,
                 rowsum_limit=0.45, min_gap=0.25, size_range=(0.05, 0.2), max_tries=200) -> Scene:
    """A soup of randomly oriented parallelograms.

    Centers are drawn in a cube whose side grows as ``n^(1/3)`` with a minimum
    center spacing; scenes whose form-factor row sums exceed ``rowsum_limit``
    are redrawn, so any affine map with condition number up to
    ``(1/rowsum_limit)^(1/4)`` keeps the transport a contraction.
    """
    from radcone.radiosity import assemble_kernel

    side = max(1.0, (n_patches / 8.0) ** (1.0 / 3.0))
    for _ in range(max_tries):
        centers = []
        attempts = 0
        while len(centers) < n_patches:
            attempts += 1
            if attempts > 200 * n_patches:
                break
            c = rng.uniform(0.0, side, size=3)
            if centers and np.min(np.linalg.norm(np.asarray(centers) - c, axis=1)) < min_gap:
                continue
            centers.append(c)
        if len(centers) < n_patches:
            side *= 1.1
            continue
        normals = random_unit_vectors(rng, n_patches)
        patches = []
        for c, nrm in zip(centers, normals):
            t1 = np.cross(nrm, random_unit_vectors(rng, 1)[0])
            t1 /= np.linalg.norm(t1)
            t2 = np.cross(nrm, t1)
            lu, lv = rng.uniform(*size_range, size=2)
            rho = rng.uniform(0.1, max_albedo)
            patches.append(Patch(c, lu * t1, lv * t2, rho))
        lum = random_luminaires(rng, n_patches, n_luminaires, [p.area for p in patches], alpha)
        scene = Scene(tuple(patches), lum)
        try:
            km = assemble_kernel(scene)
        except SceneError:
            continue
        if km.rowsum_max <= rowsum_limit:
            return scene
    raise SceneError("could not draw a random scene satisfying the row-sum limit")


def random_box_scene(rng, grid=(5, 2), max_albedo=0.9, n_luminaires=3, alpha=1.0, inset=0.7) -> Scene:
    """Open box with random proportions and per-patch albedo (50 patches by default)."""
    w, d = rng.uniform(2.0, 3.0, size=2)
    h = rng.uniform(0.8, 1.2)
    scene = open_box_scene(w, d, h, albedo=0.5, grid=grid, n_luminaires=1, inset=inset)
    albedo = rng.uniform(0.1, max_albedo, size=scene.n_patches)
    lum = random_luminaires(rng, scene.n_patches, n_luminaires, scene.areas, alpha)
    return scene.with_albedo(albedo).with_luminaires(lum)


def random_affine(rng, max_cond=1.2, offset_scale=1.0) -> AffinePerturbation:
    """Orientation-preserving ``A = R1 diag(s) R2`` with ``s_max/s_min <= max_cond``."""
    c = rng.uniform(1.0, max_cond)
    s = np.array([1.0, rng.uniform(1.0, c), c])
    s *= rng.uniform(0.7, 1.4)
    a = random_rotation(rng) @ np.diag(rng.permutation(s)) @ random_rotation(rng)
    return AffinePerturbation(a, rng.uniform(-offset_scale, offset_scale, size=3))
