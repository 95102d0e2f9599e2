"""Planar-patch scenes, affine perturbations and center-to-center visibility.

Patches are parallelograms stored as a center plus two edge vectors, so an
affine map transforms areas and normals exactly (no re-meshing).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from radcone.errors import SceneError, SceneFormatError
from radcone.kernels import get_backend

DEFAULT_KERNEL_CAP = 1e6
ENDPOINT_EPS = 1e-9


def _vec3(x, name):
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.shape != (3,) or not math.isfinite(arr[0] + arr[1] + arr[2]):
        raise SceneError(f"{name} must be a finite 3-vector, got {x!r}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Patch:
    center: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    albedo: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        object.__setattr__(self, "edge_u", _vec3(self.edge_u, "edge_u"))
        object.__setattr__(self, "edge_v", _vec3(self.edge_v, "edge_v"))
        albedo = float(self.albedo)
        if not 0.0 < albedo < 1.0:
            raise SceneError(f"albedo must lie in (0,1), got {albedo!r}")
        object.__setattr__(self, "albedo", albedo)
        if not self.area > 0.0:
            raise SceneError("patch edges are parallel or zero: area must be > 0")

    @cached_property
    def _cross(self):
        (ux, uy, uz), (vx, vy, vz) = self.edge_u.tolist(), self.edge_v.tolist()
        n = np.array([uy * vz - uz * vy, uz * vx - ux * vz, ux * vy - uy * vx])
        n.flags.writeable = False
        return n

    @property
    def area(self) -> float:
        x, y, z = self._cross.tolist()
        return math.sqrt(x * x + y * y + z * z)

    @property
    def normal(self) -> np.ndarray:
        n = self._cross
        return n / np.linalg.norm(n)


@dataclass(frozen=True, eq=False)
class LuminaireModel:
    """Basis emittance fields (one row per luminaire) and a symmetric Dirichlet
    concentration for the mixing coefficients."""

    emittance_basis: np.ndarray
    dirichlet_alpha: float = 1.0

    def __post_init__(self):
        basis = np.array(self.emittance_basis, dtype=float)
        if basis.ndim == 1:
            basis = basis[None, :]
        if basis.ndim != 2 or basis.shape[0] < 1:
            raise SceneError("emittance_basis must be a non-empty list of per-patch vectors")
        if not np.all(np.isfinite(basis)) or np.any(basis < 0):
            raise SceneError("emittance must be finite and non-negative")
        basis.flags.writeable = False
        object.__setattr__(self, "emittance_basis", basis)
        alpha = float(self.dirichlet_alpha)
        if not alpha > 0:
            raise SceneError(f"dirichlet_alpha must be positive, got {alpha!r}")
        object.__setattr__(self, "dirichlet_alpha", alpha)

    @property
    def n_luminaires(self) -> int:
        return self.emittance_basis.shape[0]

    @classmethod
    def normalized(cls, basis, areas, dirichlet_alpha=1.0):
        """Scale each basis row to unit area-weighted L2 norm.

        Returns ``(model, scales)`` where ``scales[i]`` multiplied row ``i``.
        """
        basis = np.atleast_2d(np.asarray(basis, dtype=float))
        norms = np.sqrt(basis**2 @ np.asarray(areas, dtype=float))
        if np.any(norms == 0):
            bad = int(np.flatnonzero(norms == 0)[0])
            raise SceneError(f"luminaire {bad} is identically zero")
        scales = 1.0 / norms
        return cls(basis * scales[:, None], dirichlet_alpha), scales

    def emittance(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return theta @ self.emittance_basis


@dataclass(frozen=True, eq=False)
class AffinePerturbation:
    """The map s -> A s + b applied to every surface point."""

    matrix_a: np.ndarray
    offset_b: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        a = np.array(self.matrix_a, dtype=float)
        if a.shape != (3, 3) or not np.all(np.isfinite(a)):
            raise SceneError("matrix_a must be a finite 3x3 matrix")
        sv = np.linalg.svd(a, compute_uv=False)
        if not sv[-1] > 0:
            raise SceneError("matrix_a is singular (smallest singular value <= 0)")
        if np.linalg.det(a) < 0:
            raise SceneError("matrix_a must have det >= 0 (orientation preserving)")
        a.flags.writeable = False
        object.__setattr__(self, "matrix_a", a)
        object.__setattr__(self, "offset_b", _vec3(self.offset_b, "offset_b"))

    @cached_property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix_a, compute_uv=False)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def __call__(self, points):
        return np.asarray(points) @ self.matrix_a.T + self.offset_b


def compose(second: AffinePerturbation, first: AffinePerturbation) -> AffinePerturbation:
    """Return ``second ∘ first``."""
    a = second.matrix_a @ first.matrix_a
    b = second.matrix_a @ first.offset_b + second.offset_b
    return AffinePerturbation(a, b)


def condition_number(t: AffinePerturbation) -> float:
    sv = np.linalg.svd(np.asarray(t.matrix_a, dtype=float), compute_uv=False)
    if not sv[-1] > 0:
        raise SceneError("condition number undefined for a singular matrix")
    return float(sv[0] / sv[-1])


@dataclass(frozen=True, eq=False)
class Scene:
    patches: tuple
    luminaires: LuminaireModel
    kernel_cap: float = DEFAULT_KERNEL_CAP
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        patches = tuple(self.patches)
        if not patches:
            raise SceneError("scene has no patches")
        if not all(isinstance(p, Patch) for p in patches):
            raise SceneError("patches must be Patch instances")
        object.__setattr__(self, "patches", patches)
        if self.luminaires.emittance_basis.shape[1] != len(patches):
            raise SceneError(
                f"luminaire vectors have length {self.luminaires.emittance_basis.shape[1]}, "
                f"scene has {len(patches)} patches"
            )
        if self.max_albedo >= 1.0:
            raise SceneError("max albedo must be < 1")

    def __len__(self):
        return len(self.patches)

    @property
    def n_patches(self) -> int:
        return len(self.patches)

    @cached_property
    def centers(self) -> np.ndarray:
        return _frozen(np.stack([p.center for p in self.patches]))

    @cached_property
    def edges_u(self) -> np.ndarray:
        return _frozen(np.stack([p.edge_u for p in self.patches]))

    @cached_property
    def edges_v(self) -> np.ndarray:
        return _frozen(np.stack([p.edge_v for p in self.patches]))

    @cached_property
    def normals(self) -> np.ndarray:
        n = np.cross(self.edges_u, self.edges_v)
        return _frozen(n / np.linalg.norm(n, axis=1, keepdims=True))

    @cached_property
    def areas(self) -> np.ndarray:
        return _frozen(np.linalg.norm(np.cross(self.edges_u, self.edges_v), axis=1))

    @cached_property
    def albedo(self) -> np.ndarray:
        return _frozen(np.array([p.albedo for p in self.patches]))

    @property
    def max_albedo(self) -> float:
        return max(p.albedo for p in self.patches)

    def with_albedo(self, albedo) -> Scene:
        albedo = np.broadcast_to(np.asarray(albedo, dtype=float), (self.n_patches,))
        patches = [replace(p, albedo=float(a)) for p, a in zip(self.patches, albedo)]
        return Scene(tuple(patches), self.luminaires, self.kernel_cap)

    def with_luminaires(self, luminaires: LuminaireModel) -> Scene:
        return Scene(self.patches, luminaires, self.kernel_cap)

    def to_dict(self) -> dict:
        return {
            "patches": [
                {
                    "center": p.center.tolist(),
                    "edge_u": p.edge_u.tolist(),
                    "edge_v": p.edge_v.tolist(),
                    "albedo": p.albedo,
                }
                for p in self.patches
            ],
            "luminaires": self.luminaires.emittance_basis.tolist(),
            "dirichlet_alpha": self.luminaires.dirichlet_alpha,
        }


def _frozen(arr):
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


def apply_affine(scene: Scene, t: AffinePerturbation) -> Scene:
    """Map every patch through ``t``; albedo and emittance ride along unchanged."""
    a = t.matrix_a
    if not t.singular_values[-1] > 0:
        raise SceneError("matrix_a is singular")
    patches = tuple(
        Patch(a @ p.center + t.offset_b, a @ p.edge_u, a @ p.edge_v, p.albedo)
        for p in scene.patches
    )
    return Scene(patches, scene.luminaires, scene.kernel_cap)


def visibility(scene: Scene, i: int, j: int) -> int:
    """1 iff the open segment between the centers of patches i and j misses
    every other patch."""
    n = scene.n_patches
    if i == j:
        raise ValueError("visibility(i, i) is undefined")
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"patch index out of range for {n} patches")
    lo, hi = min(i, j), max(i, j)
    blocked = get_backend().segment_blocked(
        scene.centers, scene.edges_u, scene.edges_v, lo, hi, ENDPOINT_EPS
    )
    return 0 if blocked else 1


def visibility_matrix(scene: Scene, backend: str | None = None) -> np.ndarray:
    if "visibility" not in scene._memo or backend is not None:
        vis = get_backend(backend).visibility_matrix(
            scene.centers, scene.edges_u, scene.edges_v, ENDPOINT_EPS
        )
        if backend is not None:
            return vis
        scene._memo["visibility"] = vis
    return scene._memo["visibility"]


# --- JSON scenes -------------------------------------------------------------


def scene_from_dict(data: dict, kernel_cap: float = DEFAULT_KERNEL_CAP):
    """Build a scene from the JSON schema; returns ``(scene, scales)``.

    Emittance vectors are normalized to unit area-weighted L2 norm and
    ``scales`` holds the factor applied to each.
    """
    if not isinstance(data, dict):
        raise SceneError("scene JSON must be an object")
    for key in ("patches", "luminaires"):
        if key not in data:
            raise SceneError(f"scene JSON missing key {key!r}")
    try:
        patches = tuple(
            Patch(p["center"], p["edge_u"], p["edge_v"], p["albedo"]) for p in data["patches"]
        )
    except (KeyError, TypeError) as exc:
        raise SceneError(f"malformed patch entry: {exc}") from exc
    areas = np.array([p.area for p in patches])
    basis = np.array(data["luminaires"], dtype=float)
    if basis.ndim != 2 or basis.shape[1] != len(patches):
        raise SceneError("each luminaire must list one emittance value per patch")
    if np.any(basis < 0):
        raise SceneError("emittance must be non-negative")
    lum, scales = LuminaireModel.normalized(basis, areas, data.get("dirichlet_alpha", 1.0))
    return Scene(patches, lum, kernel_cap), scales


def load_scene(path, kernel_cap: float = DEFAULT_KERNEL_CAP, validate_kernel: bool = True):
    """Read a scene JSON file; returns ``(scene, scales)``.

    With ``validate_kernel`` the interreflection kernel is assembled so cap
    and operator-norm violations surface at load time.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        scene, scales = scene_from_dict(data, kernel_cap)
    except SceneError as exc:
        raise SceneError(f"{path}: {exc}") from exc
    if validate_kernel:
        from radcone.radiosity import assemble_kernel

        assemble_kernel(scene)
    return scene, scales


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene.to_dict(), indent=1) + "\n", encoding="utf-8")
