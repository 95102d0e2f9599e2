"""Discrete diffuse interreflection: kernel assembly, Neumann and direct solves.

Point collocation with one sample per patch. ``K[i, j]`` already carries the
area of patch ``j``, so ``B = E + diag(rho) K B`` is the discrete operator
equation and patch areas act as quadrature weights for every norm.
"""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from radcone.errors import KernelCapError, OperatorNormError, SingularSystemError
from radcone.geometry import Scene, visibility_matrix
from radcone.kernels import get_backend

MAX_DIRECT_PATCHES = 2000
DEFAULT_TOL = 1e-10
DEFAULT_MAX_BOUNCES = 10000
# form-factor row sums are allowed to exceed 1 by rounding only
_ROWSUM_SLACK = 1e-12
# The bundled OpenBLAS getrf occasionally returns wrong pivots when several
# threads factor at once, so factorizations are serialized.
_FACTOR_LOCK = threading.Lock()


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    entries: np.ndarray
    visibility: np.ndarray
    albedo: np.ndarray
    areas: np.ndarray

    @property
    def rowsum_max(self) -> float:
        """Largest form-factor row sum, the weighted 1- and inf-norm of K."""
        return float(self.entries.sum(axis=1).max())

    @property
    def transport(self) -> np.ndarray:
        """``diag(rho) K``."""
        return self.albedo[:, None] * self.entries

    def transport_norms(self) -> tuple[float, float]:
        """Area-weighted (1-norm, inf-norm) of ``diag(rho) K``."""
        t = self.transport
        norm_inf = float(np.abs(t).sum(axis=1).max())
        norm_1 = float(((self.areas[:, None] * np.abs(t)).sum(axis=0) / self.areas).max())
        return norm_1, norm_inf


def assemble_kernel(scene: Scene, backend: str | None = None, check_norm: bool = True) -> KernelMatrix:
    """Assemble (and memoize on the scene) the interreflection kernel.

    Raises :class:`KernelCapError` if an entry exceeds ``scene.kernel_cap`` and
    :class:`OperatorNormError` if a form-factor row sum exceeds 1, which would
    void the ``||diag(rho) K|| <= max(rho)`` bound every estimate relies on.
    """
    memo_key = "kernel"
    if backend is None and memo_key in scene._memo:
        return scene._memo[memo_key]
    vis = visibility_matrix(scene, backend=backend)
    entries = get_backend(backend).kernel_matrix(scene.centers, scene.normals, scene.areas, vis)
    entries.flags.writeable = False
    if not np.all(np.isfinite(entries)) or entries.max(initial=0.0) > scene.kernel_cap:
        bad = np.argwhere(~np.isfinite(entries) | (entries > scene.kernel_cap))[0]
        raise KernelCapError(
            f"kernel entry K[{bad[0]}, {bad[1]}] = {entries[bad[0], bad[1]]:.6g} exceeds cap "
            f"{scene.kernel_cap:g} (throat or excessive curvature between patches {bad[0]} and {bad[1]})"
        )
    km = KernelMatrix(entries, vis, scene.albedo, scene.areas)
    if check_norm:
        rs = entries.sum(axis=1)
        if rs.max() > 1.0 + _ROWSUM_SLACK:
            i = int(rs.argmax())
            raise OperatorNormError(
                f"form-factor row sum {rs[i]:.6g} > 1 at patch {i}; discretization too coarse "
                f"for the transport operator to be a contraction"
            )
    if backend is None:
        scene._memo[memo_key] = km
    return km


@dataclass(frozen=True, eq=False)
class RadiosityField:
    values: np.ndarray
    areas: np.ndarray
    bounces: int | None = None
    increment: float | None = None
    converged: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        a = np.asarray(self.areas, dtype=float)
        if v.shape != a.shape:
            raise ValueError(f"field has {v.shape} values but {a.shape} areas")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "areas", a)

    def __len__(self):
        return self.values.shape[0]


def as_field(f, scene: Scene) -> RadiosityField:
    if isinstance(f, RadiosityField):
        if f.values.shape[0] != scene.n_patches:
            raise ValueError(f"field length {f.values.shape[0]} != {scene.n_patches} patches")
        return f
    return RadiosityField(np.asarray(f, dtype=float), scene.areas)


def weighted_norm(f, scene_or_areas, which: str = "L2") -> float:
    """Area-weighted L1 / L2 / Linf norm of a per-patch field."""
    values = f.values if isinstance(f, RadiosityField) else np.asarray(f, dtype=float)
    areas = scene_or_areas.areas if isinstance(scene_or_areas, Scene) else np.asarray(scene_or_areas)
    if values.shape != areas.shape:
        raise ValueError(f"field length {values.shape} does not match {areas.shape} areas")
    which = which.upper()
    if which == "L1":
        return float(np.sum(np.abs(values) * areas))
    if which == "L2":
        return float(np.sqrt(np.sum(values * values * areas)))
    if which == "LINF":
        return float(np.max(np.abs(values)))
    raise ValueError(f"unknown norm {which!r}; expected L1, L2 or Linf")


def solve_neumann(scene: Scene, e, tol: float = DEFAULT_TOL, max_bounces: int = DEFAULT_MAX_BOUNCES,
                  norm_areas=None) -> RadiosityField:
    """Partial sums of ``sum_n (diag(rho) K)^n e`` until an increment drops below ``tol``.

    The returned field records the bounce index ``m`` at which it stopped, the
    final increment and whether it converged before ``max_bounces``.
    """
    e = as_field(e, scene)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if np.any(e.values < 0):
        raise ValueError("emittance must be non-negative")
    transport = assemble_kernel(scene).transport
    areas = scene.areas if norm_areas is None else np.asarray(norm_areas)
    term = e.values.copy()
    total = term.copy()
    inc = float("inf")
    m = 0
    for m in range(1, max_bounces + 1):
        term = transport @ term
        total += term
        inc = weighted_norm(term, areas)
        if inc < tol:
            break
    return RadiosityField(total, scene.areas, bounces=m, increment=inc, converged=inc < tol)


def _factor(scene: Scene):
    memo = scene._memo
    if "lu" in memo:
        return memo["lu"]
    n = scene.n_patches
    if n > MAX_DIRECT_PATCHES:
        raise ValueError(f"direct solve capped at {MAX_DIRECT_PATCHES} patches, scene has {n}")
    system = np.eye(n) - assemble_kernel(scene).transport
    with _FACTOR_LOCK:
        if "lu" in memo:
            return memo["lu"]
        lu, piv = scipy.linalg.lu_factor(system, check_finite=True)
        anorm = np.abs(system).sum(axis=0).max()
        rcond, info = lapack.dgecon(lu, anorm, norm="1")
        if info != 0 or rcond < 1e-12:
            cond = np.inf if rcond == 0 else 1.0 / rcond
            raise SingularSystemError(f"I - diag(rho)K is singular or ill-conditioned (cond ~ {cond:.3g})")
        memo["lu"] = (lu, piv, system)
    return memo["lu"]


def solve_direct(scene: Scene, e) -> RadiosityField:
    """Solve ``(I - diag(rho) K) B = E`` by pivoted LU.

    ``e`` may be a single field or a ``(n_patches, k)`` array of right-hand sides,
    in which case an array of solutions is returned.
    """
    lu, piv, system = _factor(scene)
    multi = not isinstance(e, RadiosityField) and np.ndim(e) == 2
    rhs = np.asarray(e, dtype=float) if multi else as_field(e, scene).values
    b = scipy.linalg.lu_solve((lu, piv), rhs)
    resid = np.linalg.norm(system @ b - rhs, axis=0)
    scale = np.linalg.norm(rhs, axis=0)
    if np.any(resid > 1e-8 * scale + 1e-300):
        raise SingularSystemError(f"direct solve residual {resid.max():.3g} exceeds 1e-8 * ||E||")
    if multi:
        return b
    return RadiosityField(b, scene.areas)


def write_field_csv(path, field) -> None:
    values = field.values if isinstance(field, RadiosityField) else np.asarray(field)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["patch_index", "value"])
        for i, v in enumerate(values):
            w.writerow([i, format(float(v), ".17g")])


def read_field_csv(path) -> np.ndarray:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = np.zeros(len(rows))
    for row in rows:
        out[int(row["patch_index"])] = float(row["value"])
    return out
