"""Diffuse radiosity on patch scenes, perturbation bounds, effective generator
matrices, cone fitting of shading fields and FID-family metrics."""

from radcone.errors import (
    EigengapError,
    IterationLimitError,
    KernelCapError,
    OperatorNormError,
    RadconeError,
    SceneError,
    SceneFormatError,
    SingularSystemError,
)
from radcone.geometry import (
    AffinePerturbation,
    LuminaireModel,
    Patch,
    Scene,
    apply_affine,
    condition_number,
    load_scene,
    save_scene,
    visibility_matrix,
)
from radcone.kernels import BACKEND
from radcone.radiosity import RadiosityField, assemble_kernel, solve_direct, solve_neumann, weighted_norm
from radcone.scenes import bundled_scene

__version__ = "0.1.0"

__all__ = [
    "AffinePerturbation",
    "BACKEND",
    "EigengapError",
    "IterationLimitError",
    "KernelCapError",
    "LuminaireModel",
    "OperatorNormError",
    "Patch",
    "RadconeError",
    "RadiosityField",
    "Scene",
    "SceneError",
    "SceneFormatError",
    "SingularSystemError",
    "apply_affine",
    "assemble_kernel",
    "bundled_scene",
    "condition_number",
    "load_scene",
    "save_scene",
    "solve_direct",
    "solve_neumann",
    "visibility_matrix",
    "weighted_norm",
]
