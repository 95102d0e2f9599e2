"""Non-negative fits of shading fields by generator fields, plus scalar losses
used when training relighting multipliers."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from radcone.errors import IterationLimitError

SHADING_MEAN = 0.7
KKT_TOL = 1e-8


def normalize_shading(field) -> np.ndarray:
    """Rescale a non-negative field to mean 0.7."""
    field = np.asarray(field, dtype=float)
    m = field.mean()
    if not m > 0:
        raise ValueError(f"shading field must have positive mean, got {m}")
    return field * (SHADING_MEAN / m)


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    generators: np.ndarray  # (N_g, N)

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.generators, dtype=float))
        if g.shape[0] == 0 or g.shape[1] == 0:
            raise ValueError("empty generator set")
        if np.any(g < 0):
            raise ValueError("generator entries must be non-negative")
        if np.any(~g.any(axis=1)):
            raise ValueError("generator set contains an identically zero generator")
        object.__setattr__(self, "generators", g)

    @property
    def n_generators(self) -> int:
        return self.generators.shape[0]

    @property
    def design(self) -> np.ndarray:
        """``(N, N_g)`` matrix with generators as columns."""
        return self.generators.T


@dataclass(frozen=True)
class FitResult:
    weights: np.ndarray
    residual_sq: float
    steps_taken: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = [float(w) for w in self.weights]
        return d


def _residual_sq(a, w, t) -> float:
    r = a @ w - t
    return float(r @ r)


def _as_gens(gens) -> GeneratorSet:
    return gens if isinstance(gens, GeneratorSet) else GeneratorSet(gens)


def fit_approx(target, gens, n_gd: int = 1, history: list | None = None) -> FitResult:
    """Clipped least squares followed by ``n_gd`` projected-gradient steps.

    The gradient steps use ``1/L`` with ``L`` the top eigenvalue of the Gram
    matrix, which makes the residual nonincreasing step by step. If ``history``
    is given, the residual after clipping and after every step is appended.
    """
    if n_gd < 0:
        raise ValueError("n_gd must be >= 0")
    gens = _as_gens(gens)
    a = gens.design
    t = np.asarray(target, dtype=float)
    if t.shape != (a.shape[0],):
        raise ValueError(f"target length {t.shape} does not match generators ({a.shape[0]})")
    w, *_ = np.linalg.lstsq(a, t, rcond=None)
    w = np.maximum(w, 0.0)
    gram = a.T @ a
    at_t = a.T @ t
    lip = float(np.linalg.eigvalsh(gram)[-1])
    if history is not None:
        history.append(_residual_sq(a, w, t))
    for _ in range(n_gd):
        w = np.maximum(w - (gram @ w - at_t) / lip, 0.0)
        if history is not None:
            history.append(_residual_sq(a, w, t))
    return FitResult(w, _residual_sq(a, w, t), n_gd)


def fit_exact(target, gens, max_iter: int | None = None) -> FitResult:
    """Lawson-Hanson active-set NNLS with a KKT check on exit."""
    gens = _as_gens(gens)
    a = gens.design
    t = np.asarray(target, dtype=float)
    n_g = a.shape[1]
    cap = 10 * n_g if max_iter is None else max_iter
    scale = max(1.0, float(np.abs(a.T @ t).max()))
    tol = 1e-12 * scale
    passive = np.zeros(n_g, dtype=bool)
    w = np.zeros(n_g)
    it = 0
    grad_neg = a.T @ (t - a @ w)  # negative gradient of 0.5 ||Aw - t||^2
    while np.any(~passive) and grad_neg[~passive].max() > tol:
        it += 1
        if it > cap:
            raise IterationLimitError(f"NNLS active-set iteration cap {cap} exceeded")
        j = int(np.argmax(np.where(passive, -np.inf, grad_neg)))
        passive[j] = True
        while True:
            z = np.zeros(n_g)
            z[passive], *_ = np.linalg.lstsq(a[:, passive], t, rcond=None)
            if np.all(z[passive] > 0):
                break
            it += 1
            if it > cap:
                raise IterationLimitError(f"NNLS active-set iteration cap {cap} exceeded")
            mask = passive & (z <= 0)
            alpha = np.min(w[mask] / (w[mask] - z[mask]))
            w = w + alpha * (z - w)
            passive &= w > tol
            w[~passive] = 0.0
        w = z
        grad_neg = a.T @ (t - a @ w)
    _check_kkt(a, t, w)
    return FitResult(w, _residual_sq(a, w, t), it)


def _check_kkt(a, t, w) -> None:
    grad = a.T @ (a @ w - t)
    scale = max(1.0, float(np.abs(a.T @ t).max()), float(np.abs(a).max()) ** 2)
    active = w <= 0
    if np.any(grad[active] < -KKT_TOL * scale) or np.any(np.abs(grad[~active]) > KKT_TOL * scale):
        raise IterationLimitError("NNLS solution failed the KKT check")


def nearby_loss(targets, gens, n_gd: int = 1, normalize: bool = True) -> float:
    """Sum of approximate cone-fit residuals over the neighbouring shading fields."""
    gens = _as_gens(gens)
    total = 0.0
    for t in targets:
        t = normalize_shading(t) if normalize else np.asarray(t, dtype=float)
        total += fit_approx(t, gens, n_gd).residual_sq
    return total


def barrier_loss(relit_intensity, orig_intensity, epsilon: float = 1e-6) -> float:
    p = np.asarray(relit_intensity, dtype=float)
    q = np.asarray(orig_intensity, dtype=float)
    diff = np.abs(p / p.mean() - q / q.mean())
    return float(np.mean(-np.log(diff + epsilon)))


def range_losses(relit) -> tuple[float, float]:
    relit = np.asarray(relit, dtype=float)
    under = float(np.mean(np.maximum(-relit, 0.0) ** 2))
    over = float(np.mean(np.maximum(relit - 1.0, 0.0) ** 2))
    return under, over


def pixel_uniformity_loss(relit_max, shading_min) -> float:
    relit_max = np.asarray(relit_max, dtype=float)
    shading_min = np.asarray(shading_min, dtype=float)
    return float(np.mean(-np.minimum(0.95 - relit_max, 0.0) + np.maximum(shading_min - 0.05, 0.0)))


def write_fit_json(path, result: FitResult) -> None:
    # json writes floats with repr, which round-trips exactly
    Path(path).write_text(json.dumps(result.to_dict(), indent=2) + "\n", encoding="utf-8")


def read_vector_csv(path) -> np.ndarray:
    """A flat vector from CSV: one value per line or comma separated, optional header."""
    text = Path(path).read_text(encoding="utf-8")
    values = []
    for lineno, line in enumerate(text.splitlines(), 1):
        for tok in line.replace(";", ",").split(","):
            tok = tok.strip()
            if not tok:
                continue
            try:
                values.append(float(tok))
            except ValueError:
                if lineno == 1:
                    continue
                raise ValueError(f"{path}:{lineno}: not a number: {tok!r}") from None
    return np.asarray(values)
