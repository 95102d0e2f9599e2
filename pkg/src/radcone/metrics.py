"""Distribution distances on precomputed embeddings: FID, extrapolated FID,
MSD diversity and the local (single-image) FID."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np

PSD_TOL = 1e-10
DEFAULT_EIG_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    points: np.ndarray  # (N, d)

    def __post_init__(self):
        x = np.asarray(self.points, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"embeddings must be an (N, d) matrix, got shape {x.shape}")
        if x.shape[0] < 2:
            raise ValueError("need at least two embedding points")
        if not np.all(np.isfinite(x)):
            raise ValueError("embeddings contain non-finite values")
        object.__setattr__(self, "points", x)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @cached_property
    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)

    @cached_property
    def cov(self) -> np.ndarray:
        # 1/N normalization keeps the single-point replacement algebra exact
        y = self.points - self.mean
        c = y.T @ y / self.points.shape[0]
        return 0.5 * (c + c.T)

    def subset(self, idx) -> "EmbeddingSet":
        return EmbeddingSet(self.points[idx])

    def replaced(self, k: int, point) -> "EmbeddingSet":
        x = self.points.copy()
        x[k] = point
        return EmbeddingSet(x)


def _as_set(x) -> EmbeddingSet:
    return x if isinstance(x, EmbeddingSet) else EmbeddingSet(x)


def _psd_eigh(c, what="covariance"):
    w, v = np.linalg.eigh(c)
    tol = PSD_TOL * max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.min(initial=0.0) < -tol:
        raise ValueError(f"{what} is not positive semidefinite (eigenvalue {w.min():.3g})")
    return np.maximum(w, 0.0), v


def trace_sqrt_product(ca, cb) -> float:
    """``Tr sqrt(Ca Cb)`` through the symmetric form ``sqrt(Ca^1/2 Cb Ca^1/2)``."""
    w, v = _psd_eigh(ca)
    half = (v * np.sqrt(w)) @ v.T
    inner = half @ cb @ half
    inner = 0.5 * (inner + inner.T)
    s, _ = _psd_eigh(inner, "covariance product")
    return float(np.sqrt(s).sum())


def fid(a, b) -> float:
    a, b = _as_set(a), _as_set(b)
    if a.dim != b.dim:
        raise ValueError(f"embedding dimensions differ: {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    tr = np.trace(a.cov) + np.trace(b.cov) - 2.0 * trace_sqrt_product(a.cov, b.cov)
    return float(diff @ diff + tr)


class FidInfinityFit(NamedTuple):
    intercept: float
    slope: float
    intercept_se: float
    sizes: np.ndarray
    fids: np.ndarray
    ols_se: float


def _extrapolate(a, b, sizes, key):
    fids = np.empty(sizes.shape[0])
    for i, m in enumerate(sizes):
        rng = np.random.default_rng(np.random.SeedSequence([*key, i]))
        ia = rng.choice(len(a), size=m, replace=False)
        ib = rng.choice(len(b), size=m, replace=False)
        fids[i] = fid(a.subset(ia), b.subset(ib))
    x = 1.0 / sizes
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, fids, rcond=None)
    resid = fids - design @ coef
    sigma2 = float(resid @ resid) / max(sizes.shape[0] - 2, 1)
    ols_se = float(np.sqrt(sigma2 * np.linalg.inv(design.T @ design)[0, 0]))
    return fids, coef, ols_se


def fid_infinity_fit(a, b, n_sizes: int = 15, seed: int = 0, min_frac: float = 0.1,
                     n_boot: int = 30) -> FidInfinityFit:
    """FID on random subsamples of growing size, extrapolated linearly in ``1/N``.

    Sizes run evenly from ``min_frac * N`` to ``N`` (``N`` the smaller set);
    the subsample at each size uses its own seeded stream.

    Every size subsamples the same two point sets, so the residual scatter of
    the line misses the set-to-set fluctuation of the intercept. The reported
    ``intercept_se`` is therefore the spread of the intercept over ``n_boot``
    bootstrap resamples of both sets; ``ols_se`` keeps the regression value,
    and ``n_boot=0`` falls back to it.
    """
    a, b = _as_set(a), _as_set(b)
    n = min(len(a), len(b))
    n_min = int(np.floor(min_frac * n))
    if n_sizes < 2:
        raise ValueError("need at least two subsample sizes")
    if n_min < 2 or n < 2 * n_min:
        raise ValueError(f"sets of {len(a)} and {len(b)} points are too small to extrapolate")
    sizes = np.unique(np.linspace(n_min, n, n_sizes).astype(int))
    if sizes.shape[0] < 2:
        raise ValueError("subsample sizes collapse to a single value")
    fids, coef, ols_se = _extrapolate(a, b, sizes, [seed])
    se = ols_se
    if n_boot > 1:
        boot = np.empty(n_boot)
        for k in range(n_boot):
            rng = np.random.default_rng(np.random.SeedSequence([seed, 1_000_000 + k]))
            aa = a.subset(rng.integers(0, len(a), len(a)))
            bb = b.subset(rng.integers(0, len(b), len(b)))
            boot[k] = _extrapolate(aa, bb, sizes, [seed, 2_000_000 + k])[1][0]
        se = float(np.std(boot, ddof=1))
    return FidInfinityFit(float(coef[0]), float(coef[1]), se, sizes, fids, ols_se)


def fid_infinity(a, b, n_sizes: int = 15, seed: int = 0) -> float:
    return fid_infinity_fit(a, b, n_sizes, seed, n_boot=0).intercept


def msd(originals, relights) -> float:
    """RMS difference between each original and its mean-matched relight."""
    if len(originals) != len(relights):
        raise ValueError("originals and relights must be paired")
    total = 0.0
    count = 0
    for img, rel in zip(originals, relights):
        img = np.asarray(img, dtype=float)
        rel = np.asarray(rel, dtype=float)
        if img.shape != rel.shape:
            raise ValueError(f"pair shapes differ: {img.shape} vs {rel.shape}")
        m = rel.mean()
        if m == 0:
            raise ValueError("relight has zero mean")
        d = img - rel * (img.mean() / m)
        total += float(np.sum(d * d))
        count += d.size
    if count == 0:
        raise ValueError("no pixels to compare")
    return float(np.sqrt(total / count))


def sylvester_diag(c_diag, u) -> np.ndarray:
    """Solve ``C M + M C = C U`` for diagonal ``C``."""
    c = np.asarray(c_diag, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(c <= 0):
        raise ValueError("diagonal entries must be positive")
    m = c[:, None] * u / (c[:, None] + c[None, :])
    cu = c[:, None] * u
    resid = c[:, None] * m + m * c[None, :] - cu
    scale = float(np.abs(cu).max(initial=0.0))
    if np.abs(resid).max(initial=0.0) > 1e-10 * scale:
        raise ArithmeticError("Sylvester residual check failed")
    return m


@dataclass(frozen=True, eq=False)
class LfidInputs:
    base_set: EmbeddingSet
    index_k: int
    relit_point: np.ndarray

    def __post_init__(self):
        base = _as_set(self.base_set)
        object.__setattr__(self, "base_set", base)
        if not 0 <= self.index_k < len(base):
            raise ValueError(f"index {self.index_k} out of range for {len(base)} points")
        p = np.asarray(self.relit_point, dtype=float)
        if p.shape != (base.dim,):
            raise ValueError(f"relit point has shape {p.shape}, expected ({base.dim},)")
        object.__setattr__(self, "relit_point", p)

    @property
    def d_k(self) -> np.ndarray:
        return self.relit_point - self.base_set.points[self.index_k]


def _eig_basis(base: EmbeddingSet, eig_floor: float):
    key = "_lfid_eig"
    cached = base.__dict__.get(key)
    if cached is not None and cached[0] == eig_floor:
        return cached[1], cached[2]
    w, v = np.linalg.eigh(base.cov)
    lam_max = float(w.max())
    if not lam_max > 0:
        raise ValueError("base covariance is zero")
    floor = eig_floor * lam_max
    w = np.maximum(w, floor)
    base.__dict__[key] = (eig_floor, w, v)
    return w, v


def lfid(inputs: LfidInputs, eig_floor: float = DEFAULT_EIG_FLOOR) -> float:
    """Second-order estimate of ``N^2`` times the FID change from replacing one point."""
    base = inputs.base_set
    lam, q = _eig_basis(base, eig_floor)
    d = q.T @ inputs.d_k
    y = q.T @ (base.points[inputs.index_k] - base.mean)
    u = np.outer(d, y) + np.outer(y, d) + np.outer(d, d)
    m1 = sylvester_diag(lam, u)
    # Tr[C^-1 M1^2] = sum_ij m_ij m_ji / c_i
    second = float(np.sum(m1 * m1.T / lam[:, None]))
    return float(d @ d) + second


def local_fid_ranking(base, candidates, eig_floor: float = DEFAULT_EIG_FLOOR):
    """``[(index, relit_point, lfid)]`` sorted ascending by lfid, stable on ties."""
    base = _as_set(base)
    scored = []
    for idx, point in candidates:
        val = lfid(LfidInputs(base, int(idx), point), eig_floor)
        scored.append((int(idx), np.asarray(point, dtype=float), val))
    return sorted(scored, key=lambda item: item[2])


def read_matrix(path, fmt: str | None = None) -> np.ndarray:
    """An ``(N, d)`` float matrix from ``.npy`` or CSV (one row per line, optional header)."""
    path = Path(path)
    fmt = fmt or ("npy" if path.suffix == ".npy" else "csv")
    if fmt == "npy":
        return np.atleast_2d(np.load(path, allow_pickle=False)).astype(float)
    if fmt != "csv":
        raise ValueError(f"unknown matrix format {fmt!r}")
    rows = []
    width = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(t) for t in line.split(",")]
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: non-numeric entry") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows)


def load_embeddings(path, fmt: str | None = None) -> EmbeddingSet:
    return EmbeddingSet(read_matrix(path, fmt))
