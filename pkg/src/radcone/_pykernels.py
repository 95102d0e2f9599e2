"""Pure numpy fallback for the visibility and kernel assembly loops."""

import numpy as np


def _blocked_row(centers, edge_u, edge_v, i, targets, eps):
    """Return a bool per target j: is the segment center_i -> center_j occluded."""
    d = centers[targets] - centers[i]  # (m, 3)
    seglen = np.sqrt(np.einsum("ij,ij->i", d, d))
    nvec = np.cross(edge_u, edge_v)  # (n, 3)
    nn = np.einsum("ij,ij->i", nvec, nvec)
    denom = d @ nvec.T  # (m, n)
    num = np.einsum("kj,kj->k", centers - centers[i], nvec)  # (n,)
    # parallel occluders give inf/nan tau; they are masked out by ``ok``
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = num[None, :] / denom
        ok = denom != 0.0
        ok &= tau * seglen[:, None] > eps
        ok &= (1.0 - tau) * seglen[:, None] > eps
        # hit point relative to occluder center
        w = centers[i][None, None, :] + tau[:, :, None] * d[:, None, :] - centers[None, :, :]
        wxv = np.cross(w, edge_v[None, :, :])
        uxw = np.cross(edge_u[None, :, :], w)
        a = np.einsum("mkc,kc->mk", wxv, nvec) / nn
        b = np.einsum("mkc,kc->mk", uxw, nvec) / nn
    hit = ok & (np.abs(a) <= 0.5) & (np.abs(b) <= 0.5)
    hit[:, i] = False
    hit[np.arange(len(targets)), targets] = False
    return hit.any(axis=1)


def segment_blocked(centers, edge_u, edge_v, i, j, eps=1e-9):
    return bool(_blocked_row(centers, edge_u, edge_v, i, np.array([j]), eps)[0])


def visibility_matrix(centers, edge_u, edge_v, eps=1e-9):
    n = centers.shape[0]
    vis = np.zeros((n, n), dtype=np.uint8)
    for i in range(n - 1):
        targets = np.arange(i + 1, n)
        blocked = _blocked_row(centers, edge_u, edge_v, i, targets, eps)
        vis[i, targets] = ~blocked
    return vis | vis.T


def kernel_matrix(centers, normals, areas, vis):
    d = centers[None, :, :] - centers[:, None, :]  # d[i, j] = c_j - c_i
    ci = np.einsum("ic,ijc->ij", normals, d)
    cj = -np.einsum("jc,ijc->ij", normals, d)
    r2 = np.einsum("ijc,ijc->ij", d, d)
    np.fill_diagonal(r2, 1.0)
    k = np.maximum(ci, 0.0) * np.maximum(cj, 0.0) / (np.pi * r2 * r2) * areas[None, :]
    k[vis == 0] = 0.0
    np.fill_diagonal(k, 0.0)
    return k
