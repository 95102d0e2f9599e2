# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled visibility and interreflection-kernel assembly.

Mirrors :mod:`radcone._pykernels` operation for operation; the two backends
are checked against each other in the test suite.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

cdef double PI = 3.141592653589793


cdef inline bint _blocked(const double[:, ::1] centers,
                          const double[:, ::1] edge_u,
                          const double[:, ::1] edge_v,
                          Py_ssize_t i, Py_ssize_t j, double eps) noexcept nogil:
    cdef Py_ssize_t k, n = centers.shape[0]
    cdef double dx, dy, dz, seglen, nx, ny, nz, nn, denom, tau
    cdef double wx, wy, wz, a, b, hx, hy, hz
    cdef double ux, uy, uz, vx, vy, vz
    dx = centers[j, 0] - centers[i, 0]
    dy = centers[j, 1] - centers[i, 1]
    dz = centers[j, 2] - centers[i, 2]
    seglen = sqrt(dx * dx + dy * dy + dz * dz)
    for k in range(n):
        if k == i or k == j:
            continue
        ux = edge_u[k, 0]; uy = edge_u[k, 1]; uz = edge_u[k, 2]
        vx = edge_v[k, 0]; vy = edge_v[k, 1]; vz = edge_v[k, 2]
        nx = uy * vz - uz * vy
        ny = uz * vx - ux * vz
        nz = ux * vy - uy * vx
        denom = dx * nx + dy * ny + dz * nz
        if denom == 0.0:
            continue
        tau = ((centers[k, 0] - centers[i, 0]) * nx
               + (centers[k, 1] - centers[i, 1]) * ny
               + (centers[k, 2] - centers[i, 2]) * nz) / denom
        if tau * seglen <= eps or (1.0 - tau) * seglen <= eps:
            continue
        hx = centers[i, 0] + tau * dx
        hy = centers[i, 1] + tau * dy
        hz = centers[i, 2] + tau * dz
        wx = hx - centers[k, 0]
        wy = hy - centers[k, 1]
        wz = hz - centers[k, 2]
        nn = nx * nx + ny * ny + nz * nz
        # a = ((w x v) . n) / |n|^2, b = ((u x w) . n) / |n|^2
        a = ((wy * vz - wz * vy) * nx + (wz * vx - wx * vz) * ny
             + (wx * vy - wy * vx) * nz) / nn
        b = ((uy * wz - uz * wy) * nx + (uz * wx - ux * wz) * ny
             + (ux * wy - uy * wx) * nz) / nn
        if fabs(a) <= 0.5 and fabs(b) <= 0.5:
            return True
    return False


def segment_blocked(const double[:, ::1] centers, const double[:, ::1] edge_u,
                    const double[:, ::1] edge_v, Py_ssize_t i, Py_ssize_t j,
                    double eps=1e-9):
    return bool(_blocked(centers, edge_u, edge_v, i, j, eps))


def visibility_matrix(const double[:, ::1] centers, const double[:, ::1] edge_u,
                      const double[:, ::1] edge_v, double eps=1e-9):
    cdef Py_ssize_t n = centers.shape[0]
    cdef Py_ssize_t i, j
    out = np.zeros((n, n), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] vis = out
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                if not _blocked(centers, edge_u, edge_v, i, j, eps):
                    vis[i, j] = 1
                    vis[j, i] = 1
    return out


def kernel_matrix(const double[:, ::1] centers, const double[:, ::1] normals,
                  const double[::1] areas, const cnp.uint8_t[:, ::1] vis):
    cdef Py_ssize_t n = centers.shape[0]
    cdef Py_ssize_t i, j
    cdef double dx, dy, dz, r2, ci, cj
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] k = out
    with nogil:
        for i in range(n):
            for j in range(n):
                if i == j or vis[i, j] == 0:
                    continue
                dx = centers[j, 0] - centers[i, 0]
                dy = centers[j, 1] - centers[i, 1]
                dz = centers[j, 2] - centers[i, 2]
                ci = normals[i, 0] * dx + normals[i, 1] * dy + normals[i, 2] * dz
                cj = -(normals[j, 0] * dx + normals[j, 1] * dy + normals[j, 2] * dz)
                if ci <= 0.0 or cj <= 0.0:
                    continue
                r2 = dx * dx + dy * dy + dz * dz
                k[i, j] = ci * cj / (PI * r2 * r2) * areas[j]
    return out
