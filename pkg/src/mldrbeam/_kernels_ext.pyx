# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Semantics mirror ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, floor, fabs, pow, M_PI

cnp.import_array()


cdef inline void _add_taps(double* out, Py_ssize_t n_samples, double gain, double delay,
                           int half_width) nogil:
    # Hann-windowed sinc taps at n0 - W + 1 .. n0 + W. With f = delay - n0 and
    # x = k - f: sin(pi x) = -(-1)^k sin(pi f); the window cosine is rotated
    # by pi / W per tap.
    cdef int n0 = <int>floor(delay)
    cdef double f = delay - n0
    cdef double hw = <double>half_width
    # sin(pi f) = sin(pi (1 - f)); the smaller argument avoids cancellation near f = 1
    cdef double sf = sin(M_PI * f) if f < 0.5 else sin(M_PI * (1.0 - f))
    cdef double th = M_PI / hw
    cdef double ct = cos(th), st = sin(th)
    cdef int k0 = 1 - half_width
    cdef double a = M_PI * (k0 - f) / hw
    cdef double ca = cos(a), sa = sin(a), tmp, x, s
    cdef int k, n
    for k in range(k0, half_width + 1):
        n = n0 + k
        x = k - f
        if 0 <= n < n_samples and fabs(x) < hw:
            if x == 0.0:
                s = 1.0
            else:
                s = (sf if (k & 1) else -sf) / (M_PI * x)
            out[n] += gain * s * 0.5 * (1.0 + ca)
        tmp = ca * ct - sa * st
        sa = sa * ct + ca * st
        ca = tmp


cdef double[::1] _axis_gains(double b_low, double b_high, int n):
    # gains for q in -n..n (index q + n), image parity i in {0, 1} (offset i * (2n + 1))
    cdef double[::1] g = np.empty(2 * (2 * n + 1), dtype=np.float64)
    cdef int q, i
    for i in range(2):
        for q in range(-n, n + 1):
            g[i * (2 * n + 1) + q + n] = pow(b_low, abs(q - i)) * pow(b_high, abs(q))
    return g


def image_source_rir(double[::1] room, double[::1] src, double[::1] mic,
                     double[::1] beta, double fs, double c, Py_ssize_t n_samples,
                     int max_order, double amp_floor, int half_width):
    cdef double[::1] out = np.zeros(n_samples, dtype=np.float64)
    cdef double lx = room[0], ly = room[1], lz = room[2]
    cdef double max_dist = (n_samples + half_width) * c / fs
    cdef int nx = <int>(max_dist / (2.0 * lx)) + 1
    cdef int ny = <int>(max_dist / (2.0 * ly)) + 1
    cdef int nz = <int>(max_dist / (2.0 * lz)) + 1
    cdef double[::1] tgx = _axis_gains(beta[0], beta[1], nx)
    cdef double[::1] tgy = _axis_gains(beta[2], beta[3], ny)
    cdef double[::1] tgz = _axis_gains(beta[4], beta[5], nz)
    cdef int qx, qy, qz, ix, iy, iz, ox, oy, oz
    cdef double dx, dy, dz, gx, gy, dist, delay, gain, dxy2
    cdef double hw = <double>half_width
    with nogil:
        for qx in range(-nx, nx + 1):
            for ix in range(2):
                dx = (1 - 2 * ix) * src[0] + 2 * qx * lx - mic[0]
                ox = abs(qx - ix) + abs(qx)
                gx = tgx[ix * (2 * nx + 1) + qx + nx]
                for qy in range(-ny, ny + 1):
                    for iy in range(2):
                        dy = (1 - 2 * iy) * src[1] + 2 * qy * ly - mic[1]
                        oy = abs(qy - iy) + abs(qy)
                        gy = tgy[iy * (2 * ny + 1) + qy + ny]
                        dxy2 = dx * dx + dy * dy
                        if dxy2 > max_dist * max_dist:
                            continue
                        for qz in range(-nz, nz + 1):
                            for iz in range(2):
                                oz = abs(qz - iz) + abs(qz)
                                if max_order >= 0 and ox + oy + oz > max_order:
                                    continue
                                dz = (1 - 2 * iz) * src[2] + 2 * qz * lz - mic[2]
                                dist = sqrt(dxy2 + dz * dz)
                                delay = dist / c * fs
                                if delay >= n_samples + hw:
                                    continue
                                gain = gx * gy * tgz[iz * (2 * nz + 1) + qz + nz] / (4.0 * M_PI * dist)
                                if gain < amp_floor:
                                    continue
                                _add_taps(&out[0], n_samples, gain, delay, half_width)
    return np.asarray(out)


def weighted_outer_sum(const double complex[:, :, ::1] frames,
                       const double[:, ::1] weights):
    """frames (K, M, L), weights (K, L) -> (K, M, M) exactly Hermitian."""
    cdef Py_ssize_t K = frames.shape[0], M = frames.shape[1], L = frames.shape[2]
    out_arr = np.zeros((K, M, M), dtype=np.complex128)
    cdef double complex[:, :, ::1] out = out_arr
    cdef Py_ssize_t k, i, j, l
    cdef double complex acc
    cdef double re, im
    for k in range(K):
        for i in range(M):
            for j in range(i, M):
                re = 0.0
                im = 0.0
                for l in range(L):
                    # y_i * conj(y_j) * w
                    re += weights[k, l] * (frames[k, i, l].real * frames[k, j, l].real
                                           + frames[k, i, l].imag * frames[k, j, l].imag)
                    im += weights[k, l] * (frames[k, i, l].imag * frames[k, j, l].real
                                           - frames[k, i, l].real * frames[k, j, l].imag)
                if i == j:
                    im = 0.0
                out[k, i, j] = re + 1j * im
                out[k, j, i] = re - 1j * im
    return out_arr
