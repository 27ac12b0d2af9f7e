"""Pure numpy fallbacks for the compiled kernels in ``_kernels_ext.pyx``.

Both backends accept the same arguments and return the same values up to
floating-point summation order.
"""

import numpy as np


def _taps(x, half_width):
    x = np.asarray(x, dtype=np.float64)
    win = 0.5 * (1.0 + np.cos(np.pi * x / half_width))
    out = np.sinc(x) * win
    out[np.abs(x) >= half_width] = 0.0
    return out


def _axis_images(s, m, length, b_low, b_high, n):
    q = np.arange(-n, n + 1)
    d, order, gain = [], [], []
    for i in (0, 1):
        d.append((1 - 2 * i) * s + 2 * q * length - m)
        order.append(np.abs(q - i) + np.abs(q))
        gain.append(b_low ** np.abs(q - i) * b_high ** np.abs(q))
    return np.concatenate(d), np.concatenate(order), np.concatenate(gain)


def image_source_rir(room, src, mic, beta, fs, c, n_samples, max_order,
                     amp_floor, half_width):
    room = np.asarray(room, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    max_dist = (n_samples + half_width) * c / fs
    axes = []
    for ax in range(3):
        n = int(max_dist / (2.0 * room[ax])) + 1
        axes.append(_axis_images(src[ax], mic[ax], room[ax],
                                 beta[2 * ax], beta[2 * ax + 1], n))
    (dx, ox, gx), (dy, oy, gy), (dz, oz, gz) = axes

    out = np.zeros(n_samples)
    hw = float(half_width)
    # loop over x images to bound memory; the y-z plane is vectorized
    dyz2 = dy[:, None] ** 2 + dz[None, :] ** 2
    oyz = oy[:, None] + oz[None, :]
    gyz = gy[:, None] * gz[None, :]
    for xi in range(dx.size):
        order = ox[xi] + oyz
        dist = np.sqrt(dx[xi] ** 2 + dyz2)
        delay = dist / c * fs
        keep = delay < n_samples + hw
        if max_order >= 0:
            keep &= order <= max_order
        if not keep.any():
            continue
        gain = gx[xi] * gyz / (4.0 * np.pi * dist)
        keep &= gain >= amp_floor
        if not keep.any():
            continue
        delay = delay[keep]
        gain = gain[keep]
        n0 = np.floor(delay).astype(np.int64)
        offsets = np.arange(-half_width + 1, half_width + 1)
        idx = n0[:, None] + offsets[None, :]
        vals = gain[:, None] * _taps(idx - delay[:, None], hw)
        valid = (idx >= 0) & (idx < n_samples)
        out += np.bincount(idx[valid], weights=vals[valid], minlength=n_samples)
    return out


def weighted_outer_sum(frames, weights):
    """frames (K, M, L), weights (K, L) -> (K, M, M) exactly Hermitian."""
    frames = np.asarray(frames, dtype=np.complex128)
    weights = np.asarray(weights, dtype=np.float64)
    out = np.einsum("kil,kjl->kij", frames * weights[:, None, :], frames.conj())
    return 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))
