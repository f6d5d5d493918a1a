"""Pure-numpy fallback for the compiled kernels.

Numerically equivalent to gridvlad._kernels (same argmin tie rule, same
clipping); float summation order differs, so results agree to rounding
error rather than bitwise.
"""

import numpy as np

# Cap on the temporary (block x K x D) distance tensor.
_BLOCK_ELEMENTS = 4_000_000


def nearest_centers(x, centers):
    x = np.ascontiguousarray(x, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    if centers.shape[1] != x.shape[1]:
        raise ValueError(
            f"dimension mismatch: descriptors {x.shape[1]}, centers {centers.shape[1]}"
        )
    if centers.shape[0] == 0:
        raise ValueError("need at least one center")

    n = x.shape[0]
    k, d = centers.shape
    idx = np.empty(n, dtype=np.int64)
    d2 = np.empty(n, dtype=np.float64)
    block = max(1, _BLOCK_ELEMENTS // max(1, k * d))
    for start in range(0, n, block):
        stop = min(start + block, n)
        diff = x[start:stop, None, :] - centers[None, :, :]
        dist = np.einsum("bkd,bkd->bk", diff, diff)
        idx[start:stop] = np.argmin(dist, axis=1)
        d2[start:stop] = dist[np.arange(stop - start), idx[start:stop]]
    return idx, d2


def residual_sums(x, centers, idx):
    x = np.ascontiguousarray(x, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    idx = np.asarray(idx, dtype=np.int64)
    if centers.shape[1] != x.shape[1]:
        raise ValueError(
            f"dimension mismatch: descriptors {x.shape[1]}, centers {centers.shape[1]}"
        )
    if idx.shape[0] != x.shape[0]:
        raise ValueError("assignment length does not match descriptor count")

    k = centers.shape[0]
    out = np.zeros((k, x.shape[1]), dtype=np.float64)
    np.add.at(out, idx, x)
    counts = np.bincount(idx, minlength=k).astype(np.float64)
    out -= counts[:, None] * centers
    return out


def dcd_epoch(x, y, alpha, w, c_reg, qdiag, perm):
    maxviol = 0.0
    for i in perm:
        g = float(np.dot(w, x[i])) * y[i] - 1.0

        if alpha[i] == 0.0:
            pg = g if g < 0.0 else 0.0
        elif alpha[i] == c_reg:
            pg = g if g > 0.0 else 0.0
        else:
            pg = g
        if abs(pg) > maxviol:
            maxviol = abs(pg)

        if pg != 0.0:
            a_old = alpha[i]
            a_new = min(max(a_old - g / qdiag[i], 0.0), c_reg)
            alpha[i] = a_new
            delta = (a_new - a_old) * y[i]
            if delta != 0.0:
                w += delta * x[i]
    return maxviol
