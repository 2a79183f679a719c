"""Pure numpy implementations of the hot kernels.

Both functions have a drop-in Cython twin in ``_ckernels.pyx``; see
``_backend`` for the selection logic.
"""
import numpy as np

_CHUNK = 1 << 20


def hermite_deriv(tau, w, k):
    """k-th derivative of exp(-w tau^2 / 2) with respect to tau."""
    tau = np.asarray(tau, dtype=float)
    sw = np.sqrt(w)
    s = sw * tau
    he_prev = np.ones_like(s)
    he = s if k >= 1 else he_prev
    for j in range(1, k):
        he_prev, he = he, s * he - j * he_prev
    return (-sw) ** k * he * np.exp(-0.5 * s * s)


def deriv_product(A, B, w, lord, rord):
    """Product over dimensions of (-1)^n g^(m+n)(a_d - b_d).

    ``A`` and ``B`` are (P, D) arrays of paired coordinates. Dimensions where
    either order is negative are skipped (factor 1).
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    out = np.ones(A.shape[0])
    for d in range(A.shape[1]):
        m, n = int(lord[d]), int(rord[d])
        if m < 0 or n < 0:
            continue
        f = hermite_deriv(A[:, d] - B[:, d], w[d], m + n)
        if n % 2:
            f = -f
        out *= f
    return out


def spectral_sum(tau, omega, cw, sw):
    """sum_k cw[k] cos(omega[k] tau) + sw[k] sin(omega[k] tau) for each tau.

    ``cw`` and ``sw`` may be (N, M) to evaluate M weight sets at once; the
    result is then (P, M).
    """
    tau = np.asarray(tau, dtype=float).ravel()
    omega = np.asarray(omega, dtype=float)
    cw = np.asarray(cw, dtype=float)
    sw = np.asarray(sw, dtype=float)
    out = np.empty((tau.shape[0],) + cw.shape[1:])
    rows = max(1, _CHUNK // max(1, omega.shape[0]))
    for start in range(0, tau.shape[0], rows):
        phase = np.multiply.outer(tau[start:start + rows], omega)
        out[start:start + rows] = np.cos(phase) @ cw + np.sin(phase) @ sw
    return out
