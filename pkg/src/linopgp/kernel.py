"""Squared-exponential ARD kernel and its derivative / antiderivative factors.

The base covariance is

    k(x, x') = variance * exp(-1/2 * sum_d w_d (x_d - x'_d)^2)

and factorises over dimensions. Every operator-transformed kernel used in
this package is a product of per-dimension factors built from

* g(tau) = exp(-w tau^2 / 2) and its derivatives (Hermite recursion),
* Phi(z) = int_0^z g, the first antiderivative,
* h(z) = z Phi(z) + g(z) / w, the second antiderivative.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from . import _backend
from .errors import CapabilityError, InvalidArgumentError

MAX_TOTAL_ORDER = 4

# per-dimension action codes: >= 0 is a derivative order, INTEGRAL is int_0^x
INTEGRAL = -1


@dataclass(frozen=True)
class SEKernelParams:
    """Variance and ARD weights of the base kernel."""

    variance: float
    weights: tuple

    def __post_init__(self):
        weights = tuple(float(v) for v in np.atleast_1d(self.weights))
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "variance", float(self.variance))
        if not self.variance > 0 or not np.isfinite(self.variance):
            raise InvalidArgumentError(f"variance must be positive, got {self.variance}")
        if len(weights) == 0:
            raise InvalidArgumentError("at least one ARD weight is required")
        if not all(v > 0 and np.isfinite(v) for v in weights):
            raise InvalidArgumentError(f"ARD weights must be positive, got {weights}")

    @property
    def dim(self):
        return len(self.weights)

    @property
    def w(self):
        return np.asarray(self.weights)


def _point(params, x, name="x"):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.shape[0] != params.dim:
        raise InvalidArgumentError(
            f"{name} has dimension {x.shape}, expected ({params.dim},)")
    return x


def _check_dim(params, dim):
    if not 0 <= int(dim) < params.dim:
        raise InvalidArgumentError(f"dim {dim} out of range for D={params.dim}")
    return int(dim)


# -- one-dimensional building blocks (vectorised over broadcast arrays) --

def gauss_primitive(z, w):
    """Phi(z) = int_0^z exp(-w s^2 / 2) ds."""
    return np.sqrt(np.pi / (2.0 * w)) * erf(np.sqrt(w / 2.0) * np.asarray(z, dtype=float))


def gauss_double_primitive(z, w):
    """h(z) with h'' = g, h'(0) = 0 and h(0) = 1/w. Even in z."""
    z = np.asarray(z, dtype=float)
    return z * gauss_primitive(z, w) + np.exp(-0.5 * w * z * z) / w


def gauss_deriv(z, w, k):
    """k-th derivative of g; k = -1 gives the primitive Phi."""
    if k < 0:
        return gauss_primitive(z, w)
    z = np.asarray(z, dtype=float)
    return _backend.hermite_deriv(z, w, k).reshape(z.shape)


def factor_1d(left, right, a, b, w):
    """Per-dimension factor of (A_left x A_right) k for actions on one coordinate.

    ``left``/``right`` are derivative orders (>= 0) or ``INTEGRAL``. ``a`` and
    ``b`` are the coordinates of the first and second argument.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if left >= 0 and right >= 0:
        f = gauss_deriv(a - b, w, left + right)
        return -f if right % 2 else f
    if left == INTEGRAL and right == INTEGRAL:
        h0 = 1.0 / w
        return (gauss_double_primitive(a, w) + gauss_double_primitive(b, w)
                - gauss_double_primitive(a - b, w) - h0)
    if left == INTEGRAL:
        # d^n/db^n [Phi(a - b) + Phi(b)]
        sign = -1.0 if right % 2 else 1.0
        return sign * gauss_deriv(a - b, w, right - 1) + gauss_deriv(b, w, right - 1)
    # d^m/da^m [Phi(a) - Phi(a - b)]
    return gauss_deriv(a, w, left - 1) - gauss_deriv(a - b, w, left - 1)


# -- public scalar operations --

def se_eval(params, x, x2):
    x = _point(params, x)
    x2 = _point(params, x2, "x2")
    return params.variance * float(np.exp(-0.5 * np.sum(params.w * (x - x2) ** 2)))


def se_partial(params, x, x2, orders_left, orders_right):
    """Mixed partial derivative d^m/dx^m d^n/dx2^n of the base kernel."""
    x = _point(params, x)
    x2 = _point(params, x2, "x2")
    m = np.asarray(orders_left, dtype=int).reshape(-1)
    n = np.asarray(orders_right, dtype=int).reshape(-1)
    if m.shape[0] != params.dim or n.shape[0] != params.dim:
        raise InvalidArgumentError("derivative orders must have one entry per dimension")
    if np.any(m < 0) or np.any(n < 0):
        raise InvalidArgumentError("derivative orders must be non-negative")
    if np.any(m + n > MAX_TOTAL_ORDER):
        raise CapabilityError(
            f"per-dimension derivative order above {MAX_TOTAL_ORDER} is not supported")
    val = _backend.deriv_product(x[None, :], x2[None, :], params.w, m, n)[0]
    return params.variance * float(val)


def se_antideriv(params, dim, x, x2, side="left"):
    """Integral of the base kernel from 0 to x[dim] (side='left') or x2[dim] ('right')."""
    dim = _check_dim(params, dim)
    x = _point(params, x)
    x2 = _point(params, x2, "x2")
    if side not in ("left", "right"):
        raise InvalidArgumentError(f"side must be 'left' or 'right', got {side!r}")
    left, right = (INTEGRAL, 0) if side == "left" else (0, INTEGRAL)
    return _factored(params, dim, x, x2, left, right)


def se_double_antideriv(params, dim, x, x2):
    """int_0^{x[dim]} int_0^{x2[dim]} of the base kernel along one dimension."""
    dim = _check_dim(params, dim)
    x = _point(params, x)
    x2 = _point(params, x2, "x2")
    return _factored(params, dim, x, x2, INTEGRAL, INTEGRAL)


def _factored(params, dim, x, x2, left, right):
    w = params.w
    rest = params.variance
    for d in range(params.dim):
        if d != dim:
            rest *= np.exp(-0.5 * w[d] * (x[d] - x2[d]) ** 2)
    return float(rest * factor_1d(left, right, x[dim], x2[dim], w[dim]))
