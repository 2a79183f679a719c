"""Parametric linear operators and the kernels they induce.

An operator is a sum of scaled atomic terms,

    L u = sum_j c_j A_j u,

where each coefficient c_j is a fixed number, optionally multiplied by a
named parameter. Applying L to one or both arguments of the base kernel
expands bilinearly into atomic pairs (A_j x A_l) k. Pairs of derivatives,
integrals and identities have closed forms (see ``kernel.factor_1d``);
pairs involving a fractional derivative are evaluated in the frequency
domain, where the Riemann-Liouville (Weyl) derivative of order alpha acts
as the multiplier (i omega)^alpha.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _backend
from .errors import CapabilityError, ConfigurationError, InvalidArgumentError, NumericalError
from .kernel import INTEGRAL, SEKernelParams, factor_1d

SPECTRAL_NODES = 4001
SPECTRAL_CUTOFF = 8.5
SPECTRAL_TOL = 1e-7


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class PartialDeriv:
    dim: int
    order: int


@dataclass(frozen=True)
class IntegralFromZero:
    dim: int


@dataclass(frozen=True)
class FractionalDeriv:
    dim: int
    order_param: str


@dataclass(frozen=True)
class Term:
    """``scale * [param] * atom``; ``param`` is None for a fixed coefficient."""

    atom: object
    scale: float = 1.0
    param: Optional[str] = None
    span: Optional[tuple] = field(default=None, compare=False)

    def coefficient(self, phi):
        if self.param is None:
            return self.scale
        return self.scale * phi[self.param]


@dataclass(frozen=True)
class OperatorExpr:
    terms: tuple
    dims: tuple = ("x",)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "dims", tuple(self.dims))
        if not self.terms:
            raise InvalidArgumentError("an operator needs at least one term")
        if len(set(self.dims)) != len(self.dims) or not self.dims:
            raise InvalidArgumentError(f"invalid dimension list {self.dims}")
        D = len(self.dims)
        coeff_slots, order_slots = set(), set()
        for t in self.terms:
            a = t.atom
            if isinstance(a, PartialDeriv) and a.order not in (1, 2):
                raise InvalidArgumentError(f"derivative order must be 1 or 2, got {a.order}")
            if hasattr(a, "dim") and not 0 <= a.dim < D:
                raise InvalidArgumentError(f"dimension index {a.dim} out of range")
            if isinstance(a, FractionalDeriv):
                if D != 1:
                    raise CapabilityError("fractional terms are only supported in one dimension")
                order_slots.add(a.order_param)
            if t.param is not None:
                coeff_slots.add(t.param)
        both = coeff_slots & order_slots
        if both:
            raise ConfigurationError(
                f"parameter {sorted(both)[0]!r} used both as a coefficient and a fractional order")

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def has_fractional(self):
        return any(isinstance(t.atom, FractionalDeriv) for t in self.terms)

    def params(self):
        """Parameter slot names in order of first appearance."""
        out = []
        for t in self.terms:
            for name in (t.param, getattr(t.atom, "order_param", None)):
                if name is not None and name not in out:
                    out.append(name)
        return out

    def order_params(self):
        return [t.atom.order_param for t in self.terms if isinstance(t.atom, FractionalDeriv)]

    def check_params(self, phi):
        for name in self.params():
            if name not in phi:
                raise ConfigurationError(f"missing value for operator parameter {name!r}")
            if not np.isfinite(phi[name]):
                raise InvalidArgumentError(f"parameter {name!r} is not finite")
        for name in self.order_params():
            if not phi[name] > 0:
                raise InvalidArgumentError(
                    f"fractional order {name!r} must be positive, got {phi[name]}")


IDENTITY = OperatorExpr((Term(Identity()),))


def _actions(atom, D):
    """Per-dimension action codes for the closed-form path, or None if spectral."""
    if isinstance(atom, FractionalDeriv):
        return None
    acts = [0] * D
    if isinstance(atom, PartialDeriv):
        acts[atom.dim] = atom.order
    elif isinstance(atom, IntegralFromZero):
        acts[atom.dim] = INTEGRAL
    return tuple(acts)


def _spectral_power(atom, phi):
    if isinstance(atom, Identity):
        return 0.0
    if isinstance(atom, PartialDeriv):
        return float(atom.order)
    if isinstance(atom, FractionalDeriv):
        return float(phi[atom.order_param])
    raise CapabilityError("fractional terms cannot be combined with integral terms")


def _side_terms(expr, side, phi):
    if side == "u":
        return [(1.0, Identity())]
    return [(t.coefficient(phi), t.atom) for t in expr.terms]


def spectral_nodes(w, n=SPECTRAL_NODES):
    """Half-range frequency nodes and trapezoid weights.

    Uses omega = W v^3 on v in [0, 1] so that |omega|^alpha endpoint
    singularities at the origin are smoothed out.
    """
    W = SPECTRAL_CUTOFF * np.sqrt(w)
    v = np.linspace(0.0, 1.0, n)
    omega = W * v ** 3
    h = 1.0 / (n - 1)
    wt = np.full(n, h)
    wt[0] = wt[-1] = 0.5 * h
    wt *= 3.0 * W * v * v
    return omega, wt


def _spectral_weights(pairs, variance, w, n):
    """Cos/sin weights for sum over pairs of c*c' (1/pi) int_0^W S w^p cos(w tau + phi)."""
    omega, wt = spectral_nodes(w, n)
    dens = wt * variance * np.sqrt(2.0 * np.pi / w) * np.exp(-0.5 * omega ** 2 / w) / np.pi
    cw = np.zeros(n)
    sw = np.zeros(n)
    with np.errstate(over="ignore", invalid="ignore"):
        for coef, p_left, p_right in pairs:
            amp = coef * dens * omega ** (p_left + p_right)
            phase = 0.5 * np.pi * (p_left - p_right)
            cw += amp * np.cos(phase)
            sw -= amp * np.sin(phase)
    if not (np.all(np.isfinite(cw)) and np.all(np.isfinite(sw))):
        raise NumericalError("spectral weights overflowed; fractional order or ARD weight too large")
    return omega, cw, sw


def spectral_eval(pairs, variance, w, tau, n=SPECTRAL_NODES, tol=SPECTRAL_TOL):
    """Evaluate a sum of spectral pair kernels at offsets tau with a convergence check.

    ``pairs`` holds (coefficient, left power, right power) triples.
    """
    tau = np.asarray(tau, dtype=float)
    if tau.size == 0:
        return np.zeros(tau.shape)
    # cosine parts are even in tau and sine parts odd, so only unique |tau|
    # are evaluated; the coarse rule reuses every other fine node
    mag, inv = np.unique(np.abs(tau.ravel()), return_inverse=True)
    sign = np.sign(tau.ravel())
    omega, cf, sf = _spectral_weights(pairs, variance, w, 2 * n - 1)
    _, cc, sc = _spectral_weights(pairs, variance, w, n)
    cw = np.zeros((omega.size, 4))
    sw = np.zeros((omega.size, 4))
    cw[:, 0], sw[:, 1] = cf, sf
    cw[::2, 2], sw[::2, 3] = cc, sc
    R = _backend.spectral_sum(mag, omega, cw, sw)[inv]
    fine = R[:, 0] + sign * R[:, 1]
    coarse = R[:, 2] + sign * R[:, 3]
    scale = max(1.0, float(np.max(np.abs(fine))))
    err = float(np.max(np.abs(fine - coarse)))
    if err > tol * scale:
        raise NumericalError(
            f"spectral quadrature did not converge: change {err:.3e} on doubling "
            f"(scale {scale:.3e}, w={w:.4g}, powers={[p[1:] for p in pairs]})")
    return fine.reshape(tau.shape)


def kernel_block(expr, phi, theta, X1, X2, kind="ff", diag=False):
    """Matrix of transformed kernel values between the rows of X1 and X2.

    ``kind`` is one of 'uu', 'uf', 'fu', 'ff'; the first letter says what is
    applied to the first argument. With ``diag=True`` X1 and X2 must have the
    same number of rows and only the paired entries are returned.
    """
    if kind not in ("uu", "uf", "fu", "ff"):
        raise InvalidArgumentError(f"unknown kernel kind {kind!r}")
    X1 = np.asarray(X1, dtype=float).reshape(len(X1), -1)
    X2 = np.asarray(X2, dtype=float).reshape(len(X2), -1)
    D = theta.dim
    if X1.shape[1] != D or X2.shape[1] != D or expr.ndim != D:
        raise InvalidArgumentError(
            f"dimension mismatch: points {X1.shape[1]}/{X2.shape[1]}, kernel {D}, operator {expr.ndim}")
    if "f" in kind:
        expr.check_params(phi)
    if diag:
        if X1.shape[0] != X2.shape[0]:
            raise InvalidArgumentError("diag=True requires equally many rows")
        A, B = X1, X2
        shape = (X1.shape[0],)
    else:
        A = np.repeat(X1, X2.shape[0], axis=0)
        B = np.tile(X2, (X1.shape[0], 1))
        shape = (X1.shape[0], X2.shape[0])

    left = _side_terms(expr, kind[0], phi)
    right = _side_terms(expr, kind[1], phi)
    w = theta.w
    out = np.zeros(A.shape[0])
    closed = {}
    spectral = []
    for cl, al in left:
        for cr, ar in right:
            coef = cl * cr
            if coef == 0.0:
                continue
            la, ra = _actions(al, D), _actions(ar, D)
            if la is None or ra is None:
                spectral.append((coef, _spectral_power(al, phi), _spectral_power(ar, phi)))
                continue
            key = (la, ra)
            if key not in closed:
                closed[key] = _closed_pair(la, ra, A, B, w)
            out += coef * closed[key]
    out *= theta.variance
    if spectral and A.shape[0]:
        out += spectral_eval(spectral, theta.variance, w[0], A[:, 0] - B[:, 0])
    return out.reshape(shape)


def _closed_pair(la, ra, A, B, w):
    # deriv_product skips any dimension carrying an INTEGRAL code (-1)
    val = _backend.deriv_product(A, B, w, np.asarray(la), np.asarray(ra))
    for d, (l, r) in enumerate(zip(la, ra)):
        if l == INTEGRAL or r == INTEGRAL:
            val = val * factor_1d(l, r, A[:, d], B[:, d], w[d])
    return val


def _scalar(expr, phi, theta, x, x2, kind):
    x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))[None, :]
    return float(kernel_block(expr, phi, theta, x, x2, kind)[0, 0])


def kernel_ff(expr, phi, theta, x, x2):
    """Covariance of (L u)(x) with (L u)(x2)."""
    return _scalar(expr, phi, theta, x, x2, "ff")


def kernel_uf(expr, phi, theta, x, x2):
    """Covariance of u(x) with (L u)(x2)."""
    return _scalar(expr, phi, theta, x, x2, "uf")


def kernel_fu(expr, phi, theta, x, x2):
    """Covariance of (L u)(x) with u(x2)."""
    return _scalar(expr, phi, theta, x, x2, "fu")


def spectral_pair(side, alpha, theta, x, x2):
    """Fractional-derivative kernel entry computed by frequency-domain quadrature.

    ``side`` selects which argument the order-``alpha`` derivative acts on:
    'left', 'right', 'both' or 'neither'.
    """
    if side not in ("left", "right", "both", "neither"):
        raise InvalidArgumentError(f"unknown side {side!r}")
    if not alpha > 0:
        raise InvalidArgumentError(f"fractional order must be positive, got {alpha}")
    if not isinstance(theta, SEKernelParams) or theta.dim != 1:
        raise CapabilityError("spectral kernels require a one-dimensional base kernel")
    p_left = alpha if side in ("left", "both") else 0.0
    p_right = alpha if side in ("right", "both") else 0.0
    tau = float(np.asarray(x, dtype=float).reshape(-1)[0] - np.asarray(x2, dtype=float).reshape(-1)[0])
    val = spectral_eval([(1.0, p_left, p_right)], theta.variance, theta.weights[0], np.array([tau]))
    return float(val[0])
