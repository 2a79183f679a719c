"""Joint GP over u and f = L u: covariance assembly, likelihood and prediction."""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import InvalidArgumentError, NumericalError
from .kernel import SEKernelParams
from .operators import kernel_block

log = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_MAX = 1e-4


def _as_points(X, D=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if D in (None, 1) else X.reshape(-1, D)
    if X.ndim != 2:
        raise InvalidArgumentError(f"points must be a 2-D array, got shape {X.shape}")
    return X


@dataclass
class JointDataset:
    """Observations of u at X_u and of f = L u at X_f."""

    X_u: np.ndarray
    y_u: np.ndarray
    X_f: np.ndarray
    y_f: np.ndarray

    def __post_init__(self):
        Xu = _as_points(self.X_u)
        Xf = _as_points(self.X_f)
        D = Xu.shape[1] if Xu.shape[0] else Xf.shape[1]
        if Xu.shape[0] == 0:
            Xu = Xu.reshape(0, D)
        if Xf.shape[0] == 0:
            Xf = Xf.reshape(0, D)
        if Xu.shape[1] != Xf.shape[1]:
            raise InvalidArgumentError(f"X_u has {Xu.shape[1]} columns but X_f has {Xf.shape[1]}")
        self.X_u, self.X_f = Xu, Xf
        self.y_u = np.asarray(self.y_u, dtype=float).reshape(-1)
        self.y_f = np.asarray(self.y_f, dtype=float).reshape(-1)
        if self.X_u.shape[0] != self.y_u.shape[0] or self.X_f.shape[0] != self.y_f.shape[0]:
            raise InvalidArgumentError("number of points and observations differ")
        if self.n_u + self.n_f < 1:
            raise InvalidArgumentError("dataset is empty")
        for arr in (self.X_u, self.y_u, self.X_f, self.y_f):
            if not np.all(np.isfinite(arr)):
                raise InvalidArgumentError("dataset contains non-finite values")

    @property
    def n_u(self):
        return self.X_u.shape[0]

    @property
    def n_f(self):
        return self.X_f.shape[0]

    @property
    def dim(self):
        return self.X_u.shape[1]

    @property
    def y(self):
        return np.concatenate([self.y_u, self.y_f])


@dataclass
class ModelParams:
    theta: SEKernelParams
    phi: dict = field(default_factory=dict)
    noise_u: float = 0.0
    noise_f: float = 0.0

    def __post_init__(self):
        self.phi = {k: float(v) for k, v in self.phi.items()}
        if not (self.noise_u >= 0 and self.noise_f >= 0):
            raise InvalidArgumentError("noise variances must be non-negative")


def assemble_K(data, expr, params):
    """Joint covariance of [y_u; y_f] including the noise diagonals."""
    th, phi = params.theta, params.phi
    n_u, n_f = data.n_u, data.n_f
    K = np.empty((n_u + n_f, n_u + n_f))
    if n_u:
        Kuu = kernel_block(expr, phi, th, data.X_u, data.X_u, "uu")
        K[:n_u, :n_u] = 0.5 * (Kuu + Kuu.T)
        K[:n_u, :n_u][np.diag_indices(n_u)] += params.noise_u
    if n_f:
        Kff = kernel_block(expr, phi, th, data.X_f, data.X_f, "ff")
        K[n_u:, n_u:] = 0.5 * (Kff + Kff.T)
        K[n_u:, n_u:][np.diag_indices(n_f)] += params.noise_f
    if n_u and n_f:
        Kuf = kernel_block(expr, phi, th, data.X_u, data.X_f, "uf")
        K[:n_u, n_u:] = Kuf
        K[n_u:, :n_u] = Kuf.T
    return K


def cholesky_jitter(K, start=JITTER_START, stop=JITTER_MAX):
    """Cholesky factor of K + jitter*I with jitter grown tenfold until it succeeds.

    Jitter is relative to the mean of diag(K). Returns (L, absolute jitter).
    """
    if not np.all(np.isfinite(K)):
        raise NumericalError("covariance matrix contains non-finite entries")
    scale = float(np.mean(np.diag(K))) if K.size else 1.0
    if not np.isfinite(scale) or scale <= 0:
        raise NumericalError(f"covariance diagonal is not positive (mean {scale})")
    rel = start
    eye = np.eye(K.shape[0])
    while rel <= stop * (1 + 1e-9):
        jitter = rel * scale
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            rel *= 10.0
    raise NumericalError(
        f"Cholesky failed even with jitter {stop:g} x mean(diag K) = {stop * scale:.3e}")


def gaussian_nlml(K, y, return_jitter=False):
    """-log N(y | 0, K) evaluated through a jittered Cholesky factor."""
    L, jitter = cholesky_jitter(K)
    alpha = cho_solve((L, True), y)
    val = 0.5 * float(y @ alpha) + float(np.sum(np.log(np.diag(L)))) \
        + 0.5 * len(y) * np.log(2.0 * np.pi)
    if return_jitter:
        return val, jitter
    return val


def nlml(data, expr, params, return_jitter=False):
    """Negative log marginal likelihood of the joint observations."""
    return gaussian_nlml(assemble_K(data, expr, params), data.y, return_jitter)


@dataclass
class Posterior:
    points: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    target: str
    max_clamp: float = 0.0


@dataclass(frozen=True)
class FittedModel:
    params: ModelParams
    expr: object
    data: JointDataset
    chol: np.ndarray
    alpha_vec: np.ndarray
    jitter: float = 0.0

    @classmethod
    def build(cls, data, expr, params):
        K = assemble_K(data, expr, params)
        L, jitter = cholesky_jitter(K)
        alpha = cho_solve((L, True), data.y)
        if jitter > JITTER_START * float(np.mean(np.diag(K))) * 1.0001:
            log.info("covariance needed jitter %.3e", jitter)
        return cls(params, expr, data, L, alpha, jitter)

    def nlml(self):
        y = self.data.y
        return 0.5 * float(y @ self.alpha_vec) + float(np.sum(np.log(np.diag(self.chol)))) \
            + 0.5 * len(y) * np.log(2.0 * np.pi)

    def predict(self, points, target="u"):
        return posterior(self, points, target)


def cross_covariance(model, points, target):
    d, p = model.data, model.params
    if target == "u":
        kinds = ("uu", "uf", "uu")
    elif target == "f":
        kinds = ("fu", "ff", "ff")
    else:
        raise InvalidArgumentError(f"target must be 'u' or 'f', got {target!r}")
    blocks = []
    if d.n_u:
        blocks.append(kernel_block(model.expr, p.phi, p.theta, points, d.X_u, kinds[0]))
    if d.n_f:
        blocks.append(kernel_block(model.expr, p.phi, p.theta, points, d.X_f, kinds[1]))
    prior = kernel_block(model.expr, p.phi, p.theta, points, points, kinds[2], diag=True)
    return np.hstack(blocks), prior


def posterior(model, points, target="u"):
    """Predictive mean and standard deviation of u or f at ``points``."""
    points = _as_points(points, model.data.dim)
    Q, prior = cross_covariance(model, points, target)
    mean = Q @ model.alpha_vec
    V = solve_triangular(model.chol, Q.T, lower=True)
    var = prior - np.sum(V * V, axis=0)
    neg = var < 0
    max_clamp = float(-var[neg].min()) if np.any(neg) else 0.0
    std = np.sqrt(np.maximum(var, 0.0))
    return Posterior(points, mean, std, target, max_clamp)


def relative_l2(pred, truth):
    pred = np.asarray(pred, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if pred.shape != truth.shape:
        raise InvalidArgumentError("pred and truth must have equal length")
    norm = np.linalg.norm(truth)
    if norm == 0:
        raise InvalidArgumentError("truth has zero norm")
    return float(np.linalg.norm(pred - truth) / norm)
