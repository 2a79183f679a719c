"""Marginal-likelihood training of kernel hyper-parameters and operator parameters.

Every trainable quantity lives in one unconstrained vector. Positive
quantities are stored as logarithms; operator coefficients whose sign is not
known in advance are stored as-is. Gradients are central finite
differences on that vector and the optimiser is scipy's L-BFGS-B (memory 10,
line search satisfying the strong Wolfe conditions).
"""
import copy
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigurationError, InvalidArgumentError, LinopGPError, NumericalError, TrainingError
from .gp import FittedModel, ModelParams, nlml
from .kernel import SEKernelParams

LOG_BOUND = 30.0
TRAINED = "trained"
# noise floors (relative to var(y) per block) visited before a fixed-noise fit
DEFAULT_LADDER = (1e-2, 1e-4, 1e-6)


@dataclass
class TrainConfig:
    restarts: int = 10
    max_iters: int = 500
    grad_tol: float = 1e-5
    fd_step: float = 1e-6
    seed: int = 0
    noise_u: Union[str, float] = TRAINED
    noise_f: Union[str, float] = TRAINED
    transforms: dict = field(default_factory=dict)
    init: dict = field(default_factory=dict)
    noise_ladder: Optional[tuple] = None  # None: DEFAULT_LADDER if any noise is fixed

    def __post_init__(self):
        if self.restarts < 1:
            raise InvalidArgumentError("restarts must be at least 1")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be at least 1")
        if not 1e-9 <= self.fd_step <= 1e-3:
            raise InvalidArgumentError(f"fd_step must lie in [1e-9, 1e-3], got {self.fd_step}")
        if not self.grad_tol > 0:
            raise InvalidArgumentError("grad_tol must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidArgumentError("seed must be an unsigned 64-bit integer")
        for key in ("noise_u", "noise_f"):
            v = getattr(self, key)
            if v != TRAINED and not (isinstance(v, (int, float)) and v >= 0):
                raise InvalidArgumentError(f"{key} must be 'trained' or a non-negative number")
        if self.noise_ladder is None:
            fixed = self.noise_u != TRAINED or self.noise_f != TRAINED
            self.noise_ladder = DEFAULT_LADDER if fixed else ()
        self.noise_ladder = tuple(float(v) for v in self.noise_ladder)
        if any(not v > 0 for v in self.noise_ladder):
            raise InvalidArgumentError("noise_ladder levels must be positive")
        for name, tr in self.transforms.items():
            if tr not in ("log", "identity"):
                raise InvalidArgumentError(f"transform for {name!r} must be 'log' or 'identity'")


@dataclass
class RestartTrace:
    initial_nlml: float
    final_nlml: float
    iterations: int
    grad_norm: float
    message: str = ""
    failed: bool = False


@dataclass
class FitReport:
    best: ModelParams
    best_nlml: float
    restarts: list
    iterations: int
    grad_norm: float
    wall_time: float
    backend: str = ""

    def to_dict(self):
        return {
            "nlml": self.best_nlml,
            "theta": {"variance": self.best.theta.variance,
                      "weights": list(self.best.theta.weights)},
            "phi": dict(self.best.phi),
            "noise_u": self.best.noise_u,
            "noise_f": self.best.noise_f,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "restarts": [asdict(r) for r in self.restarts],
        }


class ParamLayout:
    """Ordered list of trainable entries and their transforms.

    Entry names: ``variance``, ``w[<dim>]`` for each input dimension, the
    operator slots, then ``noise_u``/``noise_f`` when trained. The transform
    table accepts these names plus ``weights`` as a shorthand for every w.
    """

    def __init__(self, expr, cfg, n_u=1, n_f=1):
        self.expr = expr
        self.dims = expr.dims
        self.slots = expr.params()
        orders = set(expr.order_params())
        known = {"variance", "weights", "noise_u", "noise_f", *self.slots}
        known |= {f"w[{d}]" for d in self.dims}
        for name in list(cfg.transforms) + list(cfg.init):
            if name not in known:
                raise ConfigurationError(f"unknown parameter {name!r} in transform/init table")
        self.fixed = {}
        self.names = ["variance"] + [f"w[{d}]" for d in self.dims] + list(self.slots)
        for key, n in (("noise_u", n_u), ("noise_f", n_f)):
            mode = getattr(cfg, key)
            if mode == TRAINED and n > 0:
                self.names.append(key)
            else:
                self.fixed[key] = 0.0 if mode == TRAINED else float(mode)
        self.transforms = {}
        for name in self.names:
            if name in cfg.transforms:
                tr = cfg.transforms[name]
            elif name.startswith("w[") and "weights" in cfg.transforms:
                tr = cfg.transforms["weights"]
            elif name in self.slots and name not in orders:
                tr = "identity"
            else:
                tr = "log"
            self.transforms[name] = tr
        self.log_mask = np.array([self.transforms[n] == "log" for n in self.names])

    def __len__(self):
        return len(self.names)

    def values(self, params):
        vals = {"variance": params.theta.variance, "noise_u": params.noise_u,
                "noise_f": params.noise_f}
        for d, wd in zip(self.dims, params.theta.weights):
            vals[f"w[{d}]"] = wd
        vals.update(params.phi)
        return vals

    def to_params(self, vals):
        theta = SEKernelParams(vals["variance"], [vals[f"w[{d}]"] for d in self.dims])
        phi = {s: vals[s] for s in self.slots}
        nu = vals.get("noise_u", self.fixed.get("noise_u", 0.0))
        nf = vals.get("noise_f", self.fixed.get("noise_f", 0.0))
        return ModelParams(theta, phi, nu, nf)

    def with_noise_floor(self, level, data):
        """Copy whose fixed noise variances are raised to level * var(y) per block.

        Returns None when no noise variance is fixed (nothing to anneal).
        """
        if not self.fixed:
            return None
        out = copy.copy(self)
        out.fixed = dict(self.fixed)
        for key, y in (("noise_u", data.y_u), ("noise_f", data.y_f)):
            if key in self.fixed and y.size:
                scale = float(np.var(y)) if y.size > 1 else float(y[0] ** 2)
                out.fixed[key] = max(self.fixed[key], level * (scale if scale > 0 else 1.0))
        return out

    def bounds(self):
        return [(-LOG_BOUND, LOG_BOUND) if m else (None, None) for m in self.log_mask]


def pack(params, layout):
    vals = layout.values(params)
    v = np.empty(len(layout))
    for i, name in enumerate(layout.names):
        x = float(vals[name])
        if layout.log_mask[i]:
            if not x > 0:
                raise InvalidArgumentError(f"{name} = {x} cannot be log-transformed")
            x = np.log(x)
        v[i] = x
    return v


def unpack(v, layout):
    v = np.asarray(v, dtype=float)
    vals = {}
    for i, name in enumerate(layout.names):
        vals[name] = float(np.exp(v[i])) if layout.log_mask[i] else float(v[i])
    return layout.to_params(vals)


def fd_gradient(objective, v, fd_step=1e-6):
    """Central-difference gradient with step fd_step * max(|v_i|, 1)."""
    v = np.asarray(v, dtype=float)
    g = np.empty_like(v)
    for i in range(v.shape[0]):
        h = fd_step * max(abs(v[i]), 1.0)
        vp = v.copy()
        vm = v.copy()
        vp[i] += h
        vm[i] -= h
        fp, fm = objective(vp), objective(vm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError(f"objective is not finite when probing coordinate {i}")
        g[i] = (fp - fm) / (vp[i] - vm[i])
    return g


def initial_point(data, layout, cfg, rng):
    """Random starting values following the documented initialisation rules."""
    X = np.vstack([data.X_u, data.X_f])
    y = data.y_u if data.n_u > 1 else data.y_f
    var_y = float(np.var(y)) if y.size > 1 else 0.0
    if not var_y > 0:
        var_y = float(np.mean(data.y ** 2)) if np.any(data.y) else 1.0
    vals = {"variance": var_y}
    for j, d in enumerate(layout.dims):
        r = float(np.ptp(X[:, j])) if X.shape[0] > 1 else 1.0
        r = r if r > 0 else 1.0
        vals[f"w[{d}]"] = float(np.exp(rng.uniform(np.log(0.1 / r ** 2), np.log(10.0 / r ** 2))))
    orders = set(layout.expr.order_params())
    for s in layout.slots:
        if s in orders:
            vals[s] = 1.0
        elif layout.transforms[s] == "log":
            vals[s] = float(np.exp(rng.normal(0.0, 0.5)))
        else:
            vals[s] = float(rng.normal(0.0, 1.0))
    for key in ("noise_u", "noise_f"):
        if key in layout.names:
            vals[key] = 1e-4 * var_y
    vals.update({k: float(v) for k, v in cfg.init.items()})
    return vals


PENALTY = 1e20


class _Objective:
    """NLML on the packed vector; remembers the best point it has seen.

    Numerical failures (non-PD covariance, overflowing spectral sums) are
    reported as a large finite penalty so the line search backs off.
    """

    def __init__(self, data, expr, layout):
        self.data, self.expr, self.layout = data, expr, layout
        self.best_f = np.inf
        self.best_v = None

    def __call__(self, v):
        try:
            f = nlml(self.data, self.expr, unpack(v, self.layout))
        except LinopGPError:
            return PENALTY
        if f < self.best_f:
            self.best_f, self.best_v = f, np.array(v)
        return f


def _lbfgs(objective, v0, layout, cfg):
    def fun(v):
        return objective(v), fd_gradient(objective, v, cfg.fd_step)

    res = minimize(fun, v0, jac=True, method="L-BFGS-B", bounds=layout.bounds(),
                   options={"maxcor": 10, "maxiter": cfg.max_iters, "gtol": cfg.grad_tol,
                            "ftol": 1e-15, "maxls": 40})
    return int(res.nit), str(res.message)


def _run_restart(data, expr, layout, cfg, rng):
    v0 = pack(layout.to_params(initial_point(data, layout, cfg, rng)), layout)
    final = _Objective(data, expr, layout)
    f0 = final(v0)
    v, nit = v0, 0
    for level in cfg.noise_ladder:
        staged = layout.with_noise_floor(level, data)
        if staged is None:
            break
        stage = _Objective(data, expr, staged)
        stage(v)
        n, _ = _lbfgs(stage, v, staged, cfg)
        nit += n
        if stage.best_v is not None:
            v = stage.best_v
    n, msg = _lbfgs(final, v, layout, cfg)
    nit += n
    if final.best_v is None:
        raise NumericalError(f"objective could not be evaluated from any point ({msg})")
    g = fd_gradient(final, final.best_v, cfg.fd_step)
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    return final.best_v, RestartTrace(float(f0), float(final.best_f), nit, gnorm, msg)


def fit(data, expr, cfg=None):
    """Fit (theta, phi, noise) by multi-restart L-BFGS on the NLML.

    Returns (FittedModel, FitReport). Restart i draws its starting point from
    a generator spawned from ``cfg.seed``, so results do not depend on the
    order in which restarts are run.
    """
    from . import _backend

    cfg = cfg or TrainConfig()
    if data.dim != expr.ndim:
        raise InvalidArgumentError(
            f"data has {data.dim} input dimensions, operator has {expr.ndim}")
    layout = ParamLayout(expr, cfg, data.n_u, data.n_f)
    t0 = time.perf_counter()
    children = np.random.SeedSequence(int(cfg.seed)).spawn(cfg.restarts)
    results, diagnostics = [], []
    for i, child in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(child))
        try:
            v, trace = _run_restart(data, expr, layout, cfg, rng)
        except LinopGPError as exc:
            diagnostics.append(f"restart {i}: {exc}")
            results.append((None, RestartTrace(np.nan, np.nan, 0, np.nan, str(exc), True)))
            continue
        results.append((v, trace))
    usable = [(t.final_nlml, i) for i, (v, t) in enumerate(results) if v is not None]
    if not usable:
        raise TrainingError("all restarts failed", diagnostics)
    _, best_i = min(usable)
    v_best, t_best = results[best_i]
    params = unpack(v_best, layout)
    model = FittedModel.build(data, expr, params)
    report = FitReport(
        best=params,
        best_nlml=t_best.final_nlml,
        restarts=[t for _, t in results],
        iterations=sum(t.iterations for _, t in results),
        grad_norm=t_best.grad_norm,
        wall_time=time.perf_counter() - t0,
        backend=_backend.NAME,
    )
    return model, report
