"""Gap-gene reaction-diffusion model.

For gap protein ``a`` the concentration u^a(t, x) obeys

    u_t + lambda u - D u_xx = zeta(t) P^a(t, x),
    P^a = R^a g(sum_b T^ab u^b + h^a),   g(s) = (s / sqrt(s^2 + 1) + 1) / 2,

with t in minutes after the start of cleavage cycle 13 and x in percent
embryo length (%EL). Decay and diffusion rates are inferred per gene; R, T
and h are taken as given. The module also contains an explicit
finite-difference simulator used to manufacture synthetic data with known
(lambda, D).
"""
import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

from .dsl import parse_operator
from .errors import DataGenerationError, IngestionError, InvalidArgumentError, NoUsablePointsError
from .gp import JointDataset
from .trainer import TrainConfig, fit

log = logging.getLogger(__name__)

GENES = ("Hb", "Kr", "Gt", "Kni")
REGULATORS = ("Bcd", "Cad", "Hb", "Kr", "Gt", "Kni", "Tll")
T_RANGE = (0.0, 68.0)
X_RANGE = (35.0, 92.0)
VALUE_RANGE = (0.0, 255.0)
CSV_HEADER = ("t_min", "x_percent_el", "gene", "value")
OPERATOR = "d/dt + lambda*u - D_*d2/dx2"
DIMS = ("t", "x")

DEFAULT_R = {"Hb": 32.03, "Kr": 16.70, "Gt": 25.15, "Kni": 16.12}
DEFAULT_T = {
    "Hb": (0.1114, -0.0054, 0.0293, -0.0124, 0.0553, -0.3903, 0.0144),
    "Kr": (0.1173, 0.0215, -0.0498, 0.0755, -0.0141, -0.0666, -1.2036),
    "Gt": (0.0738, 0.0180, -0.0008, -0.0758, 0.0157, 0.0056, -0.0031),
    "Kni": (0.2146, 0.0210, -0.1891, -0.0458, -0.1458, 0.0887, -0.3028),
}
DEFAULT_H = -3.5

# synthetic data: target gene (weak self-regulation keeps fronts smooth) and
# observation window after the mitosis shutdown
SYNTH_GENE = "Gt"
SYNTH_WINDOW = (24.0, 68.0)
# fixed noise variance and annealing levels used when fitting noise-free data
GENE_NOISE = 1e-6
GENE_LADDER = (1e-2, 1e-4, 1e-6)

# ends of the mitosis window in which transcription is off
MITOSIS = (16.0, 21.0)


def _check_gene(a, allowed=GENES):
    if a not in allowed:
        raise InvalidArgumentError(f"unknown gene {a!r}; expected one of {', '.join(allowed)}")


@dataclass(frozen=True)
class GeneTable:
    """Production constants: max rate R[a], weights T[a][b], bias h[a]."""

    R: dict = field(default_factory=lambda: dict(DEFAULT_R))
    T: dict = field(default_factory=lambda: {a: dict(zip(REGULATORS, row))
                                             for a, row in DEFAULT_T.items()})
    h: dict = field(default_factory=lambda: {a: DEFAULT_H for a in GENES})

    def __post_init__(self):
        for name in ("R", "T", "h"):
            table = getattr(self, name)
            if set(table) != set(GENES):
                raise InvalidArgumentError(f"{name} must have entries for exactly {GENES}")
        for a in GENES:
            row = self.T[a]
            if set(row) != set(REGULATORS):
                raise InvalidArgumentError(f"T[{a}] must have weights for exactly {REGULATORS}")
            vals = [self.R[a], self.h[a], *row.values()]
            if not all(np.isfinite(float(v)) for v in vals):
                raise InvalidArgumentError(f"non-finite constant for gene {a}")
            if not self.R[a] > 0:
                raise InvalidArgumentError(f"R[{a}] must be positive")

    def weights(self, a):
        _check_gene(a)
        return np.array([self.T[a][b] for b in REGULATORS])

    @classmethod
    def from_dict(cls, d):
        """Defaults overridden by any of the keys R, T, h (partial rows allowed)."""
        unknown = set(d) - {"R", "T", "h"}
        if unknown:
            raise InvalidArgumentError(f"unknown gene-table keys {sorted(unknown)}")
        base = cls()
        R, h = dict(base.R), dict(base.h)
        T = {a: dict(row) for a, row in base.T.items()}
        for a, v in d.get("R", {}).items():
            _check_gene(a)
            R[a] = float(v)
        hv = d.get("h", {})
        if isinstance(hv, (int, float)):
            hv = {a: hv for a in GENES}
        for a, v in hv.items():
            _check_gene(a)
            h[a] = float(v)
        for a, row in d.get("T", {}).items():
            _check_gene(a)
            for b, v in row.items():
                _check_gene(b, REGULATORS)
                T[a][b] = float(v)
        return cls(R, T, h)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidArgumentError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(d)


@dataclass(frozen=True)
class ExpressionRecord:
    t: float
    x: float
    gene: str
    value: float

    def __post_init__(self):
        _check_gene(self.gene, REGULATORS)
        for name, v, (lo, hi) in (("t", self.t, T_RANGE), ("x", self.x, X_RANGE),
                                  ("value", self.value, VALUE_RANGE)):
            if not lo <= v <= hi:
                raise InvalidArgumentError(f"{name} = {v} outside [{lo:g}, {hi:g}]")


def read_expression_csv(path):
    """Records from a CSV with header ``t_min,x_percent_el,gene,value``."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise IngestionError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise IngestionError(f"{path}: row {row_no}: expected 4 fields, got {len(row)}")
            try:
                rec = ExpressionRecord(float(row[0]), float(row[1]), row[2].strip(), float(row[3]))
            except (ValueError, InvalidArgumentError) as exc:
                raise IngestionError(f"{path}: row {row_no}: {exc}") from exc
            records.append(rec)
    return records


def write_expression_csv(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([repr(float(r.t)), repr(float(r.x)), r.gene, repr(float(r.value))])


def zeta(t):
    """Transcription factor: 0.5 before mitosis, 0 during it, 1 afterwards."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise InvalidArgumentError("zeta is defined for finite t >= 0 only")
    out = np.where(t < MITOSIS[0], 0.5, np.where(t < MITOSIS[1], 0.0, 1.0))
    return float(out) if out.ndim == 0 else out


def sigmoid_g(u):
    """(u / sqrt(u^2 + 1) + 1) / 2, evaluated without cancellation for u < 0."""
    u = np.asarray(u, dtype=float)
    s = np.hypot(u, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        neg = 0.5 / (s * (s - u))
    out = np.where(u >= 0, 0.5 * (u / s + 1.0), neg)
    return float(out) if out.ndim == 0 else out


def _production(a, conc, table):
    missing = [b for b in REGULATORS if b not in conc]
    if missing:
        raise InvalidArgumentError(f"missing regulator concentrations: {', '.join(missing)}")
    s = table.h[a] + sum(table.T[a][b] * np.asarray(conc[b], dtype=float) for b in REGULATORS)
    return table.R[a] * sigmoid_g(s)


def production(a, conc, table=None):
    """P^a = R^a g(sum_b T^ab conc_b + h^a); conc maps all seven genes to values."""
    table = table or GeneTable()
    _check_gene(a)
    return _production(a, conc, table)


def build_f_data(records, a, table=None, return_dropped=False):
    """Joint dataset for gene ``a``: u at its observations, f = zeta P where all regulators exist.

    Points missing any regulator are left out of the f block; their number is
    logged and, with ``return_dropped``, returned alongside the dataset.
    """
    table = table or GeneTable()
    _check_gene(a)
    points = {}
    for r in records:
        slot = points.setdefault((float(r.t), float(r.x)), {})
        if r.gene in slot and slot[r.gene] != r.value:
            raise IngestionError(f"conflicting values for {r.gene} at t={r.t}, x={r.x}")
        slot[r.gene] = float(r.value)
    keys = sorted(points)
    u_keys = [k for k in keys if a in points[k]]
    f_keys = [k for k in keys if all(b in points[k] for b in REGULATORS)]
    dropped = len(keys) - len(f_keys)
    if dropped:
        log.info("gene %s: %d of %d points lack a regulator and are left out of f",
                 a, dropped, len(keys))
    if not f_keys:
        raise NoUsablePointsError(f"no usable f points for gene {a}: every point lacks a regulator")
    y_u = np.array([points[k][a] for k in u_keys])
    conc = {b: np.array([points[k][b] for k in f_keys]) for b in REGULATORS}
    t_f = np.array([k[0] for k in f_keys])
    y_f = zeta(t_f) * _production(a, conc, table)
    data = JointDataset(np.array(u_keys).reshape(-1, 2), y_u, np.array(f_keys), np.atleast_1d(y_f))
    return (data, dropped) if return_dropped else data


# -- forward simulation --

def _bump(x, c, w):
    return np.exp(-(((x - c) / w) ** 2))


def _logistic(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def synthetic_regulators():
    """Smooth analytic stand-ins for the seven expression fields, values in [0, 255].

    The shapes loosely follow the familiar pattern (anterior Bcd gradient,
    posterior Cad and Tll, central Kr, posterior Kni, two Gt domains) with
    slow growth in time. Each entry maps (t, x) arrays to concentrations.
    """
    def ramp(t, lo):
        return lo + (1.0 - lo) * np.asarray(t, dtype=float) / T_RANGE[1]

    return {
        "Bcd": lambda t, x: 140.0 * np.exp(-(np.asarray(x) - 35.0) / 15.0) + 0.0 * np.asarray(t),
        "Cad": lambda t, x: 90.0 * _logistic((np.asarray(x) - 62.0) / 12.0) * (1.0 - 0.3 * ramp(t, 0.0)),
        "Hb": lambda t, x: 150.0 * _logistic(-(np.asarray(x) - 48.0) / 9.0) * ramp(t, 0.6),
        "Kr": lambda t, x: 130.0 * _bump(np.asarray(x), 58.0, 12.0) * ramp(t, 0.3),
        "Gt": lambda t, x: (110.0 * _bump(np.asarray(x), 42.0, 12.0) * ramp(t, 0.1)
                            + 120.0 * _bump(np.asarray(x), 80.0, 12.0) * ramp(t, 0.2)),
        "Kni": lambda t, x: 150.0 * _bump(np.asarray(x), 70.0, 12.0) * ramp(t, 0.2),
        "Tll": lambda t, x: 150.0 * _logistic((np.asarray(x) - 86.0) / 6.0) + 0.0 * np.asarray(t),
    }


def regulators_from_records(records):
    """Piecewise-linear interpolants in (t, x) built from expression records.

    Outside the convex hull of a gene's points the nearest observation is used.
    """
    by_gene = {}
    for r in records:
        by_gene.setdefault(r.gene, []).append((r.t, r.x, r.value))
    fields = {}
    for b, rows in by_gene.items():
        arr = np.array(rows)
        pts, vals = arr[:, :2], arr[:, 2]
        try:
            lin = LinearNDInterpolator(pts, vals)
        except Exception:  # degenerate layouts (all on a line) have no triangulation
            lin = None
        near = NearestNDInterpolator(pts, vals)

        def interp(t, x, lin=lin, near=near):
            t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
            q = np.column_stack([t.ravel(), x.ravel()])
            out = lin(q) if lin is not None else np.full(q.shape[0], np.nan)
            bad = ~np.isfinite(out)
            if np.any(bad):
                out[bad] = near(q[bad])
            return out.reshape(t.shape)

        fields[b] = interp
    return fields


@dataclass(frozen=True)
class SimGrid:
    """Explicit-scheme grid: spacing dx on X_RANGE, time step at most dt, end time t_end."""

    dx: float = 0.5
    dt: float = 0.02
    t_end: float = T_RANGE[1]

    def __post_init__(self):
        if not (self.dx > 0 and self.dt > 0 and self.t_end > 0):
            raise InvalidArgumentError("dx, dt and t_end must be positive")
        n = (X_RANGE[1] - X_RANGE[0]) / self.dx
        if abs(n - round(n)) > 1e-9:
            raise InvalidArgumentError(f"dx = {self.dx} does not divide the x range {X_RANGE}")

    @property
    def x(self):
        n = int(round((X_RANGE[1] - X_RANGE[0]) / self.dx))
        return np.linspace(X_RANGE[0], X_RANGE[1], n + 1)


@dataclass
class Simulation:
    """Target profile and forcing at each requested sample time (rows) on the x grid."""

    gene: str
    times: np.ndarray
    x: np.ndarray
    u: np.ndarray
    forcing: np.ndarray
    regulators: dict


def _laplacian_zero_flux(u, dx):
    lap = np.empty_like(u)
    lap[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
    lap[0] = 2.0 * (u[1] - u[0])
    lap[-1] = 2.0 * (u[-2] - u[-1])
    return lap / (dx * dx)


def mass(u, dx):
    """Trapezoid integral of a profile; conserved exactly by the zero-flux scheme."""
    u = np.asarray(u, dtype=float)
    return dx * (float(np.sum(u)) - 0.5 * (u[0] + u[-1]))


def integrate(lam, D, gene=SYNTH_GENE, table=None, regulators=None, sample_times=(),
              grid=None, u0=None, forcing=None):
    """Integrate u_t = -lam u + D u_xx + zeta(t) P(t, x) with explicit Euler.

    ``regulators`` maps gene names to callables (t, x) -> concentration; the
    target's own concentration is the simulated state. ``u0`` may be a
    constant, an array on the grid or a callable of x (default: the target's
    synthetic profile at t = 0). ``forcing`` replaces zeta*P with a callable
    (t, x, u) -> value, mainly for testing. Steps never straddle a sample time
    or an end of the mitosis window.
    """
    _check_gene(gene)
    table = table or GeneTable()
    grid = grid or SimGrid()
    if not (lam >= 0 and D >= 0):
        raise InvalidArgumentError("lambda and D must be non-negative")
    if D > 0 and grid.dt > 0.4 * grid.dx ** 2 / D:
        raise InvalidArgumentError(
            f"explicit scheme unstable: dt = {grid.dt} exceeds 0.4*dx^2/D = {0.4 * grid.dx ** 2 / D:.6g}")
    if regulators is None:
        regulators = synthetic_regulators()
    elif not isinstance(regulators, dict):
        regulators = regulators_from_records(regulators)
    others = [b for b in REGULATORS if b != gene]
    if forcing is None:
        missing = [b for b in others if b not in regulators]
        if missing:
            raise InvalidArgumentError(f"regulator fields missing for {', '.join(missing)}")
    x = grid.x
    if u0 is None:
        u = np.asarray(synthetic_regulators()[gene](0.0, x), dtype=float).copy()
    elif callable(u0):
        u = np.asarray(u0(x), dtype=float).copy()
    else:
        u = np.broadcast_to(np.asarray(u0, dtype=float), x.shape).copy()
    times = np.unique(np.asarray(sample_times, dtype=float))
    if times.size and (times[0] < 0 or times[-1] > grid.t_end):
        raise InvalidArgumentError(f"sample times must lie in [0, {grid.t_end}]")

    def rhs_forcing(t, u):
        if forcing is not None:
            return np.asarray(forcing(t, x, u), dtype=float)
        conc = {b: regulators[b](t, x) for b in others}
        conc[gene] = u
        return zeta(t) * _production(gene, conc, table)

    stops = sorted(set(times.tolist()) | {m for m in MITOSIS if m < grid.t_end}
                   | ({0.0} if not times.size else set()))
    snaps_u, snaps_f = {}, {}
    t = 0.0
    for stop in stops:
        span = stop - t
        n = int(math.ceil(span / grid.dt - 1e-9)) if span > 0 else 0
        h = span / n if n else 0.0
        for _ in range(n):
            u = u + h * (-lam * u + D * _laplacian_zero_flux(u, grid.dx) + rhs_forcing(t, u))
            t += h
        t = stop
        if stop in set(times.tolist()):
            snaps_u[stop] = u.copy()
            snaps_f[stop] = rhs_forcing(stop, u)
    U = np.array([snaps_u[s] for s in times]).reshape(len(times), x.size)
    F = np.array([snaps_f[s] for s in times]).reshape(len(times), x.size)
    return Simulation(gene, times, x, U, F, regulators)


def simulate_forward(lam, D, table=None, gene=SYNTH_GENE, regulators=None, sample_times=(),
                     grid=None, u0=None, sample_points=None):
    """Simulate gene ``gene`` and emit expression records for all seven genes.

    Records are produced at every grid node of each sample time, or only at
    ``sample_points`` ((t, x) pairs on the x grid) when given. Regulator
    records come from the regulator fields at the same points.
    """
    if sample_points is not None:
        sample_points = [(float(t), float(xv)) for t, xv in sample_points]
        sample_times = sorted({t for t, _ in sample_points})
    sim = integrate(lam, D, gene, table, regulators, sample_times, grid, u0)
    dx = sim.x[1] - sim.x[0]
    if sample_points is None:
        wanted = [(i, j) for i in range(len(sim.times)) for j in range(sim.x.size)]
    else:
        row = {t: i for i, t in enumerate(sim.times.tolist())}
        wanted = []
        for t, xv in sample_points:
            j = int(round((xv - X_RANGE[0]) / dx))
            if not 0 <= j < sim.x.size or abs(sim.x[j] - xv) > 1e-9:
                raise InvalidArgumentError(f"sample x = {xv} is not a grid node")
            wanted.append((row[t], j))
    others = [b for b in REGULATORS if b != gene]
    records = []
    for i, j in wanted:
        t, xv = float(sim.times[i]), float(sim.x[j])
        val = float(sim.u[i, j])
        if not VALUE_RANGE[0] <= val <= VALUE_RANGE[1]:
            raise DataGenerationError(
                f"simulated {gene} = {val:.4g} at t={t}, x={xv} leaves {VALUE_RANGE}")
        records.append(ExpressionRecord(t, xv, gene, val))
        for b in others:
            records.append(ExpressionRecord(t, xv, b, float(sim.regulators[b](t, xv))))
    return records


def synth_points(n_points, seed=0, grid=None, window=SYNTH_WINDOW, time_step=1.0):
    """Distinct random (t, x) observation points: t on a time_step lattice in
    ``window`` (after the mitosis shutdown), x on the simulator grid."""
    grid = grid or SimGrid()
    ts = np.arange(window[0], window[1] + 1e-9, time_step)
    xs = grid.x
    if n_points > ts.size * xs.size:
        raise InvalidArgumentError("more points requested than lattice nodes")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    flat = rng.choice(ts.size * xs.size, size=n_points, replace=False)
    flat.sort()
    return [(float(ts[k // xs.size]), float(xs[k % xs.size])) for k in flat]


def synth_records(lam, D, gene=SYNTH_GENE, n_points=60, seed=0, table=None, grid=None):
    """Synthetic records with known (lam, D) at ``n_points`` random points."""
    grid = grid or SimGrid(dt=min(SimGrid.dt, 0.4 * 0.5 ** 2 / D) if D > 0 else SimGrid.dt)
    pts = synth_points(n_points, seed, grid)
    return simulate_forward(lam, D, table, gene, sample_points=pts, grid=grid)


def default_gene_config(**overrides):
    """Log transforms on lambda and D; small fixed noise reached through a
    noise ladder, since trained noise tends to swallow the whole signal."""
    kw = {"transforms": {"lambda": "log", "D_": "log"}, "restarts": 5,
          "noise_u": GENE_NOISE, "noise_f": GENE_NOISE, "noise_ladder": GENE_LADDER}
    kw.update(overrides)
    return TrainConfig(**kw)


def fit_gene(records, a, table=None, train_cfg=None, return_report=False):
    """Infer (lambda, D) for gene ``a`` from expression records.

    Inputs stay in raw units (minutes, %EL). Returns (lambda, D, model), plus
    the fit report when ``return_report`` is set.
    """
    _check_gene(a)
    data = build_f_data(records, a, table)
    expr = parse_operator(OPERATOR, DIMS)
    cfg = train_cfg or default_gene_config()
    model, report = fit(data, expr, cfg)
    lam, D = report.best.phi["lambda"], report.best.phi["D_"]
    if return_report:
        return lam, D, model, report
    return lam, D, model
