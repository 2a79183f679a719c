import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linopgp import gapgene as gg
from linopgp.errors import (DataGenerationError, IngestionError, InvalidArgumentError,
                            NoUsablePointsError)

# literal copy of the production-constant table, row by row in regulator order
# Bcd, Cad, Hb, Kr, Gt, Kni, Tll, preceded by R and followed by h
TABLE_1 = {
    "Hb": (32.03, 0.1114, -0.0054, 0.0293, -0.0124, 0.0553, -0.3903, 0.0144, -3.5),
    "Kr": (16.70, 0.1173, 0.0215, -0.0498, 0.0755, -0.0141, -0.0666, -1.2036, -3.5),
    "Gt": (25.15, 0.0738, 0.0180, -0.0008, -0.0758, 0.0157, 0.0056, -0.0031, -3.5),
    "Kni": (16.12, 0.2146, 0.0210, -0.1891, -0.0458, -0.1458, 0.0887, -0.3028, -3.5),
}


def g_ref(u):
    return 0.5 * (u / math.sqrt(u * u + 1) + 1)


def full_point(t, x, **vals):
    conc = {b: 10.0 for b in gg.REGULATORS}
    conc.update(vals)
    return [gg.ExpressionRecord(t, x, b, conc[b]) for b in gg.REGULATORS]


# -- constants --

def test_default_table_equals_literal_table():
    tab = gg.GeneTable()
    count = 0
    for a, row in TABLE_1.items():
        assert tab.R[a] == row[0]
        count += 1
        for b, v in zip(gg.REGULATORS, row[1:8]):
            assert tab.T[a][b] == v
            count += 1
        assert tab.h[a] == row[8]
        count += 1
    assert count == 36
    assert set(tab.R) == set(TABLE_1)


def test_table_overrides(tmp_path):
    tab = gg.GeneTable.from_dict({"R": {"Kr": 20.0}, "T": {"Hb": {"Tll": 0.5}}, "h": -2.0})
    assert tab.R["Kr"] == 20.0 and tab.R["Hb"] == 32.03
    assert tab.T["Hb"]["Tll"] == 0.5 and tab.T["Hb"]["Bcd"] == 0.1114
    assert all(v == -2.0 for v in tab.h.values())
    path = tmp_path / "table.json"
    path.write_text(json.dumps({"h": {"Gt": -1.0}}))
    assert gg.GeneTable.from_json(path).h["Gt"] == -1.0
    with pytest.raises(InvalidArgumentError):
        gg.GeneTable.from_dict({"Q": {}})
    with pytest.raises(InvalidArgumentError):
        gg.GeneTable.from_dict({"T": {"Hb": {"Eve": 1.0}}})
    with pytest.raises(InvalidArgumentError):
        gg.GeneTable.from_dict({"R": {"Hb": -1.0}})
    bad = tmp_path / "bad.json"
    bad.write_text("{R: 1")
    with pytest.raises(InvalidArgumentError):
        gg.GeneTable.from_json(bad)


# -- zeta and g --

def test_zeta_examples():
    assert gg.zeta(10) == 0.5
    assert gg.zeta(18) == 0.0
    assert gg.zeta(33) == 1.0
    assert gg.zeta(0) == 0.5 and gg.zeta(16) == 0.0 and gg.zeta(21) == 1.0
    np.testing.assert_array_equal(gg.zeta([0, 15.9, 20.9, 68]), [0.5, 0.5, 0.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        gg.zeta(-0.1)


def test_sigmoid_examples():
    assert gg.sigmoid_g(0.0) == 0.5
    assert gg.sigmoid_g(1.0) == pytest.approx(0.853553, abs=1e-6)
    for u in (0.5, 1.0, 3.0):
        assert gg.sigmoid_g(u) + gg.sigmoid_g(-u) == pytest.approx(1.0, abs=1e-15)


@given(st.floats(-1e6, 1e6), st.floats(1e-3, 10))
def test_sigmoid_properties(u, du):
    g = gg.sigmoid_g(u)
    assert 0 < g < 1
    assert gg.sigmoid_g(u + du) >= g
    # the textbook form cancels badly for large negative u, so compare only where it is accurate
    if abs(u) <= 100:
        assert g == pytest.approx(g_ref(u), rel=1e-9)


# -- production --

def test_production_examples():
    zero = {b: 0.0 for b in gg.REGULATORS}
    for a in gg.GENES:
        assert gg.production(a, zero) == pytest.approx(TABLE_1[a][0] * g_ref(-3.5), rel=1e-14)
    conc = dict(zero, Bcd=100.0)
    assert gg.production("Hb", conc) == pytest.approx(32.03 * g_ref(0.1114 * 100 - 3.5), rel=1e-14)


def test_production_missing_regulator():
    with pytest.raises(InvalidArgumentError, match="Tll"):
        gg.production("Hb", {b: 1.0 for b in gg.REGULATORS if b != "Tll"})
    with pytest.raises(InvalidArgumentError):
        gg.production("Bcd", {b: 1.0 for b in gg.REGULATORS})


@given(st.sampled_from(gg.GENES),
       st.lists(st.floats(0, 255), min_size=7, max_size=7), st.floats(0, 100))
def test_production_bounds_and_monotone(a, vals, bump):
    conc = dict(zip(gg.REGULATORS, vals))
    p = gg.production(a, conc)
    assert 0 < p < TABLE_1[a][0]
    for i, b in enumerate(gg.REGULATORS):
        if TABLE_1[a][1 + i] > 0:
            assert gg.production(a, dict(conc, **{b: conc[b] + bump})) >= p


# -- records and CSV --

def test_record_validation():
    with pytest.raises(InvalidArgumentError):
        gg.ExpressionRecord(70.0, 50.0, "Hb", 1.0)
    with pytest.raises(InvalidArgumentError):
        gg.ExpressionRecord(10.0, 30.0, "Hb", 1.0)
    with pytest.raises(InvalidArgumentError):
        gg.ExpressionRecord(10.0, 50.0, "Hb", 256.0)
    with pytest.raises(InvalidArgumentError):
        gg.ExpressionRecord(10.0, 50.0, "Eve", 1.0)


def test_csv_round_trip(tmp_path):
    recs = full_point(30.0, 50.5) + full_point(40.0, 60.0, Hb=3.25)
    path = tmp_path / "e.csv"
    gg.write_expression_csv(path, recs)
    assert path.read_text().splitlines()[0] == "t_min,x_percent_el,gene,value"
    assert gg.read_expression_csv(path) == recs


@pytest.mark.parametrize("body,match", [
    ("t,x,gene,value\n", "expected header"),
    ("t_min,x_percent_el,gene,value\n30,50,Hb,1\n30,50,Hb\n", "row 3"),
    ("t_min,x_percent_el,gene,value\n30,50,Eve,1\n", "row 2"),
    ("t_min,x_percent_el,gene,value\n30,abc,Hb,1\n", "row 2"),
    ("t_min,x_percent_el,gene,value\n30,50,Hb,300\n", "row 2"),
    ("", "expected header"),
])
def test_csv_errors(tmp_path, body, match):
    path = tmp_path / "e.csv"
    path.write_text(body)
    with pytest.raises(IngestionError, match=match):
        gg.read_expression_csv(path)


# -- f data --

def test_single_full_point():
    data = gg.build_f_data(full_point(30.0, 50.0), "Hb")
    assert (data.n_u, data.n_f) == (1, 1)
    conc = {b: 10.0 for b in gg.REGULATORS}
    assert data.y_f[0] == pytest.approx(gg.production("Hb", conc), rel=1e-15)


def test_mitosis_point_has_zero_forcing():
    data = gg.build_f_data(full_point(18.0, 50.0, Bcd=200.0, Hb=120.0), "Hb")
    assert data.y_f[0] == 0.0


def test_missing_regulators_dropped_and_counted():
    recs = full_point(30.0, 50.0) + [gg.ExpressionRecord(40.0, 50.0, "Hb", 5.0)]
    data, dropped = gg.build_f_data(recs, "Hb", return_dropped=True)
    assert (data.n_u, data.n_f, dropped) == (2, 1, 1)
    no_tll = [r for r in recs if r.gene != "Tll"]
    with pytest.raises(NoUsablePointsError, match="no usable f points"):
        gg.build_f_data(no_tll, "Hb")


def test_conflicting_duplicate_records():
    recs = full_point(30.0, 50.0) + [gg.ExpressionRecord(30.0, 50.0, "Kr", 99.0)]
    with pytest.raises(IngestionError, match="conflicting"):
        gg.build_f_data(recs, "Hb")
    same = full_point(30.0, 50.0) + full_point(30.0, 50.0)
    assert gg.build_f_data(same, "Hb").n_f == 1


@settings(max_examples=40, deadline=None)
@given(st.permutations(list(range(5 * 7 + 3))))
def test_build_f_data_permutation_invariant(order):
    recs = []
    for i, t in enumerate((25.0, 30.0, 35.0, 50.0, 60.0)):
        recs += full_point(t, 40.0 + 3 * i, Hb=5.0 + i, Bcd=50.0 - i)
    recs += [gg.ExpressionRecord(45.0, 70.0, "Hb", 7.0), gg.ExpressionRecord(45.0, 70.0, "Kr", 1.0),
             gg.ExpressionRecord(46.0, 71.0, "Bcd", 2.0)]
    base = gg.build_f_data(recs, "Hb")
    shuffled = gg.build_f_data([recs[i] for i in order], "Hb")
    for name in ("X_u", "y_u", "X_f", "y_f"):
        np.testing.assert_array_equal(getattr(base, name), getattr(shuffled, name))


def test_f_data_matches_simulator_forcing():
    times = (10.0, 18.0, 30.0, 55.0)
    sim = gg.integrate(0.1, 0.4, sample_times=times)
    recs = gg.simulate_forward(0.1, 0.4, sample_times=times)
    data = gg.build_f_data(recs, gg.SYNTH_GENE)
    assert data.n_f == len(times) * sim.x.size
    # build_f_data sorts points by (t, x), matching the simulator's row-major layout
    np.testing.assert_allclose(data.y_f, sim.forcing.ravel(), rtol=0, atol=1e-10)
    np.testing.assert_allclose(data.y_u, sim.u.ravel(), rtol=0, atol=0)


# -- simulator --

def test_decay_ode():
    c, lam = 50.0, 0.1
    grid = gg.SimGrid(dt=2e-4, t_end=10.0)
    sim = gg.integrate(lam, 0.0, sample_times=(5.0, 10.0), grid=grid, u0=c,
                       forcing=lambda t, x, u: 0.0 * u)
    for row, t in zip(sim.u, sim.times):
        np.testing.assert_allclose(row, c * math.exp(-lam * t), rtol=1e-4)


def test_mass_conservation():
    grid = gg.SimGrid()
    u0 = lambda x: 100 * np.exp(-((x - 50) / 5) ** 2) + 20
    sim = gg.integrate(0.0, 0.4, sample_times=(68.0,), grid=grid, u0=u0,
                       forcing=lambda t, x, u: 0.0 * u)
    m0 = gg.mass(u0(grid.x), grid.dx)
    assert gg.mass(sim.u[-1], grid.dx) == pytest.approx(m0, rel=1e-6)


def test_grid_refinement():
    coarse = gg.integrate(0.1, 0.4, sample_times=(68.0,), grid=gg.SimGrid(dx=0.5, dt=0.02))
    fine = gg.integrate(0.1, 0.4, sample_times=(68.0,), grid=gg.SimGrid(dx=0.25, dt=0.01))
    np.testing.assert_array_equal(fine.x[::2], coarse.x)
    a, b = coarse.u[-1], fine.u[-1][::2]
    assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 1e-3


def test_stability_violation_names_required_step():
    with pytest.raises(InvalidArgumentError, match=r"0\.4\*dx\^2/D = 0\.1"):
        gg.integrate(0.1, 1.0, sample_times=(1.0,), grid=gg.SimGrid(dt=0.2))


def test_simulator_errors():
    with pytest.raises(InvalidArgumentError):
        gg.SimGrid(dx=0.7)
    with pytest.raises(InvalidArgumentError):
        gg.integrate(-0.1, 0.4, sample_times=(1.0,))
    with pytest.raises(InvalidArgumentError):
        gg.integrate(0.1, 0.4, sample_times=(70.0,))
    with pytest.raises(InvalidArgumentError):
        gg.integrate(0.1, 0.4, regulators={"Bcd": lambda t, x: 0 * x}, sample_times=(1.0,))
    with pytest.raises(DataGenerationError):
        gg.simulate_forward(0.0, 0.4, sample_times=(30.0,), u0=254.0)
    with pytest.raises(InvalidArgumentError):
        gg.simulate_forward(0.1, 0.4, sample_points=[(30.0, 50.3)])


def test_regulators_from_records_reproduce_fields():
    recs = gg.simulate_forward(0.1, 0.4, sample_times=(24.0, 40.0, 68.0))
    fields = gg.regulators_from_records(recs)
    truth = gg.synthetic_regulators()
    np.testing.assert_allclose(fields["Bcd"](40.0, 60.0), truth["Bcd"](40.0, 60.0), rtol=1e-12)
    # linear in time between sample rows, nearest value outside
    assert np.isfinite(fields["Kr"](0.0, 50.0))


def test_synth_points_distinct_lattice():
    pts = gg.synth_points(60, seed=3)
    assert len(set(pts)) == 60
    assert all(24.0 <= t <= 68.0 and float(t).is_integer() for t, _ in pts)
    assert pts == gg.synth_points(60, seed=3)


# -- inference --

def test_small_diffusion_recovery():
    lam, D = 0.10, 0.05
    recs = gg.synth_records(lam, D, n_points=60, seed=0)
    lam_hat, D_hat, _ = gg.fit_gene(recs, gg.SYNTH_GENE, train_cfg=gg.default_gene_config(seed=0))
    assert abs(lam_hat - lam) / lam <= 0.3
    assert abs(D_hat - D) / D <= 0.3


@pytest.mark.slow
def test_recovery_improves_with_more_points():
    lam, D = 0.10, 0.40
    mean_err = []
    for n in (20, 40, 80):
        errs = []
        for seed in range(5):
            recs = gg.synth_records(lam, D, n_points=n, seed=seed)
            l_hat, d_hat, _ = gg.fit_gene(recs, gg.SYNTH_GENE,
                                          train_cfg=gg.default_gene_config(seed=seed))
            errs.append(abs(l_hat - lam) / lam + abs(d_hat - D) / D)
        mean_err.append(float(np.mean(errs)))
    assert mean_err[0] >= mean_err[1] >= mean_err[2], mean_err
