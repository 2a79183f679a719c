import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linopgp.dsl import parse_operator
from linopgp.errors import (ConfigurationError, InvalidArgumentError, NumericalError,
                            TrainingError)
from linopgp.gp import JointDataset, ModelParams, nlml
from linopgp.kernel import SEKernelParams
from linopgp.trainer import (ParamLayout, TrainConfig, fd_gradient, fit, initial_point, pack,
                             unpack)

INTEGRO = parse_operator("d/dx + a*u + b*int[x]")


def integro_data(rng, n_u=4, n_f=3):
    X_u = rng.uniform(0, 1, n_u)
    X_f = rng.uniform(0, 1, n_f)
    f = 3 * np.cos(3 * X_f) + 2 * np.sin(3 * X_f) + 5 * (1 - np.cos(3 * X_f)) / 3
    return JointDataset(X_u, np.sin(3 * X_u), X_f, f)


# -- pack / unpack --

def test_pack_examples():
    layout = ParamLayout(INTEGRO, TrainConfig())
    assert layout.names == ["variance", "w[x]", "a", "b", "noise_u", "noise_f"]
    p = ModelParams(SEKernelParams(1.0, [np.e]), {"a": 2.0, "b": -5.0}, 1e-4, 1e-2)
    v = pack(p, layout)
    assert v[0] == 0.0
    assert v[1] == pytest.approx(1.0, rel=1e-15)
    assert v[2] == 2.0 and v[3] == -5.0
    assert v[4] == pytest.approx(np.log(1e-4), rel=1e-15)


def test_pack_rejects_nonpositive_log_entry():
    layout = ParamLayout(INTEGRO, TrainConfig(transforms={"a": "log"}))
    p = ModelParams(SEKernelParams(1.0, [1.0]), {"a": -2.0, "b": 1.0}, 1e-4, 1e-4)
    with pytest.raises(InvalidArgumentError):
        pack(p, layout)


@settings(max_examples=200)
@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3),
       st.floats(1e-12, 1.0), st.floats(1e-12, 1.0))
def test_pack_unpack_round_trip(var, w, a, b, nu, nf):
    layout = ParamLayout(INTEGRO, TrainConfig())
    p = ModelParams(SEKernelParams(var, [w]), {"a": a, "b": b}, nu, nf)
    q = unpack(pack(p, layout), layout)
    assert q.theta.variance == pytest.approx(var, rel=1e-14)
    assert q.theta.weights[0] == pytest.approx(w, rel=1e-14)
    assert q.phi["a"] == a and q.phi["b"] == b
    assert q.noise_u == pytest.approx(nu, rel=1e-14)
    assert q.noise_f == pytest.approx(nf, rel=1e-14)


def test_layout_defaults_and_fixed_noise():
    frac = parse_operator("frac[x,alpha] + c*u")
    layout = ParamLayout(frac, TrainConfig(noise_u=1e-10, noise_f=1e-10))
    assert layout.names == ["variance", "w[x]", "alpha", "c"]
    assert layout.transforms["alpha"] == "log"
    assert layout.transforms["c"] == "identity"
    assert unpack(np.zeros(4), layout).noise_u == 1e-10
    heat = parse_operator("d/dt - k*d2/dx2", ["t", "x"])
    layout = ParamLayout(heat, TrainConfig(transforms={"k": "log", "weights": "log"}))
    assert layout.names[:4] == ["variance", "w[t]", "w[x]", "k"]
    assert layout.transforms["k"] == "log"


def test_unknown_parameter_names():
    with pytest.raises(ConfigurationError):
        ParamLayout(INTEGRO, TrainConfig(transforms={"gamma": "log"}))
    with pytest.raises(ConfigurationError):
        ParamLayout(INTEGRO, TrainConfig(init={"w[y]": 1.0}))


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        TrainConfig(restarts=0)
    with pytest.raises(InvalidArgumentError):
        TrainConfig(fd_step=1e-2)
    with pytest.raises(InvalidArgumentError):
        TrainConfig(fd_step=1e-10)
    with pytest.raises(InvalidArgumentError):
        TrainConfig(noise_u=-1.0)
    with pytest.raises(InvalidArgumentError):
        TrainConfig(transforms={"a": "sqrt"})
    with pytest.raises(InvalidArgumentError):
        TrainConfig(seed=-1)
    assert TrainConfig().noise_ladder == ()
    assert TrainConfig(noise_f=1e-10).noise_ladder == (1e-2, 1e-4, 1e-6)
    assert TrainConfig(noise_f=1e-10, noise_ladder=()).noise_ladder == ()


# -- finite-difference gradient --

def test_fd_gradient_quadratic(rng):
    for _ in range(10):
        v = rng.normal(size=5) * 10
        g = fd_gradient(lambda x: 0.5 * float(x @ x), v, 1e-6)
        np.testing.assert_allclose(g, v, atol=1e-8 * max(1, np.max(np.abs(v))))


def test_fd_gradient_constant():
    np.testing.assert_allclose(fd_gradient(lambda x: 3.0, np.ones(4)), 0.0, atol=1e-10)


def test_fd_gradient_nonfinite_names_coordinate():
    def f(x):
        return np.inf if x[2] > 1.0 else 0.0

    with pytest.raises(NumericalError, match="coordinate 2"):
        fd_gradient(f, np.array([0.0, 0.0, 1.0]))


def test_fd_gradient_richardson_self_consistency(rng):
    data = integro_data(rng)
    layout = ParamLayout(INTEGRO, TrainConfig())
    p = ModelParams(SEKernelParams(1.0, [3.0]), {"a": 1.5, "b": 4.0}, 1e-3, 1e-3)
    v = pack(p, layout)

    def obj(x):
        return nlml(data, INTEGRO, unpack(x, layout))

    g1 = fd_gradient(obj, v, 1e-4)
    g2 = fd_gradient(obj, v, 5e-5)
    np.testing.assert_allclose(g1, g2, rtol=1e-4)


# -- initialisation --

def test_initial_point_rules(rng):
    data = integro_data(rng)
    cfg = TrainConfig()
    layout = ParamLayout(INTEGRO, cfg)
    r = np.ptp(np.concatenate([data.X_u[:, 0], data.X_f[:, 0]]))
    for _ in range(50):
        vals = initial_point(data, layout, cfg, rng)
        assert vals["variance"] == pytest.approx(np.var(data.y_u))
        assert 0.1 / r ** 2 <= vals["w[x]"] <= 10 / r ** 2
        assert vals["noise_u"] == pytest.approx(1e-4 * np.var(data.y_u))
    frac = parse_operator("frac[x,al] - u")
    lay = ParamLayout(frac, cfg)
    assert initial_point(data, lay, cfg, rng)["al"] == 1.0
    over = TrainConfig(init={"a": 7.0})
    assert initial_point(data, ParamLayout(INTEGRO, over), over, rng)["a"] == 7.0


# -- fit --

@pytest.mark.parametrize("c_star", [0.5, 1.0, 2.0])
def test_scaling_recovery(rng, c_star):
    X = np.linspace(0, 1, 8)
    y = np.sin(4 * X) + 0.3
    data = JointDataset(X, y, X, c_star * y)
    cfg = TrainConfig(restarts=3, seed=1, noise_u=1e-10, noise_f=1e-10)
    model, report = fit(data, parse_operator("c*u"), cfg)
    assert report.best.phi["c"] == pytest.approx(c_star, rel=1e-3)


def test_fit_determinism(rng):
    data = integro_data(rng)
    cfg = TrainConfig(restarts=2, seed=7, max_iters=60)
    _, r1 = fit(data, INTEGRO, cfg)
    _, r2 = fit(data, INTEGRO, cfg)
    assert r1.to_dict() == r2.to_dict()


def test_fit_report_invariants(rng):
    data = integro_data(rng)
    _, report = fit(data, INTEGRO, TrainConfig(restarts=3, seed=3, max_iters=80))
    finals = [t.final_nlml for t in report.restarts]
    assert report.best_nlml == min(finals)
    assert all(report.best_nlml <= t.initial_nlml for t in report.restarts)
    assert report.iterations == sum(t.iterations for t in report.restarts)


def test_zero_data_monotone_improvement():
    X = np.linspace(0, 1, 5)
    data = JointDataset(X, np.zeros(5), X[:3] + 0.05, np.zeros(3))
    _, report = fit(data, INTEGRO, TrainConfig(restarts=2, seed=0, max_iters=50))
    assert all(t.final_nlml <= t.initial_nlml for t in report.restarts)


def test_all_restarts_failing_raises_training_error(rng):
    data = integro_data(rng)
    # an order of 400 overflows the spectral weights at every reachable point
    X = np.concatenate([data.X_u[:, 0], data.X_f[:, 0]])
    frac = parse_operator("frac[x,al] - u")
    cfg = TrainConfig(restarts=2, init={"al": 400.0, "w[x]": 1e4}, noise_u=1e-6)
    mixed = JointDataset(X[:3], np.sin(X[:3]), X[3:], np.sin(X[3:]))
    with pytest.raises(TrainingError) as info:
        fit(mixed, frac, cfg)
    assert len(info.value.diagnostics) == 2


def test_fit_dimension_mismatch(rng):
    data = integro_data(rng)
    with pytest.raises(InvalidArgumentError):
        fit(data, parse_operator("d/dt - a*d2/dx2", ["t", "x"]), TrainConfig(restarts=1))
