import numpy as np
import pytest

from ddflow.model import (ADVISORY, DiagnosticsConfig, ModelError, check_smallness,
                          default_boussinesq_model, linear_buoyancy, quadratic_buoyancy,
                          saturating_buoyancy, tanh_viscosity)

T = np.linspace(-4, 4, 41)
H = 1e-5


def _fd(f, x):
    return (f(x + H) - f(x - H)) / (2 * H)


def test_tanh_bounds():
    v = tanh_viscosity(1.0, 0.5)
    assert (v.nu1, v.nu2, v.gamma_nu) == (0.5, 1.5, 0.5)


def test_gamma_zero_is_constant():
    v = tanh_viscosity(2.0, 0.0)
    assert np.all(v.nu(T) == 2.0) and np.all(v.nu_T(T) == 0.0)


@pytest.mark.parametrize("gamma", [1.0, 1.5, -0.1])
def test_gamma_out_of_range_rejected(gamma):
    with pytest.raises(ModelError):
        tanh_viscosity(1.0, gamma)


def test_viscosity_derivative_chain():
    v = tanh_viscosity(1.3, 0.7)
    for f, df in ((v.nu, v.nu_T), (v.nu_T, v.nu_TT), (v.nu_TT, v.nu_TTT)):
        assert np.allclose(_fd(f, T), df(T), rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("make", [lambda: linear_buoyancy(1.0, 0.5),
                                  lambda: saturating_buoyancy(1.0, 0.5),
                                  lambda: quadratic_buoyancy(0.7)])
def test_buoyancy_derivative_chain(make):
    b = make()
    rng = np.random.default_rng(0)
    Ts, Ss = rng.normal(size=20), rng.normal(size=20)
    y = [Ts, Ss]

    def shift(l, s):
        z = [Ts.copy(), Ss.copy()]
        z[l] = z[l] + s
        return z
    for k in range(2):
        for l in range(2):
            fd = (b.F(*shift(l, H))[k] - b.F(*shift(l, -H))[k]) / (2 * H)
            assert np.allclose(fd, b.F_y(*y)[k][l], rtol=1e-6, atol=1e-8)
            for m in range(2):
                fd2 = (b.F_y(*shift(m, H))[k][l] - b.F_y(*shift(m, -H))[k][l]) / (2 * H)
                assert np.allclose(fd2, b.F_yy(*y)[k][l][m], rtol=1e-6, atol=1e-8)
                for p in range(2):
                    fd3 = (b.F_yy(*shift(p, H))[k][l][m]
                           - b.F_yy(*shift(p, -H))[k][l][m]) / (2 * H)
                    assert np.allclose(fd3, b.F_yyy(*y)[k][l][m][p], rtol=1e-6, atol=1e-8)


def test_default_constants():
    m = default_boussinesq_model(g_T=3.0, g_S=4.0)
    assert m.buoyancy.C_F == 5.0 and m.buoyancy.gamma_F == 5.0
    assert m.viscosity.gamma_nu == 0.5


def test_zero_buoyancy():
    m = default_boussinesq_model(g_T=0.0, g_S=0.0)
    f = m.buoyancy.F(T, T)
    assert np.all(f[0] == 0) and np.all(f[1] == 0)


@pytest.mark.parametrize("kw", [dict(lam=0.0), dict(lam=-1.0),
                                dict(D=[[1.0, 0.0], [0.0, -1.0]]),
                                dict(Kinv=[[1.0, 2.0], [0.0, 1.0]]),
                                dict(Kinv=[[-1.0, 0.0], [0.0, 1.0]])])
def test_invalid_models_rejected(kw):
    with pytest.raises(ModelError):
        default_boussinesq_model(**kw)


def test_unknown_buoyancy_rejected():
    with pytest.raises(ModelError, match="unknown buoyancy"):
        default_boussinesq_model(buoyancy="cubic")


def test_coercivity():
    m = default_boussinesq_model(Kinv=[[2.0, 0.0], [0.0, 3.0]], D=[[1.0, 0.1], [0.2, 1.0]])
    assert m.alpha1 == 2.0 and np.isclose(m.alpha2, 0.85)


def test_smallness_zero_data_passes():
    m = default_boussinesq_model(gamma=0.0, g_T=0.0)
    rep = check_smallness(m, 0.0, 0.0, 0.0)
    assert rep["verdict"] and rep["label"] == ADVISORY


def test_smallness_monotone_in_mu():
    m = default_boussinesq_model()
    a = check_smallness(m, 0.0, 0.0, 0.0)["alpha_a"]
    assert check_smallness(m, 0.9 * a, 0.0, 0.0)["verdict"]
    assert not check_smallness(m, 1.1 * a, 0.0, 0.0)["verdict"]


def test_smallness_echoes_inputs():
    rep = check_smallness(default_boussinesq_model(), 0.1, 0.2, 0.3)
    assert (rep["Mu"], rep["My"], rep["M"]) == (0.1, 0.2, 0.3)


def test_diagnostics_constants_positive():
    with pytest.raises(ValueError):
        DiagnosticsConfig(C6=0.0)
