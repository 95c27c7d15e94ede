"""Physical coefficients, their derivatives and the advisory smallness check."""
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np


class ModelError(ValueError):
    """A coefficient violates one of the standing model assumptions."""


@dataclass(frozen=True)
class ViscosityModel:
    """nu(T) with derivatives up to third order and its declared bounds."""

    nu: Callable
    nu_T: Callable
    nu_TT: Callable
    nu_TTT: Callable
    nu1: float
    nu2: float
    gamma_nu: float
    name: str = "custom"


@dataclass(frozen=True)
class BuoyancyModel:
    """F(y) for y = (T, S).

    ``F(T, S)`` returns a pair of arrays; ``F_y`` a nested 2x2 list of arrays
    (``F_y[k][l] = dF_k/dy_l``); ``F_yy[k][l][m]`` and ``F_yyy[k][l][m][n]``
    likewise.
    """

    F: Callable
    F_y: Callable
    F_yy: Callable
    F_yyy: Callable
    gamma_F: float
    C_F: float
    name: str = "custom"
    linear: bool = False


def tanh_viscosity(nu0=1.0, gamma=0.5):
    """nu(T) = nu0 (1 + gamma tanh T), bounded in [nu0 (1 - gamma), nu0 (1 + gamma)]."""
    if nu0 <= 0:
        raise ModelError(f"nu0 must be positive, got {nu0}")
    if not 0 <= gamma < 1:
        raise ModelError(f"gamma must lie in [0, 1) so that nu stays positive, got {gamma}")

    def nu(T):
        return nu0 * (1.0 + gamma * np.tanh(T))

    def nu_T(T):
        return nu0 * gamma / np.cosh(T) ** 2

    def nu_TT(T):
        t = np.tanh(T)
        return -2.0 * nu0 * gamma * t * (1.0 - t * t)

    def nu_TTT(T):
        t = np.tanh(T)
        s2 = 1.0 - t * t
        return -2.0 * nu0 * gamma * s2 * (1.0 - 3.0 * t * t)

    return ViscosityModel(nu, nu_T, nu_TT, nu_TTT, nu0 * (1 - gamma), nu0 * (1 + gamma),
                          nu0 * gamma, name="tanh")


def linear_buoyancy(g_T=1.0, g_S=0.0):
    """Boussinesq buoyancy F(y) = (0, g_T T + g_S S)."""
    C = float(np.hypot(g_T, g_S))

    def F(T, S):
        return np.zeros_like(T + S), g_T * T + g_S * S

    def F_y(T, S):
        z = np.zeros_like(T + S)
        return [[z, z], [z + g_T, z + g_S]]

    def F_yy(T, S):
        z = np.zeros_like(T + S)
        return [[[z, z], [z, z]], [[z, z], [z, z]]]

    def F_yyy(T, S):
        z = np.zeros_like(T + S)
        return [[[[z] * 2] * 2] * 2] * 2

    return BuoyancyModel(F, F_y, F_yy, F_yyy, C, C, name="linear", linear=True)


def saturating_buoyancy(g_T=1.0, g_S=0.0):
    """F(y) = (0, g_T tanh T + g_S tanh S); globally Lipschitz with F(0) = 0."""
    C = float(np.hypot(g_T, g_S))

    def F(T, S):
        return np.zeros_like(T + S), g_T * np.tanh(T) + g_S * np.tanh(S)

    def F_y(T, S):
        z = np.zeros_like(T + S)
        return [[z, z], [g_T / np.cosh(T) ** 2 + z, g_S / np.cosh(S) ** 2 + z]]

    def F_yy(T, S):
        z = np.zeros_like(T + S)

        def d2(g, x):
            t = np.tanh(x)
            return -2.0 * g * t * (1.0 - t * t) + z
        return [[[z, z], [z, z]], [[d2(g_T, T), z], [z, d2(g_S, S)]]]

    def F_yyy(T, S):
        z = np.zeros_like(T + S)

        def d3(g, x):
            t = np.tanh(x)
            return -2.0 * g * (1.0 - t * t) * (1.0 - 3.0 * t * t) + z
        zz = [[z, z], [z, z]]
        return [[zz, zz], [[[d3(g_T, T), z], [z, z]], [[z, z], [z, d3(g_S, S)]]]]

    return BuoyancyModel(F, F_y, F_yy, F_yyy, C, C, name="saturating")


def quadratic_buoyancy(g=1.0):
    """F(y) = (0, g T^2). Not globally Lipschitz; verification use only."""

    def F(T, S):
        return np.zeros_like(T + S), g * T * T + 0 * S

    def F_y(T, S):
        z = np.zeros_like(T + S)
        return [[z, z], [2 * g * T + z, z]]

    def F_yy(T, S):
        z = np.zeros_like(T + S)
        return [[[z, z], [z, z]], [[z + 2 * g, z], [z, z]]]

    def F_yyy(T, S):
        z = np.zeros_like(T + S)
        return [[[[z] * 2] * 2] * 2] * 2

    return BuoyancyModel(F, F_y, F_yy, F_yyy, np.inf, np.inf, name="quadratic")


VISCOSITY_REGISTRY = {"tanh": tanh_viscosity}
BUOYANCY_REGISTRY = {"linear": linear_buoyancy, "saturating": saturating_buoyancy}


def _zero_field(x, y):
    return 0.0 * x


@dataclass(frozen=True)
class PhysicalModel:
    """Coefficient bundle for the state system and the cost.

    Desired states and boundary data are callables ``f(x, y)`` returning a
    pair of arrays; sources are callables returning pairs as well.
    """

    Kinv: np.ndarray
    D: np.ndarray
    viscosity: ViscosityModel
    buoyancy: BuoyancyModel
    lam: float
    u_d: Callable = lambda x, y: (_zero_field(x, y), _zero_field(x, y))
    y_d: Callable = lambda x, y: (_zero_field(x, y), _zero_field(x, y))
    yD: Callable = lambda x, y: (_zero_field(x, y), _zero_field(x, y))
    f_u: Optional[Callable] = None
    f_y: Optional[Callable] = None
    # optional nodal overrides for desired states (P2 coefficient vectors)
    u_d_nodal: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    y_d_nodal: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        validate(self)

    @property
    def alpha1(self):
        K = np.asarray(self.Kinv, dtype=float)
        if K.ndim == 2:
            return float(np.linalg.eigvalsh(0.5 * (K + K.T)).min())
        return float(np.linalg.eigvalsh(0.5 * (K + np.swapaxes(K, 1, 2))).min())

    @property
    def alpha2(self):
        D = np.asarray(self.D, dtype=float)
        return float(np.linalg.eigvalsh(0.5 * (D + D.T)).min())

    def with_(self, **changes):
        return replace(self, **changes)


def validate(model, n_samples=64, seed=0):
    """Check the standing assumptions on sampled points; raise :class:`ModelError`."""
    if not model.lam > 0:
        raise ModelError(f"lambda must be positive, got {model.lam}")
    D = np.asarray(model.D, dtype=float)
    if D.shape != (2, 2):
        raise ModelError("D must be a 2x2 matrix")
    if model.alpha2 <= 0:
        raise ModelError("D must be positive definite (symmetric part has eigenvalue <= 0)")
    K = np.asarray(model.Kinv, dtype=float)
    if K.shape[-2:] != (2, 2):
        raise ModelError("Kinv must be 2x2 or an array of 2x2 matrices")
    if not np.allclose(K, np.swapaxes(K, -1, -2)):
        raise ModelError("Kinv must be symmetric")
    if model.alpha1 <= 0:
        raise ModelError("Kinv must be positive definite")
    visc = model.viscosity
    if not (0 < visc.nu1 <= visc.nu2):
        raise ModelError("viscosity bounds must satisfy 0 < nu1 <= nu2")
    rng = np.random.default_rng(seed)
    T = np.concatenate([np.linspace(-20, 20, n_samples), rng.normal(0, 3, n_samples)])
    nu = visc.nu(T)
    tol = 1e-12 * max(1.0, visc.nu2)
    if nu.min() < visc.nu1 - tol or nu.max() > visc.nu2 + tol:
        raise ModelError("sampled viscosity leaves the declared range [nu1, nu2]")
    T2 = rng.normal(0, 3, T.size)
    if np.any(np.abs(nu - visc.nu(T2)) > visc.gamma_nu * np.abs(T - T2) + tol):
        raise ModelError("sampled viscosity violates its Lipschitz bound")
    buoy = model.buoyancy
    if np.isfinite(buoy.C_F):
        y1 = rng.normal(0, 3, (2, n_samples))
        y2 = rng.normal(0, 3, (2, n_samples))
        F1 = np.array(buoy.F(*y1))
        F2 = np.array(buoy.F(*y2))
        if np.any(np.linalg.norm(F1, axis=0) > buoy.C_F * np.linalg.norm(y1, axis=0) + 1e-12):
            raise ModelError("sampled buoyancy violates |F(y)| <= C_F |y|")
        if np.any(np.linalg.norm(F1 - F2, axis=0)
                  > buoy.gamma_F * np.linalg.norm(y1 - y2, axis=0) + 1e-12):
            raise ModelError("sampled buoyancy violates its Lipschitz bound")
    return True


def default_boussinesq_model(nu0=1.0, gamma=0.5, g_T=1.0, g_S=0.0, Kinv=None, D=None,
                             lam=1.0, buoyancy="linear", **data):
    """Tanh viscosity with linear (or saturating) Boussinesq buoyancy."""
    Kinv = np.eye(2) if Kinv is None else np.asarray(Kinv, dtype=float)
    D = np.eye(2) if D is None else np.asarray(D, dtype=float)
    if buoyancy not in BUOYANCY_REGISTRY:
        raise ModelError(f"unknown buoyancy model {buoyancy!r}; "
                         f"choose from {sorted(BUOYANCY_REGISTRY)}")
    return PhysicalModel(Kinv=Kinv, D=D, viscosity=tanh_viscosity(nu0, gamma),
                         buoyancy=BUOYANCY_REGISTRY[buoyancy](g_T, g_S), lam=lam, **data)


@dataclass(frozen=True)
class DiagnosticsConfig:
    """Surrogate embedding/Poincare constants for the advisory diagnostics.

    None of these are computed; all default to 1 and are user-overridable.
    ``poincare`` converts nu1 into an H1 coercivity constant:
    alpha_a = min(nu1, alpha1) / poincare.
    """

    C6: float = 1.0
    C3: float = 1.0
    Cgn: float = 1.0
    Cp2: float = 1.0
    C4: float = 1.0
    C2r: float = 1.0
    poincare: float = 1.0
    advisory: bool = True

    def __post_init__(self):
        for name in ("C6", "C3", "Cgn", "Cp2", "C4", "C2r", "poincare"):
            if not getattr(self, name) > 0:
                raise ValueError(f"diagnostic constant {name} must be positive")


ADVISORY = "ADVISORY (surrogate constants)"


def coercivity_constants(model, config):
    alpha_a = min(model.viscosity.nu1, model.alpha1) / config.poincare
    return alpha_a, model.alpha2


def check_smallness(model, Mu, My, M, config=DiagnosticsConfig(), alpha_a=None):
    """Evaluate the uniqueness smallness condition with surrogate constants.

    Returns a dict with both sides and a boolean ``verdict``; the verdict is
    advisory because the embedding constants are surrogates.
    """
    a_a, a_hat = coercivity_constants(model, config)
    if alpha_a is not None:
        a_a = alpha_a
    g_nu = model.viscosity.gamma_nu
    g_F = model.buoyancy.gamma_F
    rhs = config.C6 * config.C3 * (g_nu * config.Cp2 * config.Cgn * M * My / a_hat
                                   + Mu + g_F * My / a_hat)
    return {"label": ADVISORY, "Mu": Mu, "My": My, "M": M, "alpha_a": a_a,
            "alpha_hat_a": a_hat, "gamma_nu": g_nu, "gamma_F": g_F,
            "lhs": a_a, "rhs": rhs, "verdict": bool(a_a > rhs)}
