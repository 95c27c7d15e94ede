"""Second-order diagnostics at a KKT point.

Probes here can falsify or witness coercivity on a sampled subspace; they
never certify it. Threshold and smallness reports use surrogate constants
and are labeled accordingly.
"""
from dataclasses import dataclass, field

import numpy as np

from .fem.spaces import _p1_ref_grads
from .model import ADVISORY, DiagnosticsConfig, check_smallness
from .optimizer import (ControlField, cell_average, cost_from_state, inner, l1_norm, l43_norm,
                        reduced_cost)
from .sensitivity import Sensitivity
from .state import NewtonOptions, residual

WITNESS_NOTE = "SSC witnessed on sampled subspace (a necessary check, not a proof)"


# -- strongly active sets ----------------------------------------------------------

@dataclass
class ActiveSetMask:
    epsilon: float
    mask: np.ndarray     # (n_cells, 2) bool

    @property
    def count(self):
        return int(self.mask.sum())


def strongly_active_set(U, phi_avg, lam, epsilon):
    """Mask of |lam U_i + phi_i| > epsilon, cellwise and per component.

    ``U`` and ``phi_avg`` are cellwise arrays (or a :class:`ControlField`).
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    vals = U.values if isinstance(U, ControlField) else np.asarray(U, dtype=float)
    return ActiveSetMask(float(epsilon), np.abs(lam * vals + phi_avg) > epsilon)


def default_epsilon(U, phi_avg, lam):
    """1e-3 max |lam U + phi| over components sitting at a bound.

    Off the bounds |lam U + phi| only carries the KKT tolerance, so it must not
    set the scale. With no component at a bound the fallback 1e-3 lam max(1, |U|)
    sits far above that noise.
    """
    vals = U.values
    g = np.abs(lam * vals + phi_avg)
    at_bound = (vals <= U.lower) | (vals >= U.upper)
    if np.any(at_bound):
        return 1e-3 * float(np.max(g[at_bound]))
    return 1e-3 * lam * max(1.0, float(np.max(np.abs(vals))))


def verify_active_estimate(area, U, Ubar, phi_avg, lam, mask, rtol=1e-12):
    """Check sum_i int_{mask_i} (lam Ubar_i + phi_i)(U_i - Ubar_i) >= eps |U - Ubar|_{L1, mask}."""
    U = U.values if isinstance(U, ControlField) else np.asarray(U, dtype=float)
    Ubar = Ubar.values if isinstance(Ubar, ControlField) else np.asarray(Ubar, dtype=float)
    w = area[:, None] * mask.mask
    g = lam * Ubar + phi_avg
    lhs = float(np.sum(w * g * (U - Ubar)))
    rhs = float(mask.epsilon * np.sum(w * np.abs(U - Ubar)))
    slack = rtol * max(abs(lhs), abs(rhs), 1.0)
    return {"lhs": lhs, "rhs": rhs, "epsilon": mask.epsilon, "active": mask.count,
            "passed": lhs >= rhs - slack}


# -- Lagrangian and its second derivative ----------------------------------------------

def _qp(space, vec, n):
    v = [space.evaluate(vec[k * n:(k + 1) * n]) for k in range(2)]
    g = [space.evaluate_grad(vec[k * n:(k + 1) * n]) for k in range(2)]
    return v, g


def _skew_trilinear(wq, w, zv, zg, sv, sg):
    """1/2[((w.grad) z, s) - ((w.grad) s, z)] summed over two components."""
    tot = 0.0
    for k in range(2):
        wz = w[0] * zg[k][..., 0] + w[1] * zg[k][..., 1]
        ws = w[0] * sg[k][..., 0] + w[1] * sg[k][..., 1]
        tot += np.sum(wq * (wz * sv[k] - ws * zv[k]))
    return 0.5 * float(tot)


def lagrangian(disc, x, U, adjoint):
    """Full discrete Lagrangian j(x, U) - <(phi, xi, eta, 0), R(x, U)>."""
    state = disc.unpack(x)
    psi = np.zeros(disc.size)
    psi[disc.su] = adjoint.phi
    psi[disc.sp_] = adjoint.xi
    psi[disc.sy] = adjoint.eta
    return cost_from_state(disc, state, U) - float(psi @ residual(disc, x, U))


def lagrangian_second_form(disc, state, adjoint, zeta, mu, h, cross_terms=True):
    """Quadratic form L_ww[(zeta, mu, h)]^2 at (state, adjoint).

    |zeta|^2 - 2 c~(zeta, zeta, phi) + |mu|^2 - (nu_TT mu_T^2 grad u, grad phi)
    + (F_yy (mu, mu), phi) + lam |h|^2; with ``cross_terms`` also the mixed
    velocity/pair terms -2 (nu_T mu_T grad zeta, grad phi) - 2 c~_y(zeta, mu, eta).
    """
    d = disc
    n = d.n2
    P2 = d.P2
    model = d.model
    wq = d.geometry.wdet
    h = np.asarray(h, dtype=float)

    zv, zg = _qp(P2, zeta, n)
    mv, mg = _qp(P2, mu, n)
    uv, ug = _qp(P2, state.u, n)
    yv, _ = _qp(P2, state.y, n)
    pv, pg = _qp(P2, adjoint.phi, n)
    ev, eg = _qp(P2, adjoint.eta, n)

    val = float(zeta @ (d.M @ zeta) + mu @ (d.M @ mu) + model.lam * inner(d.area, h, h))
    val -= 2.0 * _skew_trilinear(wq, zv, zv, zg, pv, pg)
    T = yv[0]
    grad_u_phi = sum(np.sum(ug[k] * pg[k], axis=-1) for k in range(2))
    val -= float(np.sum(wq * model.viscosity.nu_TT(T) * mv[0] ** 2 * grad_u_phi))
    Fyy = model.buoyancy.F_yy(yv[0], yv[1])
    for k in range(2):
        for l in range(2):
            for m in range(2):
                val += float(np.sum(wq * Fyy[k][l][m] * mv[l] * mv[m] * pv[k]))
    if cross_terms:
        grad_z_phi = sum(np.sum(zg[k] * pg[k], axis=-1) for k in range(2))
        val -= 2.0 * float(np.sum(wq * model.viscosity.nu_T(T) * mv[0] * grad_z_phi))
        val -= 2.0 * _skew_trilinear(wq, zv, mv, mg, ev, eg)
    return val


def second_difference(disc, state, U, adjoint, zeta, mu, h, t=1e-2):
    """Five-point second difference of the Lagrangian along (zeta, mu, h)."""
    x0 = disc.pack(state)
    dx = np.zeros(disc.size)
    dx[disc.su] = zeta
    dx[disc.sy] = mu
    vals = U.values if isinstance(U, ControlField) else np.asarray(U, dtype=float)
    f = {k: lagrangian(disc, x0 + k * t * dx, vals + k * t * np.asarray(h), adjoint)
         for k in (-2, -1, 0, 1, 2)}
    return (-f[2] + 16 * f[1] - 30 * f[0] + 16 * f[-1] - f[-2]) / (12 * t * t)


# -- curvature probes ---------------------------------------------------------------

@dataclass
class CurvatureProbeResult:
    direction: int
    L_ww: float
    h43_sq: float
    sigma: float


@dataclass
class ProbeReport:
    results: list = field(default_factory=list)
    epsilon: float = 0.0
    active: int = 0
    verdict: float = None
    notice: str = ""

    def csv_rows(self):
        return [(r.direction, r.L_ww, r.h43_sq, r.sigma) for r in self.results]


def _admissible_direction(rng, U, active):
    """Random h with h = 0 on the strongly active set and U + t h feasible for small t."""
    h = rng.standard_normal(U.values.shape)
    h[active] = 0.0
    at_lower = U.values <= U.lower
    at_upper = U.values >= U.upper
    h[at_lower] = np.abs(h[at_lower])
    h[at_upper] = -np.abs(h[at_upper])
    h[at_lower & at_upper] = 0.0
    return h


def ssc_curvature_probe(disc, U, state, adjoint, epsilon=None, n_dirs=50, seed=0,
                        cross_terms=True):
    """Sample sigma_est = L_ww / |h|_{4/3}^2 over seeded admissible directions."""
    lam = disc.model.lam
    phi_avg = cell_average(disc, adjoint.phi)
    eps = default_epsilon(U, phi_avg, lam) if epsilon is None else epsilon
    if not eps > 0:
        eps = np.finfo(float).tiny
    mask = strongly_active_set(U, phi_avg, lam, eps)
    rep = ProbeReport(epsilon=eps, active=mask.count)
    rng = np.random.default_rng(seed)
    sens = Sensitivity(disc, state)
    for i in range(n_dirs):
        h = _admissible_direction(rng, U, mask.mask)
        if not np.any(h):
            continue
        lin = sens.linearized(h)
        L = lagrangian_second_form(disc, state, adjoint, lin.zeta, lin.mu, h, cross_terms)
        n43 = l43_norm(disc.area, h) ** 2
        rep.results.append(CurvatureProbeResult(i, L, n43, L / n43))
    if not rep.results:
        rep.notice = "degenerate probe: every sampled direction vanishes (fully active control)"
        return rep
    rep.verdict = min(r.sigma for r in rep.results)
    rep.notice = WITNESS_NOTE if rep.verdict > 0 else "SSC not witnessed: negative curvature sampled"
    return rep


def quadratic_growth_check(disc, U, state, radius=0.1, n_samples=100, seed=0, opts=None):
    """theta_est = min (j(U) - j(Ubar)) / |U - Ubar|_{4/3}^2 over admissible U near Ubar."""
    rng = np.random.default_rng(seed)
    opts = opts or NewtonOptions(tol=1e-12)
    j0 = cost_from_state(disc, state, U)
    ratios, excluded = [], 0
    for _ in range(n_samples):
        d = rng.standard_normal(U.values.shape)
        nrm = np.sqrt(inner(disc.area, d, d))
        d *= radius * rng.uniform() / nrm
        Ut = np.clip(U.values + d, U.lower, U.upper)
        diff = Ut - U.values
        n43 = l43_norm(disc.area, diff) ** 2
        if n43 == 0.0:
            excluded += 1
            continue
        j, _, _ = reduced_cost(disc, Ut, opts, initial=state)
        ratios.append((j - j0) / n43)
    theta = min(ratios) if ratios else None
    return {"theta_est": theta, "samples": len(ratios), "excluded": excluded,
            "radius": radius, "j_bar": j0, "passed": theta is not None and theta > 0}


# -- advisory thresholds ----------------------------------------------------------

def broken_h2_seminorm(disc, vec):
    """sqrt(sum_e |e| |Hess v|^2) for a two-component P2 field (cellwise exact)."""
    geo = disc.geometry
    gL = geo.physical(_p1_ref_grads(geo.quad.points[:1]))[:, 0]   # (ne, 3, 2)
    dofs = disc.P2.cell_dofs
    n = disc.n2
    pairs = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0)]
    tot = 0.0
    for k in range(2):
        c = vec[k * n:(k + 1) * n][dofs]
        H = np.zeros((dofs.shape[0], 2, 2))
        for i, (a, b) in enumerate(pairs):
            outer = np.einsum("ei,ej->eij", gL[:, a], gL[:, b])
            term = 4.0 * outer if a == b else 4.0 * (outer + outer.transpose(0, 2, 1))
            H += c[:, i, None, None] * term
        tot += np.sum(disc.area * np.sum(H * H, axis=(1, 2)))
    return float(np.sqrt(tot))


def norm_surrogates(disc, state, adjoint=None):
    """H1 norms of the solved fields and the labeled surrogate for the H^{3/2+} bound."""
    Mu = disc.h1(state.u)
    My = disc.h1(state.y)
    M = Mu + My + broken_h2_seminorm(disc, state.u) + broken_h2_seminorm(disc, state.y)
    out = {"Mu": Mu, "My": My, "M": M}
    if adjoint is not None:
        out["M_phi"] = disc.h1(adjoint.phi) + disc.h1(adjoint.eta)
    return out


def smallness_report(disc, state, config=DiagnosticsConfig()):
    s = norm_surrogates(disc, state)
    return check_smallness(disc.model, s["Mu"], s["My"], s["M"], config)


def derivative_bounds(model, n=401, span=10.0):
    """Sampled sup |F_yy| and sup |nu_TT| (surrogates for C_Fyy and C_nuTT)."""
    t = np.linspace(-span, span, n)
    T, S = np.meshgrid(t, t)
    Fyy = model.buoyancy.F_yy(T, S)
    c_f = max(float(np.max(np.abs(Fyy[k][l][m])))
              for k in range(2) for l in range(2) for m in range(2))
    return c_f, float(np.max(np.abs(model.viscosity.nu_TT(t))))


def lambda_threshold(lam, bounds, config=DiagnosticsConfig(), C_Fyy=1.0, C_nuTT=1.0):
    """Advisory check lam > (1/C2r)(M_psi M_phi (C6 C3 + C_Fyy C4^2) + C_nuTT M_hat M_bar M_psi)."""
    Mpsi, Mphi = bounds["M_psi"], bounds["M_phi"]
    Mhat, Mbar = bounds["M_hat"], bounds["M_bar"]
    thr = (Mpsi * Mphi * (config.C6 * config.C3 + C_Fyy * config.C4 ** 2)
           + C_nuTT * Mhat * Mbar * Mpsi) / config.C2r
    return {"label": ADVISORY, "lambda": lam, "threshold": thr, "verdict": bool(lam > thr),
            "M_psi": Mpsi, "M_phi": Mphi, "M_hat": Mhat, "M_bar": Mbar,
            "C_Fyy": C_Fyy, "C_nuTT": C_nuTT}


def threshold_bounds(disc, state, adjoint):
    """Norm surrogates feeding :func:`lambda_threshold`.

    M_psi bounds the state (H1), M_phi the adjoint (H1); M_hat is the state
    H^{3/2+} surrogate and M_bar the adjoint H1 norm, so that perfect tracking
    (zero adjoint) gives a zero threshold.
    """
    s = norm_surrogates(disc, state, adjoint)
    return {"M_psi": s["Mu"] + s["My"], "M_phi": s["M_phi"], "M_hat": s["M"],
            "M_bar": s["M_phi"]}
