"""Command-line driver: ``ddflow <command> --config FILE --out DIR [options]``."""
import argparse
import logging
import os
import sys

import numpy as np

from . import io
from .config import ConfigError, RunConfig, parse_config, with_overrides
from .discretization import Discretization
from .fixtures import PAIR_FIELDS, VELOCITY_FIELDS, cell_control
from .model import ADVISORY, DiagnosticsConfig, ModelError, default_boussinesq_model
from .optimizer import (ControlField, OptimizationError, OptimizeOptions, cell_average,
                        cost_from_state, optimize, vi_residual)
from .sensitivity import SensitivityError, check_transpose_consistency, solve_adjoint
from .state import NewtonError, NewtonOptions, continuation_solve

log = logging.getLogger("ddflow")

COMMANDS = ("solve-state", "optimize", "check-gradient", "check-adjoint", "check-ssc",
            "mms-convergence")


# -- setup ---------------------------------------------------------------------

def build_model(cfg, **extra):
    m = cfg.model
    d = cfg.data
    return default_boussinesq_model(
        nu0=m.nu0, gamma=m.gamma, g_T=m.g_T, g_S=m.g_S, Kinv=np.array(m.Kinv, dtype=float),
        D=np.array(m.D, dtype=float), lam=m.lam, buoyancy=m.buoyancy,
        yD=PAIR_FIELDS[d.yD], u_d=VELOCITY_FIELDS[d.u_d], y_d=PAIR_FIELDS[d.y_d], **extra)


def newton_options(cfg):
    return NewtonOptions(tol=cfg.solver.newton_tol, max_iter=cfg.solver.newton_max_iter)


def build_discretization(cfg):
    """Discretization with desired states resolved (analytic, file or inverse crime)."""
    model = build_model(cfg)
    disc = Discretization(cfg.mesh.n, model)
    if cfg.data.desired == "analytic":
        return disc
    if cfg.data.desired == "file":
        with np.load(cfg.data.desired_file) as f:
            u_d, y_d = np.asarray(f["u"], dtype=float), np.asarray(f["y"], dtype=float)
        if u_d.shape != (disc.nu_,) or y_d.shape != (disc.ny,):
            raise ConfigError(f"`data.desired_file`: arrays do not match mesh n={cfg.mesh.n}")
    else:
        Ustar = cell_control(disc.mesh, cfg.data.ustar)
        st, _ = continuation_solve(disc, Ustar, cfg.solver.ramp, newton_options(cfg))
        u_d, y_d = st.u, st.y
    return Discretization(disc.mesh, model.with_(u_d_nodal=u_d, y_d_nodal=y_d))


def initial_control(cfg, disc):
    name = cfg.data.control
    if os.path.isfile(name):
        vals = io.read_control(name)
        if vals.shape != (disc.mesh.num_triangles, 2):
            raise ConfigError(f"`data.control`: {name} has {vals.shape[0]} cells, mesh has "
                              f"{disc.mesh.num_triangles}")
    else:
        try:
            vals = cell_control(disc.mesh, name)
        except ValueError as exc:
            raise ConfigError(f"`data.control`: {exc}") from None
    return ControlField(vals, cfg.bounds.lower, cfg.bounds.upper)


def diagnostics_config(cfg):
    d = cfg.diagnostics
    return DiagnosticsConfig(C6=d.C6, C3=d.C3, Cgn=d.Cgn, Cp2=d.Cp2, C4=d.C4, C2r=d.C2r,
                             poincare=d.poincare)


def _advisory_lines(title, rep):
    lines = [f"{title}: {rep['label']}"]
    lines += [f"  {k} = {io.fmt(v)}" for k, v in rep.items() if k != "label"]
    return lines


# -- commands ---------------------------------------------------------------------

def cmd_solve_state(cfg, out):
    from .ssc import smallness_report
    disc = build_discretization(cfg)
    U = initial_control(cfg, disc)
    state, reports = continuation_solve(disc, U.values, cfg.solver.ramp, newton_options(cfg))
    rows = [(s, k, r, damp) for s, rep in reports for k, r, damp in rep.history_rows()]
    io.write_csv(os.path.join(out, "history.csv"), ["stage", "iteration", "residual", "damping"],
                 rows)
    io.write_state_vtk(os.path.join(out, "fields_state.vtk"), disc, state, U.values)
    small = smallness_report(disc, state, diagnostics_config(cfg))
    lines = ["command: solve-state", f"n = {cfg.mesh.n}",
             f"newton iterations = {sum(r.iterations for _, r in reports)}",
             f"final residual = {io.fmt(reports[-1][1].residuals[-1][0])}",
             f"|u|_1 = {io.fmt(disc.h1(state.u))}", f"|y|_1 = {io.fmt(disc.h1(state.y))}",
             f"pressure mean = {io.fmt(disc.pressure_mean(state.p))}"]
    lines += _advisory_lines("smallness condition", small)
    io.write_report(os.path.join(out, "report.txt"), lines)
    print("\n".join(lines[:6]))
    return 0


def _optimize(cfg, disc):
    U0 = initial_control(cfg, disc)
    opts = OptimizeOptions(kkt_tol=cfg.solver.kkt_tol, max_iter=cfg.solver.max_iter,
                           step_rule=cfg.solver.step_rule,
                           newton=NewtonOptions(tol=min(cfg.solver.newton_tol, 1e-12),
                                                max_iter=cfg.solver.newton_max_iter))
    return optimize(disc, U0, opts)


def cmd_optimize(cfg, out):
    disc = build_discretization(cfg)
    U, state, adj, rep = _optimize(cfg, disc)
    io.write_csv(os.path.join(out, "history.csv"),
                 ["iteration", "j", "pg_norm", "vi_residual", "step", "newton_its"],
                 rep.csv_rows())
    io.write_control(os.path.join(out, "control.csv"), U.values)
    io.write_state_vtk(os.path.join(out, "fields_state.vtk"), disc, state, U.values)
    io.write_adjoint_vtk(os.path.join(out, "fields_adjoint.vtk"), disc, adj)
    last = rep.history[-1]
    lines = ["command: optimize", f"n = {cfg.mesh.n}", f"lambda = {io.fmt(cfg.model.lam)}",
             f"iterations = {rep.iterations}", f"termination = {rep.reason}",
             f"j = {io.fmt(last.j)}", f"vi_residual = {io.fmt(last.vi_residual)}"]
    io.write_report(os.path.join(out, "report.txt"), lines)
    print("\n".join(lines))
    return 0 if rep.converged else 1


def cmd_check_gradient(cfg, out):
    from .checks import gradient_taylor_test
    disc = build_discretization(cfg)
    U = initial_control(cfg, disc)
    res = gradient_taylor_test(disc, U, seed=cfg.seed)
    io.write_csv(os.path.join(out, "history.csv"),
                 ["direction", "t", "fd", "directional", "rel_error"], res["rows"])
    ok = res["max_rel_error"] <= 1e-5
    lines = ["command: check-gradient",
             f"max relative FD error (t=1e-4) = {io.fmt(res['max_rel_error'])}",
             f"min observed order = {io.fmt(res['min_order'])}",
             f"result = {'PASS' if ok else 'FAIL'} (tolerance 1e-5)"]
    io.write_report(os.path.join(out, "report.txt"), lines)
    print("\n".join(lines))
    return 0 if ok else 1


def cmd_check_adjoint(cfg, out):
    from .checks import duality_test
    disc = build_discretization(cfg)
    U = initial_control(cfg, disc)
    state, _ = continuation_solve(disc, U.values, cfg.solver.ramp, newton_options(cfg))
    tc = check_transpose_consistency(disc, state)
    dual = duality_test(disc, state, n_dirs=10, seed=cfg.seed)
    io.write_csv(os.path.join(out, "consistency.csv"), ["direction", "lhs", "rhs", "rel_error"],
                 [(i, *row) for i, row in enumerate(dual)])
    worst = max(r[2] for r in dual)
    ok = tc["passed"] and worst <= 1e-8
    lines = ["command: check-adjoint"]
    lines += [f"{k} = {io.fmt(v)}" for k, v in tc.items()]
    lines += [f"duality max relative error = {io.fmt(worst)}",
              f"result = {'PASS' if ok else 'FAIL'}"]
    io.write_report(os.path.join(out, "report.txt"), lines)
    print("\n".join(lines))
    return 0 if ok else 1


def cmd_check_ssc(cfg, out):
    from .ssc import (derivative_bounds, lambda_threshold, quadratic_growth_check,
                      ssc_curvature_probe, strongly_active_set, threshold_bounds,
                      verify_active_estimate)
    disc = build_discretization(cfg)
    U, state, adj, rep = _optimize(cfg, disc)
    eps = cfg.ssc.epsilon or None
    probe = ssc_curvature_probe(disc, U, state, adj, eps, cfg.ssc.n_dirs, cfg.seed)
    io.write_csv(os.path.join(out, "probes.csv"), ["direction", "L_ww", "h43_sq", "sigma_est"],
                 probe.csv_rows())
    growth = quadratic_growth_check(disc, U, state, cfg.ssc.radius, cfg.ssc.n_samples, cfg.seed)
    phi_avg = cell_average(disc, adj.phi)
    mask = strongly_active_set(U, phi_avg, disc.model.lam, probe.epsilon)
    rng = np.random.default_rng(cfg.seed)
    est = [verify_active_estimate(disc.area, rng.uniform(U.lower, U.upper), U, phi_avg,
                                  disc.model.lam, mask)["passed"] for _ in range(20)]
    c_f, c_nu = derivative_bounds(disc.model)
    thr = lambda_threshold(disc.model.lam, threshold_bounds(disc, state, adj),
                           diagnostics_config(cfg), c_f, c_nu)
    io.write_adjoint_vtk(os.path.join(out, "fields_adjoint.vtk"), disc, adj, mask.mask)
    lines = ["command: check-ssc", f"optimizer: {rep.reason} after {rep.iterations} iterations",
             f"vi_residual = {io.fmt(vi_residual(disc, U, adj))}",
             f"epsilon = {io.fmt(probe.epsilon)}", f"strongly active components = {probe.active}",
             f"probe: {probe.notice}",
             f"min sigma_est = {io.fmt(probe.verdict) if probe.verdict is not None else 'n/a'}",
             f"quadratic growth theta_est = {io.fmt(growth['theta_est'])} "
             f"({growth['samples']} samples, {growth['excluded']} excluded)",
             f"active-set estimate passed for {sum(est)}/{len(est)} admissible controls"]
    lines += _advisory_lines("lambda threshold", thr)
    io.write_report(os.path.join(out, "report.txt"), lines)
    print("\n".join(lines[:9]))
    ok = probe.verdict is not None and probe.verdict > 0 and growth["passed"] and all(est)
    return 0 if ok else 1


MMS_THRESHOLDS = {"u_l2": 2.7, "u_h1": 1.8, "p_l2": 1.8, "y_h1": 1.8}


def cmd_mms(cfg, out):
    from .mms import convergence_study, manufactured_problem
    m = cfg.model
    prob = manufactured_problem(nu0=m.nu0, gamma=m.gamma, g_T=m.g_T, g_S=m.g_S, D=m.D,
                                Kinv=m.Kinv, lam=m.lam)
    ns = [int(n) for n in cfg.mms.ns]
    errors, orders = convergence_study(ns, prob, newton_options(cfg))
    keys = list(errors[0])
    rows = []
    for i, n in enumerate(ns):
        rate = orders[i - 1] if i else {k: float("nan") for k in keys}
        rows.append([n] + [errors[i][k] for k in keys] + [rate[k] for k in keys])
    io.write_csv(os.path.join(out, "mms.csv"),
                 ["n"] + keys + [f"order_{k}" for k in keys], rows)
    ok = all(o[k] >= t for o in orders for k, t in MMS_THRESHOLDS.items())
    lines = ["command: mms-convergence"]
    lines += [f"n={n}: " + ", ".join(f"{k}={errors[i][k]:.3e}" for k in keys)
              for i, n in enumerate(ns)]
    lines += ["orders: " + ", ".join(f"{k}={o[k]:.2f}" for k in keys) for o in orders]
    lines.append(f"result = {'PASS' if ok else 'FAIL'}")
    io.write_report(os.path.join(out, "report.txt"), lines)
    print("\n".join(lines))
    return 0 if ok else 1


HANDLERS = {"solve-state": cmd_solve_state, "optimize": cmd_optimize,
            "check-gradient": cmd_check_gradient, "check-adjoint": cmd_check_adjoint,
            "check-ssc": cmd_check_ssc, "mms-convergence": cmd_mms}


def build_parser():
    p = argparse.ArgumentParser(prog="ddflow", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML run configuration (defaults if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="mesh subdivisions per side")
    p.add_argument("--lambda", dest="lam", type=float, help="regularization parameter")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(command, cfg, out):
    """Run one command; returns the process exit status."""
    io.ensure_dir(out)
    try:
        return HANDLERS[command](cfg, out)
    except (NewtonError, SensitivityError, OptimizationError, ModelError, ConfigError) as exc:
        print(f"ddflow {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = parse_config(args.config) if args.config else RunConfig()
        cfg = with_overrides(cfg, n=args.n, lam=args.lam, seed=args.seed)
    except (ConfigError, OSError) as exc:
        print(f"ddflow: configuration error: {exc}", file=sys.stderr)
        return 2
    return run(args.command, cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
