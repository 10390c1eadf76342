"""Experiment drivers behind the command line.

Each run_* function performs one experiment end to end and writes CSV
artifacts into an output directory. All randomness flows through the seeded
stream layout in paths, so a rerun with the same configuration reproduces
the files byte for byte.
"""
from __future__ import annotations

import csv
import os
from dataclasses import replace

import numpy as np

from . import backend
from .baseline import DoubleGrid, old_solve_example
from .model import ModelParams, compute_c1_c2, truncated_diffusion
from .paths import (DOMAIN_STUDY, EnsembleSpec, GridSpec,
                    outer_path_from_increments, replicate_seed,
                    sample_increments)
from .scheme import _node_estimates, estimate_rho_moments, solve_path
from .validation import (budget_martingale_check, constant_drift_moments,
                         convergence_fit, error_report,
                         example_driver_increments, example_h_path,
                         example_solve_new, example_true_solution,
                         filter_oracle_check)

__all__ = ["run_simulate", "run_example", "run_compare", "run_converge",
           "run_validate",
           "STUDY_DELTA_NS", "STUDY_REF_N", "STUDY_M_FIX",
           "STUDY_M_VALUES", "STUDY_REF_M", "STUDY_N_FIX"]

# Convergence-study design. Evaluation happens at the seven interior times
# t = q*T/8; every grid below is a multiple of 8 so those times are nodes
# on all of them and the reference is at least 8x finer in each direction.
STUDY_DELTA_NS = (8, 16, 32, 64, 128)
STUDY_REF_N = 1024
STUDY_M_FIX = 2048
STUDY_M_VALUES = (4, 8, 16, 32, 64, 128)
STUDY_REF_M = 1024
STUDY_N_FIX = 128
_EVAL_DENOM = 8

# Sub-streams of the study domain used by the convergence sweeps; the
# validation module reserves 1 and 2.
_CONV_DELTA_KEY = 0
_CONV_M_KEY = 3

_MOMENT_SAMPLES_STUDY = 65536


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, str) else _fmt(x) for x in row])


def _ensure_dir(out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


# ---------------------------------------------------------------------------
# simulate


def run_simulate(params: ModelParams, grid: GridSpec, spec: EnsembleSpec,
                 out_dir: str, threads: int = 1) -> dict:
    """Solve one path of the drift-uncertainty model and dump trajectories."""
    _ensure_dir(out_dir)
    out = solve_path(params, grid, spec, threads=threads)
    rows = [
        (out.times[i], out.pi[i], out.Y[i], out.u[i], out.eta[i],
         out.N1[i], out.N2[i], out.N3[i])
        for i in range(len(out.times))
    ]
    _write_csv(os.path.join(out_dir, "trajectories.csv"),
               ["t", "pi", "Y", "u", "eta", "N1", "N2", "N3"], rows)
    return {
        "nodes": len(out.times),
        "y0_estimate": float(out.Y[0]),
        "c1": out.c1,
        "c2": out.c2,
        "e_rho": out.moments.e_rho,
        "e_rho2": out.moments.e_rho2,
    }


# ---------------------------------------------------------------------------
# example: benchmark BSDE against its closed form


def _error_rows(quantity: str, times, approx, reference):
    rep = error_report(approx, reference, times)
    rows = [
        (times[i], quantity, approx[i], reference[i], rep.abs_err[i],
         rep.rel_err[i])
        for i in range(len(times))
    ]
    rows.append(("l2", quantity, "", "", rep.l2, rep.rel_l2))
    rows.append(("sup", quantity, "", "", rep.sup, ""))
    return rows, rep


def run_example(n: int, m: int, stride: int, seed: int, out_dir: str) -> dict:
    """Solve the benchmark BSDE and measure errors against the closed form."""
    _ensure_dir(out_dir)
    grid = GridSpec(n=n, T=1.0)
    if n % stride != 0:
        raise ValueError(f"stride {stride} does not divide n={n}")
    x_new, z_new = example_solve_new(grid, m, seed, stride)
    dw = example_driver_increments(grid, seed)
    w, _ = example_h_path(dw, grid.delta)
    x_true, z_true = example_true_solution(w, grid)
    times = grid.times[::stride]
    rows_x, rep_x = _error_rows("X", times, x_new, x_true[::stride])
    rows_z, rep_z = _error_rows("Z", times, z_new, z_true[::stride])
    _write_csv(os.path.join(out_dir, "errors.csv"),
               ["t", "quantity", "approx", "reference", "abs_err", "rel_err"],
               rows_x + rows_z)
    return {"rel_l2_x": rep_x.rel_l2, "rel_l2_z": rep_z.rel_l2,
            "sup_x": rep_x.sup, "sup_z": rep_z.sup}


# ---------------------------------------------------------------------------
# compare: derivative-based scheme vs double-partition baseline


def run_compare(n: int, m: int, stride: int, seed: int, out_dir: str) -> dict:
    """Match the two schemes on the benchmark at equal total step budget.

    The fine grid has n = n1*n2 steps with n1 = n/stride coarse nodes; the
    derivative-based scheme is evaluated at exactly those nodes, so both
    schemes spend n Euler steps per branch path and see the same driver.
    """
    _ensure_dir(out_dir)
    if stride < 1 or n % stride != 0:
        raise ValueError(f"stride {stride} must divide n={n}")
    n1 = n // stride
    if n1 < 2:
        raise ValueError(f"need at least 2 coarse intervals, got n1={n1}")
    grid = GridSpec(n=n, T=1.0)
    dgrid = DoubleGrid(n1=n1, n2=stride)
    x_new, z_new = example_solve_new(grid, m, seed, stride)
    x_old, z_old = old_solve_example(dgrid, m, seed)
    dw = example_driver_increments(grid, seed)
    w, _ = example_h_path(dw, grid.delta)
    x_true, z_true = example_true_solution(w, grid)
    times = grid.times[::stride]
    xt = x_true[::stride]
    zt = z_true[::stride]
    all_rows = []
    reps = {}
    for name, approx, ref in (("X_new", x_new, xt), ("Z_new", z_new, zt),
                              ("X_old", x_old, xt), ("Z_old", z_old, zt)):
        rows, rep = _error_rows(name, times, approx, ref)
        all_rows.extend(rows)
        reps[name] = rep
    _write_csv(os.path.join(out_dir, "errors.csv"),
               ["t", "quantity", "approx", "reference", "abs_err", "rel_err"],
               all_rows)
    return {
        "rel_l2": {k: r.rel_l2 for k, r in reps.items()},
        "z_new_better": reps["Z_new"].rel_l2 < reps["Z_old"].rel_l2,
        "x_new_better": reps["X_new"].rel_l2 < reps["X_old"].rel_l2,
    }


# ---------------------------------------------------------------------------
# converge: self-referenced rate study in delta and in 1/m


def _eval_node_yu(outer, k: int, dnub, c1: float, c2: float,
                  prefix_ms=None):
    """(Y, u) at node k from a given branch increment matrix.

    With ``prefix_ms`` a list of ensemble sizes, returns arrays of (Y, u)
    over nested prefixes of the branch rows instead of a single pair.
    """
    params = outer.params
    gamma = params.gamma
    bmr = params.b - params.r
    delta = outer.grid.delta
    lr, s2, s3 = backend.branch_stats(float(outer.pi[k]), dnub, delta, bmr,
                                      gamma, params.r)
    lterm = outer.lrho[k] + lr
    th = bmr + gamma * outer.pi[k]
    phi = np.exp(outer.lphi[k])
    if prefix_ms is None:
        nhat, n1, n2, n3 = _node_estimates(lterm, s2, s3, th, c1, c2)
        y = phi * nhat
        return y, th * y + phi * (n1 + gamma * n2 + gamma * n3)
    ys = np.empty(len(prefix_ms))
    us = np.empty(len(prefix_ms))
    for j, mm in enumerate(prefix_ms):
        nhat, n1, n2, n3 = _node_estimates(lterm[:mm], s2[:mm], s3[:mm],
                                           th, c1, c2)
        y = phi * nhat
        ys[j] = y
        us[j] = th * y + phi * (n1 + gamma * n2 + gamma * n3)
    return ys, us


def run_converge(params: ModelParams, seed: int, out_dir: str,
                 replications: int = 32) -> dict:
    """Measure the error rate against grid size and ensemble size.

    Time sweep: one fine innovation stream per replication drives every
    grid through block sums, and each evaluation node reuses block sums of
    one fine branch ensemble, so the comparison against the 8x-finer
    reference is a coupled estimate of the discretization error alone.
    Ensemble sweep: nested prefixes of one large ensemble against the full
    ensemble isolate the Monte Carlo error. Errors pool root-mean-square
    over replications and the seven evaluation times.
    """
    _ensure_dir(out_dir)
    if replications < 3:
        raise ValueError("need at least 3 replications")
    T = params.T
    qs = range(1, _EVAL_DENOM)
    mom_grid = GridSpec(n=STUDY_REF_N, T=T)
    moments = estimate_rho_moments(params, mom_grid, _MOMENT_SAMPLES_STUDY, seed)
    c1, c2 = compute_c1_c2(moments, params)

    # --- sweep in delta at fixed ensemble size
    n_star = STUDY_REF_N
    delta_star = T / n_star
    ns = list(STUDY_DELTA_NS)
    grids = {nn: GridSpec(n=nn, T=T) for nn in ns + [n_star]}
    sq_y = {nn: 0.0 for nn in ns}
    sq_u = {nn: 0.0 for nn in ns}
    count = 0
    for rep in range(replications):
        sr = replicate_seed(seed, rep)
        dnu_f = sample_increments(sr, (DOMAIN_STUDY, _CONV_DELTA_KEY, 0),
                                  n_star, delta_star)
        outs = {}
        for nn in ns + [n_star]:
            s = n_star // nn
            outs[nn] = outer_path_from_increments(
                params, grids[nn], dnu_f.reshape(nn, s).sum(axis=1))
        for q in qs:
            k_star = q * n_star // _EVAL_DENOM
            dnub_f = sample_increments(sr, (DOMAIN_STUDY, _CONV_DELTA_KEY, 1 + q),
                                       (STUDY_M_FIX, n_star - k_star), delta_star)
            y_ref, u_ref = _eval_node_yu(outs[n_star], k_star, dnub_f, c1, c2)
            for nn in ns:
                s = n_star // nn
                k = q * nn // _EVAL_DENOM
                dnub = dnub_f.reshape(STUDY_M_FIX, nn - k, s).sum(axis=2)
                y, u = _eval_node_yu(outs[nn], k, dnub, c1, c2)
                sq_y[nn] += (y - y_ref) ** 2
                sq_u[nn] += (u - u_ref) ** 2
            count += 1
    err_y_d = {nn: float(np.sqrt(sq_y[nn] / count)) for nn in ns}
    err_u_d = {nn: float(np.sqrt(sq_u[nn] / count)) for nn in ns}
    deltas = [T / nn for nn in ns]
    fit_yd = convergence_fit(list(zip(deltas, [err_y_d[nn] for nn in ns])))
    fit_ud = convergence_fit(list(zip(deltas, [err_u_d[nn] for nn in ns])))

    # --- sweep in ensemble size at fixed grid
    n_fix = STUDY_N_FIX
    delta_fix = T / n_fix
    grid_fix = GridSpec(n=n_fix, T=T)
    ms = list(STUDY_M_VALUES)
    prefix = ms + [STUDY_REF_M]
    sq_y_m = np.zeros(len(ms))
    sq_u_m = np.zeros(len(ms))
    count_m = 0
    for rep in range(replications):
        sr = replicate_seed(seed, rep)
        dnu = sample_increments(sr, (DOMAIN_STUDY, _CONV_M_KEY, 0),
                                n_fix, delta_fix)
        out_n = outer_path_from_increments(params, grid_fix, dnu)
        for q in qs:
            k = q * n_fix // _EVAL_DENOM
            dnub = sample_increments(sr, (DOMAIN_STUDY, _CONV_M_KEY, 1 + q),
                                     (STUDY_REF_M, n_fix - k), delta_fix)
            ys, us = _eval_node_yu(out_n, k, dnub, c1, c2, prefix_ms=prefix)
            sq_y_m += (ys[:-1] - ys[-1]) ** 2
            sq_u_m += (us[:-1] - us[-1]) ** 2
            count_m += 1
    err_y_m = np.sqrt(sq_y_m / count_m)
    err_u_m = np.sqrt(sq_u_m / count_m)
    inv_m = [1.0 / mm for mm in ms]
    fit_ym = convergence_fit(list(zip(inv_m, err_y_m)))
    fit_um = convergence_fit(list(zip(inv_m, err_u_m)))

    rows = []
    for i, nn in enumerate(ns):
        rows.append(("delta", nn, STUDY_M_FIX, deltas[i], err_y_d[nn],
                     err_u_d[nn]))
    for i, mm in enumerate(ms):
        rows.append(("ensemble", n_fix, mm, inv_m[i], err_y_m[i], err_u_m[i]))
    rows.append(("delta", "", "", "slope", fit_yd.slope, fit_ud.slope))
    rows.append(("delta", "", "", "r_squared", fit_yd.r_squared,
                 fit_ud.r_squared))
    rows.append(("ensemble", "", "", "slope", fit_ym.slope, fit_um.slope))
    rows.append(("ensemble", "", "", "r_squared", fit_ym.r_squared,
                 fit_um.r_squared))
    _write_csv(os.path.join(out_dir, "convergence.csv"),
               ["sweep", "n", "m", "abscissa", "err_Y", "err_u"], rows)
    return {
        "delta": {"slope_y": fit_yd.slope, "slope_u": fit_ud.slope,
                  "r2_y": fit_yd.r_squared, "r2_u": fit_ud.r_squared},
        "ensemble": {"slope_y": fit_ym.slope, "slope_u": fit_um.slope,
                     "r2_y": fit_ym.r_squared, "r2_u": fit_um.r_squared},
        "replications": replications,
    }


# ---------------------------------------------------------------------------
# validate: oracle identities and statistical cross-checks


def run_validate(params: ModelParams, grid: GridSpec, spec: EnsembleSpec,
                 out_dir: str, replications: int = 32) -> dict:
    """Re-derive the oracle identities; any failed row fails the run."""
    _ensure_dir(out_dir)
    checks = []

    def add(name, value, target, tol, ok):
        checks.append((name, float(value), float(target), float(tol),
                       "pass" if ok else "fail"))

    # filter against the exact posterior; needs an interior prior
    p_f = params if 0.0 < params.pi0 < 1.0 else replace(params, pi0=0.5)
    fr = filter_oracle_check(p_f, grid, spec.master_seed, replications)
    add("innovation_mean_z", fr.z_mean, 0.0, 3.0, abs(fr.z_mean) <= 3.0)
    add("innovation_var_z", fr.z_var, 0.0, 3.0, abs(fr.z_var) <= 3.0)
    grid4 = GridSpec(n=4 * grid.n, T=grid.T)
    fr4 = filter_oracle_check(p_f, grid4, spec.master_seed, replications)
    ratio = fr4.report.sup / fr.report.sup if fr.report.sup > 0.0 else 1.0
    add("filter_sup_ratio_4x", ratio, 0.5, 0.3, ratio <= 0.8)

    # Monte Carlo moments against the lognormal closed form
    p_d = replace(params, pi0=1.0)
    exact = constant_drift_moments(p_d)
    est = estimate_rho_moments(p_d, grid, _MOMENT_SAMPLES_STUDY,
                               spec.master_seed)
    z1 = (est.e_rho - exact.e_rho) / est.se_rho
    z2 = (est.e_rho2 - exact.e_rho2) / est.se_rho2
    add("moment_rho_z", z1, 0.0, 3.0, abs(z1) <= 3.0)
    add("moment_rho2_z", z2, 0.0, 3.0, abs(z2) <= 3.0)

    # terminal budget and martingale identities over fresh paths
    br = budget_martingale_check(params, grid, 8192, spec.master_seed)
    add("mean_rho_y_minus_y0", br.mean_rho_y - br.y0, 0.0, 3.0 * br.se_rho_y,
        br.budget_ok)
    add("mean_y_minus_z", br.mean_y - br.z, 0.0, 3.0 * br.se_y, br.target_ok)

    # exact recompositions on a small solve
    g_id = GridSpec(n=64, T=params.T)
    s_id = EnsembleSpec(m=min(spec.m, 64), master_seed=spec.master_seed,
                        stride=8)
    out = solve_path(params, g_id, s_id)
    gam = params.gamma
    d_eta = float(np.max(np.abs(out.eta - (out.N1 + gam * out.N2
                                           + gam * out.N3))))
    add("eta_recompose", d_eta, 0.0, 0.0, d_eta == 0.0)
    th = params.b - params.r + gam * out.pi
    d_u = float(np.max(np.abs(out.u - (th * out.Y + out.phi * out.eta))))
    add("u_recompose", d_u, 0.0, 0.0, d_u == 0.0)
    d_lphi = float(np.max(np.abs(out.outer.lphi + out.outer.lrho)))
    add("lphi_negation", d_lphi, 0.0, 0.0, d_lphi == 0.0)
    res_z = out.c1 + out.c2 * out.moments.e_rho - params.z
    res_y0 = (out.c1 * out.moments.e_rho + out.c2 * out.moments.e_rho2
              - params.y0)
    tol_z = 1e-9 * max(1.0, abs(params.z))
    tol_y = 1e-9 * max(1.0, abs(params.y0))
    add("budget_c1c2_z", res_z, 0.0, tol_z, abs(res_z) <= tol_z)
    add("budget_c1c2_y0", res_y0, 0.0, tol_y, abs(res_y0) <= tol_y)

    # diffusion truncation bounds
    xs = np.linspace(-0.5, 1.5, 201)
    sig = truncated_diffusion(xs, gam)
    cap = gam / 4.0
    ok_sig = bool(np.all(sig >= 0.0) and np.all(sig <= cap + 1e-15)
                  and np.all(sig[(xs < 0.0) | (xs > 1.0)] == 0.0))
    add("sigma_bounds", float(np.max(sig)), cap, cap, ok_sig)

    # benchmark terminal consistency: X(T) recovers exp(H - 2T) exactly
    g_ex = GridSpec(n=64, T=1.0)
    x_new, _ = example_solve_new(g_ex, 64, spec.master_seed)
    dw = example_driver_increments(g_ex, spec.master_seed)
    _, h = example_h_path(dw, g_ex.delta)
    x_term = float(np.exp(h[-1] - 2.0))
    d_term = abs(x_new[-1] - x_term) / abs(x_term)
    add("example_terminal_rel", d_term, 0.0, 1e-9, d_term <= 1e-9)

    rows = list(checks)
    _write_csv(os.path.join(out_dir, "validation.csv"),
               ["check", "value", "target", "tolerance", "status"], rows)
    ok = all(c[4] == "pass" for c in checks)
    return {"ok": ok, "n_checks": len(checks),
            "failed": [c[0] for c in checks if c[4] != "pass"]}
