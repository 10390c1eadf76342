"""Ground-truth oracles and error metrology.

Contains the closed-form benchmark BSDE (driven directly by the Brownian
motion W, with an explicit solution), the constant-drift lognormal oracle
for the portfolio problem, the exact-Bayes filter cross-check, error norms,
and log-log convergence fitting. Everything here exists to measure the
solver against something it cannot influence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .malliavin import MalliavinBranch, branch_s2_s3
from .model import ModelParams, MomentEstimates, compute_c1_c2, exact_posterior
from .paths import (DOMAIN_OUTER, DOMAIN_STUDY, BranchEnsemble, GridSpec,
                    OuterPath, branch_increments, euler_filter_step,
                    sample_increments)

__all__ = [
    "ErrorReport", "ConvergenceFit", "FilterOracleReport", "BudgetReport",
    "error_report", "convergence_fit",
    "example_driver_increments", "example_h_path", "example_true_solution",
    "example_solve_new",
    "constant_drift_moments", "constant_drift_oracle",
    "filter_oracle_check", "budget_martingale_check", "branch_drho_root",
]

# Sub-streams inside the study domain, so validation draws never collide
# with the convergence experiments that share DOMAIN_STUDY.
_FILTER_CHECK_KEY = 1
_BUDGET_CHECK_KEY = 2

_BUDGET_CHUNK = 8192


@dataclass(frozen=True)
class ErrorReport:
    """Pointwise and integral error norms of one trajectory comparison.

    For replicated checks, ``abs_err`` carries the per-node RMS across
    replications and the norms are averages of per-replication norms;
    ``n_rep``/``se_l2`` record the replication statistics.
    """

    times: np.ndarray
    abs_err: np.ndarray
    rel_err: np.ndarray
    l2: float
    sup: float
    rel_l2: float
    n_rep: int = 1
    se_l2: float = 0.0


@dataclass(frozen=True)
class ConvergenceFit:
    """Log-log least-squares fit of error against an abscissa."""

    abscissa: np.ndarray
    errors: np.ndarray
    slope: float
    intercept: float
    r_squared: float


def _trap_weights(times: np.ndarray) -> np.ndarray:
    # trapezoid quadrature weights; sum equals the time span
    w = np.empty(len(times))
    w[0] = 0.5 * (times[1] - times[0])
    w[-1] = 0.5 * (times[-1] - times[-2])
    w[1:-1] = 0.5 * (times[2:] - times[:-2])
    return w


def error_report(approx, reference, grid) -> ErrorReport:
    """Pointwise diffs plus L2-in-time and sup norms on one grid.

    ``grid`` is a GridSpec or an explicit array of node times of the same
    length as the trajectories.
    """
    approx = np.asarray(approx, dtype=float)
    reference = np.asarray(reference, dtype=float)
    times = grid.times if isinstance(grid, GridSpec) else np.asarray(grid, dtype=float)
    if not (len(approx) == len(reference) == len(times)):
        raise ValueError(
            f"length mismatch: approx {len(approx)}, reference {len(reference)}, "
            f"times {len(times)}"
        )
    if len(times) < 2:
        raise ValueError("need at least two nodes for time norms")
    d = np.abs(approx - reference)
    w = _trap_weights(times)
    l2 = float(np.sqrt(np.sum(w * (d * d))))
    ref_l2 = float(np.sqrt(np.sum(w * (reference * reference))))
    sup = float(np.max(d))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(reference != 0.0, d / np.abs(reference),
                       np.where(d == 0.0, 0.0, np.inf))
    rel_l2 = l2 / ref_l2 if ref_l2 > 0.0 else (0.0 if l2 == 0.0 else float("inf"))
    return ErrorReport(times=times, abs_err=d, rel_err=rel, l2=l2, sup=sup,
                       rel_l2=float(rel_l2))


def convergence_fit(points) -> ConvergenceFit:
    """Least-squares slope of log(error) against log(abscissa)."""
    pts = [(float(x), float(e)) for x, e in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points for a slope fit, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    e = np.array([p[1] for p in pts])
    if np.any(x <= 0.0) or np.any(e <= 0.0):
        raise ValueError("abscissa and error values must be positive")
    lx = np.log(x)
    le = np.log(e)
    slope, intercept = np.polyfit(lx, le, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((le - fitted) ** 2))
    ss_tot = float(np.sum((le - np.mean(le)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return ConvergenceFit(abscissa=x, errors=e, slope=float(slope),
                          intercept=float(intercept), r_squared=r2)


# ---------------------------------------------------------------------------
# Closed-form benchmark BSDE: X(t) = exp(H(t) - 2t), Z(t) = (1+W(t)) X(t),
# H(t) = int (1+W) dW - int (W^2 + 2W) ds.


def example_driver_increments(grid: GridSpec, seed: int) -> np.ndarray:
    """Increments of the benchmark's driving Brownian motion."""
    return sample_increments(seed, (DOMAIN_OUTER, 0), grid.n, grid.delta)


def _h_given_w(w, dw, delta):
    h = np.empty(len(w))
    h[0] = 0.0
    for k in range(len(dw)):
        wk = w[k]
        h[k + 1] = h[k] + ((1.0 + wk) * dw[k] - delta * (wk * wk + 2.0 * wk))
    return h


def example_h_path(dw, delta) -> tuple[np.ndarray, np.ndarray]:
    """(W, H) node values from increments, left-endpoint Euler for H."""
    dw = np.asarray(dw, dtype=float)
    w = np.empty(len(dw) + 1)
    w[0] = 0.0
    np.cumsum(dw, out=w[1:])
    return w, _h_given_w(w, dw, delta)


def example_true_solution(w_path, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Exact (X, Z) on the supplied driver path, H discretized on its increments."""
    w = np.asarray(w_path, dtype=float)
    if len(w) != grid.n + 1:
        raise ValueError(f"driver path has {len(w)} nodes, grid wants {grid.n + 1}")
    h = _h_given_w(w, np.diff(w), grid.delta)
    x = np.exp(h - 2.0 * grid.times)
    return x, (1.0 + w) * x


def example_solve_new(grid: GridSpec, m: int, seed: int,
                      stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Nested particle solution of the benchmark BSDE at stride nodes.

    At node k the conditional mean of the terminal functional and of its
    derivative functional are branch averages of exp-ratio weights; the
    integrand recovery is Z = Phi*eta - (1+W)*X, which reproduces the
    closed form exactly at the terminal node.
    """
    n = grid.n
    if n % stride != 0:
        raise ValueError(f"stride {stride} does not divide n={n}")
    delta = grid.delta
    dw = example_driver_increments(grid, seed)
    w, h = example_h_path(dw, delta)
    times = grid.times
    ks = list(range(0, n + 1, stride))
    x_out = np.empty(len(ks))
    z_out = np.empty(len(ks))
    for j, k in enumerate(ks):
        dwb = branch_increments(seed, k, m, n - k, delta)
        logr, bracket = backend.example_branch_stats(w[k], dwb, delta)
        ratio = np.exp(logr)
        rbar = np.mean(ratio)
        rbbar = np.mean(ratio * bracket)
        mk = np.exp(2.0 * h[k] - 2.0 * times[k])
        phik = np.exp(-h[k])
        x = phik * (mk * rbar)
        x_out[j] = x
        z_out[j] = phik * (mk * rbbar) - (1.0 + w[k]) * x
    return x_out, z_out


# ---------------------------------------------------------------------------
# Constant-drift lognormal oracle.


def _require_degenerate(params: ModelParams) -> float:
    if params.pi0 == 1.0:
        return params.a - params.r
    if params.pi0 == 0.0:
        return params.b - params.r
    raise ValueError(f"constant-drift oracle needs pi0 in {{0, 1}}, got {params.pi0}")


def constant_drift_moments(params: ModelParams) -> MomentEstimates:
    """Exact rho_T moments when the drift is known (pi0 degenerate).

    rho_T is lognormal: E rho = exp(-rT), E rho^2 = exp((-2r + theta^2) T).
    These are also the exact moments of the discrete-scheme rho_T^delta,
    because with constant theta the log increments are exact in law.
    """
    th = _require_degenerate(params)
    t1 = float(np.exp(-params.r * params.T))
    t2 = float(np.exp((-2.0 * params.r + th * th) * params.T))
    return MomentEstimates(e_rho=t1, e_rho2=t2, se_rho=0.0, se_rho2=0.0)


def constant_drift_oracle(params: ModelParams, grid: GridSpec,
                          outer: OuterPath) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (Y, u) along the given outer path for degenerate pi0.

    Y(t) = c1 e^{-r tau} + c2 rho_t e^{(-2r+theta^2) tau},
    u(t) = -theta c2 rho_t e^{(-2r+theta^2) tau},  tau = T - t,
    with (c1, c2) from the exact lognormal moments. u is the net effect of
    theta*Y + Phi*eta with eta = -theta*(c1 E[rho|.] + 2 c2 E[rho^2|.]):
    the c1 terms cancel and one c2 term survives; the formula reproduces
    the terminal condition Y(T) = c1 + c2 rho_T pathwise.
    """
    th = _require_degenerate(params)
    moments = constant_drift_moments(params)
    c1, c2 = compute_c1_c2(moments, params)
    tau = params.T - grid.times
    rho = np.exp(outer.lrho)
    growth = np.exp((-2.0 * params.r + th * th) * tau)
    y = c1 * np.exp(-params.r * tau) + c2 * (rho * growth)
    u = -(th * c2) * (rho * growth)
    return y, u


# ---------------------------------------------------------------------------
# Filter vs exact Bayes posterior.


@dataclass(frozen=True)
class FilterOracleReport:
    """Euler-filter error against the exact posterior, plus innovation stats.

    ``report`` aggregates the filter error across replications; the z scores
    are standard normal under the null that the reconstructed innovation
    increments are i.i.d. N(0, delta).
    """

    report: ErrorReport
    nu_mean: float
    nu_var: float
    z_mean: float
    z_var: float
    n_increments: int


def filter_oracle_check(params: ModelParams, grid: GridSpec, seed: int,
                        replications: int = 32) -> FilterOracleReport:
    """Simulate the observed system and cross-check the Euler filter.

    Each replication draws the hidden drift, builds the log-price under it,
    computes the exact Bayes posterior along the observation, reconstructs
    the innovation increments, and drives the Euler filter with them. The
    filter error is measured per node; the innovation increments are pooled
    for mean/variance diagnostics.
    """
    if not 0.0 < params.pi0 < 1.0:
        raise ValueError("filter check needs an interior prior")
    if replications < 2:
        raise ValueError("need at least 2 replications")
    n = grid.n
    delta = grid.delta
    times = grid.times
    gamma = params.gamma
    sq = np.sqrt(delta)
    acc = np.zeros(n + 1)
    ref_acc = np.zeros(n + 1)
    l2s = np.empty(replications)
    sups = np.empty(replications)
    nu_sum = 0.0
    nu_sq = 0.0
    w_quad = _trap_weights(times)
    for rep in range(replications):
        ss = np.random.SeedSequence(int(seed),
                                    spawn_key=(DOMAIN_STUDY, _FILTER_CHECK_KEY, rep))
        rng = np.random.default_rng(ss)
        mu = params.a if rng.random() < params.pi0 else params.b
        dw = rng.standard_normal(n) * sq
        dl = (mu - 0.5) * delta + dw
        lpath = np.empty(n + 1)
        lpath[0] = 0.0
        np.cumsum(dl, out=lpath[1:])
        pi_ex = exact_posterior(params.pi0, lpath, times, params)
        dnu = dl - (params.b - 0.5 + gamma * pi_ex[:-1]) * delta
        pi_eu = np.empty(n + 1)
        pi_eu[0] = params.pi0
        for k in range(n):
            pi_eu[k + 1] = euler_filter_step(pi_eu[k], dnu[k], gamma)
        d = np.abs(pi_eu - pi_ex)
        acc += d * d
        ref_acc += pi_ex * pi_ex
        l2s[rep] = np.sqrt(np.sum(w_quad * (d * d)))
        sups[rep] = np.max(d)
        nu_sum += float(np.sum(dnu))
        nu_sq += float(np.sum(dnu * dnu))
    rms = np.sqrt(acc / replications)
    ref_rms = np.sqrt(ref_acc / replications)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(ref_rms > 0.0, rms / ref_rms, 0.0)
    total = n * replications
    nu_mean = nu_sum / total
    nu_var = nu_sq / total - nu_mean * nu_mean
    # s.e. of the mean is sqrt(delta/total); variance estimator s.e. is
    # delta*sqrt(2/total) under normality
    z_mean = nu_mean / np.sqrt(delta / total)
    z_var = (nu_var - delta) / (delta * np.sqrt(2.0 / total))
    rep_l2 = float(np.mean(l2s))
    report = ErrorReport(times=times, abs_err=rms, rel_err=rel,
                         l2=rep_l2, sup=float(np.mean(sups)),
                         rel_l2=rep_l2 / float(np.sqrt(np.sum(w_quad * ref_rms**2))),
                         n_rep=replications,
                         se_l2=float(np.std(l2s, ddof=1) / np.sqrt(replications)))
    return FilterOracleReport(report=report, nu_mean=float(nu_mean),
                              nu_var=float(nu_var), z_mean=float(z_mean),
                              z_var=float(z_var), n_increments=total)


# ---------------------------------------------------------------------------
# Budget / martingale identities.


@dataclass(frozen=True)
class BudgetReport:
    """Sample means of rho_T*Y_T and Y_T over independent paths."""

    mean_rho_y: float
    se_rho_y: float
    mean_y: float
    se_y: float
    y0: float
    z: float
    n_paths: int
    c1: float
    c2: float
    moments: MomentEstimates

    @property
    def budget_ok(self) -> bool:
        return abs(self.mean_rho_y - self.y0) <= 3.0 * self.se_rho_y

    @property
    def target_ok(self) -> bool:
        return abs(self.mean_y - self.z) <= 3.0 * self.se_y


def budget_martingale_check(params: ModelParams, grid: GridSpec, n_paths: int,
                            seed: int, moments: MomentEstimates | None = None,
                            n_moment_samples: int = 131072) -> BudgetReport:
    """Verify E[rho_T Y_T] = y0 and E[Y_T] = z over fresh outer paths.

    Y_T is the scheme's terminal wealth on each path (the branch ensemble
    at T is trivial). Moments default to a large independent Monte Carlo
    run so the constants' bias is far below the replication noise.
    """
    if n_paths < 2:
        raise ValueError("need at least 2 paths")
    from .scheme import estimate_rho_moments  # local import, no cycle at module load
    if moments is None:
        moments = estimate_rho_moments(params, grid, n_moment_samples, seed)
    c1, c2 = compute_c1_c2(moments, params)
    n = grid.n
    delta = grid.delta
    sq = np.sqrt(delta)
    bmr = params.b - params.r
    ss = np.random.SeedSequence(int(seed),
                                spawn_key=(DOMAIN_STUDY, _BUDGET_CHECK_KEY))
    rng = np.random.default_rng(ss)
    s_ry = 0.0
    s_ry2 = 0.0
    s_y = 0.0
    s_y2 = 0.0
    done = 0
    while done < n_paths:
        c = min(_BUDGET_CHUNK, n_paths - done)
        dnu = rng.standard_normal((c, n))
        dnu *= sq
        lr, _, _ = backend.branch_stats(params.pi0, dnu, delta, bmr,
                                        params.gamma, params.r)
        rho = np.exp(lr)
        phi = np.exp(-lr)
        g1 = c1 * rho + c2 * np.exp(2.0 * lr)
        y_t = phi * g1
        rho_y = rho * y_t
        s_ry += float(np.sum(rho_y))
        s_ry2 += float(np.sum(rho_y * rho_y))
        s_y += float(np.sum(y_t))
        s_y2 += float(np.sum(y_t * y_t))
        done += c
    mean_ry = s_ry / n_paths
    mean_y = s_y / n_paths
    var_ry = max(s_ry2 / n_paths - mean_ry * mean_ry, 0.0)
    var_y = max(s_y2 / n_paths - mean_y * mean_y, 0.0)
    return BudgetReport(mean_rho_y=mean_ry,
                        se_rho_y=float(np.sqrt(var_ry / n_paths)),
                        mean_y=mean_y, se_y=float(np.sqrt(var_y / n_paths)),
                        y0=params.y0, z=params.z, n_paths=n_paths,
                        c1=c1, c2=c2, moments=moments)


# ---------------------------------------------------------------------------
# Direct evaluator of the root derivative of rho_T along branches.


def branch_drho_root(ensemble: BranchEnsemble, mall: MalliavinBranch,
                     params: ModelParams | None = None) -> np.ndarray:
    """Per-branch pathwise derivative of rho_T w.r.t. the root increment.

    rho_T * (-(b-r+gamma*pi_root) - gamma*S2 - gamma*S3). Cross-check value
    only; the solver consumes the same structure through the N1/N2/N3
    averages. The sign of the S2 term is pinned by a finite-difference test.
    """
    params = ensemble.outer.params if params is None else params
    s2, s3 = branch_s2_s3(ensemble, mall, params)
    k = ensemble.root_index
    th = params.b - params.r + params.gamma * ensemble.outer.pi[k]
    gamma = params.gamma
    return ensemble.rho_terminal * (-th - gamma * s2 - gamma * s3)
