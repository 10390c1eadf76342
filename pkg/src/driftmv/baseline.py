"""Double-partition baseline solver (the older scheme we compare against).

The baseline works on two nested grids: a coarse one with n1 steps where the
solution is reported, and a fine one with n1*n2 steps used only to build a
synthetic quadratic-covariation estimate of the integrand. Conditional means
are re-estimated from scratch at every fine node, which is what makes the
method expensive and noisy compared to the derivative-based scheme.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .model import ModelParams, MomentEstimates, compute_c1_c2, log_rho_increment
from .paths import (DOMAIN_BASELINE_COARSE, DOMAIN_BASELINE_FINE, GridSpec,
                    euler_filter_step, sample_increments, simulate_outer_path)
from .scheme import estimate_rho_moments
from .validation import example_driver_increments, example_h_path

__all__ = ["DoubleGrid", "old_eta", "old_solve_example", "old_solve_drift"]


@dataclass(frozen=True)
class DoubleGrid:
    """Nested coarse/fine partition: n1 coarse steps, n2 fine steps in each."""

    n1: int
    n2: int
    T: float = 1.0

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError(f"need n1 >= 1 and n2 >= 1, got n1={self.n1}, n2={self.n2}")
        if self.T <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.T}")

    @property
    def delta1(self) -> float:
        return self.T / self.n1

    @property
    def delta2(self) -> float:
        return self.T / (self.n1 * self.n2)

    @property
    def n_fine(self) -> int:
        return self.n1 * self.n2

    @property
    def fine(self) -> GridSpec:
        return GridSpec(n=self.n_fine, T=self.T)

    @property
    def coarse_times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n1 + 1)


def old_eta(n_fine, w_fine, k: int, dgrid: DoubleGrid) -> float:
    """Covariation integrand estimate at coarse node k from fine-node data.

    n1 * sum of (increment of N) * (increment of the driver) over the k-th
    coarse interval [(k-1)*delta1, k*delta1], using the n2 fine subintervals.
    Bilinear in (N, W) by construction.
    """
    n_fine = np.asarray(n_fine, dtype=float)
    w_fine = np.asarray(w_fine, dtype=float)
    expect = dgrid.n_fine + 1
    if len(n_fine) != expect or len(w_fine) != expect:
        raise ValueError(
            f"fine-node arrays must have {expect} entries, got "
            f"{len(n_fine)} and {len(w_fine)}"
        )
    if not 1 <= k <= dgrid.n1:
        raise ValueError(f"coarse interval index k={k} outside 1..{dgrid.n1}")
    j0 = (k - 1) * dgrid.n2
    j1 = k * dgrid.n2
    dn = n_fine[j0 + 1:j1 + 1] - n_fine[j0:j1]
    dw = w_fine[j0 + 1:j1 + 1] - w_fine[j0:j1]
    return float(dgrid.n1 * np.sum(dn * dw))


def _coarse_branch_log_ratios(w_root: float, seed: int, node: int, m: int,
                              steps: int, delta: float, domain: int) -> np.ndarray:
    dwb = sample_increments(seed, (domain, node), (m, steps), delta)
    logr, _ = backend.example_branch_stats(float(w_root), dwb, delta)
    return logr


def old_solve_example(dgrid: DoubleGrid, m: int,
                      seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Baseline solution of the benchmark BSDE at the coarse nodes.

    X_old = Phi^{delta1} * N^{m,delta1} uses coarse-step branch ensembles
    rooted at the coarse nodes. The integrand estimate differentiates
    nothing: N^{m,delta2} is re-estimated at every fine node and eta_1 is
    its synthetic covariation with W over each coarse interval, scaled by
    1/delta1. Z_old = Phi^{delta1}*eta_1 - (1+W)*X_old.

    eta_1 is defined from the preceding coarse interval, so node 0 has no
    interval of its own; it reuses the first interval's value.
    """
    n1, n2 = dgrid.n1, dgrid.n2
    n = dgrid.n_fine
    fine = dgrid.fine
    delta1, delta2 = dgrid.delta1, dgrid.delta2
    dw = example_driver_increments(fine, seed)
    w, h_fine = example_h_path(dw, delta2)
    t_fine = fine.times
    t1 = dgrid.coarse_times
    # coarse Euler path for H on the same driver, left endpoints at coarse nodes
    w1 = w[::n2].copy()
    dw1 = np.diff(w1)
    h1 = np.empty(n1 + 1)
    h1[0] = 0.0
    for k in range(n1):
        wk = w1[k]
        h1[k + 1] = h1[k] + ((1.0 + wk) * dw1[k] - delta1 * (wk * wk + 2.0 * wk))
    phi1 = np.exp(-h1)
    m1 = np.exp(2.0 * h1 - 2.0 * t1)
    # conditional means from coarse-step ensembles at coarse nodes
    n_coarse = np.empty(n1 + 1)
    for kc in range(n1 + 1):
        logr = _coarse_branch_log_ratios(w1[kc], seed, kc, m, n1 - kc, delta1,
                                         DOMAIN_BASELINE_COARSE)
        n_coarse[kc] = m1[kc] * float(np.mean(np.exp(logr)))
    x_old = phi1 * n_coarse
    # conditional means re-estimated at every fine node, fine-step ensembles
    m_fine = np.exp(2.0 * h_fine - 2.0 * t_fine)
    n_fine_vals = np.empty(n + 1)
    for j in range(n + 1):
        logr = _coarse_branch_log_ratios(w[j], seed, j, m, n - j, delta2,
                                         DOMAIN_BASELINE_FINE)
        n_fine_vals[j] = m_fine[j] * float(np.mean(np.exp(logr)))
    eta1 = np.empty(n1 + 1)
    for kc in range(1, n1 + 1):
        eta1[kc] = old_eta(n_fine_vals, w, kc, dgrid)
    eta1[0] = eta1[1]
    z_old = phi1 * eta1 - (1.0 + w1) * x_old
    return x_old, z_old


def old_solve_drift(params: ModelParams, dgrid: DoubleGrid, m: int, seed: int,
                    moments: MomentEstimates | None = None,
                    n_moment_samples: int | None = None
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Baseline (Y_old, u_old) for the drift-uncertainty model at coarse nodes.

    Same structure as the example solver, but the driver is the innovation
    process and the terminal functional is c1*rho_T + c2*rho_T^2 with the
    run's estimated moments. Y_old comes from coarse-step ensembles rooted
    on a coarse-step filter path; eta_1 is the covariation of fine-node
    conditional means against the innovation; u_old combines them through
    the same linear recovery as the derivative-based scheme.
    """
    if dgrid.T != params.T:
        raise ValueError(f"grid horizon {dgrid.T} != model horizon {params.T}")
    n1, n2 = dgrid.n1, dgrid.n2
    n = dgrid.n_fine
    fine = dgrid.fine
    delta1, delta2 = dgrid.delta1, dgrid.delta2
    gamma = params.gamma
    bmr = params.b - params.r
    if moments is None:
        n_mom = max(4 * m, 4096) if n_moment_samples is None else n_moment_samples
        moments = estimate_rho_moments(params, fine, n_mom, seed)
    c1, c2 = compute_c1_c2(moments, params)
    outer = simulate_outer_path(params, fine, seed)
    # coarse filter and deflator recursions on block-summed innovations
    dnu1 = outer.dnu.reshape(n1, n2).sum(axis=1)
    pi1 = np.empty(n1 + 1)
    lrho1 = np.empty(n1 + 1)
    pi1[0] = params.pi0
    lrho1[0] = 0.0
    for k in range(n1):
        lrho1[k + 1] = lrho1[k] + log_rho_increment(pi1[k], dnu1[k], delta1, params)
        pi1[k + 1] = euler_filter_step(pi1[k], dnu1[k], gamma)
    phi1 = np.exp(-lrho1)
    y_old = np.empty(n1 + 1)
    for kc in range(n1 + 1):
        dnub = sample_increments(seed, (DOMAIN_BASELINE_COARSE, kc),
                                 (m, n1 - kc), delta1)
        lr, _, _ = backend.branch_stats(float(pi1[kc]), dnub, delta1, bmr,
                                        gamma, params.r)
        lterm = lrho1[kc] + lr
        g1 = c1 * np.exp(lterm) + c2 * np.exp(2.0 * lterm)
        y_old[kc] = phi1[kc] * float(np.mean(g1))
    # fine-node conditional means of the terminal functional
    nu_path = np.empty(n + 1)
    nu_path[0] = 0.0
    np.cumsum(outer.dnu, out=nu_path[1:])
    n_fine_vals = np.empty(n + 1)
    for j in range(n + 1):
        dnub = sample_increments(seed, (DOMAIN_BASELINE_FINE, j),
                                 (m, n - j), delta2)
        lr, _, _ = backend.branch_stats(float(outer.pi[j]), dnub, delta2, bmr,
                                        gamma, params.r)
        lterm = outer.lrho[j] + lr
        g1 = c1 * np.exp(lterm) + c2 * np.exp(2.0 * lterm)
        n_fine_vals[j] = float(np.mean(g1))
    eta1 = np.empty(n1 + 1)
    for kc in range(1, n1 + 1):
        eta1[kc] = old_eta(n_fine_vals, nu_path, kc, dgrid)
    eta1[0] = eta1[1]
    u_old = (bmr + gamma * pi1) * y_old + phi1 * eta1
    return y_old, u_old
