"""The nested particle scheme: moment estimation, per-node integrand
estimators, and full wealth/portfolio trajectories along one outer path.

At every evaluated outer node k the scheme grows m branch continuations,
reduces them through the fused kernels to (log rho_T, S2, S3) per branch,
and assembles

    N1 = -(b-r+gamma*pi_k) * mean(c1*rho + 2*c2*rho^2)
    N2 = -mean((c1*rho + 2*c2*rho^2) * S2)
    N3 = -mean((c1*rho + 2*c2*rho^2) * S3)
    eta = N1 + gamma*N2 + gamma*N3
    Y   = Phi_k * mean(c1*rho + c2*rho^2)
    u   = (b-r+gamma*pi_k)*Y + Phi_k*eta

rho^2 is always exp(2*log rho), never a square of an exponential.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backend
from .malliavin import MalliavinBranch, branch_s2_s3
from .model import ModelParams, MomentEstimates, compute_c1_c2
from .paths import (DOMAIN_MOMENTS, BranchEnsemble, EnsembleSpec, GridSpec,
                    OuterPath, branch_increments, simulate_outer_path)

__all__ = ["SchemeOutput", "estimate_rho_moments", "estimate_N", "solve_path"]

_MOMENT_CHUNK = 8192


@dataclass(frozen=True)
class SchemeOutput:
    """Trajectories at the evaluated outer nodes plus the constants used."""

    times: np.ndarray
    pi: np.ndarray
    phi: np.ndarray
    N1: np.ndarray
    N2: np.ndarray
    N3: np.ndarray
    eta: np.ndarray
    Y: np.ndarray
    u: np.ndarray
    c1: float
    c2: float
    moments: MomentEstimates
    params: ModelParams
    grid: GridSpec
    spec: EnsembleSpec
    outer: OuterPath


def _g_weights(lrho_terminal, c1, c2):
    """(c1*rho + c2*rho^2, c1*rho + 2*c2*rho^2) from terminal log values."""
    rho = np.exp(lrho_terminal)
    r2 = np.exp(2.0 * lrho_terminal)
    return c1 * rho + c2 * r2, c1 * rho + 2.0 * c2 * r2


def _node_estimates(lrho_terminal, s2, s3, th_root, c1, c2):
    g1, gp = _g_weights(lrho_terminal, c1, c2)
    nhat = np.mean(g1)
    n1 = -(th_root * np.mean(gp))
    n2 = -np.mean(gp * s2)
    n3 = -np.mean(gp * s3)
    return nhat, n1, n2, n3


def estimate_rho_moments(params: ModelParams, grid: GridSpec, m: int,
                         seed: int) -> MomentEstimates:
    """Monte Carlo first and second moments of rho_T over m fresh paths.

    Uses its own stream domain, disjoint from the pricing branches, and the
    same Euler recursions as the branches (a moment path is just a branch
    rooted at time 0). Chunked so memory stays flat for large m.
    """
    if m < 2:
        raise ValueError(f"need at least 2 moment samples, got {m}")
    n = grid.n
    delta = grid.delta
    sqd = np.sqrt(delta)
    bmr = params.b - params.r
    ss = np.random.SeedSequence(int(seed), spawn_key=(DOMAIN_MOMENTS,))
    rng = np.random.default_rng(ss)
    s1 = 0.0
    s2m = 0.0
    s4 = 0.0
    done = 0
    while done < m:
        c = min(_MOMENT_CHUNK, m - done)
        dnu = rng.standard_normal((c, n))
        dnu *= sqd
        lr, _, _ = backend.branch_stats(params.pi0, dnu, delta, bmr,
                                        params.gamma, params.r)
        s1 += float(np.sum(np.exp(lr)))
        r2 = np.exp(2.0 * lr)
        s2m += float(np.sum(r2))
        s4 += float(np.sum(r2 * r2))
        done += c
    e1 = s1 / m
    e2 = s2m / m
    e4 = s4 / m
    se1 = np.sqrt(max(e2 - e1 * e1, 0.0) / m)
    se2 = np.sqrt(max(e4 - e2 * e2, 0.0) / m)
    return MomentEstimates(e_rho=e1, e_rho2=e2, se_rho=float(se1),
                           se_rho2=float(se2), n_samples=m)


def estimate_N(ensemble: BranchEnsemble, mall: MalliavinBranch, c1, c2,
               params: ModelParams | None = None):
    """(N1, N2, N3) at the ensemble's root from materialized branches.

    Composition path used by tests and the direct-evaluation oracle; the
    solver itself runs the fused kernels, which agree bitwise.
    """
    params = ensemble.outer.params if params is None else params
    s2, s3 = branch_s2_s3(ensemble, mall, params)
    k = ensemble.root_index
    th_root = params.b - params.r + params.gamma * ensemble.outer.pi[k]
    _, n1, n2, n3 = _node_estimates(ensemble.lrho[:, -1], s2, s3, th_root,
                                    c1, c2)
    return n1, n2, n3


def solve_path(params: ModelParams, grid: GridSpec, spec: EnsembleSpec, *,
               moments: MomentEstimates | None = None,
               n_moment_samples: int | None = None,
               outer: OuterPath | None = None,
               threads: int = 1) -> SchemeOutput:
    """Simulate one outer path and evaluate the scheme at stride nodes.

    Node results are pure functions of (params, grid, spec); threads only
    change wall time, never values. Raises if stride does not divide n.
    """
    n = grid.n
    if n % spec.stride != 0:
        raise ValueError(f"stride {spec.stride} does not divide n={n}")
    if moments is None:
        m_mom = n_moment_samples if n_moment_samples is not None \
            else max(4 * spec.m, 4096)
        moments = estimate_rho_moments(params, grid, m_mom, spec.master_seed)
    c1, c2 = compute_c1_c2(moments, params)
    if outer is None:
        outer = simulate_outer_path(params, grid, spec.master_seed)
    elif outer.grid.n != n:
        raise ValueError("supplied outer path does not match the grid")

    ks = list(range(0, n + 1, spec.stride))
    nk = len(ks)
    phi = np.exp(outer.lphi[ks])
    pi = outer.pi[ks]
    N1 = np.empty(nk)
    N2 = np.empty(nk)
    N3 = np.empty(nk)
    eta = np.empty(nk)
    Y = np.empty(nk)
    u = np.empty(nk)

    delta = grid.delta
    gamma = params.gamma
    bmr = params.b - params.r
    r = params.r

    def eval_node(idx: int):
        k = ks[idx]
        dnu = branch_increments(spec.master_seed, k, spec.m, n - k, delta)
        lr, s2, s3 = backend.branch_stats(outer.pi[k], dnu, delta, bmr,
                                          gamma, r)
        lrho_term = outer.lrho[k] + lr
        th = bmr + gamma * outer.pi[k]
        nhat, n1, n2, n3 = _node_estimates(lrho_term, s2, s3, th, c1, c2)
        e = n1 + gamma * n2 + gamma * n3
        y = phi[idx] * nhat
        N1[idx] = n1
        N2[idx] = n2
        N3[idx] = n3
        eta[idx] = e
        Y[idx] = y
        u[idx] = th * y + phi[idx] * e

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(eval_node, range(nk)))
    else:
        for idx in range(nk):
            eval_node(idx)

    return SchemeOutput(times=grid.times[ks], pi=pi, phi=phi, N1=N1, N2=N2,
                        N3=N3, eta=eta, Y=Y, u=u, c1=c1, c2=c2,
                        moments=moments, params=params, grid=grid, spec=spec,
                        outer=outer)
