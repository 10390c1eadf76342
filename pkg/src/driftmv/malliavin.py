"""Tangent (first-variation) process of the Euler filter along branches,
and the two pathwise sums it feeds.

The tangent D is the pathwise derivative of the terminal log state-price
density with respect to the innovation increment at the root node: it obeys
the linear one-step recursion D <- D + gamma*(1 - 2*pi)*D*dnu seeded with
the truncated diffusion at the root. The sums S2 = sum(D dnu) and
S3 = sum(delta*(b-r+gamma*pi)*D) enter the integrand estimator through

    d(log rho_T)/d(dnu_root) = -(b-r+gamma*pi_root) - gamma*S2 - gamma*S3,

a sign structure pinned by a finite-difference unit test (the S2 term is
easy to get wrong because the dnu-integral rule contributes a plus sign
that the -theta integrand then flips).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams
from .paths import BranchEnsemble

__all__ = [
    "MalliavinBranch", "malliavin_pi_step", "malliavin_branch",
    "continuous_malliavin_pi", "branch_s2_s3", "theta_and_derivative",
]


def malliavin_pi_step(dpi, pi_prev, dnu, gamma):
    """One step of the tangent recursion (left-endpoint values)."""
    return dpi + gamma * ((1.0 - 2.0 * pi_prev) * (dpi * dnu))


@dataclass(frozen=True)
class MalliavinBranch:
    """Tangent values along a branch ensemble.

    ``d[:, l]`` is the sensitivity at branch node root+l, for l = 0..nb-1:
    exactly the left-endpoint values consumed by the S2/S3 sums. Column 0
    is the common seed, the truncated diffusion at the root.
    """

    root_index: int
    seed: float
    d: np.ndarray        # (m, nb)


def malliavin_branch(ensemble: BranchEnsemble,
                     params: ModelParams | None = None) -> MalliavinBranch:
    """Run the tangent recursion along every branch of the ensemble."""
    params = ensemble.outer.params if params is None else params
    gamma = params.gamma
    m = ensemble.m
    nb = ensemble.n_branch_steps
    p0 = ensemble.root_pi
    seed = gamma * p0 * (1.0 - p0) if 0.0 <= p0 <= 1.0 else 0.0
    d = np.empty((m, nb))
    if nb > 0:
        d[:, 0] = seed
        for l in range(1, nb):
            d[:, l] = malliavin_pi_step(d[:, l - 1], ensemble.pi[:, l - 1],
                                        ensemble.dnu[:, l - 1], gamma)
    return MalliavinBranch(root_index=ensemble.root_index, seed=seed, d=d)


def continuous_malliavin_pi(pi_path, dnu, delta, gamma):
    """Closed-form tangent via its Doleans exponential, for cross-checks.

    Solves dD = gamma*(1-2*pi)*D dnu exactly:
    D(s) = sigma(pi_t) * exp(int gamma*(1-2*pi)dnu - 1/2 int gamma^2*(1-2*pi)^2 dr)
    evaluated by left-endpoint quadrature on the supplied discrete path.

    Parameters
    ----------
    pi_path : (L+1,) filter values from the root onward (pi_path[0] = pi_t)
    dnu : (L,) increments that drove them
    delta : step size
    gamma : drift gap

    Returns
    -------
    (L+1,) sensitivities D(t), D(t+delta), ..., D(t+L*delta).
    """
    pi_path = np.asarray(pi_path, dtype=float)
    dnu = np.asarray(dnu, dtype=float)
    p0 = pi_path[0]
    seed = gamma * p0 * (1.0 - p0) if 0.0 <= p0 <= 1.0 else 0.0
    x = gamma * (1.0 - 2.0 * pi_path[:-1])
    expo = np.cumsum(x * dnu - 0.5 * (x * x) * delta)
    out = np.empty(len(pi_path))
    out[0] = seed
    out[1:] = seed * np.exp(expo)
    return out


def branch_s2_s3(ensemble: BranchEnsemble, mall: MalliavinBranch,
                 params: ModelParams | None = None,
                 grid=None) -> tuple[np.ndarray, np.ndarray]:
    """The two pathwise sums, one value of each per branch.

    S2 = sum_l D_l * dnu_l and S3 = sum_l delta*(b-r+gamma*pi_l)*D_l over
    the branch steps, all left-endpoint, accumulated in step order (matches
    the fused kernels bitwise).
    """
    if mall.root_index != ensemble.root_index:
        raise ValueError(
            f"ensemble rooted at {ensemble.root_index} but tangent at {mall.root_index}"
        )
    params = ensemble.outer.params if params is None else params
    grid = ensemble.outer.grid if grid is None else grid
    delta = grid.delta
    gamma = params.gamma
    bmr = params.b - params.r
    m = ensemble.m
    nb = ensemble.n_branch_steps
    s2 = np.zeros(m)
    s3 = np.zeros(m)
    for l in range(nb):
        dn = ensemble.dnu[:, l]
        th = bmr + gamma * ensemble.pi[:, l]
        d = mall.d[:, l]
        s2 = s2 + d * dn
        s3 = s3 + delta * (th * d)
    return s2, s3


def theta_and_derivative(rho_T, c1, c2):
    """Terminal functional and the weight inside its derivative.

    Returns (c1*rho + c2*rho^2, c1*rho + 2*c2*rho^2); the first prices the
    wealth, the second multiplies the derivative structure in the integrand
    estimator. Scalar or array rho_T.
    """
    r2 = rho_T * rho_T
    return c1 * rho_T + c2 * r2, c1 * rho_T + 2.0 * c2 * r2
