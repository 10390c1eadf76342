"""Pure NumPy hot-loop kernels.

Fallback used when the compiled extension is unavailable. Every arithmetic
expression here is written with the exact parenthesization of the C versions
in ``_kernels.pyx`` (which are compiled with FP contraction off), so the two
backends produce bitwise identical doubles. Keep them in lockstep: any edit
to one file must be mirrored in the other, same operations, same order.
Transcendentals (exp) are deliberately excluded; callers apply them in the
shared Python layer.
"""
from __future__ import annotations

import numpy as np

__all__ = ["branch_stats", "example_branch_stats"]


def _check(mat, name):
    if not (isinstance(mat, np.ndarray) and mat.ndim == 2 and mat.dtype == np.float64
            and mat.flags.c_contiguous):
        raise ValueError(f"{name} must be a C-contiguous float64 matrix")


def branch_stats(pi_root, dnu, delta, b_minus_r, gamma, r):
    """Accumulate per-branch statistics for one ensemble rooted at pi_root.

    Each row of ``dnu`` holds the innovation increments of one branch over
    the nb remaining steps. Runs the truncated Euler filter, the log
    state-price density, the tangent (first-variation) process seeded at
    the root, and its two pathwise integrals, all at the left endpoint.

    Returns
    -------
    (lr, s2, s3) : three (m,) float64 arrays
        lr : sum of log-rho increments along the branch (root value excluded)
        s2 : sum of D * dnu
        s3 : sum of delta * (b - r + gamma*pi) * D
    """
    _check(dnu, "dnu")
    m, nb = dnu.shape
    pi_root = float(pi_root)
    if 0.0 <= pi_root <= 1.0:
        d0 = gamma * pi_root * (1.0 - pi_root)
    else:
        d0 = 0.0
    pi = np.full(m, pi_root)
    dpi = np.full(m, d0)
    lr = np.zeros(m)
    s2 = np.zeros(m)
    s3 = np.zeros(m)
    with np.errstate(over="ignore", invalid="ignore"):
        for l in range(nb):
            dn = dnu[:, l]
            th = b_minus_r + gamma * pi
            s2 = s2 + dpi * dn
            s3 = s3 + delta * (th * dpi)
            lr = lr - (th * dn + delta * (r + 0.5 * (th * th)))
            dpi = dpi + gamma * ((1.0 - 2.0 * pi) * (dpi * dn))
            sig = np.where((pi >= 0.0) & (pi <= 1.0), gamma * pi * (1.0 - pi), 0.0)
            pi = pi + sig * dn
    return lr, s2, s3


def example_branch_stats(w_root, dw, delta):
    """Branch statistics for the closed-form benchmark problem.

    Rows of ``dw`` are Brownian increments of branches started at w_root.
    Accumulates the log of the conditional-density ratio and the linear
    functional whose conditional expectation is the integrand derivative.

    Returns
    -------
    (logr, bracket) : two (m,) float64 arrays
        logr    : sum over the branch of 2*(1+w)*dw - 2*delta*(1+w)^2
        bracket : 2*w(T) - 4 * sum(delta*(1+w)) + 2
    """
    _check(dw, "dw")
    m, nb = dw.shape
    w = np.full(m, float(w_root))
    logr = np.zeros(m)
    isum = np.zeros(m)
    with np.errstate(over="ignore", invalid="ignore"):
        for l in range(nb):
            d = dw[:, l]
            ow = 1.0 + w
            logr = logr + (2.0 * (ow * d) - 2.0 * delta * (ow * ow))
            isum = isum + delta * ow
            w = w + d
    bracket = 2.0 * w - 4.0 * isum + 2.0
    return logr, bracket
