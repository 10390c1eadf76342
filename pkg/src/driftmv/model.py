"""Model constants and closed-form auxiliaries shared by every other module.

The market has one stock whose drift is an unobserved random variable taking
the bull value ``a`` with prior probability ``pi0`` and the bear value ``b``
otherwise (unit volatility). All closed forms here are pure functions; they
carry no state and are safe to call from any thread.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DegenerateVarianceError",
    "ModelParams",
    "MomentEstimates",
    "truncated_diffusion",
    "log_rho_increment",
    "exact_posterior",
    "compute_c1_c2",
]


class DegenerateVarianceError(ValueError):
    """Raised when Var(rho_T) is too small to determine the budget constants."""


# Below this the terminal state-price density is numerically constant and the
# mean-variance problem has no interior solution.
VAR_RHO_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Market and preference constants.

    Parameters
    ----------
    a, b : float
        Bull and bear drift values (1/time), ``a > b``.
    r : float
        Risk-free rate (1/time).
    pi0 : float
        Prior probability of the bull drift. The open interval is the
        standard model; 0 and 1 are admitted as degenerate oracle cases
        (the filter is then constant and the problem is lognormal).
    y0 : float
        Initial wealth (currency), positive.
    z : float
        Target expected terminal wealth (currency).
    T : float
        Horizon (time), positive.
    """

    a: float
    b: float
    r: float = 0.0
    pi0: float = 0.5
    y0: float = 1.0
    z: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if not self.a > self.b:
            raise ValueError(f"drift gap must be positive, got a={self.a} <= b={self.b}")
        if not 0.0 <= self.pi0 <= 1.0:
            raise ValueError(f"pi0 must lie in [0, 1], got {self.pi0}")
        if not self.y0 > 0.0:
            raise ValueError(f"y0 must be positive, got {self.y0}")
        if not self.T > 0.0:
            raise ValueError(f"T must be positive, got {self.T}")

    @property
    def gamma(self) -> float:
        """Drift gap a - b (always positive)."""
        return self.a - self.b


@dataclass(frozen=True)
class MomentEstimates:
    """First two moments of the terminal state-price density rho_T.

    ``se_rho``/``se_rho2`` are Monte Carlo standard errors (zero for exact
    closed-form moments). Construction rejects moment pairs that violate
    the Cauchy-Schwarz ordering beyond the degeneracy floor.
    """

    e_rho: float
    e_rho2: float
    se_rho: float = 0.0
    se_rho2: float = 0.0
    n_samples: int = 0

    def __post_init__(self):
        if not self.e_rho > 0.0:
            raise ValueError(f"E[rho_T] must be positive, got {self.e_rho}")
        if self.e_rho2 < self.e_rho**2 - VAR_RHO_FLOOR:
            raise ValueError(
                f"inconsistent moments: E[rho^2]={self.e_rho2} < (E[rho])^2={self.e_rho**2}"
            )

    @property
    def var_rho(self) -> float:
        return self.e_rho2 - self.e_rho**2


def truncated_diffusion(x, gamma):
    """Filter diffusion coefficient, truncated to vanish outside [0, 1].

    Returns ``gamma * x * (1 - x)`` for x in [0, 1] and 0 elsewhere, which
    restores global Lipschitz continuity for the Euler scheme. Accepts
    scalars or arrays.
    """
    x = np.asarray(x)
    inside = (x >= 0.0) & (x <= 1.0)
    value = np.where(inside, gamma * x * (1.0 - x), 0.0)
    return value if value.ndim else float(value)


def log_rho_increment(pi, dnu, delta, params: ModelParams):
    """One Euler increment of the log state-price density.

    dLrho = -(b - r + gamma*pi) dnu - (r + (b - r + gamma*pi)^2 / 2) delta,
    evaluated at the left endpoint ``pi``. Scalar or array ``pi``/``dnu``.
    """
    th = params.b - params.r + params.gamma * pi
    return -(th * dnu + delta * (params.r + 0.5 * (th * th)))


def exact_posterior(pi0, L, t, params: ModelParams):
    """Exact Bayes posterior probability of the bull drift given the log price.

    Parameters
    ----------
    pi0 : float
        Prior probability in [0, 1].
    L, t : float or ndarray
        Observed log price value(s) and the corresponding time(s).
    params : ModelParams
        Supplies the drift values.

    Returns
    -------
    float or ndarray
        pi0 * Lambda / (pi0 * Lambda + 1 - pi0) where Lambda is the
        likelihood ratio exp(gamma * L - gamma * (a + b - 1) * t / 2) of the
        log-price path under drift a - 1/2 versus b - 1/2. Evaluated in log
        space and clamped to [0, 1] so large |L| cannot overflow.
    """
    if not 0.0 <= pi0 <= 1.0:
        raise ValueError(f"pi0 must lie in [0, 1], got {pi0}")
    L = np.asarray(L, dtype=float)
    t = np.asarray(t, dtype=float)
    log_lam = params.gamma * L - 0.5 * params.gamma * (params.a + params.b - 1.0) * t
    # Two algebraically equal forms, chosen so the exponent is never positive.
    with np.errstate(over="ignore"):
        pos = pi0 / (pi0 + (1.0 - pi0) * np.exp(np.minimum(-log_lam, 0.0)))
        neg = pi0 * np.exp(np.minimum(log_lam, 0.0))
        neg = neg / (neg + (1.0 - pi0))
    post = np.clip(np.where(log_lam >= 0.0, pos, neg), 0.0, 1.0)
    return post if post.ndim else float(post)


def compute_c1_c2(moments: MomentEstimates, params: ModelParams) -> tuple[float, float]:
    """Budget constants of the optimal terminal wealth v = c1 + c2 * rho_T.

    Solves E[v] = z and E[rho_T v] = y0 for (c1, c2):

        c1 = (z E[rho^2] - y0 E[rho]) / Var(rho),
        c2 = (y0 - z E[rho]) / Var(rho).

    Raises
    ------
    DegenerateVarianceError
        If Var(rho_T) is at or below the floor (rho_T numerically constant,
        a model misconfiguration).
    """
    var = moments.var_rho
    if var <= VAR_RHO_FLOOR:
        raise DegenerateVarianceError(
            f"Var(rho_T)={var:.3e} is degenerate; the target/budget system is singular"
        )
    c1 = (params.z * moments.e_rho2 - params.y0 * moments.e_rho) / var
    c2 = (params.y0 - params.z * moments.e_rho) / var
    return c1, c2
