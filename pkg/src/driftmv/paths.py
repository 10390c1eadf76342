"""Time grids, seeded increment streams, the outer filter path, and the
branch ensembles rooted at its nodes.

Randomness is organized as one master seed plus integer stream keys
(domain, qualifiers...). Every stream is derived independently through
``numpy.random.SeedSequence`` spawn keys, so any subset of the computation
can be regenerated in isolation and results are independent of thread
count and evaluation order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, log_rho_increment, truncated_diffusion

__all__ = [
    "GridSpec", "EnsembleSpec", "OuterPath", "BranchEnsemble",
    "make_grid", "sample_increments", "euler_filter_step",
    "simulate_outer_path", "branch_increments", "grow_branch_ensemble",
    "replicate_seed",
    "DOMAIN_OUTER", "DOMAIN_BRANCH", "DOMAIN_MOMENTS",
    "DOMAIN_BASELINE_FINE", "DOMAIN_STUDY", "DOMAIN_BASELINE_COARSE",
    "DOMAIN_REPLICATE",
]

# Stream-key domains. First element of every spawn key; keeps the outer
# path, pricing branches, moment estimation, baseline ensembles and the
# convergence studies on provably disjoint streams.
DOMAIN_OUTER = 0
DOMAIN_BRANCH = 1
DOMAIN_MOMENTS = 2
DOMAIN_BASELINE_FINE = 3
DOMAIN_STUDY = 4
DOMAIN_BASELINE_COARSE = 5
DOMAIN_REPLICATE = 6


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with n steps on [0, T]; delta derived, never stored."""

    n: int
    T: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not self.T > 0.0:
            raise ValueError(f"T must be positive, got {self.T}")

    @property
    def delta(self) -> float:
        return self.T / self.n

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n + 1)


@dataclass(frozen=True)
class EnsembleSpec:
    """Branch count, master seed, and outer-node evaluation stride."""

    m: int
    master_seed: int
    stride: int = 1

    def __post_init__(self):
        if not self.m >= 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not self.stride >= 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")


def make_grid(T, n) -> GridSpec:
    return GridSpec(n=int(n), T=float(T))


def replicate_seed(master_seed: int, rep: int) -> int:
    """Derive an independent master seed for replication ``rep``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(DOMAIN_REPLICATE, int(rep)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_increments(master_seed: int, key, shape, delta: float) -> np.ndarray:
    """Gaussian increments N(0, delta), fully determined by (seed, key).

    ``key`` is a tuple of ints naming the stream (domain first). The same
    (master_seed, key) always yields the same array; distinct keys give
    independent streams.
    """
    ss = np.random.SeedSequence(int(master_seed),
                                spawn_key=tuple(int(x) for x in key))
    rng = np.random.default_rng(ss)
    out = rng.standard_normal(shape)
    out *= np.sqrt(delta)
    return out


def euler_filter_step(pi, dnu, gamma):
    """One Euler step of the filter SDE: pi + truncated sigma(pi) * dnu."""
    return pi + truncated_diffusion(pi, gamma) * dnu


@dataclass(frozen=True)
class OuterPath:
    """One simulated observation path on the full grid.

    ``lphi`` accumulates the sign-flipped log state-price increments; for
    this pair of recursions that makes lphi_k == -lrho_k exactly (negation
    commutes with round-to-nearest), which downstream code relies on only
    through exp(lphi).
    """

    params: ModelParams
    grid: GridSpec
    dnu: np.ndarray      # (n,)   innovation increments
    pi: np.ndarray       # (n+1,) Euler filter values
    lrho: np.ndarray     # (n+1,) log state-price density
    lphi: np.ndarray     # (n+1,) log of its reciprocal
    master_seed: int = 0
    path_index: int = 0

    @property
    def times(self) -> np.ndarray:
        return self.grid.times


def simulate_outer_path(params: ModelParams, grid: GridSpec, master_seed: int,
                        path_index: int = 0) -> OuterPath:
    """Iterate the filter and log-density recursions along one fresh stream."""
    dnu = sample_increments(master_seed, (DOMAIN_OUTER, path_index), grid.n,
                            grid.delta)
    return outer_path_from_increments(params, grid, dnu,
                                      master_seed=int(master_seed),
                                      path_index=int(path_index))


def outer_path_from_increments(params: ModelParams, grid: GridSpec, dnu,
                               master_seed: int = 0,
                               path_index: int = 0) -> OuterPath:
    """Run the outer recursions on caller-supplied innovation increments.

    Used by coupled convergence studies, where coarser paths are driven by
    block sums of one fine increment stream.
    """
    n = grid.n
    delta = grid.delta
    dnu = np.asarray(dnu, dtype=float)
    if dnu.shape != (n,):
        raise ValueError(f"need {n} increments, got shape {dnu.shape}")
    pi = np.empty(n + 1)
    lrho = np.empty(n + 1)
    lphi = np.empty(n + 1)
    pi[0] = params.pi0
    lrho[0] = 0.0
    lphi[0] = 0.0
    gamma = params.gamma
    for k in range(n):
        p = pi[k]
        inc = log_rho_increment(p, dnu[k], delta, params)
        lrho[k + 1] = lrho[k] + inc
        lphi[k + 1] = lphi[k] - inc
        pi[k + 1] = euler_filter_step(p, dnu[k], gamma)
    return OuterPath(params=params, grid=grid, dnu=dnu, pi=pi, lrho=lrho,
                     lphi=lphi, master_seed=int(master_seed),
                     path_index=int(path_index))


def branch_increments(master_seed: int, k: int, m: int, nb: int,
                      delta: float) -> np.ndarray:
    """(m, nb) increment matrix for the ensemble rooted at node k.

    Row i is the stream (master_seed, DOMAIN_BRANCH, k, i); rows are
    prefix-stable in m, so the first m rows of a larger ensemble with the
    same seed reproduce a smaller one exactly.
    """
    out = np.empty((m, nb))
    for i in range(m):
        out[i] = sample_increments(master_seed, (DOMAIN_BRANCH, k, i), nb, delta)
    return out


@dataclass(frozen=True)
class BranchEnsemble:
    """m branch continuations of (pi, lrho) from outer node k to T.

    Column l of the (m, nb+1) state arrays is branch node k+l; column 0 is
    the shared root. Values for nodes before k are the outer path's own
    (held by reference through ``outer``, never copied).
    """

    outer: OuterPath
    root_index: int
    dnu: np.ndarray      # (m, nb) branch increments
    pi: np.ndarray       # (m, nb+1)
    lrho: np.ndarray     # (m, nb+1)

    @property
    def m(self) -> int:
        return self.dnu.shape[0]

    @property
    def n_branch_steps(self) -> int:
        return self.dnu.shape[1]

    @property
    def root_pi(self) -> float:
        return float(self.outer.pi[self.root_index])

    @property
    def rho_terminal(self) -> np.ndarray:
        """rho^{i}(T) = exp of the terminal log value, one per branch."""
        return np.exp(self.lrho[:, -1])


def grow_branch_ensemble(outer: OuterPath, k: int, spec: EnsembleSpec,
                         params: ModelParams | None = None,
                         grid: GridSpec | None = None) -> BranchEnsemble:
    """Materialize the branch ensemble rooted at outer node k.

    Branch i consumes the stream (master_seed, DOMAIN_BRANCH, k, i); streams
    are never reused across roots. The recursions are written with the same
    operation order as the fused kernels, so terminal log values agree
    bitwise with the kernel path (root value added once, at the end).
    """
    params = outer.params if params is None else params
    grid = outer.grid if grid is None else grid
    n = grid.n
    if not 0 <= k <= n:
        raise ValueError(f"root index {k} outside [0, {n}]")
    m = spec.m
    nb = n - k
    delta = grid.delta
    dnu = branch_increments(spec.master_seed, k, m, nb, delta)
    root_pi = outer.pi[k]
    root_lrho = outer.lrho[k]
    pi = np.empty((m, nb + 1))
    lrho = np.empty((m, nb + 1))
    pi[:, 0] = root_pi
    lrho[:, 0] = root_lrho
    gamma = params.gamma
    bmr = params.b - params.r
    r = params.r
    rel = np.zeros(m)
    with np.errstate(over="ignore", invalid="ignore"):
        for l in range(nb):
            p = pi[:, l]
            dn = dnu[:, l]
            th = bmr + gamma * p
            rel = rel - (th * dn + delta * (r + 0.5 * (th * th)))
            lrho[:, l + 1] = root_lrho + rel
            sig = np.where((p >= 0.0) & (p <= 1.0), gamma * p * (1.0 - p), 0.0)
            pi[:, l + 1] = p + sig * dn
    return BranchEnsemble(outer=outer, root_index=int(k), dnu=dnu, pi=pi,
                          lrho=lrho)
