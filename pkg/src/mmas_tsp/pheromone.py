"""Bounded pheromone matrix, trail limits and the choice_info product matrix."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .instance import DistanceMatrix

TAU_MIN_FLOOR = 1e-30
CHOICE_FLOOR = float(np.finfo(np.float32).tiny)  # keep every float32 weight positive
DEFAULT_P_BEST = 0.01


@dataclass(frozen=True)
class MmasParams:
    alpha: float = 1.0
    beta: float = 2.0
    rho: float = 0.5  # retention factor: tau <- rho * tau

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be non-negative")


@dataclass(frozen=True)
class TrailLimits:
    tau_min: float
    tau_max: float
    p_best: float = DEFAULT_P_BEST

    def __post_init__(self):
        if not 0.0 < self.tau_min <= self.tau_max:
            raise ConfigError(f"need 0 < tau_min <= tau_max, got {self.tau_min}, {self.tau_max}")


def raw_tau_min(tau_max: float, p_best: float, n: int) -> float:
    """Lower limit before flooring and capping; can exceed tau_max on tiny instances."""
    root = p_best ** (1.0 / n)
    branching = n / 2.0 - 1.0
    if branching <= 0:
        return tau_max  # n <= 2: a single tour exists, no room for a band
    return tau_max * (1.0 - root) / (branching * root)


def init_limits(nn_cost: float, rho: float, p_best: float, n: int) -> TrailLimits:
    """tau_max = 1 / ((1 - rho) * cost); tau_min from p_best with branching factor n / 2."""
    if not nn_cost > 0:
        raise ConfigError(f"tour cost must be positive, got {nn_cost}")
    if not 0.0 < rho < 1.0:
        raise ConfigError(f"rho must lie in (0, 1), got {rho}")
    if not 0.0 < p_best <= 1.0:
        raise ConfigError(f"p_best must lie in (0, 1], got {p_best}")
    tau_max = 1.0 / ((1.0 - rho) * nn_cost)
    tau_min = min(max(raw_tau_min(tau_max, p_best, n), TAU_MIN_FLOOR), tau_max)
    return TrailLimits(tau_min, tau_max, p_best)


def update_limits(limits: TrailLimits, new_global_best_cost: float, rho: float, n: int,
                  p_best: float = None) -> TrailLimits:
    return init_limits(new_global_best_cost, rho, limits.p_best if p_best is None else p_best, n)


class PheromoneMatrix:
    """Symmetric trail matrix plus its read-only choice_info companion.

    ``choice`` is only writable inside recompute_choice_info, so construction
    code cannot update trails by accident.
    """

    def __init__(self, tau: np.ndarray, limits: TrailLimits):
        self.tau = tau
        self.limits = limits
        self.choice = np.zeros(tau.shape, dtype=np.float32)
        self.choice.setflags(write=False)

    @property
    def n(self) -> int:
        return self.tau.shape[0]

    def within_bounds(self, limits: TrailLimits = None) -> bool:
        lim = limits or self.limits
        off = ~np.eye(self.n, dtype=bool)
        vals = self.tau[off]
        return bool(np.all(vals >= lim.tau_min) and np.all(vals <= lim.tau_max))

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.tau, self.tau.T))


def init_pheromone(n: int, limits: TrailLimits) -> PheromoneMatrix:
    return PheromoneMatrix(np.full((n, n), limits.tau_max, dtype=np.float64), limits)


def evaporate(ph: PheromoneMatrix, rho: float, limits: TrailLimits = None) -> None:
    lim = limits or ph.limits
    np.multiply(ph.tau, rho, out=ph.tau)
    np.maximum(ph.tau, lim.tau_min, out=ph.tau)


def deposit(ph: PheromoneMatrix, route, cost: float, limits: TrailLimits = None) -> None:
    """Add 1/cost on both mirrors of every cycle edge of ``route``, capped at tau_max."""
    lim = limits or ph.limits
    r = np.asarray(route, dtype=np.int64)
    i = r
    j = np.roll(r, -1)
    if r.size < 3:
        i, j = i[:1], j[:1]  # n <= 2: the cycle has a single distinct edge
    vals = np.minimum(ph.tau[i, j] + 1.0 / cost, lim.tau_max)
    ph.tau[i, j] = vals
    ph.tau[j, i] = vals


def heuristic_matrix(dm: DistanceMatrix, beta: float) -> np.ndarray:
    """(1 / max(d, 1)) ** beta with a zero diagonal."""
    d = np.maximum(dm.d.astype(np.float64), 1.0)
    eta = (1.0 / d) ** beta
    np.fill_diagonal(eta, 0.0)
    return eta


def recompute_choice_info(ph: PheromoneMatrix, dm: DistanceMatrix, params: MmasParams,
                          eta_beta: np.ndarray = None) -> np.ndarray:
    """choice = tau**alpha * eta**beta as float32; pass ``eta_beta`` to reuse the heuristic part."""
    if dm.n != ph.n:
        raise ConfigError("pheromone and distance matrices differ in size")
    if eta_beta is None:
        eta_beta = heuristic_matrix(dm, params.beta)
    t = ph.tau if params.alpha == 1.0 else ph.tau ** params.alpha
    prod = t * eta_beta
    np.maximum(prod, CHOICE_FLOOR, out=prod)
    np.fill_diagonal(prod, 0.0)
    ph.choice.setflags(write=True)
    ph.choice[...] = prod
    ph.choice.setflags(write=False)
    return ph.choice
