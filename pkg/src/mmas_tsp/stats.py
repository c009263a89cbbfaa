"""Friedman rank test for k treatments over b complete blocks."""

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, rankdata

from .errors import ConfigError

DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class FriedmanResult:
    k: int
    b: int
    statistic: float
    p_value: float
    rejected: bool
    alpha: float = DEFAULT_ALPHA
    mean_ranks: tuple = ()


def _as_matrix(samples) -> np.ndarray:
    """Validate and return samples as a (k treatments, b blocks) float array."""
    rows = [list(r) for r in samples]
    if len(rows) < 2:
        raise ConfigError("Friedman test needs at least two treatments")
    b = len(rows[0])
    if any(len(r) != b for r in rows):
        raise ConfigError("ragged samples: every treatment needs one value per block")
    if b < 2:
        raise ConfigError("Friedman test needs at least two blocks")
    x = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ConfigError("samples must be finite")
    return x


def friedman_statistic(mean_ranks: np.ndarray, b: int) -> float:
    k = len(mean_ranks)
    return float(12.0 * b / (k * (k + 1)) * np.sum((mean_ranks - (k + 1) / 2.0) ** 2))


def friedman_test(samples, alpha: float = DEFAULT_ALPHA) -> FriedmanResult:
    """``samples[j][i]`` is treatment j's value in block i.

    Ranks are taken within each block (average ranks for ties, no tie
    correction of the statistic); the p-value is the chi-square tail with
    k - 1 degrees of freedom.
    """
    x = _as_matrix(samples)
    k, b = x.shape
    ranks = rankdata(x, axis=0)  # rank treatments inside each block (column)
    mean_ranks = ranks.mean(axis=1)
    stat = max(friedman_statistic(mean_ranks, b), 0.0)
    p = float(min(max(chi2.sf(stat, k - 1), 0.0), 1.0))
    return FriedmanResult(k, b, stat, p, p < alpha, alpha, tuple(float(r) for r in mean_ranks))


def friedman_test_blocks(blocks, alpha: float = DEFAULT_ALPHA) -> FriedmanResult:
    """Same test with block-major input: ``blocks[i][j]`` is treatment j in block i."""
    rows = [list(r) for r in blocks]
    if rows and any(len(r) != len(rows[0]) for r in rows):
        raise ConfigError("ragged samples: every block needs one value per treatment")
    return friedman_test(list(zip(*rows)), alpha)
