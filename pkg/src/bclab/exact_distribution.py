"""Exact law of the spin sum S_n under the canonical ensemble.

With n_+, n_-, n_0 the numbers of spins equal to +1, -1, 0 we have
sum w_j^2 = n_+ + n_- and S_n = n_+ - n_-, hence

    P{S_n = k}  proportional to  sum_{n_+ - n_- = k} multinomial(n; n_+, n_-, n_0)
                                  * exp(-beta (n_+ + n_-) + beta K k^2 / n).

The sum over s = n_+ + n_- is accumulated in log space, one k at a time, so
the cost is O(n^2) time and O(n) memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from . import __version__
from .free_energy import ModelParams

MAX_EXACT_N = 50_000
_LOG_TINY = math.log(1e-300)


class ExactSizeError(ValueError):
    pass


class ConditioningError(ValueError):
    pass


@dataclass(frozen=True)
class SpinSumPMF:
    """P{S_n = k} for k = -n..n; ``probs[i]`` belongs to k = i - n."""

    n: int
    beta: float
    kk: float
    log_probs: np.ndarray
    log_norm: float

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1)

    def prob(self, k: int) -> float:
        if abs(k) > self.n:
            return 0.0
        return float(np.exp(self.log_probs[k + self.n]))

    def log_prob_where(self, mask) -> float:
        """log P{S_n in A} for the boolean mask of A over k = -n..n."""
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            return -math.inf
        return float(logsumexp(self.log_probs[mask]))

    def to_csv(self, path_or_buf=None) -> str:
        lines = [f"# bclab {__version__} exact n={self.n} beta={self.beta!r} K={self.kk!r}", "k,prob"]
        lines += [f"{k},{p!r}" for k, p in zip(self.ks.tolist(), self.probs.tolist())]
        text = "\n".join(lines) + "\n"
        if path_or_buf is not None:
            if hasattr(path_or_buf, "write"):
                path_or_buf.write(text)
            else:
                with open(path_or_buf, "w") as fh:
                    fh.write(text)
        return text


def _log_weights_nonneg(n, beta):
    """log sum over s of multinomial(n; n_+, n_-, n - s) e^{-beta s}, for k = 0..n."""
    lf = gammaln(np.arange(n + 2, dtype=float))  # lf[i] = log((i-1)!)
    lfact = lf[1:]  # lfact[i] = log(i!)
    acc = np.full(n + 1, -np.inf)
    for s in range(n + 1):
        # k = n_+ - n_- ranges over s, s-2, ..., >= 0
        n_minus = np.arange(0, s // 2 + 1)
        n_plus = s - n_minus
        k = n_plus - n_minus
        logw = (lfact[n] - lfact[n - s]) - (lfact[n_plus] + lfact[n_minus]) - beta * s
        acc[k] = np.logaddexp(acc[k], logw)
    return acc


def spin_sum_pmf(n: int, p: ModelParams) -> SpinSumPMF:
    """Exact distribution of S_n under P_{n,beta,K}."""
    if n < 1 or int(n) != n:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if n > MAX_EXACT_N:
        raise ExactSizeError(
            f"n={n} exceeds the exact-enumeration limit {MAX_EXACT_N}; use the Monte Carlo backend"
        )
    half = _log_weights_nonneg(n, p.beta)
    k = np.arange(n + 1, dtype=float)
    half = half + p.beta * p.kk * k * k / n
    full = np.concatenate([half[:0:-1], half])
    total = logsumexp(full)
    log_probs = full - total
    # Z_n = 3^{-n} sum_omega exp(-beta H)
    log_norm = float(total - n * math.log(3.0))
    return SpinSumPMF(n=n, beta=p.beta, kk=p.kk, log_probs=log_probs, log_norm=log_norm)


def abs_magnetization_mean(pmf: SpinSumPMF) -> float:
    """E{|S_n / n|}."""
    return float(np.sum(np.abs(pmf.ks) / pmf.n * pmf.probs))


def fluctuation_mean(pmf: SpinSumPMF, m: float) -> float:
    """E{ | |S_n/n| - m | }."""
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"m must lie in [0, 1], got {m!r}")
    return float(np.sum(np.abs(np.abs(pmf.ks) / pmf.n - m) * pmf.probs))


@dataclass(frozen=True)
class ConditionalStats:
    p_plus: float
    p_minus: float
    p_mid: float
    log_p_plus: float
    log_p_mid: float
    cond_abs_mean: float
    mid_contribution: float
    cond_cdf_grid: np.ndarray | None


def _plus_mask(pmf, m, delta):
    # S_n/n > delta m, i.e. k > delta m n
    return pmf.ks > delta * m * pmf.n


def conditional_atoms(pmf: SpinSumPMF, m: float, delta: float, kappa: float):
    """Support points n^kappa (k/n - m) and conditional masses given S_n/n > delta m."""
    mask = _plus_mask(pmf, m, delta)
    lp = pmf.log_prob_where(mask)
    if lp < _LOG_TINY:
        raise ConditioningError(f"P(S_n/n > {delta} m) = exp({lp:.4g}) is below 1e-300")
    ks = pmf.ks[mask]
    z = float(pmf.n) ** kappa * (ks / pmf.n - m)
    w = np.exp(pmf.log_probs[mask] - lp)
    return z, w


def conditional_stats(pmf: SpinSumPMF, m: float, delta: float, kappa: float, grid=None) -> ConditionalStats:
    """Half-probabilities, middle probability and conditional moments given
    the event S_n/n > delta m."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if not 0.0 < delta * m < 1.0:
        raise ValueError(f"delta*m must lie in (0, 1), got {delta * m!r}")
    ks = pmf.ks
    plus = _plus_mask(pmf, m, delta)
    mid = np.abs(ks) <= delta * m * pmf.n
    lp_plus = pmf.log_prob_where(plus)
    lp_mid = pmf.log_prob_where(mid)
    if lp_plus < _LOG_TINY:
        raise ConditioningError(f"P(S_n/n > {delta} m) = exp({lp_plus:.4g}) is below 1e-300")
    probs = pmf.probs
    x = ks / pmf.n
    w_plus = np.exp(pmf.log_probs[plus] - lp_plus)
    cond_abs = float(np.sum(np.abs(x[plus] - m) * w_plus))
    mid_contrib = float(np.sum(np.abs(np.abs(x[mid]) - m) * probs[mid]))
    cdf = None
    if grid is not None:
        z, w = conditional_atoms(pmf, m, delta, kappa)
        cdf = np.cumsum(w)[np.searchsorted(z, np.asarray(grid, dtype=float), side="right") - 1]
        cdf = np.where(np.asarray(grid) < z[0], 0.0, cdf)
    p_plus = math.exp(lp_plus)
    return ConditionalStats(
        p_plus=p_plus,
        p_minus=p_plus,
        p_mid=math.exp(lp_mid),
        log_p_plus=lp_plus,
        log_p_mid=lp_mid,
        cond_abs_mean=cond_abs,
        mid_contribution=mid_contrib,
        cond_cdf_grid=cdf,
    )
