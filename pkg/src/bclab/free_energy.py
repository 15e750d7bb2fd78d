"""Cumulant generating function and free-energy function of the mean-field
Blume-Capel model.

The single-site law is rho_beta on {-1, 0, 1} with weights proportional to
exp(-beta * w**2).  Its cumulant generating function is

    c_beta(t) = log[(1 + e^{-beta} (e^t + e^{-t})) / (1 + 2 e^{-beta})]

and the free-energy function is G_{beta,K}(x) = beta*K*x**2 - c_beta(2*beta*K*x).
Derivatives of c_beta are the cumulants of the exponentially tilted law, so
they are obtained from its three point masses without symbolic work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_ORDER = 7


@dataclass(frozen=True)
class ModelParams:
    """A point (beta, K) of the open positive quadrant."""

    beta: float
    kk: float

    def __post_init__(self):
        for name in ("beta", "kk"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite real, got {v!r}")
            if v <= 0:
                raise ValueError(f"{name} must be positive, got {v!r}")
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "kk", float(self.kk))

    @property
    def coupling(self) -> float:
        """The slope 2*beta*K of the inner map x -> t."""
        return 2.0 * self.beta * self.kk


@dataclass(frozen=True)
class DerivStack:
    """Values c_beta(t), c_beta'(t), ..., c_beta^(max_order)(t)."""

    beta: float
    t: float
    values: np.ndarray

    def __getitem__(self, j):
        return self.values[j]

    def __len__(self):
        return len(self.values)


def _check_finite(**kw):
    for name, v in kw.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


def _check_beta(beta):
    _check_finite(beta=beta)
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta!r}")


def _log_num(a, beta):
    # log(1 + e^{-beta}(e^a + e^{-a})) for a >= 0; the same expression at
    # a = 0 gives the normalizer, so c_beta(0) is exactly 0
    return np.logaddexp(0.0, a - beta + np.log1p(np.exp(-2.0 * a)))


def _log_norm(beta):
    return _log_num(0.0, beta)


def c_beta(beta: float, t: float) -> float:
    """Cumulant generating function of rho_beta at t.

    Evaluated through |t| with e^{-2|t|} as the only exponential, so it is
    exactly even and does not overflow for large |t|.
    """
    _check_beta(beta)
    _check_finite(t=t)
    return float(_log_num(abs(float(t)), beta) - _log_norm(beta))


def _tilted_masses(beta, t):
    """Point masses (p_minus, p_zero, p_plus) of rho_beta tilted by e^{t w}."""
    logs = np.array([-t - beta, 0.0, t - beta])
    logs -= logs.max()
    w = np.exp(logs)
    return w / w.sum()


def _moments_to_cumulants(mu):
    # mu[0] = 1; kappa_n = mu_n - sum_{m=1}^{n-1} C(n-1, m-1) kappa_m mu_{n-m}
    order = len(mu) - 1
    kappa = np.zeros(order + 1)
    for n in range(1, order + 1):
        acc = mu[n]
        for m in range(1, n):
            acc -= math.comb(n - 1, m - 1) * kappa[m] * mu[n - m]
        kappa[n] = acc
    return kappa


def c_beta_derivs(beta: float, t: float, max_order: int = MAX_ORDER) -> DerivStack:
    """c_beta and its first ``max_order`` derivatives at t.

    The j-th derivative is the j-th cumulant of the tilted three-point law.
    """
    _check_beta(beta)
    _check_finite(t=t)
    if not 0 <= max_order <= MAX_ORDER:
        raise ValueError(f"max_order must be in 0..{MAX_ORDER}, got {max_order}")
    t = float(t)
    p_minus, _, p_plus = _tilted_masses(beta, t)
    mu = np.empty(max_order + 1)
    mu[0] = 1.0
    for j in range(1, max_order + 1):
        mu[j] = p_plus + (-1) ** j * p_minus
    vals = _moments_to_cumulants(mu)
    vals[0] = c_beta(beta, t)
    if t == 0.0:
        vals[1::2] = 0.0
    return DerivStack(beta=float(beta), t=t, values=vals)


def free_energy_G(p: ModelParams, x: float) -> float:
    """G_{beta,K}(x) = beta*K*x**2 - c_beta(2*beta*K*x)."""
    _check_finite(x=x)
    x = float(x)
    return p.beta * p.kk * x * x - c_beta(p.beta, p.coupling * abs(x))


def free_energy_G_deriv(p: ModelParams, x: float, j: int) -> float:
    """j-th derivative of G_{beta,K} at x, for j in 1..7."""
    if not isinstance(j, (int, np.integer)) or not 1 <= j <= MAX_ORDER:
        raise ValueError(f"derivative order must be in 1..{MAX_ORDER}, got {j!r}")
    _check_finite(x=x)
    a = p.coupling
    c = c_beta_derivs(p.beta, a * x, j)
    if j == 1:
        return a * x - a * c[1]
    if j == 2:
        return a - a * a * c[2]
    return -(a**j) * c[j]


def free_energy_G_derivs(p: ModelParams, x: float, max_order: int = MAX_ORDER) -> np.ndarray:
    """Array [G(x), G'(x), ..., G^(max_order)(x)] from a single cumulant stack."""
    _check_finite(x=x)
    a = p.coupling
    c = c_beta_derivs(p.beta, a * x, max_order).values
    out = -(a ** np.arange(max_order + 1)) * c
    out[0] = free_energy_G(p, x)
    if max_order >= 1:
        out[1] = a * x - a * c[1]
    if max_order >= 2:
        out[2] = a - a * a * c[2]
    return out


def c2_at_zero(beta: float) -> float:
    """c_beta''(0) = 2 e^{-beta} / (1 + 2 e^{-beta})."""
    _check_beta(beta)
    return 2.0 / (math.exp(beta) + 2.0)


def free_energy_G_array(p: ModelParams, xs) -> np.ndarray:
    """Vectorized G_{beta,K} over an array of x values."""
    xs = np.asarray(xs, dtype=float)
    a = np.abs(p.coupling * xs)
    return p.beta * p.kk * xs * xs - (_log_num(a, p.beta) - _log_norm(p.beta))


def free_energy_G_prime_array(p: ModelParams, xs) -> np.ndarray:
    """Vectorized G'_{beta,K}; c_beta'(t) is written in terms of e^{-|t|}."""
    xs = np.asarray(xs, dtype=float)
    a = p.coupling
    t = a * xs
    e = np.exp(-2.0 * np.abs(t))
    c1 = np.sign(t) * (1.0 - e) / (1.0 + np.exp(p.beta - np.abs(t)) + e)
    return a * xs - a * c1
