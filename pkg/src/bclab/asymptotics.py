"""Finite-n verdicts for the scaling limits along sequences 1a-5a.

Every ``verify_*`` function evaluates one limit statement on a list of n,
compares it with its GL-polynomial target and returns a
:class:`VerificationReport`.  The pass bands live in ``data/bands.json``;
they are finite-n tolerances, not part of the limit statements.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.stats import norm

from .exact_distribution import (
    abs_magnetization_mean,
    conditional_atoms,
    conditional_stats,
    fluctuation_mean,
    spin_sum_pmf,
)
from .gl_sequences import (
    GLProfile,
    SequenceSpec,
    check_deriv_limits,
    check_scaled_G_limit,
    gl_profile,
    sequence_point,
)
from .phase_diagram import magnetization


@functools.lru_cache(maxsize=1)
def load_bands() -> dict:
    with resources.files("bclab").joinpath("data/bands.json").open() as fh:
        return json.load(fh)


def band(name: str) -> float:
    return float(load_bands()["bands"][name])


# ---------------------------------------------------------------------------
# rate fits


@dataclass(frozen=True)
class RateFit:
    exponent: float
    log_constant: float
    r_squared: float
    residual_trend: float
    n_used: tuple = ()

    @property
    def constant(self) -> float:
        return math.exp(self.log_constant)


def fit_rate(series, drop_fraction: float = 0.0) -> RateFit:
    """Least-squares fit of log value = log C + exponent * log n.

    ``series`` is a sequence of (n, value) pairs.  The smallest
    ``drop_fraction`` of the n values is discarded first, but never so many
    that fewer than 4 points remain.  ``residual_trend``
    is the slope of the residuals against log n over the upper half of the
    points, a sign of the local exponent still drifting.
    """
    pts = sorted((float(n), float(v)) for n, v in series)
    if any(v <= 0 for _, v in pts):
        raise ValueError("fit_rate needs positive values")
    if len(pts) < 4:
        raise ValueError(f"fit_rate needs at least 4 points, got {len(pts)}")
    drop = min(int(math.floor(drop_fraction * len(pts))), len(pts) - 4)
    pts = pts[drop:]
    ln = np.log([n for n, _ in pts])
    lv = np.log([v for _, v in pts])
    A = np.vstack([ln, np.ones_like(ln)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, lv, rcond=None)
    resid = lv - (slope * ln + icpt)
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, min(1.0, 1.0 - float(np.sum(resid**2)) / ss_tot))
    upper = slice(len(ln) // 2, None)
    trend = float(np.polyfit(ln[upper], resid[upper], 1)[0]) if len(ln[upper]) >= 2 else 0.0
    return RateFit(float(slope), float(icpt), r2, trend, tuple(int(n) for n, _ in pts))


# ---------------------------------------------------------------------------
# reports


@dataclass
class VerificationReport:
    theorem: str
    spec: SequenceSpec
    alpha: float
    delta: float | None
    n_list: list
    series: dict
    fit: RateFit | None
    target: dict
    verdict: str
    exponent: float | None = None
    constant: float | None = None
    target_exponent: float | None = None
    target_constant: float | None = None
    band: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def to_json(self) -> dict:
        fit = None
        if self.fit is not None:
            fit = {
                "exponent": self.fit.exponent,
                "log_constant": self.fit.log_constant,
                "constant": self.fit.constant,
                "r_squared": self.fit.r_squared,
                "residual_trend": self.fit.residual_trend,
                "n_used": list(self.fit.n_used),
            }
        return {
            "theorem": self.theorem,
            "verdict": self.verdict,
            "exponent": self.exponent,
            "constant": self.constant,
            "target_exponent": self.target_exponent,
            "target_constant": self.target_constant,
            "band": self.band,
            "spec": self.spec.to_json(),
            "alpha": self.alpha,
            "delta": self.delta,
            "n_list": [int(n) for n in self.n_list],
            "series": _jsonable(self.series),
            "fit": fit,
            "target": _jsonable(self.target),
            "checks": _jsonable(self.checks),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def _profile(spec) -> GLProfile:
    prof = gl_profile(spec)
    # kappa exceeds theta*alpha whenever alpha < alpha0
    assert prof.kappa > prof.gamma, (prof.kappa, prof.gamma)
    return prof


@functools.lru_cache(maxsize=64)
def _sequence_state(spec: SequenceSpec, n: int):
    p = sequence_point(spec, n)
    return p, magnetization(p), spin_sum_pmf(n, p)


def _decreasing(xs) -> bool:
    return all(b <= a for a, b in zip(xs, xs[1:]))


# ---------------------------------------------------------------------------
# magnetization and fluctuations


def verify_magnetization_rate(spec: SequenceSpec, n_list) -> VerificationReport:
    """m(beta_n, K_n) against x_bar / n^{theta alpha}."""
    prof = _profile(spec)
    ns = sorted(int(n) for n in n_list)
    ms = [magnetization(sequence_point(spec, n)) for n in ns]
    fit = fit_rate(zip(ns, ms), load_bands()["fit_drop_fraction"])
    scaled = [n**prof.gamma * m for n, m in zip(ns, ms)]
    b_exp, b_const = band("magnetization_exponent"), band("magnetization_constant")
    exp_ok = abs(fit.exponent + prof.gamma) <= b_exp
    const_err = abs(scaled[-1] - prof.x_bar) / prof.x_bar
    ok = exp_ok and const_err <= b_const
    return VerificationReport(
        theorem="magnetization-rate", spec=spec, alpha=spec.alpha, delta=None, n_list=ns,
        series={"m": ms, "scaled_m": scaled}, fit=fit,
        target={"x_bar": prof.x_bar, "theta_alpha": prof.gamma},
        verdict=_verdict(ok), exponent=fit.exponent, constant=scaled[-1],
        target_exponent=-prof.gamma, target_constant=prof.x_bar,
        band={"exponent": b_exp, "constant": b_const},
        checks={"exponent_ok": exp_ok, "constant_rel_err": const_err},
    )


def verify_fluctuation_rate(spec: SequenceSpec, n_list, delta: float | None = None) -> VerificationReport:
    """E| |S_n/n| - m_n | against z_bar / n^kappa, from the exact law."""
    prof = _profile(spec)
    delta = load_bands()["default_delta"] if delta is None else delta
    ns = sorted(int(n) for n in n_list)
    fl, absm, ms = [], [], []
    for n in ns:
        _, m, pmf = _sequence_state(spec, n)
        ms.append(m)
        fl.append(fluctuation_mean(pmf, m))
        absm.append(abs_magnetization_mean(pmf))
    fit = fit_rate(zip(ns, fl), load_bands()["fit_drop_fraction"])
    scaled = [n**prof.kappa * v for n, v in zip(ns, fl)]
    b_exp, b_const = band("fluctuation_exponent"), band("fluctuation_constant")
    exp_ok = abs(fit.exponent + prof.kappa) <= b_exp
    const_err = abs(scaled[-1] - prof.z_bar) / prof.z_bar
    # |E|S_n/n| - m_n| <= fluctuation mean, so it is o(n^{-theta alpha})
    gap = [abs(a - m) * n**prof.gamma for n, a, m in zip(ns, absm, ms)]
    ok = exp_ok and const_err <= b_const
    return VerificationReport(
        theorem="fluctuation-rate", spec=spec, alpha=spec.alpha, delta=delta, n_list=ns,
        series={"fluctuation_mean": fl, "scaled": scaled, "abs_mean": absm, "m": ms,
                "abs_mean_gap_scaled": gap},
        fit=fit, target={"z_bar": prof.z_bar, "kappa": prof.kappa},
        verdict=_verdict(ok), exponent=fit.exponent, constant=scaled[-1],
        target_exponent=-prof.kappa, target_constant=prof.z_bar,
        band={"exponent": b_exp, "constant": b_const},
        checks={"exponent_ok": exp_ok, "constant_rel_err": const_err,
                "abs_mean_gap_decreasing": _decreasing(gap)},
    )


def verify_conditional_limit(spec: SequenceSpec, n_list, delta: float | None = None) -> VerificationReport:
    """n^kappa E[|S_n/n - m_n| ; S_n/n > delta m_n] against z_bar."""
    prof = _profile(spec)
    delta = load_bands()["default_delta"] if delta is None else delta
    ns = sorted(int(n) for n in n_list)
    scaled = []
    for n in ns:
        _, m, pmf = _sequence_state(spec, n)
        cs = conditional_stats(pmf, m, delta, prof.kappa)
        scaled.append(n**prof.kappa * cs.cond_abs_mean)
    errs = [abs(v - prof.z_bar) / prof.z_bar for v in scaled]
    b = band("conditional_limit")
    trend = _decreasing(errs)
    ok = trend and errs[-1] <= b
    return VerificationReport(
        theorem="conditional-limit", spec=spec, alpha=spec.alpha, delta=delta, n_list=ns,
        series={"scaled_cond_abs_mean": scaled, "rel_err": errs}, fit=None,
        target={"z_bar": prof.z_bar}, verdict=_verdict(ok), constant=scaled[-1],
        target_constant=prof.z_bar, band={"constant": b},
        checks={"monotone_toward_target": trend, "final_rel_err": errs[-1]},
    )


def kolmogorov_distance(z, w, sigma: float) -> float:
    """sup_x |F(x) - Phi(x/sigma)| for the discrete law with atoms z, masses w."""
    F = np.cumsum(w)
    G = norm.cdf(np.asarray(z) / sigma)
    return float(max(np.max(np.abs(F - G)), np.max(np.abs(F - w - G))))


def verify_conditional_clt(spec: SequenceSpec, n_list, delta: float | None = None, grid=None) -> VerificationReport:
    """Kolmogorov distance between the conditional law of n^kappa (S_n/n - m_n)
    and N(0, 1/g''(x_bar))."""
    prof = _profile(spec)
    delta = load_bands()["default_delta"] if delta is None else delta
    sigma = 1.0 / math.sqrt(prof.g2_at_xbar)
    ns = sorted(int(n) for n in n_list)
    if grid is None:
        grid = np.linspace(-4 * sigma, 4 * sigma, 81)
    dists, cdfs = [], []
    for n in ns:
        _, m, pmf = _sequence_state(spec, n)
        z, w = conditional_atoms(pmf, m, delta, prof.kappa)
        dists.append(kolmogorov_distance(z, w, sigma))
        cdfs.append(conditional_stats(pmf, m, delta, prof.kappa, grid=grid).cond_cdf_grid)
    b = band("conditional_clt_ks")
    trend = _decreasing(dists)
    ok = trend and dists[-1] <= b
    return VerificationReport(
        theorem="conditional-clt", spec=spec, alpha=spec.alpha, delta=delta, n_list=ns,
        series={"kolmogorov": dists, "grid": list(grid), "cond_cdf_grid": cdfs,
                "normal_cdf_grid": list(norm.cdf(np.asarray(grid) / sigma))},
        fit=None, target={"variance": sigma**2}, verdict=_verdict(ok),
        band={"kolmogorov": b}, checks={"decreasing": trend, "final_distance": dists[-1]},
    )


def verify_half_probabilities(spec: SequenceSpec, n_list, delta: float | None = None) -> VerificationReport:
    """P{S_n/n > delta m_n} -> 1/2 and log P(middle) ~ -c n^u with c > 0."""
    prof = _profile(spec)
    delta = load_bands()["default_delta"] if delta is None else delta
    ns = sorted(int(n) for n in n_list)
    pp, lmid = [], []
    for n in ns:
        _, m, pmf = _sequence_state(spec, n)
        cs = conditional_stats(pmf, m, delta, prof.kappa)
        pp.append(cs.p_plus)
        lmid.append(cs.log_p_mid)
    nu = np.array([n**prof.u for n in ns])
    slope, icpt = np.polyfit(nu, lmid, 1)
    c = -float(slope)
    b = band("half_probability")
    half_ok = abs(pp[-1] - 0.5) <= b
    ok = half_ok and c > 0 and _decreasing(lmid)
    return VerificationReport(
        theorem="half-probabilities", spec=spec, alpha=spec.alpha, delta=delta, n_list=ns,
        series={"p_plus": pp, "log_p_mid": lmid, "n_pow_u": list(nu)}, fit=None,
        target={"p_plus": 0.5}, verdict=_verdict(ok), exponent=prof.u, constant=c,
        target_constant=0.5, band={"p_plus": b},
        checks={"p_plus_ok": half_ok, "c": c, "intercept": float(icpt), "log_p_mid_decreasing": _decreasing(lmid)},
    )


def rate_on_interval(prof: GLProfile, a: float, b: float, n_grid: int = 20001) -> float:
    """inf over [a, b] of g - inf g."""
    if a > b:
        raise ValueError("need a <= b")
    if a <= prof.x_bar <= b or a <= -prof.x_bar <= b:
        return 0.0
    xs = np.linspace(a, b, n_grid)
    return float(max(0.0, np.min(prof.rate(xs))))


def verify_mdp(spec: SequenceSpec, interval, n_list) -> VerificationReport:
    """-n^{-u} log P{S_n / n^{1 - theta alpha} in [a, b]} against inf_[a,b] (g - inf g)."""
    prof = _profile(spec)
    a, b = map(float, interval)
    ns = sorted(int(n) for n in n_list)
    target = rate_on_interval(prof, a, b)
    vals = []
    for n in ns:
        _, _, pmf = _sequence_state(spec, n)
        scale = float(n) ** (1.0 - prof.gamma)
        lp = pmf.log_prob_where((pmf.ks >= a * scale) & (pmf.ks <= b * scale))
        vals.append(-lp / float(n) ** prof.u)
    bd = band("mdp_relative")
    if target > 0:
        errs = [abs(v - target) / target for v in vals]
    else:
        errs = [abs(v) for v in vals]
    ok = math.isfinite(vals[-1]) and errs[-1] <= bd
    return VerificationReport(
        theorem="mdp", spec=spec, alpha=spec.alpha, delta=None, n_list=ns,
        series={"rate_estimate": vals, "error": errs}, fit=None,
        target={"rate": target, "interval": [a, b], "u": prof.u}, verdict=_verdict(ok),
        constant=vals[-1], target_constant=target, band={"relative" if target > 0 else "absolute": bd},
        checks={"final_error": errs[-1]},
    )


# ---------------------------------------------------------------------------
# free-energy-only checks wrapped as reports


def verify_scaled_free_energy(spec: SequenceSpec, n_list, x_grid=None) -> VerificationReport:
    prof = _profile(spec)
    if x_grid is None:
        x_grid = np.linspace(-3, 3, 121)
    rep = check_scaled_G_limit(spec, x_grid, n_list, band("scaled_free_energy"))
    return VerificationReport(
        theorem="scaled-free-energy", spec=spec, alpha=spec.alpha, delta=None, n_list=list(n_list),
        series={"max_abs_diff": rep.values, "relative": rep.errors}, fit=None,
        target={"g_coeffs": list(prof.g_coeffs)}, verdict=_verdict(rep.passed),
        band={"relative": rep.detail["band"]}, checks=rep.detail,
    )


def verify_derivative_limits(spec: SequenceSpec, n_list) -> VerificationReport:
    prof = _profile(spec)
    series, checks = {}, {}
    ok = True
    for j in prof.required_orders:
        rep = check_deriv_limits(spec, j, n_list, band("derivative_limit"))
        series[f"j{j}"] = rep.values
        checks[f"j{j}_rel_err"] = rep.errors[-1] if rep.errors else None
        checks[f"j{j}_target"] = rep.target
        ok &= rep.passed
    return VerificationReport(
        theorem="derivative-limits", spec=spec, alpha=spec.alpha, delta=None, n_list=list(n_list),
        series=series, fit=None, target={"x_bar": prof.x_bar}, verdict=_verdict(ok),
        band={"relative": band("derivative_limit")}, checks=checks,
    )


THEOREMS = {
    "magnetization-rate": verify_magnetization_rate,
    "fluctuation-rate": verify_fluctuation_rate,
    "conditional-limit": verify_conditional_limit,
    "conditional-clt": verify_conditional_clt,
    "half-probabilities": verify_half_probabilities,
    "mdp": verify_mdp,
    "scaled-free-energy": verify_scaled_free_energy,
    "derivative-limits": verify_derivative_limits,
}
