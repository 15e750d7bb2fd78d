import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from bclab.asymptotics import (
    THEOREMS,
    fit_rate,
    kolmogorov_distance,
    load_bands,
    rate_on_interval,
    verify_conditional_clt,
    verify_fluctuation_rate,
    verify_half_probabilities,
    verify_magnetization_rate,
    verify_mdp,
)
from bclab.gl_sequences import default_spec, gl_profile

FROZEN_FIELDS = {"theorem", "verdict", "exponent", "constant", "target_exponent", "target_constant", "band"}
SMALL_N = [500, 1000, 2000, 4000]


def test_fit_exact_power_law():
    ns = [10**k for k in range(2, 7)]
    f = fit_rate([(n, 3 * n**-0.4) for n in ns])
    assert f.exponent == pytest.approx(-0.4, abs=1e-12)
    assert f.constant == pytest.approx(3.0, rel=1e-12)
    assert f.r_squared == pytest.approx(1.0)


def test_fit_constant_series():
    f = fit_rate([(n, 2.5) for n in (10, 100, 1000, 10000)])
    assert f.exponent == pytest.approx(0.0, abs=1e-12)


def test_fit_with_correction():
    ns = np.logspace(2, 5, 13)
    f = fit_rate([(n, n**-0.4 * (1 + 1 / n)) for n in ns])
    assert abs(f.exponent + 0.4) <= 0.01


def test_fit_drop_fraction():
    ns = [10, 100, 1000, 10000, 100000]
    vals = [100.0] + [n**-0.5 for n in ns[1:]]
    f = fit_rate(zip(ns, vals), drop_fraction=0.25)
    assert f.n_used == (100, 1000, 10000, 100000)
    assert f.exponent == pytest.approx(-0.5, abs=1e-12)


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_rate([(1, 1.0), (2, 0.5), (3, 0.3)])
    with pytest.raises(ValueError):
        fit_rate([(1, 1.0), (2, 0.5), (3, 0.0), (4, 0.1)])
    f = fit_rate([(10, 1.0), (20, 0.5), (30, 0.3), (40, 0.2)], drop_fraction=0.25)
    assert len(f.n_used) == 4


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3), min_size=4, max_size=12))
def test_fit_r_squared_range(vals):
    f = fit_rate([(10 * (i + 1), v) for i, v in enumerate(vals)])
    assert 0.0 <= f.r_squared <= 1.0


def test_residual_trend_sign():
    # local slope steepening at large n gives a negative residual trend
    ns = np.logspace(2, 8, 12)
    f = fit_rate([(n, n**-0.3 * math.exp(-1e-4 * math.log(n) ** 3)) for n in ns])
    assert f.residual_trend < 0


def test_bands_config():
    cfg = load_bands()
    assert cfg["version"] >= 1
    b = cfg["bands"]
    assert (b["magnetization_exponent"], b["magnetization_constant"]) == (0.02, 0.05)
    assert (b["fluctuation_exponent"], b["fluctuation_constant"], b["mdp_relative"]) == (0.05, 0.15, 0.20)
    assert cfg["default_delta"] == 0.95
    assert cfg["delta_sweep"] == [0.8, 0.9, 0.95, 0.99]


def test_kolmogorov_distance_brute_force():
    z = np.array([-1.0, -0.2, 0.3, 1.5])
    w = np.array([0.1, 0.4, 0.3, 0.2])
    sigma = 0.8
    xs = np.linspace(-5, 5, 200001)
    F = np.array([w[z <= x].sum() for x in xs])
    brute = np.max(np.abs(F - norm.cdf(xs / sigma)))
    assert kolmogorov_distance(z, w, sigma) == pytest.approx(brute, abs=1e-4)
    assert kolmogorov_distance(z, w, sigma) >= brute


def test_rate_on_interval():
    prof = gl_profile(default_spec("1a"))
    xb = prof.x_bar
    assert rate_on_interval(prof, 0.5 * xb, 1.5 * xb) == 0.0
    inner = rate_on_interval(prof, xb / 4, xb / 2)
    assert inner == pytest.approx(float(prof.rate(xb / 2)), rel=1e-12)
    outer = rate_on_interval(prof, 1.5 * xb, 2 * xb)
    assert outer == pytest.approx(float(prof.rate(1.5 * xb)), rel=1e-12)
    with pytest.raises(ValueError):
        rate_on_interval(prof, 1.0, 0.5)


def test_report_schema_and_determinism():
    s = default_spec("1a")
    a = verify_fluctuation_rate(s, SMALL_N).to_json()
    b = verify_fluctuation_rate(s, SMALL_N).to_json()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert FROZEN_FIELDS <= set(a)
    assert {"spec", "alpha", "delta", "n_list", "series", "fit", "target"} <= set(a)
    assert a["verdict"] in ("PASS", "FAIL")
    assert a["target_exponent"] == pytest.approx(-gl_profile(s).kappa)
    json.dumps(a)


def test_fluctuation_corollary_series():
    rep = verify_fluctuation_rate(default_spec("3a"), SMALL_N)
    gap = rep.series["abs_mean_gap_scaled"]
    assert rep.checks["abs_mean_gap_decreasing"]
    assert all(g >= 0 for g in gap)
    # |E|S_n/n| - m_n| never exceeds the fluctuation mean
    for a, m, f in zip(rep.series["abs_mean"], rep.series["m"], rep.series["fluctuation_mean"]):
        assert abs(a - m) <= f + 1e-15


def test_mdp_interval_containing_minimizer():
    s = default_spec("1a")
    xb = gl_profile(s).x_bar
    rep = verify_mdp(s, (0.5 * xb, 1.5 * xb), SMALL_N)
    assert rep.target["rate"] == 0.0
    assert rep.passed
    vals = rep.series["rate_estimate"]
    assert abs(vals[-1]) < abs(vals[0])


def test_magnetization_rate_seq3a():
    s = default_spec("3a")
    rep = verify_magnetization_rate(s, [10**k for k in range(4, 9)])
    assert rep.target_exponent == pytest.approx(-s.alpha / 4)
    assert rep.passed


def test_conditional_clt_small_n_trend():
    rep = verify_conditional_clt(default_spec("1a"), SMALL_N)
    d = rep.series["kolmogorov"]
    assert all(b < a for a, b in zip(d, d[1:]))


def test_half_probabilities_small_n():
    rep = verify_half_probabilities(default_spec("1a"), SMALL_N)
    assert rep.checks["c"] > 0
    assert all(0.4 < p <= 0.5 for p in rep.series["p_plus"])


def test_theorem_registry():
    assert set(THEOREMS) == {
        "magnetization-rate", "fluctuation-rate", "conditional-limit", "conditional-clt",
        "half-probabilities", "mdp", "scaled-free-energy", "derivative-limits",
    }
