import csv
import io
import itertools
import math
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bclab.exact_distribution import (
    MAX_EXACT_N,
    ConditioningError,
    ExactSizeError,
    abs_magnetization_mean,
    conditional_atoms,
    conditional_stats,
    fluctuation_mean,
    spin_sum_pmf,
)
from bclab.free_energy import ModelParams
from bclab.gl_sequences import default_spec, gl_profile, sequence_point
from bclab.phase_diagram import magnetization, second_order_K
from oracles import brute_force_pmf

DATA = Path(__file__).parent / "data"


def load_n2_oracle():
    rows = list(csv.DictReader(line for line in open(DATA / "exact_n2_oracle.csv") if not line.startswith("#")))
    pmf = np.zeros(5)
    for r in rows:
        pmf[int(r["S"]) + 2] += float(r["prob"])
    return pmf, rows


def test_n2_oracle_file():
    ref, rows = load_n2_oracle()
    assert len(rows) == 9
    pmf = spin_sum_pmf(2, ModelParams(1.0, 1.0))
    np.testing.assert_allclose(pmf.probs, ref, rtol=0, atol=1e-15)


@pytest.mark.parametrize("n", range(1, 9))
def test_brute_force_small_n(n):
    for beta in (0.3, 1.0, 2.5):
        for kk in (0.4, 1.1, 2.0):
            pmf = spin_sum_pmf(n, ModelParams(beta, kk))
            np.testing.assert_allclose(pmf.probs, brute_force_pmf(n, beta, kk), rtol=0, atol=1e-12)


def test_n1_hand_formula():
    for beta, kk in [(1.0, 0.5), (2.0, 1.7), (0.3, 3.0)]:
        e = math.exp(beta * (kk - 1))
        pmf = spin_sum_pmf(1, ModelParams(beta, kk))
        assert pmf.prob(1) == pytest.approx(e / (1 + 2 * e), rel=1e-13)
        assert abs_magnetization_mean(pmf) == pytest.approx(2 * e / (1 + 2 * e), rel=1e-13)


def test_log_norm_small_n():
    n, beta, kk = 4, 1.3, 0.9
    z = 0.0
    for w in itertools.product((-1, 0, 1), repeat=n):
        s = sum(w)
        z += math.exp(-beta * (sum(x * x for x in w) - kk / n * s * s))
    assert spin_sum_pmf(n, ModelParams(beta, kk)).log_norm == pytest.approx(math.log(z / 3**n), rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 400), st.floats(0.05, 4.0), st.floats(0.05, 3.0))
def test_pmf_invariants(n, beta, kk):
    pmf = spin_sum_pmf(n, ModelParams(beta, kk))
    p = pmf.probs
    assert len(p) == 2 * n + 1
    assert abs(p.sum() - 1) <= 1e-12
    assert np.all(p >= 0)
    assert np.array_equal(p, p[::-1])


def test_size_limit():
    with pytest.raises(ExactSizeError, match="Monte Carlo"):
        spin_sum_pmf(MAX_EXACT_N + 1, ModelParams(1, 1))
    with pytest.raises(ValueError):
        spin_sum_pmf(0, ModelParams(1, 1))


def test_prob_outside_support():
    pmf = spin_sum_pmf(3, ModelParams(1, 1))
    assert pmf.prob(4) == 0.0 and pmf.prob(-7) == 0.0


def test_csv_export():
    pmf = spin_sum_pmf(3, ModelParams(1.0, 1.2))
    buf = io.StringIO()
    text = pmf.to_csv(buf)
    assert buf.getvalue() == text
    lines = text.splitlines()
    assert lines[0].startswith("#") and "n=3 beta=1.0 K=1.2" in lines[0]
    assert lines[1] == "k,prob"
    ks = [int(line.split(",")[0]) for line in lines[2:]]
    assert ks == list(range(-3, 4))


def test_extreme_parameters():
    beta = 30.0
    kk = 2 * (math.exp(beta) + 2) / (4 * beta)
    pmf = spin_sum_pmf(200, ModelParams(beta, kk))
    assert abs_magnetization_mean(pmf) >= 0.9
    pmf0 = spin_sum_pmf(200, ModelParams(20.0, 0.1))
    assert abs_magnetization_mean(pmf0) < 1e-6


def test_fluctuation_mean_reductions():
    pmf = spin_sum_pmf(50, ModelParams(1.0, 1.4))
    assert fluctuation_mean(pmf, 0.0) == pytest.approx(abs_magnetization_mean(pmf), rel=1e-14)
    concentrated = spin_sum_pmf(100, ModelParams(30.0, 0.1))
    assert fluctuation_mean(concentrated, 1.0) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        fluctuation_mean(pmf, 1.5)


def test_fluctuation_mean_seq1a():
    s = default_spec("1a")
    p = sequence_point(s, 2000)
    assert fluctuation_mean(spin_sum_pmf(2000, p), magnetization(p)) > 0


def test_conditional_partition_and_total_expectation():
    p = ModelParams(1.0, 1.2 * second_order_K(1.0))
    m = magnetization(p)
    pmf = spin_sum_pmf(3000, p)
    cs = conditional_stats(pmf, m, 0.9, 0.5)
    assert cs.p_plus == cs.p_minus
    assert abs(cs.p_plus + cs.p_minus + cs.p_mid - 1) <= 1e-12
    total = 2 * cs.cond_abs_mean * cs.p_plus + cs.mid_contribution
    assert abs(fluctuation_mean(pmf, m) - total) <= 1e-12


def test_conditional_cdf_grid():
    s = default_spec("1a")
    prof = gl_profile(s)
    p = sequence_point(s, 5000)
    m = magnetization(p)
    pmf = spin_sum_pmf(5000, p)
    grid = np.linspace(-5, 5, 41)
    cs = conditional_stats(pmf, m, 0.95, prof.kappa, grid=grid)
    cdf = cs.cond_cdf_grid
    assert np.all(np.diff(cdf) >= 0) and cdf[0] >= 0 and cdf[-1] <= 1 + 1e-12
    z, w = conditional_atoms(pmf, m, 0.95, prof.kappa)
    for g, c in zip(grid, cdf):
        assert c == pytest.approx(w[z <= g].sum(), abs=1e-12)


def test_conditioning_errors():
    pmf = spin_sum_pmf(2000, ModelParams(1.0, 0.5))
    with pytest.raises(ValueError):
        conditional_stats(pmf, 0.5, 1.2, 0.3)
    with pytest.raises(ConditioningError):
        conditional_stats(pmf, 0.9, 0.99, 0.3)


def test_weak_limit_concentration():
    p = ModelParams(1.0, 1.2 * second_order_K(1.0))
    m = magnetization(p)
    n = 5000
    pmf = spin_sum_pmf(n, p)
    x = pmf.ks / n
    mass = pmf.probs[(np.abs(x - m) < 0.05) | (np.abs(x + m) < 0.05)].sum()
    assert mass >= 0.999


def test_quadratic_cost():
    p = ModelParams(1.0, 1.3)

    def best(n):
        out = []
        for _ in range(3):
            t = time.perf_counter()
            spin_sum_pmf(n, p)
            out.append(time.perf_counter() - t)
        return min(out)

    ratio = best(16000) / best(8000)
    assert 4 * 0.7 <= ratio <= 4 * 1.3, ratio
