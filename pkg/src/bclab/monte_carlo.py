"""Single-spin-flip Metropolis sampling of the canonical ensemble.

Random numbers come from numpy's Philox (counter-based) bit generator, drawn
in blocks and consumed by a numba kernel, so a seed fixes the sample stream
on every platform.  The kernel keeps S = sum w_j and Q = sum w_j^2 so each
proposal costs O(1).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from . import __version__
from .free_energy import ModelParams

FUNCTIONALS = ("abs_mean", "fluct_mean", "cond_abs_mean", "p_plus")
_CONDITIONAL = ("cond_abs_mean", "p_plus")
_BLOCK = 1 << 20


class StarvationError(RuntimeError):
    """Too few samples fall in the conditioning event."""


class SlowMixingError(RuntimeError):
    pass


@dataclass(frozen=True)
class McEstimate:
    functional: str
    mean: float
    std_err: float
    n_samples: int
    ess: float
    seed: int
    tau_int: float
    event_fraction: float = 1.0


def n_threads() -> int:
    env = os.environ.get("BCLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def make_rng(seed: int, chain_index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(chain_index)])
    return np.random.Generator(np.random.Philox(ss))


@numba.njit(cache=True, nogil=True)
def _run_block(spins, state, beta, kk, sites, choices, us, n_steps, sweep_len, rec, rec_pos, counter):
    """Advance the chain ``n_steps`` proposals; append S after every full sweep.

    state = [S, Q]; counter[0] counts proposals within the current sweep,
    counter[1] counts accepted moves.
    """
    n = spins.shape[0]
    S = state[0]
    Q = state[1]
    for i in range(n_steps):
        site = sites[i]
        a = spins[site]
        # the two values different from a, in increasing order
        if a == -1:
            b = 0 if choices[i] == 0 else 1
        elif a == 0:
            b = -1 if choices[i] == 0 else 1
        else:
            b = -1 if choices[i] == 0 else 0
        S_new = S - a + b
        dQ = b * b - a * a
        dH = dQ - kk / n * (S_new * S_new - S * S)
        if dH <= 0.0 or us[i] < math.exp(-beta * dH):
            spins[site] = b
            S = S_new
            Q += dQ
            counter[1] += 1
        counter[0] += 1
        if counter[0] == sweep_len:
            counter[0] = 0
            if rec_pos[0] >= 0:
                rec[rec_pos[0]] = S
                rec_pos[0] += 1
    state[0] = S
    state[1] = Q


def _initial_spins(n, init, rng):
    if init == "plus":
        return np.ones(n, dtype=np.int64)
    if init == "random":
        return rng.integers(-1, 2, size=n).astype(np.int64)
    raise ValueError(f"init must be 'plus' or 'random', got {init!r}")


def glauber_chain(n: int, p: ModelParams, sweeps: int, burn_in: int, seed: int,
                  init: str = "random", chain_index: int = 0) -> np.ndarray:
    """Metropolis chain on {-1,0,1}^n targeting P_{n,beta,K}.

    Runs ``sweeps`` sweeps of n proposals each and returns S_n after every
    sweep past the first ``burn_in``.  Initialization is drawn from the same
    seeded generator.
    """
    if not sweeps > burn_in >= 0:
        raise ValueError(f"need sweeps > burn_in >= 0, got sweeps={sweeps}, burn_in={burn_in}")
    rng = make_rng(seed, chain_index)
    spins = _initial_spins(n, init, rng)
    state = np.array([spins.sum(), np.abs(spins).sum()], dtype=np.int64)
    rec = np.empty(sweeps - burn_in, dtype=np.int64)
    rec_pos = np.array([-1], dtype=np.int64)
    counter = np.zeros(2, dtype=np.int64)
    total = sweeps * n
    done = 0
    burn_steps = burn_in * n
    while done < total:
        m = min(_BLOCK, total - done)
        if done < burn_steps:
            m = min(m, burn_steps - done)
        sites = rng.integers(0, n, size=m)
        choices = rng.integers(0, 2, size=m)
        us = rng.random(m)
        if done >= burn_steps and rec_pos[0] < 0:
            rec_pos[0] = 0
        _run_block(spins, state, p.beta, p.kk, sites, choices, us, m, n, rec, rec_pos, counter)
        done += m
    return rec


@numba.njit(cache=True)
def _config_codes(spins, beta, kk, sites, choices, us, thin, out):
    n = spins.shape[0]
    S = 0
    for j in range(n):
        S += spins[j]
    k = 0
    for i in range(sites.shape[0]):
        site = sites[i]
        a = spins[site]
        if a == -1:
            b = 0 if choices[i] == 0 else 1
        elif a == 0:
            b = -1 if choices[i] == 0 else 1
        else:
            b = -1 if choices[i] == 0 else 0
        S_new = S - a + b
        dH = (b * b - a * a) - kk / n * (S_new * S_new - S * S)
        if dH <= 0.0 or us[i] < math.exp(-beta * dH):
            spins[site] = b
            S = S_new
        if (i + 1) % thin == 0:
            code = 0
            for j in range(n):
                code = 3 * code + (spins[j] + 1)
            out[k] = code
            k += 1


def configuration_samples(n: int, p: ModelParams, n_samples: int, seed: int, thin: int = 10) -> np.ndarray:
    """Base-3 codes of the full configuration, recorded every ``thin`` proposals.

    Digit j of the code is w_j + 1, most significant first.  Meant for
    small n, where every configuration can be enumerated.
    """
    rng = make_rng(seed)
    spins = _initial_spins(n, "random", rng)
    steps = n_samples * thin
    sites = rng.integers(0, n, size=steps)
    choices = rng.integers(0, 2, size=steps)
    us = rng.random(steps)
    out = np.empty(n_samples, dtype=np.int64)
    _config_codes(spins, p.beta, p.kk, sites, choices, us, thin, out)
    return out


# ---------------------------------------------------------------------------
# estimators


def integrated_autocorr_time(x, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's automatic window."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    x = x - x.mean()
    var = np.dot(x, x) / n
    if var == 0.0:
        return 1.0
    f = np.fft.rfft(x, n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (n * var)
    taus = 2.0 * np.cumsum(acf) - 1.0
    window = np.arange(n) >= c * taus
    m = int(np.argmax(window)) if window.any() else n - 1
    return float(taus[m])


def _batch_means(values, n_batches):
    size = len(values) // n_batches
    if size < 1:
        raise ValueError(f"need at least {n_batches} samples, got {len(values)}")
    v = np.asarray(values[: size * n_batches], dtype=float).reshape(n_batches, size)
    return v.mean(axis=1)


def estimate(functional: str, n: int, p: ModelParams, sweeps: int, burn_in: int, seed: int,
             m: float | None = None, delta: float | None = None, n_batches: int = 30,
             samples: np.ndarray | None = None) -> McEstimate:
    """MC estimate of one of the exact-distribution functionals.

    The law of S_n is symmetric, so every functional is computed from |S_n|;
    p_plus = P(|S_n|/n > delta m)/2 and the conditional mean uses the samples
    with |S_n|/n > delta m.  Conditional functionals run a chain started
    from all +1, the others from a uniform random configuration.
    """
    if functional not in FUNCTIONALS:
        raise ValueError(f"functional must be one of {FUNCTIONALS}, got {functional!r}")
    if burn_in < 10:
        raise ValueError(f"burn_in must be at least 10 sweeps, got {burn_in}")
    if n_batches < 30:
        raise ValueError("batch-means error needs at least 30 batches")
    if functional != "abs_mean" and m is None:
        raise ValueError(f"{functional} needs m")
    if functional in _CONDITIONAL and delta is None:
        raise ValueError(f"{functional} needs delta")
    if samples is None:
        init = "plus" if functional in _CONDITIONAL else "random"
        samples = glauber_chain(n, p, sweeps, burn_in, seed, init=init)
    x = np.abs(samples) / n
    n_rec = len(x)

    frac = 1.0
    if functional == "abs_mean":
        f = x
    elif functional == "fluct_mean":
        f = np.abs(x - m)
    elif functional == "p_plus":
        f = 0.5 * (x > delta * m)
    else:
        inside = x > delta * m
        frac = float(inside.mean())
        if frac < 1e-3:
            raise StarvationError(
                f"only {inside.sum()} of {n_rec} samples have |S_n|/n > delta*m = {delta * m:.6g}"
            )
        num = np.where(inside, np.abs(x - m), 0.0)
        den = inside.astype(float)
        r = num.sum() / den.sum()
        f = (num - r * den) / frac  # linearized ratio; mean zero at r
        tau = integrated_autocorr_time(f)
        _check_mixing(tau, n_rec)
        bm = _batch_means(f, n_batches)
        se = float(bm.std(ddof=1) / math.sqrt(n_batches))
        ess = _ess(tau, n_rec)
        return McEstimate(functional, float(r), se, n_rec, ess, int(seed), tau, frac)

    tau = integrated_autocorr_time(f)
    _check_mixing(tau, n_rec)
    bm = _batch_means(f, n_batches)
    se = float(bm.std(ddof=1) / math.sqrt(n_batches))
    return McEstimate(functional, float(np.mean(f)), se, n_rec, _ess(tau, n_rec), int(seed), tau, frac)


def _ess(tau, n_rec):
    ess = n_rec / max(tau, 1.0)
    if not ess > 0:
        raise RuntimeError(f"non-positive effective sample size (tau={tau})")
    return float(ess)


def _check_mixing(tau, n_rec):
    if tau > n_rec / 100:
        raise SlowMixingError(
            f"integrated autocorrelation time {tau:.1f} sweeps exceeds 1/100 of the {n_rec} recorded sweeps"
        )


def run_chains(n: int, p: ModelParams, sweeps: int, burn_in: int, seed: int, n_chains: int,
               init: str = "random") -> list:
    """Independent chains with seeds derived from (seed, chain_index)."""
    def one(i):
        return glauber_chain(n, p, sweeps, burn_in, seed, init=init, chain_index=i)

    with ThreadPoolExecutor(max_workers=min(n_threads(), n_chains)) as ex:
        return list(ex.map(one, range(n_chains)))


def write_samples(path, samples, n: int, p: ModelParams, seed: int, sweeps: int, burn_in: int) -> None:
    """Dump a sample stream as CSV (or raw .npy) with its run parameters."""
    path = str(path)
    header = f"bclab {__version__} samples n={n} beta={p.beta!r} K={p.kk!r} seed={seed} sweeps={sweeps} burn_in={burn_in}"
    if path.endswith(".npy"):
        np.save(path, np.asarray(samples, dtype=np.int64))
        with open(path + ".meta", "w") as fh:
            fh.write(header + "\n")
        return
    with open(path, "w") as fh:
        fh.write("# " + header + "\n")
        fh.write("sweep,S\n")
        for i, s in enumerate(np.asarray(samples).tolist(), start=burn_in + 1):
            fh.write(f"{i},{s}\n")
