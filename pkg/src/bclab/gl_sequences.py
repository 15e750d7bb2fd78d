"""Scaling sequences (beta_n, K_n) converging to a second-order point or to the
tricritical point, and their Ginzburg-Landau polynomials.

Each sequence is parametrized by alpha in (0, alpha0).  Along it,
n^{alpha/alpha0} G_{beta_n,K_n}(x / n^{theta alpha}) converges to an even
polynomial g of degree 4 or 6 whose positive minimizer x_bar fixes the scaling
constants of the magnetization and of the fluctuations.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .free_energy import ModelParams, free_energy_G_array, free_energy_G_deriv
from .phase_diagram import BETA_C, K_C, SinglePhaseError, magnetization, second_order_K_deriv

# Taylor coefficients of G at the tricritical point (x^4 slope and x^6 value)
C4_TRICRITICAL = 3.0 / 16.0
C6_TRICRITICAL = 9.0 / 40.0


class SequenceKind(str, enum.Enum):
    SEQ1A = "1a"
    SEQ2A = "2a"
    SEQ3A = "3a"
    SEQ4A = "4a"
    SEQ5A = "5a"


class CoefficientError(ValueError):
    """Sequence coefficients violate the inequality that puts the sequence in
    the phase-coexistence region."""


class PreAsymptoticError(ValueError):
    """(beta_n, K_n) left the positive quadrant or the coexistence region."""


def _kd(beta, j):
    return second_order_K_deriv(beta, j)


def c4(beta: float) -> float:
    """x^4 coefficient of the GL polynomial near a second-order point."""
    eb = math.exp(beta)
    return (eb + 2.0) ** 2 * (4.0 - eb) / (8.0 * 24.0)


def ell_c() -> float:
    """Threshold K''(beta_c) - 5/(4 beta_c) for sequence 4a."""
    return _kd(BETA_C, 2) - 5.0 / (4.0 * BETA_C)


def _alpha0_theta(kind, p):
    if kind is SequenceKind.SEQ1A:
        return 0.5, 0.5
    if kind is SequenceKind.SEQ2A:
        return 1.0 / (2 * p), p / 2.0
    if kind is SequenceKind.SEQ3A:
        return 2.0 / 3.0, 0.25
    return 1.0 / 3.0, 0.5


@dataclass(frozen=True)
class SequenceSpec:
    """One of sequences 1a-5a.

    ``curve_consistent`` only matters for 4a and 5a: when set, the curvature
    term of K_n is ell/(2 n^{2 alpha}) instead of ell/(2 n^alpha).
    """

    kind: SequenceKind
    alpha: float
    anchor_beta: float = BETA_C
    b: int = 1
    k: float = 0.0
    p: int = 2
    ell: float = 0.0
    ell_tilde: float = 0.0
    curve_consistent: bool = False

    def __post_init__(self):
        kind = SequenceKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (SequenceKind.SEQ3A, SequenceKind.SEQ4A, SequenceKind.SEQ5A):
            object.__setattr__(self, "anchor_beta", BETA_C)
        elif not (0.0 < self.anchor_beta < BETA_C):
            raise CoefficientError(f"anchor beta must lie in (0, log 4), got {self.anchor_beta!r}")
        if kind is SequenceKind.SEQ2A:
            if int(self.p) != self.p or self.p < 2:
                raise CoefficientError(f"p must be an integer >= 2, got {self.p!r}")
            object.__setattr__(self, "p", int(self.p))
            if self.b not in (1, -1):
                raise CoefficientError(f"b must be +1 or -1 for sequence 2a, got {self.b!r}")
        if kind in (SequenceKind.SEQ1A, SequenceKind.SEQ3A):
            if self.b not in (1, 0, -1):
                raise CoefficientError(f"b must be 1, 0 or -1, got {self.b!r}")
        self._check_inequality()
        a0 = self.alpha0
        if not (0.0 < self.alpha < a0):
            raise CoefficientError(f"alpha must lie in (0, {a0:g}) for sequence {kind.value}, got {self.alpha!r}")

    def _check_inequality(self):
        kind, beta, b = self.kind, self.anchor_beta, self.b
        if kind is SequenceKind.SEQ1A:
            v = _kd(beta, 1) * b - self.k
            if not v < 0:
                raise CoefficientError(f"sequence 1a needs K'(beta) b - k < 0, got {v:.6g}")
        elif kind is SequenceKind.SEQ2A:
            v = (_kd(beta, self.p) - self.ell) * b**self.p
            if not v < 0:
                raise CoefficientError(f"sequence 2a needs (K^(p)(beta) - ell) b^p < 0, got {v:.6g}")
        elif kind is SequenceKind.SEQ3A:
            v = _kd(BETA_C, 1) * b - self.k
            if not v < 0:
                raise CoefficientError(f"sequence 3a needs K'(beta_c) b - k < 0, got {v:.6g}")
        elif kind is SequenceKind.SEQ4A:
            if not self.ell > ell_c():
                raise CoefficientError(f"sequence 4a needs ell > ell_c = {ell_c():.6g}, got ell={self.ell:.6g}")
        elif kind is SequenceKind.SEQ5A:
            if not self.ell > _kd(BETA_C, 2):
                raise CoefficientError(
                    f"sequence 5a needs ell > K''(beta_c) = {_kd(BETA_C, 2):.6g}, got ell={self.ell:.6g}"
                )

    @property
    def alpha0(self) -> float:
        return _alpha0_theta(self.kind, self.p)[0]

    @property
    def theta(self) -> float:
        return _alpha0_theta(self.kind, self.p)[1]

    def with_alpha(self, alpha: float) -> "SequenceSpec":
        d = asdict(self)
        d["alpha"] = alpha
        return SequenceSpec(**d)

    def to_json(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_json(cls, obj) -> "SequenceSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        allowed = {"kind", "alpha", "anchor_beta", "b", "k", "p", "ell", "ell_tilde", "curve_consistent"}
        unknown = set(obj) - allowed
        if unknown:
            raise ValueError(f"unknown sequence keys: {sorted(unknown)}")
        clean = {k: v for k, v in obj.items() if v is not None}
        return cls(**clean)


def default_spec(kind, alpha: float | None = None) -> SequenceSpec:
    """Shipped coefficient choices, each satisfying its inequality with unit margin.

    alpha defaults to alpha0/2.  The 4a and 5a defaults use the curve-consistent
    curvature term, the form under which their GL polynomial is the stated one.
    """
    kind = SequenceKind(kind)
    if kind is SequenceKind.SEQ1A:
        s = dict(anchor_beta=1.0, b=1, k=_kd(1.0, 1) + 1.0)
    elif kind is SequenceKind.SEQ2A:
        s = dict(anchor_beta=1.0, b=1, p=2, ell=_kd(1.0, 2) + 1.0)
    elif kind is SequenceKind.SEQ3A:
        s = dict(b=1, k=_kd(BETA_C, 1) + 1.0)
    elif kind is SequenceKind.SEQ4A:
        s = dict(ell=ell_c() + 1.0, ell_tilde=0.0, curve_consistent=True)
    else:
        s = dict(ell=_kd(BETA_C, 2) + 1.0, curve_consistent=True)
    a0, _ = _alpha0_theta(kind, s.get("p", 2))
    return SequenceSpec(kind=kind, alpha=a0 / 2 if alpha is None else alpha, **s)


def sequence_point(spec: SequenceSpec, n: int) -> ModelParams:
    """(beta_n, K_n) for the n-th member of the sequence."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    a = spec.alpha
    step = float(n) ** (-a)
    kind = spec.kind
    if kind is SequenceKind.SEQ1A:
        beta0 = spec.anchor_beta
        beta_n = beta0 + spec.b * step
        k_n = _kd(beta0, 0) + spec.k * step
    elif kind is SequenceKind.SEQ2A:
        beta0, b, p = spec.anchor_beta, spec.b, spec.p
        beta_n = beta0 + b * step
        k_n = _kd(beta0, 0)
        for j in range(1, p):
            k_n += _kd(beta0, j) * b**j * step**j / math.factorial(j)
        k_n += spec.ell * b**p * step**p / math.factorial(p)
    elif kind is SequenceKind.SEQ3A:
        beta_n = BETA_C + spec.b * step
        k_n = K_C + spec.k * step
    elif kind is SequenceKind.SEQ4A:
        curv = step**2 if spec.curve_consistent else step
        beta_n = BETA_C + step
        k_n = K_C + _kd(BETA_C, 1) * step + spec.ell * curv / 2.0 + spec.ell_tilde * step**3 / 6.0
    else:
        curv = step**2 if spec.curve_consistent else step
        beta_n = BETA_C - step
        k_n = K_C - _kd(BETA_C, 1) * step + spec.ell * curv / 2.0
    if beta_n <= 0 or k_n <= 0:
        raise PreAsymptoticError(f"n={n} is pre-asymptotic: beta_n={beta_n:.6g}, K_n={k_n:.6g}")
    return ModelParams(beta_n, k_n)


# ---------------------------------------------------------------------------
# Ginzburg-Landau profile


@dataclass(frozen=True)
class GLProfile:
    alpha0: float
    theta: float
    alpha: float
    g_coeffs: tuple  # (a2, a4, a6) of g(x) = a2 x^2 + a4 x^4 + a6 x^6
    x_bar: float
    g2_at_xbar: float
    degree: int = field(default=4)

    @property
    def kappa(self) -> float:
        return 0.5 * (1.0 - self.alpha / self.alpha0) + self.theta * self.alpha

    @property
    def u(self) -> float:
        return 1.0 - self.alpha / self.alpha0

    @property
    def gamma(self) -> float:
        """theta*alpha, the decay exponent of m(beta_n, K_n)."""
        return self.theta * self.alpha

    @property
    def z_bar(self) -> float:
        return math.sqrt(2.0 / (math.pi * self.g2_at_xbar))

    def g(self, x):
        a2, a4, a6 = self.g_coeffs
        x2 = np.asarray(x, dtype=float) ** 2
        return ((a6 * x2 + a4) * x2 + a2) * x2

    def g_deriv(self, x, j: int):
        """j-th derivative of g (j >= 0)."""
        coeffs = np.zeros(7)
        coeffs[2], coeffs[4], coeffs[6] = self.g_coeffs
        poly = np.polynomial.Polynomial(coeffs).deriv(j) if j else np.polynomial.Polynomial(coeffs)
        return poly(np.asarray(x, dtype=float))

    @property
    def required_orders(self) -> tuple:
        return (2, 3, 4) if self.degree == 4 else (2, 3, 4, 5, 6)

    @property
    def g_min(self) -> float:
        return float(self.g(self.x_bar))

    def rate(self, x):
        """Moderate-deviation rate Gamma(x) = g(x) - inf g."""
        return self.g(x) - self.g_min


def gl_coefficients(spec: SequenceSpec) -> tuple:
    kind = spec.kind
    if kind is SequenceKind.SEQ1A:
        beta = spec.anchor_beta
        return (beta * (_kd(beta, 1) * spec.b - spec.k), c4(beta), 0.0)
    if kind is SequenceKind.SEQ2A:
        beta, p = spec.anchor_beta, spec.p
        return (beta / math.factorial(p) * (_kd(beta, p) - spec.ell) * spec.b**p, c4(beta), 0.0)
    if kind is SequenceKind.SEQ3A:
        return (BETA_C * (_kd(BETA_C, 1) * spec.b - spec.k), 0.0, C6_TRICRITICAL)
    a2 = 0.5 * BETA_C * (_kd(BETA_C, 2) - spec.ell)
    sign = -1.0 if kind is SequenceKind.SEQ4A else 1.0
    return (a2, sign * 4.0 * C4_TRICRITICAL, C6_TRICRITICAL)


def positive_minimizer(coeffs) -> float:
    """Positive global minimizer of a2 x^2 + a4 x^4 + a6 x^6.

    Stationary points solve 2 a2 + 4 a4 s + 6 a6 s^2 = 0 in s = x^2.
    """
    a2, a4, a6 = coeffs
    if a6 == 0.0:
        if not (a4 > 0 and a2 < 0):
            raise ValueError(f"quartic {coeffs} has no positive minimizer")
        roots = [-a2 / (2.0 * a4)]
    else:
        A, B, C = 6.0 * a6, 4.0 * a4, 2.0 * a2
        disc = B * B - 4 * A * C
        if disc < 0:
            raise ValueError(f"polynomial {coeffs} has no positive stationary point")
        sq = math.sqrt(disc)
        q = -0.5 * (B + math.copysign(sq, B)) if B != 0 else -0.5 * sq
        roots = [q / A]
        if q != 0:
            roots.append(C / q)
    roots = [s for s in roots if s > 0]
    if not roots:
        raise ValueError(f"polynomial {coeffs} has no positive stationary point")

    def g(s):
        return ((a6 * s + a4) * s + a2) * s

    s_best = min(roots, key=g)
    if g(s_best) >= 0:
        raise ValueError(f"polynomial {coeffs} is minimized at 0 only")
    return math.sqrt(s_best)


def gl_profile(spec: SequenceSpec) -> GLProfile:
    """GL polynomial of the sequence, its minimizer and scaling exponents."""
    if spec.kind in (SequenceKind.SEQ4A, SequenceKind.SEQ5A) and not spec.curve_consistent:
        warnings.warn(
            f"sequence {spec.kind.value} with the ell/(2 n^alpha) curvature term does not scale to the "
            "degree-6 GL polynomial; use curve_consistent=True for scaling checks",
            stacklevel=2,
        )
    coeffs = gl_coefficients(spec)
    x_bar = positive_minimizer(coeffs)
    a2, a4, a6 = coeffs
    g2 = 2 * a2 + 12 * a4 * x_bar**2 + 30 * a6 * x_bar**4
    degree = 6 if a6 != 0 else 4
    a0, th = _alpha0_theta(spec.kind, spec.p)
    return GLProfile(alpha0=a0, theta=th, alpha=spec.alpha, g_coeffs=coeffs, x_bar=x_bar,
                     g2_at_xbar=g2, degree=degree)


def g2_closed_form(spec: SequenceSpec) -> float:
    """g''(x_bar) in closed form, for cross-checking :func:`gl_profile`."""
    kind = spec.kind
    if kind is SequenceKind.SEQ1A:
        beta = spec.anchor_beta
        return 4 * beta * (spec.k - _kd(beta, 1) * spec.b)
    if kind is SequenceKind.SEQ2A:
        beta, p = spec.anchor_beta, spec.p
        return 4.0 / math.factorial(p) * beta * (spec.ell - _kd(beta, p)) * spec.b**p
    if kind is SequenceKind.SEQ3A:
        return 8 * BETA_C * (spec.k - _kd(BETA_C, 1) * spec.b)
    y = gl_y(spec)
    if kind is SequenceKind.SEQ4A:
        return 20.0 / 3.0 * (y * y + y)
    return 20.0 / 3.0 * y * (y - 1.0)


def gl_y(spec: SequenceSpec) -> float:
    return math.sqrt(1.0 + 0.6 * BETA_C * (spec.ell - _kd(BETA_C, 2)))


def kappa_table(kind, alpha: float, p: int = 2) -> float:
    """kappa as listed per sequence."""
    kind = SequenceKind(kind)
    if kind in (SequenceKind.SEQ1A, SequenceKind.SEQ3A):
        return 0.5 * (1 - alpha)
    if kind is SequenceKind.SEQ2A:
        return 0.5 * (1 - p * alpha)
    return 0.5 * (1 - 2 * alpha)


# ---------------------------------------------------------------------------
# convergence checks


@dataclass
class ConvergenceReport:
    n_list: list
    values: list
    target: float | list
    errors: list
    passed: bool
    skipped: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)


def scaled_G(spec: SequenceSpec, n: int, xs, profile: GLProfile | None = None):
    """n^{alpha/alpha0} G_{beta_n,K_n}(x / n^{theta alpha}) on an array of x."""
    prof = profile or gl_profile(spec)
    p = sequence_point(spec, n)
    xs = np.asarray(xs, dtype=float)
    return float(n) ** (spec.alpha / prof.alpha0) * free_energy_G_array(p, xs / float(n) ** prof.gamma)


def check_scaled_G_limit(spec: SequenceSpec, x_grid, n_list, band: float = 0.05) -> ConvergenceReport:
    """Uniform distance between the rescaled free energy and g on ``x_grid``.

    Passes when the per-n maxima are decreasing over the second half of
    ``n_list`` and the last one is at most ``band * max|g|`` on the grid.
    """
    prof = gl_profile(spec)
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(np.abs(x_grid) > 3):
        raise ValueError("x_grid must lie in [-3, 3]")
    gx = prof.g(x_grid)
    maxima = []
    for n in n_list:
        maxima.append(float(np.max(np.abs(scaled_G(spec, n, x_grid, prof) - gx))))
    scale = float(np.max(np.abs(gx)))
    tail = maxima[len(maxima) // 2:]
    decreasing = all(b <= a for a, b in zip(tail, tail[1:]))
    ok = decreasing and maxima[-1] <= band * scale
    return ConvergenceReport(list(n_list), maxima, 0.0, [m / scale for m in maxima], ok,
                             detail={"max_abs_g": scale, "band": band})


def scaled_magnetization(spec: SequenceSpec, n: int, profile: GLProfile | None = None) -> float:
    """n^{theta alpha} m(beta_n, K_n)."""
    prof = profile or gl_profile(spec)
    return float(n) ** prof.gamma * magnetization(sequence_point(spec, n))


def check_deriv_limits(spec: SequenceSpec, j: int, n_list, band: float = 0.05) -> ConvergenceReport:
    """n^{alpha/alpha0 - j theta alpha} G^(j)_{beta_n,K_n}(m_n) against g^(j)(x_bar)."""
    prof = gl_profile(spec)
    if j not in prof.required_orders:
        raise ValueError(f"j must be one of {prof.required_orders} for a degree-{prof.degree} GL polynomial")
    target = float(prof.g_deriv(prof.x_bar, j))
    ns, vals, errs, skipped = [], [], [], []
    for n in n_list:
        try:
            p = sequence_point(spec, n)
            m = magnetization(p)
        except (PreAsymptoticError, SinglePhaseError):
            skipped.append(n)
            continue
        v = float(n) ** (spec.alpha / prof.alpha0 - j * prof.gamma) * free_energy_G_deriv(p, m, j)
        ns.append(n)
        vals.append(v)
        errs.append(abs(v - target) / abs(target))
    ok = bool(errs) and errs[-1] <= band
    return ConvergenceReport(ns, vals, target, errs, ok, skipped, {"j": j, "band": band})
