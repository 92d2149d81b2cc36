"""Walk-weight polynomial p(x) = x^t * q(x) built from a Chebyshev expansion.

q is the degree-d_q truncation of the Chebyshev series of (1 - eps*u)^(-t),
re-expanded in the standard basis and shifted to the domain u = (1 - x)/eps.
On [1-eps, 1] the product x^t * q(x) is flat near 1; below 1 - phi^2/4 the
x^t factor drives it to ~n^(-4).  The standard-basis coefficients grow like
(1/eps)^d_q, so every construction and validation step runs in gmpy2
extended precision; the walk-length coefficients are demoted to float64
only at the very end.

Series convention: the expansion weights c_v satisfy
    (1 - eps*u)^(-t) = c_0/2 + sum_{v>=1} c_v T_v(u),
i.e. the v = 0 weight is twice the T_0 coefficient.  Reconstruction and
Clenshaw evaluation both halve the v = 0 term.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
from gmpy2 import bincoef, mpfr

from .errors import ConfigError, NumericError, PolynomialBoundError

# Standing-assumption constants; construction warns (but proceeds) when the
# sublinearity conditions fail, since a polynomial-time fallback is out of scope.
_C1_STANDING = 0.25
_C2_STANDING = 1.0
_SERIES_TERM_CAP = 200_000


@dataclass(frozen=True)
class PolyParams:
    """Instance parameters with the derived walk length and truncation degree."""

    n: int
    phi: float
    eps: float
    c1: float = 0.25

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("need n >= 2")
        if not 0 < self.phi <= 1:
            raise ConfigError("phi must lie in (0,1]")
        if not 0 < self.eps < 1:
            raise ConfigError("eps must lie in (0,1)")
        if self.eps / self.phi**2 > self.c1:
            raise ConfigError(
                f"eps/phi^2 = {self.eps / self.phi**2:.4f} exceeds the admissible constant {self.c1}"
            )

    @property
    def t(self) -> int:
        return math.ceil(20.0 * math.log(self.n) / self.phi**2)

    @property
    def d_q(self) -> int:
        return math.ceil(20.0 * self.eps * self.t + 2.0 * math.log(self.phi**2 / self.eps))

    def check_standing_assumptions(self) -> list[str]:
        """Returns human-readable violations of the sublinearity assumptions."""
        msgs = []
        a1 = (self.eps / self.phi**2) * math.log(1.0 / self.eps)
        if a1 > _C1_STANDING:
            msgs.append(f"(eps/phi^2)*ln(1/eps) = {a1:.3f} > {_C1_STANDING}")
        a2 = math.log(1.0 / self.eps) * math.log(self.phi**2 / self.eps)
        if a2 > _C2_STANDING * math.log(self.n):
            msgs.append(f"ln(1/eps)*ln(phi^2/eps) = {a2:.3f} > {_C2_STANDING}*ln(n)")
        return msgs


@dataclass
class ChebCoeffs:
    """Truncated expansion weights c_{v,eps,t} for v = 0..degree (all >= 0)."""

    eps: float
    t: int
    degree: int
    c: list  # mpfr values


@dataclass
class WalkPolynomial:
    """Coefficients of x^t * q(x) indexed by walk length t_min..t_min+t_delta.

    ``coeffs`` holds float64 demotions for the sketching path (overflowing
    values demote to +/-inf); ``exact`` keeps the construction-precision
    values for validation, CSV output, and dense matrix checks.
    """

    t_min: int
    t_delta: int
    coeffs: dict[int, float]
    exact: list | None = None
    meta: dict | None = None

    def __post_init__(self):
        if len(self.coeffs) != self.t_delta + 1:
            raise ConfigError("need exactly t_delta + 1 coefficients")
        want = set(range(self.t_min, self.t_min + self.t_delta + 1))
        if set(self.coeffs) != want:
            raise ConfigError("coefficient keys must cover [t_min, t_min + t_delta]")

    @classmethod
    def plain_power(cls, t: int) -> "WalkPolynomial":
        """The weight vector of x^t alone (the eps -> 0 limit of the construction)."""
        return cls(t, 0, {t: 1.0}, exact=[mpfr(1)], meta={"kind": "power", "t": t})

    def lengths(self) -> list[int]:
        return list(range(self.t_min, self.t_min + self.t_delta + 1))

    def coefficient_cap(self, eps: float) -> float:
        return (1.0 / eps) ** (self.t_delta + 1) * (self.t_delta + 1)

    def eval_float(self, x: float) -> float:
        """Horner evaluation with the demoted coefficients (sketch-path weights)."""
        acc = 0.0
        for t in sorted(self.coeffs, reverse=True):
            acc = acc * x + self.coeffs[t]
        return acc * x**self.t_min


def cheb_coefficient(v: int, eps: float, t: int, tol: float = 1e-40, prec: int = 256) -> float:
    """Expansion weight c_{v,eps,t}, summed until three consecutive terms fall
    below tol times the partial sum.  Terms advance by multiplicative ratios.
    """
    if v < 0 or t < 1 or not 0 < eps < 1 or tol <= 0:
        raise ConfigError("need v >= 0, t >= 1, 0 < eps < 1, tol > 0")
    with gmpy2.context(precision=prec):
        return float(_cheb_coefficient_mp(v, mpfr(eps), t, mpfr(tol)))


def _cheb_coefficient_mp(v: int, eps, t: int, tol) -> "mpfr":
    """c_v = 2 * sum over n = v, v+2, ... of (eps/2)^n C(n-1+t, n) C(n, (n-v)/2)."""
    half_eps = eps / 2
    term = half_eps**v * mpfr(bincoef(v + t - 1, v))
    total = term
    small_streak = 0
    n = v
    while small_streak < 3:
        m = (n - v) // 2
        ratio = (half_eps * half_eps * (n + t) * (n + 1 + t)) / ((m + 1) * ((n + v) // 2 + 1))
        term = term * ratio
        total += term
        n += 2
        if n - v > _SERIES_TERM_CAP:
            raise NumericError(f"coefficient series for v={v} did not converge; eps too large for t")
        small_streak = small_streak + 1 if term < tol * total else 0
    return 2 * total


def monic_cheb_standard_basis(l: int) -> list[int]:
    """Standard-basis coefficients of T_l (equivalently 2^(l-1) Q_l for l >= 1).

    Built from T_{l+1} = 2x T_l - T_{l-1}; exact integers.  l = 0 gives [1].
    """
    if l < 0:
        raise ConfigError("degree must be nonnegative")
    prev, cur = [1], [0, 1]
    if l == 0:
        return prev
    for _ in range(l - 1):
        nxt = [0] + [2 * c for c in cur]
        for j, c in enumerate(prev):
            nxt[j] -= c
        prev, cur = cur, nxt
    return cur


def _needed_precision(d_q: int, eps: float) -> int:
    return max(192, int((d_q + 1) * math.log2(1.0 / eps)) + 256)


@lru_cache(maxsize=8)
def _cheb_series(eps: float, t: int, degree: int, prec: int) -> ChebCoeffs:
    with gmpy2.context(precision=prec):
        tol = mpfr(2) ** (-(prec - 32))
        c = [_cheb_coefficient_mp(v, mpfr(eps), t, tol) for v in range(degree + 1)]
    return ChebCoeffs(eps, t, degree, c)


def _clenshaw_mp(c: list, u) -> "mpfr":
    """Clenshaw for c_0/2 + sum_{v>=1} c_v T_v(u); valid for any real u."""
    b1 = mpfr(0)
    b2 = mpfr(0)
    for v in range(len(c) - 1, 0, -1):
        b1, b2 = 2 * u * b1 - b2 + c[v], b1
    return u * b1 - b2 + c[0] / 2


def eval_p_clenshaw(params: PolyParams, x: float, prec: int | None = None) -> float:
    """Reference evaluation of p(x) = x^t * P((1-x)/eps) without expanding P.

    P is evaluated by the Clenshaw recurrence; no cancellation occurs in this
    form, so moderate precision suffices even where the standard-basis
    coefficients are astronomically large.
    """
    if not 0.0 <= x <= 1.0:
        raise ConfigError(f"x = {x} outside [0,1]")
    prec = prec or 256
    series = _cheb_series(params.eps, params.t, params.d_q, _needed_precision(params.d_q, params.eps))
    with gmpy2.context(precision=prec):
        return float(_eval_p_clenshaw_mp(series, params.t, mpfr(x)))


def _eval_p_clenshaw_mp(series: ChebCoeffs, t: int, x) -> "mpfr":
    if x == 0:
        return mpfr(0)
    u = (1 - x) / mpfr(series.eps)
    return x**t * _clenshaw_mp(series.c, u)


def _horner_q_mp(b: list, x) -> "mpfr":
    acc = mpfr(0)
    for coeff in reversed(b):
        acc = acc * x + coeff
    return acc


def build_walk_polynomial(
    params: PolyParams,
    grid_points: int = 2000,
    cross_tol: float = 1e-6,
    validate: bool = True,
) -> WalkPolynomial:
    """Assemble, demote, and grid-validate the walk-weight polynomial.

    Steps: expansion weights c_v; standard-basis coefficients a_j of P via
    the T_v expansions; change of variable u = (1-x)/eps giving
    b_i = (-1)^i * sum_{j>=i} a_j eps^(-j) C(j,i); shift by x^t so the walk
    length t+i carries b_i.  Validation evaluates p on uniform grids over
    [0, 1-phi^2/4] (|p| <= n^-4) and [1-eps, 1] (|p-1| <= eps/phi^2), via
    Horner on the coefficient list and via x^t * P((1-x)/eps) by Clenshaw,
    and requires the two to agree to cross_tol relative.

    With validate=False the grid maxima are measured and recorded in meta
    (keyed as in the validating path, plus meta["valid"]) but bound
    violations do not raise.  The nonnegative series weights force
    p(1-phi^2/4) >= ((1-phi^2/4)/(1-eps))^t, which exceeds n^-4 whenever
    t*ln((1-eps)/(1-phi^2/4)) < 4 ln n, so at small n the decay bound can
    be out of reach for every truncation degree even though the matrix
    projector bound still holds on graphs whose bulk walk eigenvalues sit
    below the measured decay point.
    """
    for msg in params.check_standing_assumptions():
        warnings.warn(f"standing assumption violated: {msg}", stacklevel=2)
    t, d_q = params.t, params.d_q
    prec = _needed_precision(d_q, params.eps)
    series = _cheb_series(params.eps, t, d_q, prec)

    with gmpy2.context(precision=prec):
        eps = mpfr(params.eps)
        # Standard basis of P: a_j = sum_v c'_v [x^j] T_v, with the v=0 weight halved.
        a = [mpfr(0)] * (d_q + 1)
        for v in range(d_q + 1):
            weight = series.c[v] / 2 if v == 0 else series.c[v]
            for j, tv in enumerate(monic_cheb_standard_basis(v)):
                if tv:
                    a[j] += weight * tv
        inv_eps_pow = [mpfr(1)]
        for _ in range(d_q):
            inv_eps_pow.append(inv_eps_pow[-1] / eps)
        b = []
        for i in range(d_q + 1):
            acc = mpfr(0)
            for j in range(i, d_q + 1):
                acc += a[j] * inv_eps_pow[j] * bincoef(j, i)
            b.append(acc if i % 2 == 0 else -acc)

        report = _validate_polynomial(params, series, b, grid_points, cross_tol, strict=validate)

    coeffs: dict[int, float] = {}
    for i, bi in enumerate(b):
        try:
            coeffs[t + i] = float(bi)
        except OverflowError:
            coeffs[t + i] = math.inf if bi > 0 else -math.inf
    cap = mpfr(1 / params.eps) ** (d_q + 1) * (d_q + 1)
    max_abs = max(abs(bi) for bi in b)
    if max_abs > cap:
        raise PolynomialBoundError(
            f"coefficient magnitude {float(max_abs):.3e} exceeds cap {float(cap):.3e}"
        )
    report["max_abs_coeff_log10"] = float(gmpy2.log10(max_abs)) if max_abs > 0 else -math.inf
    report["params"] = {"n": params.n, "phi": params.phi, "eps": params.eps, "t": t, "d_q": d_q}
    return WalkPolynomial(t, d_q, coeffs, exact=b, meta=report)


def _validate_polynomial(params, series, b, grid_points, cross_tol, strict=True) -> dict:
    t = params.t
    xt_pow = lambda x: x**t  # noqa: E731
    low_hi = 1.0 - params.phi**2 / 4.0
    flat_lo = 1.0 - params.eps
    low_bound = mpfr(params.n) ** -4
    flat_bound = mpfr(params.eps) / mpfr(params.phi) ** 2

    worst_low = (mpfr(0), 0.0)
    worst_flat = (mpfr(0), 0.0)
    worst_cross = 0.0
    for lo, hi, flat in ((0.0, low_hi, False), (flat_lo, 1.0, True)):
        for idx in range(grid_points):
            xf = lo + (hi - lo) * idx / (grid_points - 1)
            x = mpfr(xf)
            horner = xt_pow(x) * _horner_q_mp(b, x)
            clen = _eval_p_clenshaw_mp(series, t, x)
            scale = max(abs(horner), abs(clen))
            if scale > 0:
                rel = float(abs(horner - clen) / scale)
                worst_cross = max(worst_cross, rel)
            err = abs(horner - 1) if flat else abs(horner)
            if flat and err > worst_flat[0]:
                worst_flat = (err, xf)
            if not flat and err > worst_low[0]:
                worst_low = (err, xf)
    valid = worst_low[0] <= low_bound and worst_flat[0] <= flat_bound and worst_cross <= cross_tol
    if strict:
        if worst_low[0] > low_bound:
            raise PolynomialBoundError(
                f"|p(x)| = {float(worst_low[0]):.3e} > n^-4 = {float(low_bound):.3e} "
                f"at x = {worst_low[1]:.6f} on the decay interval"
            )
        if worst_flat[0] > flat_bound:
            raise PolynomialBoundError(
                f"|p(x)-1| = {float(worst_flat[0]):.3e} > eps/phi^2 = {float(flat_bound):.3e} "
                f"at x = {worst_flat[1]:.6f} on the flat interval"
            )
        if worst_cross > cross_tol:
            raise PolynomialBoundError(
                f"Horner/Clenshaw relative disagreement {worst_cross:.3e} > {cross_tol:.1e}"
            )
    return {
        "valid": valid,
        "max_abs_p_low": float(worst_low[0]),
        "worst_low_x": worst_low[1],
        "low_bound": float(low_bound),
        "max_abs_p_minus_1_flat": float(worst_flat[0]),
        "flat_bound": float(flat_bound),
        "worst_cross_rel": worst_cross,
        "p_at_1": float(xt_pow(mpfr(1)) * _horner_q_mp(b, mpfr(1))),
    }


def evaluate_on_eigenvalues(wp: WalkPolynomial, lams, prec: int | None = None) -> "list[float]":
    """p applied to walk-matrix eigenvalues, using exact coefficients when kept.

    Precision defaults to the coefficient magnitude plus slack, since Horner
    on [0,1] cancels the full coefficient range down to O(1) values.
    """
    out = []
    if wp.exact is not None:
        if prec is None:
            max_exp = max((gmpy2.get_exp(c) for c in wp.exact if c != 0), default=1)
            prec = max(256, int(max_exp) + 128)
        with gmpy2.context(precision=prec):
            for lam in lams:
                x = mpfr(float(lam))
                out.append(float(x**wp.t_min * _horner_q_mp(wp.exact, x)))
    else:
        for lam in lams:
            out.append(wp.eval_float(float(lam)))
    return out


def truncation_sup_error(eps: float, t: int, degree: int, grid: int = 10_000, prec: int = 256) -> float:
    """Sup over a uniform [-1,1] grid of |P_degree(u) - (1 - eps*u)^(-t)|."""
    series = _cheb_series(eps, t, degree, prec)
    worst = mpfr(0)
    with gmpy2.context(precision=prec):
        e = mpfr(eps)
        for idx in range(grid):
            u = mpfr(-1) + mpfr(2) * idx / (grid - 1)
            diff = abs(_clenshaw_mp(series.c, u) - (1 - e * u) ** -t)
            if diff > worst:
                worst = diff
    return float(worst)
