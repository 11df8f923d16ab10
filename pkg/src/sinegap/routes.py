"""Gap-probability routes, identity residuals, sigma(alpha) and constant fitting.

Every route returns ``log det(I - K_alpha)`` for the sine kernel on an
interval of length ``alpha``:

* ``nystrom``: Gauss-Legendre discretization of the integral operator.
* ``toeplitz``: ``log det T_n(arc_indicator(alpha/n))``, extrapolated in ``n``.
* ``hankel``: ``n^2 log rho + log det H_n[b_{alpha,n}]`` (small ``n`` only).
* ``resolvent``: ``-alpha^2/8 + log det P_n (I + H(psi_full))^{-1} P_n``.
* ``split``: ``-alpha^2/8`` plus the two complemented split determinants at
  half-line length ``alpha/2``.
* ``asymptotic``: ``-b^2/2 - (log b)/4 + C`` with ``b = alpha/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .constants import constant
from .errors import AccuracyError, DomainError, UsageError
from .fredholm import nystrom_logdet
from .linalg import (
    DOUBLE_HANKEL_MAX,
    EXTENDED_HANKEL_MAX,
    LogDetValue,
    complemented_split_det,
    finite_section_resolvent_corner,
    log_det,
    matrix_of,
)
from .symbols import (
    fourier_coeffs,
    make_symbol,
    moment_function,
    mu_rho_params,
    wiener_hopf_factor_even,
)

__all__ = [
    "ROUTES",
    "IDENTITIES",
    "GapEstimate",
    "FitReport",
    "gap_logdet",
    "identity_residual",
    "sigma",
    "extract_constant",
    "asymptotic_logdet",
]

ROUTES = ("nystrom", "toeplitz", "hankel", "resolvent", "split", "asymptotic")
IDENTITIES = ("prop21_BO", "prop23", "prop32", "prop33", "f64", "block_tab", "thm24")

# the smooth even test symbol (1 + t/2)(1 + 1/(2t)) + 2
DEFAULT_EVEN_COEFFS = (0.5, 3.25, 0.5)


@dataclass
class GapEstimate:
    """One route's value of ``log det(I - K_alpha)``.

    ``error_estimate`` is NaN for the asymptotic route, which carries no
    computable error bound.
    """

    alpha: float
    route: str
    params: dict
    logdet: LogDetValue
    error_estimate: float
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "route": self.route,
            "params": self.params,
            "logdet": self.logdet.log_abs,
            "sign": float(np.real(self.logdet.phase)),
            "error_estimate": self.error_estimate,
            "details": self.details,
        }


@dataclass
class FitReport:
    """Least-squares fit of the constant term and the even-power corrections."""

    alpha_grid: tuple
    route: str
    model_order: int
    C_est: float
    correction_coeffs: tuple
    max_residual: float
    logdets: tuple = ()

    def as_dict(self) -> dict:
        return {
            "beta_grid": list(self.alpha_grid),
            "route": self.route,
            "model_order": self.model_order,
            "C_est": self.C_est,
            "C_exact": constant("dyson_constant"),
            "C_error": self.C_est - constant("dyson_constant"),
            "correction_coeffs": list(self.correction_coeffs),
            "max_residual": self.max_residual,
            "logdets": list(self.logdets),
        }


def asymptotic_logdet(alpha: float) -> float:
    """Large-gap expansion truncated after the constant term."""
    if not alpha > 0:
        raise DomainError(f"the asymptotic formula needs alpha > 0, got {alpha}")
    b = alpha / 2
    return -b * b / 2 - math.log(b) / 4 + constant("dyson_constant")


def _toeplitz_logdet(alpha: float, n: int) -> float:
    if alpha / n >= math.pi:
        raise DomainError(f"alpha/n = {alpha / n} >= pi: the arc covers the circle")
    ld = log_det(matrix_of("toeplitz", make_symbol("arc_indicator", gamma=alpha / n), n))
    if ld.phase != 1:
        raise DomainError(f"Toeplitz determinant is not positive at n={n}")
    return ld.log_abs


def _hankel_logdet(alpha: float, n: int, precision: str) -> float:
    rho, _ = mu_rho_params(alpha, n)
    if precision == "extended":
        import mpmath as mp

        with mp.workdps(40):
            mrho = mp.cos(mp.mpf(alpha) / (2 * n))
            b = moment_function("b_alpha_n", alpha=alpha, n=n, mp_rho=mrho)
            H = matrix_of("moment_hankel", b, n, precision="extended")
            d = mp.det(H)
            if d <= 0:
                raise DomainError(f"moment Hankel determinant is not positive at n={n}")
            return float(n * n * mp.log(mrho) + mp.log(d))
    ld = log_det(matrix_of("moment_hankel", moment_function("b_alpha_n", alpha=alpha, n=n), n))
    if ld.phase != 1:
        raise DomainError(f"moment Hankel determinant is not positive at n={n}")
    return n * n * math.log(rho) + ld.log_abs


def _resolvent_logdet(alpha: float, n: int, N: int, levels: int, tol: float):
    sec = finite_section_resolvent_corner(make_symbol("psi_full", alpha=alpha, n=n), n, N, tolerance=tol, levels=levels)
    if sec.extrapolated_logdet.phase != 1:
        raise DomainError(f"resolvent corner determinant is not positive at n={n}")
    return -alpha * alpha / 8 + sec.extrapolated_logdet.log_abs, sec


def gap_logdet(alpha: float, route: str = "nystrom", **params) -> GapEstimate:
    """``log det(I - K_alpha)`` by the chosen route.

    Route parameters (defaults in brackets):

    * nystrom: ``m`` [64], ``precision`` [double].
    * toeplitz: ``n`` [512]; evaluates ``n/2, n, 2n`` and applies
      second-order Richardson extrapolation to the last two.
    * hankel: ``n`` [8], ``precision`` [double, or extended above 12].
    * resolvent: ``n`` [max(8, ceil(8 alpha))], ``N`` [16 n], ``levels`` [3],
      ``tol`` [1e-3]; truncations are extrapolated geometrically, then
      ``n`` and ``2n`` are combined by second-order Richardson extrapolation.
    * split: ``N`` [2048], ``levels`` [3], ``tol`` [5e-2].
    * asymptotic: no parameters.
    """
    if route not in ROUTES:
        raise UsageError(f"unknown route {route!r}; expected one of {', '.join(ROUTES)}")
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha < 0:
        raise UsageError(f"alpha must be a finite number >= 0, got {alpha}")
    if alpha == 0 and route != "asymptotic":
        return GapEstimate(alpha, route, dict(params), LogDetValue(0.0), 0.0)
    handler = _ROUTE_HANDLERS[route]
    return handler(alpha, dict(params))


def _route_nystrom(alpha, p):
    m = int(p.pop("m", 64))
    precision = p.pop("precision", "double")
    _reject_extra(p, "nystrom")
    r = nystrom_logdet(alpha, m, precision=precision)
    return GapEstimate(alpha, "nystrom", {"m": m, "precision": precision}, r.logdet, r.error_estimate,
                       {"m_check": r.m_check, "tolerance": r.tolerance})


def _route_toeplitz(alpha, p):
    n = int(p.pop("n", 512))
    _reject_extra(p, "toeplitz")
    if n < 2:
        raise UsageError(f"toeplitz route needs n >= 2, got {n}")
    ns = (n // 2, n, 2 * n)
    vals = [_toeplitz_logdet(alpha, k) for k in ns]
    rich_prev = (4 * vals[1] - vals[0]) / 3
    rich = (4 * vals[2] - vals[1]) / 3
    d1, d2 = vals[1] - vals[0], vals[2] - vals[1]
    observed = math.log2(d1 / d2) if d1 * d2 > 0 else math.nan
    err = max(abs(rich - rich_prev), 1e-14 * max(1.0, abs(rich)))
    details = {"levels": list(ns), "raw_logdets": vals, "observed_order": observed}
    return GapEstimate(alpha, "toeplitz", {"n": n}, LogDetValue(rich), err, details)


def _route_hankel(alpha, p):
    n = int(p.pop("n", 8))
    precision = p.pop("precision", "double" if n <= DOUBLE_HANKEL_MAX else "extended")
    _reject_extra(p, "hankel")
    ceiling = EXTENDED_HANKEL_MAX if precision == "extended" else DOUBLE_HANKEL_MAX
    if n < 2 or n > ceiling:
        raise UsageError(f"hankel route needs 2 <= n <= {ceiling} in {precision} precision, got {n}")
    v = _hankel_logdet(alpha, n, precision)
    v_half = _hankel_logdet(alpha, n // 2, precision)
    # second-order tail: v(n) - v(inf) ~ (v(n/2) - v(n)) / 3
    err = abs(v - v_half) / 3
    return GapEstimate(alpha, "hankel", {"n": n, "precision": precision}, LogDetValue(v), err,
                       {"raw_logdets": [v_half, v], "levels": [n // 2, n]})


def _route_resolvent(alpha, p):
    n = int(p.pop("n", max(8, math.ceil(8 * alpha))))
    N = int(p.pop("N", 16 * n))
    levels = int(p.pop("levels", 3))
    tol = float(p.pop("tol", 1e-3))
    _reject_extra(p, "resolvent")
    v1, s1 = _resolvent_logdet(alpha, n, N, levels, tol)
    v2, s2 = _resolvent_logdet(alpha, 2 * n, 2 * N, levels, tol)
    rich = (4 * v2 - v1) / 3
    err = abs(v2 - v1) / 3 + (4 * s2.error_estimate + s1.error_estimate) / 3
    details = {
        "n_levels": [n, 2 * n],
        "values": [v1, v2],
        "truncations": [list(s1.levels), list(s2.levels)],
        "raw_corner_logdets": [list(s1.raw_logdets), list(s2.raw_logdets)],
        "truncation_ratios": [s1.ratio, s2.ratio],
        "sigma_min": min(s1.sigma_min, s2.sigma_min),
    }
    return GapEstimate(alpha, "resolvent", {"n": n, "N": N, "levels": levels}, LogDetValue(rich), err, details)


def _route_split(alpha, p):
    N = int(p.pop("N", 2048))
    levels = int(p.pop("levels", 3))
    tol = float(p.pop("tol", 5e-2))
    _reject_extra(p, "split")
    plus = complemented_split_det(alpha / 2, "plus_minus_half", N, tolerance=tol, levels=levels)
    minus = complemented_split_det(alpha / 2, "minus_plus_half", N, tolerance=tol, levels=levels)
    v = -alpha * alpha / 8 + plus.logdet.log_abs + minus.logdet.log_abs
    details = {
        "plus": plus.logdet.log_abs,
        "minus": minus.logdet.log_abs,
        "plus_raw": list(plus.raw_logdets),
        "minus_raw": list(minus.raw_logdets),
        "levels": list(plus.levels),
        "ratios": [plus.ratio, minus.ratio],
    }
    return GapEstimate(alpha, "split", {"N": N, "levels": levels}, LogDetValue(v),
                       plus.error_estimate + minus.error_estimate, details)


def _route_asymptotic(alpha, p):
    _reject_extra(p, "asymptotic")
    return GapEstimate(alpha, "asymptotic", {}, LogDetValue(asymptotic_logdet(alpha)), math.nan)


_ROUTE_HANDLERS = {
    "nystrom": _route_nystrom,
    "toeplitz": _route_toeplitz,
    "hankel": _route_hankel,
    "resolvent": _route_resolvent,
    "split": _route_split,
    "asymptotic": _route_asymptotic,
}


def _reject_extra(p: dict, what: str):
    if p:
        raise UsageError(f"unexpected parameters for {what}: {', '.join(sorted(p))}")


# ---------------------------------------------------------------------------
# identity residuals


def _relative(lhs: LogDetValue, rhs: LogDetValue) -> float:
    """``|det_rhs / det_lhs - 1|`` computed in log space."""
    if lhs.phase != rhs.phase:
        return math.inf if not np.isclose(lhs.phase, rhs.phase) else abs(math.expm1(rhs.log_abs - lhs.log_abs))
    return abs(math.expm1(rhs.log_abs - lhs.log_abs))


def _even_symbol(p: dict):
    sym = p.pop("symbol", None)
    if sym is None:
        sym = make_symbol("smooth_user", coefficients=p.pop("coefficients", DEFAULT_EVEN_COEFFS),
                          offset=p.pop("offset", -1))
    if not sym.even:
        raise UsageError("the identity needs an even symbol")
    return sym


def identity_residual(which: str, **params) -> float:
    """Relative residual ``|rhs/lhs - 1|`` of a determinant identity.

    ``block_tab`` returns the largest absolute entry mismatch instead, and
    ``thm24`` the largest coefficient mismatch.

    Identities and parameters:

    * ``prop21_BO`` (symbol | coefficients, n=4, N=512):
      ``det(T_n(a) + H_n(a)) = G^n det P_n (I + H(psi))^{-1} P_n`` with
      ``psi`` from the even Wiener-Hopf factorization.
    * ``prop23`` (symbol | coefficients, n=4): ``det(T_n(a) + H_n(a)) = det H_n[b]``
      with ``b(cos th) = a(e^{i th}) sqrt((1 + cos th)/(1 - cos th))``.
    * ``prop32`` (g, n=4): ``det H_n[b] = det T_n(d)`` with
      ``b = g(x^2) sqrt((1 + x)/(1 - x))`` and ``d(e^{i th}) = g(cos^2(th/2))``.
    * ``prop33`` (alpha, n, precision): ``det T_n(arc_indicator(alpha/n)) =
      rho^{n^2} det H_n[b_{alpha,n}]``.
    * ``f64`` (alpha, N=2048, m=64): Nyström against the split route.
    * ``block_tab`` (a, b coefficient lists or degree/seed, N=64): interior
      blocks of ``T(ab) = T(a)T(b) + H(a)H(b~)`` and
      ``H(ab) = T(a)H(b) + H(a)T(b~)``.
    * ``thm24`` (alpha, n, K=64): the even factorization of
      ``c = 1/rational_even_r(mu)`` reproduces ``psi_full`` with ``G = 1``.
    """
    if which not in IDENTITIES:
        raise UsageError(f"unknown identity {which!r}; expected one of {', '.join(IDENTITIES)}")
    p = dict(params)
    if which == "prop21_BO":
        a = _even_symbol(p)
        n, N = int(p.pop("n", 4)), int(p.pop("N", 512))
        _reject_extra(p, which)
        lhs = log_det(matrix_of("toeplitz_plus_hankel", a, n))
        fac = wiener_hopf_factor_even(a)
        sec = finite_section_resolvent_corner(fac.psi, n, N, tolerance=math.inf, levels=1)
        rhs = LogDetValue(sec.raw_logdets[-1] + n * math.log(fac.G), sec.extrapolated_logdet.phase)
        return _relative(lhs, rhs)
    if which == "prop23":
        a = _even_symbol(p)
        n = int(p.pop("n", 4))
        _reject_extra(p, which)
        lhs = log_det(matrix_of("toeplitz_plus_hankel", a, n))
        rhs = log_det(matrix_of("moment_hankel", moment_function("from_even_symbol", symbol=a), n))
        return _relative(lhs, rhs)
    if which == "prop32":
        g = p.pop("g", None) or _default_g
        n = int(p.pop("n", 4))
        _reject_extra(p, which)
        b = moment_function("from_b0", b0=lambda x: g(np.asarray(x) ** 2))
        lhs = log_det(matrix_of("moment_hankel", b, n))
        # cos^2(th/2) = (1 + cos th)/2
        d = make_symbol("cosine_function", func=lambda c: g((1 + c) / 2))
        rhs = log_det(matrix_of("toeplitz", d, n))
        return _relative(lhs, rhs)
    if which == "prop33":
        alpha, n = float(p.pop("alpha", 1.0)), int(p.pop("n", 4))
        precision = p.pop("precision", "double" if n <= DOUBLE_HANKEL_MAX else "extended")
        _reject_extra(p, which)
        lhs = _toeplitz_logdet(alpha, n)
        rhs = _hankel_logdet(alpha, n, precision)
        return abs(math.expm1(rhs - lhs))
    if which == "f64":
        alpha = float(p.pop("alpha", 2.0))
        N, m = int(p.pop("N", 2048)), int(p.pop("m", 64))
        _reject_extra(p, which)
        ny = gap_logdet(alpha, "nystrom", m=m).logdet.log_abs
        sp = gap_logdet(alpha, "split", N=N).logdet.log_abs
        return abs(math.expm1(sp - ny))
    if which == "block_tab":
        return _block_tab(p)
    return _thm24(p)


def _default_g(y):
    return 1.0 / (2.0 - y)


def _block_tab(p: dict) -> float:
    N = int(p.pop("N", 64))
    a_c = p.pop("a", None)
    b_c = p.pop("b", None)
    if a_c is None or b_c is None:
        deg = int(p.pop("degree", 4))
        rng = np.random.default_rng(p.pop("seed", 0))
        a_c = rng.standard_normal(2 * deg + 1) if a_c is None else a_c
        b_c = rng.standard_normal(2 * deg + 1) if b_c is None else b_c
    _reject_extra(p, "block_tab")
    a_c, b_c = np.asarray(a_c, dtype=complex), np.asarray(b_c, dtype=complex)
    if len(a_c) % 2 == 0 or len(b_c) % 2 == 0:
        raise UsageError("coefficient lists must have odd length (powers -d..d)")
    da, db = len(a_c) // 2, len(b_c) // 2
    d = max(da, db)
    if N <= 2 * d:
        raise UsageError(f"N={N} must exceed twice the degree {d}")
    a = make_symbol("smooth_user", coefficients=a_c, offset=-da)
    b = make_symbol("smooth_user", coefficients=b_c, offset=-db)
    b_rev = make_symbol("smooth_user", coefficients=b_c[::-1], offset=-db)
    ab = make_symbol("smooth_user", coefficients=np.convolve(a_c, b_c), offset=-(da + db))
    T = lambda s: matrix_of("toeplitz", s, N)
    H = lambda s: matrix_of("hankel", s, N)
    k = N - d
    r1 = T(ab) - (T(a) @ T(b) + H(a) @ H(b_rev))
    r2 = H(ab) - (T(a) @ H(b) + H(a) @ T(b_rev))
    return float(max(np.max(np.abs(r1[:k, :k])), np.max(np.abs(r2[:k, :k]))))


def _thm24(p: dict) -> float:
    alpha, n = float(p.pop("alpha", 2.0)), int(p.pop("n", 4))
    K = int(p.pop("K", 64))
    _reject_extra(p, "thm24")
    _, mu = mu_rho_params(alpha, n)
    fac = wiener_hopf_factor_even(make_symbol("rational_even_r", r=mu, power=-1))
    ref = make_symbol("psi_full", alpha=alpha, n=n)
    got = fourier_coeffs(fac.psi_chi, -K, K)
    want = fourier_coeffs(ref, -K, K)
    return float(max(np.max(np.abs(got - want)), abs(fac.G - 1)))


# ---------------------------------------------------------------------------
# sigma and constant extraction


def sigma(alpha: float, step: Optional[float] = None, m: int = 64, tol: float = 1e-6, max_halvings: int = 20) -> float:
    """``alpha * d/d alpha log det(I - K_alpha)`` by central differences of the Nyström route.

    The step starts at ``step`` (default ``alpha/10``) and is halved until
    two successive estimates differ by less than ``tol``.
    """
    alpha = float(alpha)
    if not alpha > 0:
        raise UsageError(f"sigma needs alpha > 0, got {alpha}")
    h = alpha / 10 if step is None else float(step)
    if not (0 < h <= alpha / 10):
        raise UsageError(f"step must lie in (0, alpha/10], got {h}")
    nystrom_logdet(alpha, m)  # certify the discretization once

    def f(x):
        return nystrom_logdet(x, m, check=False).logdet.log_abs

    def central(hh):
        return alpha * (f(alpha + hh) - f(alpha - hh)) / (2 * hh)

    prev = central(h)
    for _ in range(max_halvings):
        h /= 2
        cur = central(h)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise AccuracyError(f"sigma({alpha}) did not settle under step halving", previous=prev, last=cur)


def extract_constant(
    beta_grid: Sequence[float],
    route: str = "nystrom",
    model_order: int = 2,
    logdets: Optional[Sequence[float]] = None,
    **route_params,
) -> FitReport:
    """Fit ``log det(I - K_{2b}) + b^2/2 + (log b)/4 = C + sum_j c_{2j} b^{-2j}``.

    Args:
        beta_grid: half-lengths ``b``; the gap length is ``2b``.
        route: route used to evaluate the log-determinants.
        model_order: number of correction terms ``c_2, c_4, ...``.
        logdets: precomputed log-determinants on the grid (skips evaluation).
        **route_params: forwarded to :func:`gap_logdet`.

    Raises:
        UsageError: fewer than ``model_order + 1`` distinct points, or a
            rank-deficient design matrix.
    """
    betas = np.asarray([float(b) for b in beta_grid])
    if model_order < 0:
        raise UsageError(f"model_order must be >= 0, got {model_order}")
    if np.any(betas <= 0):
        raise UsageError("beta values must be positive")
    if len(betas) < model_order + 1:
        raise UsageError(f"need at least {model_order + 1} points for order {model_order}, got {len(betas)}")
    if logdets is None:
        logdets = [gap_logdet(2 * b, route, **route_params).logdet.log_abs for b in betas]
    L = np.asarray(logdets, dtype=float)
    if L.shape != betas.shape:
        raise UsageError("logdets and beta_grid differ in length")
    y = L + betas**2 / 2 + np.log(betas) / 4
    X = np.column_stack([betas ** (-2.0 * j) for j in range(model_order + 1)])
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise UsageError("rank-deficient fit: use more distinct beta values or a lower order")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.max(np.abs(y - X @ coef)))
    return FitReport(tuple(betas.tolist()), route, model_order, float(coef[0]), tuple(coef[1:].tolist()), resid,
                     tuple(L.tolist()))
