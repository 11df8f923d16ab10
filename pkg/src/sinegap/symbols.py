"""Symbol catalog on the unit circle and moment functions on [-1, 1].

A :class:`CircleSymbol` is an immutable description of a function on the
circle, evaluated by angle ``theta`` in ``(-pi, pi]``.  Fourier coefficients
``a_k = (1/2pi) int a(e^{i theta}) e^{-ik theta} d theta`` come from one of
three engines, in order of preference:

1. closed forms (jump functions, binomial series, Laurent polynomials, the
   exponential inner function ``h_exp``);
2. a product decomposition ``offset + sum_i jump_i * smooth_i`` where each
   ``jump_i`` has closed-form coefficients and each ``smooth_i`` is analytic
   in an annulus; the smooth coefficients come from a refined FFT and are
   convolved exactly with the jump coefficients;
3. a refined FFT of the samples, after subtracting a sawtooth for every known
   jump so that the remainder is continuous.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve

from .errors import AccuracyError, DomainError, UsageError

__all__ = [
    "Singularity",
    "CircleSymbol",
    "MomentFunction",
    "FactorizationResult",
    "make_symbol",
    "fourier_coeffs",
    "moebius_transform",
    "wiener_hopf_factor_even",
    "moment_function",
    "moments",
    "mu_rho_params",
    "KINDS",
]

KINDS = (
    "arc_indicator",
    "u_jump",
    "eta",
    "xi",
    "sign_chi",
    "psi_full",
    "psi_singular",
    "h_exp",
    "h_rational",
    "rational_even_r",
    "psi_r",
    "smooth_user",
    "cosine_function",
)

FFT_START = 2**14
FFT_CAP = 2**20
_TWO_PI = 2.0 * np.pi

ThetaFunc = Callable[[np.ndarray], np.ndarray]


def _wrap(theta):
    """Map angles into (-pi, pi]."""
    th = np.mod(np.asarray(theta, dtype=float) + np.pi, _TWO_PI) - np.pi
    return np.where(th == -np.pi, np.pi, th)


def _angle_of(point: complex) -> float:
    return float(_wrap(np.angle(point)))


@dataclass(frozen=True)
class Singularity:
    """A special point on the circle.

    ``left``/``right`` are the one-sided limits as ``theta`` approaches the
    point from below/above; they are set for jumps only.
    """

    point: complex
    type: str  # "jump" | "essential-boundary" | "branch"
    left: Optional[complex] = None
    right: Optional[complex] = None

    @property
    def theta(self) -> float:
        return _angle_of(self.point)


@dataclass(frozen=True)
class _Term:
    jump: Optional["CircleSymbol"]
    smooth: Optional[ThetaFunc]


@dataclass(frozen=True, eq=False)
class CircleSymbol:
    """Immutable function on the unit circle.

    Use :func:`make_symbol` rather than constructing directly.
    """

    kind: str
    params: tuple
    even: bool
    singularities: tuple
    _raw: ThetaFunc = field(repr=False)
    _closed: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    _terms: tuple = field(default=(), repr=False)
    _offset: complex = field(default=0.0, repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def param(self, name):
        return dict(self.params)[name]

    def at(self, theta) -> np.ndarray:
        """Evaluate at angles; jump points give the mean of one-sided limits."""
        th = _wrap(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.asarray(self._raw(th), dtype=complex)
        for s in self.singularities:
            if s.type != "jump":
                continue
            hit = np.isclose(th, s.theta, rtol=0, atol=1e-15) | (
                np.isclose(abs(s.theta), np.pi, atol=1e-15) & np.isclose(np.abs(th), np.pi, rtol=0, atol=1e-15)
            )
            if np.any(hit):
                out = np.where(hit, 0.5 * (s.left + s.right), out)
        return out

    def __call__(self, t) -> np.ndarray:
        """Evaluate at points ``t`` on the circle (only ``arg t`` is used)."""
        return self.at(np.angle(np.asarray(t, dtype=complex)))

    @property
    def jumps(self) -> tuple:
        return tuple(s for s in self.singularities if s.type == "jump")


# ---------------------------------------------------------------------------
# closed-form coefficient helpers


def _u_coeffs(beta: float, tau: complex, ks: np.ndarray) -> np.ndarray:
    # u_{beta,1}: sin(pi beta) / (pi (beta - k)) = (-1)^k sinc(beta - k)
    ks = np.asarray(ks)
    base = np.where(ks % 2 == 0, 1.0, -1.0) * np.sinc(beta - ks)
    return base * np.asarray(tau, dtype=complex) ** (-ks.astype(float))


def _binomial_series(beta: float, kmax: int) -> np.ndarray:
    """Coefficients of (1 - z)^beta up to z^kmax."""
    if kmax < 0:
        return np.zeros(0)
    j = np.arange(kmax, dtype=float)
    return np.concatenate([[1.0], np.cumprod((j - beta) / (j + 1))])


def _h_exp_coeffs(alpha: float, kmax: int) -> np.ndarray:
    """Taylor coefficients of exp(-alpha (1 - z) / (2 (1 + z))).

    From (1 + z)^2 h' = alpha h:
    (k+1) h_{k+1} = (alpha - 2k) h_k - (k-1) h_{k-1}.
    Equivalently h_k = e^{-alpha/2} (-1)^k L_k^{(-1)}(alpha).
    """
    h = np.zeros(max(kmax + 1, 2))
    h[0] = math.exp(-alpha / 2)
    h[1] = alpha * h[0]
    for k in range(1, kmax):
        h[k + 1] = ((alpha - 2 * k) * h[k] - (k - 1) * h[k - 1]) / (k + 1)
    return h[: kmax + 1]


def _power_coeffs_closed(series_of_k, kind_sign: int):
    """Closed-form engine for one-sided series (eta: k >= 0, xi: k <= 0)."""

    def closed(ks):
        ks = np.asarray(ks)
        out = np.zeros(len(ks), dtype=complex)
        idx = kind_sign * ks
        ok = idx >= 0
        if np.any(ok):
            out[ok] = series_of_k(idx[ok])
        return out

    return closed


# ---------------------------------------------------------------------------
# symbol construction


def mu_rho_params(alpha: float, n: int) -> tuple[float, float]:
    """Return ``(rho, mu)`` with ``rho = cos(alpha/2n)`` and ``mu = (1 - sqrt(1 - rho^2)) / rho``."""
    if not (alpha > 0) or int(n) != n or n < 1:
        raise UsageError(f"need alpha > 0 and integer n >= 1, got alpha={alpha}, n={n}")
    half = alpha / (2 * n)
    if half >= np.pi / 2:
        raise DomainError(f"alpha/(2n) = {half} >= pi/2: the arc degenerates")
    rho = math.cos(half)
    mu = (1 - math.sin(half)) / rho
    return rho, mu


def _check_unit(tau) -> complex:
    tau = complex(tau)
    if abs(abs(tau) - 1) > 1e-14:
        raise UsageError(f"tau must lie on the unit circle, got {tau}")
    return tau


def _u_symbol(beta: float, tau: complex) -> CircleSymbol:
    th0 = _angle_of(tau)

    def raw(th):
        # theta - theta0 taken in (0, 2 pi)
        rel = np.mod(th - th0, _TWO_PI)
        return np.exp(1j * beta * (rel - np.pi))

    sing = (Singularity(tau, "jump", left=np.exp(1j * beta * np.pi), right=np.exp(-1j * beta * np.pi)),)
    return CircleSymbol(
        "u_jump",
        (("beta", beta), ("tau", tau)),
        False,
        sing,
        raw,
        _closed=lambda ks: _u_coeffs(beta, tau, ks),
    )


def _chi_symbol() -> CircleSymbol:
    def raw(th):
        return np.where(th > 0, 1j, -1j) * (np.abs(np.sin(th)) > 0)

    def closed(ks):
        ks = np.asarray(ks)
        out = np.zeros(len(ks), dtype=complex)
        odd = ks % 2 != 0
        out[odd] = 2.0 / (np.pi * ks[odd])
        return out

    sing = (
        Singularity(1.0 + 0j, "jump", left=-1j, right=1j),
        Singularity(-1.0 + 0j, "jump", left=1j, right=-1j),
    )
    return CircleSymbol("sign_chi", (), False, sing, raw, _closed=closed)


def _laurent_symbol(coeffs, offset: int) -> CircleSymbol:
    c = np.asarray(coeffs, dtype=complex)
    if c.ndim != 1 or len(c) == 0:
        raise UsageError("smooth_user needs a non-empty coefficient list")
    powers = np.arange(offset, offset + len(c))

    def raw(th):
        t = np.exp(1j * np.asarray(th, dtype=float))
        return np.polynomial.polynomial.polyval(t, c) * t**offset

    def closed(ks):
        ks = np.asarray(ks)
        idx = ks - offset
        out = np.zeros(len(ks), dtype=complex)
        ok = (idx >= 0) & (idx < len(c))
        out[ok] = c[idx[ok]]
        return out

    # even iff c_k == c_{-k}
    lo, hi = int(powers[0]), int(powers[-1])
    span = max(abs(lo), abs(hi))
    ks = np.arange(-span, span + 1)
    full = closed(ks)
    even = bool(np.allclose(full, full[::-1], rtol=0, atol=1e-15))
    return CircleSymbol(
        "smooth_user", (("coefficients", tuple(c)), ("offset", offset)), even, (), raw, _closed=closed
    )


def _smooth_only(kind, params, even, func, singularities=()) -> CircleSymbol:
    return CircleSymbol(
        kind, params, even, singularities, func, _terms=(_Term(None, func),)
    )


def _unit(th):
    return np.exp(1j * np.asarray(th, dtype=float))


def _psi_singular_parts(mu: float, pole: int):
    """Return (jump symbol, smooth factor) with psi^{(pole)}_mu + 1 = jump * smooth."""
    if pole == 1:
        jump = _u_symbol(-0.5, 1.0 + 0j)

        def smooth(th):
            t = _unit(th)
            return np.sqrt(1 - mu * t) / np.sqrt(1 - mu / t)

    else:
        jump = _u_symbol(0.5, -1.0 + 0j)

        def smooth(th):
            t = _unit(th)
            return np.sqrt(1 + mu / t) / np.sqrt(1 + mu * t)

    return jump, smooth


def make_symbol(kind: str, **params) -> CircleSymbol:
    """Build a catalog symbol.

    Kinds and parameters::

        arc_indicator   gamma            0 on |theta| < gamma, 1 elsewhere (gamma = alpha/n)
        u_jump          beta, tau=1      exp(i beta (theta - theta0 - pi)), 0 < theta - theta0 < 2 pi
        eta             beta, tau=1      (1 - t/tau)^beta, eta(0) = 1
        xi              beta, tau=1      (1 - tau/t)^beta, xi(inf) = 1
        sign_chi                         i on (0, pi), -i on (-pi, 0)
        psi_full        alpha, n (or mu) (c~_+ / c_+) * sign_chi with mu = mu_{alpha,n}
        psi_singular    pole, alpha, n   (or mu=...) Moebius-pulled jump minus 1
        h_exp           alpha            exp(-alpha (1 - t) / (2 (1 + t)))
        h_rational      alpha, n         ((t + mu) / (1 + mu t))^n
        rational_even_r r, power=1       (sqrt((1 - rt)(1 - r/t) / ((1 + rt)(1 + r/t))))^power
        cosine_function func             t -> func(cos theta), func smooth on [-1, 1]
        psi_r           r                f_r^+ f_r^-, tends to sign_chi as r -> 1
        smooth_user     coefficients, offset=0   Laurent polynomial
    """
    if kind == "arc_indicator":
        gamma = float(params["gamma"])
        if not (0 < gamma < np.pi):
            raise UsageError(f"arc_indicator needs 0 < gamma < pi, got {gamma}")

        def raw(th):
            return (np.abs(th) >= gamma).astype(complex)

        def closed(ks):
            ks = np.asarray(ks)
            kf = np.where(ks == 0, 1, ks).astype(float)
            return np.where(ks == 0, 1 - gamma / np.pi, -np.sin(ks * gamma) / (np.pi * kf)).astype(complex)

        sing = (
            Singularity(np.exp(1j * gamma), "jump", left=0.0, right=1.0),
            Singularity(np.exp(-1j * gamma), "jump", left=1.0, right=0.0),
        )
        return CircleSymbol(kind, (("gamma", gamma),), True, sing, raw, _closed=closed)

    if kind == "u_jump":
        return _u_symbol(float(params["beta"]), _check_unit(params.get("tau", 1)))

    if kind in ("eta", "xi"):
        beta = float(params["beta"])
        tau = _check_unit(params.get("tau", 1))
        if kind == "eta":
            def raw(th):
                return (1 - _unit(th) / tau) ** beta

            def series(idx):
                return _binomial_series(beta, int(idx.max()))[idx] * tau ** (-idx.astype(float))

            closed = _power_coeffs_closed(series, +1)
        else:
            def raw(th):
                return (1 - tau / _unit(th)) ** beta

            def series(idx):
                return _binomial_series(beta, int(idx.max()))[idx] * tau ** idx.astype(float)

            closed = _power_coeffs_closed(series, -1)
        sing = () if float(beta).is_integer() and beta >= 0 else (Singularity(tau, "branch"),)
        return CircleSymbol(kind, (("beta", beta), ("tau", tau)), False, sing, raw, _closed=closed)

    if kind == "sign_chi":
        return _chi_symbol()

    if kind == "smooth_user":
        return _laurent_symbol(params["coefficients"], int(params.get("offset", 0)))

    if kind == "h_exp":
        alpha = float(params["alpha"])
        if alpha < 0:
            raise UsageError(f"h_exp needs alpha >= 0, got {alpha}")

        def raw(th):
            th = np.asarray(th, dtype=float)
            inside = np.abs(th) < np.pi
            half = np.where(inside, th / 2, 0.0)
            return np.where(inside, np.exp(0.5j * alpha * np.tan(half)), 0.0)

        def closed(ks):
            ks = np.asarray(ks)
            out = np.zeros(len(ks), dtype=complex)
            ok = ks >= 0
            if np.any(ok):
                out[ok] = _h_exp_coeffs(alpha, int(ks[ok].max()))[ks[ok]]
            return out

        sing = (Singularity(-1.0 + 0j, "essential-boundary"),) if alpha > 0 else ()
        return CircleSymbol(kind, (("alpha", alpha),), alpha == 0, sing, raw, _closed=closed)

    if kind == "h_rational":
        alpha, n = float(params["alpha"]), int(params["n"])
        _, mu = mu_rho_params(alpha, n)

        def f(th):
            t = _unit(th)
            return ((t + mu) / (1 + mu * t)) ** n

        return _smooth_only(kind, (("alpha", alpha), ("n", n), ("mu", mu)), False, f)

    if kind == "rational_even_r":
        r = float(params["r"])
        power = int(params.get("power", 1))
        if not (0 <= r < 1):
            raise UsageError(f"r must lie in [0, 1), got {r}")
        if power not in (1, -1):
            raise UsageError(f"power must be +1 or -1, got {power}")

        def f(th):
            t = _unit(th)
            return np.sqrt((1 - r * t) * (1 - r / t) / ((1 + r * t) * (1 + r / t))) ** power

        return _smooth_only(kind, (("r", r), ("power", power)), True, f)

    if kind == "cosine_function":
        g = params["func"]
        if not callable(g):
            raise UsageError("cosine_function needs a callable func")

        def f(th):
            return np.asarray(g(np.cos(np.asarray(th, dtype=float))), dtype=complex)

        return _smooth_only(kind, (("func", getattr(g, "__name__", "func")),), True, f)

    if kind == "psi_r":
        r = float(params["r"])
        if not (0 <= r < 1):
            raise UsageError(f"r must lie in [0, 1), got {r}")

        def f(th):
            t = _unit(th)
            plus = np.sqrt(1 - r / t) / np.sqrt(1 - r * t)
            minus = np.sqrt(1 + r * t) / np.sqrt(1 + r / t)
            return plus * minus

        return _smooth_only(kind, (("r", r),), False, f)

    if kind == "psi_full":
        if "mu" in params:
            mu = float(params["mu"])
            if not (0 <= mu < 1):
                raise UsageError(f"mu must lie in [0, 1), got {mu}")
            p = (("mu", mu),)
        else:
            alpha, n = float(params["alpha"]), int(params["n"])
            _, mu = mu_rho_params(alpha, n)
            p = (("alpha", alpha), ("n", n), ("mu", mu))
        chi = _chi_symbol()

        def smooth(th):
            t = _unit(th)
            return np.sqrt(1 - mu * t) * np.sqrt(1 + mu / t) / (np.sqrt(1 - mu / t) * np.sqrt(1 + mu * t))

        def raw(th):
            return chi._raw(th) * smooth(th)

        sing = tuple(
            Singularity(s.point, "jump", left=s.left * smooth(s.theta), right=s.right * smooth(s.theta))
            for s in chi.singularities
        )
        return CircleSymbol(kind, p, False, sing, raw, _terms=(_Term(chi, smooth),))

    if kind == "psi_singular":
        pole = int(params["pole"])
        if pole not in (1, -1):
            raise UsageError(f"pole must be +1 or -1, got {pole}")
        if "mu" in params:
            mu = float(params["mu"])
            if not (0 <= mu < 1):
                raise UsageError(f"mu must lie in [0, 1), got {mu}")
            p = (("pole", pole), ("mu", mu))
        else:
            alpha, n = float(params["alpha"]), int(params["n"])
            _, mu = mu_rho_params(alpha, n)
            p = (("pole", pole), ("alpha", alpha), ("n", n), ("mu", mu))
        jump, smooth = _psi_singular_parts(mu, pole)

        def raw(th):
            return jump._raw(th) * smooth(th) - 1

        s0 = jump.singularities[0]
        g = smooth(s0.theta)
        sing = (Singularity(s0.point, "jump", left=s0.left * g - 1, right=s0.right * g - 1),)
        return CircleSymbol(
            kind, p, False, sing, raw, _terms=(_Term(jump, smooth),), _offset=-1.0
        )

    raise UsageError(f"unknown symbol kind {kind!r}")


# ---------------------------------------------------------------------------
# Fourier engines


def _fft_coeffs(func: ThetaFunc, M: int) -> np.ndarray:
    th = _TWO_PI * np.arange(M) / M
    return np.fft.fft(func(_wrap(th))) / M


def _refined_fft(func: ThetaFunc, tol: float, what: str) -> np.ndarray:
    """FFT coefficients, doubling the grid until two resolutions agree to ``tol``.

    Returns the array at the finer resolution; coefficient k sits at ``k % M``.
    """
    M = FFT_START
    prev = _fft_coeffs(func, M)
    while True:
        cur = _fft_coeffs(func, 2 * M)
        half = M // 2
        ks = np.arange(-half + 1, half)
        diff = np.max(np.abs(cur[ks % (2 * M)] - prev[ks % M]))
        if diff <= tol:
            return cur
        if 2 * M >= FFT_CAP:
            raise AccuracyError(
                f"Fourier coefficients of {what} not converged at grid {2 * M} (change {diff:.3e})",
                previous=prev,
                last=cur,
            )
        M *= 2
        prev = cur


def _significant_range(c: np.ndarray, rel: float = 1e-19) -> int:
    """Largest |k| whose coefficient exceeds rel * max |c| (array in FFT order)."""
    M = len(c)
    mag = np.abs(c)
    thresh = rel * max(mag.max(), 1e-300)
    ks = np.concatenate([np.arange(0, M // 2), np.arange(-M // 2, 0)])
    big = np.abs(ks[mag > thresh])
    return int(big.max()) if big.size else 0


def _smooth_cached(symbol: CircleSymbol, key, func: ThetaFunc, tol: float) -> np.ndarray:
    ck = ("smooth", key, tol)
    if ck not in symbol._cache:
        symbol._cache[ck] = _refined_fft(func, tol, symbol.kind)
    return symbol._cache[ck]


def _sawtooth_coeffs(theta0: float, ks: np.ndarray) -> np.ndarray:
    # s(theta) = (pi - (theta - theta0))/2 on (theta0, theta0 + 2 pi): jump +pi at theta0
    ks = np.asarray(ks)
    kf = np.where(ks == 0, 1, ks).astype(float)
    return np.where(ks == 0, 0.0, np.exp(-1j * ks * theta0) / (2j * kf))


def _sawtooth(theta0: float, th: np.ndarray) -> np.ndarray:
    rel = np.mod(th - theta0, _TWO_PI)
    return np.where(rel == 0, 0.0, (np.pi - rel) / 2)


def fourier_coeffs(symbol: CircleSymbol, k_min: int, k_max: int, tol: float = 1e-14) -> np.ndarray:
    """Fourier coefficients ``a_k`` for ``k_min <= k <= k_max`` (complex array)."""
    if k_min > k_max:
        raise UsageError(f"k_min={k_min} exceeds k_max={k_max}")
    ks = np.arange(k_min, k_max + 1)
    if symbol._closed is not None:
        out = np.asarray(symbol._closed(ks), dtype=complex)
    elif symbol._terms:
        out = np.zeros(len(ks), dtype=complex)
        out[ks == 0] += symbol._offset
        for i, term in enumerate(symbol._terms):
            out += _term_coeffs(symbol, i, term, ks, tol)
    else:
        out = _generic_coeffs(symbol, ks, tol)
    if symbol.even and np.all(np.abs(out.imag) <= 10 * tol + 1e-15):
        out = out.real.astype(complex)
    return out


def _term_coeffs(symbol, i, term: _Term, ks: np.ndarray, tol: float) -> np.ndarray:
    if term.smooth is None:
        return np.asarray(term.jump._closed(ks), dtype=complex)
    c = _smooth_cached(symbol, i, term.smooth, tol)
    M = len(c)
    if term.jump is None:
        if np.any(np.abs(ks) >= M // 2):
            # beyond the resolved band the coefficients are below tol
            out = np.zeros(len(ks), dtype=complex)
            inside = np.abs(ks) < M // 2
            out[inside] = c[ks[inside] % M]
            return out
        return c[ks % M]
    J = _significant_range(c)
    smooth_k = c[np.arange(-J, J + 1) % M]
    jk = np.arange(ks[0] - J, ks[-1] + J + 1)
    jump_k = np.asarray(term.jump._closed(jk), dtype=complex)
    full = fftconvolve(jump_k, smooth_k)
    # full[p] is the coefficient of index (ks[0] - J) + (-J) + p
    start = 2 * J
    return full[start : start + len(ks)]


def _generic_coeffs(symbol: CircleSymbol, ks: np.ndarray, tol: float) -> np.ndarray:
    jumps = symbol.jumps
    weights = [(s.theta, (s.right - s.left) / np.pi) for s in jumps]

    def remainder(th):
        # mean convention at grid points that sit exactly on a jump
        vals = symbol.at(th)
        for th0, w in weights:
            vals = vals - w * _sawtooth(th0, th)
        return vals

    c = _smooth_cached(symbol, "generic", remainder, tol)
    M = len(c)
    out = np.zeros(len(ks), dtype=complex)
    inside = np.abs(ks) < M // 2
    out[inside] = c[ks[inside] % M]
    for th0, w in weights:
        out += w * _sawtooth_coeffs(th0, ks)
    return out


# ---------------------------------------------------------------------------
# Moebius reparametrization


def moebius_transform(symbol: CircleSymbol, mu: float, tau: int = 1, direction: str = "forward") -> CircleSymbol:
    """Compose with a disc automorphism.

    forward:  t -> a(tau (t + mu) / (1 + mu t))
    inverse:  t -> a((t/tau - mu) / (1 - mu t/tau))
    """
    if not (0 <= mu < 1):
        raise UsageError(f"mu must lie in [0, 1), got {mu}")
    tau = _check_unit(tau)
    if direction == "forward":
        def mob(t):
            return tau * (t + mu) / (1 + mu * t)

        def mob_inv(s):
            return (s / tau - mu) / (1 - mu * s / tau)
    elif direction == "inverse":
        def mob(t):
            return (t / tau - mu) / (1 - mu * t / tau)

        def mob_inv(s):
            return tau * (s + mu) / (1 + mu * s)
    else:
        raise UsageError(f"direction must be 'forward' or 'inverse', got {direction!r}")

    def raw(th):
        return symbol._raw(_wrap(np.angle(mob(_unit(th)))))

    # orientation is preserved, so one-sided limits carry over unchanged
    sing = tuple(
        Singularity(complex(mob_inv(s.point)), s.type, s.left, s.right) for s in symbol.singularities
    )
    even = symbol.even and (mu == 0 and tau in (1, -1))
    return CircleSymbol(
        "moebius",
        (("base", symbol.kind), ("mu", mu), ("tau", tau), ("direction", direction)),
        even,
        sing,
        raw,
    )


# ---------------------------------------------------------------------------
# Wiener-Hopf factorization of even symbols


@dataclass(frozen=True)
class FactorizationResult:
    """``a = a_plus(1/t) * G * a_plus(t)`` with ``a_plus(0) = 1``."""

    a_plus: CircleSymbol
    G: float
    psi: CircleSymbol
    psi_chi: CircleSymbol

    def reconstruct(self, theta) -> np.ndarray:
        return self.a_plus.at(-np.asarray(theta)) * self.G * self.a_plus.at(theta)


def wiener_hopf_factor_even(a: CircleSymbol, tol: float = 1e-14, tail_tol: float = 1e-12) -> FactorizationResult:
    """Canonical factorization of an even, nonvanishing symbol.

    ``G = exp([log a]_0)`` and ``a_plus = exp(sum_{k>=1} [log a]_k t^k)``.
    Also returns ``psi = a_plus~ / a_plus`` and ``psi * sign_chi``.

    Raises:
        DomainError: the symbol is not even, vanishes, jumps, or winds.
        AccuracyError: the coefficients of ``log a`` do not decay below
            ``tail_tol`` within the largest grid.
    """
    probe = np.linspace(-np.pi, np.pi, 4097)
    pv = a.at(probe)
    if not np.allclose(pv, a.at(-probe), rtol=1e-12, atol=1e-13):
        raise DomainError("symbol is not even")
    if a.jumps or np.min(np.abs(pv)) < 1e-14 * max(np.max(np.abs(pv)), 1e-300):
        raise DomainError("symbol vanishes or is discontinuous on the circle")

    M = FFT_START
    prev = None
    while True:
        th = _TWO_PI * np.arange(M) / M
        vals = a.at(th)
        if np.min(np.abs(vals)) == 0:
            raise DomainError("symbol vanishes on the sampling grid")
        ang = np.unwrap(np.angle(vals))
        winding = round((ang[-1] - ang[0] + np.angle(vals[0] / vals[-1])) / _TWO_PI)
        if winding != 0:
            raise DomainError(f"symbol has winding number {winding}")
        c = np.fft.fft(np.log(np.abs(vals)) + 1j * ang) / M
        tail = np.max(np.abs(c[M // 2 - M // 8 : M // 2 + M // 8]))
        if prev is not None:
            half = len(prev) // 2
            ks = np.arange(-half + 1, half)
            diff = np.max(np.abs(c[ks % M] - prev[ks % len(prev)]))
            if diff <= tol and tail <= tail_tol:
                break
        if 2 * M > FFT_CAP:
            raise AccuracyError(
                f"log-coefficient tail {tail:.3e} above {tail_tol:.1e} at grid {M}", previous=prev, last=c
            )
        prev = c
        M *= 2

    G = complex(np.exp(c[0]))
    if abs(G.imag) <= 1e-13 * abs(G):
        G = G.real
    plus = np.zeros(M, dtype=complex)
    plus[1 : M // 2] = c[1 : M // 2]
    # coefficients of exp(log a_plus) by FFT on the same grid
    ap = np.fft.fft(np.exp(np.fft.ifft(plus) * M)) / M
    ap = ap[: M // 2]
    # drop the FFT noise tail
    keep = np.nonzero(np.abs(ap) > 64 * np.finfo(float).eps * np.max(np.abs(ap)))[0]
    ap = ap[: int(keep.max()) + 1]
    ap[0] = 1.0
    if np.all(np.abs(ap.imag) <= 1e-14):
        ap = ap.real.astype(complex)
    base = _laurent_symbol(ap, 0)
    a_plus = CircleSymbol(
        "analytic_factor", (("coefficients", tuple(ap)),), False, (), base._raw, _closed=base._closed
    )

    def ratio(th):
        th = np.asarray(th, dtype=float)
        return a_plus._raw(-th) / a_plus._raw(th)

    psi = _smooth_only("wh_ratio", (), False, ratio)
    chi = _chi_symbol()
    psi_chi = CircleSymbol(
        "wh_ratio_chi",
        (),
        False,
        tuple(
            Singularity(s.point, "jump", left=s.left * ratio(s.theta), right=s.right * ratio(s.theta))
            for s in chi.singularities
        ),
        lambda th: chi._raw(th) * ratio(th),
        _terms=(_Term(chi, ratio),),
    )
    return FactorizationResult(a_plus, G, psi, psi_chi)


# ---------------------------------------------------------------------------
# moment functions on [-1, 1]


@dataclass(frozen=True, eq=False)
class MomentFunction:
    """A function b on (-1, 1) for moments ``b_k = (1/pi) int b(x) (2x)^(k-1) dx``.

    ``tag`` selects the quadrature: ``smooth``; ``endpoint-square-root``
    (``b = smooth * (1+x)^p (1-x)^q`` with ``exponents = (p, q)``);
    ``truncated-support`` (``b`` vanishes outside ``[-rho, rho]``).
    ``mp_evaluator`` is an optional mpmath version of ``evaluator`` used by the
    extended-precision backend.
    """

    evaluator: Callable
    tag: str = "smooth"
    smooth_part: Optional[Callable] = None
    exponents: tuple = (0.0, 0.0)
    rho: float = 1.0
    mp_evaluator: Optional[Callable] = None
    mp_smooth_part: Optional[Callable] = None
    label: str = ""

    def __call__(self, x):
        return self.evaluator(x)


def moment_function(kind: str, **params) -> MomentFunction:
    """Catalog of moment functions.

    ``constant`` (value), ``polynomial`` (coefficients, ascending),
    ``b_alpha_n`` (alpha, n): sqrt((1 + rho x)/(1 - rho x)),
    ``truncated_sqrt`` (rho): sqrt((1 + x)/(1 - x)) on [-rho, rho],
    ``from_even_symbol`` (symbol): b(cos th) = a(e^{i th}) sqrt((1 + cos th)/(1 - cos th)),
    ``from_b0`` (b0 smooth even function, mp_b0 optional): b = b0 sqrt((1+x)/(1-x)),
    ``from_cosine_symbol`` (symbol): b(cos th) = c(e^{i th}).
    """
    import mpmath as mp

    if kind == "constant":
        v = float(params["value"])
        return MomentFunction(lambda x: v + 0 * np.asarray(x, dtype=float), "smooth",
                              mp_evaluator=lambda x: mp.mpf(v), label=f"constant({v})")
    if kind == "polynomial":
        c = [float(v) for v in params["coefficients"]]
        return MomentFunction(lambda x: np.polynomial.polynomial.polyval(x, c), "smooth",
                              mp_evaluator=lambda x: mp.fsum(ci * x**i for i, ci in enumerate(c)),
                              label="polynomial")
    if kind == "b_alpha_n":
        rho, _ = mu_rho_params(float(params["alpha"]), int(params["n"]))
        mrho = params.get("mp_rho")

        def mp_eval(x):
            r = mp.cos(mp.mpf(params["alpha"]) / (2 * int(params["n"]))) if mrho is None else mrho
            return mp.sqrt((1 + r * x) / (1 - r * x))

        return MomentFunction(lambda x: np.sqrt((1 + rho * x) / (1 - rho * x)), "smooth",
                              mp_evaluator=mp_eval, label="b_alpha_n")
    if kind == "truncated_sqrt":
        rho = float(params["rho"])
        return MomentFunction(
            lambda x: np.where(np.abs(x) <= rho, np.sqrt((1 + x) / (1 - x)), 0.0),
            "truncated-support",
            rho=rho,
            mp_evaluator=lambda x: mp.sqrt((1 + x) / (1 - x)),
            label="truncated_sqrt",
        )
    if kind == "from_even_symbol":
        sym = params["symbol"]
        if not sym.even:
            raise UsageError("from_even_symbol needs an even symbol")

        def smooth(x):
            return sym.at(np.arccos(np.clip(x, -1, 1))).real

        mp_smooth = None
        if sym.kind == "smooth_user":
            coeffs = dict(sym.params)["coefficients"]
            off = dict(sym.params)["offset"]

            def mp_smooth(x):
                th = mp.acos(x)
                return mp.re(mp.fsum(mp.mpc(c) * mp.expj((off + i) * th) for i, c in enumerate(coeffs)))

        return MomentFunction(
            lambda x: smooth(x) * np.sqrt((1 + x) / (1 - x)),
            "endpoint-square-root",
            smooth_part=smooth,
            exponents=(0.5, -0.5),
            mp_smooth_part=mp_smooth,
            label=f"from_even_symbol({sym.kind})",
        )
    if kind == "from_b0":
        b0 = params["b0"]
        return MomentFunction(
            lambda x: b0(x) * np.sqrt((1 + x) / (1 - x)),
            "endpoint-square-root",
            smooth_part=b0,
            exponents=(0.5, -0.5),
            mp_smooth_part=params.get("mp_b0"),
            label="from_b0",
        )
    if kind == "from_cosine_symbol":
        sym = params["symbol"]

        def ev(x):
            return sym.at(np.arccos(np.clip(x, -1, 1))).real

        return MomentFunction(ev, "smooth", label=f"from_cosine_symbol({sym.kind})")
    raise UsageError(f"unknown moment function kind {kind!r}")


def moments(b: MomentFunction, k_max: int, precision: str = "double", rtol: float = 1e-12):
    """Return ``[b_1, ..., b_kmax]`` with ``b_k = (1/pi) int_{-1}^{1} b(x) (2x)^(k-1) dx``.

    ``precision='extended'`` returns mpmath numbers computed at 40 digits.
    """
    if k_max < 1:
        raise UsageError(f"k_max must be >= 1, got {k_max}")
    if precision == "extended":
        return _moments_mp(b, k_max)
    if precision != "double":
        raise UsageError(f"precision must be 'double' or 'extended', got {precision!r}")

    out = np.empty(k_max)
    for k in range(1, k_max + 1):
        p = k - 1
        if b.tag == "endpoint-square-root":
            f = b.smooth_part
            lo, hi = -1.0, 1.0

            def integrand(x, f=f, p=p):
                return f(x) * (2 * x) ** p

            kw = dict(weight="alg", wvar=b.exponents)
            scale = _abs_scale(lambda x: abs(f(x)) * 2.0**p, b.exponents)
        else:
            lo, hi = (-b.rho, b.rho) if b.tag == "truncated-support" else (-1.0, 1.0)

            def integrand(x, p=p):
                return float(b.evaluator(x)) * (2 * x) ** p

            kw = {}
            scale = 2.0**p * integrate.quad(lambda x: abs(float(b.evaluator(x))), lo, hi, limit=200)[0]
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                if kw:
                    val, _ = integrate.quad(integrand, lo, hi, epsabs=1e-16 * scale, epsrel=rtol / 10, limit=400, **kw)
                else:
                    # split at 0 for odd/even cancellation and at the support edges
                    v1, _ = integrate.quad(integrand, lo, 0.0, epsabs=1e-16 * scale, epsrel=rtol / 10, limit=400)
                    v2, _ = integrate.quad(integrand, 0.0, hi, epsabs=1e-16 * scale, epsrel=rtol / 10, limit=400)
                    val = v1 + v2
            except integrate.IntegrationWarning as exc:
                raise AccuracyError(f"moment b_{k} did not converge: {exc}") from exc
        out[k - 1] = val / np.pi
    return out


def _abs_scale(f, exponents) -> float:
    p, q = exponents
    val, _ = integrate.quad(f, -1, 1, weight="alg", wvar=(p, q), limit=200)
    return max(val, 1e-300)


def _moments_mp(b: MomentFunction, k_max: int, dps: int = 40):
    import mpmath as mp

    with mp.workdps(dps):
        if b.tag == "endpoint-square-root":
            if b.mp_smooth_part is None:
                raise UsageError(f"moment function {b.label!r} has no extended-precision evaluator")
            p, q = b.exponents
            f = b.mp_smooth_part

            def full(x):
                return f(x) * (1 + x) ** p * (1 - x) ** q

            lo, hi = mp.mpf(-1), mp.mpf(1)
        else:
            if b.mp_evaluator is None:
                raise UsageError(f"moment function {b.label!r} has no extended-precision evaluator")
            full = b.mp_evaluator
            r = mp.mpf(b.rho) if b.tag == "truncated-support" else mp.mpf(1)
            lo, hi = -r, r
        out = []
        for k in range(1, k_max + 1):
            val = mp.quad(lambda x: full(x) * (2 * x) ** (k - 1), [lo, 0, hi])
            out.append(val / mp.pi)
        return out
