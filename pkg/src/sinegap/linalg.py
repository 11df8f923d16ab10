"""Toeplitz/Hankel matrices, log-determinants and truncated operator solves.

Matrices are plain ``numpy`` arrays (``mpmath.matrix`` for the extended
precision moment-Hankel backend).  Determinants travel as
:class:`LogDetValue` so that products of tiny factors never underflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import AccuracyError, DomainError, UsageError
from .symbols import CircleSymbol, MomentFunction, fourier_coeffs, make_symbol, moments

__all__ = [
    "LogDetValue",
    "SectionResult",
    "SplitResult",
    "Diagnostics",
    "matrix_of",
    "hankel_from_coeffs",
    "log_det",
    "finite_section_resolvent_corner",
    "complemented_split_det",
    "operator_diagnostics",
    "smallest_singular_value",
    "extrapolate_geometric",
    "DOUBLE_HANKEL_MAX",
    "EXTENDED_HANKEL_MAX",
]

DOUBLE_HANKEL_MAX = 12
EXTENDED_HANKEL_MAX = 24
SIGMA_FLOOR = 1e-8


@dataclass(frozen=True)
class LogDetValue:
    """Determinant stored as ``exp(log_abs) * phase``."""

    log_abs: float
    phase: complex = 1.0
    degenerate: bool = False

    @property
    def value(self) -> complex:
        return self.phase * math.exp(self.log_abs) if np.isfinite(self.log_abs) else 0.0

    @property
    def log(self) -> complex:
        """Principal-branch complex log (real when the phase is +1)."""
        if self.phase == 1:
            return self.log_abs
        return self.log_abs + 1j * np.angle(self.phase)

    def __mul__(self, other: "LogDetValue") -> "LogDetValue":
        return LogDetValue(self.log_abs + other.log_abs, self.phase * other.phase, self.degenerate or other.degenerate)

    def scaled(self, log_factor: float) -> "LogDetValue":
        """Multiply by ``exp(log_factor)``."""
        return LogDetValue(self.log_abs + log_factor, self.phase, self.degenerate)


def _realify(m: np.ndarray, tol: float = 0.0) -> np.ndarray:
    if np.iscomplexobj(m) and np.all(np.abs(m.imag) <= tol):
        return np.ascontiguousarray(m.real)
    return m


def hankel_from_coeffs(c: np.ndarray, n: int) -> np.ndarray:
    """``(c_{j+k+1})`` for ``0 <= j, k < n`` given ``c[i] = a_{i+1}``."""
    return sla.hankel(c[:n], c[n - 1 : 2 * n - 1])


def matrix_of(kind: str, source, n: int, precision: str = "double"):
    """Build ``T_n(a)``, ``H_n(a)``, ``T_n(a) + H_n(a)`` or the moment Hankel ``H_n[b]``.

    Args:
        kind: ``toeplitz``, ``hankel``, ``toeplitz_plus_hankel`` or ``moment_hankel``.
        source: a :class:`CircleSymbol` (first three kinds) or a
            :class:`MomentFunction` (``moment_hankel``).
        n: matrix order.
        precision: ``double`` or ``extended``; the latter only applies to
            ``moment_hankel`` and returns an ``mpmath.matrix``.
    """
    n = int(n)
    if n < 1:
        raise UsageError(f"matrix order must be >= 1, got {n}")
    if kind == "moment_hankel":
        if not isinstance(source, MomentFunction):
            raise UsageError("moment_hankel needs a MomentFunction")
        limit = EXTENDED_HANKEL_MAX if precision == "extended" else DOUBLE_HANKEL_MAX
        if n > limit:
            raise UsageError(f"moment Hankel order {n} exceeds the {precision}-precision ceiling {limit}")
        b = moments(source, 2 * n - 1, precision=precision)
        if precision == "extended":
            import mpmath as mp

            return mp.matrix([[b[j + k] for k in range(n)] for j in range(n)])
        return hankel_from_coeffs(np.asarray(b), n)
    if not isinstance(source, CircleSymbol):
        raise UsageError(f"{kind} needs a CircleSymbol")
    if kind == "toeplitz":
        c = fourier_coeffs(source, -(n - 1), n - 1)
        col = c[n - 1 :]
        row = c[n - 1 :: -1]
        return _realify(sla.toeplitz(col, row))
    if kind == "hankel":
        return _realify(hankel_from_coeffs(fourier_coeffs(source, 1, 2 * n - 1), n))
    if kind == "toeplitz_plus_hankel":
        return matrix_of("toeplitz", source, n) + matrix_of("hankel", source, n)
    raise UsageError(f"unknown matrix kind {kind!r}")


def log_det(m) -> LogDetValue:
    """Log-determinant via LU with partial pivoting.

    A pivot whose magnitude falls below ``1e-300`` times the largest pivot
    sets ``degenerate``; an exactly zero pivot gives ``log_abs = -inf``.
    """
    if not isinstance(m, np.ndarray):
        return _log_det_mp(m)
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise UsageError(f"log_det needs a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        return LogDetValue(0.0)
    lu, piv = _lu(m)
    return _log_det_from_lu(lu, piv)


def _lu(m: np.ndarray):
    # singular pivots are reported through the determinant, not a warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        return sla.lu_factor(m, check_finite=True)


def _log_det_from_lu(lu: np.ndarray, piv: np.ndarray) -> LogDetValue:
    d = np.diag(lu)
    mag = np.abs(d)
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    sign = -1.0 if swaps % 2 else 1.0
    biggest = mag.max() if mag.size else 1.0
    degenerate = bool(np.any(mag <= 1e-300 * max(biggest, 1e-300)))
    if np.any(mag == 0):
        return LogDetValue(-math.inf, 0.0, True)
    phase = sign * np.prod(d / mag)
    if np.isrealobj(d) or abs(np.imag(phase)) < 1e-15:
        phase = float(np.real(phase))
        phase = 1.0 if phase > 0 else -1.0
    return LogDetValue(float(np.sum(np.log(mag))), phase, degenerate)


def _log_det_mp(m) -> LogDetValue:
    import mpmath as mp

    d = mp.det(m)
    if d == 0:
        return LogDetValue(-math.inf, 0.0, True)
    if isinstance(d, mp.mpc):
        return LogDetValue(float(mp.log(abs(d))), complex(d / abs(d)))
    return LogDetValue(float(mp.log(abs(d))), 1.0 if d > 0 else -1.0)


def smallest_singular_value(a: np.ndarray, lu=None, iters: int = 30, exact_below: int = 768) -> float:
    """Smallest singular value: dense SVD for small orders, inverse iteration otherwise."""
    N = a.shape[0]
    if N <= exact_below:
        return float(sla.svdvals(a)[-1])
    if lu is None:
        lu = sla.lu_factor(a)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(N)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        # one step of power iteration on (A^H A)^{-1}
        y = sla.lu_solve(lu, x)
        z = sla.lu_solve(lu, y, trans=2 if np.iscomplexobj(a) else 1)
        nz = np.linalg.norm(z)
        new = 1.0 / math.sqrt(nz)
        x = z / nz
        if est and abs(new - est) <= 1e-6 * est:
            est = new
            break
        est = new
    return float(est)


def extrapolate_geometric(values: Sequence[float], noise: float = 1e-13):
    """Aitken extrapolation of a sequence with geometric error decay.

    Returns ``(limit, error_estimate, ratio)``.  With fewer than three values,
    or when the ratio of successive differences lies outside ``(0, 1)`` or the
    differences are at rounding level, the last value is returned with the
    last difference as the error.
    """
    v = [float(x) for x in values]
    if len(v) == 1:
        return v[0], math.inf, math.nan
    d2 = v[-1] - v[-2]
    if len(v) < 3:
        return v[-1], abs(d2), math.nan
    d1 = v[-2] - v[-3]
    scale = max(1.0, abs(v[-1]))
    if abs(d1) <= noise * scale or abs(d2) <= noise * scale:
        return v[-1], abs(d2), math.nan
    r = d2 / d1
    if not (0 < r < 1):
        return v[-1], abs(d2), r
    corr = d2 * r / (1 - r)
    return v[-1] + corr, abs(corr), r


@dataclass
class SectionResult:
    """Finite-section approximation of ``det P_n (I + H(psi))^{-1} P_n``.

    Attributes:
        corner: top-left ``n x n`` block of the inverse at the largest truncation.
        truncation_used: largest truncation order.
        extrapolated_logdet: extrapolated log-determinant of the corner.
        error_estimate: size of the extrapolation correction (or the last
            difference when no extrapolation was possible).
        levels: truncation orders used.
        raw_logdets: corner log-determinants at each level.
        ratio: observed ratio of successive differences.
        sigma_min: smallest singular value of ``I + H_N(psi)`` at the top level.
    """

    corner: np.ndarray
    truncation_used: int
    extrapolated_logdet: LogDetValue
    error_estimate: float
    levels: tuple = ()
    raw_logdets: tuple = ()
    ratio: float = math.nan
    sigma_min: float = math.nan


def _hankel_coeff_cache(psi: CircleSymbol, top: int) -> np.ndarray:
    c = fourier_coeffs(psi, 1, 2 * top - 1)
    if np.all(np.abs(c.imag) <= 1e-15 * max(np.max(np.abs(c)), 1e-300)):
        c = c.real
    return c


def finite_section_resolvent_corner(
    psi: CircleSymbol,
    n: int,
    N: Optional[int] = None,
    tolerance: float = 1e-6,
    levels: int = 3,
) -> SectionResult:
    """Corner ``P_n (I + H_N(psi))^{-1} P_n`` over truncations ``N, 2N, 4N, ...``.

    The log-determinants of the corners are extrapolated geometrically in
    the truncation order.

    Raises:
        DomainError: ``I + H_N(psi)`` has a singular value below ``1e-8``.
        AccuracyError: the error estimate exceeds ``tolerance``.
    """
    n = int(n)
    if N is None:
        N = max(512, 16 * n)
    N = int(N)
    if n < 1 or N < 2 * n:
        raise UsageError(f"need n >= 1 and N >= 2n, got n={n}, N={N}")
    if levels < 1:
        raise UsageError("at least one truncation level is required")
    orders = tuple(N * 2**i for i in range(levels))
    c = _hankel_coeff_cache(psi, orders[-1])
    raw = []
    corner = None
    smin = math.nan
    phase = 1.0
    for L in orders:
        A = np.eye(L, dtype=c.dtype) + hankel_from_coeffs(c, L)
        lu = _lu(A)
        smin = smallest_singular_value(A, lu)
        if smin < SIGMA_FLOOR:
            raise DomainError(f"I + H_N(psi) is numerically singular at N={L}: smallest singular value {smin:.3e}")
        rhs = np.zeros((L, n), dtype=c.dtype)
        rhs[:n, :n] = np.eye(n)
        corner = sla.lu_solve(lu, rhs)[:n, :]
        ld = log_det(corner)
        phase = ld.phase
        raw.append(ld.log_abs)
    limit, err, ratio = extrapolate_geometric(raw)
    if err > tolerance:
        raise AccuracyError(
            f"finite-section error estimate {err:.3e} exceeds tolerance {tolerance:.1e}",
            previous=raw[-2] if len(raw) > 1 else None,
            last=raw[-1],
        )
    return SectionResult(corner, orders[-1], LogDetValue(limit, phase), err, orders, tuple(raw), ratio, smin)


@dataclass
class SplitResult:
    """Truncated complemented split determinant with its convergence record."""

    logdet: LogDetValue
    error_estimate: float
    truncation_used: int
    levels: tuple
    raw_logdets: tuple
    ratio: float
    sigma_min: float


BRANCHES = {
    "plus_minus_half": (1.0, -0.5),
    "minus_plus_half": (-1.0, 0.5),
}


def _split_logdet_at(h: np.ndarray, u: np.ndarray, sign: float, L: int):
    H = hankel_from_coeffs(h, L)
    inner = np.eye(L) + sign * hankel_from_coeffs(u, L)
    lu = sla.lu_factor(inner)
    smin = smallest_singular_value(inner, lu)
    if smin < SIGMA_FLOOR:
        raise DomainError(f"I +- H_N(u) is numerically singular at N={L}: smallest singular value {smin:.3e}")
    X = sla.lu_solve(lu, H)
    M = np.eye(L) + H @ X - H @ H
    return log_det(M), smin


def complemented_split_det(
    alpha: float,
    branch: str = "plus_minus_half",
    N: int = 2048,
    tolerance: float = 5e-2,
    levels: int = 3,
) -> SplitResult:
    """``det[I + H(h)(I +- H(u))^{-1} H(h) - H(h)^2]`` on truncations ``N/2^(levels-1), ..., N``.

    ``alpha`` is the half-line interval length; the inner function is
    ``h = h_exp(2 alpha)``.  ``plus_minus_half`` uses ``I + H(u_{-1/2,1})``,
    ``minus_plus_half`` uses ``I - H(u_{1/2,1})``.  The truncation error
    decays slowly and roughly geometrically under doubling, so the levels are
    extrapolated with :func:`extrapolate_geometric`.

    Raises:
        AccuracyError: the extrapolation error estimate exceeds ``tolerance``.
        DomainError: the inner operator is numerically singular.
    """
    if alpha < 0:
        raise UsageError(f"alpha must be >= 0, got {alpha}")
    if branch not in BRANCHES:
        raise UsageError(f"branch must be one of {sorted(BRANCHES)}, got {branch!r}")
    N = int(N)
    if levels < 1 or N // 2 ** (levels - 1) < 8:
        raise UsageError(f"N={N} too small for {levels} levels")
    sign, beta = BRANCHES[branch]
    orders = tuple(N // 2 ** (levels - 1 - i) for i in range(levels))
    if alpha == 0:
        return SplitResult(LogDetValue(0.0), 0.0, N, orders, (0.0,) * levels, math.nan, 1.0)
    h = fourier_coeffs(make_symbol("h_exp", alpha=2 * alpha), 1, 2 * N - 1).real
    u = fourier_coeffs(make_symbol("u_jump", beta=beta), 1, 2 * N - 1).real
    raw = []
    smin = math.nan
    for L in orders:
        ld, smin = _split_logdet_at(h, u, sign, L)
        if ld.phase != 1:
            raise DomainError(f"split determinant is not positive at N={L}")
        raw.append(ld.log_abs)
    limit, err, ratio = extrapolate_geometric(raw)
    if err > tolerance:
        raise AccuracyError(
            f"split determinant error estimate {err:.3e} exceeds tolerance {tolerance:.1e}",
            previous=raw[-2] if len(raw) > 1 else None,
            last=raw[-1],
        )
    return SplitResult(LogDetValue(limit), err, N, orders, tuple(raw), ratio, smin)


@dataclass
class Diagnostics:
    """Measurements on truncated operators; no pass/fail judgement is attached.

    Attributes:
        N: truncation order.
        sigma_min: smallest singular values keyed by operator label.
        nuclear: ``{mu: {label: sum of singular values}}``.
        projection_defect: spectral norm of ``H_N(h)^3 - H_N(h)``.
        projection_defect_block: the same restricted to the leading block.
    """

    alpha: float
    n: int
    N: int
    sigma_min: dict = field(default_factory=dict)
    nuclear: dict = field(default_factory=dict)
    projection_defect: float = math.nan
    projection_defect_block: float = math.nan
    block: int = 16

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "n": self.n,
            "N": self.N,
            "sigma_min": self.sigma_min,
            "nuclear": {str(k): v for k, v in self.nuclear.items()},
            "projection_defect": self.projection_defect,
            "projection_defect_block": self.projection_defect_block,
            "block": self.block,
        }


def _hankel_of(symbol: CircleSymbol, N: int) -> np.ndarray:
    return _realify(hankel_from_coeffs(fourier_coeffs(symbol, 1, 2 * N - 1), N), tol=1e-15)


def operator_diagnostics(
    alpha: float,
    n: int,
    N: int,
    mus: Sequence[float] = (0.9, 0.99, 0.999),
    block: int = 16,
    sections: Sequence[str] = ("sigma", "nuclear", "projection"),
) -> Diagnostics:
    """Invertibility margins, nuclear-norm surrogates and the projection defect.

    * ``sigma``: smallest singular values of ``I + H_N(u_{-1/2,1})``,
      ``I - H_N(u_{1/2,1})`` and ``I + H_N(psi_full(alpha, n))``.
    * ``nuclear``: for each ``mu``, the sum of singular values of
      ``H_N(p1) H_N(p2)``, ``H_N(p2) H_N(p1)`` and ``H_N(p1 p2)`` where
      ``p1, p2`` are the pulled-back jump functions with poles ``+1, -1``.
    * ``projection``: ``||H_N(h)^3 - H_N(h)||_2`` with ``h = h_exp(alpha)``,
      and the same quantity on the leading ``block x block`` corner.
    """
    if N < 64:
        raise UsageError(f"diagnostics need N >= 64, got {N}")
    out = Diagnostics(float(alpha), int(n), int(N), block=block)
    I = np.eye(N)
    if "sigma" in sections:
        U_minus = _hankel_of(make_symbol("u_jump", beta=-0.5), N)
        U_plus = _hankel_of(make_symbol("u_jump", beta=0.5), N)
        out.sigma_min["I+H(u_-1/2)"] = float(sla.svdvals(I + U_minus)[-1])
        out.sigma_min["I-H(u_+1/2)"] = float(sla.svdvals(I - U_plus)[-1])
        if alpha > 0:
            P = _hankel_of(make_symbol("psi_full", alpha=alpha, n=n), N)
            out.sigma_min["I+H(psi)"] = float(sla.svdvals(I + P)[-1])
    if "nuclear" in sections:
        for mu in mus:
            H1 = _hankel_of(make_symbol("psi_singular", pole=1, mu=mu), N)
            H2 = _hankel_of(make_symbol("psi_singular", pole=-1, mu=mu), N)
            # p1 p2 = psi_full - p1 - p2 - 1 and constants have no Hankel part
            Hf = _hankel_of(make_symbol("psi_full", mu=mu), N)
            out.nuclear[float(mu)] = {
                "H(p1)H(p2)": float(np.sum(sla.svdvals(H1 @ H2))),
                "H(p2)H(p1)": float(np.sum(sla.svdvals(H2 @ H1))),
                "H(p1*p2)": float(np.sum(sla.svdvals(Hf - H1 - H2))),
            }
    if "projection" in sections:
        Hh = _hankel_of(make_symbol("h_exp", alpha=alpha), N)
        D = Hh @ Hh @ Hh - Hh
        out.projection_defect = float(sla.svdvals(D)[0])
        b = min(block, N)
        out.projection_defect_block = float(sla.svdvals(D[:b, :b])[0])
    return out
