import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from sinegap.errors import AccuracyError, DomainError, UsageError
from sinegap.symbols import (
    fourier_coeffs,
    make_symbol,
    moebius_transform,
    moment_function,
    moments,
    mu_rho_params,
    wiener_hopf_factor_even,
)

GRID = np.linspace(-np.pi + 1e-3, np.pi - 1e-3, 996)  # avoids theta = 0


def quad_coeff(sym, k):
    """Brute-force Fourier coefficient, splitting at the jumps."""
    cuts = sorted({-np.pi, np.pi, *[s.theta for s in sym.singularities if abs(s.theta) < np.pi]})
    if any(s.type == "branch" for s in sym.singularities):
        cuts = sorted({*cuts, 0.0})

    def part(f):
        with warnings.catch_warnings():
            # round-off warnings near jumps do not affect the 1e-10 comparisons
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            return sum(
                integrate.quad(f, lo, hi, limit=400, epsabs=1e-14)[0] for lo, hi in zip(cuts[:-1], cuts[1:])
            )

    re = part(lambda th: (sym.at(th) * np.exp(-1j * k * th)).real)
    im = part(lambda th: (sym.at(th) * np.exp(-1j * k * th)).imag)
    return (re + 1j * im) / (2 * np.pi)


# ---------------------------------------------------------------------------
# construction and evaluation


def test_u_jump_value_opposite_the_jump():
    assert make_symbol("u_jump", beta=-0.5, tau=1).at(np.pi) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("beta,tau", [(-0.5, 1), (0.5, 1), (0.3, -1), (1.7, -1)])
def test_u_jump_unimodular(beta, tau):
    assert np.allclose(np.abs(make_symbol("u_jump", beta=beta, tau=tau).at(GRID)), 1, atol=1e-14)


def test_u_jump_mean_at_jump():
    u = make_symbol("u_jump", beta=-0.5, tau=1)
    left, right = u.at(-1e-12), u.at(1e-12)
    assert u.at(0.0) == pytest.approx((left + right) / 2, abs=1e-10)


@pytest.mark.parametrize("alpha", [0.5, 2.0, 16.0])
def test_h_exp_tangent_form(alpha):
    h = make_symbol("h_exp", alpha=alpha)
    t = np.exp(1j * GRID)
    direct = np.exp(-alpha * (1 - t) / (2 * (1 + t)))
    assert np.allclose(h.at(GRID), direct, atol=1e-12)
    assert np.allclose(np.abs(h.at(GRID)), 1, atol=1e-13)


@pytest.mark.parametrize("alpha,n", [(1, 4), (2, 4), (4, 32)])
def test_psi_full_unimodular_and_product(alpha, n):
    psi = make_symbol("psi_full", alpha=alpha, n=n)
    mu = psi.param("mu")
    g = GRID[np.abs(GRID) > 1e-3]
    assert np.allclose(np.abs(psi.at(g)), 1, atol=1e-13)
    # pulled-back jump functions multiply to psi_full
    p1 = moebius_transform(make_symbol("u_jump", beta=-0.5, tau=1), mu, 1, "inverse")
    p2 = moebius_transform(make_symbol("u_jump", beta=0.5, tau=1), mu, -1, "inverse")
    assert np.allclose(psi.at(g), p1.at(g) * p2.at(g), atol=1e-13)


@pytest.mark.parametrize("alpha,n", [(1, 4), (2, 8)])
def test_psi_full_square(alpha, n):
    psi = make_symbol("psi_full", alpha=alpha, n=n)
    mu = psi.param("mu")
    t = np.exp(1j * GRID)
    # square roots are branch-dependent; the square is not
    moebius = (t - mu) / (1 - mu * t)
    sq = -(moebius**-1) * ((t + mu) / (1 + mu * t))
    assert np.allclose(psi.at(GRID) ** 2, sq, atol=1e-12)


@pytest.mark.parametrize("pole,zero_at", [(1, np.pi), (-1, 0.0)])
def test_psi_singular_vanishes_opposite_its_jump(pole, zero_at):
    ps = make_symbol("psi_singular", pole=pole, alpha=2, n=4)
    assert abs(ps.at(zero_at)) < 1e-14


@pytest.mark.parametrize("pole,beta,tau", [(1, -0.5, 1), (-1, 0.5, -1)])
def test_psi_singular_is_pulled_back_jump(pole, beta, tau):
    ps = make_symbol("psi_singular", pole=pole, mu=0.7)
    ref = moebius_transform(make_symbol("u_jump", beta=beta, tau=1), 0.7, tau, "inverse")
    assert np.allclose(ps.at(GRID), ref.at(GRID) - 1, atol=1e-13)


def test_psi_singular_pole_one_closed_form():
    mu = 0.6
    ps = make_symbol("psi_singular", pole=-1, mu=mu)
    t = np.exp(1j * GRID)
    assert np.allclose(ps.at(GRID), np.sqrt((t + mu) / (1 + mu * t)) - 1, atol=1e-13)


def test_arc_indicator_values():
    gamma = 0.4
    a = make_symbol("arc_indicator", gamma=gamma)
    vals = a.at(GRID)
    assert set(np.unique(vals.real)) <= {0.0, 1.0}
    assert np.all(vals[np.abs(GRID) < gamma] == 0)
    assert np.all(vals[np.abs(GRID) > gamma] == 1)


def test_eta_xi_normalization():
    eta = make_symbol("eta", beta=0.5, tau=1)
    xi = make_symbol("xi", beta=0.5, tau=1)
    assert fourier_coeffs(eta, 0, 0)[0] == pytest.approx(1.0)
    assert np.allclose(fourier_coeffs(eta, -3, -1), 0)
    assert fourier_coeffs(xi, 0, 0)[0] == pytest.approx(1.0)
    assert np.allclose(fourier_coeffs(xi, 1, 3), 0)


@pytest.mark.parametrize(
    "kind,params",
    [
        ("arc_indicator", {"gamma": 0.0}),
        ("arc_indicator", {"gamma": 4.0}),
        ("u_jump", {"beta": 0.5, "tau": 2}),
        ("rational_even_r", {"r": 1.0}),
        ("psi_singular", {"pole": 2, "mu": 0.5}),
        ("psi_singular", {"pole": 1, "mu": 1.0}),
        ("h_exp", {"alpha": -1.0}),
        ("nonsense", {}),
    ],
)
def test_out_of_range_parameters(kind, params):
    with pytest.raises(UsageError):
        make_symbol(kind, **params)


# ---------------------------------------------------------------------------
# Fourier coefficients


def test_arc_indicator_coefficients():
    alpha, n = 1.0, 4
    c = fourier_coeffs(make_symbol("arc_indicator", gamma=alpha / n), -5, 5)
    ks = np.arange(-5, 6)
    comp = -c
    comp[5] += 1  # coefficients of 1 - arc_indicator
    expect = np.where(ks == 0, alpha / (np.pi * n), np.sin(ks * alpha / n) / (np.pi * np.where(ks == 0, 1, ks)))
    assert np.allclose(comp, expect, atol=1e-15)


def test_constant_symbol():
    c = fourier_coeffs(make_symbol("smooth_user", coefficients=[1.0]), -3, 3)
    assert np.array_equal(c, np.eye(7)[3])


def test_u_jump_minus_half_coefficients_against_quadrature():
    u = make_symbol("u_jump", beta=-0.5, tau=1)
    c = fourier_coeffs(u, -4, 4)
    assert c[4] == pytest.approx(2 / np.pi, abs=1e-15)
    assert np.allclose(c, 2 / (np.pi * (2 * np.arange(-4, 5) + 1)), atol=1e-15)
    for k in (-3, 0, 2):
        assert abs(c[k + 4] - quad_coeff(u, k)) < 1e-10


@pytest.mark.parametrize(
    "kind,params",
    [
        ("psi_full", {"alpha": 2, "n": 4}),
        ("psi_singular", {"pole": 1, "alpha": 2, "n": 4}),
        ("psi_singular", {"pole": -1, "alpha": 2, "n": 4}),
        ("h_rational", {"alpha": 2, "n": 4}),
        ("rational_even_r", {"r": 0.8}),
        ("psi_r", {"r": 0.8}),
        ("sign_chi", {}),
        ("eta", {"beta": 0.5, "tau": -1}),
        ("u_jump", {"beta": 0.3, "tau": -1}),
    ],
)
def test_coefficients_against_quadrature(kind, params):
    sym = make_symbol(kind, **params)
    c = fourier_coeffs(sym, -3, 3)
    q = np.array([quad_coeff(sym, k) for k in range(-3, 4)])
    assert np.max(np.abs(c - q)) < 1e-10


@pytest.mark.parametrize("alpha", [0.0, 1.0, 3.0, 16.0])
def test_h_exp_coefficients_against_laguerre(alpha):
    c = fourier_coeffs(make_symbol("h_exp", alpha=alpha), -2, 60)
    assert np.all(c[:2] == 0)
    if alpha == 0:
        ref = np.eye(61)[0]
    else:
        with mp.workdps(30):
            ref = [float(mp.e ** (-alpha / 2) * (-1) ** k * mp.laguerre(k, -1, alpha)) for k in range(61)]
    assert np.allclose(c[2:], ref, atol=1e-13)


@pytest.mark.parametrize("alpha", [1.0, 8.0])
def test_h_exp_coefficients_against_cauchy_integral(alpha):
    # h is analytic in the disc: h_k = mean of h(r e^{i th}) r^{-k} e^{-ik th} on |t| = r
    r, M = 0.5, 512
    t = r * np.exp(2j * np.pi * np.arange(M) / M)
    vals = np.exp(-alpha * (1 - t) / (2 * (1 + t)))
    ref = np.fft.fft(vals)[:12] / M / r ** np.arange(12)
    assert np.allclose(fourier_coeffs(make_symbol("h_exp", alpha=alpha), 0, 11), ref, atol=1e-12)


def test_generic_engine_matches_closed_form():
    # mu = 0 Moebius wrapper hides the closed form and forces the sawtooth/FFT engine
    arc = make_symbol("arc_indicator", gamma=0.7)
    wrapped = moebius_transform(arc, 0.0, 1)
    assert np.allclose(fourier_coeffs(wrapped, -20, 20), fourier_coeffs(arc, -20, 20), atol=1e-12)
    u = make_symbol("u_jump", beta=0.25, tau=-1)
    # a non-constant piece between jumps converges only like 1/M^2 on the FFT grid
    got = fourier_coeffs(moebius_transform(u, 0.0, 1), -10, 10, tol=1e-10)
    assert np.allclose(got, fourier_coeffs(u, -10, 10), atol=1e-10)


def test_generic_engine_on_moebius_jump():
    mu = 0.5
    pulled = moebius_transform(make_symbol("u_jump", beta=-0.5, tau=1), mu, 1, "inverse")
    ref = make_symbol("psi_singular", pole=1, mu=mu)
    # the pulled-back jump leaves a derivative kink, so ask for a looser tolerance
    got = fourier_coeffs(pulled, -8, 8, tol=1e-10)
    want = fourier_coeffs(ref, -8, 8)
    want[8] += 1
    assert np.allclose(got, want, atol=1e-11)


def test_even_real_symbols_give_real_symmetric_coefficients():
    for sym in (make_symbol("arc_indicator", gamma=0.3), make_symbol("rational_even_r", r=0.6)):
        c = fourier_coeffs(sym, -12, 12)
        assert np.all(c.imag == 0)
        assert np.allclose(c, c[::-1], atol=1e-15)


def test_unresolvable_symbol_raises_accuracy_error():
    # discontinuous with no declared jump, so refinement cannot converge
    sym = make_symbol("cosine_function", func=lambda c: np.where(c > 0.3, 1.0, 0.0))
    with pytest.raises(AccuracyError) as info:
        fourier_coeffs(sym, 0, 4)
    assert info.value.previous is not None and info.value.last is not None


def test_k_range_validation():
    with pytest.raises(UsageError):
        fourier_coeffs(make_symbol("sign_chi"), 3, 2)


# ---------------------------------------------------------------------------
# Moebius transform


def test_moebius_identity():
    sym = make_symbol("psi_r", r=0.7)
    assert np.allclose(moebius_transform(sym, 0.0, 1).at(GRID), sym.at(GRID), atol=1e-15)


@pytest.mark.parametrize("tau", [1, -1])
def test_moebius_round_trip(tau):
    sym = make_symbol("rational_even_r", r=0.5)
    mu = 0.8
    fwd = moebius_transform(sym, mu, tau, "forward")
    t = np.exp(1j * GRID)
    back_pts = (t / tau - mu) / (1 - mu * t / tau)
    # forward evaluated at the inverse-mapped points gives back the original values
    assert np.allclose(fwd(back_pts), sym(t), atol=1e-13)


def test_moebius_of_power_is_h_rational():
    alpha, n = 2.0, 4
    _, mu = mu_rho_params(alpha, n)
    tn = make_symbol("smooth_user", coefficients=[0, 0, 0, 0, 1])
    assert np.allclose(moebius_transform(tn, mu, 1).at(GRID), make_symbol("h_rational", alpha=alpha, n=n).at(GRID), atol=1e-13)


def test_moebius_inverse_jump_at_minus_one():
    _, mu = mu_rho_params(2.0, 4)
    pulled = moebius_transform(make_symbol("u_jump", beta=-0.5, tau=1), mu, 1, "inverse")
    val = pulled.at(np.pi)
    assert abs(val) == pytest.approx(1.0)
    # square equals ((-1 - mu)/(1 + mu))^(-1) = -1, and psi_singular(+1) = val - 1 vanishes there
    assert val**2 == pytest.approx(-1 / ((-1 - mu) / (1 + mu)))
    assert val == pytest.approx(1.0, abs=1e-14)


def test_moebius_validation():
    with pytest.raises(UsageError):
        moebius_transform(make_symbol("sign_chi"), 1.0)
    with pytest.raises(UsageError):
        moebius_transform(make_symbol("sign_chi"), 0.5, 1, "sideways")


# ---------------------------------------------------------------------------
# Wiener-Hopf factorization


def test_factor_smooth_example():
    a = make_symbol("smooth_user", coefficients=[0.5, 1.25, 0.5], offset=-1)
    f = wiener_hopf_factor_even(a)
    assert f.G == pytest.approx(1.0, abs=1e-13)
    c = fourier_coeffs(f.a_plus, 0, 4)
    assert np.allclose(c, [1, 0.5, 0, 0, 0], atol=1e-13)
    assert np.max(np.abs(f.reconstruct(GRID) - a.at(GRID))) < 1e-10


def test_factor_constant():
    f = wiener_hopf_factor_even(make_symbol("smooth_user", coefficients=[2.5]))
    assert f.G == pytest.approx(2.5)
    assert np.allclose(fourier_coeffs(f.a_plus, 0, 3), [1, 0, 0, 0])


@pytest.mark.parametrize("alpha,n", [(1.0, 4), (2.0, 8)])
def test_factor_reciprocal_rational_symbol(alpha, n):
    _, mu = mu_rho_params(alpha, n)
    c = make_symbol("rational_even_r", r=mu, power=-1)
    f = wiener_hopf_factor_even(c)
    assert f.G == pytest.approx(1.0, abs=1e-12)
    t = np.exp(1j * GRID)
    assert np.allclose(f.a_plus.at(GRID), np.sqrt((1 + mu * t) / (1 - mu * t)), atol=1e-10)
    assert f.a_plus.at(0.0) == pytest.approx(2 ** 0 * np.sqrt((1 + mu) / (1 - mu)))
    # psi times sign_chi is the full psi
    assert np.allclose(fourier_coeffs(f.psi_chi, -6, 6), fourier_coeffs(make_symbol("psi_full", alpha=alpha, n=n), -6, 6), atol=1e-10)


def test_a_plus_at_zero_is_one():
    f = wiener_hopf_factor_even(make_symbol("rational_even_r", r=0.4))
    assert fourier_coeffs(f.a_plus, 0, 0)[0] == 1.0


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-0.3, 0.3), min_size=1, max_size=4), st.floats(0.5, 3.0))
def test_factor_random_positive_even_polynomials(tail, scale):
    # a_0 dominates, so the symbol is positive
    coeffs = np.array(tail)
    a0 = scale + 2 * np.sum(np.abs(coeffs)) + 0.1
    full = np.concatenate([coeffs[::-1], [a0], coeffs])
    a = make_symbol("smooth_user", coefficients=full, offset=-len(coeffs))
    f = wiener_hopf_factor_even(a)
    assert np.max(np.abs(f.reconstruct(GRID) - a.at(GRID))) < 1e-10
    assert np.allclose(np.abs(f.psi.at(GRID)), 1, atol=1e-12)


def test_factor_rejects_bad_symbols():
    with pytest.raises(DomainError):
        wiener_hopf_factor_even(make_symbol("sign_chi"))
    with pytest.raises(DomainError):
        wiener_hopf_factor_even(make_symbol("smooth_user", coefficients=[0.5, 1.0, 0.5], offset=-1))
    with pytest.raises(DomainError):
        wiener_hopf_factor_even(make_symbol("arc_indicator", gamma=0.3))


def test_psi_r_tends_to_sign_chi():
    g = GRID[(np.abs(GRID) > 0.1) & (np.abs(np.abs(GRID) - np.pi) > 0.1)]
    chi = make_symbol("sign_chi").at(g)
    errs = [np.max(np.abs(make_symbol("psi_r", r=r).at(g) - chi)) for r in (0.9, 0.99, 0.999)]
    assert errs[0] > errs[1] > errs[2]


def test_psi_r_is_factorization_ratio():
    r = 0.7
    f = wiener_hopf_factor_even(make_symbol("rational_even_r", r=r))
    assert np.allclose(f.psi.at(GRID), make_symbol("psi_r", r=r).at(GRID), atol=1e-12)


# ---------------------------------------------------------------------------
# moments and parameters


def test_moments_of_constant():
    b = moments(moment_function("constant", value=1.0), 3)
    assert b[0] == pytest.approx(2 / np.pi, rel=1e-13)
    assert abs(b[1]) < 1e-15
    assert b[2] == pytest.approx(8 / (3 * np.pi), rel=1e-12)


def test_moments_of_x():
    b = moments(moment_function("polynomial", coefficients=[0.0, 1.0]), 2)
    assert b[1] == pytest.approx(4 / (3 * np.pi), rel=1e-12)


@pytest.mark.parametrize("alpha,n", [(1.0, 4), (2.0, 3)])
def test_truncated_moments_scale(alpha, n):
    rho, _ = mu_rho_params(alpha, n)
    trunc = moments(moment_function("truncated_sqrt", rho=rho), 6)
    full = moments(moment_function("b_alpha_n", alpha=alpha, n=n), 6)
    assert np.allclose(trunc, rho ** np.arange(1, 7) * full, rtol=1e-11)


def test_endpoint_moments_closed_form():
    # b = sqrt((1+x)/(1-x)): b_1 = 1, b_2 = 1, b_3 = 2 (integrals of (1+x)/sqrt(1-x^2) x^k)
    b = moments(moment_function("from_b0", b0=lambda x: np.ones_like(np.asarray(x, dtype=float))), 3)
    assert np.allclose(b, [1.0, 1.0, 2.0], rtol=1e-12)


def test_extended_moments_agree():
    b = moment_function("b_alpha_n", alpha=1.0, n=4)
    d = moments(b, 5)
    e = moments(b, 5, precision="extended")
    assert np.allclose(d, [float(x) for x in e], rtol=1e-12)


def test_moments_validation():
    with pytest.raises(UsageError):
        moments(moment_function("constant", value=1.0), 0)


def test_mu_rho_exact():
    # alpha/(2n) = pi/3
    rho, mu = mu_rho_params(2 * math.pi / 3, 1)
    assert rho == pytest.approx(0.5, abs=1e-15)
    assert mu == pytest.approx(2 - math.sqrt(3), abs=1e-15)


@pytest.mark.parametrize("alpha,n", [(1.0, 1), (2.0, 7), (5.0, 100)])
def test_mu_rho_consistency(alpha, n):
    rho, mu = mu_rho_params(alpha, n)
    assert 0 < rho < 1 and 0 < mu < 1
    assert rho == pytest.approx(2 * mu / (1 + mu * mu), rel=1e-14)


def test_mu_asymptotics():
    alpha = 2.0
    errs = [abs(mu_rho_params(alpha, n)[1] - (1 - alpha / (2 * n))) for n in (50, 100, 200)]
    # second-order remainder: error drops by ~4 per doubling
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_mu_rho_domain():
    with pytest.raises(DomainError):
        mu_rho_params(4.0, 1)
    with pytest.raises(UsageError):
        mu_rho_params(-1.0, 3)
