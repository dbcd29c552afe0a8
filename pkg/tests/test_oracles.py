import math

import numpy as np
import pytest
from scipy import integrate, special

from ggm_evidence.distributions import RngStream
from ggm_evidence.errors import DomainError
from ggm_evidence.oracles import (
    C_BGL,
    C_GHS,
    bgl_log_marginal_p2,
    c_bgl_constant,
    c_ghs_constant,
    ghs_log_marginal_p2,
    gwishart_complete_oracle,
    wishart_log_marginal_exact,
)
from ggm_evidence.priors import horseshoe_logpdf_quad

S_EXAMPLE = np.array([[3.0, 1.2], [1.2, 2.5]])


def test_wishart_p1_by_quadrature():
    # y_i ~ N(0, 1/w), w ~ Gamma(a/2, 1/(2v))
    s, v, a, n = 4.3, 0.6, 3.0, 7

    def integrand(w):
        return math.exp(0.5 * n * math.log(w / (2 * math.pi)) - 0.5 * w * s
                        + (0.5 * a - 1) * math.log(w) - 0.5 * w / v
                        - special.gammaln(0.5 * a) - 0.5 * a * math.log(2 * v))

    val, _ = integrate.quad(integrand, 0, np.inf, epsabs=0, epsrel=1e-12)
    got = wishart_log_marginal_exact(np.array([[s]]), np.array([[v]]), a, n).log_marginal
    assert got == pytest.approx(math.log(val), abs=1e-9)


def test_wishart_oracle_no_data_and_domain():
    assert wishart_log_marginal_exact(np.zeros((3, 3)), np.eye(3), 4.0, 0).log_marginal == pytest.approx(0.0)
    with pytest.raises(DomainError):
        wishart_log_marginal_exact(np.eye(3), np.eye(3), 1.5, 2)


def test_gwishart_complete_equals_wishart():
    v = np.array([[2.0, 0.3], [0.3, 1.0]])
    a = gwishart_complete_oracle(S_EXAMPLE, v, 1.5, 6).log_marginal
    b = wishart_log_marginal_exact(S_EXAMPLE, np.linalg.inv(v), 2 * 1.5 + 3, 6).log_marginal
    assert a == pytest.approx(b)


def test_constants():
    assert c_bgl_constant()[0] == pytest.approx(2 / 3, abs=1e-10)
    mc, se = c_bgl_constant("mc", mc_draws=200_000, rng=RngStream(0))
    assert abs(mc - C_BGL) < 5 * se
    q, _ = c_ghs_constant(method="quadrature")
    assert q == pytest.approx(C_GHS, abs=1e-5)
    mc, se = c_ghs_constant(mc_draws=2_000_000, rng=RngStream(1))
    assert abs(mc - q) < 5 * se


@pytest.mark.parametrize("fn", [bgl_log_marginal_p2, ghs_log_marginal_p2])
def test_p2_oracles_symmetric_under_swap_and_sign(fn):
    swapped = S_EXAMPLE[::-1, ::-1]
    flipped = S_EXAMPLE * np.array([[1, -1], [-1, 1]])
    base = fn(S_EXAMPLE, 1.3, 8, method="quadrature").log_marginal
    assert fn(swapped, 1.3, 8, method="quadrature").log_marginal == pytest.approx(base, abs=1e-7)
    assert fn(flipped, 1.3, 8, method="quadrature").log_marginal == pytest.approx(base, abs=1e-7)


def _brute_force(s, lam, n, kind):
    """Integral over the SPD cone of likelihood times element-wise prior, divided by C."""
    s11, s12, s22 = s[0, 0], s[0, 1], s[1, 1]

    def off_density(x):
        if kind == "bgl":
            return 0.5 * lam * math.exp(-lam * abs(x))
        return math.exp(horseshoe_logpdf_quad(x, lam))

    def over_w22(x):
        # the w11 integral of (w11 w22 - x^2)^{n/2} exp(-r w11) from x^2/w22 is a
        # gamma integral; the w22 integral is left to quadrature
        r = 0.5 * (s11 + lam)
        k = 0.5 * n + 1.0
        g = lambda w22: (w22 ** (0.5 * n) * math.exp(special.gammaln(k) - k * math.log(r) - r * x * x / w22
                                                      - 0.5 * (s22 + lam) * w22 - s12 * x))
        val, _ = integrate.quad(g, 0.0, np.inf, epsabs=0, epsrel=1e-11, limit=200)
        return val * (0.5 * lam) ** 2 * off_density(x)

    # split at x = 0, where the horseshoe density has its pole
    total = sum(integrate.quad(over_w22, a, b, epsabs=0, epsrel=1e-9, limit=200)[0]
                for a, b in ((-np.inf, 0.0), (0.0, np.inf)))
    c = C_BGL if kind == "bgl" else C_GHS
    return math.log(total) - n * math.log(2 * math.pi) - math.log(c)


@pytest.mark.parametrize("kind,fn", [("bgl", bgl_log_marginal_p2), ("ghs", ghs_log_marginal_p2)])
def test_p2_oracles_against_brute_force(kind, fn):
    s = np.array([[1.4, 0.5], [0.5, 1.1]])
    lam, n = 1.0, 2
    ref = _brute_force(s, lam, n, kind)
    got = fn(s, lam, n, method="quadrature").log_marginal
    assert got == pytest.approx(ref, abs=2e-4)


@pytest.mark.parametrize("fn", [bgl_log_marginal_p2, ghs_log_marginal_p2])
def test_p2_mc_agrees_with_quadrature(fn):
    q = fn(S_EXAMPLE, 0.9, 10, method="quadrature").log_marginal
    r = fn(S_EXAMPLE, 0.9, 10, mc_draws=200_000, rng=RngStream(3))
    assert abs(r.log_marginal - q) < max(5 * r.mc_se, 1e-6)


def test_p2_oracle_domain():
    with pytest.raises(DomainError):
        bgl_log_marginal_p2(np.eye(3), 1.0, 2)
    with pytest.raises(DomainError):
        ghs_log_marginal_p2(S_EXAMPLE, 1.0, 2, quad_tol=0.0)
