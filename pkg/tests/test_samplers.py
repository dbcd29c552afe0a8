import math

import numpy as np
import pytest

from ggm_evidence.distributions import RngStream, gamma_logpdf, normal_logpdf
from ggm_evidence.errors import DomainError, NotPositiveDefinite
from ggm_evidence.graphs import banded_graph
from ggm_evidence.priors import Bgl, ColumnSummary, Ghs, GWishart, MixingLatents, Wishart
from ggm_evidence.samplers import (
    chib_column_density,
    gibbs_sweep_restricted,
    gibbs_sweep_unrestricted,
    log_mean_exp_se,
    make_context,
)


def data(n, p, seed):
    return np.random.default_rng(seed).standard_normal((n, p))


def batch_mean_se(x, n_batches=20):
    b = np.array_split(np.asarray(x), n_batches)
    means = np.array([bb.mean(axis=0) for bb in b])
    return means.mean(axis=0), means.std(axis=0, ddof=1) / math.sqrt(n_batches)


def test_wishart_gibbs_matches_conjugate_posterior_mean():
    p, n, alpha = 3, 15, 5.0
    y = data(n, p, 1)
    s = y.T @ y
    ctx = make_context(Wishart(np.eye(p), alpha), s, n, np.zeros((p, p)), p)
    draws = gibbs_sweep_unrestricted(ctx, np.eye(p), MixingLatents.initial(p), RngStream(2), 40_000)[2000:]
    mean, se = batch_mean_se(draws)
    target = (alpha + n) * np.linalg.inv(np.eye(p) + s)
    assert np.all(np.abs(mean - target) < 5 * se + 1e-12)


@pytest.mark.parametrize("prior", [Bgl(1.0), Ghs(1.0)])
def test_scale_mixture_chains_stay_spd(prior):
    p = 5
    y = data(30, p, 3)
    ctx = make_context(prior, y.T @ y, 30, np.zeros((p, p)), p)
    lat = MixingLatents.initial(p, 1.0)
    draws = gibbs_sweep_unrestricted(ctx, np.eye(p), lat, RngStream(4), 500)
    assert np.all(np.linalg.eigvalsh(draws)[:, 0] > 0)
    np.testing.assert_array_equal(draws, np.swapaxes(draws, 1, 2))


def test_gwishart_chain_keeps_zero_pattern():
    p = 5
    g = banded_graph(p, 1)
    y = data(20, p, 5)
    ctx = make_context(GWishart(g, np.eye(p), 2.0), y.T @ y, 20, np.zeros((p, p)), p)
    draws = gibbs_sweep_unrestricted(ctx, np.eye(p), MixingLatents.initial(p), RngStream(6), 300)
    off = ~g.mask() & ~np.eye(p, dtype=bool)
    assert np.all(draws[:, off] == 0.0)
    assert np.all(np.linalg.eigvalsh(draws)[:, 0] > 0)


def test_unrestricted_rejects_non_spd_start():
    ctx = make_context(Wishart(np.eye(2), 3.0), np.eye(2), 1, np.zeros((2, 2)), 2)
    with pytest.raises(NotPositiveDefinite):
        gibbs_sweep_unrestricted(ctx, np.array([[1.0, 2.0], [2.0, 1.0]]), MixingLatents.initial(2),
                                 RngStream(0))


def test_restricted_sweep_pins_column():
    p = 4
    y = data(25, p, 7)
    ctx = make_context(Bgl(1.0), y.T @ y, 25, np.zeros((p, p)), p)
    beta = np.array([0.1, -0.2, 0.05])
    om, q, w = gibbs_sweep_restricted(ctx, 2 * np.eye(p), ColumnSummary(3, beta, 2.0),
                                      MixingLatents.initial(p), RngStream(8), 200)
    np.testing.assert_array_equal(om[:3, 3], beta)
    assert np.all(w > q)
    assert np.all(np.linalg.eigvalsh(om) > 0)


def test_chib_single_column_is_exact():
    y = data(10, 1, 9)
    s = y.T @ y
    ctx = make_context(Wishart(np.eye(1), 2.0), s, 10, np.zeros((1, 1)), 1)
    res, nxt, shift = chib_column_density(ctx, np.eye(1), MixingLatents.initial(1), 100, 10, RngStream(0))
    shape = 0.5 * (10 + 2.0 - 1 - 1) + 1.0
    rate = 0.5 * (s[0, 0] + 1.0)
    assert res.summary.diag == pytest.approx(shape / rate)
    assert res.log_iv == pytest.approx(gamma_logpdf(shape / rate, shape, rate))
    assert res.se == 0.0 and nxt.shape == (0, 0)


def test_chib_column_outputs():
    p = 3
    y = data(20, p, 10)
    ctx = make_context(Wishart(np.eye(p), 5.0), y.T @ y, 20, np.zeros((p, p)), p)
    lat = MixingLatents.initial(p)
    res, nxt, shift = chib_column_density(ctx, np.eye(p), lat, 2000, 200, RngStream(11))
    assert nxt.shape == (2, 2) and shift.shape == (2, 2)
    assert np.all(np.linalg.eigvalsh(nxt) > 0)
    assert 0 < res.indicator_fraction <= 1
    assert math.isfinite(res.log_iv) and res.se > 0
    assert res.ll_trace.shape == (2000,)
    with pytest.raises(DomainError):
        chib_column_density(ctx, np.eye(2), lat, 10, 0, RngStream(0))


def test_log_mean_exp_se():
    assert log_mean_exp_se(np.zeros(100)) == 0.0
    assert log_mean_exp_se(np.full(10, -np.inf)) == math.inf
    v = np.random.default_rng(0).normal(size=10_000)
    se = log_mean_exp_se(v)
    x = np.exp(v)
    assert se == pytest.approx(x.std() / math.sqrt(x.size) / x.mean(), rel=0.5)


def test_streams_make_runs_reproducible():
    p = 3
    y = data(10, p, 12)
    ctx = make_context(Ghs(0.7), y.T @ y, 10, np.zeros((p, p)), p)
    a = gibbs_sweep_unrestricted(ctx, np.eye(p), MixingLatents.initial(p, 0.7), RngStream(5), 50)
    b = gibbs_sweep_unrestricted(ctx, np.eye(p), MixingLatents.initial(p, 0.7), RngStream(5), 50)
    np.testing.assert_array_equal(a, b)


def test_wishart_column_density_matches_conjugate_posterior():
    # under W(Sigma, a) the Schur complement of the last entry is independent of
    # the last column, and omega_22 ~ Gamma(a/2, 1/(2 s22)),
    # omega_12 | omega_22 ~ N(omega_22 s12/s22, omega_22 (s11 - s12^2/s22))
    p, n, alpha = 2, 12, 4.0
    y = data(n, p, 13)
    s = y.T @ y
    ctx = make_context(Wishart(np.eye(p), alpha), s, n, np.zeros((p, p)), p)
    res, _, _ = chib_column_density(ctx, np.eye(p), MixingLatents.initial(p), 20_000, 1000, RngStream(14))
    b, w = res.summary.off_diag[0], res.summary.diag
    sig = np.linalg.inv(np.eye(p) + s)
    a = alpha + n
    exact = (gamma_logpdf(w, 0.5 * a, 0.5 / sig[1, 1])
             + normal_logpdf(b, w * sig[0, 1] / sig[1, 1], w * (sig[0, 0] - sig[0, 1] ** 2 / sig[1, 1])))
    assert res.log_iv == pytest.approx(exact, abs=max(0.02, 5 * res.se))
