"""Generic evidence estimators used for comparison.

* Harmonic mean of posterior likelihoods.
* Annealed importance sampling along the geometric path
  prior(W) * lik(W)^t, t = 0, 0.01, ..., 1, with prior draws as independence
  proposals (one Metropolis step per temperature).
* Nested sampling with prior draws constrained above the current minimum
  likelihood.

Importance weights and likelihoods are treated as plain doubles would be:
anything below the smallest normal double counts as zero, so the AIS and
nested estimates can come out as -inf in high dimension.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distributions import LOG_2PI, RngStream, as_stream, log_mean_exp
from .errors import EmptyInput, ShapeError
from .priors import (
    GWishart,
    MixingLatents,
    PriorSpec,
    Wishart,
    sample_elementwise_prior,
    sample_gwishart_prior,
    sample_wishart_bartlett,
)
from .samplers import gibbs_sweep_unrestricted, log_mean_exp_se, make_context

LOG_TINY = math.log(sys.float_info.min)  # about -708.4
N_TEMPS = 101


@dataclass
class BaselineResult:
    method: str  # "hm" | "ais" | "nested"
    log_marginal: float
    draws_used: int
    se: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "log_marginal": self.log_marginal,
            "draws_used": self.draws_used,
            "se": self.se,
            "diagnostics": self.diagnostics,
        }


def batch_loglik(omegas: np.ndarray, scatter: np.ndarray, n: int) -> np.ndarray:
    """log N(y | 0, I_n x W^{-1}) for a stack of SPD matrices, from S = y'y."""
    omegas = np.asarray(omegas, dtype=float)
    p = omegas.shape[-1]
    if n == 0:
        return np.zeros(omegas.shape[0])
    _, logdet = np.linalg.slogdet(omegas)
    tr = np.einsum("ij,kij->k", scatter, omegas)
    return 0.5 * n * logdet - 0.5 * tr - 0.5 * n * p * LOG_2PI


def _ess(logw: np.ndarray) -> float:
    logw = logw[np.isfinite(logw)]
    if logw.size == 0:
        return 0.0
    w = np.exp(logw - logw.max())
    return float(w.sum() ** 2 / np.sum(w * w))


# ---------------------------------------------------------------------------
# prior draws


class PriorPool:
    """Hands out prior draws in order, refilling in chunks.

    G-Wishart draws come from one thinned column-wise chain continued across
    chunks; BGL/GHS draws from element-wise rejection, which may give up.
    """

    def __init__(self, prior: PriorSpec, p: int, rng: RngStream, chunk: int = 1024,
                 max_tries: int = 1_000_000, thin: int = 5, burnin: int = 500):
        self.prior, self.p, self.rng = prior, p, rng
        self.chunk, self.max_tries, self.thin, self.burnin = chunk, max_tries, thin, burnin
        self.buf = np.empty((0, p, p))
        self.tries = 0
        self.failed = False
        self._state = None

    def _refill(self, k: int):
        k = max(k, self.chunk)
        pr = self.prior
        if isinstance(pr, Wishart):
            new = sample_wishart_bartlett(pr.v_matrix, pr.alpha, self.rng, k)
            self.tries += k
        elif isinstance(pr, GWishart):
            burn = self.burnin if self._state is None else 0
            new = sample_gwishart_prior(pr, k, burn, self.rng, thin=self.thin, init=self._state)
            self._state = new[-1].copy()
            self.tries += k
        else:
            new, t = sample_elementwise_prior(pr, self.p, self.rng, k, self.max_tries)
            self.tries += t
            if new is None:
                self.failed = True
                return
        self.buf = np.concatenate([self.buf, new]) if self.buf.size else new

    def take(self, k: int) -> Optional[np.ndarray]:
        while self.buf.shape[0] < k:
            self._refill(k - self.buf.shape[0])
            if self.failed:
                return None
        out, self.buf = self.buf[:k], self.buf[k:]
        return out


def _failed(method: str, pool: PriorPool, draws: int) -> BaselineResult:
    return BaselineResult(method, -math.inf, draws, math.nan,
                          {"reason": "prior_rejection_cap", "prior_tries": pool.tries})


# ---------------------------------------------------------------------------
# estimators


def harmonic_mean(loglik: np.ndarray) -> BaselineResult:
    """log f = -log_mean_exp(-loglik) over posterior draws.

    The reciprocal likelihood has infinite posterior variance unless the
    prior is much more concentrated than the likelihood, so ``se`` is often
    optimistic.
    """
    ll = np.asarray(loglik, dtype=float).ravel()
    if ll.size == 0:
        raise EmptyInput("harmonic mean needs at least one draw")
    est = -log_mean_exp(-ll)
    # draws come from a Markov chain, so use batch means
    se = log_mean_exp_se(-ll) if ll.size > 1 else math.nan
    return BaselineResult("hm", float(est), int(ll.size), se, {"ess": _ess(-ll)})


def posterior_loglik_draws(y: np.ndarray, prior: PriorSpec, m: int, burnin: int,
                           rng: RngStream) -> np.ndarray:
    """Log-likelihoods of y along an unrestricted posterior Gibbs chain."""
    from .evidence import _standardize

    y = np.asarray(y, dtype=float)
    n, p = y.shape
    x, work, corr = _standardize(y, prior)
    scatter = x.T @ x
    ctx = make_context(work, scatter, n, np.zeros((p, p)), p, p_total=p)
    lat = MixingLatents.initial(p, getattr(work, "lam", 1.0))
    states = gibbs_sweep_unrestricted(ctx, np.eye(p), lat, rng, int(burnin) + int(m))[int(burnin):]
    return batch_loglik(states, scatter, n) + corr


def ais(prior: PriorSpec, y: np.ndarray, m: int, rng: Optional[RngStream] = None,
        n_temps: int = N_TEMPS) -> BaselineResult:
    """Annealed importance sampling with prior independence proposals.

    Each of the ``m`` runs starts from a prior draw; at temperature t_k the
    weight picks up (t_k - t_{k-1}) loglik and one Metropolis step with a
    fresh prior proposal targets prior * lik^{t_k}. A run whose total weight
    is below the smallest normal double contributes zero.
    """
    rng = as_stream(rng)
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ShapeError("data must be an n x p matrix")
    n, p = y.shape
    scatter = y.T @ y
    m = int(m)
    temps = np.linspace(0.0, 1.0, n_temps)
    pool = PriorPool(prior, p, rng)
    x = pool.take(m)
    if x is None:
        return _failed("ais", pool, 0)
    ll = batch_loglik(x, scatter, n)
    logw = np.zeros(m)
    accepted = 0
    g = rng.generator
    for k in range(1, n_temps):
        logw += (temps[k] - temps[k - 1]) * ll
        if k == n_temps - 1:
            break
        prop = pool.take(m)
        if prop is None:
            return _failed("ais", pool, m * k)
        llp = batch_loglik(prop, scatter, n)
        acc = np.log(g.random(m)) < temps[k] * (llp - ll)
        ll = np.where(acc, llp, ll)
        accepted += int(acc.sum())
    logw = np.where(logw < LOG_TINY, -math.inf, logw)
    diag = {"ess": _ess(logw), "acceptance": accepted / max(m * (n_temps - 2), 1),
            "underflowed": int(np.sum(~np.isfinite(logw))), "prior_tries": pool.tries}
    if not np.any(np.isfinite(logw)):
        return BaselineResult("ais", -math.inf, m * (n_temps - 1), math.nan, diag)
    est = log_mean_exp(logw)
    w = np.exp(logw - np.max(logw))
    se = float(w.std(ddof=1) / math.sqrt(m) / w.mean()) if m > 1 else math.nan
    return BaselineResult("ais", float(est), m * (n_temps - 1), se, diag)


def nested_sampling(prior: PriorSpec, y: np.ndarray, m: int, rng: Optional[RngStream] = None,
                    max_tries: int = 100_000) -> BaselineResult:
    """Nested sampling with ``m`` live points and ``m`` replacement iterations.

    Prior draws whose likelihood is below the smallest normal double are
    dropped before the run; the surviving fraction is taken as the initial
    prior mass. Each iteration removes the worst live point, credits it with
    the shell of prior mass X_{i-1} - X_i (X_i = X_0 (k/(k+1))^i for k live
    points) and replaces it by a prior draw of higher likelihood. The live
    points left at the end share the remaining mass.
    """
    rng = as_stream(rng)
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ShapeError("data must be an n x p matrix")
    n, p = y.shape
    scatter = y.T @ y
    m = int(m)
    pool = PriorPool(prior, p, rng)
    x = pool.take(m)
    if x is None:
        return _failed("nested", pool, 0)
    ll = batch_loglik(x, scatter, n)
    live = ll[ll >= LOG_TINY]
    k = live.size
    diag = {"dropped": int(m - k), "prior_tries": pool.tries}
    if k == 0:
        return BaselineResult("nested", -math.inf, m, math.nan, diag)
    log_x = math.log(k / m)
    log_shrink = math.log(k / (k + 1.0))
    # log(1 - k/(k+1)): each shell is X_{i-1} / (k + 1)
    log_shell_frac = -math.log(k + 1.0)
    contrib_w = []
    contrib_l = []
    draws = m
    stopped = "iterations"
    for _ in range(m):
        worst = int(np.argmin(live))
        lmin = live[worst]
        if live.max() <= lmin:
            stopped = "plateau"
            break
        contrib_w.append(log_x + log_shell_frac)
        contrib_l.append(lmin)
        log_x += log_shrink
        new = None
        tries = 0
        while tries < max_tries:
            cand = pool.take(32)
            if cand is None:
                break
            lc = batch_loglik(cand, scatter, n)
            tries += 32
            hit = np.flatnonzero(lc > lmin)
            if hit.size:
                new = lc[hit[0]]
                tries += int(hit[0]) + 1 - 32
                break
        draws += tries
        if new is None:
            stopped = "constrained_proposal_failed"
            break
        live[worst] = new
    # each remaining live point holds X / k of the prior mass
    log_w = np.concatenate([np.array(contrib_w), np.full(live.size, log_x - math.log(live.size))])
    log_l = np.concatenate([np.array(contrib_l), live])
    log_z = float(np.logaddexp.reduce(log_w + log_l))
    post = np.exp(log_w + log_l - log_z)
    h = float(max(np.sum(post * (log_l - log_z)), 0.0))
    se = math.sqrt(h / k)
    diag.update({"stopped": stopped, "information": h, "iterations": len(contrib_w)})
    if not np.isfinite(log_z):
        return BaselineResult("nested", -math.inf, draws, math.nan, diag)
    return BaselineResult("nested", log_z, draws, se, diag)
