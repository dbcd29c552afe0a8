"""Posterior block Gibbs samplers and the per-column conditional density estimate.

A telescoping step works on a ``j x j`` working precision (the Schur
complement left after fixing the columns above ``j``) together with the
fixed shift ``F`` that maps it back to the original entries. The
conditional posterior density of the last column at its posterior mean
is estimated in two blocks: the off-diagonal part by averaging the
Gaussian full conditionals recorded along an unrestricted chain, the
diagonal part by averaging shifted gamma densities along a chain that holds
the off-diagonal part fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .distributions import (
    RngStream,
    gamma_logpdf,
    log_mean_exp,
    mvn_logpdf_precision,
    shifted_trunc_gamma_logpdf,
)
from .errors import DegenerateIndicator, DomainError, NotPositiveDefinite
from .linalg import spd_check
from .priors import Bgl, ColumnSummary, Ghs, GWishart, MixingLatents, PriorSpec, Wishart

N_BATCHES = 20


@dataclass
class TelescopeContext:
    """Everything the samplers need at one telescoping step.

    ``scatter``, ``v_matrix``, ``adj`` may be the full p x p arrays; only the
    leading ``step x step`` block is used. ``shift`` is the fixed shift of the
    working block (original entries = working entries + shift).
    """

    step: int
    scatter: np.ndarray
    shift: np.ndarray
    n: int
    kind: int
    lam: float
    shape: float
    v_matrix: np.ndarray
    adj: np.ndarray

    def free_mask(self) -> np.ndarray:
        j = self.step - 1
        if self.kind == K.GWISHART:
            return self.adj[:j, j].astype(bool)
        return np.ones(j, dtype=bool)

    def diag_rate(self) -> float:
        j = self.step - 1
        s = self.scatter[j, j]
        if self.kind == K.WISHART:
            return 0.5 * (s + 1.0)
        if self.kind == K.GWISHART:
            return 0.5 * (s + self.v_matrix[j, j])
        return 0.5 * (s + self.lam)


def make_context(prior: PriorSpec, scatter: np.ndarray, n: int, shift: np.ndarray, step: int,
                 p_total: Optional[int] = None) -> TelescopeContext:
    """Context for ``prior``; Wishart priors are assumed standardised to V = I."""
    p = scatter.shape[0]
    p_total = p if p_total is None else p_total
    if isinstance(prior, Wishart):
        kind, lam = K.WISHART, 0.0
        shape = 0.5 * (n + prior.alpha - p_total - 1) + 1.0
        v = np.eye(p)
        adj = np.ones((p, p), dtype=np.int64)
    elif isinstance(prior, (Bgl, Ghs)):
        kind = K.BGL if isinstance(prior, Bgl) else K.GHS
        lam = float(prior.lam)
        shape = 0.5 * n + 1.0
        v = np.eye(p)
        adj = np.ones((p, p), dtype=np.int64)
    elif isinstance(prior, GWishart):
        kind, lam = K.GWISHART, 0.0
        shape = prior.alpha + 0.5 * n + 1.0
        v = prior.v_matrix
        adj = np.asarray(prior.graph.adj, dtype=np.int64)
    else:
        raise DomainError(f"unknown prior {prior!r}")
    return TelescopeContext(step, np.ascontiguousarray(scatter, dtype=float),
                            np.ascontiguousarray(shift, dtype=float), int(n), kind, lam, float(shape),
                            np.ascontiguousarray(v, dtype=float), np.ascontiguousarray(adj))


@dataclass
class ChibColumnResult:
    summary: ColumnSummary
    log_iv: float
    log_iv_offdiag: float
    log_iv_diag: float
    se: float
    c_samples_used: int
    indicator_fraction: float
    ll_trace: np.ndarray = field(repr=False)
    free: np.ndarray = field(repr=False)


def log_mean_exp_se(values: np.ndarray, n_batches: int = N_BATCHES) -> float:
    """Batch-means standard error of log_mean_exp(values) (delta method)."""
    v = np.asarray(values, dtype=float)
    top = np.max(v)
    if not np.isfinite(top):
        return math.inf
    x = np.exp(v - top)
    mean = x.mean()
    nb = min(n_batches, x.size)
    if nb < 2 or mean <= 0:
        return 0.0 if mean > 0 else math.inf
    size = x.size // nb
    batches = x[: size * nb].reshape(nb, size).mean(axis=1)
    return float(batches.std(ddof=1) / math.sqrt(nb) / mean)


def _check_state(omega: np.ndarray):
    if not spd_check(omega).is_spd:
        raise NotPositiveDefinite("working precision is not positive definite")


def gibbs_sweep_unrestricted(ctx: TelescopeContext, omega: np.ndarray, latents: MixingLatents,
                             rng: RngStream, n_sweeps: int = 1) -> np.ndarray:
    """Full sweeps over every column of the working block; returns the states visited."""
    om = np.array(omega, dtype=float)
    _check_state(om)
    out = np.empty((int(n_sweeps),) + om.shape)
    K.checked(K.run_posterior_sweeps, om, ctx.scatter, ctx.shift, latents.tau, latents.t2, latents.nu,
                           ctx.v_matrix, ctx.adj, ctx.kind, ctx.lam, ctx.shape, int(n_sweeps),
                           rng.next_seed(), out)
    return out


def gibbs_sweep_restricted(ctx: TelescopeContext, omega: np.ndarray, fixed_col: ColumnSummary,
                           latents: MixingLatents, rng: RngStream, n_sweeps: int = 1):
    """Sweeps with the off-diagonal part of the last column fixed at ``fixed_col``.

    Returns (final state, shifts b' P^{-1} b, diagonal draws).
    """
    om = np.array(omega, dtype=float)
    d1 = om.shape[0] - 1
    beta = np.asarray(fixed_col.off_diag, dtype=float)
    om[:d1, d1] = beta
    om[d1, :d1] = beta
    _check_state(om)
    q = np.empty(int(n_sweeps))
    w = np.empty(int(n_sweeps))
    keep = np.empty((d1, d1))
    K.checked(K.run_restricted, om, ctx.scatter, ctx.shift, latents.tau, latents.t2, latents.nu, ctx.v_matrix,
                     ctx.adj, ctx.kind, ctx.lam, ctx.shape, int(n_sweeps), 0, rng.next_seed(),
                     math.inf, q, w, keep)
    return om, q, w


def chib_column_density(ctx: TelescopeContext, omega: np.ndarray, latents: MixingLatents,
                        m: int, burnin: int, rng: RngStream):
    """Estimate log f(theta*_j | y_{1:j}, fixed columns) at the posterior mean.

    Returns ``(result, next_omega, next_shift)`` where ``next_omega`` is a
    valid starting point for the following step (the Schur complement of a
    restricted-chain state at the chosen column) and ``next_shift`` the
    updated fixed shift. ``latents`` is updated in place.
    """
    d = ctx.step
    om = np.array(omega, dtype=float)
    if om.shape != (d, d):
        raise DomainError("state dimension does not match the step")
    rate = ctx.diag_rate()
    if d == 1:
        # exact: the lone diagonal entry has a gamma full conditional
        w_star = ctx.shape / rate
        summary = ColumnSummary(0, np.zeros(0), w_star)
        lg = gamma_logpdf(w_star, ctx.shape, rate)
        res = ChibColumnResult(summary, lg, 0.0, lg, 0.0, 0, 1.0, np.zeros(0), np.zeros(0, bool))
        return res, np.zeros((0, 0)), np.zeros((0, 0))

    _check_state(om)
    m = int(m)
    d1 = d - 1
    free = ctx.free_mask()
    nf = int(free.sum())
    rec_mean = np.zeros((m, max(nf, 1)))
    rec_prec = np.zeros((m, max(nf, 1), max(nf, 1)))
    diag_draws = np.empty(m)
    col_draws = np.empty((m, d1))
    gam_last = np.zeros(1)
    ll = np.empty(m)
    K.checked(K.run_unrestricted, om, ctx.scatter, ctx.shift, latents.tau, latents.t2, latents.nu, ctx.v_matrix,
                       ctx.adj, ctx.kind, ctx.lam, ctx.shape, float(ctx.n), m, int(burnin), rng.next_seed(),
                       rec_mean, rec_prec, diag_draws, col_draws, gam_last, ll)

    beta_star = om[:d1, d1].copy()
    beta_star[free] = col_draws[:, free].mean(axis=0)
    w_star = float(diag_draws.mean())

    if nf:
        dens = mvn_logpdf_precision(beta_star[free], rec_mean[:, :nf], rec_prec[:, :nf, :nf])
        log_beta = log_mean_exp(dens)
        se_beta = log_mean_exp_se(dens)
    else:
        log_beta, se_beta = 0.0, 0.0

    # restricted chain: start from the last unrestricted leading block with
    # the chosen column and the last gamma draw carried over
    om_r = om.copy()
    om_r[:d1, d1] = beta_star
    om_r[d1, :d1] = beta_star
    om_r[d1, d1] = K.quad_inv(np.ascontiguousarray(om[:d1, :d1]), beta_star) + gam_last[0]
    q = np.empty(m)
    w = np.empty(m)
    keep = np.empty((d1, d1))
    found = K.checked(K.run_restricted, om_r, ctx.scatter, ctx.shift, latents.tau, latents.t2, latents.nu,
                             ctx.v_matrix, ctx.adj, ctx.kind, ctx.lam, ctx.shape, m, int(burnin),
                             rng.next_seed(), w_star, q, w, keep)
    dens_w = shifted_trunc_gamma_logpdf(w_star, q, ctx.shape, rate)
    frac = float(np.mean(q < w_star))
    if not found or frac == 0.0:
        raise DegenerateIndicator(f"no restricted draw satisfied the diagonal indicator at step {d}")
    log_w = log_mean_exp(dens_w)
    se_w = log_mean_exp_se(dens_w)

    outer = np.outer(beta_star, beta_star) / w_star
    next_omega = keep - outer
    next_omega = 0.5 * (next_omega + next_omega.T)
    next_shift = ctx.shift[:d1, :d1] + outer
    summary = ColumnSummary(d1, beta_star, w_star)
    res = ChibColumnResult(summary, log_beta + log_w, log_beta, log_w,
                           math.sqrt(se_beta**2 + se_w**2), m, frac, ll, free)
    return res, next_omega, next_shift
