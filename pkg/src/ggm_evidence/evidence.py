"""Telescoping evidence engine.

For a column ordering 1..p the log marginal likelihood splits as

    log f(y) = sum_j I_j + sum_j III_j - sum_j IV_j

with I_j the partial likelihood of column j given the earlier columns,
III_j the conditional prior and IV_j the conditional posterior of the
chosen column theta*_j = (omega*_.j, omega*_jj), each evaluated on the
Schur-reduced working precision left after fixing columns j+1..p.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .config import RunConfig
from .distributions import LOG_2PI, RngStream, as_stream
from .errors import NotPositiveDefinite, ShapeError
from .linalg import cholesky, schur_remove_last, spd_check
from .priors import (
    Bgl,
    ColumnSummary,
    Ghs,
    GWishart,
    MixingLatents,
    PriorSpec,
    Wishart,
    bgl_prior_logdensity,
    ghs_prior_logdensity,
    gwishart_column_prior_logpdf,
    wishart_term_iii,
)
from .samplers import chib_column_density, make_context


@dataclass
class EvidenceBreakdown:
    terms_i: np.ndarray
    terms_iii: np.ndarray
    terms_iv: np.ndarray
    log_marginal: float
    includes_constant: bool
    joint_iii: bool
    se: float
    log_correction: float = 0.0
    summaries: list = field(default_factory=list, repr=False)
    indicator_fractions: np.ndarray = field(default=None, repr=False)
    ll_trace: np.ndarray = field(default=None, repr=False)
    omega_star: np.ndarray = field(default=None, repr=False)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "terms_i": self.terms_i.tolist(),
            "terms_iii": self.terms_iii.tolist(),
            "terms_iv": self.terms_iv.tolist(),
            "log_marginal": self.log_marginal,
            "includes_constant": self.includes_constant,
            "joint_iii": self.joint_iii,
            "se": self.se,
            "log_correction": self.log_correction,
            "indicator_fractions": None if self.indicator_fractions is None else self.indicator_fractions.tolist(),
        }


@dataclass
class EvidenceEstimate:
    mean: float
    sd: float
    per_permutation: np.ndarray
    cv: float
    se_per_permutation: np.ndarray
    permutations: list = field(repr=False)
    first: Optional[EvidenceBreakdown] = field(default=None, repr=False)
    wall_time: float = 0.0

    @property
    def pooled_se(self) -> float:
        """Root-mean-square of the per-run batch-means standard errors."""
        return float(np.sqrt(np.mean(self.se_per_permutation**2)))

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "per_permutation": self.per_permutation.tolist(),
            "cv": self.cv,
            "se_per_permutation": self.se_per_permutation.tolist(),
            "pooled_se": self.pooled_se,
            "permutations": [list(map(int, p)) for p in self.permutations],
            "breakdown": None if self.first is None else self.first.to_dict(),
        }


# ---------------------------------------------------------------------------
# partial likelihoods


def column_summaries(omega: np.ndarray) -> list[ColumnSummary]:
    """Telescoping summaries of a full precision matrix by repeated Schur reduction."""
    om = np.asarray(omega, dtype=float)
    if not spd_check(om).is_spd:
        raise NotPositiveDefinite("precision matrix is not positive definite")
    out = [None] * om.shape[0]
    cur = om
    for j in range(om.shape[0] - 1, -1, -1):
        out[j] = ColumnSummary(j, cur[:j, j].copy(), float(cur[j, j]))
        if j:
            cur = schur_remove_last(cur)
    return out


def reconstitute(summaries: list[ColumnSummary]) -> np.ndarray:
    """Rebuild the full precision from its telescoping summaries."""
    cur = np.zeros((0, 0))
    for s in summaries:
        b = np.asarray(s.off_diag, dtype=float)
        top = cur + np.outer(b, b) / s.diag
        j = top.shape[0]
        nxt = np.empty((j + 1, j + 1))
        nxt[:j, :j] = top
        nxt[:j, j] = b
        nxt[j, :j] = b
        nxt[j, j] = s.diag
        cur = nxt
    return cur


def term_i_all(y: np.ndarray, summaries: list[ColumnSummary]) -> np.ndarray:
    """I_j = sum over rows of log N(y_j | -y_{1:j-1} b / w, 1 / w)."""
    y = np.asarray(y, dtype=float)
    n, p = y.shape
    if len(summaries) != p:
        raise ShapeError("need one summary per column")
    out = np.empty(p)
    for j, s in enumerate(summaries):
        w = float(s.diag)
        if not w > 0:
            raise NotPositiveDefinite(f"diagonal {w} at column {j} is not positive")
        mean = -(y[:, :j] @ np.asarray(s.off_diag, dtype=float)) / w if j else np.zeros(n)
        r = y[:, j] - mean
        out[j] = 0.5 * n * (math.log(w) - LOG_2PI) - 0.5 * w * float(r @ r)
    return out


def mvn_loglik(y: np.ndarray, omega: np.ndarray) -> float:
    """log N(y | 0, I_n x omega^{-1}) summed over the rows of y."""
    y = np.asarray(y, dtype=float)
    n, p = y.shape
    low = cholesky(omega)
    logdet = 2.0 * np.sum(np.log(np.diag(low)))
    tr = float(np.sum((y.T @ y) * omega))
    return 0.5 * n * logdet - 0.5 * tr - 0.5 * n * p * LOG_2PI


# ---------------------------------------------------------------------------
# one ordering


def _standardize(y: np.ndarray, prior: PriorSpec):
    """Map a Wishart(V, a) problem onto Wishart(I, a); returns (data, prior, log correction).

    With V = L L' and x = y L, the precision of x is L^{-1} W L^{-T} ~ W(I, a)
    and f(y) = f(x) |V|^{n/2}.
    """
    if isinstance(prior, Wishart):
        low = cholesky(prior.v_matrix)
        n = y.shape[0]
        corr = n * float(np.sum(np.log(np.diag(low))))
        return y @ low, Wishart(np.eye(prior.p), prior.alpha), corr
    return y, prior, 0.0


def estimate_log_evidence(y: np.ndarray, prior: PriorSpec, cfg: RunConfig, rng: RngStream) -> EvidenceBreakdown:
    """Telescoping estimate of log f(y) for the column order of ``y``."""
    t0 = time.perf_counter()
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ShapeError("data must be an n x p matrix")
    n, p = y.shape
    if hasattr(prior, "p") and prior.p != p:
        raise ShapeError(f"prior dimension {prior.p} does not match data dimension {p}")
    x, work, corr = _standardize(y, prior)
    scatter = x.T @ x
    omega = np.eye(p)
    shift = np.zeros((p, p))
    lam = getattr(work, "lam", 1.0)
    latents = MixingLatents.initial(p, lam)
    summaries: list = [None] * p
    iii = np.zeros(p)
    iv = np.zeros(p)
    fracs = np.ones(p)
    se2 = 0.0
    ll_trace = None
    for j in range(p, 0, -1):
        ctx = make_context(work, scatter, n, shift, j, p_total=p)
        res, omega, shift = chib_column_density(ctx, omega, latents, cfg.m, cfg.burnin, rng)
        if j == p:
            ll_trace = res.ll_trace
        s = res.summary
        summaries[j - 1] = s
        iv[j - 1] = res.log_iv
        fracs[j - 1] = res.indicator_fraction
        se2 += res.se**2
        if isinstance(work, Wishart):
            iii[j - 1] = wishart_term_iii(s, work.alpha - (p - j), j)
        elif isinstance(work, GWishart):
            iii[j - 1] = gwishart_column_prior_logpdf(s.off_diag, s.diag, res.free if j > 1 else np.zeros(0, bool),
                                                      work.v_matrix[:j, :j], work.alpha)
    omega_star = reconstitute(summaries)
    includes_constant = True
    joint = False
    if isinstance(work, Bgl):
        iii[:] = 0.0
        iii[0] = bgl_prior_logdensity(omega_star, work.lam)
        includes_constant, joint = False, True
    elif isinstance(work, Ghs):
        iii[:] = 0.0
        val, se_iii = ghs_prior_logdensity(omega_star, work.lam, cfg.ghs_mc_draws, rng, return_se=True)
        iii[0] = val
        se2 += se_iii**2
        includes_constant, joint = False, True
    terms_i = term_i_all(x, summaries)
    total = float(terms_i.sum() + iii.sum() - iv.sum() + corr)
    if ll_trace is not None and corr:
        ll_trace = ll_trace + corr
    return EvidenceBreakdown(terms_i, iii, iv, total, includes_constant, joint, math.sqrt(se2), corr,
                             summaries, fracs, ll_trace, omega_star, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# permutation replication


def fisher_yates(p: int, gen: np.random.Generator) -> np.ndarray:
    perm = np.arange(p)
    for i in range(p - 1, 0, -1):
        k = int(gen.integers(0, i + 1))
        perm[i], perm[k] = perm[k], perm[i]
    return perm


def permutation_list(p: int, n_perm: int, seed: int) -> list[np.ndarray]:
    """Identity first, then seeded Fisher-Yates shuffles."""
    gen = RngStream(seed, 10_000).generator
    perms = [np.arange(p)]
    for _ in range(n_perm - 1):
        perms.append(fisher_yates(p, gen))
    return perms


def _run_replicate(args):
    y, prior, cfg, perm, index = args
    stream = RngStream(int(cfg.seed) ^ int(index), int(index))
    return estimate_log_evidence(y[:, perm], prior.permute(perm), cfg, stream)


def estimate_with_permutations(y: np.ndarray, prior: PriorSpec, cfg: RunConfig,
                               rng: Optional[RngStream] = None) -> EvidenceEstimate:
    """Run the estimator over ``cfg.n_perm`` column orderings.

    Replicate i uses the stream seeded by ``cfg.seed xor i``; the result does
    not depend on the number of workers.
    """
    t0 = time.perf_counter()
    y = np.asarray(y, dtype=float)
    p = y.shape[1]
    perms = permutation_list(p, cfg.n_perm, cfg.seed)
    tasks = [(y, prior, cfg, perm, i) for i, perm in enumerate(perms)]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(tasks))) as ex:
            results = list(ex.map(_run_replicate, tasks))
    else:
        results = [_run_replicate(t) for t in tasks]
    vals = np.array([r.log_marginal for r in results])
    ses = np.array([r.se for r in results])
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    cv = abs(sd / mean) if mean != 0 else math.inf
    return EvidenceEstimate(mean, sd, vals, cv, ses, perms, results[0], time.perf_counter() - t0)
