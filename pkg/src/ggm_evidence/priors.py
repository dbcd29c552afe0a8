"""Prior definitions, conditional prior densities and prior samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import special

from . import _kernels as K
from .distributions import (
    GigParams,
    RngStream,
    gamma_logpdf,
    gig_or_gamma_logpdf,
    mvn_logpdf,
    normal_logpdf,
    sample_half_cauchy,
)
from .errors import DomainError, InitializationError, NotPositiveDefinite
from .graphs import Graph
from .linalg import cholesky, spd_check, spd_inverse, symmetrize


# ---------------------------------------------------------------------------
# prior specifications


@dataclass(frozen=True)
class Wishart:
    """W_p(V, alpha): density proportional to |W|^((alpha-p-1)/2) exp(-tr(V^{-1} W)/2)."""

    v_matrix: np.ndarray
    alpha: float
    name: str = field(default="wishart", init=False)

    def __post_init__(self):
        v = symmetrize(np.atleast_2d(np.asarray(self.v_matrix, dtype=float)))
        object.__setattr__(self, "v_matrix", v)
        p = v.shape[0]
        if not self.alpha > p - 1:
            raise DomainError(f"Wishart needs alpha > p - 1 = {p - 1}, got {self.alpha}")
        cholesky(v)

    @property
    def p(self) -> int:
        return self.v_matrix.shape[0]

    def permute(self, perm) -> "Wishart":
        return Wishart(self.v_matrix[np.ix_(perm, perm)], self.alpha)


@dataclass(frozen=True)
class Bgl:
    """Graphical lasso prior: double-exponential off-diagonals, exponential diagonals."""

    lam: float
    name: str = field(default="bgl", init=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("lambda must be positive")

    def permute(self, perm) -> "Bgl":
        return self


@dataclass(frozen=True)
class Ghs:
    """Graphical horseshoe prior: horseshoe off-diagonals with scale 1/lambda."""

    lam: float
    name: str = field(default="ghs", init=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("lambda must be positive")

    def permute(self, perm) -> "Ghs":
        return self


@dataclass(frozen=True)
class GWishart:
    """G-Wishart: density proportional to |W|^alpha exp(-tr(V W)/2) on SPD matrices with zeros off G."""

    graph: Graph
    v_matrix: np.ndarray
    alpha: float
    name: str = field(default="gwishart", init=False)

    def __post_init__(self):
        v = symmetrize(np.atleast_2d(np.asarray(self.v_matrix, dtype=float)))
        object.__setattr__(self, "v_matrix", v)
        if v.shape[0] != self.graph.p:
            raise DomainError("graph and V dimensions disagree")
        if not self.alpha > 0:
            raise DomainError("G-Wishart needs alpha > 0")
        cholesky(v)

    @property
    def p(self) -> int:
        return self.graph.p

    def permute(self, perm) -> "GWishart":
        return GWishart(self.graph.permute(perm), self.v_matrix[np.ix_(perm, perm)], self.alpha)


PriorSpec = Union[Wishart, Bgl, Ghs, GWishart]


def gwishart_to_wishart_df(alpha_gw: float, p: int) -> float:
    """Degrees of freedom of the Wishart law equal to a complete-graph G-Wishart.

    |W|^alpha_gw matches |W|^((alpha_w - p - 1)/2).
    """
    return 2.0 * alpha_gw + p + 1.0


def gwishart_complete_as_wishart(prior: GWishart) -> Wishart:
    """Wishart law equal to a G-Wishart on the complete graph (scale V^{-1})."""
    return Wishart(spd_inverse(prior.v_matrix), gwishart_to_wishart_df(prior.alpha, prior.p))


# ---------------------------------------------------------------------------
# latent state


@dataclass
class MixingLatents:
    """Mixing variables of the scale-mixture priors.

    ``tau`` holds the normal variance of each off-diagonal entry in the
    Gibbs convention (BGL: tau; GHS: tau_hs^2 / lambda^2). ``t2`` and ``nu``
    are the horseshoe scale tau_hs^2 and its auxiliary variable.
    """

    tau: np.ndarray
    t2: np.ndarray
    nu: np.ndarray

    @classmethod
    def initial(cls, p: int, lam: float = 1.0) -> "MixingLatents":
        return cls(np.ones((p, p)), np.full((p, p), lam * lam), np.ones((p, p)))

    def copy(self) -> "MixingLatents":
        return MixingLatents(self.tau.copy(), self.t2.copy(), self.nu.copy())

    def permute(self, perm) -> "MixingLatents":
        ix = np.ix_(perm, perm)
        return MixingLatents(self.tau[ix].copy(), self.t2[ix].copy(), self.nu[ix].copy())


@dataclass(frozen=True)
class ColumnSummary:
    """Chosen value of one telescoping column: off-diagonal vector and diagonal."""

    j: int
    off_diag: np.ndarray
    diag: float


def update_latents_bgl(omega: np.ndarray, lam: float, rng: RngStream,
                       latents: Optional[MixingLatents] = None) -> MixingLatents:
    """Draw 1/tau_ij ~ InvGaussian(lam/|w_ij|, lam^2); tau ~ Exp(lam^2/2) where w_ij = 0."""
    p = omega.shape[0]
    lat = (latents or MixingLatents.initial(p, lam)).copy()
    K.nb_seed(rng.next_seed())
    K.checked(K.update_latents, np.ascontiguousarray(omega, dtype=float), np.zeros((p, p)),
                     lat.tau, lat.t2, lat.nu, K.BGL, float(lam))
    return lat


def update_latents_ghs(omega: np.ndarray, lam: float, latents: MixingLatents,
                       rng: RngStream) -> MixingLatents:
    """Inverse-gamma cascade for the horseshoe scales under w ~ N(0, t2 / lam^2)."""
    p = omega.shape[0]
    lat = latents.copy()
    K.nb_seed(rng.next_seed())
    K.checked(K.update_latents, np.ascontiguousarray(omega, dtype=float), np.zeros((p, p)),
                     lat.tau, lat.t2, lat.nu, K.GHS, float(lam))
    return lat


# ---------------------------------------------------------------------------
# conditional prior densities


def wishart_term_iii(summary: ColumnSummary, step_alpha: float, step_dim: int) -> float:
    """Conditional prior of one telescoping column under W(I, step_alpha).

    The last column of a W_d(I, a) matrix has diagonal ~ Gamma(a/2, 1/2)
    and off-diagonal | diagonal ~ N(0, diagonal * I).
    """
    w = float(summary.diag)
    if not w > 0:
        raise DomainError("diagonal entry must be positive")
    beta = np.asarray(summary.off_diag, dtype=float)
    if beta.size != step_dim - 1:
        raise DomainError("off-diagonal length does not match step dimension")
    out = gamma_logpdf(w, 0.5 * step_alpha, 0.5)
    if beta.size:
        out += float(np.sum(normal_logpdf(beta, 0.0, w)))
    return out


def bgl_prior_logdensity(omega: np.ndarray, lam: float) -> float:
    """Graphical-lasso prior log density, without the normalising constant.

    Off-diagonals carry the double-exponential density (lam/2) exp(-lam |w|),
    diagonals the exponential density (lam/2) exp(-lam w / 2).
    """
    omega = np.asarray(omega, dtype=float)
    if not spd_check(omega).is_spd:
        raise NotPositiveDefinite("BGL prior evaluated outside the SPD cone")
    p = omega.shape[0]
    off = np.abs(omega[np.triu_indices(p, 1)]).sum()
    return (0.5 * p * (p - 1) * math.log(0.5 * lam) - lam * off
            + p * math.log(0.5 * lam) - 0.5 * lam * np.trace(omega))


def horseshoe_logpdf_mc(x: np.ndarray, lam: float, hc_draws: np.ndarray):
    """Monte Carlo horseshoe log density: mean of N(x | 0, (t/lam)^2) over t ~ C+(0,1).

    Returns (log density, delta-method standard error) per entry of ``x``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    var = (hc_draws / lam) ** 2
    logs = -0.5 * (math.log(2 * math.pi) + np.log(var))[None, :] - 0.5 * x[:, None] ** 2 / var[None, :]
    top = logs.max(axis=1, keepdims=True)
    vals = np.exp(logs - top)
    mean = vals.mean(axis=1)
    se = vals.std(axis=1, ddof=1) / math.sqrt(vals.shape[1]) / mean
    return top[:, 0] + np.log(mean), se


def horseshoe_logpdf_quad(x: float, lam: float) -> float:
    """Horseshoe log density by adaptive quadrature over the half-Cauchy scale."""
    from scipy.integrate import quad

    x = float(x)
    if x == 0.0:
        return math.inf

    def integrand(u):
        # t = tan(u) maps (0, pi/2) to (0, inf); C+ density times dt/du is 2/pi
        t = math.tan(u)
        if t == 0.0:
            return 0.0
        sd = t / lam
        return (2.0 / math.pi) * math.exp(-0.5 * (x / sd) ** 2) / (math.sqrt(2 * math.pi) * sd)

    val, _ = quad(integrand, 0.0, 0.5 * math.pi, limit=400, epsabs=0.0, epsrel=1e-12)
    return math.log(val)


def ghs_prior_logdensity(omega: np.ndarray, lam: float, mc_draws: int, rng: RngStream,
                         return_se: bool = False):
    """Graphical-horseshoe prior log density without its normalising constant.

    Each off-diagonal horseshoe density is a log-mean-exp over ``mc_draws``
    half-Cauchy scales (shared across entries). Entries at exactly zero sit
    on the horseshoe pole: the estimate is finite for any finite draw set but
    grows without bound as ``mc_draws`` increases.
    """
    omega = np.asarray(omega, dtype=float)
    if not spd_check(omega).is_spd:
        raise NotPositiveDefinite("GHS prior evaluated outside the SPD cone")
    if mc_draws < 1:
        raise DomainError("mc_draws must be positive")
    p = omega.shape[0]
    hc = sample_half_cauchy(rng, size=int(mc_draws))
    hc = hc[hc > 0]
    off = omega[np.triu_indices(p, 1)]
    total = p * math.log(0.5 * lam) - 0.5 * lam * np.trace(omega)
    se = 0.0
    if off.size:
        vals, ses = horseshoe_logpdf_mc(off, lam, hc)
        total += float(vals.sum())
        se = float(np.sqrt(np.sum(ses**2)))
    return (total, se) if return_se else total


def gwishart_column_prior_logpdf(beta: np.ndarray, w: float, free: np.ndarray,
                                 v_block: np.ndarray, alpha: float) -> float:
    """Conditional prior of the last column of a G-Wishart telescoping block.

    ``v_block`` is V restricted to the current block (last row/column = the
    column being evaluated); ``beta`` the full off-diagonal column with pinned
    entries at their fixed values; ``free`` a boolean mask of neighbours.
    Integrating the free coordinates out of |W|^alpha exp(-tr(V W)/2) leaves
    beta_free | w ~ N(-U zeta, U) with U = w V_ff^{-1}, zeta = v_f + V_fp beta_p / w,
    and w ~ GIG(a, b, q) with a = v_jj - v_f' V_ff^{-1} v_f,
    b = beta_p' (V_pp - V_pf V_ff^{-1} V_fp) beta_p, q = alpha + |free|/2 + 1.
    """
    beta = np.asarray(beta, dtype=float)
    free = np.asarray(free, dtype=bool)
    d = v_block.shape[0]
    if beta.size != d - 1 or free.size != d - 1:
        raise DomainError("column length does not match V block")
    if not w > 0:
        raise DomainError("diagonal entry must be positive")
    fi = np.flatnonzero(free)
    pi = np.flatnonzero(~free)
    vjj = v_block[-1, -1]
    vcol = v_block[:-1, -1]
    k = fi.size
    q = alpha + 0.5 * k + 1.0
    if k:
        vff = v_block[np.ix_(fi, fi)]
        vff_inv = spd_inverse(vff)
        vfp = v_block[np.ix_(fi, pi)]
        bp = beta[pi]
        zeta = vcol[fi] + vfp @ bp / w
        u = w * vff_inv
        log_norm = mvn_logpdf(beta[fi], -u @ zeta, u)
        a = vjj - vcol[fi] @ vff_inv @ vcol[fi]
        schur = v_block[np.ix_(pi, pi)] - vfp.T @ vff_inv @ vfp
        b = float(bp @ schur @ bp)
    else:
        log_norm = 0.0
        a = vjj
        bp = beta[pi]
        b = float(bp @ v_block[np.ix_(pi, pi)] @ bp)
    return log_norm + gig_or_gamma_logpdf(w, GigParams(a, max(b, 0.0), q))


def gwishart_term_iii_p(summary: ColumnSummary, prior: GWishart) -> float:
    """Conditional prior of the top column (no pinned values other than zeros)."""
    p = prior.p
    j = p - 1
    beta = np.asarray(summary.off_diag, dtype=float)
    free = prior.graph.adj[:j, j].astype(bool)
    if np.any(beta[~free] != 0.0):
        raise DomainError("non-neighbour entries of the top column must be zero")
    return gwishart_column_prior_logpdf(beta, summary.diag, free, prior.v_matrix, prior.alpha)


def gwishart_term_iii_mid(summary: ColumnSummary, fixed_part: np.ndarray, prior: GWishart,
                          step: int) -> float:
    """Conditional prior of column ``step`` (0-based) of a G-Wishart telescoping chain.

    ``summary.off_diag`` holds the neighbour entries (in order of the
    neighbours of ``step`` below it); ``fixed_part`` the pinned working
    entries of the non-neighbours.
    """
    j = int(step)
    free = prior.graph.adj[:j, j].astype(bool)
    beta = np.zeros(j)
    beta[free] = np.asarray(summary.off_diag, dtype=float)
    beta[~free] = np.asarray(fixed_part, dtype=float)
    v_block = prior.v_matrix[: j + 1, : j + 1]
    return gwishart_column_prior_logpdf(beta, summary.diag, free, v_block, prior.alpha)


# ---------------------------------------------------------------------------
# prior samplers


def sample_wishart_bartlett(v: np.ndarray, alpha: float, rng: RngStream, size: int) -> np.ndarray:
    """Bartlett decomposition draws from W_p(V, alpha), shape (size, p, p)."""
    v = np.asarray(v, dtype=float)
    p = v.shape[0]
    low_v = cholesky(v)
    g = rng.generator
    a = np.zeros((int(size), p, p))
    di = np.arange(p)
    a[:, di, di] = np.sqrt(g.chisquare(alpha - di, size=(int(size), p)))
    il = np.tril_indices(p, -1)
    a[:, il[0], il[1]] = g.standard_normal((int(size), il[0].size))
    la = low_v @ a
    return la @ np.swapaxes(la, 1, 2)


def sample_gwishart_prior(prior: GWishart, m: int, burnin: int, rng: RngStream,
                          thin: int = 1, init: Optional[np.ndarray] = None) -> np.ndarray:
    """Column-wise Gibbs chain targeting the G-Wishart prior.

    For each column j the neighbour entries are drawn from
    N(-C v_j^nb, C) with C^{-1} = v_jj [W_{-j,-j}^{-1}]^nb, then
    w_jj = Gamma(alpha + 1, v_jj / 2) + W_j' W_{-j,-j}^{-1} W_j.
    """
    p = prior.p
    adj = np.ascontiguousarray(prior.graph.adj, dtype=np.int64)
    w0 = np.eye(p) if init is None else np.array(init, dtype=float)
    if np.any(w0[adj == 0] != 0.0) or not spd_check(w0).is_spd:
        raise InitializationError("initial matrix is not in the G-Wishart support")
    out = np.empty((int(m), p, p))
    K.checked(K.run_gwishart_prior, w0, np.ascontiguousarray(prior.v_matrix), adj, float(prior.alpha),
                         int(m), int(burnin), int(thin), rng.next_seed(), out)
    return out


def _elementwise_batch(prior: Union[Bgl, Ghs], p: int, rng: RngStream, size: int) -> np.ndarray:
    lam = prior.lam
    g = rng.generator
    iu = np.triu_indices(p, 1)
    om = np.zeros((size, p, p))
    di = np.arange(p)
    om[:, di, di] = g.exponential(2.0 / lam, size=(size, p))
    if isinstance(prior, Bgl):
        off = g.laplace(0.0, 1.0 / lam, size=(size, iu[0].size))
    else:
        off = np.abs(g.standard_cauchy((size, iu[0].size))) / lam * g.standard_normal((size, iu[0].size))
    om[:, iu[0], iu[1]] = off
    om[:, iu[1], iu[0]] = off
    return om


def sample_elementwise_prior(prior: Union[Bgl, Ghs], p: int, rng: RngStream, size: int,
                             max_tries: int = 1_000_000, batch: int = 4096):
    """Element-wise prior draws accepted only when SPD.

    Returns (draws, total tries); ``draws`` is None as soon as one draw needs
    more than ``max_tries`` candidates.
    """
    out = np.empty((int(size), p, p))
    got = 0
    tries = 0
    since = 0  # candidates spent on the draw currently being filled
    while got < size:
        cand = _elementwise_batch(prior, p, rng, batch)
        ok = np.linalg.eigvalsh(cand)[:, 0] > 0 if p > 1 else cand[:, 0, 0] > 0
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            tries += batch
            since += batch
            if since >= max_tries:
                return None, tries
            continue
        take = idx[: size - got]
        tries += int(take[-1]) + 1
        since = batch - 1 - int(take[-1])
        out[got:got + take.size] = cand[take]
        got += take.size
    return out, tries


def sample_prior_gibbs(prior: Union[Bgl, Ghs], p: int, rng: RngStream, burnin: int = 2000) -> np.ndarray:
    """One prior draw from the data-free latent-variable Gibbs chain."""
    kind = K.BGL if isinstance(prior, Bgl) else K.GHS
    lat = MixingLatents.initial(p, prior.lam)
    zeros = np.zeros((p, p))
    out = np.empty((1, p, p))
    om = np.eye(p)
    tmp = np.empty((int(burnin), p, p))
    K.checked(K.run_posterior_sweeps, om, zeros, zeros, lat.tau, lat.t2, lat.nu, zeros,
                           np.ones((p, p), dtype=np.int64), kind, float(prior.lam), 1.0,
                           int(burnin), rng.next_seed(), tmp)
    out[0] = tmp[-1]
    return out[0]


def prior_draws(prior: PriorSpec, p: int, rng: RngStream, size: int, max_tries: int = 1_000_000):
    """Independent (or thinned-chain) prior draws used by the baselines."""
    if isinstance(prior, Wishart):
        return sample_wishart_bartlett(prior.v_matrix, prior.alpha, rng, size), size
    if isinstance(prior, GWishart):
        return sample_gwishart_prior(prior, size, 500, rng, thin=5), size
    return sample_elementwise_prior(prior, p, rng, size, max_tries)


def log_prior_unnormalized(prior: PriorSpec, omega: np.ndarray) -> float:
    """Unnormalised log prior kernel (for diagnostics and MH ratios)."""
    if isinstance(prior, Wishart):
        p = prior.p
        sign, logdet = np.linalg.slogdet(omega)
        vinv = spd_inverse(prior.v_matrix)
        return 0.5 * (prior.alpha - p - 1) * logdet - 0.5 * float(np.sum(vinv * omega))
    if isinstance(prior, GWishart):
        sign, logdet = np.linalg.slogdet(omega)
        return prior.alpha * logdet - 0.5 * float(np.sum(prior.v_matrix * omega))
    if isinstance(prior, Bgl):
        return bgl_prior_logdensity(omega, prior.lam)
    raise DomainError("no closed-form kernel for this prior")


def wishart_log_normalizer(v: np.ndarray, alpha: float) -> float:
    """log of the Wishart normalising constant 2^(a p/2) |V|^(a/2) Gamma_p(a/2)."""
    p = v.shape[0]
    sign, logdet = np.linalg.slogdet(v)
    return 0.5 * alpha * p * math.log(2.0) + 0.5 * alpha * logdet + float(special.multigammaln(0.5 * alpha, p))


def wishart_logpdf(omega: np.ndarray, v: np.ndarray, alpha: float) -> float:
    p = v.shape[0]
    sign, logdet = np.linalg.slogdet(omega)
    vinv = spd_inverse(v)
    return (0.5 * (alpha - p - 1) * logdet - 0.5 * float(np.sum(vinv * omega))
            - wishart_log_normalizer(v, alpha))


def tridiagonal_scale(p: int, alpha: float) -> np.ndarray:
    """Wishart scale with 1/alpha on the diagonal and 0.25/alpha beside it."""
    return (np.eye(p) + 0.25 * (np.eye(p, k=1) + np.eye(p, k=-1))) / alpha
