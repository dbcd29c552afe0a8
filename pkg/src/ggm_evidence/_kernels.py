"""Compiled Gibbs kernels.

Every prior shares one column update. Column ``k`` of the working precision
``om`` is split into ``beta = om[-k, k]`` and ``gamma = om[k, k] - beta' Oinv
beta`` (``Oinv`` is the inverse of ``om`` without row/column ``k``). The
full conditional is always

    beta_free ~ N(-P^{-1} h, P^{-1}),   gamma ~ Gamma(shape, c / 2)

and only (P, h, c, shape) depend on the prior:

    kind        c            P                       h
    Wishart     s_kk + 1     c Oinv                  s
    BGL / GHS   s_kk + lam   c Oinv + diag(1/tau)    s + F / tau
    G-Wishart   s_kk + v_kk  c Oinv[free, free]      s + v + c Oinv[free, pin] beta_pin

``F`` is the fixed shift that maps working entries back to the original
precision (original = working + F). G-Wishart pinned coordinates are never
touched, so zero patterns survive exactly.

All arrays except ``om``/``sig`` may be larger than the working block; only
their leading entries are read.
"""

import math

import numba
import numpy as np

from .distributions import nb_gamma, nb_inverse_gamma, nb_inverse_gaussian, nb_seed
from .errors import NotPositiveDefinite

WISHART = 0
BGL = 1
GHS = 2
GWISHART = 3
GAMMA_FLOOR = 1e-14

LOG_2PI = math.log(2.0 * math.pi)


def checked(fn, *args):
    """Call a kernel, turning its ValueError into NotPositiveDefinite."""
    try:
        return fn(*args)
    except ValueError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


@numba.njit(cache=True)
def chol_lower(a, out):
    """In-place lower Cholesky of ``a`` into ``out``; False if not SPD."""
    n = a.shape[0]
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= out[j, k] * out[j, k]
        if not s > 0.0:
            return False
        dj = math.sqrt(s)
        out[j, j] = dj
        for i in range(j + 1, n):
            t = a[i, j]
            for k in range(j):
                t -= out[i, k] * out[j, k]
            out[i, j] = t / dj
        for i in range(j):
            out[i, j] = 0.0
    return True


@numba.njit(cache=True)
def forward_sub(low, b):
    n = b.shape[0]
    x = np.empty(n)
    for i in range(n):
        t = b[i]
        for k in range(i):
            t -= low[i, k] * x[k]
        x[i] = t / low[i, i]
    return x


@numba.njit(cache=True)
def backward_sub(low, b):
    """Solve low^T x = b."""
    n = b.shape[0]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        t = b[i]
        for k in range(i + 1, n):
            t -= low[k, i] * x[k]
        x[i] = t / low[i, i]
    return x


@numba.njit(cache=True)
def spd_inv(a):
    n = a.shape[0]
    low = np.zeros((n, n))
    if not chol_lower(a, low):
        raise ValueError("matrix is not positive definite")
    linv = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        col = forward_sub(low, e)
        for i in range(n):
            linv[i, j] = col[i]
    out = linv.T @ linv
    for i in range(n):
        for j in range(i):
            v = 0.5 * (out[i, j] + out[j, i])
            out[i, j] = v
            out[j, i] = v
    return out


@numba.njit(cache=True)
def guarded_gamma(shape, rate):
    """Gamma draw, redrawn once if it falls below 1e-14 (diagonal barely above its shift)."""
    g = nb_gamma(shape, rate)
    if g < GAMMA_FLOOR:
        g = nb_gamma(shape, rate)
        if g < GAMMA_FLOOR:
            raise ValueError("gamma draw below the diagonal floor twice")
    return g


@numba.njit(cache=True)
def quad_inv(a, b):
    """b' a^{-1} b for SPD a."""
    n = a.shape[0]
    if n == 0:
        return 0.0
    low = np.zeros((n, n))
    if not chol_lower(a, low):
        raise ValueError("matrix is not positive definite")
    z = forward_sub(low, b)
    return np.dot(z, z)


@numba.njit(cache=True)
def gauss_loglik(om, S, n):
    """log N(y | 0, om^{-1}) summed over n rows, from the scatter matrix."""
    d = om.shape[0]
    low = np.zeros((d, d))
    if not chol_lower(om, low):
        return -np.inf
    logdet = 0.0
    for i in range(d):
        logdet += 2.0 * math.log(low[i, i])
    tr = 0.0
    for i in range(d):
        for j in range(d):
            tr += S[i, j] * om[j, i]
    return 0.5 * n * logdet - 0.5 * tr - 0.5 * n * d * LOG_2PI


@numba.njit(cache=True)
def update_column(om, sig, k, S, F, tau, V, adj, kind, lam, shape, rec_mean, rec_prec, rec_row):
    """One (beta, gamma) draw for column ``k``; keeps ``sig`` = inv(om) current."""
    d = om.shape[0]
    m = d - 1
    others = np.empty(m, np.int64)
    t = 0
    for i in range(d):
        if i != k:
            others[t] = i
            t += 1
    skk = sig[k, k]
    oinv = np.empty((m, m))
    for a in range(m):
        ia = others[a]
        for b in range(m):
            ib = others[b]
            oinv[a, b] = sig[ia, ib] - sig[ia, k] * sig[k, ib] / skk
    if kind == WISHART:
        c = S[k, k] + 1.0
    elif kind == GWISHART:
        c = S[k, k] + V[k, k]
    else:
        c = S[k, k] + lam
    free = np.empty(m, np.int64)
    pinned = np.empty(m, np.int64)
    nf = 0
    npin = 0
    for a in range(m):
        if kind != GWISHART or adj[others[a], k] != 0:
            free[nf] = a
            nf += 1
        else:
            pinned[npin] = a
            npin += 1
    beta = np.empty(m)
    for a in range(m):
        beta[a] = om[others[a], k]
    if nf > 0:
        prec = np.empty((nf, nf))
        lin = np.empty(nf)
        for a in range(nf):
            fa = free[a]
            ia = others[fa]
            for b in range(nf):
                prec[a, b] = c * oinv[fa, free[b]]
            h = S[ia, k]
            if kind == BGL or kind == GHS:
                prec[a, a] += 1.0 / tau[ia, k]
                h += F[ia, k] / tau[ia, k]
            elif kind == GWISHART:
                h += V[ia, k]
                for b in range(npin):
                    h += c * oinv[fa, pinned[b]] * beta[pinned[b]]
            lin[a] = h
        low = np.zeros((nf, nf))
        if not chol_lower(prec, low):
            raise ValueError("conditional precision is not positive definite")
        mean = -backward_sub(low, forward_sub(low, lin))
        z = np.empty(nf)
        for a in range(nf):
            z[a] = np.random.standard_normal()
        noise = backward_sub(low, z)
        for a in range(nf):
            beta[free[a]] = mean[a] + noise[a]
        if rec_row >= 0:
            for a in range(nf):
                rec_mean[rec_row, a] = mean[a]
                for b in range(nf):
                    rec_prec[rec_row, a, b] = prec[a, b]
    gam = guarded_gamma(shape, 0.5 * c)
    v = np.zeros(m)
    for a in range(m):
        acc = 0.0
        for b in range(m):
            acc += oinv[a, b] * beta[b]
        v[a] = acc
    q = 0.0
    for a in range(m):
        q += beta[a] * v[a]
    for a in range(m):
        ia = others[a]
        om[ia, k] = beta[a]
        om[k, ia] = beta[a]
    om[k, k] = gam + q
    sig[k, k] = 1.0 / gam
    for a in range(m):
        ia = others[a]
        sig[ia, k] = -v[a] / gam
        sig[k, ia] = -v[a] / gam
        for b in range(m):
            sig[ia, others[b]] = oinv[a, b] + v[a] * v[b] / gam
    return gam


@numba.njit(cache=True)
def draw_latent(tau, t2, nu, i, k, w, kind, lam):
    """Refresh the mixing variables of pair (i, k) given original entry ``w``."""
    if kind == BGL:
        aw = abs(w)
        lam2 = lam * lam
        if aw * 1e12 < lam or aw == 0.0:
            # limiting draw: prior refresh tau ~ Exp(lam^2 / 2)
            val = nb_gamma(1.0, 0.5 * lam2)
        else:
            val = 1.0 / nb_inverse_gaussian(lam / aw, lam2)
        if val < 1e-300:
            val = 1e-300
        tau[i, k] = val
        tau[k, i] = val
    elif kind == GHS:
        lam2 = lam * lam
        a = nb_inverse_gamma(1.0, 1.0 / nu[i, k] + 0.5 * lam2 * w * w)
        if a < 1e-300:
            a = 1e-300
        b = nb_inverse_gamma(1.0, 1.0 + 1.0 / a)
        t2[i, k] = a
        t2[k, i] = a
        nu[i, k] = b
        nu[k, i] = b
        tau[i, k] = a / lam2
        tau[k, i] = a / lam2


@numba.njit(cache=True)
def update_latents(om, F, tau, t2, nu, kind, lam):
    d = om.shape[0]
    for k in range(d):
        for i in range(k):
            draw_latent(tau, t2, nu, i, k, om[i, k] + F[i, k], kind, lam)


@numba.njit(cache=True)
def run_unrestricted(om, S, F, tau, t2, nu, V, adj, kind, lam, shape, n, m, burnin, seed,
                     rec_mean, rec_prec, diag_draws, col_draws, gam_last, ll_trace):
    """Full sweeps over all columns of ``om``; records the last column."""
    nb_seed(seed)
    d = om.shape[0]
    last = d - 1
    for it in range(burnin + m):
        sig = spd_inv(om)
        row = it - burnin
        for k in range(d):
            rr = row if (row >= 0 and k == last) else -1
            g = update_column(om, sig, k, S, F, tau, V, adj, kind, lam, shape, rec_mean, rec_prec, rr)
            if k == last:
                gam_last[0] = g
        if kind == BGL or kind == GHS:
            update_latents(om, F, tau, t2, nu, kind, lam)
        if row >= 0:
            diag_draws[row] = om[last, last]
            for i in range(last):
                col_draws[row, i] = om[i, last]
            ll_trace[row] = gauss_loglik(om, S, n)


@numba.njit(cache=True)
def run_restricted(om, S, F, tau, t2, nu, V, adj, kind, lam, shape, m, burnin, seed,
                   w_star, q_out, w_out, keep_p):
    """Sweeps with the off-diagonal part of the last column held fixed.

    The leading block is updated through its Schur complement
    R = P - b b' / w, whose fixed shift becomes F + b b' / w; the last
    diagonal is then redrawn as its gamma part plus b' P^{-1} b.
    Returns True when some retained P satisfies b' P^{-1} b < w_star; the
    most recent such P is left in ``keep_p``.
    """
    nb_seed(seed)
    d = om.shape[0]
    d1 = d - 1
    beta = np.empty(d1)
    for i in range(d1):
        beta[i] = om[i, d1]
    if kind == WISHART:
        c_last = S[d1, d1] + 1.0
    elif kind == GWISHART:
        c_last = S[d1, d1] + V[d1, d1]
    else:
        c_last = S[d1, d1] + lam
    r = np.empty((d1, d1))
    fp = np.empty((d1, d1))
    pmat = np.empty((d1, d1))
    dummy_mean = np.empty((1, 1))
    dummy_prec = np.empty((1, 1, 1))
    found = False
    for it in range(burnin + m):
        w = om[d1, d1]
        for a in range(d1):
            for b in range(d1):
                bb = beta[a] * beta[b] / w
                r[a, b] = om[a, b] - bb
                fp[a, b] = F[a, b] + bb
        sig = spd_inv(r)
        for k in range(d1):
            update_column(r, sig, k, S, fp, tau, V, adj, kind, lam, shape, dummy_mean, dummy_prec, -1)
        if kind == BGL or kind == GHS:
            update_latents(r, fp, tau, t2, nu, kind, lam)
            for i in range(d1):
                draw_latent(tau, t2, nu, i, d1, beta[i] + F[i, d1], kind, lam)
        for a in range(d1):
            for b in range(d1):
                v = r[a, b] + beta[a] * beta[b] / w
                om[a, b] = v
                pmat[a, b] = v
        q = quad_inv(pmat, beta)
        wn = q + guarded_gamma(shape, 0.5 * c_last)
        om[d1, d1] = wn
        row = it - burnin
        if row >= 0:
            q_out[row] = q
            w_out[row] = wn
            if q < w_star:
                for a in range(d1):
                    for b in range(d1):
                        keep_p[a, b] = pmat[a, b]
                found = True
    return found


@numba.njit(cache=True)
def run_gwishart_prior(w, V, adj, alpha, m, burnin, thin, seed, out):
    """Column-wise G-Wishart prior chain (no data); stores ``m`` draws in ``out``."""
    nb_seed(seed)
    p = w.shape[0]
    zeros = np.zeros((p, p))
    dummy_mean = np.empty((1, 1))
    dummy_prec = np.empty((1, 1, 1))
    shape = alpha + 1.0
    kept = 0
    it = 0
    while kept < m:
        sig = spd_inv(w)
        for k in range(p):
            update_column(w, sig, k, zeros, zeros, zeros, V, adj, GWISHART, 0.0, shape,
                          dummy_mean, dummy_prec, -1)
        it += 1
        if it > burnin and (it - burnin) % thin == 0:
            for a in range(p):
                for b in range(p):
                    out[kept, a, b] = w[a, b]
            kept += 1


@numba.njit(cache=True)
def run_posterior_sweeps(om, S, F, tau, t2, nu, V, adj, kind, lam, shape, n_sweeps, seed, out):
    """Plain unrestricted sweeps storing every state (used for tests and HM)."""
    nb_seed(seed)
    d = om.shape[0]
    dummy_mean = np.empty((1, 1))
    dummy_prec = np.empty((1, 1, 1))
    for it in range(n_sweeps):
        sig = spd_inv(om)
        for k in range(d):
            update_column(om, sig, k, S, F, tau, V, adj, kind, lam, shape, dummy_mean, dummy_prec, -1)
        if kind == BGL or kind == GHS:
            update_latents(om, F, tau, t2, nu, kind, lam)
        for a in range(d):
            for b in range(d):
                out[it, a, b] = om[a, b]
