"""Log densities, special functions and random draws.

Densities are evaluated in log scale. Random draws are produced by small
numba kernels (``nb_*``) that only rely on the uniform and standard normal
generators; the public ``sample_*`` wrappers seed those kernels from an
``RngStream`` so identical streams give bit-identical sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numba
import numpy as np
from scipy import special

from .errors import (
    BesselOverflow,
    DegenerateGig,
    DimensionMismatch,
    DomainError,
    EmptyInput,
)
from .linalg import cholesky

LOG_2PI = math.log(2.0 * math.pi)
GIG_B_TINY = 1e-300

ArrayLike = Union[float, np.ndarray, Sequence[float]]


# ---------------------------------------------------------------------------
# random streams


@dataclass
class RngStream:
    """Seeded random stream; ``(seed, stream_id)`` fixes the whole sequence."""

    seed: int
    stream_id: int = 0
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream_id),))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def next_seed(self) -> int:
        """A 32-bit seed for a numba kernel, drawn from this stream."""
        return int(self.generator.integers(0, 2**32 - 1))

    def child(self, index: int) -> "RngStream":
        """Independent sub-stream, derived as seed xor index."""
        return RngStream(int(self.seed) ^ int(index), self.stream_id + 1 + int(index))


def as_stream(rng: Union[RngStream, int, None]) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(int(np.random.SeedSequence().entropy % (2**63)))
    return RngStream(int(rng))


# ---------------------------------------------------------------------------
# numba draw kernels


@numba.njit(cache=True)
def nb_seed(seed):
    np.random.seed(seed)


@numba.njit(cache=True)
def nb_normal():
    return np.random.standard_normal()


@numba.njit(cache=True)
def nb_gamma(shape, rate):
    """Marsaglia-Tsang squeeze with the u^(1/shape) boost for shape < 1."""
    boost = 1.0
    a = shape
    if a < 1.0:
        u = np.random.random()
        while u == 0.0:
            u = np.random.random()
        boost = u ** (1.0 / a)
        a = a + 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = np.random.standard_normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = np.random.random()
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return boost * d * v / rate
        if u > 0.0 and math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return boost * d * v / rate


@numba.njit(cache=True)
def nb_inverse_gamma(shape, scale):
    return scale / nb_gamma(shape, 1.0)


@numba.njit(cache=True)
def nb_half_cauchy():
    u = np.random.random()
    return math.tan(0.5 * math.pi * u)


@numba.njit(cache=True)
def nb_inverse_gaussian(mu, lam):
    """Michael-Schucany-Haas transformation with a cancellation-free root."""
    z = np.random.standard_normal()
    y = z * z
    a = mu * y / (2.0 * lam)
    x = mu / (1.0 + a + math.sqrt(a * (2.0 + a)))
    u = np.random.random()
    if u <= mu / (mu + x):
        return x
    return mu * mu / x


@numba.njit(cache=True)
def _gamma_many(shape, rate, size, seed):
    nb_seed(seed)
    out = np.empty(size)
    for i in range(size):
        out[i] = nb_gamma(shape, rate)
    return out


@numba.njit(cache=True)
def _normal_many(size, seed):
    nb_seed(seed)
    out = np.empty(size)
    for i in range(size):
        out[i] = np.random.standard_normal()
    return out


@numba.njit(cache=True)
def _half_cauchy_many(size, seed):
    nb_seed(seed)
    out = np.empty(size)
    for i in range(size):
        out[i] = nb_half_cauchy()
    return out


@numba.njit(cache=True)
def _inverse_gaussian_many(mu, lam, size, seed):
    nb_seed(seed)
    out = np.empty(size)
    for i in range(size):
        out[i] = nb_inverse_gaussian(mu, lam)
    return out


def _positive(name: str, value: float):
    if not (np.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be positive and finite, got {value}")


def _finish(draws: np.ndarray, size):
    if size is None:
        return float(draws[0])
    return draws.reshape(size)


def _count(size) -> int:
    if size is None:
        return 1
    return int(np.prod(size))


def sample_gamma(shape: float, rate: float, rng: RngStream, size=None):
    _positive("shape", shape)
    _positive("rate", rate)
    return _finish(_gamma_many(float(shape), float(rate), _count(size), rng.next_seed()), size)


def sample_normal(mean: float, sd: float, rng: RngStream, size=None):
    _positive("sd", sd)
    z = _normal_many(_count(size), rng.next_seed())
    return _finish(mean + sd * z, size)


def sample_inverse_gamma(shape: float, scale: float, rng: RngStream, size=None):
    _positive("scale", scale)
    g = sample_gamma(shape, 1.0, rng, size)
    return scale / g


def sample_half_cauchy(rng: RngStream, size=None, scale: float = 1.0):
    _positive("scale", scale)
    return _finish(scale * _half_cauchy_many(_count(size), rng.next_seed()), size)


def sample_inverse_gaussian(mu: float, lam: float, rng: RngStream, size=None):
    _positive("mu", mu)
    _positive("lam", lam)
    return _finish(_inverse_gaussian_many(float(mu), float(lam), _count(size), rng.next_seed()), size)


def sample_mvn(mean: ArrayLike, cov: np.ndarray, rng: RngStream, size: Optional[int] = None):
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (mean.size, mean.size):
        raise DimensionMismatch("mean and covariance dimensions disagree")
    low = cholesky(cov)
    k = 1 if size is None else int(size)
    z = _normal_many(k * mean.size, rng.next_seed()).reshape(k, mean.size)
    out = mean + z @ low.T
    return out[0] if size is None else out


# ---------------------------------------------------------------------------
# densities


def log_mean_exp(values: ArrayLike) -> float:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EmptyInput("log_mean_exp of an empty sequence")
    top = np.max(v)
    if top == -np.inf:
        return -np.inf
    return float(top + np.log(np.mean(np.exp(v - top))))


def gamma_logpdf(x: ArrayLike, shape: float, rate: float):
    """Gamma log density in the shape/rate parameterisation."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("gamma density evaluated at a non-positive point")
    _positive("shape", shape)
    _positive("rate", rate)
    out = shape * np.log(rate) - special.gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x
    return float(out) if out.ndim == 0 else out


def shifted_trunc_gamma_logpdf(omega_jj: float, shift: ArrayLike, shape: float, rate: float):
    """Gamma density of ``omega_jj - shift``; -inf where the indicator fails."""
    shift = np.asarray(shift, dtype=float)
    diff = omega_jj - shift
    ok = diff > 0
    out = np.full(diff.shape, -np.inf)
    if np.any(ok):
        out[ok] = gamma_logpdf(diff[ok], shape, rate)
    return float(out) if out.ndim == 0 else out


def normal_logpdf(x: ArrayLike, mean: ArrayLike = 0.0, var: ArrayLike = 1.0):
    x = np.asarray(x, dtype=float)
    out = -0.5 * (LOG_2PI + np.log(var)) - 0.5 * (x - mean) ** 2 / var
    return float(out) if np.ndim(out) == 0 else out


def mvn_logpdf(x: ArrayLike, mean: ArrayLike, cov: np.ndarray) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if x.shape != mean.shape or cov.shape != (x.size, x.size):
        raise DimensionMismatch("x, mean and cov dimensions disagree")
    low = cholesky(cov)
    z = np.linalg.solve(low, x - mean)
    return float(-0.5 * x.size * LOG_2PI - np.sum(np.log(np.diag(low))) - 0.5 * z @ z)


def mvn_logpdf_precision(x: np.ndarray, mean: np.ndarray, prec: np.ndarray):
    """Batched MVN log density parameterised by precision matrices.

    ``x`` has shape (k,), ``mean`` (m, k), ``prec`` (m, k, k).
    """
    k = x.shape[0]
    if k == 0:
        return np.zeros(mean.shape[0])
    low = np.linalg.cholesky(prec)
    diff = x[None, :] - mean
    # z = L^T diff gives diff^T P diff = |z|^2
    z = np.einsum("mji,mj->mi", low, diff)
    logdet = 2.0 * np.sum(np.log(np.diagonal(low, axis1=1, axis2=2)), axis=1)
    return -0.5 * k * LOG_2PI + 0.5 * logdet - 0.5 * np.sum(z * z, axis=1)


def inverse_gamma_logpdf(x: ArrayLike, shape: float, scale: float):
    x = np.asarray(x, dtype=float)
    out = shape * np.log(scale) - special.gammaln(shape) - (shape + 1.0) * np.log(x) - scale / x
    return float(out) if out.ndim == 0 else out


def half_cauchy_logpdf(x: ArrayLike, scale: float = 1.0):
    x = np.asarray(x, dtype=float)
    out = np.log(2.0 / (math.pi * scale)) - np.log1p((x / scale) ** 2)
    return float(out) if out.ndim == 0 else out


def inverse_gaussian_logpdf(x: ArrayLike, mu: float, lam: float):
    x = np.asarray(x, dtype=float)
    out = 0.5 * np.log(lam / (2.0 * math.pi * x**3)) - lam * (x - mu) ** 2 / (2.0 * mu**2 * x)
    return float(out) if out.ndim == 0 else out


def inverse_gaussian_cdf(x: ArrayLike, mu: float, lam: float):
    x = np.asarray(x, dtype=float)
    r = np.sqrt(lam / x)
    out = normal_cdf(r * (x / mu - 1.0)) + np.exp(2.0 * lam / mu + log_normal_cdf(-r * (x / mu + 1.0)))
    return float(out) if out.ndim == 0 else out


def laplace_logpdf(x: ArrayLike, lam: float):
    """Double exponential with rate ``lam``: (lam/2) exp(-lam |x|)."""
    x = np.asarray(x, dtype=float)
    out = np.log(0.5 * lam) - lam * np.abs(x)
    return float(out) if out.ndim == 0 else out


def normal_cdf(z: ArrayLike):
    z = np.asarray(z, dtype=float)
    out = 0.5 * special.erfc(-z / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def log_normal_cdf(z: ArrayLike):
    """log Phi(z), using the scaled complementary error function in the lower tail."""
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape)
    low = z < -5.0
    high = z > 5.0
    mid = ~(low | high)
    zl = z[low]
    out[low] = np.log(0.5 * special.erfcx(-zl / math.sqrt(2.0))) - 0.5 * zl * zl
    out[mid] = np.log(0.5 * special.erfc(-z[mid] / math.sqrt(2.0)))
    out[high] = np.log1p(-0.5 * special.erfc(z[high] / math.sqrt(2.0)))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# modified Bessel function of the second kind


def _log_bessel_k_scalar(order: float, x: float) -> float:
    if not x > 0:
        raise DomainError(f"Bessel K needs x > 0, got {x}")
    nu = abs(float(order))
    steps = int(math.floor(nu))
    nu0 = nu - steps
    # exponentially scaled base values avoid underflow for large x
    log_k0 = math.log(special.kve(nu0, x)) - x
    if steps == 0:
        return log_k0
    log_k1 = math.log(special.kve(nu0 + 1.0, x)) - x
    total = log_k1
    ratio = math.exp(log_k1 - log_k0)
    q = nu0 + 1.0
    for _ in range(steps - 1):
        # K_{q+1} = K_{q-1} + (2q/x) K_q, propagated as the ratio K_{q+1}/K_q
        ratio = 1.0 / ratio + 2.0 * q / x
        total += math.log(ratio)
        q += 1.0
    return total


def log_bessel_k(order: ArrayLike, x: ArrayLike):
    """log K_order(x) via upward recurrence from the two lowest orders."""
    out = np.vectorize(_log_bessel_k_scalar, otypes=[float])(order, x)
    return float(out) if out.ndim == 0 else out


def bessel_k(order: float, x: float) -> float:
    lk = _log_bessel_k_scalar(order, x)
    if lk > 709.0:
        raise BesselOverflow(lk)
    return math.exp(lk)


# ---------------------------------------------------------------------------
# generalized inverse Gaussian


@dataclass(frozen=True)
class GigParams:
    """GIG(a, b, q): density proportional to x^(q-1) exp(-(a x + b / x) / 2)."""

    a: float
    b: float
    q: float

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError("GIG parameter a must be positive")
        if not self.b >= 0:
            raise DomainError("GIG parameter b must be non-negative")


def gig_logpdf(x: ArrayLike, params: GigParams):
    a, b, q = params.a, params.b, params.q
    if b < GIG_B_TINY:
        raise DegenerateGig("b == 0: use the gamma(q, a/2) limit")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("GIG density evaluated at a non-positive point")
    norm = 0.5 * q * math.log(a / b) - math.log(2.0) - _log_bessel_k_scalar(q, math.sqrt(a * b))
    out = norm + (q - 1.0) * np.log(x) - 0.5 * (a * x + b / x)
    return float(out) if out.ndim == 0 else out


def gig_or_gamma_logpdf(x: float, params: GigParams) -> float:
    """GIG log density, falling back to Gamma(q, a/2) when b vanishes."""
    try:
        return gig_logpdf(x, params)
    except DegenerateGig:
        return gamma_logpdf(x, params.q, 0.5 * params.a)


def multigammaln(a: float, p: int) -> float:
    return float(special.multigammaln(a, p))

