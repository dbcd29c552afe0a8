"""BGL and GHS evidence at p = 2 against the one-dimensional quadrature reference.

The telescoping estimate leaves out the normalising constant of the
element-wise prior, so log C is subtracted before comparing.
"""

import argparse
import math

from ggm_evidence.config import RunConfig
from ggm_evidence.distributions import RngStream
from ggm_evidence.evidence import estimate_with_permutations
from ggm_evidence.oracles import C_BGL, C_GHS, bgl_log_marginal_p2, ghs_log_marginal_p2
from ggm_evidence.priors import Bgl, Ghs, sample_elementwise_prior

SETTINGS = [(0.4, 4), (1.0, 5), (2.0, 10), (2.0, 50)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--perms", type=int, default=25)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    families = [("bgl", Bgl, bgl_log_marginal_p2, C_BGL), ("ghs", Ghs, ghs_log_marginal_p2, C_GHS)]
    print(f"{'prior':>5} {'lam':>5} {'n':>4} {'reference':>11} {'estimate':>11} {'sd':>7}")
    for name, cls, oracle, c in families:
        for k, (lam, n) in enumerate(SETTINGS):
            rng = RngStream(args.seed, 100 * len(name) + k)
            prior = cls(lam)
            omega = sample_elementwise_prior(prior, 2, rng, 1)[0][0]
            y = rng.generator.multivariate_normal([0.0, 0.0], omega_inv(omega), size=n)
            ref = oracle(y.T @ y, lam, n, method="quadrature").log_marginal
            est = estimate_with_permutations(y, prior, RunConfig(prior, n_perm=args.perms, seed=args.seed))
            print(f"{name:>5} {lam:>5} {n:>4} {ref:>11.4f} {est.mean - math.log(c):>11.4f} {est.sd:>7.4f}")


def omega_inv(omega):
    a, b, d = omega[0, 0], omega[0, 1], omega[1, 1]
    det = a * d - b * b
    return [[d / det, -b / det], [-b / det, a / det]]


if __name__ == "__main__":
    main()
