"""Harmonic mean, AIS and nested sampling next to the telescoping estimate on Wishart data."""

import argparse

import numpy as np

from ggm_evidence.baselines import ais, harmonic_mean, nested_sampling, posterior_loglik_draws
from ggm_evidence.config import RunConfig
from ggm_evidence.distributions import RngStream
from ggm_evidence.evidence import estimate_with_permutations
from ggm_evidence.oracles import wishart_log_marginal_exact
from ggm_evidence.priors import Wishart, sample_wishart_bartlett


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, nargs="+", default=[2, 5, 10])
    ap.add_argument("--m", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for p in args.p:
        n, alpha = 5 * p, p + 2.0
        rng = RngStream(args.seed, p)
        prior = Wishart(np.eye(p), alpha)
        omega = sample_wishart_bartlett(prior.v_matrix, alpha, rng, 1)[0]
        y = rng.generator.multivariate_normal(np.zeros(p), np.linalg.inv(omega), size=n)
        exact = wishart_log_marginal_exact(y.T @ y, prior.v_matrix, alpha, n).log_marginal
        tel = estimate_with_permutations(y, prior, RunConfig(prior, m=args.m, n_perm=5, seed=args.seed))
        ll = posterior_loglik_draws(y, prior, args.m, 1000, RngStream(args.seed, 1000 + p))
        rows = [("telescoping", tel.mean, tel.sd / np.sqrt(5)), *(
            (r.method, r.log_marginal, r.se) for r in (
                harmonic_mean(ll),
                ais(prior, y, args.m, RngStream(args.seed, 2000 + p)),
                nested_sampling(prior, y, args.m, RngStream(args.seed, 3000 + p))))]
        print(f"p={p} n={n} exact {exact:.3f}")
        for name, val, se in rows:
            print(f"  {name:>12} {val:12.3f}  diff {val - exact:+9.3f}  se {se:.3f}")


if __name__ == "__main__":
    main()
