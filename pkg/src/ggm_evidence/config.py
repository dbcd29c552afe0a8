"""Run configuration."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .priors import Bgl, Ghs, GWishart, PriorSpec, Wishart

SCHEMA_VERSION = 1


def default_sizes(prior: PriorSpec) -> tuple[int, int]:
    """(draws, burn-in) defaults: 10000/2000 for G-Wishart, 5000/1000 otherwise."""
    if isinstance(prior, GWishart):
        return 10_000, 2_000
    return 5_000, 1_000


@dataclass
class RunConfig:
    prior: PriorSpec
    m: Optional[int] = None
    burnin: Optional[int] = None
    n_perm: int = 25
    seed: int = 0
    out_path: Optional[str] = None
    data_path: Optional[str] = None
    lambda_grid: Sequence[float] = ()
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    center: bool = False
    ghs_mc_draws: int = 200_000

    def __post_init__(self):
        dm, db = default_sizes(self.prior)
        if self.m is None:
            self.m = dm
        if self.burnin is None:
            self.burnin = db
        if self.m < 1:
            raise ConfigError("m must be at least 1")
        if self.burnin < 0:
            raise ConfigError("burnin must be non-negative")
        if self.n_perm < 1:
            raise ConfigError("n_perm must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def prior_dict(self) -> dict:
        return prior_to_dict(self.prior)

    def as_dict(self) -> dict:
        return {
            "prior": self.prior_dict(),
            "m": self.m,
            "burnin": self.burnin,
            "n_perm": self.n_perm,
            "seed": self.seed,
            "lambda_grid": list(map(float, self.lambda_grid)),
            "center": self.center,
            "ghs_mc_draws": self.ghs_mc_draws,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def prior_to_dict(prior: PriorSpec) -> dict:
    if isinstance(prior, Wishart):
        return {"family": "wishart", "alpha": prior.alpha, "v": prior.v_matrix.tolist()}
    if isinstance(prior, Bgl):
        return {"family": "bgl", "lambda": prior.lam}
    if isinstance(prior, Ghs):
        return {"family": "ghs", "lambda": prior.lam}
    if isinstance(prior, GWishart):
        return {"family": "gwishart", "alpha": prior.alpha, "v": prior.v_matrix.tolist(),
                "graph": prior.graph.adj.tolist()}
    raise ConfigError(f"unknown prior {prior!r}")


def data_hash(y: np.ndarray) -> str:
    y = np.ascontiguousarray(y, dtype=np.float64)
    h = hashlib.sha256()
    h.update(str(y.shape).encode())
    h.update(y.tobytes())
    return h.hexdigest()[:16]
