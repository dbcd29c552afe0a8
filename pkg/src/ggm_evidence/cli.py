"""Command-line interface.

Subcommands: simulate, evidence, sweep, bf, predict, sample-gwishart,
baselines, oracle. Data, graphs and scale matrices are headerless CSV files;
reports are single JSON documents carrying ``"schema": 1``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure
(a JSON error report is still written).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .baselines import ais, harmonic_mean, nested_sampling, posterior_loglik_draws
from .config import SCHEMA_VERSION, RunConfig, data_hash, prior_to_dict
from .distributions import RngStream
from .errors import (
    BesselOverflow,
    ConfigError,
    DegenerateGig,
    DegenerateIndicator,
    EvidenceError,
    IncompatibleReports,
    NotPositiveDefinite,
    QuadratureFailure,
    ShapeError,
)
from .evidence import estimate_with_permutations, mvn_loglik
from .graphs import Graph, complete_graph, random_graph
from .linalg import spd_check
from .oracles import (
    bgl_log_marginal_p2,
    ghs_log_marginal_p2,
    gwishart_complete_oracle,
    wishart_log_marginal_exact,
)
from .priors import (
    Bgl,
    Ghs,
    GWishart,
    PriorSpec,
    Wishart,
    sample_elementwise_prior,
    sample_gwishart_prior,
    sample_prior_gibbs,
    sample_wishart_bartlett,
    tridiagonal_scale,
)

NUMERIC_ERRORS = (NotPositiveDefinite, DegenerateIndicator, DegenerateGig, QuadratureFailure, BesselOverflow,
                  FloatingPointError)
CONFIG_ERRORS = (EvidenceError, OSError, ValueError, KeyError)


# ---------------------------------------------------------------------------
# I/O helpers


def read_matrix(path: str) -> np.ndarray:
    a = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{path}: missing or non-finite entries")
    return a


def write_matrix(path: str, a: np.ndarray):
    np.savetxt(path, np.atleast_2d(a), delimiter=",", fmt="%.17g")


def load_data(path: str, center: bool = False) -> np.ndarray:
    y = read_matrix(path)
    if y.shape[0] < 2:
        raise ConfigError("data needs at least two rows")
    if center:
        y = y - y.mean(axis=0)
    return y


def artifact_version() -> str:
    """Package version, with the git commit appended when available."""
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def emit(report: dict, out: Optional[str]):
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o)}")


def _finite(x: float):
    """JSON has no infinities; encode them as strings."""
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def base_report(command: str, cfg: Optional[RunConfig] = None, y: Optional[np.ndarray] = None) -> dict:
    rep = {"schema": SCHEMA_VERSION, "command": command, "version": artifact_version()}
    if cfg is not None:
        rep["config"] = cfg.as_dict()
        rep["config_hash"] = cfg.config_hash()
    if y is not None:
        rep["data_hash"] = data_hash(y)
    return rep


# ---------------------------------------------------------------------------
# prior construction


def build_prior(args, p: int) -> PriorSpec:
    """Prior from the command line; a non-SPD scale matrix is an input error."""
    try:
        return _build_prior(args, p)
    except NotPositiveDefinite as exc:
        raise ConfigError(f"scale matrix: {exc}") from exc


def _build_prior(args, p: int) -> PriorSpec:
    name = args.prior
    if name is None:
        raise ConfigError("--prior is required")
    if name in ("bgl", "ghs"):
        if args.lam is None:
            raise ConfigError("--lambda is required for bgl/ghs")
        return Bgl(args.lam) if name == "bgl" else Ghs(args.lam)
    if name == "wishart":
        alpha = args.alpha if args.alpha is not None else p + 2.0
        v = read_matrix(args.v_csv) if args.v_csv else tridiagonal_scale(p, alpha)
        if v.shape != (p, p):
            raise ConfigError("V must be p x p")
        return Wishart(v, alpha)
    if name == "gwishart":
        alpha = args.alpha if args.alpha is not None else 2.0
        v = read_matrix(args.v_csv) if args.v_csv else np.eye(p)
        if args.graph_csv:
            graph = Graph(read_matrix(args.graph_csv).astype(int))
        else:
            graph = complete_graph(p)
        if v.shape != (p, p) or graph.p != p:
            raise ConfigError("graph and V must be p x p")
        return GWishart(graph, v, alpha)
    raise ConfigError(f"unknown prior {name!r}")


def build_config(args, prior: PriorSpec, **extra) -> RunConfig:
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    return RunConfig(prior, m=args.m, burnin=args.burnin, n_perm=args.perms, seed=args.seed,
                     out_path=args.out, data_path=getattr(args, "data", None), workers=workers,
                     center=bool(getattr(args, "center", False)), **extra)


def parse_grid(text: Optional[str]) -> list[float]:
    if not text:
        return []
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --lambda-grid {text!r}") from exc
    if not vals or any(v <= 0 for v in vals):
        raise ConfigError("--lambda-grid needs positive values")
    return vals


# ---------------------------------------------------------------------------
# commands


def draw_truth(prior: PriorSpec, p: int, rng: RngStream) -> tuple[np.ndarray, str]:
    """One precision matrix from the prior, and how it was drawn."""
    if isinstance(prior, Wishart):
        return sample_wishart_bartlett(prior.v_matrix, prior.alpha, rng, 1)[0], "bartlett"
    if isinstance(prior, GWishart):
        return sample_gwishart_prior(prior, 1, 2000, rng)[0], "columnwise_chain"
    draws, _ = sample_elementwise_prior(prior, p, rng, 1, max_tries=100_000)
    if draws is not None:
        return draws[0], "elementwise_rejection"
    # SPD acceptance collapses with p; use the data-free latent Gibbs chain instead
    return sample_prior_gibbs(prior, p, rng), "latent_gibbs_chain"


def prediction_loss(y_test: np.ndarray, omega: np.ndarray) -> float:
    """sqrt(sum_j || y_j + sum_{k != j} y_k w_jk / w_jj ||^2)."""
    y_test = np.asarray(y_test, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if y_test.shape[1] != omega.shape[0]:
        raise ShapeError("test data and precision dimensions disagree")
    resid = (y_test @ omega) / np.diag(omega)[None, :]
    return float(np.sqrt(np.sum(resid * resid)))


def cmd_simulate(args) -> int:
    if args.p is None or args.n is None:
        raise ConfigError("simulate needs --p and --n")
    p, n = int(args.p), int(args.n)
    if p < 1 or n < 2:
        raise ConfigError("need p >= 1 and n >= 2")
    rng = RngStream(args.seed, 0)
    prior = build_prior(args, p)
    if isinstance(prior, GWishart) and not args.graph_csv:
        prior = GWishart(random_graph(p, args.edge_prob, rng.generator), prior.v_matrix, prior.alpha)
    omega, how = draw_truth(prior, p, rng)
    cov = np.linalg.inv(omega)
    y = rng.generator.multivariate_normal(np.zeros(p), 0.5 * (cov + cov.T), size=n, method="cholesky")
    prefix = Path(args.out or "sim")
    prefix.parent.mkdir(parents=True, exist_ok=True)
    write_matrix(f"{prefix}_y.csv", y)
    write_matrix(f"{prefix}_omega.csv", omega)
    rep = base_report("simulate", y=y)
    rep.update({"prior": prior_to_dict(prior), "seed": args.seed, "n": n, "p": p, "truth_sampler": how,
                "files": {"data": f"{prefix}_y.csv", "omega": f"{prefix}_omega.csv"}})
    if isinstance(prior, GWishart):
        write_matrix(f"{prefix}_graph.csv", prior.graph.adj)
        rep["files"]["graph"] = f"{prefix}_graph.csv"
    emit(rep, f"{prefix}_config.json")
    return 0


def _require_data(args) -> np.ndarray:
    if not args.data:
        raise ConfigError("--data is required")
    return load_data(args.data, args.center)


def _estimate_block(est) -> dict:
    d = est.to_dict()
    d["se"] = est.sd / math.sqrt(est.per_permutation.size) if est.per_permutation.size > 1 else est.pooled_se
    d["wall_time"] = est.wall_time
    d["includes_constant"] = bool(est.first.includes_constant) if est.first is not None else True
    return d


def cmd_evidence(args) -> int:
    y = _require_data(args)
    prior = build_prior(args, y.shape[1])
    cfg = build_config(args, prior)
    est = estimate_with_permutations(y, prior, cfg)
    rep = base_report("evidence", cfg, y)
    rep["estimate"] = _estimate_block(est)
    rep["family"] = prior_to_dict(prior)["family"]
    if args.trace_csv and est.first is not None and est.first.ll_trace is not None:
        np.savetxt(args.trace_csv, est.first.ll_trace[:, None], delimiter=",", fmt="%.17g")
    emit(rep, args.out)
    return 0


def cmd_sweep(args) -> int:
    y = _require_data(args)
    if args.prior not in ("bgl", "ghs"):
        raise ConfigError("sweep needs --prior bgl or ghs")
    grid = parse_grid(args.lambda_grid)
    if not grid:
        raise ConfigError("sweep needs --lambda-grid")
    rows = []
    for lam in grid:
        args.lam = lam
        prior = build_prior(args, y.shape[1])
        cfg = build_config(args, prior, lambda_grid=grid)
        est = estimate_with_permutations(y, prior, cfg)
        blk = _estimate_block(est)
        rows.append({"lambda": lam, "log_marginal": blk["mean"], "se": blk["se"], "sd": blk["sd"]})
    best = max(rows, key=lambda r: r["log_marginal"])
    rep = base_report("sweep", cfg, y)
    rep.update({"family": args.prior, "rows": rows, "lambda_max": best["lambda"], "includes_constant": False})
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("lambda,log_marginal,se\n")
            for r in rows:
                fh.write(f"{r['lambda']!r},{r['log_marginal']!r},{r['se']!r}\n")
    emit(rep, args.out)
    return 0


def bayes_factor(rep_a: dict, rep_b: dict) -> tuple[float, float]:
    """log BF of report a against report b with se sqrt(se_a^2 + se_b^2)."""
    if rep_a.get("data_hash") != rep_b.get("data_hash"):
        raise IncompatibleReports("reports were computed on different data")
    if rep_a.get("family") != rep_b.get("family"):
        raise IncompatibleReports("reports use different prior families")
    ea, eb = rep_a["estimate"], rep_b["estimate"]
    return float(ea["mean"] - eb["mean"]), float(math.hypot(ea["se"], eb["se"]))


def cmd_bf(args) -> int:
    rep_a = json.loads(Path(args.report_a).read_text())
    rep_b = json.loads(Path(args.report_b).read_text())
    val, se = bayes_factor(rep_a, rep_b)
    rep = base_report("bf")
    rep.update({"log_bf": val, "se": se, "data_hash": rep_a.get("data_hash"),
                "reports": [args.report_a, args.report_b]})
    emit(rep, args.out)
    return 0


def cmd_predict(args) -> int:
    if not (args.train and args.test and args.omega_csv):
        raise ConfigError("predict needs --train, --test and --omega-csv")
    train = load_data(args.train, args.center)
    test = load_data(args.test, args.center)
    omega = read_matrix(args.omega_csv)
    if train.shape[1] != omega.shape[0] or test.shape[1] != omega.shape[0]:
        raise ShapeError("data and precision dimensions disagree")
    rep = base_report("predict", y=train)
    rep.update({"prediction_loss": prediction_loss(test, omega), "fitted_loglik": mvn_loglik(train, omega)})
    emit(rep, args.out)
    return 0


def cmd_sample_gwishart(args) -> int:
    if not args.graph_csv:
        raise ConfigError("sample-gwishart needs --graph-csv")
    graph = Graph(read_matrix(args.graph_csv).astype(int))
    p = graph.p
    v = read_matrix(args.v_csv) if args.v_csv else np.eye(p)
    alpha = args.alpha if args.alpha is not None else 2.0
    prior = GWishart(graph, v, alpha)
    m = args.m or 10_000
    burnin = args.burnin if args.burnin is not None else 2_000
    draws = sample_gwishart_prior(prior, m, burnin, RngStream(args.seed, 0))
    mean = draws.mean(axis=0)
    nb = min(20, m)
    size = m // nb
    batches = draws[: size * nb].reshape(nb, size, p, p).mean(axis=1)
    se = batches.std(axis=0, ddof=1) / math.sqrt(nb) if nb > 1 else np.full((p, p), math.nan)
    prefix = args.out or "gwishart"
    write_matrix(f"{prefix}_mean.csv", mean)
    write_matrix(f"{prefix}_se.csv", se)
    rep = base_report("sample-gwishart")
    rep.update({"prior": prior_to_dict(prior), "m": m, "burnin": burnin, "seed": args.seed,
                "all_spd": bool(all(spd_check(d).is_spd for d in draws)),
                "files": {"mean": f"{prefix}_mean.csv", "se": f"{prefix}_se.csv"}})
    emit(rep, f"{prefix}_summary.json")
    return 0


def cmd_baselines(args) -> int:
    y = _require_data(args)
    prior = build_prior(args, y.shape[1])
    cfg = build_config(args, prior)
    rng = RngStream(args.seed, 1)
    ll = posterior_loglik_draws(y, prior, cfg.m, cfg.burnin, rng)
    results = [harmonic_mean(ll), ais(prior, y, cfg.m, RngStream(args.seed, 2)),
               nested_sampling(prior, y, cfg.m, RngStream(args.seed, 3))]
    rep = base_report("baselines", cfg, y)
    rep["family"] = prior_to_dict(prior)["family"]
    rep["results"] = [{k: _finite(v) for k, v in r.to_dict().items()} for r in results]
    emit(rep, args.out)
    return 0


def cmd_oracle(args) -> int:
    y = _require_data(args)
    n, p = y.shape
    s = y.T @ y
    prior = build_prior(args, p)
    if isinstance(prior, Wishart):
        res = wishart_log_marginal_exact(s, prior.v_matrix, prior.alpha, n)
    elif isinstance(prior, GWishart):
        if not prior.graph.is_complete():
            raise ConfigError("the G-Wishart oracle needs a complete graph")
        res = gwishart_complete_oracle(s, prior.v_matrix, prior.alpha, n)
    else:
        if p != 2:
            raise ConfigError("BGL/GHS oracles exist only for p = 2")
        fn = bgl_log_marginal_p2 if isinstance(prior, Bgl) else ghs_log_marginal_p2
        res = fn(s, prior.lam, n, rng=RngStream(args.seed, 0))
    rep = base_report("oracle", y=y)
    rep.update({"prior": prior_to_dict(prior), "log_marginal": res.log_marginal, "mc_se": res.mc_se,
                "method": res.method})
    emit(rep, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--prior", choices=["wishart", "bgl", "ghs", "gwishart"])
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--v-csv")
    common.add_argument("--graph-csv")
    common.add_argument("--data")
    common.add_argument("--m", type=int)
    common.add_argument("--burnin", type=int)
    common.add_argument("--perms", type=int, default=25)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out")
    common.add_argument("--workers", type=int)
    common.add_argument("--center", action="store_true")
    common.add_argument("--lambda-grid")

    parser = argparse.ArgumentParser(prog="ggm-evidence", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", parents=[common], help="draw a truth from the prior and data from it")
    sp.add_argument("--p", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--edge-prob", type=float, default=0.5)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("evidence", parents=[common], help="telescoping log marginal likelihood")
    sp.add_argument("--trace-csv", help="write the log-likelihood trace of the first run")
    sp.set_defaults(func=cmd_evidence)

    sp = sub.add_parser("sweep", parents=[common], help="log marginal over a lambda grid")
    sp.add_argument("--csv", help="also write lambda,log_marginal,se rows")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("bf", parents=[common], help="log Bayes factor of two evidence reports")
    sp.add_argument("report_a")
    sp.add_argument("report_b")
    sp.set_defaults(func=cmd_bf)

    sp = sub.add_parser("predict", parents=[common], help="prediction loss and fitted log-likelihood")
    sp.add_argument("--train")
    sp.add_argument("--test")
    sp.add_argument("--omega-csv")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("sample-gwishart", parents=[common], help="column-wise G-Wishart prior draws")
    sp.set_defaults(func=cmd_sample_gwishart)

    sp = sub.add_parser("baselines", parents=[common], help="harmonic mean, AIS and nested sampling")
    sp.set_defaults(func=cmd_baselines)

    sp = sub.add_parser("oracle", parents=[common], help="closed-form or p = 2 reference value")
    sp.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        err, code = exc, 3
    except CONFIG_ERRORS as exc:
        err, code = exc, 2
    rep = {"schema": SCHEMA_VERSION, "command": args.command, "version": artifact_version(),
           "error": type(err).__name__, "message": str(err), "exit_code": code,
           "elapsed": time.perf_counter() - t0}
    text = json.dumps(rep, indent=2, sort_keys=True)
    print(text, file=sys.stderr)
    if code == 3 and getattr(args, "out", None) and args.command in ("evidence", "sweep", "baselines", "oracle"):
        Path(args.out).write_text(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
