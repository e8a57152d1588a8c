"""Command-line front end.

Exit codes: 0 success, 1 selftest failure, 2 configuration error,
3 parse error, 4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .em import MODES, CONSERVATIVE_XI, FitConfig, fit
from .exceptions import ConfigError, DegenerateModelError, DegenerateSampleError, ParseError
from .fdrctl import step_up
from .model import P_MAX, P_MIN, PairedPValueSet, StateProportions, lfdr
from .simkit import PROPOSED, SimConfig, paper_grid, replicate_experiment

log = logging.getLogger("repmix")

HEADER = ("feature_id", "p1", "p2")
ANALYZE_METHODS = (PROPOSED,) + baselines.METHODS

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_PARSE, EXIT_DEGENERATE = 0, 1, 2, 3, 4


class OutOfRangeError(ParseError):
    def __init__(self, lines):
        self.lines = list(lines)
        shown = ", ".join(map(str, self.lines[:20]))
        more = "" if len(self.lines) <= 20 else f" (+{len(self.lines) - 20} more)"
        super().__init__(f"p-values outside [0, 1] on lines {shown}{more}")


def fmt(x: float) -> str:
    """Shortest round-trip decimal form."""
    return repr(float(x))


def ingest(path) -> PairedPValueSet:
    """Read a ``feature_id<TAB>p1<TAB>p2`` table with a header row."""
    ids, p1, p2, lines = [], [], [], []
    bad = []
    with open(path, encoding="utf-8", newline="") as fh:
        header_seen = False
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if not header_seen:
                if tuple(f.strip() for f in fields) != HEADER:
                    raise ParseError("expected header " + "<TAB>".join(HEADER), lineno)
                header_seen = True
                continue
            if len(fields) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}", lineno)
            try:
                a, b = float(fields[1]), float(fields[2])
            except ValueError:
                raise ParseError(f"cannot parse p-values {fields[1]!r}, {fields[2]!r}", lineno) from None
            if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
                bad.append(lineno)
            ids.append(fields[0])
            p1.append(a)
            p2.append(b)
            lines.append(lineno)
    if not header_seen:
        raise ParseError("empty file, no header")
    if bad:
        raise OutOfRangeError(bad)
    if not ids:
        raise ParseError("no data rows")
    p1a, p2a = np.array(p1), np.array(p2)
    clamped = (p1a < P_MIN) | (p1a > P_MAX) | (p2a < P_MIN) | (p2a > P_MAX)
    if clamped.any():
        where = [lines[i] for i in np.flatnonzero(clamped)[:10]]
        warnings.warn(
            f"{int(clamped.sum())} rows clamped into [{P_MIN}, {P_MAX}] (lines {where})",
            stacklevel=2,
        )
    dups = [k for k, c in Counter(ids).items() if c > 1]
    if dups:
        warnings.warn(f"{len(dups)} duplicate feature ids, e.g. {dups[:5]}", stacklevel=2)
    return PairedPValueSet(p1a, p2a, ids)


def write_pvalues(data: PairedPValueSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(HEADER) + "\n")
        for fid, a, b in zip(data.feature_ids, data.p1, data.p2):
            fh.write(f"{fid}\t{fmt(a)}\t{fmt(b)}\n")


@dataclass
class RunConfig:
    command: str
    input_path: str = None
    output_path: str = None
    alpha: float = 0.05
    methods: tuple = ANALYZE_METHODS
    fit: FitConfig = field(default_factory=FitConfig)
    sim: SimConfig = None
    paper_grid: bool = False
    reps: int = 100
    output_format: str = "tsv"

    def validate(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.output_format not in ("tsv", "json"):
            raise ConfigError(f"unknown format {self.output_format!r}")
        if self.command in ("analyze", "simulate"):
            if not self.methods:
                raise ConfigError("at least one method is required")
            allowed = ANALYZE_METHODS + (("oracle",) if self.command == "simulate" else ())
            unknown = [m for m in self.methods if m not in allowed]
            if unknown:
                raise ConfigError(f"unknown methods {unknown}; choose from {allowed}")
            if not self.output_path:
                raise ConfigError("--output is required")
        if self.command == "analyze" and not self.input_path:
            raise ConfigError("--input is required")
        if self.command == "simulate" and self.reps < 1:
            raise ConfigError("--reps must be at least 1")


def diagnostics_path(output_path) -> Path:
    p = Path(output_path)
    return p.with_name(p.name + ".diagnostics.json")


def analyze(config: RunConfig) -> int:
    """Run the selected methods on a p-value table and write results."""
    config.validate()
    data = ingest(config.input_path)
    columns = {"feature_id": list(data.feature_ids), "p1": data.p1, "p2": data.p2}
    counts = {}
    diag = {"m": data.m, "alpha": config.alpha, "methods": list(config.methods)}
    if PROPOSED in config.methods:
        res = fit(data, config.fit)
        values = lfdr(res.model, data.p1, data.p2)
        rej = step_up(values, config.alpha)
        xi = res.model.proportions
        columns["lfdr"] = values
        columns["reject_proposed"] = rej.reject
        counts[PROPOSED] = rej.k_rejected
        diag.update(
            {
                "xi": {"xi00": xi.xi00, "xi01": xi.xi01, "xi10": xi.xi10, "xi11": xi.xi11},
                "em": {
                    "mode": res.mode,
                    "iterations": res.iterations,
                    "converged": res.converged,
                    "log_likelihood": res.log_likelihood,
                    "tolerance": config.fit.tolerance,
                    "max_iterations": config.fit.max_iterations,
                    "lambdas": [config.fit.lambda1, config.fit.lambda2, config.fit.lambda3],
                },
                "knots": {"f1": res.model.f1.n_knots, "f2": res.model.f2.n_knots},
                "lambda_hat": rej.lambda_hat,
                "estimated_fdp": rej.estimated_fdp,
            }
        )
    lambdas = (config.fit.lambda1, config.fit.lambda2, config.fit.lambda3)
    for method in config.methods:
        if method == PROPOSED:
            continue
        r = baselines.run_baseline(method, data, config.alpha, lambdas)
        columns[f"reject_{method}"] = r.reject
        counts[method] = r.n_rejected
    diag["rejections"] = counts

    names = list(columns)
    rows = []
    for i in range(data.m):
        row = []
        for name in names:
            v = columns[name][i]
            if isinstance(v, (bool, np.bool_)):
                row.append(int(v))
            elif isinstance(v, (float, np.floating)):
                row.append(float(v))
            else:
                row.append(v)
        rows.append(row)
    out = Path(config.output_path)
    if config.output_format == "tsv":
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write("\t".join(names) + "\n")
            for row in rows:
                fh.write("\t".join(fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    else:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump([dict(zip(names, row)) for row in rows], fh, indent=1)
            fh.write("\n")
    with open(diagnostics_path(out), "w", encoding="utf-8") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("wrote %s (%s)", out, ", ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


SIM_COLUMNS = ("procedure", "m", "xi00", "xi01", "xi10", "xi11", "mu1", "mu2", "sigma1",
               "sigma2", "dependence", "block_size", "rho", "seed", "alpha", "n_reps",
               "metric", "value", "mc_se")


def simulate(config: RunConfig) -> int:
    """Monte Carlo FDR/power table in long format."""
    config.validate()
    settings = [config.sim]
    if config.paper_grid:
        base = config.sim
        kw = dict(m=base.m, sigma1=base.sigma1, sigma2=base.sigma2, dependence=base.dependence,
                  block_size=base.block_size, rho=base.rho, seed=base.seed)
        settings = [s for mu in (2.0, 2.5, 3.0) for s in paper_grid(mu=mu, **kw)]
    long_rows = []
    for cfg in settings:
        res = replicate_experiment(cfg, config.methods, config.alpha, config.reps, config.fit)
        for row in res.table():
            for metric in ("fdr", "power"):
                long_rows.append({**{k: row[k] for k in SIM_COLUMNS[:16]}, "metric": metric,
                                  "value": row[metric], "mc_se": row[f"{metric}_se"]})
            long_rows.append({**{k: row[k] for k in SIM_COLUMNS[:16]}, "metric": "rejections",
                              "value": row["mean_rejections"], "mc_se": float("nan")})
    if config.output_format == "tsv":
        with open(config.output_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(SIM_COLUMNS)
            for r in long_rows:
                w.writerow(fmt(r[c]) if isinstance(r[c], float) else r[c] for c in SIM_COLUMNS)
    else:
        with open(config.output_path, "w", encoding="utf-8") as fh:
            json.dump(long_rows, fh, indent=1)
            fh.write("\n")
    return EXIT_OK


def selftest(config: RunConfig = None) -> int:
    """Run the embedded oracle checks and print one line per check."""
    from . import oracles
    from .em import FULL_EM
    from .fdrctl import critical_value
    from .grenander import WeightedSample, weighted_loglik, weighted_monotone_mle

    rng = np.random.default_rng(20240101)
    results = []

    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 7))
        x = rng.uniform(0.001, 0.999, n)
        w = rng.uniform(0.05, 1.0, n)
        dens = weighted_monotone_mle(WeightedSample(x, w))
        ref, _ = oracles.block_partition_mle(x, w)
        worst = max(worst, abs(weighted_loglik(dens, x, w) - ref))
    results.append(("PAVA vs block-partition brute force", worst <= 1e-9, worst))

    mismatches = 0
    for _ in range(2000):
        n = int(rng.integers(1, 9))
        v = rng.integers(0, 21, n) / 20.0
        k = step_up(v, 0.1).k_rejected
        same_cv = int((v <= critical_value(v, 0.1)).sum()) == k
        mismatches += (k != oracles.stepup_bruteforce(v, 0.1, 20)) or not same_cv
    results.append(("step-up vs brute force", mismatches == 0, mismatches))

    drop = 0.0
    for rep in range(5):
        m = 300
        theta = rng.random((2, m)) < 0.3
        p = np.where(theta, rng.beta(0.3, 4.0, (2, m)), rng.random((2, m)))
        res = fit(PairedPValueSet(p[0], p[1]), FitConfig(mode=FULL_EM, max_iterations=100, tolerance=1e-12))
        drop = max(drop, -float(np.min(np.diff(res.log_likelihood_trace))))
    results.append(("EM ascent", drop <= 1e-9, drop))

    for name, ok, stat in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({stat:g})")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_SELFTEST


def _lambda(text):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repmix", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output")
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--methods", default=",".join(ANALYZE_METHODS),
                       help="comma-separated subset of " + ",".join(ANALYZE_METHODS))
        p.add_argument("--mode", choices=MODES, default=CONSERVATIVE_XI)
        p.add_argument("--lambda", dest="lam", type=_lambda, default=0.5)
        p.add_argument("--max-iterations", type=int, default=500)
        p.add_argument("--tolerance", type=float, default=1e-6)
        p.add_argument("--format", dest="output_format", choices=("tsv", "json"), default="tsv")

    a = sub.add_parser("analyze", help="analyze a paired p-value table")
    a.add_argument("--input")
    common(a)

    s = sub.add_parser("simulate", help="Monte Carlo FDR and power")
    common(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--m", type=int, default=10_000)
    s.add_argument("--xi00", type=float, default=0.8)
    s.add_argument("--xi01", type=float, default=0.095)
    s.add_argument("--xi10", type=float, default=0.095)
    s.add_argument("--xi11", type=float, default=0.01)
    s.add_argument("--mu1", type=float, default=2.5)
    s.add_argument("--mu2", type=float, default=2.5)
    s.add_argument("--sigma1", type=float, default=1.0)
    s.add_argument("--sigma2", type=float, default=1.0)
    s.add_argument("--dependence", choices=("independent", "block"), default="independent")
    s.add_argument("--block-size", type=int, default=100)
    s.add_argument("--rho", type=float, default=0.2)
    s.add_argument("--paper-grid", action="store_true",
                   help="run the default xi00 x mu grid instead of a single setting")

    sub.add_parser("selftest", help="run the embedded oracle checks")
    return parser


def _run_config(args) -> RunConfig:
    if args.command == "selftest":
        return RunConfig("selftest")
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    fit_cfg = FitConfig(mode=args.mode, max_iterations=args.max_iterations,
                        tolerance=args.tolerance, lambda1=args.lam, lambda2=args.lam,
                        lambda3=args.lam)
    cfg = RunConfig(args.command, output_path=args.output, alpha=args.alpha, methods=methods,
                    fit=fit_cfg, output_format=args.output_format)
    if args.command == "analyze":
        cfg.input_path = args.input
    else:
        try:
            props = StateProportions(args.xi00, args.xi01, args.xi10, args.xi11)
            cfg.sim = SimConfig(m=args.m, proportions=props, mu1=args.mu1, mu2=args.mu2,
                                sigma1=args.sigma1, sigma2=args.sigma2,
                                dependence=args.dependence, block_size=args.block_size,
                                rho=args.rho, seed=args.seed)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        cfg.reps = args.reps
        cfg.paper_grid = args.paper_grid
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _run_config(args)
        if cfg.command == "analyze":
            return analyze(cfg)
        if cfg.command == "simulate":
            return simulate(cfg)
        return selftest(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, OSError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (DegenerateModelError, DegenerateSampleError) as e:
        print(f"numerical degeneracy: {e}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
