import argparse
import json
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from loguru import logger

from src.algebra.tracial import TracialAlgebra, ToolkitError
from src.harness.config import ConfigError, ExperimentConfig, load_config
from src.harness.search import ExtremalSearch
from src.kfunc.functionals import Couple, k_functional_curve
from src.martingales.filtration import parse_filtration
from src.runner import configure_logging, run_suite

LOG_LEVEL_ENV = "NCDAVIS_LOG_LEVEL"

# Check groups behind each check-* subcommand
CHECK_GROUPS: Dict[str, List[str]] = {
    "check-davis": ["davis-type1", "davis-type2", "martingale-davis", "previsible", "row-lemma", "kfunc-oracle"],
    "check-lepingle": ["lepingle", "lepingle-extremal"],
    "check-burkholder": ["orthogonality", "burkholder", "transform", "e-davis-max", "falsify-small-p",
                         "burkholder-stability"],
    "check-phi": ["phi-davis", "phi-burkholder", "orlicz-indices", "phi-stability"],
    "check-stein": ["stein"],
}


def resolve_log_level(level: Optional[str]) -> str:
    return (level or os.getenv(LOG_LEVEL_ENV) or "INFO").upper()


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--seed", type=int, help="master seed (u64)")
    parser.add_argument("--out", help="report directory")
    parser.add_argument("--instances", type=int, help="number of random instances")
    parser.add_argument("--dims", action="append", metavar="SPEC",
                        help="filtration spec for the stability sweep (repeatable)")
    parser.add_argument("--format", choices=["csv", "json"])
    parser.add_argument("--workers", type=int)
    parser.add_argument("--log-level", help=f"loguru level (default from {LOG_LEVEL_ENV} or INFO)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncdavis", description="Noncommutative Davis decomposition checks")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, checks in CHECK_GROUPS.items():
        _add_common(sub.add_parser(name, help=f"run {', '.join(checks)}"))
    _add_common(sub.add_parser("run-suite", help="run every check selected in the config"))

    curve = sub.add_parser("kfunc-curve", help="sample K(t; L_p, L_q) and write it as CSV")
    _add_common(curve)
    curve.add_argument("--p", type=float, default=1.0)
    curve.add_argument("--q", type=float, default=float("inf"))
    curve.add_argument("--values", help="comma-separated singular values (default: random Ginibre)")
    curve.add_argument("--dim", type=int, default=8)
    curve.add_argument("--t-min", type=float, default=1e-2)
    curve.add_argument("--t-max", type=float, default=1e2)
    curve.add_argument("--points", type=int, default=41)
    curve.add_argument("--holmstedt", action="store_true", help="sample the Holmstedt estimate instead")

    search = sub.add_parser("search-extremal", help="hill-climb the ratio of one check")
    _add_common(search)
    search.add_argument("--check", help="objective (default from config)")
    search.add_argument("--filtration", help="filtration spec (default from config)")
    return parser


def _overrides(args: argparse.Namespace) -> Dict:
    return {"seed": args.seed, "out": args.out, "instances": args.instances, "dims": args.dims,
            "format": args.format, "workers": args.workers}


def _run_checks(config: ExperimentConfig, checks: Optional[List[str]], log_level: str) -> int:
    if checks is not None:
        config = config.model_copy(update={"checks": checks})
    report, code = run_suite(config, log_level=log_level)
    logger.info(f"{len(report.rows)} rows, {len(report.failures)} asserted failures, exit {code}")
    return code


def _kfunc_curve(config: ExperimentConfig, args: argparse.Namespace) -> int:
    couple = Couple(args.p, args.q)
    if args.values:
        x = np.diag([float(v) for v in args.values.split(",")]).astype(complex)
    else:
        x = TracialAlgebra(args.dim).random_ginibre(np.random.default_rng(config.seed))
    ts = np.logspace(np.log10(args.t_min), np.log10(args.t_max), args.points)
    curve = k_functional_curve(x, ts, couple, method="holmstedt" if args.holmstedt else None)
    path = curve.to_csv(Path(config.out) / "kfunc_curve.csv")
    diagnostics = curve.diagnostics()
    logger.info(f"Wrote K-functional curve to {path}: {diagnostics}")
    if not curve.is_concave(1e-6):
        logger.warning(f"K-functional curve is not concave: defect {diagnostics['concavity_defect']:.3e}")
    return 0


def _search(config: ExperimentConfig, args: argparse.Namespace) -> int:
    settings = config.search
    search = ExtremalSearch(args.check or settings.check, parse_filtration(args.filtration or settings.filtration),
                            config.seed, settings.restarts, settings.iterations, settings.sigma, settings.patience)
    result = search.run()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "search.json"
    path.write_text(json.dumps({
        "check": result.check,
        "filtration": search.filtration.describe(),
        "seed": config.seed,
        "best_ratio": result.best_ratio,
        "origin": result.origin,
        "start_ratio": result.start_ratio,
        "restarts": result.restarts,
        "trace": result.trace,
        "best_terms": {"real": np.real(result.best_terms).tolist(), "imag": np.imag(result.best_terms).tolist()},
    }) + "\n")
    logger.info(f"Wrote search result to {path}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    log_level = resolve_log_level(args.log_level)
    configure_logging(log_level)
    try:
        config = load_config(args.config, _overrides(args))
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return 2

    try:
        if args.command == "kfunc-curve":
            return _kfunc_curve(config, args)
        if args.command == "search-extremal":
            return _search(config, args)
        return _run_checks(config, CHECK_GROUPS.get(args.command), log_level)
    except (ToolkitError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
