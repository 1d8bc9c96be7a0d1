import argparse
import json
import logging
import math
import os
import sys
import time

import numpy as np

from config import FROM_THEOREM, ConfigError, ExperimentConfig
from densities import ClassParams, GaussianDensity, gaussian_class_params, r_star_table
from estimators import EstimatorMode, mse_from_values, run_estimator
from har import RandomStream
from schedules import schedule_for
from utils import make_dir_if_not_exist, progress_bar, save_rows_csv, setup_logging, setup_seed
from validation import run_oracle_suite

logger = logging.getLogger("har_main")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE = 3
# kappa beyond this is reported but flagged, the bounds only ever use log kappa
KAPPA_OVERFLOW_PRONE = 1e30


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description="hit-and-run integration of log-concave densities")
    parser.add_argument("--log-level", help="logging level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True)

    estimate = sub.add_parser("estimate", help="run an estimator experiment from a JSON config")
    estimate.add_argument("--config", help="experiment config path", required=True)
    estimate.add_argument("--seed", help="master seed, overrides the config", type=int)
    estimate.add_argument("--out", help="output folder, overrides the config")
    estimate.add_argument("--parallel", help="worker threads, defaults to available cores", type=int)
    estimate.add_argument("--eps", help="schedule accuracy for from-theorem n0", type=float)
    estimate.add_argument("--variant", help="class variant for from-theorem n0", choices=["bounded", "average"])

    schedule = sub.add_parser("schedule", help="print the step schedule (n, n0) as JSON")
    schedule.add_argument("--config", help="take class parameters from an experiment config")
    schedule.add_argument("--eps", help="target accuracy in (0, 1/2)", type=float, required=True)
    schedule.add_argument("--variant", help="class variant", choices=["bounded", "average"], default="bounded")
    schedule.add_argument("--mode", help="estimator whose cost is reported", choices=["multi", "single"],
                          default="multi")
    schedule.add_argument("--d", help="dimension", type=int)
    schedule.add_argument("--r", help="inner radius r", type=float)
    schedule.add_argument("--R", help="outer radius R", type=float)
    schedule.add_argument("--kappa", help="kappa", type=float)
    schedule.add_argument("--log-kappa", help="log kappa, for kappa beyond the float range", type=float)

    rstar = sub.add_parser("rstar", help="write the table of r*(d) for d = 1..d_max")
    rstar.add_argument("--d-max", help="largest dimension", type=int, default=100)
    rstar.add_argument("--out", help="output folder", default="./data/rstar")

    gauss = sub.add_parser("gaussian-params", help="class parameters of a centered gaussian as JSON")
    gauss.add_argument("--sigma", help="covariance matrix file, JSON or whitespace/comma separated text")
    gauss.add_argument("--d", help="dimension of an identity covariance when --sigma is not given", type=int)

    validate = sub.add_parser("validate", help="run the oracle suite")
    validate.add_argument("--quick", help="smaller sample sizes", action="store_true")
    validate.add_argument("--seed", help="master seed", type=int, default=0)
    validate.add_argument("--out", help="output folder", default="./data/validate")
    validate.add_argument("--parallel", help="worker threads", type=int, default=os.cpu_count() or 1)
    return parser.parse_args(argv)


def _json_number(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _write_json(path, payload):
    make_dir_if_not_exist(os.path.dirname(path))
    with open(path, "w", newline="") as f:
        f.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    cfg = cfg.replace(seed=args.seed, out=args.out, parallel=args.parallel)
    if args.eps is not None or args.variant is not None:
        schedule = dict(cfg.schedule or {})
        if args.eps is not None:
            schedule["eps"] = args.eps
        if args.variant is not None:
            schedule["variant"] = args.variant
        cfg = cfg.replace(schedule=schedule)
    return cfg


def _resolve_steps(cfg: ExperimentConfig) -> tuple[int, int]:
    if cfg.n0 != FROM_THEOREM:
        return cfg.n, cfg.n0
    schedule = schedule_for(cfg.schedule["eps"], cfg.build_class_params(), EstimatorMode(cfg.mode))
    for line in schedule.trace:
        logger.info(line)
    if schedule.impractical:
        raise ConfigError(f"n0: from-theorem schedule needs n0 = {schedule.n0:.4g} steps "
                          f"({schedule.cost:.4g} in total), give an explicit n0 instead")
    return schedule.n, schedule.n0


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    setup_seed(cfg.seed % 2**32)
    n, n0 = _resolve_steps(cfg)
    est = cfg.estimator_config(n=n, n0=n0)
    logger.info(f"estimate: {cfg.mode}-run, n = {n}, n0 = {n0}, reps = {cfg.reps}, "
                f"seed = {cfg.seed}, {est.parallel} workers")

    stream = RandomStream(cfg.seed)
    rows, timings, results = [], [], []
    for rep in range(cfg.reps):
        start = time.perf_counter()
        result = run_estimator(est, stream.substream(rep))
        wall_ms = (time.perf_counter() - start) * 1000.0
        results.append(result)
        rows.append((rep, result.value, n, n0, cfg.seed))
        timings.append((rep, round(wall_ms, 3)))
        logger.info(f"{progress_bar(rep + 1, cfg.reps)} rep {rep}: {result.value:.8f} in {wall_ms:.0f} ms")

    values = [r.value for r in results]
    mean = math.fsum(values) / len(values)
    summary = {
        "mean": mean,
        "reps": cfg.reps,
        "n": n,
        "n0": n0,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "kernel_steps": sum(r.kernel_steps for r in results),
        "clamped": sum(r.clamped_count for r in results),
    }
    if cfg.reps >= 2:
        summary["std_error"] = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (cfg.reps - 1) / cfg.reps)
    else:
        summary["std_error"] = _json_number(results[0].std_error)
    if cfg.reference is not None:
        summary["reference"] = cfg.reference
        if cfg.reps >= 2:
            mse = mse_from_values(values, cfg.reference)
            summary["mse"] = mse.mse
            summary["mse_jackknife_se"] = mse.jackknife_se

    status = EXIT_OK
    if cfg.check is not None:
        deviation = abs(mean - cfg.check["reference"])
        passed = deviation <= cfg.check["tolerance"]
        summary["check"] = {**cfg.check, "deviation": deviation, "pass": passed}
        if not passed:
            logger.warning(f"check failed: |{mean:.8f} - {cfg.check['reference']}| = {deviation:.3g} "
                           f"> {cfg.check['tolerance']}")
            status = EXIT_ORACLE

    save_rows_csv(os.path.join(cfg.out, "results.csv"), ["rep", "value", "n", "n0", "seed"], rows)
    save_rows_csv(os.path.join(cfg.out, "timings.csv"), ["rep", "wall_time_ms"], timings)
    _write_json(os.path.join(cfg.out, "summary.json"), summary)
    resolved = {k: v for k, v in cfg.to_dict().items() if k != "parallel"}
    _write_json(os.path.join(cfg.out, "config.json"), resolved)
    logger.info(f"mean {mean:.8f} over {cfg.reps} reps, results in {cfg.out}")
    return status


def _schedule_params(args) -> ClassParams:
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
        schedule = {**(cfg.schedule or {}), "eps": args.eps, "variant": args.variant}
        return cfg.replace(n0=FROM_THEOREM, schedule=schedule).build_class_params()
    missing = [flag for flag, value in (("--d", args.d), ("--r", args.r), ("--R", args.R)) if value is None]
    if args.kappa is None and args.log_kappa is None:
        missing.append("--kappa or --log-kappa")
    if missing:
        raise ConfigError(f"schedule: missing {', '.join(missing)} (or --config)")
    return ClassParams(d=args.d, r=args.r, R=args.R, kappa=args.kappa, log_kappa=args.log_kappa,
                       variant=args.variant)


def cmd_schedule(args) -> int:
    params = _schedule_params(args)
    schedule = schedule_for(args.eps, params, EstimatorMode(args.mode))
    payload = {k: _json_number(v) for k, v in schedule.to_dict().items()}
    payload["variant"] = params.variant.value
    payload["params"] = params.to_dict()
    payload["trace"] = schedule.trace
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_rstar(args) -> int:
    table = r_star_table(args.d_max)
    path = os.path.join(args.out, "r_star.csv")
    save_rows_csv(path, ["d", "r_star"], [(row.d, row.r_star) for row in table])
    logger.info(f"r*(d) for d = 1..{args.d_max} written to {path}")
    return EXIT_OK


def _load_sigma(path):
    with open(path) as f:
        text = f.read()
    if path.endswith(".json"):
        return np.asarray(json.loads(text), dtype=np.float64)
    return np.loadtxt(path, delimiter="," if "," in text else None, ndmin=2, dtype=np.float64)


def cmd_gaussian_params(args) -> int:
    if args.sigma is not None:
        sigma = _load_sigma(args.sigma)
    elif args.d is not None:
        if args.d < 1:
            raise ValueError(f"dimension must be at least 1, got {args.d}")
        sigma = np.eye(args.d)
    else:
        raise ConfigError("gaussian-params: give --sigma or --d")
    params = gaussian_class_params(GaussianDensity.from_covariance(sigma))
    payload = {
        "d": params.d,
        "r": params.r,
        "R": params.R,
        "kappa": _json_number(params.kappa),
        "log_kappa": params.log_kappa,
        "kappa_overflow_prone": params.log_kappa > math.log(KAPPA_OVERFLOW_PRONE),
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_validate(args) -> int:
    setup_seed(args.seed % 2**32)
    reports = run_oracle_suite(quick=args.quick, seed=args.seed, parallel=args.parallel)
    rows = [(r.name, r.statistic, r.threshold, r.passed, r.detail) for r in reports]
    save_rows_csv(os.path.join(args.out, "reports.csv"), ["name", "statistic", "threshold", "pass", "detail"], rows)
    _write_json(os.path.join(args.out, "reports.json"), [r.to_dict() for r in reports])
    failed = [r for r in reports if not r.passed]
    logger.info(f"{len(reports) - len(failed)} of {len(reports)} oracles passed, reports in {args.out}")
    return EXIT_ORACLE if failed else EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "schedule": cmd_schedule,
    "rstar": cmd_rstar,
    "gaussian-params": cmd_gaussian_params,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(f"config error: {e}")
        return EXIT_CONFIG
    except (ValueError, OSError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
