#!/usr/bin/env python3
"""
DFM Command Line
================
Label-shift quantification from CSV files.

Run:
    python cli/main.py estimate --source src.csv --target tgt.csv --method rff --mode soft
    python cli/main.py diagnose --source src.csv --target tgt.csv --json
    python cli/main.py select-bandwidth --source src.csv --target tgt.csv
    python cli/main.py benchmark --config sweep.json --out sweep.csv --svg plots/sweep
    python cli/main.py holdout --source src.csv --target labeled_tgt.csv

Exit codes: 0 ok, 2 malformed input or config, 3 proportions not identifiable,
4 solver did not converge.
"""

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import List, Literal, Optional

# Add execution directory to path
sys.path.insert(0, str(Path(__file__).parent.parent / "execution"))

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from dfm_errors import DFMError, IdentifiabilityError
from embed_features import (
    KernelBackend,
    crossfit_predictions,
    embed_means,
    kernel_problem,
    onehot_from_predictions,
    rff_for_sigma,
)
from load_dataset import DatasetLoader, map_labels, read_predictions
from random_streams import RngStream
from run_benchmark import HoldoutConfig, SweepConfig, run_contamination_sweep, run_holdout_class
from score_diagnostics import (
    contamination_decomposition,
    error_certificate,
    select_bandwidth,
    spectrum,
)
from solve_proportions import DEFAULT_MAX_ITER, DEFAULT_TOL, solve, solve_bbse_unconstrained

logger = logging.getLogger("dfm")

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IDENTIFIABILITY = 3
EXIT_NOT_CONVERGED = 4


# ============================================
# Config
# ============================================

class RunConfig(BaseModel):
    """Options of estimate / diagnose / select-bandwidth."""

    model_config = ConfigDict(extra="forbid")

    source: Optional[str] = None
    target: Optional[str] = None
    predictions_source: Optional[str] = None
    predictions_target: Optional[str] = None
    method: Literal["rff", "energy", "bbse"] = "rff"
    mode: Literal["hard", "soft"] = "soft"
    features: int = Field(default=2048, ge=1)
    rff_variant: Literal["cos-sin", "cos-shift"] = "cos-sin"
    sigma: Optional[float] = Field(default=None, gt=0)
    auto_sigma: bool = False
    sigma_grid: Optional[List[float]] = None
    delta: float = Field(default=0.05, gt=0, lt=1)
    seed: int = 0
    tol: float = Field(default=DEFAULT_TOL, gt=0)
    max_iter: int = Field(default=DEFAULT_MAX_ITER, ge=1)
    threads: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if self.source is None or self.target is None:
            raise ValueError("both --source and --target are required")
        if self.sigma is not None and self.auto_sigma:
            raise ValueError("--sigma and --auto-sigma are mutually exclusive")
        if self.rff_variant == "cos-sin" and self.features % 2:
            raise ValueError("cos-sin features need an even --features")
        if (self.predictions_source is None) != (self.predictions_target is None):
            raise ValueError("give both prediction files or neither")
        if self.sigma_grid is not None and any(not s > 0 for s in self.sigma_grid):
            raise ValueError("sigma grid values must be positive")
        return self


def resolve_threads(threads: Optional[int]) -> int:
    """--threads, else DFM_THREADS, else the number of available cores."""
    if threads is not None:
        return threads
    env = os.environ.get("DFM_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"DFM_THREADS must be a positive integer, got {env!r}") from None
        if value < 1:
            raise ValueError(f"DFM_THREADS must be a positive integer, got {env!r}")
        return value
    return os.cpu_count() or 1


def _read_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValueError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ValueError(f"config file {path} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return data


def _explicit_options(args: argparse.Namespace, names) -> dict:
    """Options given on the command line (flags default to SUPPRESS)."""
    given = vars(args)
    return {name: given[name] for name in names if name in given}


# ============================================
# Reports
# ============================================

def _plain(value):
    """JSON-safe copy: non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "tolist"):
        return _plain(value.tolist())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _text_value(value) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (list, tuple)):
        return ",".join(_text_value(v) for v in value)
    return str(value)


def _text_lines(report: dict, prefix: str = "") -> List[str]:
    lines = []
    for key, value in report.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            lines.extend(_text_lines(value, name + "."))
        elif isinstance(value, list) and value and isinstance(value[0], list):
            for i, row in enumerate(value, start=1):
                lines.append(f"{name}.{i} = {_text_value(row)}")
        else:
            lines.append(f"{name} = {_text_value(value)}")
    return lines


def render_report(report: dict, as_json: bool = False) -> str:
    """Key-value text (17 significant digits) or a JSON document."""
    report = _plain({"schema_version": SCHEMA_VERSION, **report})
    if as_json:
        return json.dumps(report, indent=2) + "\n"
    return "\n".join(_text_lines(report)) + "\n"


def emit(report: dict, args: argparse.Namespace) -> None:
    text = render_report(report, getattr(args, "json", False))
    sys.stdout.write(text)
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")


def _per_class(labels, values) -> dict:
    return {str(label): float(v) for label, v in zip(labels, values)}


# ============================================
# Pipeline
# ============================================

class Pipeline:
    """Loads the data and builds the class embeddings for one RunConfig."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.threads = resolve_threads(config.threads)
        self.rng = RngStream(config.seed)
        self.loader = DatasetLoader(config.source, config.target)
        self.src, self.tgt = self.loader.load()
        self.sigma: Optional[float] = None
        self.bandwidth_reports = None

    def choose_sigma(self) -> float:
        config = self.config
        if config.sigma is not None:
            self.sigma = config.sigma
        else:
            self.sigma, self.bandwidth_reports = select_bandwidth(
                self.src, self.tgt, config.features, config.sigma_grid, self.rng,
                n_jobs=self.threads, variant=config.rff_variant,
            )
        return self.sigma

    def _predictions(self):
        config = self.config
        if config.predictions_source is None:
            return crossfit_predictions(self.src, self.tgt, self.rng.child(2))
        labels = self.src.class_labels
        preds_src = read_predictions(config.predictions_source, self.src.n)
        preds_tgt = read_predictions(config.predictions_target, self.tgt.m)
        return map_labels(preds_src, labels) + 1, map_labels(preds_tgt, labels) + 1

    def embeddings(self):
        """ClassEmbeddings (rff, bbse) or a QuantProblem (energy)."""
        config = self.config
        if config.method == "energy":
            return kernel_problem(KernelBackend("energy"), self.src, self.tgt, n_jobs=self.threads)
        if config.method == "bbse":
            preds_src, preds_tgt = self._predictions()
            emb = onehot_from_predictions(preds_src, preds_tgt, self.src.n_classes)
        else:
            sigma = self.choose_sigma()
            emb = rff_for_sigma(self.src.d, config.features, sigma, self.rng, config.rff_variant)
        return embed_means(emb, self.src, self.tgt, n_jobs=self.threads)

    def header(self) -> dict:
        config = self.config
        header = {"method": config.method, "mode": config.mode, "seed": config.seed,
                  "n": self.src.n, "m": self.tgt.m, "d": self.src.d,
                  "class_labels": [str(c) for c in self.src.class_labels]}
        if config.method == "rff":
            header.update({"features": config.features, "rff_variant": config.rff_variant,
                           "sigma": self.sigma})
        return header


def _problem(source):
    return source.problem() if hasattr(source, "problem") else source


# ============================================
# Commands
# ============================================

def cmd_estimate(config: RunConfig, args) -> int:
    pipeline = Pipeline(config)
    source = pipeline.embeddings()
    est = solve(_problem(source), config.mode, config.tol, config.max_iter)
    report = spectrum(source)
    labels = pipeline.src.class_labels

    result = pipeline.header()
    result.update({
        "alpha": _per_class(labels, est.alpha),
        "noise_mass": est.noise_mass if config.mode == "soft" else None,
        "objective": est.objective,
        "iterations": est.iterations,
        "kkt_residual": est.kkt_residual,
        "converged": est.converged,
        "lambda_min": report.lambda_min,
        "delta_min": report.delta_min,
        "flags": report.flags,
    })

    status = EXIT_OK
    try:
        cert = error_certificate(source, est, config.delta, report)
        result["certificate"] = cert.to_dict()
    except IdentifiabilityError as e:
        result["certificate"] = None
        if pipeline.src.n_classes > 1 or config.mode == "soft":
            logger.error("%s", e)
            status = EXIT_IDENTIFIABILITY

    if config.method == "bbse":
        try:
            result["bbse_unconstrained"] = _per_class(labels, solve_bbse_unconstrained(source))
        except IdentifiabilityError as e:
            logger.warning("Unconstrained BBSE unavailable: %s", e)
            result["bbse_unconstrained"] = None

    emit(result, args)
    if status == EXIT_OK and not est.converged:
        return EXIT_NOT_CONVERGED
    return status


def cmd_diagnose(config: RunConfig, args) -> int:
    pipeline = Pipeline(config)
    source = pipeline.embeddings()
    report = spectrum(source)
    est = solve(_problem(source), "soft", config.tol, config.max_iter)
    contamination = contamination_decomposition(source, est)

    result = pipeline.header()
    result.update(report.to_dict())
    result["contamination"] = contamination.to_dict()
    emit(result, args)

    if "identifiability_violated" in report.flags:
        return EXIT_IDENTIFIABILITY
    return EXIT_OK if est.converged else EXIT_NOT_CONVERGED


def cmd_select_bandwidth(config: RunConfig, args) -> int:
    if config.method != "rff":
        raise ValueError("bandwidth selection applies to --method rff")
    if config.sigma is not None:
        config = config.model_copy(update={"sigma": None, "sigma_grid": [config.sigma]})
    pipeline = Pipeline(config)
    sigma = pipeline.choose_sigma()
    reports = pipeline.bandwidth_reports

    result = pipeline.header()
    result.update({
        "sigma_grid": [r.sigma for r in reports],
        "delta_min": [r.delta_min for r in reports],
        "sigma": sigma,
    })
    emit(result, args)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    data = _read_config_file(args.config)
    data.update(_explicit_options(args, ("seed", "threads")))
    if "threads" not in data:
        data["threads"] = resolve_threads(None)
    config = SweepConfig.model_validate(data)

    result = run_contamination_sweep(config)
    text = result.to_csv(args.out, include_runtime=not args.no_runtime)
    if not args.out:
        sys.stdout.write(text)
    if args.svg:
        for path in result.to_svg(args.svg):
            logger.info("Wrote %s", path)
    logger.info("Summary:\n%s", result.summary().to_string(index=False))
    return EXIT_OK


def cmd_holdout(args) -> int:
    data = _read_config_file(args.config)
    data.update(_explicit_options(args, ("seed", "threads", "features", "sigma")))
    if "threads" not in data:
        data["threads"] = resolve_threads(None)
    config = HoldoutConfig.model_validate(data)

    result = run_holdout_class(args.source, args.target, config)
    text = result.to_csv(args.out, include_runtime=not args.no_runtime)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


# ============================================
# Argument parsing
# ============================================

RUN_OPTIONS = (
    "source", "target", "predictions_source", "predictions_target", "method", "mode",
    "features", "rff_variant", "sigma", "auto_sigma", "sigma_grid", "delta", "seed", "tol",
    "max_iter", "threads",
)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--out", help="Also write the output to this file")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log progress to stderr")


def _run_options(parser: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    parser.add_argument("--source", default=s, help="Labeled source CSV")
    parser.add_argument("--target", default=s, help="Target CSV")
    parser.add_argument("--predictions-source", dest="predictions_source", default=s,
                        help="Classifier predictions for the source rows (bbse)")
    parser.add_argument("--predictions-target", dest="predictions_target", default=s,
                        help="Classifier predictions for the target rows (bbse)")
    parser.add_argument("--method", choices=["rff", "energy", "bbse"], default=s)
    parser.add_argument("--mode", choices=["hard", "soft"], default=s)
    parser.add_argument("--features", type=int, default=s, help="RFF dimension D")
    parser.add_argument("--rff-variant", dest="rff_variant",
                        choices=["cos-sin", "cos-shift"], default=s)
    bandwidth = parser.add_mutually_exclusive_group()
    bandwidth.add_argument("--sigma", type=float, default=s)
    bandwidth.add_argument("--auto-sigma", dest="auto_sigma", action="store_true", default=s)
    parser.add_argument("--sigma-grid", dest="sigma_grid", type=float, nargs="+", default=s,
                        help="Candidate bandwidths (default: median heuristic x 1/8..8)")
    parser.add_argument("--delta", type=float, default=s, help="Certificate failure probability")
    parser.add_argument("--seed", type=int, default=s)
    parser.add_argument("--tol", type=float, default=s)
    parser.add_argument("--max-iter", dest="max_iter", type=int, default=s)
    parser.add_argument("--threads", type=int, default=s)
    parser.add_argument("--json", action="store_true", help="Emit a JSON document")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfm", description="Label-shift quantification")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("estimate", "Estimate target class proportions"),
        ("diagnose", "Gram spectra and contamination decomposition"),
        ("select-bandwidth", "Choose the RFF bandwidth on a grid"),
    ):
        p = sub.add_parser(name, help=help_text)
        _common(p)
        _run_options(p)

    s = argparse.SUPPRESS
    bench = sub.add_parser("benchmark", help="Synthetic contamination sweep")
    _common(bench)
    bench.add_argument("--seed", type=int, default=s)
    bench.add_argument("--threads", type=int, default=s)
    bench.add_argument("--svg", help="Prefix for one SVG chart per noise kind")
    bench.add_argument("--no-runtime", action="store_true", help="Omit the runtime column")

    hold = sub.add_parser("holdout", help="Leave-one-class-out protocol")
    _common(hold)
    hold.add_argument("--source", required=True)
    hold.add_argument("--target", required=True, help="Target CSV with a label column")
    hold.add_argument("--seed", type=int, default=s)
    hold.add_argument("--threads", type=int, default=s)
    hold.add_argument("--features", type=int, default=s)
    hold.add_argument("--sigma", type=float, default=s)
    hold.add_argument("--no-runtime", action="store_true", help="Omit the runtime column")
    return parser


def _run_config(args) -> RunConfig:
    data = _read_config_file(args.config)
    data.update(_explicit_options(args, RUN_OPTIONS))
    return RunConfig.model_validate(data)


COMMANDS = {
    "estimate": cmd_estimate,
    "diagnose": cmd_diagnose,
    "select-bandwidth": cmd_select_bandwidth,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.captureWarnings(True)

    try:
        if args.command == "benchmark":
            return cmd_benchmark(args)
        if args.command == "holdout":
            return cmd_holdout(args)
        return COMMANDS[args.command](_run_config(args), args)
    except ValidationError as e:
        logger.error("Invalid configuration:\n%s", e)
        return EXIT_INPUT
    except IdentifiabilityError as e:
        logger.error("%s", e)
        return EXIT_IDENTIFIABILITY
    except (DFMError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_INPUT
    finally:
        logging.captureWarnings(False)


if __name__ == "__main__":
    sys.exit(main())
