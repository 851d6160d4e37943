#!/usr/bin/env python3
"""
Benchmark Runner
================
Synthetic contamination experiments, the leave-one-class-out protocol and a
scaling probe for the quantification methods.

Usage:
    from run_benchmark import SweepConfig, run_contamination_sweep

    config = SweepConfig(noise_kinds=["far-gaussian"], eps_grid=[0.0, 0.3], dims=[5], reps=20)
    result = run_contamination_sweep(config)
    result.to_csv("sweep.csv")
    result.to_svg("sweep")           # sweep_far-gaussian.svg

Methods:
    rffm-hard    Gaussian random Fourier features, simplex
    rffm-soft    Gaussian random Fourier features, sub-simplex
    energy-soft  exact energy kernel, sub-simplex
    bbse+-soft   one-hot nearest-centroid predictions, sub-simplex

Pipeline per cell:
    1. Draw class means (pairwise distance >= min_separation) and proportions
    2. Sample source, clean target and noise rows
    3. Run every method on identical data
    4. Score the l2 error against the true target proportions of the
       non-noise classes

Cells run on a worker pool, each with its own sub-stream; rows are sorted by
key before emission so output does not depend on the worker count.
"""

import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator

from dfm_errors import DFMError, IdentifiabilityWarning, ParameterError
from embed_features import (
    KernelBackend,
    crossfit_predictions,
    embed_means,
    kernel_problem,
    onehot_from_predictions,
    rff_for_sigma,
)
from load_dataset import DatasetLoader, SourceDataset, TargetDataset
from random_streams import RngStream
from score_diagnostics import (
    GRID_MULTIPLIERS,
    error_certificate,
    default_sigma_grid,
    select_bandwidth,
    spectrum,
)
from solve_proportions import DEFAULT_MAX_ITER, DEFAULT_TOL, solve, solve_hard

logger = logging.getLogger(__name__)

METHODS = ("rffm-hard", "rffm-soft", "energy-soft", "bbse+-soft")
NOISE_KINDS = ("background-uniform", "far-gaussian", "near-gaussian")
MAX_EPS = 0.3

SWEEP_COLUMNS = [
    "method", "noise_kind", "eps", "dim", "rep", "error_l2", "delta_min",
    "lambda_min", "noise_mass_est", "bound_w", "bound_minclass", "status", "runtime_ms",
]
HOLDOUT_COLUMNS = [
    "method", "holdout", "held_out_mass", "error_l2", "delta_min", "lambda_min",
    "noise_mass_est", "bound_w", "bound_minclass", "status", "runtime_ms",
]


# ============================================
# Generators
# ============================================

@dataclass
class MixtureSpec:
    """
    Gaussian mixture source/target pair under label shift.

    covariances default to identity for every class.
    """

    means: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray
    n: int = 10000
    m: int = 10000
    covariances: Optional[np.ndarray] = None
    seed: int = 0

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        c, d = self.means.shape
        for name in ("beta", "alpha"):
            p = np.asarray(getattr(self, name), dtype=np.float64)
            if p.shape != (c,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ParameterError(f"{name} must be a probability vector of length {c}")
            setattr(self, name, p)
        if self.covariances is None:
            self.covariances = np.broadcast_to(np.eye(d), (c, d, d)).copy()
        self.covariances = np.asarray(self.covariances, dtype=np.float64)
        if self.covariances.shape != (c, d, d):
            raise ParameterError(f"covariances must have shape {(c, d, d)}")
        try:
            self._factors = np.linalg.cholesky(self.covariances)
        except np.linalg.LinAlgError:
            raise ParameterError("covariances must be symmetric positive definite") from None
        if self.n < c or self.m < 1:
            raise ParameterError("need n >= c source rows and m >= 1 target rows")

    @property
    def c(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def draw(self, counts: np.ndarray, rng: RngStream):
        """Points and labels with counts[i] rows from class i."""
        blocks, labels = [], []
        for i, k in enumerate(counts):
            z = rng.normal(size=(int(k), self.d))
            blocks.append(self.means[i] + z @ self._factors[i].T)
            labels.append(np.full(int(k), i, dtype=np.int64))
        return np.vstack(blocks), np.concatenate(labels)


@dataclass
class NoiseSpec:
    """Contaminating component added to the target, with mass `level`."""

    kind: str = "background-uniform"
    level: float = 0.0
    far_offset: float = 30.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.level < 1.0:
            raise ParameterError("noise level must lie in [0, 1)")
        if not self.far_offset > 0:
            raise ParameterError("far offset must be positive")


class ExperimentSample(NamedTuple):
    source: SourceDataset
    target: TargetDataset
    noise: np.ndarray
    # class index of each target row, -1 for noise rows
    target_labels: Optional[np.ndarray] = None


def random_means(c: int, d: int, rng: RngStream, box: float = 20.0,
                 min_separation: float = 6.0, max_tries: int = 100_000) -> np.ndarray:
    """Class means uniform in a box, redrawn until pairwise distances reach min_separation."""
    for _ in range(max_tries):
        means = rng.uniform(0.0, box, size=(c, d))
        gaps = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=2)
        if c == 1 or np.min(gaps[np.triu_indices(c, 1)]) >= min_separation:
            return means
    raise ParameterError(
        f"could not place {c} means {min_separation} apart in a box of side {box}"
    )


def random_mixture(c: int, d: int, rng: RngStream, n: int = 10000, m: int = 10000,
                   box: float = 20.0, min_separation: float = 6.0) -> MixtureSpec:
    """Separated unit-covariance classes, uniform source, Dirichlet(1) target proportions."""
    means = random_means(c, d, rng, box, min_separation)
    alpha = rng.dirichlet(np.ones(c))
    return MixtureSpec(means=means, beta=np.full(c, 1.0 / c), alpha=alpha, n=n, m=m)


def noise_count(level: float, m_clean: int) -> int:
    """Noise rows added to m_clean clean rows so that noise is a `level` fraction."""
    return int(math.floor(level / (1.0 - level) * m_clean + 0.5))


def sample_experiment(spec: MixtureSpec, noise: NoiseSpec,
                      rng: Optional[RngStream] = None) -> ExperimentSample:
    """
    Labeled source, contaminated target and the noise rows on their own.

    Draws from RngStream(spec.seed) unless a stream is given. Every class gets
    at least one source row.

    Clean target rows are spec.m draws from the target mixture; noise rows
    are added on top (not replacing clean rows). target_labels follows the
    shuffled target rows.
    """
    if rng is None:
        rng = RngStream(spec.seed)
    counts = rng.multinomial(spec.n, spec.beta)
    for i in np.flatnonzero(counts == 0):
        counts[np.argmax(counts)] -= 1
        counts[i] += 1
    points, labels = spec.draw(counts, rng)
    order = rng.permutation(spec.n)
    source = SourceDataset(points=points[order], labels=labels[order], n_classes=spec.c)

    clean, clean_labels = spec.draw(rng.multinomial(spec.m, spec.alpha), rng)
    m_noise = noise_count(noise.level, spec.m)
    centroid = spec.means.mean(axis=0)
    direction = rng.normal(size=spec.d)
    direction /= np.linalg.norm(direction)

    if noise.kind == "background-uniform":
        low, high = clean.min(axis=0), clean.max(axis=0)
        noise_points = rng.uniform(low, high, size=(m_noise, spec.d))
    elif noise.kind == "far-gaussian":
        noise_points = centroid + noise.far_offset * direction + rng.normal(size=(m_noise, spec.d))
    else:
        noise_points = centroid + rng.normal(size=(m_noise, spec.d))

    target_points = np.vstack([clean, noise_points])
    target_labels = np.concatenate([clean_labels, np.full(m_noise, -1, dtype=np.int64)])
    order = rng.permutation(target_points.shape[0])
    return ExperimentSample(source, TargetDataset(target_points[order]), noise_points,
                            target_labels[order])


# ============================================
# Method runner
# ============================================

class _MethodRunner:
    """
    Runs the configured methods on one source/target pair.

    RFF embeddings (and the bandwidth search) are shared by both RFF methods.
    """

    def __init__(self, src: SourceDataset, tgt: TargetDataset, rng: RngStream,
                 features: int, sigma_multipliers: Sequence[float], delta: float,
                 tol: float, max_iter: int, sigma: Optional[float] = None):
        self.src = src
        self.tgt = tgt
        self.rng = rng
        self.features = features
        self.sigma_multipliers = sigma_multipliers
        self.delta = delta
        self.tol = tol
        self.max_iter = max_iter
        self.sigma = sigma
        self._rff = None
        self._rff_seconds = 0.0

    def choose_sigma(self) -> float:
        if self.sigma is None:
            grid = default_sigma_grid(self.src, self.tgt, self.rng.child(0),
                                      self.sigma_multipliers)
            self.sigma, _ = select_bandwidth(self.src, self.tgt, self.features, grid,
                                             self.rng.child(1))
        return self.sigma

    def _embedding(self, method: str):
        if method.startswith("rffm"):
            if self._rff is None:
                started = time.perf_counter()
                sigma = self.choose_sigma()
                emb = rff_for_sigma(self.src.d, self.features, sigma, self.rng.child(1))
                self._rff = embed_means(emb, self.src, self.tgt)
                self._rff_seconds = time.perf_counter() - started
            return self._rff, self._rff_seconds
        started = time.perf_counter()
        if method == "energy-soft":
            source = kernel_problem(KernelBackend("energy"), self.src, self.tgt)
        else:
            preds_src, preds_tgt = crossfit_predictions(self.src, self.tgt, self.rng.child(2))
            emb = onehot_from_predictions(preds_src, preds_tgt, self.src.n_classes)
            source = embed_means(emb, self.src, self.tgt)
        return source, time.perf_counter() - started

    def run(self, method: str, truth: np.ndarray) -> dict:
        """One result row (without cell keys)."""
        started = time.perf_counter()
        row = {"error_l2": math.nan, "delta_min": math.nan, "lambda_min": math.nan,
               "noise_mass_est": math.nan, "bound_w": math.nan, "bound_minclass": math.nan,
               "status": "ok"}
        shared = 0.0
        try:
            source, shared = self._embedding(method)
            started = time.perf_counter()
            mode = "hard" if method.endswith("-hard") else "soft"
            problem = source.problem() if hasattr(source, "problem") else source
            est = solve(problem, mode, self.tol, self.max_iter)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", IdentifiabilityWarning)
                report = spectrum(source)
            row.update({
                "error_l2": float(np.linalg.norm(est.alpha - truth)),
                "delta_min": report.delta_min if report.delta_min is not None else math.nan,
                "lambda_min": report.lambda_min,
                "noise_mass_est": est.noise_mass if mode == "soft" else math.nan,
            })
            if not est.converged:
                row["status"] = "not_converged"
            try:
                cert = error_certificate(source, est, self.delta, report)
                row.update({"bound_w": cert.bound_w, "bound_minclass": cert.bound_minclass})
            except DFMError as e:
                logger.debug("No certificate for %s: %s", method, e)
        except (DFMError, np.linalg.LinAlgError) as e:
            row["status"] = type(e).__name__
            logger.warning("%s failed: %s", method, e)
        row["runtime_ms"] = (time.perf_counter() - started + shared) * 1000.0
        return row


# ============================================
# Contamination sweep
# ============================================

class SweepConfig(BaseModel):
    """Benchmark sweep configuration (JSON file for the CLI)."""

    model_config = ConfigDict(extra="forbid")

    noise_kinds: List[Literal["background-uniform", "far-gaussian", "near-gaussian"]] = \
        Field(default_factory=lambda: ["background-uniform"], min_length=1)
    eps_grid: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    dims: List[int] = Field(default_factory=lambda: [5], min_length=1)
    reps: int = Field(default=20, ge=1)
    methods: List[Literal["rffm-hard", "rffm-soft", "energy-soft", "bbse+-soft"]] = \
        Field(default_factory=lambda: list(METHODS), min_length=1)
    seed: int = 0
    c: int = Field(default=5, ge=1)
    n: int = Field(default=10000, ge=1)
    m: int = Field(default=10000, ge=1)
    features: int = Field(default=2048, ge=2)
    sigma_multipliers: List[float] = Field(default_factory=lambda: list(GRID_MULTIPLIERS),
                                           min_length=1)
    box: float = Field(default=20.0, gt=0)
    min_separation: float = Field(default=6.0, ge=0)
    far_offset: float = Field(default=30.0, gt=0)
    delta: float = Field(default=0.05, gt=0, lt=1)
    tol: float = Field(default=DEFAULT_TOL, gt=0)
    max_iter: int = Field(default=DEFAULT_MAX_ITER, ge=1)
    threads: Optional[int] = Field(default=None, ge=1)

    @field_validator("eps_grid")
    @classmethod
    def _check_eps(cls, values):
        for eps in values:
            if not 0.0 <= eps <= MAX_EPS:
                raise ValueError(f"contamination level {eps} outside [0, {MAX_EPS}]")
        return values

    @field_validator("dims")
    @classmethod
    def _check_dims(cls, values):
        for d in values:
            if not 2 <= d <= 10:
                raise ValueError(f"dimension {d} outside [2, 10]")
        return values

    @field_validator("features")
    @classmethod
    def _check_features(cls, value):
        if value % 2:
            raise ValueError("features must be even")
        return value

    @field_validator("sigma_multipliers")
    @classmethod
    def _check_multipliers(cls, values):
        if any(not v > 0 for v in values):
            raise ValueError("sigma multipliers must be positive")
        return values


@dataclass(frozen=True)
class _Cell:
    noise_index: int
    eps_index: int
    dim_index: int
    rep: int


def _run_cell(cell: _Cell, config: SweepConfig) -> List[dict]:
    """All methods on one freshly drawn experiment."""
    kind = config.noise_kinds[cell.noise_index]
    eps = config.eps_grid[cell.eps_index]
    dim = config.dims[cell.dim_index]
    rng = (RngStream(config.seed)
           .child(cell.noise_index).child(cell.eps_index).child(cell.dim_index).child(cell.rep))

    base = {"noise_kind": kind, "eps": eps, "dim": dim, "rep": cell.rep}
    try:
        spec = random_mixture(config.c, dim, rng.child(0), config.n, config.m,
                              config.box, config.min_separation)
        sample = sample_experiment(spec, NoiseSpec(kind, eps, config.far_offset), rng.child(1))
    except DFMError as e:
        logger.warning("Cell %s could not be sampled: %s", base, e)
        return [dict(base, method=method, status=type(e).__name__) for method in config.methods]

    m_noise = sample.noise.shape[0]
    truth = spec.alpha * (config.m / (config.m + m_noise))
    runner = _MethodRunner(sample.source, sample.target, rng.child(2), config.features,
                           config.sigma_multipliers, config.delta, config.tol, config.max_iter)
    return [dict(base, method=method, **runner.run(method, truth)) for method in config.methods]


@dataclass
class ExperimentResult:
    """Result rows of an experiment, ready for CSV/SVG emission."""

    rows: pd.DataFrame
    kind: str = "sweep"
    attrs: Dict = field(default_factory=dict)

    def to_csv(self, path=None, include_runtime: bool = True) -> str:
        frame = self.rows if include_runtime else self.rows.drop(columns=["runtime_ms"])
        text = frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def summary(self) -> pd.DataFrame:
        """Mean and standard deviation of the error per configuration."""
        keys = ["noise_kind", "method", "eps", "dim"] if self.kind == "sweep" else ["method", "holdout"]
        ok = self.rows[self.rows["status"] == "ok"]
        return (ok.groupby(keys, sort=True)["error_l2"]
                  .agg(["mean", "std", "count"])
                  .reset_index())

    def to_svg(self, prefix) -> List[Path]:
        """One line chart (mean error vs contamination per method) per noise kind."""
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        plt.rcParams["svg.hashsalt"] = "dfm-benchmark"
        summary = self.summary()
        paths = []
        for kind, by_kind in summary.groupby("noise_kind", sort=True):
            fig, ax = plt.subplots(figsize=(6, 4))
            for method, by_method in by_kind.groupby("method", sort=True):
                curve = by_method.groupby("eps")["mean"].mean()
                ax.plot(curve.index, curve.values, marker="o", label=method)
            ax.set_xlabel("contamination level")
            ax.set_ylabel("mean l2 error")
            ax.set_title(kind)
            ax.legend()
            path = Path(f"{prefix}_{kind}.svg")
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
        return paths


def _sorted_frame(rows: List[dict], columns: List[str], key) -> pd.DataFrame:
    rows = sorted(rows, key=key)
    frame = pd.DataFrame(rows)
    for col in columns:
        if col not in frame.columns:
            frame[col] = math.nan
    return frame[columns]


def run_contamination_sweep(config: SweepConfig) -> ExperimentResult:
    """
    Every (noise kind, eps, dim, rep) cell with all configured methods.

    Failed methods keep their row with a status reason and NaN values.
    """
    cells = [_Cell(k, e, j, r)
             for k in range(len(config.noise_kinds))
             for e in range(len(config.eps_grid))
             for j in range(len(config.dims))
             for r in range(config.reps)]
    threads = config.threads or 1
    logger.info("Running %d cells x %d methods on %d workers",
                len(cells), len(config.methods), threads)

    batches = Parallel(n_jobs=threads)(delayed(_run_cell)(cell, config) for cell in cells)
    rows = [row for batch in batches for row in batch]

    method_rank = {m: i for i, m in enumerate(config.methods)}
    kind_rank = {k: i for i, k in enumerate(config.noise_kinds)}
    frame = _sorted_frame(
        rows, SWEEP_COLUMNS,
        key=lambda r: (kind_rank[r["noise_kind"]], r["eps"], r["dim"], r["rep"],
                       method_rank[r["method"]]),
    )
    logger.info("Sweep finished: %d rows", len(frame))
    return ExperimentResult(rows=frame, kind="sweep")


# ============================================
# Leave-one-class-out protocol
# ============================================

class HoldoutConfig(BaseModel):
    """Leave-one-class-out configuration."""

    model_config = ConfigDict(extra="forbid")

    methods: List[Literal["rffm-hard", "rffm-soft", "energy-soft", "bbse+-soft"]] = \
        Field(default_factory=lambda: list(METHODS), min_length=1)
    seed: int = 0
    features: int = Field(default=2048, ge=2)
    sigma: Optional[float] = Field(default=None, gt=0)
    sigma_multipliers: List[float] = Field(default_factory=lambda: list(GRID_MULTIPLIERS),
                                           min_length=1)
    delta: float = Field(default=0.05, gt=0, lt=1)
    tol: float = Field(default=DEFAULT_TOL, gt=0)
    max_iter: int = Field(default=DEFAULT_MAX_ITER, ge=1)
    threads: Optional[int] = Field(default=None, ge=1)


def _holdout_run(src: SourceDataset, tgt: TargetDataset, target_labels: np.ndarray,
                 holdout: Optional[int], sigma: float, config: HoldoutConfig) -> List[dict]:
    name = "none" if holdout is None else str(src.class_labels[holdout])
    held_mass = 0.0 if holdout is None else float(
        np.mean(target_labels == src.class_labels[holdout]))
    base = {"holdout": name, "held_out_mass": held_mass}

    if holdout is not None:
        if src.n_classes == 1:
            return [dict(base, method=method, status="empty_source") for method in config.methods]
        src = src.drop_class(holdout)
    truth = np.array([np.mean(target_labels == label) for label in src.class_labels])

    runner = _MethodRunner(src, tgt, RngStream(config.seed), config.features,
                           config.sigma_multipliers, config.delta, config.tol,
                           config.max_iter, sigma=sigma)
    return [dict(base, method=method, **runner.run(method, truth)) for method in config.methods]


def run_holdout(src: SourceDataset, tgt: TargetDataset, target_labels,
                config: HoldoutConfig) -> ExperimentResult:
    """
    Baseline run on all classes, then one run per class dropped from the source.

    The RFF bandwidth is chosen once on the full source and reused so every
    run shares the same feature map. Errors compare the remaining classes'
    estimates with their empirical target proportions.
    """
    target_labels = np.asarray(target_labels)
    if target_labels.shape != (tgt.m,):
        raise ParameterError("target labels must be row-aligned with the target")

    sigma = config.sigma
    if sigma is None and any(m.startswith("rffm") for m in config.methods):
        chooser = _MethodRunner(src, tgt, RngStream(config.seed), config.features,
                                config.sigma_multipliers, config.delta, config.tol, config.max_iter)
        sigma = chooser.choose_sigma()

    runs = [None] + list(range(src.n_classes))
    threads = config.threads or 1
    batches = Parallel(n_jobs=threads)(
        delayed(_holdout_run)(src, tgt, target_labels, h, sigma, config) for h in runs
    )
    rows = [row for batch in batches for row in batch]

    order = {"none": -1}
    order.update({str(label): i for i, label in enumerate(src.class_labels)})
    method_rank = {m: i for i, m in enumerate(config.methods)}
    frame = _sorted_frame(rows, HOLDOUT_COLUMNS,
                          key=lambda r: (order[r["holdout"]], method_rank[r["method"]]))
    return ExperimentResult(rows=frame, kind="holdout", attrs={"sigma": sigma})


def run_holdout_class(src_csv, tgt_csv, config: HoldoutConfig) -> ExperimentResult:
    """Leave-one-class-out protocol on a labeled source CSV and a labeled target CSV."""
    loader = DatasetLoader(src_csv, tgt_csv)
    src, tgt = loader.load()
    if loader.target_labels is None:
        raise ParameterError("the holdout protocol needs a 'label' column in the target file")
    return run_holdout(src, tgt, loader.target_labels, config)


# ============================================
# Scaling probe
# ============================================

def _two_class_pair(size: int, d: int, rng: RngStream):
    half = max(size // 2, 2)
    spec = MixtureSpec(means=np.vstack([np.zeros(d), np.full(d, 3.0)]),
                       beta=np.array([0.5, 0.5]), alpha=np.array([0.3, 0.7]), n=half, m=half)
    sample = sample_experiment(spec, NoiseSpec(), rng)
    return sample.source, sample.target


def time_rff_path(src: SourceDataset, tgt: TargetDataset, D: int, sigma: float,
                  rng: RngStream) -> float:
    """Seconds for feature draw + embedding + simplex solve."""
    started = time.perf_counter()
    emb = rff_for_sigma(src.d, D, sigma, rng)
    solve_hard(embed_means(emb, src, tgt).problem())
    return time.perf_counter() - started


def time_exact_path(src: SourceDataset, tgt: TargetDataset) -> float:
    """Seconds for the exact energy-kernel problem + simplex solve."""
    started = time.perf_counter()
    solve_hard(kernel_problem(KernelBackend("energy"), src, tgt))
    return time.perf_counter() - started


def scaling_probe(sizes: Sequence[int], d: int, D: int, rng: RngStream,
                  sigma: float = 1.0) -> ExperimentResult:
    """
    Wall time of the RFF path per total size n + m, and the log-log slope.

    Raises:
        ParameterError: sizes not strictly ascending
    """
    sizes = [int(s) for s in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ParameterError("sizes must be strictly ascending")
    rows = []
    for i, size in enumerate(sizes):
        src, tgt = _two_class_pair(size, d, rng.child(i))
        seconds = time_rff_path(src, tgt, D, sigma, rng)
        rows.append({"size": src.n + tgt.m, "seconds": seconds})
        logger.info("RFF path at n+m=%d: %.3fs", src.n + tgt.m, seconds)
    frame = pd.DataFrame(rows)
    slope = math.nan
    if len(frame) >= 2:
        slope = float(np.polyfit(np.log(frame["size"]), np.log(frame["seconds"]), 1)[0])
    return ExperimentResult(rows=frame, kind="scaling", attrs={"slope": slope})


# ============================================
# CLI Interface
# ============================================

def main():
    """Command-line interface for running a sweep from a JSON config."""
    import argparse

    parser = argparse.ArgumentParser(description="Run a contamination sweep")
    parser.add_argument("config", help="Sweep config JSON")
    parser.add_argument("-o", "--output", help="Output CSV")
    parser.add_argument("--svg", help="SVG file prefix")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    config = SweepConfig.model_validate_json(Path(args.config).read_text(encoding="utf-8"))
    result = run_contamination_sweep(config)
    text = result.to_csv(args.output)
    if not args.output:
        print(text, end="")
    if args.svg:
        result.to_svg(args.svg)

    print("\n" + "=" * 50)
    print("SUMMARY")
    print("=" * 50)
    print(result.summary().to_string(index=False))


if __name__ == "__main__":
    main()
