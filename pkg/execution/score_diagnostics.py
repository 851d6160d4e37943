#!/usr/bin/env python3
"""
Diagnostics Scoring Module
==========================
Geometric and statistical certificates for a quantification run.

Usage:
    from score_diagnostics import spectrum, error_certificate, contamination_decomposition

    report = spectrum(ce)                  # gram / centered gram spectra
    cert = error_certificate(ce, est, 0.05)
    contam = contamination_decomposition(ce, soft_est)

Quantities:
    lambda_min  smallest eigenvalue of the Gram matrix G of class embeddings
    delta_min   second smallest eigenvalue of the centered Gram matrix
                M = P G P, P = I - 11'/c  (its smallest is 0, along 1)
    R_x         2 + sqrt(2 ln(2x))

Certificates use the estimate itself in place of the unknown proportions, so
they are plug-in values rather than guaranteed bounds.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field, asdict
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.spatial.distance import pdist

from decompose_symmetric import SymMatrix, pseudo_solve, sym_eigenvalues
from dfm_errors import IdentifiabilityError, IdentifiabilityWarning, ParameterError
from embed_features import ClassEmbeddings, embed_means, rff_for_sigma
from load_dataset import SourceDataset, TargetDataset
from random_streams import RngStream
from solve_proportions import ProportionEstimate, QuantProblem

logger = logging.getLogger(__name__)

SINGULAR_REL_TOL = 1e-12
DEGENERATE_DELTA = 1e-8
GRID_MULTIPLIERS = (1 / 8, 1 / 4, 1 / 2, 1, 2, 4, 8)
MEDIAN_SAMPLE = 2000


def _as_problem(source) -> QuantProblem:
    return source.problem() if isinstance(source, ClassEmbeddings) else source


# ============================================
# Gram spectra
# ============================================

@dataclass
class SpectrumReport:
    """Spectra of the Gram and centered Gram matrices."""

    gram: SymMatrix
    centered: SymMatrix
    lambda_min: float
    delta_min: Optional[float]
    flags: List[str] = field(default_factory=list)
    sigma: Optional[float] = None

    @property
    def identifiable(self) -> bool:
        return "identifiability_violated" not in self.flags

    def to_dict(self) -> dict:
        return {
            "lambda_min": self.lambda_min,
            "delta_min": self.delta_min,
            "flags": list(self.flags),
            "gram": self.gram.dense.tolist(),
        }


def centering_matrix(c: int) -> np.ndarray:
    return np.eye(c) - np.full((c, c), 1.0 / c)


def centered_gram(phi: np.ndarray) -> SymMatrix:
    """<phi_i - mean, phi_j - mean> computed in feature space."""
    centered = phi - np.mean(phi, axis=0)
    return SymMatrix.from_dense(centered @ centered.T)


def centered_from_gram(gram: SymMatrix) -> SymMatrix:
    """P G P with P the centering projector."""
    p = centering_matrix(gram.order)
    return SymMatrix.from_dense(p @ gram.dense @ p)


def spectrum(source) -> SpectrumReport:
    """
    Gram spectrum report for class embeddings (or a bare QuantProblem).

    delta_min is undefined (None) for a single class. A smallest Gram
    eigenvalue below 1e-12 * trace flags the embeddings as not identifiable
    and emits an IdentifiabilityWarning.
    """
    if isinstance(source, ClassEmbeddings):
        gram = source.gram()
        centered = centered_gram(source.phi)
    else:
        gram = source.gram
        centered = centered_from_gram(gram)

    flags = []
    lambda_min = float(sym_eigenvalues(gram)[0])
    trace = gram.trace()
    if lambda_min < SINGULAR_REL_TOL * trace or trace <= 0.0:
        flags.append("identifiability_violated")
        warnings.warn(
            f"Gram matrix is numerically singular (lambda_min = {lambda_min:.3g}, "
            f"trace = {trace:.3g})",
            IdentifiabilityWarning,
            stacklevel=2,
        )

    if gram.order >= 2:
        delta_min = float(sym_eigenvalues(centered)[1])
        if delta_min < DEGENERATE_DELTA:
            flags.append("delta_min_degenerate")
    else:
        delta_min = None
        flags.append("delta_min_undefined")

    return SpectrumReport(gram=gram, centered=centered, lambda_min=lambda_min,
                          delta_min=delta_min, flags=flags)


# ============================================
# Error certificate
# ============================================

def deviation_radius(x: float) -> float:
    """R_x = 2 + sqrt(2 ln(2x))."""
    return 2.0 + math.sqrt(2.0 * math.log(2.0 * x))


@dataclass
class BoundCertificate:
    """
    Plug-in error certificate for ||alpha_hat - alpha||_2.

    bound_w         2 C R / sqrt(kappa) * (|w|_2 / sqrt(n) + 1/sqrt(m)),  w = alpha / beta
    bound_minclass  2 C R / sqrt(kappa) * (1/sqrt(min n_i) + 1/sqrt(m))
    bound_sum       2 C R / sqrt(kappa) * (sum alpha_i/sqrt(n_i) + 1/sqrt(m))
    kappa is delta_min (hard) or lambda_min (soft); R = R_{c/delta}.
    bound_sum never exceeds the other two.
    """

    delta: float
    R: float
    C: float
    kappa: float
    w_norm: float
    bound_w: float
    bound_minclass: float
    bound_sum: float
    eps_n: float
    eps_m: float
    mode: str

    def to_dict(self) -> dict:
        return asdict(self)


def error_certificate(source, est: ProportionEstimate, delta: float = 0.05,
                      report: Optional[SpectrumReport] = None) -> BoundCertificate:
    """
    Finite-sample certificate for an estimate.

    Raises:
        ParameterError: delta outside (0, 1) or missing sample sizes
        IdentifiabilityError: the conditioning constant is zero or undefined
    """
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    problem = _as_problem(source)
    if problem.counts is None or problem.n_target is None or problem.bound is None:
        raise ParameterError("certificate needs class counts, target size and feature bound")
    if report is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IdentifiabilityWarning)
            report = spectrum(source)

    kappa = report.delta_min if est.mode == "hard" else report.lambda_min
    name = "delta_min" if est.mode == "hard" else "lambda_min"
    if kappa is None or kappa <= max(SINGULAR_REL_TOL * report.gram.trace(), 0.0):
        raise IdentifiabilityError(
            f"{name} = {kappa} leaves the proportions unidentified",
            lambda_min=report.lambda_min, delta_min=report.delta_min,
        )

    counts = np.asarray(problem.counts, dtype=np.float64)
    n = float(np.sum(counts))
    m = float(problem.n_target)
    c = counts.shape[0]
    C = float(problem.bound)
    R = deviation_radius(c / delta)
    prefactor = 2.0 * C * R / math.sqrt(kappa)

    w = est.alpha / (counts / n)
    w_norm = float(np.linalg.norm(w))
    target_term = 1.0 / math.sqrt(m)

    return BoundCertificate(
        delta=delta,
        R=R,
        C=C,
        kappa=float(kappa),
        w_norm=w_norm,
        bound_w=prefactor * (w_norm / math.sqrt(n) + target_term),
        bound_minclass=prefactor * (1.0 / math.sqrt(np.min(counts)) + target_term),
        bound_sum=prefactor * (float(np.sum(est.alpha / np.sqrt(counts))) + target_term),
        eps_n=C * R / math.sqrt(np.min(counts)),
        eps_m=C * deviation_radius(1.0 / delta) / math.sqrt(m),
        mode=est.mode,
    )


# ============================================
# Bandwidth selection
# ============================================

def median_pairwise_distance(points: np.ndarray, rng: RngStream,
                             max_points: int = MEDIAN_SAMPLE) -> float:
    """Median pairwise distance, on at most max_points subsampled rows."""
    if points.shape[0] > max_points:
        points = points[np.sort(rng.choice(points.shape[0], size=max_points, replace=False))]
    if points.shape[0] < 2:
        return 1.0
    median = float(np.median(pdist(points)))
    return median if median > 0 else 1.0


def default_sigma_grid(src: SourceDataset, tgt: TargetDataset, rng: RngStream,
                       multipliers: Sequence[float] = GRID_MULTIPLIERS) -> List[float]:
    """Median heuristic scaled by 1/8 .. 8."""
    scale = median_pairwise_distance(np.vstack([src.points, tgt.points]), rng)
    return [scale * k for k in multipliers]


def select_bandwidth(src: SourceDataset, tgt: TargetDataset, D: int,
                     sigma_grid: Optional[Sequence[float]], rng: RngStream,
                     n_jobs: int = 1, variant: str = "cos-sin") -> Tuple[float, List[SpectrumReport]]:
    """
    Gaussian RFF bandwidth maximising delta_min / C^2 over a grid.

    Each sigma gets its own feature draw from the sub-stream keyed by its
    value; ties go to the smaller sigma. Reports come back in grid order.

    Raises:
        ParameterError: empty grid or non-positive sigma
    """
    if sigma_grid is None:
        sigma_grid = default_sigma_grid(src, tgt, rng.child(0))
    sigma_grid = [float(s) for s in sigma_grid]
    if not sigma_grid:
        raise ParameterError("bandwidth grid is empty")
    if any(not s > 0 for s in sigma_grid):
        raise ParameterError("bandwidths must be positive")

    def evaluate(sigma):
        emb = rff_for_sigma(src.d, D, sigma, rng, variant)
        ce = embed_means(emb, src, tgt)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IdentifiabilityWarning)
            report = spectrum(ce)
        report.sigma = sigma
        return report, ce.bound

    results = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(evaluate)(s) for s in sigma_grid)

    best_sigma, best_score = None, -math.inf
    for index in sorted(range(len(sigma_grid)), key=lambda i: sigma_grid[i]):
        report, bound = results[index]
        score = -math.inf if report.delta_min is None else report.delta_min / bound ** 2
        if best_sigma is None or score > best_score:
            best_sigma, best_score = sigma_grid[index], score

    logger.info("Selected sigma = %.6g (criterion %.6g) over %d candidates",
                best_sigma, best_score, len(sigma_grid))
    return best_sigma, [r for r, _ in results]


# ============================================
# Contamination decomposition
# ============================================

@dataclass
class ContaminationReport:
    """
    Where the target embedding sits relative to the class embeddings.

    orth_norm      distance from the target embedding to the span of the classes
    conv_residual  distance to the feasible set of the estimate's mode
                   (hull for hard, hull with the origin for soft)
    span_leak      norm of the projection of a known noise embedding on the span
    """

    parallel_fit: np.ndarray
    orth_norm: float
    conv_residual: float
    span_leak: Optional[float]
    noise_mass: Optional[float]
    rank: int
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "parallel_fit": self.parallel_fit.tolist(),
            "orth_norm": self.orth_norm,
            "conv_residual": self.conv_residual,
            "span_leak": self.span_leak,
            "noise_mass": self.noise_mass,
            "rank": self.rank,
            "flags": list(self.flags),
        }


def contamination_decomposition(source, est: ProportionEstimate,
                                noise_embedding: Optional[np.ndarray] = None) -> ContaminationReport:
    """
    Split the target embedding into its in-span and orthogonal parts.

    Span coordinates solve the c x c normal equations G x = q. With explicit
    embeddings the residual norms are measured in feature space; a bare
    QuantProblem falls back to the quadratic forms.

    Raises:
        ParameterError: noise_embedding given without explicit embeddings
    """
    problem = _as_problem(source)
    coeffs, rank = pseudo_solve(problem.gram, problem.linear)
    flags = []
    if rank < problem.n_classes:
        flags.append("span_rank_deficient")
        logger.warning("Class embeddings span only %d of %d dimensions",
                       rank, problem.n_classes)

    if isinstance(source, ClassEmbeddings):
        orth_norm = float(np.linalg.norm(source.phi_target - source.phi.T @ coeffs))
        conv_residual = float(np.linalg.norm(source.phi_target - source.phi.T @ est.alpha))
    else:
        orth_norm = math.sqrt(max(problem.target_norm2 - float(problem.linear @ coeffs), 0.0))
        conv_residual = math.sqrt(max(problem.objective(est.alpha), 0.0))

    span_leak = None
    if noise_embedding is not None:
        if not isinstance(source, ClassEmbeddings):
            raise ParameterError("span leak needs explicit class embeddings")
        inner = source.phi @ np.asarray(noise_embedding, dtype=np.float64)
        leak_coeffs, _ = pseudo_solve(problem.gram, inner)
        span_leak = math.sqrt(max(float(inner @ leak_coeffs), 0.0))

    return ContaminationReport(
        parallel_fit=coeffs,
        orth_norm=orth_norm,
        conv_residual=conv_residual,
        span_leak=span_leak,
        noise_mass=est.noise_mass if est.mode == "soft" else None,
        rank=rank,
        flags=flags,
    )


# ============================================
# CLI Interface
# ============================================

def main():
    """Print spectra and the certificate for an RFF soft run on a dataset pair."""
    import argparse

    from load_dataset import DatasetLoader
    from solve_proportions import solve_soft

    parser = argparse.ArgumentParser(description="Diagnostics for a source/target pair")
    parser.add_argument("--source", required=True)
    parser.add_argument("--target", required=True)
    parser.add_argument("--features", type=int, default=2048)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    src, tgt = DatasetLoader(args.source, args.target).load()
    rng = RngStream(args.seed)
    sigma, reports = select_bandwidth(src, tgt, args.features, None, rng)
    ce = embed_means(rff_for_sigma(src.d, args.features, sigma, rng), src, tgt)
    est = solve_soft(ce.problem())

    print(f"sigma: {sigma}")
    for key, value in spectrum(ce).to_dict().items():
        print(f"  {key}: {value}")
    for key, value in error_certificate(ce, est).to_dict().items():
        print(f"  {key}: {value}")


if __name__ == "__main__":
    main()
