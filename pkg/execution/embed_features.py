#!/usr/bin/env python3
"""
Feature Embedding Module
========================
Turns source/target samples into mean embeddings, or straight into the QP
data when only kernel evaluations are available.

Usage:
    from embed_features import rff_sample, embed_means, KernelBackend, kernel_problem

    emb = rff_sample(d=5, D=2048, sigma=1.5, rng=RngStream(0))
    ce = embed_means(emb, src, tgt)          # class means + target mean
    problem = ce.problem()                   # Gram matrix, linear term

    exact = kernel_problem(KernelBackend("energy"), src, tgt)

Backends:
    cos-sin     random Fourier features sqrt(2/D) [cos(w'x), sin(w'x)]  (default)
    cos-shift   random Fourier features sqrt(2/D) cos(w'x + b)
    onehot      indicator of a classifier's predicted class (BBSE)
    features    any user-supplied row-aligned feature matrices
    energy / gaussian exact kernels (O(n(n+m)) evaluations)

Row blocks are reduced in a fixed tree order by block index, so results are
bit-identical at any worker count for a given block size.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.spatial.distance import cdist
from sklearn.model_selection import KFold
from sklearn.neighbors import NearestCentroid

from decompose_symmetric import SymMatrix
from dfm_errors import ParameterError
from load_dataset import SourceDataset, TargetDataset, split_by_class
from random_streams import RngStream
from solve_proportions import QuantProblem

logger = logging.getLogger(__name__)

RFF_VARIANTS = ("cos-sin", "cos-shift")
EXPLICIT_VARIANTS = RFF_VARIANTS + ("onehot", "features")
KERNELS = ("energy", "gaussian")

BLOCK_ROWS = 8192
KERNEL_BLOCK_ROWS = 2048


def tree_sum(parts: Sequence):
    """Pairwise reduction in index order."""
    parts = list(parts)
    if not parts:
        raise ParameterError("nothing to sum")
    while len(parts) > 1:
        paired = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            paired.append(parts[-1])
        parts = paired
    return parts[0]


def _block_starts(n: int, block_rows: int) -> List[int]:
    return list(range(0, n, block_rows))


# ============================================
# Explicit feature maps
# ============================================

@dataclass(frozen=True)
class ExplicitEmbedder:
    """
    Finite-dimensional feature map Phi.

    RFF variants hold the frequency matrix (D/2 x d for cos-sin, D x d for
    cos-shift) and phases. The onehot and features variants are tied to the
    rows of one particular source/target pair.
    """

    variant: str
    dim: int
    sigma: Optional[float] = None
    omega: Optional[np.ndarray] = None
    phases: Optional[np.ndarray] = None
    source_rows: Optional[np.ndarray] = None
    target_rows: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.variant not in EXPLICIT_VARIANTS:
            raise ParameterError(f"unknown embedder variant {self.variant!r}")
        if self.dim < 1:
            raise ParameterError("feature dimension must be at least 1")
        if self.variant == "cos-sin" and self.dim % 2:
            raise ParameterError(f"cos-sin features need an even D, got {self.dim}")

    @property
    def input_dim(self) -> Optional[int]:
        return self.omega.shape[1] if self.omega is not None else None

    def transform(self, x) -> np.ndarray:
        """Phi(x) for every row of x (RFF variants only)."""
        if self.variant not in RFF_VARIANTS:
            raise ParameterError(f"{self.variant} features exist only for their own rows")
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        z = x @ self.omega.T
        scale = np.sqrt(2.0 / self.dim)
        if self.variant == "cos-sin":
            return scale * np.hstack([np.cos(z), np.sin(z)])
        return scale * np.cos(z + self.phases)

    def block_features(self, which: str, points: np.ndarray, start: int, stop: int) -> np.ndarray:
        if self.variant in RFF_VARIANTS:
            return self.transform(points[start:stop])
        rows = self.source_rows if which == "source" else self.target_rows
        if self.variant == "onehot":
            block = np.zeros((stop - start, self.dim))
            block[np.arange(stop - start), rows[start:stop]] = 1.0
            return block
        return rows[start:stop]

    def check_compatible(self, src: SourceDataset, tgt: TargetDataset) -> None:
        """
        Raises:
            ParameterError: input dimension or row counts do not match
        """
        tgt.check_compatible(src)
        if self.variant in RFF_VARIANTS:
            if self.input_dim != src.d:
                raise ParameterError(
                    f"embedder expects {self.input_dim}-dimensional points, data has {src.d}"
                )
            return
        if self.source_rows.shape[0] != src.n or self.target_rows.shape[0] != tgt.m:
            raise ParameterError(
                f"{self.variant} embedder has {self.source_rows.shape[0]}/"
                f"{self.target_rows.shape[0]} rows, data has {src.n}/{tgt.m}"
            )


def rff_sample(d: int, D: int, sigma: float, rng: RngStream,
               variant: str = "cos-sin") -> ExplicitEmbedder:
    """
    Random Fourier features for the Gaussian kernel exp(-|x-y|^2 / (2 sigma^2)).

    Frequencies are i.i.d. normal with standard deviation 1/sigma.

    Raises:
        ParameterError: D odd (cos-sin), sigma <= 0, or unknown variant
    """
    if variant not in RFF_VARIANTS:
        raise ParameterError(f"unknown RFF variant {variant!r}")
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if d < 1 or D < 1:
        raise ParameterError("d and D must be positive")
    if variant == "cos-sin":
        if D % 2:
            raise ParameterError(f"cos-sin features need an even D, got {D}")
        omega = rng.normal(0.0, 1.0 / sigma, size=(D // 2, d))
        return ExplicitEmbedder("cos-sin", D, sigma=float(sigma), omega=omega)
    omega = rng.normal(0.0, 1.0 / sigma, size=(D, d))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=D)
    return ExplicitEmbedder("cos-shift", D, sigma=float(sigma), omega=omega, phases=phases)


def rff_for_sigma(d: int, D: int, sigma: float, master: RngStream,
                  variant: str = "cos-sin") -> ExplicitEmbedder:
    """RFF draw from the sub-stream reserved for this sigma value."""
    return rff_sample(d, D, sigma, master.child_for_value(sigma), variant)


def onehot_from_predictions(preds_src, preds_tgt, c: int) -> ExplicitEmbedder:
    """
    One-hot embedding of a classifier's predictions (1..c).

    Class means of this embedding are the columns of the confusion matrix
    M[i, j] = P(predict i | class j); the target mean is the predicted
    class distribution on the target.

    Raises:
        ParameterError: a prediction outside 1..c
    """
    preds_src = np.asarray(preds_src)
    preds_tgt = np.asarray(preds_tgt)
    for name, preds in (("source", preds_src), ("target", preds_tgt)):
        if preds.size and (preds.min() < 1 or preds.max() > c):
            raise ParameterError(f"{name} predictions must lie in [1, {c}]")
    return ExplicitEmbedder(
        "onehot", c,
        source_rows=preds_src.astype(np.int64) - 1,
        target_rows=preds_tgt.astype(np.int64) - 1,
    )


def user_features(features_src, features_tgt) -> ExplicitEmbedder:
    """Embedder over pre-computed feature matrices (rows aligned with the data)."""
    fs = np.asarray(features_src, dtype=np.float64)
    ft = np.asarray(features_tgt, dtype=np.float64)
    if fs.ndim != 2 or ft.ndim != 2 or fs.shape[1] != ft.shape[1]:
        raise ParameterError("source and target features must be matrices of equal width")
    return ExplicitEmbedder("features", fs.shape[1], source_rows=fs, target_rows=ft)


def crossfit_predictions(src: SourceDataset, tgt: TargetDataset,
                         rng: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nearest-centroid predictions (1..c) for a self-contained BBSE run.

    Source rows are predicted 2-fold cross-fitted (each half by centroids of
    the other half); target rows by centroids of the whole source.
    """

    def fit_predict(x_train, y_train, x_test):
        if np.unique(y_train).size < 2:
            return np.full(x_test.shape[0], y_train[0], dtype=np.int64)
        return NearestCentroid().fit(x_train, y_train).predict(x_test)

    preds_src = np.empty(src.n, dtype=np.int64)
    if src.n >= 2:
        folds = KFold(n_splits=2, shuffle=True, random_state=rng.sklearn_seed())
        for train, test in folds.split(src.points):
            preds_src[test] = fit_predict(src.points[train], src.labels[train], src.points[test])
    else:
        preds_src[:] = src.labels
    preds_tgt = fit_predict(src.points, src.labels, tgt.points)
    return preds_src + 1, np.asarray(preds_tgt, dtype=np.int64) + 1


# ============================================
# Mean embeddings
# ============================================

@dataclass(frozen=True)
class ClassEmbeddings:
    """
    Class mean embeddings phi (c x D), target mean phi_target, class counts,
    target size and the sup-norm bound of the feature map on the data.
    """

    phi: np.ndarray
    phi_target: np.ndarray
    counts: np.ndarray
    n_target: int
    bound: float
    class_labels: Optional[Tuple] = None

    @property
    def n_classes(self) -> int:
        return self.phi.shape[0]

    @property
    def dim(self) -> int:
        return self.phi.shape[1]

    @property
    def proportions(self) -> np.ndarray:
        return self.counts / np.sum(self.counts)

    def gram(self) -> SymMatrix:
        return SymMatrix.from_dense(self.phi @ self.phi.T)

    def problem(self) -> QuantProblem:
        return QuantProblem(
            gram=self.gram(),
            linear=self.phi @ self.phi_target,
            target_norm2=float(self.phi_target @ self.phi_target),
            counts=self.counts,
            n_target=self.n_target,
            bound=self.bound,
        )


def embed_means(emb: ExplicitEmbedder, src: SourceDataset, tgt: TargetDataset,
                block_rows: int = BLOCK_ROWS, n_jobs: int = 1) -> ClassEmbeddings:
    """
    Class means and target mean of Phi.

    Raises:
        ParameterError: embedder incompatible with the data
    """
    emb.check_compatible(src, tgt)
    c = src.n_classes

    def source_block(start):
        stop = min(start + block_rows, src.n)
        features = emb.block_features("source", src.points, start, stop)
        selector = np.zeros((c, stop - start))
        selector[src.labels[start:stop], np.arange(stop - start)] = 1.0
        return selector @ features, float(np.max(np.linalg.norm(features, axis=1)))

    def target_block(start):
        stop = min(start + block_rows, tgt.m)
        features = emb.block_features("target", tgt.points, start, stop)
        return np.sum(features, axis=0), float(np.max(np.linalg.norm(features, axis=1)))

    runner = Parallel(n_jobs=n_jobs, prefer="threads")
    source_parts = runner(delayed(source_block)(s) for s in _block_starts(src.n, block_rows))
    target_parts = runner(delayed(target_block)(s) for s in _block_starts(tgt.m, block_rows))

    class_sums = tree_sum([p[0] for p in source_parts])
    target_sum = tree_sum([p[0] for p in target_parts])
    bound = max(max(p[1] for p in source_parts), max(p[1] for p in target_parts))

    counts = src.counts
    return ClassEmbeddings(
        phi=class_sums / counts[:, None],
        phi_target=target_sum / tgt.m,
        counts=counts,
        n_target=tgt.m,
        bound=bound,
        class_labels=src.class_labels,
    )


# ============================================
# Exact kernels
# ============================================

@dataclass(frozen=True)
class KernelBackend:
    """
    Exact kernel evaluations.

    energy:   k(x, y) = |x| + |y| - |x - y|
    gaussian: k(x, y) = exp(-|x - y|^2 / (2 sigma^2))
    """

    kernel: str
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ParameterError(f"unknown kernel {self.kernel!r}")
        if self.kernel == "gaussian" and not (self.sigma is not None and self.sigma > 0):
            raise ParameterError("gaussian kernel needs sigma > 0")

    def evaluate(self, x, y) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        if self.kernel == "energy":
            nx = np.linalg.norm(x, axis=1)
            ny = np.linalg.norm(y, axis=1)
            return (nx[:, None] + ny[None, :]) - cdist(x, y)
        return np.exp(-cdist(x, y, "sqeuclidean") / (2.0 * self.sigma ** 2))

    def feature_bound(self, points: np.ndarray) -> float:
        """max sqrt(k(x, x)) over the given points."""
        if self.kernel == "energy":
            return float(np.sqrt(2.0 * np.max(np.linalg.norm(points, axis=1))))
        return 1.0


def _kernel_block_sums(kb: KernelBackend, a: np.ndarray, b: Optional[np.ndarray],
                       block_rows: int) -> List:
    """Partial sums of k over a x b (b=None: a x a, upper block triangle doubled)."""
    starts_a = _block_starts(a.shape[0], block_rows)
    if b is None:
        parts = []
        for i, sa in enumerate(starts_a):
            xa = a[sa:sa + block_rows]
            for sb in starts_a[i:]:
                s = float(np.sum(kb.evaluate(xa, a[sb:sb + block_rows])))
                parts.append(s if sb == sa else 2.0 * s)
        return parts
    starts_b = _block_starts(b.shape[0], block_rows)
    return [float(np.sum(kb.evaluate(a[sa:sa + block_rows], b[sb:sb + block_rows])))
            for sa in starts_a for sb in starts_b]


def kernel_mean(kb: KernelBackend, a: np.ndarray, b: Optional[np.ndarray] = None,
                block_rows: int = KERNEL_BLOCK_ROWS) -> float:
    """Mean of k over all pairs of rows of a and b (b=None: pairs within a)."""
    size = a.shape[0] * (a.shape[0] if b is None else b.shape[0])
    return tree_sum(_kernel_block_sums(kb, a, b, block_rows)) / size


def kernel_problem(kb: KernelBackend, src: SourceDataset, tgt: TargetDataset,
                   block_rows: int = KERNEL_BLOCK_ROWS, n_jobs: int = 1) -> QuantProblem:
    """
    QP data from exact kernel means, without explicit features.

    G[i, j] = mean k over class-i x class-j pairs, q[i] = mean k over
    class-i x target pairs, target_norm2 = mean k over target pairs.
    """
    tgt.check_compatible(src)
    classes = split_by_class(src)
    c = src.n_classes

    jobs = [(i, j) for i in range(c) for j in range(i, c)]
    jobs += [(i, "t") for i in range(c)] + [("t", "t")]

    def run(job):
        i, j = job
        a = tgt.points if i == "t" else classes[i]
        if j == "t":
            b = None if i == "t" else tgt.points
        else:
            b = None if i == j else classes[j]
        return kernel_mean(kb, a, b, block_rows)

    values = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(run)(job) for job in jobs)
    results = dict(zip(jobs, values))

    gram = np.empty((c, c))
    for i in range(c):
        for j in range(i, c):
            gram[i, j] = gram[j, i] = results[(i, j)]
    linear = np.array([results[(i, "t")] for i in range(c)])

    bound = max(kb.feature_bound(src.points), kb.feature_bound(tgt.points))
    logger.info("Exact %s kernel problem built (n=%d, m=%d)", kb.kernel, src.n, tgt.m)
    return QuantProblem(
        gram=SymMatrix.from_dense(gram),
        linear=linear,
        target_norm2=results[("t", "t")],
        counts=src.counts,
        n_target=tgt.m,
        bound=bound,
    )


# ============================================
# CLI Interface
# ============================================

def main():
    """Embed a dataset pair with random Fourier features and print the Gram matrix."""
    import argparse

    from load_dataset import DatasetLoader

    parser = argparse.ArgumentParser(description="Mean embeddings of a source/target pair")
    parser.add_argument("--source", required=True)
    parser.add_argument("--target", required=True)
    parser.add_argument("--features", type=int, default=2048)
    parser.add_argument("--sigma", type=float, required=True)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    src, tgt = DatasetLoader(args.source, args.target).load()
    emb = rff_for_sigma(src.d, args.features, args.sigma, RngStream(args.seed))
    ce = embed_means(emb, src, tgt)
    print(np.array2string(ce.gram().dense, precision=6))


if __name__ == "__main__":
    main()
