#!/usr/bin/env python3
"""
Dataset Loader Module
=====================
Labeled source / unlabeled target point sets and their CSV loading.

Usage:
    from load_dataset import DatasetLoader, split_by_class

    loader = DatasetLoader("source.csv", "target.csv")
    src, tgt = loader.load()
    per_class = split_by_class(src)

CSV dialect: comma separated, UTF-8, '.' decimal, header row mandatory.
The source file carries an integer column named exactly `label`; every other
column is a feature. Class labels are kept as written in the file
(`class_labels`) and indexed 0..c-1 internally.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from dfm_errors import InputFormatError, NumericInputError, ParameterError

logger = logging.getLogger(__name__)

LABEL_COLUMN = "label"


# ============================================
# Datasets
# ============================================

def _as_points(points, what: str) -> np.ndarray:
    x = np.array(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        raise ParameterError(f"{what} points must be a matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericInputError(f"{what} points contain non-finite coordinates")
    return x


@dataclass(frozen=True)
class SourceDataset:
    """
    Labeled source sample.

    labels are 0-based class indices; class_labels[i] is the external name of
    class i (defaults to 1..c). Every class has at least one row.
    """

    points: np.ndarray
    labels: np.ndarray
    n_classes: int
    class_labels: Tuple = field(default=None)

    def __post_init__(self):
        points = _as_points(self.points, "source")
        labels = np.asarray(self.labels)
        if labels.shape != (points.shape[0],):
            raise ParameterError(
                f"expected {points.shape[0]} labels, got shape {labels.shape}"
            )
        if not np.issubdtype(labels.dtype, np.integer):
            raise ParameterError("source labels must be integers")
        if self.n_classes < 1:
            raise ParameterError("a source needs at least one class")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ParameterError(f"labels must lie in [0, {self.n_classes})")
        counts = np.bincount(labels, minlength=self.n_classes)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            raise ParameterError(f"classes {empty.tolist()} have no source rows")

        class_labels = self.class_labels
        if class_labels is None:
            class_labels = tuple(range(1, self.n_classes + 1))
        if len(class_labels) != self.n_classes:
            raise ParameterError("class_labels must name every class")

        points.setflags(write=False)
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_labels", tuple(class_labels))

    @classmethod
    def from_external_labels(cls, points, labels,
                             class_labels: Optional[Sequence] = None) -> "SourceDataset":
        """Build from labels as written in a file (e.g. 1..c)."""
        labels = np.asarray(labels)
        if class_labels is None:
            class_labels = tuple(np.unique(labels).tolist())
        index = map_labels(labels, class_labels)
        return cls(points=points, labels=index, n_classes=len(class_labels),
                   class_labels=tuple(class_labels))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    @property
    def proportions(self) -> np.ndarray:
        """Empirical source proportions n_i / n."""
        return self.counts / self.n

    def drop_class(self, index: int) -> "SourceDataset":
        """Source without the rows of one class (remaining classes renumbered)."""
        if not 0 <= index < self.n_classes:
            raise ParameterError(f"no class with index {index}")
        if self.n_classes == 1:
            raise ParameterError("cannot drop the only class of a source")
        keep = self.labels != index
        labels = self.labels[keep]
        labels = np.where(labels > index, labels - 1, labels)
        names = self.class_labels[:index] + self.class_labels[index + 1:]
        return SourceDataset(points=self.points[keep], labels=labels,
                             n_classes=self.n_classes - 1, class_labels=names)


@dataclass(frozen=True)
class TargetDataset:
    """Unlabeled target sample."""

    points: np.ndarray

    def __post_init__(self):
        points = _as_points(self.points, "target")
        if points.shape[0] < 1:
            raise ParameterError("target needs at least one point")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def check_compatible(self, src: SourceDataset) -> None:
        if self.d != src.d:
            raise ParameterError(
                f"target has {self.d} columns but source has {src.d}"
            )


def split_by_class(src: SourceDataset) -> List[np.ndarray]:
    """Per-class point matrices, rows in original order."""
    return [src.points[src.labels == i] for i in range(src.n_classes)]


def map_labels(values, class_labels: Sequence) -> np.ndarray:
    """
    Map external labels onto 0-based class indices.

    Raises:
        ParameterError: a value is not one of class_labels
    """
    values = np.asarray(values)
    lookup = {label: i for i, label in enumerate(class_labels)}
    try:
        return np.array([lookup[v] for v in values.tolist()], dtype=np.int64)
    except KeyError as e:
        raise ParameterError(
            f"label {e.args[0]!r} is not one of {list(class_labels)}"
        ) from None


# ============================================
# CSV loading
# ============================================

def _read_frame(path) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path, sep=",", encoding="utf-8")
    except FileNotFoundError:
        raise InputFormatError(f"file not found: {path}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputFormatError(f"cannot parse {path}: {e}") from None

    # A numeric header means the header row is missing.
    for name in frame.columns:
        try:
            float(name)
        except ValueError:
            break
    else:
        raise InputFormatError(f"{path}: header row is missing")
    if frame.empty:
        raise InputFormatError(f"{path}: no data rows")
    return frame


def _feature_matrix(frame: pd.DataFrame, path) -> np.ndarray:
    try:
        values = frame.to_numpy(dtype=np.float64)
    except ValueError as e:
        raise InputFormatError(f"{path}: non-numeric feature value ({e})") from None
    if not np.all(np.isfinite(values)):
        raise NumericInputError(f"{path}: missing or non-finite feature values")
    return values


def _integer_column(series: pd.Series, path) -> np.ndarray:
    values = pd.to_numeric(series, errors="coerce").to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(values)) or np.any(values != np.round(values)):
        raise InputFormatError(f"{path}: column {series.name!r} must hold integers")
    return values.astype(np.int64)


class DatasetLoader:
    """
    Load a labeled source file and a target file.

    The target may carry a `label` column (useful for scoring); it is ignored
    by estimation, with a warning, and kept in `target_labels`.
    """

    def __init__(self, source_path: str, target_path: Optional[str] = None):
        self.source_path = Path(source_path)
        self.target_path = Path(target_path) if target_path else None
        self.source: Optional[SourceDataset] = None
        self.target: Optional[TargetDataset] = None
        self.target_labels: Optional[np.ndarray] = None
        self.feature_names: List[str] = []

    def load_source(self) -> SourceDataset:
        frame = _read_frame(self.source_path)
        if LABEL_COLUMN not in frame.columns:
            raise InputFormatError(
                f"{self.source_path}: source needs a '{LABEL_COLUMN}' column"
            )
        labels = _integer_column(frame[LABEL_COLUMN], self.source_path)
        features = frame.drop(columns=[LABEL_COLUMN])
        if features.shape[1] == 0:
            raise InputFormatError(f"{self.source_path}: no feature columns")
        self.feature_names = [str(c) for c in features.columns]
        self.source = SourceDataset.from_external_labels(
            _feature_matrix(features, self.source_path), labels
        )
        logger.info("Loaded source %s: n=%d, d=%d, c=%d", self.source_path,
                    self.source.n, self.source.d, self.source.n_classes)
        return self.source

    def load_target(self) -> TargetDataset:
        if self.target_path is None:
            raise InputFormatError("no target file given")
        frame = _read_frame(self.target_path)
        if LABEL_COLUMN in frame.columns:
            logger.warning("%s: ignoring '%s' column in target file",
                           self.target_path, LABEL_COLUMN)
            self.target_labels = _integer_column(frame[LABEL_COLUMN], self.target_path)
            frame = frame.drop(columns=[LABEL_COLUMN])
        self.target = TargetDataset(_feature_matrix(frame, self.target_path))
        if self.source is not None:
            self.target.check_compatible(self.source)
        logger.info("Loaded target %s: m=%d", self.target_path, self.target.m)
        return self.target

    def load(self) -> Tuple[SourceDataset, TargetDataset]:
        return self.load_source(), self.load_target()

    def get_stats(self) -> dict:
        """Dataset statistics."""
        stats = {}
        if self.source is not None:
            stats.update({
                "n": self.source.n,
                "d": self.source.d,
                "classes": list(self.source.class_labels),
                "class_counts": self.source.counts.tolist(),
            })
        if self.target is not None:
            stats["m"] = self.target.m
        return stats


def read_predictions(path, expected_rows: int) -> np.ndarray:
    """
    Single-column CSV of integer class labels, row-aligned with a dataset.
    """
    frame = _read_frame(path)
    if frame.shape[1] != 1:
        raise InputFormatError(f"{path}: prediction file must have one column")
    values = _integer_column(frame.iloc[:, 0], path)
    if values.shape[0] != expected_rows:
        raise InputFormatError(
            f"{path}: {values.shape[0]} predictions for {expected_rows} rows"
        )
    return values


def write_labeled_csv(path, points: np.ndarray, labels: Optional[np.ndarray] = None) -> None:
    """Write points (and optional labels) in the dataset CSV dialect."""
    points = np.asarray(points, dtype=np.float64)
    frame = pd.DataFrame(points, columns=[f"x{j + 1}" for j in range(points.shape[1])])
    if labels is not None:
        frame[LABEL_COLUMN] = np.asarray(labels, dtype=np.int64)
    frame.to_csv(path, index=False, float_format="%.17g", encoding="utf-8")


# ============================================
# CLI Interface
# ============================================

def main():
    """Command-line interface for inspecting a dataset pair."""
    import argparse

    parser = argparse.ArgumentParser(description="Load and summarise a source/target pair")
    parser.add_argument("--source", required=True, help="Labeled source CSV")
    parser.add_argument("--target", help="Target CSV")
    args = parser.parse_args()

    loader = DatasetLoader(args.source, args.target)
    loader.load_source()
    if args.target:
        loader.load_target()

    stats = loader.get_stats()
    print("\nDataset Stats:")
    for key, value in stats.items():
        print(f"  {key}: {value}")


if __name__ == "__main__":
    main()
