import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT / "execution"))
sys.path.insert(0, str(ROOT / "cli"))

settings.register_profile("dfm", database=None, max_examples=30, deadline=None)
settings.load_profile("dfm")

from load_dataset import SourceDataset, TargetDataset, write_labeled_csv  # noqa: E402
from random_streams import RngStream  # noqa: E402


def gaussian_pair(alpha, n_per_class=400, m=1200, d=2, gap=8.0, seed=0):
    """Separated unit Gaussians on a line; target drawn with proportions alpha."""
    rng = np.random.default_rng(seed)
    c = len(alpha)
    means = np.zeros((c, d))
    means[:, 0] = gap * np.arange(c)
    points = np.vstack([means[i] + rng.normal(size=(n_per_class, d)) for i in range(c)])
    labels = np.repeat(np.arange(c), n_per_class)
    counts = rng.multinomial(m, alpha)
    target = np.vstack([means[i] + rng.normal(size=(k, d)) for i, k in enumerate(counts)])
    target_labels = np.repeat(np.arange(c), counts)
    return (SourceDataset(points=points, labels=labels, n_classes=c),
            TargetDataset(target), target_labels)


@pytest.fixture
def rng():
    return RngStream(seed=0)


@pytest.fixture
def three_class_pair():
    return gaussian_pair([0.6, 0.3, 0.1])


@pytest.fixture
def csv_pair(tmp_path):
    """Source CSV (labels 1..3) and a labeled target CSV."""
    src, tgt, target_labels = gaussian_pair([0.6, 0.3, 0.1], n_per_class=150, m=300)
    src_path = tmp_path / "source.csv"
    tgt_path = tmp_path / "target.csv"
    write_labeled_csv(src_path, src.points, src.labels + 1)
    write_labeled_csv(tgt_path, tgt.points)
    labeled = tmp_path / "target_labeled.csv"
    write_labeled_csv(labeled, tgt.points, target_labels + 1)
    return src_path, tgt_path, labeled
