import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from iscrc import CompressedGalleryCollection, FeatureMatrix  # noqa: E402


def random_gallery(rng, d=20, classes=3, atoms=4):
    blocks = []
    for k in range(classes):
        X = rng.standard_normal((d, atoms))
        blocks.append((f"c{k}", FeatureMatrix(X, normalize=True)))
    return CompressedGalleryCollection(tuple(blocks))


def unit_columns(rng, d, n):
    X = rng.standard_normal((d, n))
    return X / np.linalg.norm(X, axis=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
