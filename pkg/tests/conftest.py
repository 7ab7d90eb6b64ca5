import numpy as np
import pytest

from otselect.features import FeatureMatrix
from otselect.fixtures import planted_instance


def unit_rows(rng: np.random.Generator, n: int, d: int) -> FeatureMatrix:
    data = rng.standard_normal((n, d))
    return FeatureMatrix(data / np.linalg.norm(data, axis=1)[:, None])


@pytest.fixture
def planted() -> tuple[FeatureMatrix, FeatureMatrix]:
    return planted_instance()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
