import numpy as np
import pytest

from retrospect.data import Dataset, Intervention


@pytest.fixture
def toy_dataset():
    """Four units, one treatment, one covariate, equal weights."""
    return Dataset(
        covariates=np.array([[0.1], [0.2], [0.3], [0.4]]),
        covariate_names=("w1",),
        treatments=np.array([[0.0], [0.0], [1.0], [1.0]]),
        treatment_names=("a",),
        outcome=np.array([1.0, 2.0, 3.0, 4.0]),
    )


@pytest.fixture
def remove_exposure():
    return Intervention(0, "set_binary", 0.0)


def make_dataset(rng, n=50, p=2, j=1, weights=None):
    """Random dataset helper used across test modules."""
    cov = rng.normal(size=(n, p))
    logits = 0.5 * cov[:, 0]
    a = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-logits))).astype(float)
    trt = a[:, None] if j == 1 else np.column_stack(
        [a] + [rng.integers(0, 2, n).astype(float) for _ in range(j - 1)]
    )
    y = cov[:, 0] + 2.0 * a + rng.normal(size=n)
    return Dataset(
        covariates=cov,
        covariate_names=tuple(f"w{k + 1}" for k in range(p)),
        treatments=trt,
        treatment_names=tuple(f"a{k + 1}" for k in range(j)),
        outcome=y,
        survey_weight=weights,
    )
