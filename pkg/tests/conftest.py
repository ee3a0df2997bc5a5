import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from auxcal.data import Dataset

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_fit_warnings():
    # Estimator fits emit RuntimeWarnings (dropped outcomes, skipped folds)
    # which individual tests assert on explicitly where relevant.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def toy_classification(n=120, p=6, signal=(2.0, -1.5), seed=0, n_aux=1,
                       aux_flip=0.0, noise=0.5):
    """Small dataset: Y0 from a (noisily) thresholded linear index,
    auxiliaries as copies of Y0 with flip probability ``aux_flip``."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[: len(signal)] = signal
    index = X @ beta
    y0 = np.where(index + noise * rng.standard_normal(n) > 0, 1, -1)
    cols = [y0]
    for _ in range(n_aux):
        flips = rng.random(n) < aux_flip
        cols.append(np.where(flips, -y0, y0))
    return Dataset(X, np.column_stack(cols)), beta


@pytest.fixture
def toy_data():
    data, _ = toy_classification()
    return data
