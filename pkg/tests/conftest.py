import numpy as np
import pytest

from fbmdelay.ddesolve import DelaySpec, TrendField


@pytest.fixture
def tanh_sine():
    return TrendField("tanh_sine", (2.0, 0.5, 0.3, 1.0))


@pytest.fixture
def delay_spec():
    return DelaySpec(tau=0.5, x0=0.0, T=3.0)


def mc_covariance(samples):
    """Sample covariance matrix (1/n) and its entrywise standard errors.

    ``samples`` has shape (n, d); mean is assumed zero (fBm is centred).
    """
    n = samples.shape[0]
    prod = samples[:, :, None] * samples[:, None, :]
    cov = prod.mean(axis=0)
    se = prod.std(axis=0) / np.sqrt(n)
    return cov, se
