"""Shared fixture builders for the test-suite."""

import numpy as np

from farmakit.farma import FarmaModel
from farmakit.varma import arma_autocovariance


def farma11_fixture(K=15):
    """FARMA(1,1) with four dominant eigen-directions (used by the pipeline tests)."""
    lam = np.full(K, 0.05)
    lam[:4] = [4.0, 3.0, 2.0, 1.5]
    phi = np.diag(np.r_[[0.8, 0.75, 0.7, 0.65], np.full(K - 4, 0.2)])
    theta = np.diag(np.r_[np.full(4, 0.5), np.full(K - 4, 0.1)])
    return FarmaModel([phi], [theta], np.diag(lam))


def far1_bound_fixture(K=11):
    """FAR(1) with known diagonal phi and a decaying noise spectrum."""
    phi = np.diag(np.linspace(0.7, 0.1, K))
    C = np.diag(1.0 / np.arange(1, K + 1) ** 1.5)
    return FarmaModel([phi], [], C)


def random_stable(rng, d, scale=0.6):
    """Random d x d matrix with spectral norm ``scale``."""
    A = rng.standard_normal((d, d))
    return scale * A / np.linalg.norm(A, 2)


def random_autocovs(rng, d, lags, p=1, q=1):
    """Autocovariances of a random stable VARMA(p, q) with a random PD Sigma."""
    Phi = [random_stable(rng, d, 0.5 / max(p, 1)) for _ in range(p)]
    Theta = [random_stable(rng, d, 0.5) for _ in range(q)]
    L = rng.standard_normal((d, d))
    Sigma = L @ L.T + 0.5 * np.eye(d)
    return arma_autocovariance(np.array(Phi).reshape(p, d, d), np.array(Theta).reshape(q, d, d), Sigma, lags)
