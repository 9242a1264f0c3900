"""Random fitted models for property tests."""

import numpy as np

from dose_finding.gaussian_process import RewardScaler, build_model
from dose_finding.kernel import Hyperparameters


def random_hyperparameters(rng: np.random.Generator, d: int, ill_conditioned: bool = False) -> Hyperparameters:
    """
    Log-uniform hyperparameters.

    The default draw (sn2 >= 1e-2, sf2 <= 3) keeps the Gram matrix well
    conditioned. ill_conditioned mimics type-II ML fits on smooth data: huge
    sf2 with the noise variance near its lower bound.
    """
    if ill_conditioned:
        return Hyperparameters(
            sigma_f2=float(np.exp(rng.uniform(np.log(1e2), np.log(2e5)))),
            theta=np.exp(rng.uniform(np.log(0.5), np.log(50.0), size=d)),
            sigma_n2=float(np.exp(rng.uniform(np.log(1e-6), np.log(1e-4)))),
        )
    return Hyperparameters(
        sigma_f2=float(np.exp(rng.uniform(np.log(0.1), np.log(3.0)))),
        theta=np.exp(rng.uniform(np.log(0.05), np.log(5.0), size=d)),
        sigma_n2=float(np.exp(rng.uniform(np.log(1e-2), np.log(0.5)))),
    )


def random_model(rng: np.random.Generator, n: int, p: int, hp: Hyperparameters = None, ill_conditioned: bool = False):
    """GP on n uniform inputs in [0, 1]^(p + 1) with targets in [0, 1]."""
    X = rng.uniform(0.0, 1.0, size=(n, p + 1))
    y = rng.uniform(0.0, 1.0, size=n)
    if hp is None:
        hp = random_hyperparameters(rng, p + 1, ill_conditioned)
    return build_model(X, y, hp, RewardScaler(r_min=-1.0, r_max=3.0), (0.0, 1.0))
