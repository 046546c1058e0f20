import numpy as np
import pytest

from jmefair import kernels
from jmefair.data import load_movielens, split
from jmefair.synth import generate_ml100k


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger numba compilation once so timed tests measure compute only."""
    z = np.random.default_rng(0).normal(size=(2, 4))
    kernels.soft_exposure_forward(z, 0.1, 0.8, 0.2)
    p, _, e = kernels.soft_exposure_forward(z, 0.1, 0.8, 0.2)
    kernels.soft_exposure_backward(p, e, np.zeros(4), 0.1, 0.8)
    kernels.hard_exposure_rows(z, 0.8 ** np.arange(4))


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    return generate_ml100k(
        tmp_path_factory.mktemp("synth") / "ml-100k", n_users=60, n_items=40, seed=11
    )


@pytest.fixture(scope="session")
def synth_bundle(synth_dir):
    return split(load_movielens(synth_dir, "ml100k"), seed=5)
