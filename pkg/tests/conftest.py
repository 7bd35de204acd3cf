import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from monig import experiments as ex
from monig.nig import NIGParams

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def nig_strategy(delta=(-50.0, 50.0), gamma=(1e-3, 1e3), alpha=(1.0 + 1e-3, 1e3), beta=(1e-3, 1e3)):
    """Valid NIGs with scale parameters drawn log-uniformly."""

    def logu(lo, hi):
        return st.floats(np.log(lo), np.log(hi)).map(np.exp)

    return st.builds(
        NIGParams,
        st.floats(*delta),
        logu(*gamma),
        st.floats(np.log(alpha[0] - 1.0), np.log(alpha[1] - 1.0)).map(lambda t: 1.0 + np.exp(t)),
        logu(*beta),
    )


def random_nig(rng, size=None):
    return NIGParams(
        rng.uniform(-3, 3, size),
        rng.uniform(0.2, 5.0, size),
        rng.uniform(1.1, 6.0, size),
        rng.uniform(0.2, 5.0, size),
    )


@pytest.fixture(scope="session")
def replica():
    return ex.make_replica(0)


@pytest.fixture(scope="session")
def trained_replica(replica):
    """MoNIG fitted to the seed-0 replica with the default desk budget."""
    return ex.fit("monig", replica, ex.replica_config(0))
