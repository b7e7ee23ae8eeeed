import numpy as np
import pytest

from prodtail import mcculloch


@pytest.fixture(scope="session")
def grid(tmp_path_factory):
    """One quantile-function grid per session, cached to a temp file."""
    path = tmp_path_factory.mktemp("grid") / "mcculloch_grid.csv"
    return mcculloch.build_grid(cache_path=path)


@pytest.fixture(scope="session")
def reference_params():
    """A realistic heavy-tail parameter point used across tests."""
    from prodtail.stable import StableParams

    return StableParams(1.36, 0.89, 14.9, 42.0)


def pytest_configure(config):
    np.seterr(over="ignore", under="ignore")
