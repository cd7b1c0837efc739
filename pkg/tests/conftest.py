import numpy as np
import pytest
from hypothesis import strategies as st

from heston_clse.model import HestonParams, TransformedParams

REFERENCE = dict(a=2.0, b=0.5, alpha=0.1, beta=-1.0, sigma1=0.4, sigma2=0.3, rho=-0.5, y0=1.0, x0=0.0)


@pytest.fixture
def reference_params():
    return HestonParams(**REFERENCE)


def random_params(rng: np.random.Generator) -> HestonParams:
    """Draw from a box well inside the subcritical domain."""
    return HestonParams(
        a=rng.uniform(0.1, 5.0),
        b=rng.uniform(0.05, 4.0),
        alpha=rng.uniform(-3.0, 3.0),
        beta=rng.uniform(-3.0, 3.0),
        sigma1=rng.uniform(0.05, 2.0),
        sigma2=rng.uniform(0.05, 2.0),
        rho=rng.uniform(-0.99, 0.99),
        y0=rng.uniform(0.1, 5.0),
    )


def random_transformed(rng: np.random.Generator) -> TransformedParams:
    return TransformedParams(
        c=rng.uniform(0.05, 5.0),
        d=rng.uniform(0.02, 0.98),
        gamma=rng.uniform(-3.0, 3.0),
        delta=rng.uniform(-3.0, 3.0),
    )


heston_params = st.builds(
    HestonParams,
    a=st.floats(0.05, 10.0),
    b=st.floats(0.01, 6.0),
    alpha=st.floats(-10.0, 10.0),
    beta=st.floats(-10.0, 10.0),
    sigma1=st.floats(0.01, 3.0),
    sigma2=st.floats(0.01, 3.0),
    rho=st.floats(-0.999, 0.999),
    y0=st.floats(0.01, 10.0),
)
