import numpy as np
import pytest

from netoed.bundle import ModelBundle, default_bundle
from netoed.detection import DetectionModel
from netoed.earthmodel import CorrelationModel, MeanSurrogate, SigmaSurrogate


def constant_bundle(sigma_model=0.5, slowness=1 / 6.0, detection=None, correlation=None, **kw):
    """Bundle with mu = slowness*distance, a constant sigma_model and the
    default pick noise; handy for hand-checkable likelihoods."""
    deltas = (0.0, 1000.0)
    depths = (0.0, 200.0)
    table = tuple(tuple(slowness * d for _ in depths) for d in deltas)
    sig = SigmaSurrogate((sigma_model,) + (0.0,) * 20, (deltas, depths), 5, 0.0, 0.0)
    return ModelBundle(detection or DetectionModel(), MeanSurrogate(deltas, depths, table), sig,
                       correlation or CorrelationModel(), **kw)


@pytest.fixture(scope="session")
def bundle():
    return default_bundle()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
