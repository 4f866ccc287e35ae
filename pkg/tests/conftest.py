import pytest

from tpng.model.schemas import Box, ModelParams
from tpng.sampling.streams import RngStreams
from tpng.services.sweep import build_diagram

from reference_data import make_reference_diagram, make_reference_layer


@pytest.fixture(scope='session')
def reference_diagram():
    return make_reference_diagram()


@pytest.fixture(scope='session')
def reference_layer(reference_diagram):
    return make_reference_layer(reference_diagram)


@pytest.fixture
def streams():
    return RngStreams.from_seed(20240607)


@pytest.fixture
def make_params():
    """Factory for small model parameters; keyword overrides win."""
    def _make(t=0.5, source_rate=1.0, sink_rate=2.0, width=12.0, height=12.0, seed=7, bulk_intensity=1.0):
        return ModelParams(
            t=t,
            source_rate=source_rate,
            sink_rate=sink_rate,
            bulk_intensity=bulk_intensity,
            box=Box(width=width, height=height),
            seed=seed,
        )
    return _make


@pytest.fixture(scope='session')
def sampled_diagram():
    params = ModelParams(t=0.4, source_rate=1.0, sink_rate=1.5, box=Box(width=15, height=15), seed=11)
    return build_diagram(params)
