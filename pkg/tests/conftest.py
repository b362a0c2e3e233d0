import numpy as np
import pytest

from tradescope.raster import Raster


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture
def random_rgb(rng):
    def make(h=32, w=32, gsd=0.6, channels=3):
        return Raster(data=rng.random((h, w, channels)), gsd=gsd)

    return make


@pytest.fixture(scope="session")
def corpus_manifest(tmp_path_factory):
    from tradescope.synthetic import generate_corpus

    return generate_corpus(tmp_path_factory.mktemp("corpus"))
