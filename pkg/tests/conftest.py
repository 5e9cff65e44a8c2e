import numpy as np
import pytest

from genma.corpus import load_examples
from genma.fixtures import fixture_path
from genma.models import ModelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def separable():
    return load_examples(fixture_path("separable_30.txt"))


@pytest.fixture
def tiny_genma_spec():
    def make(vocab_size, **kw):
        base = dict(max_len=40, embed_dim=6, conv=((5, 3), (5, 3)), lstm_hidden=4, dense=6)
        base.update(kw)
        return ModelSpec.genma(vocab_size, **base)
    return make
