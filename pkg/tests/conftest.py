import numpy as np
import pytest

from cb2cf.data import ContentProfile
from cb2cf.sgns import EmbeddingTable


@pytest.fixture
def word_table() -> EmbeddingTable:
    """Six unit word vectors in 4 dimensions, fixed seed."""
    rng = np.random.default_rng(3)
    words = ["alpha", "beta", "delta", "epsilon", "gamma", "zeta"]
    vectors = rng.standard_normal((len(words), 4))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    return EmbeddingTable(words, vectors)


@pytest.fixture
def profiles() -> list[ContentProfile]:
    return [
        ContentProfile(id="m1", plot="alpha beta gamma", genres=["drama"],
                       actors=["ann", "bob"], directors=["dee"],
                       languages=["en"], year=1994),
        ContentProfile(id="m2", plot="beta delta", genres=["drama", "comedy"],
                       actors=["bob"], directors=["dee"], languages=["en"],
                       year=2004),
        ContentProfile(id="m3", plot=None, genres=[], actors=[],
                       directors=[], languages=[], year=None),
    ]
