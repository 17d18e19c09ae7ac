from functools import lru_cache

import pytest

from gdifs import corpus
from gdifs.attractor import compute_attractor


@lru_cache(maxsize=None)
def cached_approx(name: str, depth: int, budget: int = 10**6):
    return compute_attractor(corpus.ALL_SYSTEMS[name](), depth, budget=budget)


@pytest.fixture
def approx():
    return cached_approx
