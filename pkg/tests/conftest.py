import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from hardylift.innergen import seeded_fixtures, synthesize_path  # noqa: E402
from hardylift.lift import lift  # noqa: E402

_CACHE = {}


def lifted_fixtures():
    """The 20 seeded fixtures as (spec, path, lift) triples, built once per session."""
    if "seeded" not in _CACHE:
        out = []
        for spec in seeded_fixtures():
            path, _ = synthesize_path(spec)
            out.append((spec, path, lift(path, strict=False)))
        _CACHE["seeded"] = out
    return _CACHE["seeded"]


@pytest.fixture(scope="session")
def seeded():
    return lifted_fixtures()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
