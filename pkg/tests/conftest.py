import numpy as np
import pytest

from slatesim.catalog import CostDistribution, ItemCatalog, RelevanceParams, generate_synthetic_catalog
from slatesim.rng import derive_stream


@pytest.fixture
def rng():
    return derive_stream(1234, "tests", 0)


@pytest.fixture
def small_catalog():
    """200 items, mixed relevances and costs, fixed seed."""
    return generate_synthetic_catalog(
        200, RelevanceParams(2, 8), CostDistribution(0, 100), derive_stream(7, "catalog", 0)
    )


@pytest.fixture
def tiny_catalog():
    """Hand-built 4-item catalog with easy numbers."""
    return ItemCatalog(
        item_ids=np.arange(4),
        sigmas=np.array([0.5, 0.2, 0.9, 0.0]),
        costs=np.array([30.0, 10.0, 60.0, 5.0]),
    )
