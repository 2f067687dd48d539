import hypothesis
import numpy as np
import pytest

from crop_ensemble import Frame

# single-core CI boxes make per-example deadlines flaky
hypothesis.settings.register_profile("default", deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def gray_frame():
    """816x816 constant-gray reference frame."""
    return Frame(np.full((816, 816, 3), 128, dtype=np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
