import numpy as np
import pytest

from mixzone import EXAMPLE_STATE, EXAMPLE_TRANSITION, make_zone, validate_transition_matrix

# Worked example, normalized weights to 3 decimals. Entry (1,4) is sometimes
# quoted as 0.117; recomputation gives 0.0117 (row 1 then sums to 1).
EXAMPLE_WMAP = np.array([
    [0.00003, 0.898, 0.089, 0.0117],
    [0.036, 0.051, 0.684, 0.228],
    [0.015, 0.852, 0.014, 0.118],
    [0.009, 0.699, 0.291, 0.001],
])


@pytest.fixture
def example_p():
    return validate_transition_matrix(EXAMPLE_TRANSITION)


@pytest.fixture
def example_state():
    return EXAMPLE_STATE


@pytest.fixture
def zone():
    return make_zone(EXAMPLE_TRANSITION, wmap_threshold=0.1)
