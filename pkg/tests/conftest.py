import sys
from pathlib import Path

import numpy as np
import pytest

BASE_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(BASE_DIR / "src"))
sys.path.insert(0, str(BASE_DIR))

from forms.quadratic_form import make_form  # noqa: E402
from spaces.direct_integral import make_layout, make_section  # noqa: E402
from spaces.measure_space import make_space  # noqa: E402

CONFIG_DIR = BASE_DIR / "config"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_form():
    """Two atoms, weights 1 and 2, fibers C^2 (H = [[-1, i], [-i, 0]]) and C^1 (H = [3])."""
    space = make_space([0, 1], [1.0, 2.0])
    layout = make_layout(space, [2, 1])
    return make_form(layout, [[[-1, 1j], [-1j, 0]], [[3]]])


@pytest.fixture
def small_section(small_form):
    return make_section(small_form.layout, {0: [1, 1j], 1: [2]})


@pytest.fixture
def config_dir():
    return CONFIG_DIR
