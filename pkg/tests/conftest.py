import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spindepth.boundary import CurveCache  # noqa: E402


@pytest.fixture(scope="session")
def curve_dir(tmp_path_factory):
    # reuse a warm cache across runs when one is provided
    d = os.environ.get("SPINDEPTH_TEST_CACHE")
    return Path(d) if d else tmp_path_factory.mktemp("curves")


@pytest.fixture(scope="session")
def cache(curve_dir):
    return CurveCache(curve_dir)
