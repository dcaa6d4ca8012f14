import os
import tempfile

import pytest

# One cache directory per test session: heavy series are shared between
# tests but never leak into (or read from) the working tree.
_CACHE = tempfile.mkdtemp(prefix="slopelab-test-cache-")
os.environ["SLOPELAB_CACHE"] = _CACHE


@pytest.fixture
def cache_dir():
    return _CACHE
