import shutil

import pytest

from .helpers import make_engine, make_root


@pytest.fixture
def engine_root():
    root = make_root()
    yield root
    shutil.rmtree(root, ignore_errors=True)


@pytest.fixture
def engine(engine_root):
    e = make_engine(root=engine_root)
    yield e
    e.close()


@pytest.fixture
def priv_engine(engine_root):
    """Engine with privilege drop active (recipes run as nobody)."""
    e = make_engine(root=engine_root, drop_privileges="auto")
    yield e
    e.close()
