import shutil
from pathlib import Path

import pytest

from loopsched.parser import parse_file

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


def fixture_procs(name):
    return parse_file(FIXTURES / name)


@pytest.fixture
def procs():
    return fixture_procs


@pytest.fixture(scope="session")
def gcc():
    path = shutil.which("gcc") or shutil.which("cc")
    if path is None:
        pytest.skip("no C compiler available")
    return path
