from pathlib import Path

import pytest

from tadiag.modelio import load_ta
from tadiag.observer import load_observer

FIXTURES = Path(__file__).parent / "fixtures"


def load(name):
    return load_ta(FIXTURES / f"{name}.ta")


def load_obs(name):
    return load_observer(FIXTURES / f"{name}.obs")


@pytest.fixture(scope="session")
def fig1():
    return load("fig1")


@pytest.fixture(scope="session")
def obs2():
    return load_obs("obs2")
