import pytest

from qsew.voa import heisenberg_voa, heisenberg_module


@pytest.fixture(scope="session")
def V6():
    return heisenberg_voa(6)


@pytest.fixture(scope="session")
def M4(V6):
    return heisenberg_module(0, 4, voa=V6)


@pytest.fixture(scope="session")
def M4p(M4):
    return M4.contragredient()
