import pytest

from gprates import build_psi


@pytest.fixture(scope="session")
def bump_kernel():
    return build_psi("smooth-bump")


@pytest.fixture(scope="session")
def trap_kernel():
    return build_psi("trapezoid")
