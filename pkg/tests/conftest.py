import pytest

from ardflab.sources import MixtureSpec, gaussian, two_point, uniform


@pytest.fixture(scope="session")
def gauss_unit():
    return gaussian(0.0, 1.0)


@pytest.fixture(scope="session")
def ref_spec():
    """Two-component mixture with equal energy shares and a bursty
    component of variance 5 (weights 0.9/0.1, low variance 5/9)."""
    return MixtureSpec.from_sigma1(0.5, 1.0, 5.0)


@pytest.fixture(scope="session")
def ref_mixture(ref_spec):
    return ref_spec.to_source()


@pytest.fixture(scope="session")
def uniform_unit():
    return uniform(1.0)


@pytest.fixture(scope="session")
def twopoint_unit():
    return two_point(1.0)
