"""Shared fixtures: one float and one exact-rational 8x8 workbench setup."""

import random
from fractions import Fraction

import pytest

from pqft.lattice import Retraction, build_lattice, compute_propagators, make_switching


@pytest.fixture(scope="session")
def float_setup():
    lat = build_lattice(8, 8, 0.5, 1.0, 1.0)
    props = compute_propagators(lat)
    ret = Retraction(props, make_switching(lat, 2, 5))
    return lat, props, ret


@pytest.fixture(scope="session")
def rational_setup():
    lat = build_lattice(8, 8, Fraction(1, 2), 1, 1, mode="rational")
    props = compute_propagators(lat)
    ret = Retraction(props, make_switching(lat, 2, 5))
    return lat, props, ret


@pytest.fixture(scope="session")
def small_rational_setup():
    lat = build_lattice(6, 4, Fraction(1, 2), 1, 1, mode="rational")
    props = compute_propagators(lat)
    ret = Retraction(props, make_switching(lat, 2, 4))
    return lat, props, ret


@pytest.fixture()
def rng():
    return random.Random(20260810)
