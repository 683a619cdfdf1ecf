"""Shared session fixtures: groups, automata and reference quantities."""
import math

import pytest

from cannonlab import automaton as aut_mod
from cannonlab import groups, metrics, shift, thermo


@pytest.fixture(scope="session")
def free2():
    return groups.FreeGroup(2)


@pytest.fixture(scope="session")
def free2_aut(free2):
    return aut_mod.build_shortlex_acceptor(free2, 1)


@pytest.fixture(scope="session")
def free2_comp(free2_aut):
    return shift.word_maximal_components(free2_aut)[0]


@pytest.fixture(scope="session")
def genus2():
    return groups.surface_group(2)


@pytest.fixture(scope="session")
def genus2_aut(genus2):
    return aut_mod.build_shortlex_acceptor(genus2, 2)


@pytest.fixture(scope="session")
def schottky():
    return groups.standard_schottky()


@pytest.fixture(scope="session")
def schottky_aut(schottky):
    return aut_mod.build_shortlex_acceptor(schottky, 1)


@pytest.fixture(scope="session")
def schottky_comp(schottky_aut):
    return shift.word_maximal_components(schottky_aut)[0]


@pytest.fixture(scope="session")
def fuchsian(schottky):
    return metrics.FuchsianOrbit(schottky)


@pytest.fixture(scope="session")
def fuchsian_growth(schottky_aut, schottky_comp, fuchsian):
    pot = thermo.cylinder_potential(fuchsian, 8)
    return thermo.growth_rate(schottky_aut, schottky_comp, pot)


@pytest.fixture(scope="session")
def log3():
    return math.log(3.0)
