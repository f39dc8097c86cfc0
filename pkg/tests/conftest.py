import pytest
from hypothesis import settings

from bept import corpus
from bept.lang import Lexicon
from bept.petri import Marking, NetSystem, PetriNet
from bept.realize import TemplateCatalog

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def make_system(arcs, initial=None, labels=None, final=()):
    """Net system from an arc list; ids starting with p, q, i, o or P_ are places."""
    nodes = {n for a in arcs for n in a}
    places = {n for n in nodes if n[0] in "pqio" or n.startswith("P_")}
    net = PetriNet(places, nodes - places, arcs, labels or {})
    if initial is None:
        sources = [p for p in places if not net.preset[p]]
        initial = Marking.of(*sources)
    return NetSystem(net, Marking(initial) if not isinstance(initial, Marking) else initial, frozenset(final))


@pytest.fixture(scope="session")
def lexicon():
    return Lexicon.load()


@pytest.fixture(scope="session")
def catalog():
    return TemplateCatalog.load()


@pytest.fixture(scope="session")
def n1():
    return corpus.load("n1")


@pytest.fixture(scope="session")
def nstar():
    return corpus.load("nstar")
