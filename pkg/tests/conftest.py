import random

import pytest

from s4oc.arch import ArchGraph, Element, ElementKind, Link, PESubtype

# Three-instruction reference trace used across parser/DAG/CLI tests.
MINI_TRACE = """%4 = and %2, %3;
%5 = mul %2, %4;
%6 = add %4, %5;
"""


def random_connected_arch(rng: random.Random, n_ce: int = 6, n_pe: int = 5) -> ArchGraph:
    """Random architecture with a connected CE backbone (random tree + extras)."""
    elements = [Element(id=i, kind=ElementKind.CE) for i in range(n_ce)]
    links = []
    for i in range(1, n_ce):
        links.append(Link(i, rng.randrange(i), bandwidth=rng.randint(1, 64)))
    for _ in range(rng.randint(0, n_ce)):
        a, b = rng.sample(range(n_ce), 2)
        if not any({ln.a, ln.b} == {a, b} for ln in links):
            links.append(Link(a, b, bandwidth=rng.randint(1, 64)))
    subtypes = list(PESubtype)
    for j in range(n_pe):
        eid = n_ce + j
        elements.append(
            Element(id=eid, kind=ElementKind.PE, subtype=rng.choice(subtypes))
        )
        links.append(Link(eid, rng.randrange(n_ce), bandwidth=rng.randint(1, 64)))
    return ArchGraph(elements, links)


@pytest.fixture
def rng():
    return random.Random(12345)
