import random
from pathlib import Path

import pytest

from graph2text.penman import parse_penman
from graph2text.synth import generate_graph

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def nested_possessive_text():
    return (FIXTURES / "nested_possessive.amr").read_text().strip()


@pytest.fixture(scope="session")
def nested_possessive(nested_possessive_text):
    return parse_penman(nested_possessive_text)


@pytest.fixture(scope="session")
def family_breakup_text():
    return (FIXTURES / "family_breakup.amr").read_text().strip()


@pytest.fixture(scope="session")
def family_breakup(family_breakup_text):
    return parse_penman(family_breakup_text)


def random_graphs(n, seed=0, max_nodes=8, reentrancy_rate=0.4):
    rng = random.Random(seed)
    return [generate_graph(rng, max_nodes=max_nodes, reentrancy_rate=reentrancy_rate)
            for _ in range(n)]


@pytest.fixture(scope="session")
def graph_sample():
    return random_graphs(100, seed=7)
