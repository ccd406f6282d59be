import pathlib

import pytest

from sparsepaths import load_edge_list, reference_probabilities

DATA = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def fig1():
    return load_edge_list(DATA / "fig1.tsv", undirected=True)


@pytest.fixture(scope="session")
def fig1_uniform(fig1):
    return reference_probabilities(fig1, "uniform")


@pytest.fixture(scope="session")
def fig1_natural(fig1):
    return reference_probabilities(fig1, "natural")


@pytest.fixture(scope="session")
def karate():
    g = load_edge_list(DATA / "karate.tsv", undirected=True)
    return g


@pytest.fixture(scope="session")
def data_dir():
    return DATA
