import numpy as np
import pytest
from hypothesis import settings, strategies as st

from bipartite_crd import BipartiteGraph, Clustering

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_graph(rng: np.random.Generator, n: int, m: int, density: float = 0.35,
                 integer: bool = False) -> BipartiteGraph:
    mask = rng.random((n, m)) < density
    w = rng.integers(1, 4, size=(n, m)) if integer else rng.uniform(0.1, 3.0, size=(n, m))
    return BipartiteGraph.from_matrix(np.where(mask, w, 0.0))


def balanced_labels(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    return rng.permutation(np.arange(n) % k)


@st.composite
def graphs(draw, max_n: int = 10, max_m: int = 12):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    seed = draw(st.integers(0, 2**32 - 1))
    density = draw(st.floats(0.05, 0.9))
    return random_graph(np.random.default_rng(seed), n, m, density)


@st.composite
def graph_and_clustering(draw, ks=(2, 3, 4), max_per_cluster: int = 3, max_m: int = 12):
    k = draw(st.sampled_from(ks))
    n = k * draw(st.integers(1, max_per_cluster))
    m = draw(st.integers(1, max_m))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, m, draw(st.floats(0.1, 0.8)))
    return g, Clustering(balanced_labels(rng, n, k), k)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call":
                continue
            for key, value in getattr(rep, "user_properties", []):
                if key == "criterion":
                    lines.append((value[0], f"criterion {value[0]:>2}: {'PASS' if rep.passed else 'FAIL'}  {value[1]}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
