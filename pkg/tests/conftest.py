import itertools
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from genhop.graph import from_edge_list  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"
REPO = Path(__file__).parent.parent


@st.composite
def graphs(draw, min_nodes=1, max_nodes=9, with_features=False):
    m = draw(st.integers(min_nodes, max_nodes))
    pairs = list(itertools.combinations(range(m), 2))
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = [p for p, keep in zip(pairs, mask) if keep]
    x = None
    if with_features:
        x = np.array(draw(st.lists(st.floats(-2, 2), min_size=m, max_size=m)))[:, None]
    return from_edge_list(m, edges, node_features=x)


@st.composite
def graph_and_perm(draw, **kw):
    g = draw(graphs(**kw))
    perm = draw(st.permutations(list(range(g.num_nodes))))
    return g, np.array(perm, dtype=np.int64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
