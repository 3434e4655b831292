import numpy as np
import pytest

from attrsbm.graph import Graph
from attrsbm.stats import GaussianComponent
from attrsbm.synth import SyntheticSpec


def random_graph(N, p, seed):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(N, k=1)
    hit = rng.random(len(iu)) < p
    return Graph(N, np.column_stack([iu[hit], ju[hit]]))


def separated_instance(N=40, K=2, p_in=0.9, p_out=0.05, p=2, gap=10.0, seed=0, sizes=None):
    means = [np.full(p, gap * c) for c in range(K)]
    spec = SyntheticSpec(N=N, K=K, p_in=p_in, p_out=p_out, p=p, seed=seed, community_sizes=sizes,
                         psi=[GaussianComponent(m, np.eye(p)) for m in means])
    return spec.sample()


@pytest.fixture
def path3():
    return Graph(3, [(0, 1), (1, 2)])
