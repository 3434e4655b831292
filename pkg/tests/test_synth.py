import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attrsbm.errors import ConfigError, NumericalError
from attrsbm.metrics import nmi
from attrsbm.model import FitConfig
from attrsbm.stats import GaussianComponent, kmeans
from attrsbm.synth import (SWEEP_HEADER, SyntheticSpec, detectability_sweep, generate_attributes, generate_sbm,
                           planted_partition, planted_theta, pout_for_mean_degree)


def _block_density(g, z, same):
    A = g.adjacency().toarray()
    iu, ju = np.triu_indices(len(z), k=1)
    mask = (z[iu] == z[ju]) == same
    return A[iu[mask], ju[mask]].mean()


def test_generate_sbm_extremes():
    z = planted_partition(12, 3)
    full = generate_sbm(z, np.ones((3, 3)), 0)
    assert full.n_edges == 12 * 11 // 2
    assert generate_sbm(z, np.zeros((3, 3)), 0).n_edges == 0


def test_generate_sbm_block_densities():
    z = planted_partition(200, 4)
    theta = planted_theta(4, 0.25, 0.10)
    ok = 0
    for seed in range(20):
        g = generate_sbm(z, theta, seed)
        ok += 0.23 <= _block_density(g, z, True) <= 0.27 and 0.09 <= _block_density(g, z, False) <= 0.11
    assert ok / 20 >= 0.95


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 60), st.integers(1, 4), st.integers(0, 10_000))
def test_edge_count_within_five_sd(N, K, seed):
    rng = np.random.default_rng(seed)
    z = rng.integers(0, K, size=N)
    theta = rng.uniform(0, 1, size=(K, K))
    theta = 0.5 * (theta + theta.T)
    iu, ju = np.triu_indices(N, k=1)
    p = theta[z[iu], z[ju]]
    g = generate_sbm(z, theta, seed)
    assert abs(g.n_edges - p.sum()) <= 5 * np.sqrt(np.sum(p * (1 - p))) + 1e-9


def test_generation_deterministic():
    spec = SyntheticSpec(N=40, K=2, p=3, seed=5)
    g1, X1, z1 = spec.sample()
    g2, X2, z2 = SyntheticSpec(N=40, K=2, p=3, seed=5).sample()
    assert g1 == g2 and np.array_equal(X1, X2) and np.array_equal(z1, z2)
    g3, _, _ = spec.sample(6)
    assert g3 != g1


def test_attributes_degenerate_covariance():
    z = np.array([0, 0, 1, 1])
    psi = [GaussianComponent([1.0, 2.0], 1e-12 * np.eye(2)), GaussianComponent([-3.0, 0.0], 1e-12 * np.eye(2))]
    X = generate_attributes(z, psi, 0)
    assert np.allclose(X, np.array([[1, 2], [1, 2], [-3, 0], [-3, 0]]), atol=1e-5)


def test_attributes_clt_bound():
    mu = np.array([0.5, -1.0, 2.0])
    sd = np.array([1.0, 2.0, 0.5])
    n = 10_000
    X = generate_attributes(np.zeros(n, dtype=int), [GaussianComponent(mu, np.diag(sd**2))], 3)
    assert np.all(np.abs(X.mean(axis=0) - mu) <= 4 * sd / np.sqrt(n))


def test_attributes_separable_kmeans():
    z = np.repeat([0, 1], 25)
    psi = [GaussianComponent(np.zeros(2), np.eye(2)), GaussianComponent(np.full(2, 100 / np.sqrt(2)), np.eye(2))]
    X = generate_attributes(z, psi, 1)
    assert nmi(z, kmeans(X, 2, seed=0).labels) == 1.0


def test_attributes_reject_non_pd():
    with pytest.raises(NumericalError):
        generate_attributes([0], [(np.zeros(2), -np.eye(2))], 0)


def test_pout_closed_form():
    assert pout_for_mean_degree(0.25, 200, 4, 20) == pytest.approx((20 - 49 * 0.25) / 150, abs=1e-15)
    assert round(pout_for_mean_degree(0.25, 200, 4, 20), 5) == 0.05167
    assert pout_for_mean_degree(20 / 49, 200, 4, 20) == pytest.approx(0.0, abs=1e-12)
    uniform = 20 / 199
    assert pout_for_mean_degree(uniform, 200, 4, 20) == pytest.approx(uniform, abs=1e-12)


def test_pout_infeasible_message():
    with pytest.raises(ConfigError, match="feasible p_in range"):
        pout_for_mean_degree(0.9, 200, 4, 20)


def test_spec_validation():
    with pytest.raises(ConfigError):
        SyntheticSpec(N=10, K=3)
    with pytest.raises(ConfigError):
        SyntheticSpec(N=10, K=2, p_in=1.5)
    spec = SyntheticSpec(N=10, K=2, community_sizes=[7, 3])
    assert np.bincount(spec.z).tolist() == [7, 3]
    assert np.allclose(spec.psi[0].cov, 1.25 * np.eye(8))


def test_sweep_shape_and_csv(tmp_path):
    base = SyntheticSpec(N=40, K=2, p=2, seed=1)
    res = detectability_sweep(base, (0.2, 0.35), target_mean_degree=8, replicates=3, seed=2,
                              config=FitConfig(restarts=1))
    assert [c.replicates for c in res.cells] == [3, 3]
    lines = res.to_csv(tmp_path / "s.csv").splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER)
    assert len(lines) == 1 + 6
    again = detectability_sweep(base, (0.2, 0.35), target_mean_degree=8, replicates=3, seed=2,
                                config=FitConfig(restarts=1))
    assert again.to_csv() == res.to_csv()
    assert res.metadata["attribute_redraw"] == "per-replicate"


def test_sweep_uniform_cell_attributes_help():
    base = SyntheticSpec(N=60, K=2, p=4, cov_scale=1.0, seed=3)
    res = detectability_sweep(base, (10 / 59,), target_mean_degree=10, replicates=4, seed=0,
                              config=FitConfig(restarts=2))
    cell = res.cells[0]
    assert cell.p_out == pytest.approx(cell.p_in)
    s = cell.summary()
    assert s["attributed_mean"] >= s["classic_mean"]


def test_sweep_assortative_cell():
    base = SyntheticSpec(N=60, K=2, p=2, seed=4)
    res = detectability_sweep(base, (0.6,), target_mean_degree=20, replicates=3, seed=0,
                              config=FitConfig(restarts=2))
    cell = res.cells[0]
    assert cell.p_in / cell.p_out >= 5
    s = cell.summary()
    assert s["classic_mean"] >= 0.9 and s["attributed_mean"] >= 0.9
