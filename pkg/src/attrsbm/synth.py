"""Synthetic attributed networks and the detectability sweep."""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

from ._parallel import pmap
from .errors import ConfigError, NumericalError
from .graph import Graph
from .metrics import nmi
from .model import ATTRIBUTED, CLASSIC, FitConfig, fit
from .stats import GaussianComponent

SWEEP_HEADER = ["p_in", "p_out", "replicate", "seed", "nmi_classic", "nmi_attributed"]
DEFAULT_P_IN_GRID = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)


def planted_partition(N: int, K: int, community_sizes=None) -> np.ndarray:
    """Contiguous labels with the given sizes (equal sizes by default)."""
    if community_sizes is None:
        if N % K:
            raise ConfigError(f"N={N} is not divisible by K={K}; pass community_sizes")
        community_sizes = [N // K] * K
    community_sizes = [int(s) for s in community_sizes]
    if sum(community_sizes) != N or len(community_sizes) != K:
        raise ConfigError("community sizes must be K numbers summing to N")
    return np.repeat(np.arange(K), community_sizes)


def planted_theta(K: int, p_in: float, p_out: float) -> np.ndarray:
    if not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise ConfigError("p_in and p_out must lie in [0, 1]")
    return np.where(np.eye(K, dtype=bool), p_in, p_out)


def generate_sbm(z, theta, seed, node_names=None) -> Graph:
    """Independent Bernoulli draw for every unordered dyad ``i < j``."""
    z = np.asarray(z, dtype=np.int64)
    theta = np.asarray(theta, dtype=float)
    N = len(z)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(N, k=1)
    hit = rng.random(len(iu)) < theta[z[iu], z[ju]]
    return Graph(N, np.column_stack([iu[hit], ju[hit]]), node_names=node_names)


def generate_attributes(z, psi, seed) -> np.ndarray:
    """Row ``i`` drawn from ``N(mu_{z_i}, Sigma_{z_i})``."""
    z = np.asarray(z, dtype=np.int64)
    if z.max() >= len(psi):
        raise ConfigError("partition uses more communities than there are components")
    chols = []
    for comp in psi:
        cov = np.asarray(comp.cov if isinstance(comp, GaussianComponent) else comp[1], dtype=float)
        try:
            chols.append(np.linalg.cholesky(cov))
        except np.linalg.LinAlgError:
            raise NumericalError("attribute covariance is not positive definite") from None
    means = np.array([c.mean if isinstance(c, GaussianComponent) else c[0] for c in psi], dtype=float)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((len(z), means.shape[1]))
    L = np.array(chols)
    return means[z] + np.einsum("nij,nj->ni", L[z], noise)


def pout_for_mean_degree(p_in: float, N: int, K: int, target_mean_degree: float) -> float:
    """Between-block probability giving the target mean degree with equal blocks."""
    inside = N / K - 1
    outside = N * (K - 1) / K
    p_out = (target_mean_degree - inside * p_in) / outside
    if not -1e-12 <= p_out <= 1 + 1e-12:
        lo = max(0.0, (target_mean_degree - outside) / inside)
        hi = min(1.0, target_mean_degree / inside)
        raise ConfigError(
            f"p_in={p_in} gives p_out={p_out:.6g} outside [0, 1]; feasible p_in range is [{lo:.6g}, {hi:.6g}]")
    return float(min(max(p_out, 0.0), 1.0))


@dataclass
class SyntheticSpec:
    """Parameters of a planted attributed network.

    When ``psi`` is omitted, community means are drawn i.i.d. standard
    normal from ``seed`` and every covariance is ``cov_scale * I``.
    """

    N: int = 200
    K: int = 4
    p_in: float = 0.25
    p_out: float = 0.10
    p: int = 8
    cov_scale: float = 1.25
    seed: int = 0
    community_sizes: list | None = None
    theta: np.ndarray | None = None
    psi: list | None = None

    def __post_init__(self):
        if self.theta is None:
            self.theta = planted_theta(self.K, self.p_in, self.p_out)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (self.K, self.K):
            raise ConfigError("theta must be K x K")
        if np.any(self.theta < 0) or np.any(self.theta > 1):
            raise ConfigError("theta entries must lie in [0, 1]")
        self.z = planted_partition(self.N, self.K, self.community_sizes)
        if self.psi is None and self.p > 0:
            rng = np.random.default_rng([self.seed, 0])
            means = rng.standard_normal((self.K, self.p))
            self.psi = [GaussianComponent(m, self.cov_scale * np.eye(self.p)) for m in means]

    def sample(self, seed=None):
        """Draw ``(graph, X, z)``; ``seed`` defaults to ``self.seed``."""
        seed = self.seed if seed is None else seed
        ss = np.random.SeedSequence([int(seed), 1])
        g_seed, x_seed = (int(s) for s in ss.generate_state(2))
        names = [f"n{i}" for i in range(self.N)]
        g = generate_sbm(self.z, self.theta, g_seed, names)
        X = generate_attributes(self.z, self.psi, x_seed) if self.psi is not None else None
        return g, X, self.z.copy()


@dataclass
class SweepCell:
    p_in: float
    p_out: float
    seeds: list = field(default_factory=list)
    nmi_classic: list = field(default_factory=list)
    nmi_attributed: list = field(default_factory=list)

    @property
    def replicates(self):
        return len(self.seeds)

    def summary(self):
        c, a = np.asarray(self.nmi_classic), np.asarray(self.nmi_attributed)
        return {"p_in": self.p_in, "p_out": self.p_out, "replicates": self.replicates,
                "classic_mean": float(c.mean()), "classic_sd": float(c.std(ddof=1)) if len(c) > 1 else 0.0,
                "attributed_mean": float(a.mean()), "attributed_sd": float(a.std(ddof=1)) if len(a) > 1 else 0.0}


@dataclass
class SweepResult:
    cells: list
    metadata: dict = field(default_factory=dict)

    def rows(self):
        for cell in self.cells:
            for r, (s, c, a) in enumerate(zip(cell.seeds, cell.nmi_classic, cell.nmi_attributed)):
                yield [cell.p_in, cell.p_out, r, s, c, a]

    def to_csv(self, dest=None) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for p_in, p_out, r, s, c, a in self.rows():
            w.writerow([repr(float(p_in)), repr(float(p_out)), r, s, repr(float(c)), repr(float(a))])
        text = out.getvalue()
        if isinstance(dest, (str, os.PathLike)):
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        elif dest is not None:
            dest.write(text)
        return text


def _sweep_job(args):
    spec, seed, config = args
    g, X, z = spec.sample(seed)
    classic = fit(g, None, spec.K, config, CLASSIC)
    attributed = fit(g, X, spec.K, config, ATTRIBUTED)
    return nmi(z, classic.partition), nmi(z, attributed.partition)


def detectability_sweep(base_spec: SyntheticSpec, p_in_grid=DEFAULT_P_IN_GRID, target_mean_degree=20,
                        replicates=10, seed=0, config: FitConfig | None = None, jobs=1) -> SweepResult:
    """NMI of classic and attributed fits across a grid of within-block probabilities.

    Community Gaussians are fixed by ``base_spec``; every replicate draws a
    fresh graph and a fresh attribute matrix from them. Both models are fit
    at the true K.
    """
    config = config or FitConfig()
    cells, jobs_args = [], []
    for c, p_in in enumerate(p_in_grid):
        p_out = pout_for_mean_degree(p_in, base_spec.N, base_spec.K, target_mean_degree)
        spec = SyntheticSpec(base_spec.N, base_spec.K, p_in, p_out, base_spec.p, base_spec.cov_scale,
                             base_spec.seed, base_spec.community_sizes, None, base_spec.psi)
        seeds = [int(s) for s in np.random.SeedSequence([int(seed), c]).generate_state(replicates)]
        cells.append(SweepCell(float(p_in), p_out, seeds))
        for s in seeds:
            fit_cfg = FitConfig(config.tol, config.max_iter, config.restarts, s, config.init, config.smoothing, 1)
            jobs_args.append((spec, s, fit_cfg))
    results = iter(pmap(_sweep_job, jobs_args, jobs))
    for cell in cells:
        for _ in cell.seeds:
            c, a = next(results)
            cell.nmi_classic.append(c)
            cell.nmi_attributed.append(a)
    meta = {"target_mean_degree": target_mean_degree, "replicates": replicates, "seed": seed,
            "attribute_redraw": "per-replicate", "K": base_spec.K, "N": base_spec.N}
    return SweepResult(cells, meta)
