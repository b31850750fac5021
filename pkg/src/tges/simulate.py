"""Random tiered ground truths and linear Gaussian sampling.

Truths are Erdos-Renyi DAGs drawn along a uniformly random topological
order, with tiers cut from that same order so the DAG always encodes its
knowledge. Data follow a linear structural equation model with standard
normal noise. All randomness flows through numpy Generators seeded as
[seed, purpose, replicate] (purpose 0 = truth, 1 = data), so replicates and
purposes are independent, reproducible streams.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .graphs import Pdag, TieredKnowledge, _auto_labels, tiered_mpdag_of
from .scoring import Dataset

REJECTION_CAP = 10_000


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Knobs of the synthetic-study generator.

    d and the edge probability are drawn uniformly per replicate from their
    ranges (inclusive); tiers is the tier count, cut at uniform positions of
    the topological order with every tier nonempty.
    """

    d_range: tuple = (7, 20)
    edge_prob_range: tuple = (0.1, 0.8)
    n: int = 10_000
    tiers: int = 3
    weight_range: tuple = (0.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.d_range
        if not (2 <= lo <= hi):
            raise SimError("d_range must satisfy 2 <= lo <= hi")
        plo, phi = self.edge_prob_range
        if not (0.0 <= plo <= phi <= 1.0):
            raise SimError("edge_prob_range must lie in [0, 1]")
        if self.n < 1:
            raise SimError("n must be positive")
        if not 1 <= self.tiers <= lo:
            raise SimError("tiers must be between 1 and min d")
        wlo, whi = self.weight_range
        if not wlo <= whi:
            raise SimError("weight_range must be ordered")


@dataclass(frozen=True)
class GroundTruth:
    """A sampled truth: DAG with edge weights, tiers, and the tiered MPDAG
    the algorithms are judged against."""

    dag: Pdag
    weights: dict
    k: TieredKnowledge
    target: Pdag
    p: float

    def coefficient_matrix(self):
        B = np.zeros((self.dag.d, self.dag.d))
        for (a, b), w in self.weights.items():
            B[a, b] = w
        return B

    def implied_cov(self):
        """Model covariance (I - B')^-1 (I - B')^-T of the linear SEM."""
        d = self.dag.d
        m = np.linalg.inv(np.eye(d) - self.coefficient_matrix().T)
        return m @ m.T


def gen_truth(cfg: SimConfig, replicate: int = 0) -> GroundTruth:
    """Draw one ground truth; redraws on an edgeless graph, erroring after
    REJECTION_CAP attempts."""
    rng = np.random.default_rng([cfg.seed, 0, replicate])
    for _ in range(REJECTION_CAP):
        d = int(rng.integers(cfg.d_range[0], cfg.d_range[1] + 1))
        p = float(rng.uniform(*cfg.edge_prob_range))
        order = [int(v) for v in rng.permutation(d)]
        edges = []
        for i in range(d):
            for j in range(i + 1, d):
                if rng.random() < p:
                    edges.append((order[i], order[j]))
        if not edges:
            continue
        tau = {}
        if cfg.tiers > 1:
            cuts = sorted(int(c) for c in
                          rng.choice(np.arange(1, d), size=cfg.tiers - 1,
                                     replace=False))
        else:
            cuts = []
        bounds = cuts + [d]
        tier = 1
        for pos in range(d):
            while pos >= bounds[tier - 1]:
                tier += 1
            tau[order[pos]] = tier
        weights = {e: float(rng.uniform(*cfg.weight_range)) for e in edges}
        dag = Pdag(d, edges, (), _auto_labels(d))
        k = TieredKnowledge(tau, d=d)
        return GroundTruth(dag, weights, k, tiered_mpdag_of(dag, k), p)
    raise SimError("no graph with at least one edge in %d draws" % REJECTION_CAP)


def draw_samples(gt: GroundTruth, n: int, seed: int,
                 replicate: int = 0) -> np.ndarray:
    """n samples of the linear Gaussian SEM, rows = observations."""
    from .graphs import topological_order

    d = gt.dag.d
    rng = np.random.default_rng([seed, 1, replicate])
    X = rng.standard_normal((n, d))
    for j in topological_order(gt.dag):
        for i in gt.dag.parents(j):
            X[:, j] += gt.weights[(i, j)] * X[:, i]
    return X


def sample_data(gt: GroundTruth, n: int, seed: int,
                replicate: int = 0) -> Dataset:
    return Dataset.from_array(draw_samples(gt, n, seed, replicate),
                              gt.dag.labels)


def write_replicate(dirpath, gt: GroundTruth, X: np.ndarray):
    """Write one replicate's artifacts: truth and target edge lists, tier
    file, samples CSV. Writes are atomic (temp file, then rename)."""
    os.makedirs(dirpath, exist_ok=True)
    labels = gt.dag.labels or _auto_labels(gt.dag.d)
    atomic_write(os.path.join(dirpath, "truth.edgelist"), gt.dag.to_edgelist())
    atomic_write(os.path.join(dirpath, "target.edgelist"), gt.target.to_edgelist())
    atomic_write(os.path.join(dirpath, "tiers.csv"), gt.k.to_csv(labels))
    rows = [",".join(labels)]
    rows += [",".join("%.17g" % v for v in row) for row in X]
    atomic_write(os.path.join(dirpath, "data.csv"), "\n".join(rows) + "\n")


def atomic_write(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
