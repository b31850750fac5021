"""Decomposable Gaussian scoring of DAGs, with tiered-knowledge awareness.

The local score of a node given its parents is the maximized Gaussian
log-likelihood of the corresponding linear regression minus a lambda-scaled
BIC penalty of half the parent count times log n. Everything is computed from
sufficient statistics, so scoring never touches raw samples.
"""

from __future__ import annotations

import io
import json
import math
import warnings

import numpy as np

from .graphs import FormatError, GraphError, Pdag, TieredKnowledge, \
    _auto_labels, consistent_extension, is_dag

VARIANCE_FLOOR = 1e-12

NEG_INF = float("-inf")


class ScoreError(ValueError):
    pass


class Dataset:
    """Sufficient statistics (n, mean, MLE covariance) of an i.i.d. sample.

    cov is normalized by n, not n - 1.
    """

    __slots__ = ("n", "d", "cov", "mean", "labels")

    def __init__(self, n, cov, mean=None, labels=None):
        cov = np.asarray(cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ScoreError("cov must be a square matrix")
        d = cov.shape[0]
        if n < 1:
            raise ScoreError("n must be positive")
        if mean is None:
            mean = np.zeros(d)
        mean = np.asarray(mean, dtype=float)
        if mean.shape != (d,):
            raise ScoreError("mean must have length %d" % d)
        if labels is None:
            labels = _auto_labels(d)
        labels = tuple(labels)
        if len(labels) != d:
            raise ScoreError("expected %d labels" % d)
        if len(set(labels)) != d:
            raise ScoreError("duplicate labels")
        self.n = int(n)
        self.d = d
        self.cov = 0.5 * (cov + cov.T)
        self.cov.setflags(write=False)
        self.mean = mean
        self.labels = labels

    @classmethod
    def from_array(cls, X, labels=None):
        X = np.asarray(X, dtype=float)
        n = X.shape[0]
        mean = X.mean(axis=0)
        centered = X - mean
        cov = centered.T @ centered / n
        return cls(n, cov, mean, labels)

    @classmethod
    def from_csv(cls, text):
        """Parse a samples CSV: header of variable labels, one row per sample."""
        rows = list(io.StringIO(text).read().splitlines())
        if not rows:
            raise FormatError("line 1, col 1: empty dataset")
        labels = [c.strip() for c in rows[0].split(",")]
        d = len(labels)
        data = np.empty((len(rows) - 1, d))
        for i, row in enumerate(rows[1:], start=2):
            cells = row.split(",")
            if len(cells) != d:
                raise FormatError("line %d: expected %d columns, got %d"
                                  % (i, d, len(cells)))
            for j, cell in enumerate(cells):
                try:
                    data[i - 2, j] = float(cell)
                except ValueError:
                    raise FormatError("line %d, col %d: bad number %r"
                                      % (i, j + 1, cell.strip()))
        if data.shape[0] < 1:
            raise FormatError("line 2, col 1: no sample rows")
        return cls.from_array(data, labels)

    def to_stats_json(self):
        payload = {"n": self.n, "labels": list(self.labels),
                   "mean": self.mean.tolist(), "cov": self.cov.tolist()}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_stats_json(cls, text):
        payload = json.loads(text)
        return cls(payload["n"], np.array(payload["cov"]),
                   np.array(payload["mean"]), payload["labels"])


class Scorer:
    """Memoized local scorer over a Dataset.

    Without knowledge the local score is the Gaussian BIC; with knowledge it
    is the tiered variant, which is -inf exactly when some parent lies in a
    strictly later tier than the child. lam >= 0 scales the penalty. The memo
    cache only ever stores finished values, so sharing a scorer across
    threads is safe in the usual dict-per-key sense.
    """

    def __init__(self, dataset: Dataset, knowledge: TieredKnowledge | None = None,
                 lam: float = 1.0):
        if lam < 0:
            raise ScoreError("lam must be >= 0")
        if knowledge is not None and knowledge.d != dataset.d:
            raise ScoreError("knowledge covers %d nodes, data has %d"
                             % (knowledge.d, dataset.d))
        self.dataset = dataset
        self.knowledge = knowledge
        self.lam = float(lam)
        self._logn = math.log(dataset.n)
        self._cache = {}

    def local_bic(self, i, parents) -> float:
        """Gaussian BIC local score of node i given a parent set."""
        key = (i, frozenset(parents))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        ps = sorted(key[1])
        S = self.dataset.cov
        if ps:
            spp = S[np.ix_(ps, ps)]
            spi = S[ps, i]
            try:
                beta = np.linalg.solve(spp, spi)
            except np.linalg.LinAlgError:
                raise ScoreError("collinear parents of node %d: %s" % (i, ps))
            sigma2 = float(S[i, i] - spi @ beta)
            if not math.isfinite(sigma2):
                raise ScoreError("collinear parents of node %d: %s" % (i, ps))
        else:
            sigma2 = float(S[i, i])
        if sigma2 < VARIANCE_FLOOR:
            warnings.warn("residual variance %.3g at node %d floored to %g"
                          % (sigma2, i, VARIANCE_FLOOR))
            sigma2 = VARIANCE_FLOOR
        n = self.dataset.n
        loglik = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)
        value = loglik - self.lam * 0.5 * len(ps) * self._logn
        self._cache[key] = value
        return value

    def local_tbic(self, i, parents) -> float:
        """Tiered local score: -inf when a parent's tier exceeds node i's."""
        if self.knowledge is None:
            raise ScoreError("local_tbic requires attached knowledge")
        tau = self.knowledge.tau
        if any(tau[p] > tau[i] for p in parents):
            return NEG_INF
        return self.local_bic(i, parents)

    def local(self, i, parents) -> float:
        if self.knowledge is None:
            return self.local_bic(i, parents)
        return self.local_tbic(i, parents)

    def total_score(self, g: Pdag) -> float:
        """Sum of local scores of a DAG, in node-index order."""
        if not is_dag(g):
            raise ScoreError("total_score requires a DAG")
        total = 0.0
        for i in range(g.d):
            total += self.local(i, g.parents(i))
        return total

    def score_class(self, g: Pdag) -> float:
        """Score of the (restricted) equivalence class represented by g,
        computed on a consistent extension; which extension is immaterial."""
        return self.total_score(consistent_extension(g, self.knowledge))


def tune_lambda(dataset: Dataset, knowledge: TieredKnowledge, target_edges: int,
                lam_lo: float = 2.0 ** -6, lam_hi: float = 2.0 ** 6,
                max_iter: int = 40) -> float:
    """Pick lambda so the TGES estimate has as close to target_edges edges as
    possible, by geometric bisection on the (heuristically monotone) edge
    count. Ties go to the larger lambda. Raises ScoreError("target
    unreachable in lambda range") when no bracket exists even after widening.
    """
    from .search import tges

    if target_edges < 0:
        raise ScoreError("target_edges must be >= 0")
    counts = {}

    def count(lam):
        if lam not in counts:
            counts[lam] = tges(dataset, knowledge, lam=lam).graph.n_edges
        return counts[lam]

    lo, hi = float(lam_lo), float(lam_hi)
    while count(hi) > target_edges and hi < 1e6:
        hi *= 2.0
    while count(lo) < target_edges and lo > 1e-6:
        lo /= 2.0
    if count(hi) > target_edges or count(lo) < target_edges:
        raise ScoreError("target unreachable in lambda range")
    for _ in range(max_iter):
        if hi / lo < 1.0 + 1e-9:
            break
        mid = math.sqrt(lo * hi)
        if count(mid) > target_edges:
            lo = mid
        else:
            hi = mid
    best = min(counts, key=lambda lam: (abs(counts[lam] - target_edges), -lam))
    return best
