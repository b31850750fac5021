"""Structural evaluation of estimated graphs against a ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .graphs import GraphError, Pdag, TieredKnowledge


@dataclass
class ConfusionMatrix:
    """Pairwise confusion counts; na counts pairs that were skipped because
    the two graphs disagree on adjacency (direction metrics only)."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    na: int = 0

    @property
    def precision(self):
        """tp / (tp + fp), or None when undefined."""
        if self.tp + self.fp == 0:
            return None
        return self.tp / (self.tp + self.fp)

    @property
    def recall(self):
        """tp / (tp + fn), or None when undefined."""
        if self.tp + self.fn == 0:
            return None
        return self.tp / (self.tp + self.fn)


@dataclass
class EvalReport:
    sshd: float
    adjacency: ConfusionMatrix
    all_direction: ConfusionMatrix
    in_tier_direction: ConfusionMatrix | None


def _mark(g, a, b):
    if (a, b) in g.directed:
        return ">"
    if (b, a) in g.directed:
        return "<"
    if (a, b) in g.undirected:
        return "-"
    return "."


def _check_pair(est, truth):
    if est.d != truth.d:
        raise GraphError("graphs have different node counts")
    if est.d < 2:
        raise GraphError("metrics require at least two nodes")


def sshd(est: Pdag, truth: Pdag) -> float:
    """Scaled structural Hamming distance: the fraction of unordered pairs
    whose marks (absent, undirected, or either direction) differ."""
    _check_pair(est, truth)
    diff = sum(1 for a, b in combinations(range(est.d), 2)
               if _mark(est, a, b) != _mark(truth, a, b))
    return diff / (est.d * (est.d - 1) / 2)


def adjacency_confusion(est: Pdag, truth: Pdag) -> ConfusionMatrix:
    """Skeleton confusion: an edge of any kind counts as adjacent."""
    _check_pair(est, truth)
    cm = ConfusionMatrix()
    for a, b in combinations(range(est.d), 2):
        e = est.has_any_edge(a, b)
        t = truth.has_any_edge(a, b)
        if e and t:
            cm.tp += 1
        elif not e and t:
            cm.fn += 1
        elif e and not t:
            cm.fp += 1
        else:
            cm.tn += 1
    return cm


def direction_confusion(est: Pdag, truth: Pdag, in_tier_only: bool = False,
                        k: TieredKnowledge | None = None) -> ConfusionMatrix:
    """Orientation confusion over pairs adjacent in both graphs.

    Undirected agreement is a TN; an undirected estimate of a directed truth
    is a FN; a directed estimate of an undirected truth is a FP; matching
    directions are a TP and opposite directions count as FP and FN at once.
    Pairs adjacent in only one graph are skipped and tallied in na. With
    in_tier_only, only pairs whose endpoints share a tier are considered.
    """
    _check_pair(est, truth)
    if in_tier_only and k is None:
        raise GraphError("in-tier confusion requires knowledge")
    cm = ConfusionMatrix()
    for a, b in combinations(range(est.d), 2):
        if in_tier_only and k.tau[a] != k.tau[b]:
            continue
        e = _mark(est, a, b)
        t = _mark(truth, a, b)
        if e == "." or t == ".":
            if e != t:
                cm.na += 1
            continue
        if e == "-" and t == "-":
            cm.tn += 1
        elif e == "-":
            cm.fn += 1
        elif t == "-":
            cm.fp += 1
        elif e == t:
            cm.tp += 1
        else:
            cm.fp += 1
            cm.fn += 1
    return cm


def evaluate(est: Pdag, truth: Pdag,
             k: TieredKnowledge | None = None) -> EvalReport:
    """Full report: sshd, adjacency, all-direction and (with k) in-tier
    direction confusions."""
    return EvalReport(
        sshd=sshd(est, truth),
        adjacency=adjacency_confusion(est, truth),
        all_direction=direction_confusion(est, truth),
        in_tier_direction=(direction_confusion(est, truth, True, k)
                           if k is not None else None),
    )


def report_row(rep: EvalReport) -> dict:
    """Flatten a report into CSV-friendly columns; undefined rates are ''."""
    row = {"sshd": "%.10g" % rep.sshd}
    blocks = [("adj", rep.adjacency), ("dir", rep.all_direction)]
    if rep.in_tier_direction is not None:
        blocks.append(("tier", rep.in_tier_direction))
    for tag, cm in blocks:
        row["%s_tp" % tag] = cm.tp
        row["%s_fp" % tag] = cm.fp
        row["%s_fn" % tag] = cm.fn
        row["%s_tn" % tag] = cm.tn
        row["%s_na" % tag] = cm.na
        row["%s_precision" % tag] = \
            "" if cm.precision is None else "%.10g" % cm.precision
        row["%s_recall" % tag] = \
            "" if cm.recall is None else "%.10g" % cm.recall
    return row
