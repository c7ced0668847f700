"""Registered grading metrics.

Each metric is a pure function over aligned truth/prediction value lists,
registered with its optimization direction so bundles can name their grader
in spec.json. Values arrive as strings from CSV; numeric metrics convert.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from ..errors import BundleError

HIGHER = "higher"
LOWER = "lower"


@dataclass(frozen=True, slots=True)
class MetricSpec:
    name: str
    direction: str
    needs_numeric: bool  # predictions must parse as floats
    binary_truth: bool  # truth must be 0/1
    perfect_score: float
    compute: Callable[[Sequence[float], Sequence], float]


def _rmse(truth: Sequence[float], pred: Sequence) -> float:
    n = len(truth)
    return math.sqrt(sum((t - p) ** 2 for t, p in zip(truth, pred)) / n)


def _mae(truth: Sequence[float], pred: Sequence) -> float:
    return sum(abs(t - p) for t, p in zip(truth, pred)) / len(truth)


def _accuracy(truth: Sequence, pred: Sequence) -> float:
    hits = sum(1 for t, p in zip(truth, pred) if _same_label(t, p))
    return hits / len(truth)


def _same_label(a, b) -> bool:
    try:
        return float(a) == float(b)
    except (TypeError, ValueError):
        return str(a).strip() == str(b).strip()


def _auc(truth: Sequence[float], pred: Sequence) -> float:
    # Mann-Whitney form with average ranks, so ties get half credit.
    n_pos = sum(1 for t in truth if t == 1.0)
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise BundleError("AUC is undefined unless both classes appear in the truth")
    order = sorted(range(len(pred)), key=lambda i: pred[i])
    ranks = [0.0] * len(pred)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pred[order[j + 1]] == pred[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    rank_sum = sum(r for r, t in zip(ranks, truth) if t == 1.0)
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _log_loss(truth: Sequence[float], pred: Sequence) -> float:
    eps = 1e-15
    total = 0.0
    for t, p in zip(truth, pred):
        p = min(max(p, eps), 1.0 - eps)
        total += -(t * math.log(p) + (1.0 - t) * math.log(1.0 - p))
    return total / len(truth)


_REGISTRY: dict[str, MetricSpec] = {}


def register_metric(spec: MetricSpec) -> None:
    _REGISTRY[spec.name] = spec


def get_metric(name: str) -> MetricSpec:
    if name not in _REGISTRY:
        raise BundleError(f"metric {name!r} is not registered")
    return _REGISTRY[name]


def registered_metrics() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


register_metric(MetricSpec("rmse", LOWER, True, False, 0.0, _rmse))
register_metric(MetricSpec("mae", LOWER, True, False, 0.0, _mae))
register_metric(MetricSpec("accuracy", HIGHER, False, False, 1.0, _accuracy))
register_metric(MetricSpec("auc", HIGHER, True, True, 1.0, _auc))
register_metric(MetricSpec("log_loss", LOWER, True, True, 0.0, _log_loss))
