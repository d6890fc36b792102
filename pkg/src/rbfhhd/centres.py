"""Choosing RBF centres among the sample points.

``kernel_importance`` greedily picks the candidate maximising
``weight * distance to the nearest chosen centre``, where the weight is the
normalised field magnitude (or potential) floored at ``IMPORTANCE_FLOOR``.
Centres end up dense where the field is strong without clumping, and flat
regions still get a sparse cover.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .analysis import compute_metrics
from .errors import ConfigurationError, SampleError
from .fields import regular_grid
from .fit import FitConfig, fit_mixed, residual_report, with_centres
from .model import SampleSet

IMPORTANCE_FLOOR = 0.05
ADAPTIVE_MIN = 16
KMEANS_ITERATIONS = 50


class SelectionStrategy(str, Enum):
    KERNEL_IMPORTANCE = "kernel_importance"
    UNIFORM = "uniform"
    RANDOM = "random"
    ADAPTIVE_RESIDUAL = "adaptive_residual"
    KMEANS = "kmeans"


class ImportanceSource(str, Enum):
    FIELD_MAGNITUDE = "field_magnitude"
    POTENTIAL_VALUE = "potential_value"


@dataclass(frozen=True)
class CentreSelection:
    """How many centres to pick and how.

    For ``adaptive_residual`` the count starts at ``max(16, target_count // 8)``
    and doubles until the relative residual of the fit drops below
    ``residual_threshold`` or ``max_count`` is reached.
    """

    strategy: SelectionStrategy = SelectionStrategy.KERNEL_IMPORTANCE
    target_count: int = 100
    importance_source: ImportanceSource = ImportanceSource.FIELD_MAGNITUDE
    residual_threshold: float = 0.05
    max_count: int = 5000
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "strategy", SelectionStrategy(_value(self.strategy)))
            object.__setattr__(self, "importance_source", ImportanceSource(_value(self.importance_source)))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        if int(self.target_count) < 1:
            raise ConfigurationError("target_count must be positive")
        if self.target_count > self.max_count:
            raise ConfigurationError(f"target_count {self.target_count} exceeds max_count {self.max_count}")
        if not 0 < self.residual_threshold < 1:
            raise ConfigurationError("residual_threshold must lie in (0, 1)")


def _value(x):
    return str(getattr(x, "value", x)).lower().replace("-", "_")


def importance_weights(samples: SampleSet, source=ImportanceSource.FIELD_MAGNITUDE, floor: float = IMPORTANCE_FLOOR):
    """Per-point weights in ``[floor, 1]``; points without the needed
    constraint get the floor."""
    source = ImportanceSource(_value(source))
    raw = np.zeros(samples.n_points)
    if source is ImportanceSource.FIELD_MAGNITUDE:
        if len(samples.vector_index) == 0:
            raise SampleError("field-magnitude importance needs vector samples")
        raw[samples.vector_index] = np.linalg.norm(samples.vector_values, axis=1)
    else:
        if len(samples.scalar_index) == 0:
            raise SampleError("potential-value importance needs scalar samples")
        raw[samples.scalar_index] = np.abs(samples.scalar_values)
    top = raw.max()
    scaled = raw / top if top > 0 else np.zeros_like(raw)
    return floor + (1.0 - floor) * scaled


def importance_order(points, weights, count: int):
    """First ``count`` indices of the greedy weighted farthest-point order."""
    points = np.asarray(points, float)
    n = len(points)
    count = min(count, n)
    order = np.empty(count, dtype=int)
    order[0] = int(np.argmax(weights))
    dist = np.linalg.norm(points - points[order[0]], axis=1)
    for i in range(1, count):
        score = weights * dist
        nxt = int(np.argmax(score))
        order[i] = nxt
        dist = np.minimum(dist, np.linalg.norm(points - points[nxt], axis=1))
    return order


def _uniform(points, count):
    lo, hi = points.min(axis=0), points.max(axis=0)
    d = points.shape[1]
    m = int(np.ceil(count ** (1.0 / d) - 1e-9))
    nodes = regular_grid(lo, hi, m)
    if len(nodes) > count:
        nodes = nodes[np.round(np.linspace(0, len(nodes) - 1, count)).astype(int)]
    tree = cKDTree(points)
    taken = np.zeros(len(points), dtype=bool)
    chosen = []
    for node in nodes:
        k = min(len(points), 8)
        while True:
            _, idx = tree.query(node, k=k)
            free = [j for j in np.atleast_1d(idx) if not taken[j]]
            if free or k == len(points):
                break
            k = min(len(points), 2 * k)
        taken[free[0]] = True
        chosen.append(free[0])
    return np.array(chosen, dtype=int)


def _kmeans(points, count, seed):
    rng = np.random.default_rng(seed)
    centroids = points[rng.choice(len(points), count, replace=False)]
    for _ in range(KMEANS_ITERATIONS):
        _, label = cKDTree(centroids).query(points)
        new = centroids.copy()
        for j in range(count):
            members = points[label == j]
            if len(members):
                new[j] = members.mean(axis=0)
        if np.allclose(new, centroids):
            break
        centroids = new
    # representative: nearest unused sample point to each centroid
    tree = cKDTree(points)
    taken = np.zeros(len(points), dtype=bool)
    chosen = []
    for c in centroids:
        _, idx = tree.query(c, k=min(len(points), count))
        j = next(j for j in np.atleast_1d(idx) if not taken[j])
        taken[j] = True
        chosen.append(j)
    return np.array(chosen, dtype=int)


def _adaptive(samples, sel, fit_config):
    if fit_config is None:
        raise ConfigurationError("adaptive_residual selection needs a fit configuration")
    points = samples.points[samples.constrained_index]
    source = sel.importance_source
    if source is ImportanceSource.FIELD_MAGNITUDE and len(samples.vector_index) == 0:
        source = ImportanceSource.POTENTIAL_VALUE
    w = importance_weights(samples, source)[samples.constrained_index]
    limit = min(sel.max_count, len(points))
    order = importance_order(points, w, limit)
    f, v = samples.scalar_values, samples.vector_values
    scale = np.sqrt(np.sum(f * f) + fit_config.delta * np.sum(v * v))
    count = min(max(ADAPTIVE_MIN, sel.target_count // 8), limit)
    history = []
    while True:
        centres = points[order[:count]]
        model = fit_mixed(samples, with_centres(fit_config, centres))
        rep = residual_report(model, samples, model.metadata.get("delta", fit_config.delta))
        rel = np.sqrt(rep.energy) / scale if scale > 0 else 0.0
        history.append((count, float(rel)))
        if rel < sel.residual_threshold or count >= limit:
            return centres, history
        count = min(2 * count, limit)


def select_centres(samples: SampleSet, sel: CentreSelection, fit_config: FitConfig = None, return_history=False):
    """Centres for ``samples`` according to ``sel``.

    Point-subset strategies return rows of ``samples.points`` among the
    constrained points. ``adaptive_residual`` needs ``fit_config`` and
    with ``return_history`` also returns ``(count, relative residual)`` pairs.
    """
    idx = samples.constrained_index
    points = samples.points[idx]
    k = int(sel.target_count)
    if sel.strategy is SelectionStrategy.ADAPTIVE_RESIDUAL:
        centres, history = _adaptive(samples, sel, fit_config)
        return (centres, history) if return_history else centres
    if k > len(points):
        raise SampleError(f"target_count {k} exceeds the {len(points)} candidate points")
    if sel.strategy is SelectionStrategy.KERNEL_IMPORTANCE:
        w = importance_weights(samples, sel.importance_source)[idx]
        chosen = importance_order(points, w, k)
    elif sel.strategy is SelectionStrategy.UNIFORM:
        chosen = _uniform(points, k)
    elif sel.strategy is SelectionStrategy.RANDOM:
        chosen = np.sort(np.random.default_rng(sel.seed).choice(len(points), k, replace=False))
    else:
        chosen = _kmeans(points, k, sel.seed)
    centres = points[chosen]
    return (centres, []) if return_history else centres


@dataclass
class SelectionComparison:
    metrics_a: object
    metrics_b: object

    def table(self) -> str:
        header = f"{'set':<4} {'NC':>8} {'NRMSE':>8} {'P_0.05':>8} {'P_0.10':>8}"
        lines = [header]
        for name, m in (("a", self.metrics_a), ("b", self.metrics_b)):
            p = m.percentiles
            lines.append(
                f"{name:<4} {m.nc:8.4f} {m.nrmse:8.4f} {p.get(0.05, float('nan')):8.4f} {p.get(0.1, float('nan')):8.4f}"
            )
        return "\n".join(lines)


def fit_quality(samples: SampleSet, centres, config: FitConfig):
    """Metrics of the fit with ``centres`` against the samples: the gradient
    against the vector values when present, else the potential."""
    model = fit_mixed(samples, with_centres(config, centres))
    if len(samples.vector_index):
        return compute_metrics(samples.vector_values, model.gradient(samples.vector_points))
    return compute_metrics(samples.scalar_values, model.potential(samples.scalar_points))


def selection_quality(samples: SampleSet, centres_a, centres_b, config: FitConfig) -> SelectionComparison:
    """Fit once per centre set and compare the resulting metrics."""
    if len(centres_a) != len(centres_b):
        raise ValueError("centre sets must have equal size")
    return SelectionComparison(fit_quality(samples, centres_a, config), fit_quality(samples, centres_b, config))
