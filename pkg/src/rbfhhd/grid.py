"""Regular-grid evaluation of fitted models and memory-footprint accounting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import linf_error
from .errors import ConfigurationError
from .model import ScalarPotentialModel, VectorPotentialModel


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box sampled with ``resolution[a]`` nodes along axis ``a``.

    Nodes are ordered with x varying fastest, as legacy VTK expects.
    """

    lo: tuple
    hi: tuple
    resolution: tuple

    def __post_init__(self):
        lo = tuple(float(x) for x in np.atleast_1d(self.lo))
        hi = tuple(float(x) for x in np.atleast_1d(self.hi))
        res = np.broadcast_to(np.atleast_1d(self.resolution), (len(lo),))
        res = tuple(int(r) for r in res)
        if len(lo) != len(hi) or len(lo) not in (2, 3):
            raise ConfigurationError("grid box must be 2D or 3D")
        if any(r < 2 for r in res):
            raise ConfigurationError(f"grid resolution must be >= 2 per axis, got {res}")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ConfigurationError("grid box must have positive extent")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "resolution", res)

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.resolution))

    def axes(self):
        return [np.linspace(a, b, n) for a, b, n in zip(self.lo, self.hi, self.resolution)]

    def nodes(self):
        mesh = np.meshgrid(*self.axes()[::-1], indexing="ij")
        return np.stack([m.ravel() for m in mesh[::-1]], axis=1)


def evaluate_on_grid(spec: GridSpec, potential=None, solenoidal=None) -> dict:
    """Named arrays at the grid nodes: ``u`` and ``grad_u`` for a scalar
    model, ``curl_w`` for a vector model, and ``field`` for their sum."""
    nodes = spec.nodes()
    out = {}
    field = np.zeros((len(nodes), spec.dimension))
    if potential is not None:
        out["u"] = potential.potential(nodes)
        out["grad_u"] = potential.gradient(nodes)
        field = field + out["grad_u"]
    if solenoidal is not None:
        out["curl_w"] = solenoidal.curl(nodes)
        field = field + out["curl_w"]
    out["field"] = field
    return out


@dataclass
class FootprintReport:
    """Storage of the model against the grid it replaces.

    ``model_numbers`` counts ``k (d + 1)`` floats (centres and coefficients,
    ``k (d + 3)`` for a 3D vector potential); ``grid_numbers`` counts
    ``n_nodes * d`` floats of a sampled vector field.
    """

    n_centres: int
    n_nodes: int
    model_numbers: int
    grid_numbers: int
    linf: float = float("nan")

    @property
    def p(self) -> float:
        return self.n_centres / self.n_nodes

    @property
    def ratio(self) -> float:
        return self.model_numbers / self.grid_numbers

    def lines(self):
        return [
            f"centres k = {self.n_centres}",
            f"grid nodes n = {self.n_nodes}",
            f"p = k/n = {self.p:.6g}",
            f"model numbers = {self.model_numbers}",
            f"grid numbers = {self.grid_numbers}",
            f"compression ratio = {self.ratio:.6g}",
            f"linf = {self.linf:.6g}",
        ]


def footprint(models, spec: GridSpec, reference=None, candidate=None) -> FootprintReport:
    """Footprint of ``models`` against a vector field sampled on ``spec``;
    ``linf`` is filled when reference and candidate node values are given."""
    d = spec.dimension
    numbers = 0
    k = 0
    for m in models:
        if m is None:
            continue
        comps = m.coefficients.shape[1] if isinstance(m, VectorPotentialModel) else 1
        numbers += m.n_centres * (d + comps)
        k += m.n_centres
    report = FootprintReport(k, spec.n_nodes, numbers, spec.n_nodes * d)
    if reference is not None and candidate is not None:
        report.linf = linf_error(reference, candidate)
    return report


def is_scalar_model(model) -> bool:
    return isinstance(model, ScalarPotentialModel)
