"""Fixed-step Runge-Kutta streamlines of an evaluable vector field."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError

STAGNATION = 1e-12


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    BOTH = "both"


@dataclass(frozen=True)
class StreamlineSpec:
    seed_points: np.ndarray
    step_size: float = 1e-2
    max_steps: int = 1000
    direction: Direction = Direction.FORWARD

    def __post_init__(self):
        if not self.step_size > 0:
            raise ConfigurationError("step_size must be > 0")
        if int(self.max_steps) < 0:
            raise ConfigurationError("max_steps must be >= 0")
        try:
            object.__setattr__(self, "direction", Direction(str(getattr(self.direction, "value", self.direction)).lower()))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        object.__setattr__(self, "seed_points", np.atleast_2d(np.asarray(self.seed_points, float)))


def _inside(p, lo, hi):
    return bool(np.all(p >= lo) and np.all(p <= hi))


def _trace(field, seed, h, steps, lo, hi):
    pts = [seed]
    p = seed
    for _ in range(steps):
        k1 = field(p)
        if np.linalg.norm(k1) < STAGNATION:
            break
        k2 = field(p + 0.5 * h * k1)
        k3 = field(p + 0.5 * h * k2)
        k4 = field(p + h * k3)
        q = p + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not _inside(q, lo, hi):
            break
        pts.append(q)
        p = q
    return pts


def trace_streamlines(field, spec: StreamlineSpec, box):
    """One polyline per seed.

    ``field`` maps a d-vector to a d-vector. Integration stops on leaving
    ``box``, after ``max_steps`` steps per direction, or where the field
    norm drops below 1e-12. Seeds outside the box give an empty polyline
    and a warning. With ``both`` the backward branch is reversed and joined
    to the forward one at the seed.
    """
    lo, hi = (np.asarray(b, float) for b in box)
    lines = []
    for seed in spec.seed_points:
        if not _inside(seed, lo, hi):
            warnings.warn(f"seed {seed.tolist()} lies outside the box; skipped", RuntimeWarning, stacklevel=2)
            lines.append(np.zeros((0, len(lo))))
            continue
        h = spec.step_size
        if spec.direction is Direction.FORWARD:
            pts = _trace(field, seed, h, spec.max_steps, lo, hi)
        elif spec.direction is Direction.BACKWARD:
            pts = _trace(field, seed, -h, spec.max_steps, lo, hi)
        else:
            back = _trace(field, seed, -h, spec.max_steps, lo, hi)
            pts = back[::-1] + _trace(field, seed, h, spec.max_steps, lo, hi)[1:]
        lines.append(np.array(pts))
    return lines


def model_field(potential=None, solenoidal=None):
    """Point evaluator of ``grad u + curl w`` for the given models."""

    def f(p):
        out = np.zeros(len(p))
        if potential is not None:
            out = out + potential.gradient(p)
        if solenoidal is not None:
            out = out + solenoidal.curl(p)
        return out

    return f
