"""Closed-form test fields with known potentials.

Every generator takes an (n, d) array of points. ``critical_points`` lists
``(location, kind)`` pairs inside ``box`` for the 2D scalar potentials where
they are known in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .model import SampleSet


@dataclass(frozen=True)
class AnalyticField:
    name: str
    dimension: int
    field: Callable
    box: tuple
    potential_u: Optional[Callable] = None
    gradient_u: Optional[Callable] = None
    potential_w: Optional[Callable] = None
    curl_w: Optional[Callable] = None
    critical_points: tuple = field(default=())

    def __call__(self, points):
        return self.field(np.atleast_2d(points))

    def grid(self, n, pad: float = 0.0):
        """Regular grid with ``n`` nodes per axis over the (padded) box."""
        lo, hi = (np.asarray(b, float) for b in self.box)
        ext = (hi - lo) * pad
        return regular_grid(lo - ext, hi + ext, n)

    def vector_samples(self, points) -> SampleSet:
        points = np.atleast_2d(points)
        return SampleSet.from_vectors(points, self.field(points))

    def scalar_samples(self, points) -> SampleSet:
        points = np.atleast_2d(points)
        return SampleSet.from_scalars(points, self.potential_u(points))


def regular_grid(lo, hi, n):
    lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
    n = np.broadcast_to(np.atleast_1d(n), lo.shape)
    axes = [np.linspace(a, b, int(m)) for a, b, m in zip(lo, hi, n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _xy(p):
    return p[:, 0], p[:, 1]


def _xyz(p):
    return p[:, 0], p[:, 1], p[:, 2]


def _conservative(name, u, grad, box, critical=()):
    return AnalyticField(name, len(box[0]), grad, box, potential_u=u, gradient_u=grad,
                         critical_points=tuple(critical))


def _u1():
    def u(p):
        x, y = _xy(p)
        return x * x - y * y

    def g(p):
        x, y = _xy(p)
        return np.stack([2 * x, -2 * y], axis=1)

    return _conservative("u1", u, g, ((-1.0, -1.0), (1.0, 1.0)), [((0.0, 0.0), "saddle")])


def _u2():
    def u(p):
        x, y = _xy(p)
        return x * x - y**3

    def g(p):
        x, y = _xy(p)
        return np.stack([2 * x, -3 * y * y], axis=1)

    return _conservative("u2", u, g, ((-1.0, -1.0), (1.0, 1.0)))


def _u3():
    def u(p):
        x, y = _xy(p)
        return x * x + np.exp(-x * y) + y**3

    def g(p):
        x, y = _xy(p)
        e = np.exp(-x * y)
        return np.stack([2 * x - y * e, -x * e + 3 * y * y], axis=1)

    return _conservative("u3", u, g, ((-1.0, -1.0), (1.0, 1.0)))


def _paraboloid():
    def u(p):
        x, y = _xy(p)
        return x * x + y * y

    def g(p):
        return 2.0 * p[:, :2]

    return _conservative("paraboloid", u, g, ((-1.0, -1.0), (1.0, 1.0)), [((0.0, 0.0), "minimum")])


def _sincos_critical(box):
    (x0, y0), (x1, y1) = box
    pts = []
    ks = range(-8, 9)
    half = np.pi / 2
    for k in ks:
        for m in ks:
            # cos x = 0 and sin y = 0: Hessian -sin(x)cos(y) I
            x, y = half + k * np.pi, m * np.pi
            if x0 <= x <= x1 and y0 <= y <= y1:
                kind = "maximum" if np.sin(x) * np.cos(y) > 0 else "minimum"
                pts.append(((x, y), kind))
            # sin x = 0 and cos y = 0: off-diagonal Hessian
            x, y = k * np.pi, half + m * np.pi
            if x0 <= x <= x1 and y0 <= y <= y1:
                pts.append(((x, y), "saddle"))
    return sorted(pts)


def _sincos():
    box = ((-2 * np.pi, -2 * np.pi), (2 * np.pi, 2 * np.pi))

    def u(p):
        x, y = _xy(p)
        return np.sin(x) * np.cos(y)

    def g(p):
        x, y = _xy(p)
        return np.stack([np.cos(x) * np.cos(y), -np.sin(x) * np.sin(y)], axis=1)

    return _conservative("sincos", u, g, box, _sincos_critical(box))


def _bump():
    def u(p):
        x, y = _xy(p)
        return x * np.exp(-(x * x + y * y))

    def g(p):
        x, y = _xy(p)
        e = np.exp(-(x * x + y * y))
        return np.stack([(1 - 2 * x * x) * e, -2 * x * y * e], axis=1)

    s = 1 / np.sqrt(2)
    return _conservative("bump", u, g, ((-2.0, -2.0), (2.0, 2.0)),
                         [((-s, 0.0), "minimum"), ((s, 0.0), "maximum")])


_PEAKS = ((0.35, -0.25, 10.0, 1.0), (-0.4, 0.35, 14.0, -0.8), (0.1, 0.6, 30.0, 0.5))


def _peaks():
    """Sum of three Gaussian bumps of different widths: localised features on
    a nearly flat background."""

    def u(p):
        x, y = _xy(p)
        return sum(a * np.exp(-s * ((x - cx) ** 2 + (y - cy) ** 2)) for cx, cy, s, a in _PEAKS)

    def g(p):
        x, y = _xy(p)
        gx = np.zeros_like(x)
        gy = np.zeros_like(y)
        for cx, cy, s, a in _PEAKS:
            e = a * np.exp(-s * ((x - cx) ** 2 + (y - cy) ** 2))
            gx += -2 * s * (x - cx) * e
            gy += -2 * s * (y - cy) * e
        return np.stack([gx, gy], axis=1)

    return _conservative("peaks", u, g, ((-1.0, -1.0), (1.0, 1.0)))


def _rotation():
    def w(p):
        x, y = _xy(p)
        return (-(x * x + y * y) / 2)[:, None]

    def v(p):
        x, y = _xy(p)
        return np.stack([-y, x], axis=1)

    return AnalyticField("rotation", 2, v, ((-1.0, -1.0), (1.0, 1.0)), potential_w=w, curl_w=v)


def _wind():
    """Swirling jet concentrated near the centre of the box, weak elsewhere."""

    def v(p):
        x, y = _xy(p)
        e = np.exp(-3.0 * (x * x + y * y))
        return np.stack([(1.0 - y) * e, (0.6 * x) * e], axis=1)

    return AnalyticField("wind", 2, v, ((-1.0, -1.0), (1.0, 1.0)))


def _fig8_u(p):
    x, y, z = _xyz(p)
    return x * x - 2 * x * z + y * z


def _fig8_grad(p):
    x, y, z = _xyz(p)
    return np.stack([2 * x - 2 * z, z, -2 * x + y], axis=1)


def _fig8_w(p):
    x, y, z = _xyz(p)
    return np.stack([x * x * y * z, x * y * np.exp(-z), x * x + y * y - z * z], axis=1)


def _fig8_curl(p):
    x, y, z = _xyz(p)
    ez = np.exp(-z)
    return np.stack([2 * y + x * y * ez, x * x * y - 2 * x, y * ez - x * x * z], axis=1)


_CUBE = ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))


def _fig8():
    return AnalyticField(
        "fig8", 3, lambda p: _fig8_grad(p) + _fig8_curl(p), _CUBE,
        potential_u=_fig8_u, gradient_u=_fig8_grad, potential_w=_fig8_w, curl_w=_fig8_curl,
    )


def _fig8_conservative():
    return _conservative("fig8_conservative", _fig8_u, _fig8_grad, _CUBE)


def _fig8_solenoidal():
    return AnalyticField("fig8_solenoidal", 3, _fig8_curl, _CUBE, potential_w=_fig8_w, curl_w=_fig8_curl)


def _flow3d():
    """Smooth non-polynomial 3D conservative field."""

    def u(p):
        x, y, z = _xyz(p)
        return np.sin(x) * np.cos(y) + 0.5 * z * z + 0.5 * x * y * z

    def g(p):
        x, y, z = _xyz(p)
        return np.stack(
            [np.cos(x) * np.cos(y) + 0.5 * y * z, -np.sin(x) * np.sin(y) + 0.5 * x * z, z + 0.5 * x * y],
            axis=1,
        )

    return _conservative("flow3d", u, g, _CUBE)


REGISTRY = {
    "u1": _u1,
    "u2": _u2,
    "u3": _u3,
    "paraboloid": _paraboloid,
    "sincos": _sincos,
    "bump": _bump,
    "peaks": _peaks,
    "rotation": _rotation,
    "wind": _wind,
    "fig8": _fig8,
    "fig8_conservative": _fig8_conservative,
    "fig8_solenoidal": _fig8_solenoidal,
    "flow3d": _flow3d,
}


def make_analytic_field(name: str) -> AnalyticField:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown analytic field {name!r}; choose from {sorted(REGISTRY)}") from None
