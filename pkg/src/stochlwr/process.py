"""Discretized driving-noise paths and the path functionals used by closed forms.

Paths are stored at grid nodes; between nodes a path is the piecewise-linear
interpolant. Random draws come from a counter-based generator (Philox) keyed by
``(seed, path_index)`` so ensembles are reproducible and order independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ._io import write_csv
from .exceptions import GridError, KindError

NoiseKind = Literal["zero", "brownian", "geometric-brownian"]
NOISE_KINDS = ("zero", "brownian", "geometric-brownian")

_UNIFORM_RTOL = 1e-9


def _generator(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing time nodes on ``[0, T]``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise GridError("time grid needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise GridError("time grid must be finite")
        if pts[0] != 0.0:
            raise GridError("time grid must start at 0")
        if np.any(np.diff(pts) <= 0):
            raise GridError("time grid must be strictly increasing")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, T: float, dt: float) -> "TimeGrid":
        if not (np.isfinite(T) and T > 0):
            raise GridError("T must be finite and positive")
        if not (np.isfinite(dt) and dt > 0):
            raise GridError("dt must be positive")
        n = int(round(T / dt))
        if n < 1 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
            raise GridError(f"T={T} is not an integer multiple of dt={dt}")
        return cls(np.linspace(0.0, T, n + 1))

    @property
    def T(self) -> float:
        return float(self.points[-1])

    @property
    def n_steps(self) -> int:
        return self.points.size - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def is_uniform(self) -> bool:
        h = self.steps
        return bool(np.all(np.abs(h - h[0]) <= _UNIFORM_RTOL * h[0]))

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(np.all(self.points == other.points))

    __hash__ = None

    def index_of(self, t: float) -> int:
        """Index of the node equal to ``t`` (to rounding); raises if off-grid."""
        k = int(np.argmin(np.abs(self.points - t)))
        if abs(self.points[k] - t) > 1e-9 * max(self.T, 1.0):
            raise GridError(f"t={t} is not a grid node")
        return k


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Driving process ``M`` sampled at the nodes of ``grid``.

    For ``kind == "geometric-brownian"`` the generating Brownian path is kept in
    ``underlying`` and ``values[i] == exp(-t_i/2 + underlying[i])``.
    """

    grid: TimeGrid
    kind: NoiseKind
    values: np.ndarray
    underlying: np.ndarray | None = None
    seed: int = 0
    index: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise KindError(f"unknown noise kind {self.kind!r}")
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.points.shape:
            raise GridError("path values do not match the grid")
        if self.kind == "zero" and np.any(vals != 0.0):
            raise KindError("zero path must vanish identically")
        if self.kind == "brownian" and vals[0] != 0.0:
            raise KindError("Brownian path must start at 0")
        if self.kind == "geometric-brownian":
            if self.underlying is None:
                raise KindError("geometric path needs its underlying Brownian values")
            w = np.array(self.underlying, dtype=float)
            if w.shape != vals.shape or w[0] != 0.0:
                raise KindError("underlying path must match the grid and start at 0")
            w.flags.writeable = False
            object.__setattr__(self, "underlying", w)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def t(self) -> np.ndarray:
        return self.grid.points

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def at(self, t):
        """Piecewise-linear value of the path at (possibly off-grid) times."""
        return np.interp(t, self.grid.points, self.values)

    def to_csv(self, path) -> None:
        """Dump ``t,W,S``; ``S`` is left empty unless the path is geometric."""
        if self.kind == "geometric-brownian":
            rows = zip(self.t, self.underlying, self.values)
        else:
            rows = ((t, w, None) for t, w in zip(self.t, self.values))
        write_csv(path, ("t", "W", "S"), rows)


@dataclass(frozen=True, eq=False)
class PathFunctional:
    """Cumulative integral ``I(t_i)`` of ``exp(M_s)`` along a path."""

    kind: Literal["exp-of-path", "exp-of-exp-path"]
    grid: TimeGrid
    cumulative: np.ndarray = field(repr=False)

    def at(self, t):
        return np.interp(t, self.grid.points, self.cumulative)


def sample_brownian(seed: int, grid: TimeGrid, index: int = 0) -> NoisePath:
    """Standard Brownian motion on ``grid`` keyed by ``(seed, index)``."""
    if not isinstance(grid, TimeGrid):
        raise GridError("grid must be a TimeGrid")
    rng = _generator(seed, index)
    dw = rng.standard_normal(grid.n_steps) * np.sqrt(grid.steps)
    values = np.concatenate(([0.0], np.cumsum(dw)))
    return NoisePath(grid, "brownian", values, seed=seed, index=index)


def sample_brownian_ensemble(seed: int, grid: TimeGrid, n_paths: int) -> np.ndarray:
    """Values of paths ``0..n_paths-1``, shape ``(n_paths, len(grid))``.

    Row ``k`` is bitwise identical to ``sample_brownian(seed, grid, k).values``.
    """
    out = np.empty((n_paths, len(grid)))
    sd = np.sqrt(grid.steps)
    out[:, 0] = 0.0
    for k in range(n_paths):
        dw = _generator(seed, k).standard_normal(grid.n_steps) * sd
        np.cumsum(dw, out=out[k, 1:])
    return out


def brownian_from_values(grid: TimeGrid, values, seed: int = 0) -> NoisePath:
    """Wrap prescribed node values (e.g. ``W == 0``) as a Brownian-kind path."""
    return NoisePath(grid, "brownian", np.asarray(values, dtype=float), seed=seed)


def zero_path(grid: TimeGrid) -> NoisePath:
    return NoisePath(grid, "zero", np.zeros(len(grid)))


def to_geometric(path: NoisePath) -> NoisePath:
    """``S_t = exp(-t/2 + W_t)``, geometric Brownian motion without drift."""
    if path.kind != "brownian":
        raise KindError(f"to_geometric needs a brownian path, got {path.kind!r}")
    s = np.exp(-0.5 * path.t + path.values)
    return NoisePath(path.grid, "geometric-brownian", s, underlying=path.values,
                     seed=path.seed, index=path.index)


def bridge_refine(path: NoisePath, factor: int) -> NoisePath:
    """Refine a Brownian path ``factor`` times by Brownian-bridge sampling.

    Coarse node values are copied unchanged. Interior points are filled left to
    right, each conditioned on its left neighbour and the coarse right endpoint.
    """
    if path.kind != "brownian":
        raise KindError("bridge_refine needs a brownian path")
    if int(factor) != factor or factor < 2:
        raise GridError("refinement factor must be an integer >= 2")
    factor = int(factor)
    grid = path.grid
    if not grid.is_uniform:
        raise GridError("bridge_refine needs a uniform grid")

    n = grid.n_steps
    fine_t = np.linspace(0.0, grid.T, n * factor + 1)
    fine_t[::factor] = grid.points
    fine_w = np.empty(n * factor + 1)
    fine_w[::factor] = path.values

    rng = _generator(path.seed, path.index, factor, n)
    z = rng.standard_normal((factor - 1, n))
    left_t, right_t = grid.points[:-1], grid.points[1:]
    prev_w, prev_t = path.values[:-1].copy(), left_t.copy()
    right_w = path.values[1:]
    for j in range(1, factor):
        s = fine_t[j::factor][:n]
        span = right_t - prev_t
        mean = prev_w + (s - prev_t) / span * (right_w - prev_w)
        var = (s - prev_t) * (right_t - s) / span
        w = mean + np.sqrt(var) * z[j - 1]
        fine_w[j::factor][:n] = w
        prev_w, prev_t = w, s
    return NoisePath(TimeGrid(fine_t), "brownian", fine_w, seed=path.seed, index=path.index)


def path_integral_exp(path: NoisePath, nested: bool = False) -> PathFunctional:
    """Cumulative trapezoid of ``exp(M_s)`` along the path.

    ``nested=False`` integrates ``exp(values)``. ``nested=True`` integrates
    ``exp(S_s)`` with ``S`` the geometric path; a Brownian input is mapped
    through ``exp(-s/2 + W_s)`` first.
    """
    if nested:
        if path.kind == "geometric-brownian":
            s = path.values
        elif path.kind == "brownian":
            s = np.exp(-0.5 * path.t + path.values)
        else:
            raise KindError("nested functional needs a brownian or geometric path")
        integrand = np.exp(s)
        kind = "exp-of-exp-path"
    else:
        integrand = np.exp(path.values)
        kind = "exp-of-path"
    areas = 0.5 * (integrand[1:] + integrand[:-1]) * path.grid.steps
    cumulative = np.concatenate(([0.0], np.cumsum(areas)))
    cumulative.flags.writeable = False
    return PathFunctional(kind, path.grid, cumulative)
