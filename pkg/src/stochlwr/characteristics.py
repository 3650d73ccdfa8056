"""Stochastic characteristics: integrate, detect crossing, invert, assemble u.

A fan is a family of characteristics ``(xi, eta, chi)`` (position, value,
slope) launched from sorted initial points under one shared noise path. The
solution is recovered as ``u(y, t) = eta_t(xi_t^{-1}(y))`` up to the stopping
time ``sigma(y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._io import write_csv
from .exceptions import ArgumentError, GridError, InversionError, KindError
from .model import Scenario, _increments
from .process import NoisePath

EPS_DET = 1e-8
EXPLOSION_BOUND = 1e3


@dataclass(frozen=True, eq=False)
class CharacteristicFan:
    """Arrays are indexed ``[initial point, time]``.

    ``alive`` turns false at the first node where any component is non-finite
    or ``|xi| > EXPLOSION_BOUND`` and stays false. Values after that node are
    kept as computed and should not be trusted.
    """

    scenario: Scenario
    path: NoisePath
    x0: np.ndarray
    xi: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)
    chi: np.ndarray = field(repr=False)
    alive: np.ndarray = field(repr=False)

    @property
    def grid(self):
        return self.path.grid

    @property
    def t(self) -> np.ndarray:
        return self.path.grid.points

    def to_csv(self, path) -> None:
        t = self.t

        def rows():
            for k in range(t.size):
                for i in range(self.x0.size):
                    yield (t[k], self.x0[i], self.xi[i, k], self.eta[i, k], self.chi[i, k], bool(self.alive[i, k]))

        write_csv(path, ("t", "x0", "xi", "eta", "chi", "alive"), rows())


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    chi: np.ndarray
    alive: np.ndarray


@dataclass(frozen=True)
class StoppingTimeEstimate:
    tau_inv: float
    explosion_T: float
    tau: float
    y: np.ndarray | None = None
    sigma: np.ndarray | None = None

    def to_csv(self, path) -> None:
        write_csv(path, ("x", "sigma"), zip(self.y, self.sigma))


@dataclass(frozen=True, eq=False)
class SolutionSurface:
    """``u[j, k]`` approximates u(x_grid[j], t_grid[k]); NaN where not valid."""

    x_grid: np.ndarray
    t_grid: np.ndarray
    u: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)

    def to_csv(self, path) -> None:
        def rows():
            for k in range(self.t_grid.size):
                for j in range(self.x_grid.size):
                    yield (self.x_grid[j], self.t_grid[k], self.u[j, k], bool(self.valid[j, k]))

        write_csv(path, ("x", "t", "u", "valid"), rows())


def _check_compatible(scenario: Scenario, path: NoisePath) -> None:
    if abs(path.grid.T - scenario.T) > 1e-9 * max(scenario.T, 1.0):
        raise GridError(f"path horizon {path.grid.T} differs from scenario horizon {scenario.T}")
    if path.kind == "zero" or scenario.perturbation.id == "none":
        return
    if path.kind != scenario.noise_kind:
        raise KindError(f"scenario expects {scenario.noise_kind} noise, path is {path.kind}")


def integrate_fan(scenario: Scenario, path: NoisePath, x0_grid) -> CharacteristicFan:
    """Integrate one characteristic per initial point with the Stratonovich Heun scheme.

    Each step evaluates the increments at the left state (predictor) and at
    the predicted right state, then averages them against the same
    ``(dt, dM)``.
    """
    _check_compatible(scenario, path)
    x0 = np.array(x0_grid, dtype=float).ravel()
    if x0.size == 0:
        raise ArgumentError("empty set of initial points")
    if np.any(np.diff(x0) <= 0):
        raise GridError("initial points must be strictly increasing")
    if x0[0] < 0.0 or x0[-1] > 1.0:
        raise GridError("initial points must lie in [0, 1]")

    spec = scenario.perturbation
    t = path.t
    n_t = t.size
    dts = path.grid.steps
    dms = path.increments

    xi = np.empty((x0.size, n_t))
    eta = np.empty_like(xi)
    chi = np.empty_like(xi)
    alive = np.empty(xi.shape, dtype=bool)

    s_xi = x0.copy()
    s_eta = np.asarray(scenario.ic.eval(x0), dtype=float) * np.ones_like(x0)
    s_chi = np.asarray(scenario.ic.deriv(x0), dtype=float) * np.ones_like(x0)
    s_alive = np.isfinite(s_xi) & np.isfinite(s_eta) & np.isfinite(s_chi)
    xi[:, 0], eta[:, 0], chi[:, 0], alive[:, 0] = s_xi, s_eta, s_chi, s_alive

    with np.errstate(all="ignore"):
        for k in range(n_t - 1):
            dt, dm = dts[k], dms[k]
            a_xi, a_eta, a_chi = _increments(spec, s_xi, s_eta, s_chi, t[k], dt, dm)
            b_xi, b_eta, b_chi = _increments(spec, s_xi + a_xi, s_eta + a_eta, s_chi + a_chi, t[k + 1], dt, dm)
            s_xi = s_xi + 0.5 * (a_xi + b_xi)
            s_eta = s_eta + 0.5 * (a_eta + b_eta)
            s_chi = s_chi + 0.5 * (a_chi + b_chi)
            s_alive = (s_alive & np.isfinite(s_xi) & np.isfinite(s_eta) & np.isfinite(s_chi)
                       & (np.abs(s_xi) <= EXPLOSION_BOUND))
            xi[:, k + 1], eta[:, k + 1], chi[:, k + 1], alive[:, k + 1] = s_xi, s_eta, s_chi, s_alive

    for arr in (x0, xi, eta, chi, alive):
        arr.flags.writeable = False
    return CharacteristicFan(scenario, path, x0, xi, eta, chi, alive)


def integrate_sce(scenario: Scenario, path: NoisePath, x0: float) -> Trajectory:
    """Single characteristic started at ``x0``."""
    if not 0.0 <= x0 <= 1.0:
        raise GridError("x0 must lie in [0, 1]")
    fan = integrate_fan(scenario, path, [x0])
    return Trajectory(fan.t, fan.xi[0], fan.eta[0], fan.chi[0], fan.alive[0])


def jacobian(fan: CharacteristicFan) -> np.ndarray:
    """Finite-difference estimate of d(xi)/d(x0), centered inside, one-sided at the ends."""
    if fan.x0.size < 2:
        raise ArgumentError("jacobian needs at least two initial points")
    with np.errstate(all="ignore"):
        return np.gradient(fan.xi, fan.x0, axis=0)


def _crossing_index(fan: CharacteristicFan, eps_det: float = EPS_DET) -> int:
    if fan.x0.size < 2:
        return fan.t.size
    with np.errstate(all="ignore"):
        ratio = np.diff(fan.xi, axis=0) / np.diff(fan.x0)[:, None]
        jac = jacobian(fan)
    bad = np.any((ratio <= eps_det) & np.isfinite(ratio), axis=0)
    bad |= np.any((jac <= eps_det) & np.isfinite(jac), axis=0)
    bad[0] = False
    hits = np.flatnonzero(bad)
    return int(hits[0]) if hits.size else fan.t.size


def _explosion_index(fan: CharacteristicFan) -> int:
    dead = ~np.all(fan.alive, axis=0)
    hits = np.flatnonzero(dead)
    return int(hits[0]) if hits.size else fan.t.size


def _time_at(fan: CharacteristicFan, k: int) -> float:
    return float(fan.t[k]) if k < fan.t.size else float("inf")


def detect_tau_inv(fan: CharacteristicFan, eps_det: float = EPS_DET) -> float:
    """First node where neighbouring characteristics meet or cross, else +inf.

    Crossing is declared when a forward spacing ratio or the Jacobian estimate
    falls to ``eps_det`` (relative to the initial spacing).
    """
    return _time_at(fan, _crossing_index(fan, eps_det))


def _sigma_indices(fan: CharacteristicFan, y: np.ndarray) -> np.ndarray:
    k_tau = min(_crossing_index(fan), _explosion_index(fan))
    if k_tau == 0:
        return np.zeros(y.shape, dtype=int)
    lo = fan.xi[0, :k_tau]
    hi = fan.xi[-1, :k_tau]
    covered = (lo[None, :] <= y[:, None]) & (y[:, None] <= hi[None, :])
    covered[:, 0] = True
    fail = ~covered
    return np.where(fail.any(axis=1), fail.argmax(axis=1), k_tau)


def estimate_sigma(fan: CharacteristicFan, y):
    """Grid estimate of the stopping time sigma(y); +inf if never reached on [0, T].

    sigma(y) is the first node where y leaves the image of the fan or the fan
    stops being invertible (crossing or explosion). Resolution is one step.
    """
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    idx = _sigma_indices(fan, ys)
    t_ext = np.append(fan.t, np.inf)
    out = t_ext[idx]
    return float(out[0]) if np.ndim(y) == 0 else out


def stopping_times(fan: CharacteristicFan, y=None) -> StoppingTimeEstimate:
    tau_inv = detect_tau_inv(fan)
    explosion = _time_at(fan, _explosion_index(fan))
    sigma = None
    if y is not None:
        y = np.asarray(y, dtype=float)
        sigma = estimate_sigma(fan, y)
    return StoppingTimeEstimate(tau_inv, explosion, min(tau_inv, explosion), y, sigma)


def invert_xi(fan: CharacteristicFan, y, t: float):
    """Initial point(s) whose characteristic reaches ``y`` at node time ``t``.

    Returns NaN for positions outside the image of the fan at ``t``.
    """
    k = fan.grid.index_of(t)
    if k > 0 and k >= _crossing_index(fan):
        raise InversionError(f"flow is not invertible at t={t} (characteristics crossed)")
    row = fan.xi[:, k]
    ys = np.asarray(y, dtype=float)
    with np.errstate(invalid="ignore"):
        x0 = np.interp(ys, row, fan.x0)
        x0 = np.where((ys >= row[0]) & (ys <= row[-1]), x0, np.nan)
    return float(x0) if x0.ndim == 0 else x0


def build_surface(fan: CharacteristicFan, x_grid, ic=None) -> SolutionSurface:
    """Assemble u on ``x_grid`` at every node of the fan's time grid."""
    ic = ic if ic is not None else fan.scenario.ic
    x = np.asarray(x_grid, dtype=float)
    t = fan.t
    sig = _sigma_indices(fan, x)
    k_idx = np.arange(t.size)
    valid = k_idx[None, :] < sig[:, None]
    valid[:, 0] = True
    u = np.full((x.size, t.size), np.nan)
    u[:, 0] = ic.eval(x)
    for k in range(1, t.size):
        col = valid[:, k]
        if not col.any():
            continue
        x0q = np.interp(x[col], fan.xi[:, k], fan.x0)
        u[col, k] = np.interp(x0q, fan.x0, fan.eta[:, k])
    return SolutionSurface(x, t.copy(), u, valid)
