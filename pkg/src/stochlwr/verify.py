"""Residual checks of the closed forms and cross-checks against the characteristics solver.

The residual of an entry is

    u_t + (1 - 2u) u_x - h(x, u, u_x, t) * dM/dt

with ``dM/dt`` a free probe value, the driver derivative of a piecewise-linear
path. ``h`` is the noise coefficient of the entry's perturbation. It vanishes
identically for an exact solution, so it is evaluated with analytic partials.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ._io import write_csv
from .characteristics import build_surface, integrate_fan, jacobian
from .closedform import (
    PROBE_DEN_MIN,
    PROBE_RAD_MIN,
    ClosedFormSolution,
    _entry,
    default_functional,
    evaluate_grid,
)
from .exceptions import ArgumentError, DomainError, GridError
from .model import named_scenario, perturbation
from .process import (
    NoisePath,
    TimeGrid,
    bridge_refine,
    sample_brownian,
    to_geometric,
    zero_path,
)

RESIDUAL_TOL = 1e-9
NODE_EXACT_TOL = 1e-4
NON_NODE_EXACT_TOL = 1e-2
MIN_RATIO = 1.5
M_DOT_RANGE = (-10.0, 10.0)


@dataclass(frozen=True)
class ResidualProbe:
    x: float
    t: float
    m: float
    m_dot: float
    i: float = 0.0


@dataclass
class VerificationReport:
    id: str
    check: str
    tolerance: float
    max_residual: float = float("nan")
    n_probes: int = 0
    failures: list = field(default_factory=list)
    probes: list = field(default_factory=list, repr=False)
    residuals: np.ndarray | None = field(default=None, repr=False)
    sup_error: float = float("nan")
    dt: float | None = None
    nx: int | None = None
    n_compared: int = 0

    @property
    def passed(self) -> bool:
        if self.check == "residual":
            return not self.failures
        return bool(self.sup_error <= self.tolerance)

    def summary(self) -> str:
        value = self.max_residual if self.check == "residual" else self.sup_error
        return f"{self.id},{value:.3e},{'PASS' if self.passed else 'FAIL'}"

    def to_csv(self, path) -> None:
        rows = ((k, p.x, p.t, p.m, p.m_dot, r) for k, (p, r) in enumerate(zip(self.probes, self.residuals)))
        write_csv(path, ("probe", "x", "t", "M", "m_dot", "residual"), rows)


@dataclass
class ConvergenceTable:
    id: str
    dts: list
    errors: list
    n_compared: int
    min_ratio: float = MIN_RATIO

    @property
    def ratios(self) -> list:
        return [a / b if b > 0 else float("inf") for a, b in zip(self.errors, self.errors[1:])]

    @property
    def passed(self) -> bool:
        return all(r >= self.min_ratio for r in self.ratios)

    def to_csv(self, path) -> None:
        ratios = [None] + self.ratios
        write_csv(path, ("dt", "sup_error", "ratio"), zip(self.dts, self.errors, ratios))


def inject_fault(entry, delta: float) -> ClosedFormSolution:
    """Copy of ``entry`` whose value is shifted by ``delta``; partials untouched."""
    entry = _entry(entry)
    base = entry.formula
    changes = {"formula": lambda x, t, m, i: base(x, t, m, i) + delta}
    if entry.branch is not None:
        # keep the validity region of the unshifted entry
        branch = entry.branch
        changes["branch"] = lambda x, t, m, i, u: branch(x, t, m, i, base(x, t, m, i))
    return dataclasses.replace(entry, **changes)


def _noise_coefficient(entry: ClosedFormSolution):
    return perturbation(entry.perturbation_id).h


def _residual_arrays(entry: ClosedFormSolution, x, t, m, i, m_dot):
    u = entry.evaluate(x, t, m, i)
    u_t, u_x = entry.partials(x, t, m, i, m_dot)
    h = _noise_coefficient(entry)
    return u_t + (1.0 - 2.0 * u) * u_x - h(x, u, u_x, t) * m_dot


def residual(id, probe: ResidualProbe) -> float:
    entry = _entry(id)
    if not bool(entry.validity(probe.x, probe.t, probe.m, probe.i)):
        raise DomainError(f"{entry.id} is not valid at {probe}")
    return float(_residual_arrays(entry, probe.x, probe.t, probe.m, probe.i, probe.m_dot))


def _draw_probes(entry: ClosedFormSolution, n: int, rng: np.random.Generator, T: float):
    kind = entry.noise_kind
    batch = max(4 * n, 256)
    cols = [[] for _ in range(5)]
    have = 0
    for _ in range(1000):
        x = rng.uniform(0.0, 1.0, batch)
        t = rng.uniform(0.0, T, batch)
        if kind == "zero":
            m = np.zeros(batch)
        elif kind == "brownian":
            m = rng.uniform(-1.5, 1.5, batch)
        else:
            m = rng.uniform(0.2, 3.0, batch)
        i = rng.uniform(0.0, 3.0, batch) if entry.needs_functional else np.zeros(batch)
        m_dot = rng.uniform(*M_DOT_RANGE, batch)
        ok = entry.validity(x, t, m, i, den_min=PROBE_DEN_MIN, rad_min=PROBE_RAD_MIN)
        for c, v in zip(cols, (x, t, m, i, m_dot)):
            c.append(v[ok])
        have += int(ok.sum())
        if have >= n:
            break
    else:
        raise ArgumentError(f"could not draw {n} valid probes for {entry.id}")
    return [np.concatenate(c)[:n] for c in cols]


def sweep_residuals(id, n_probes: int = 1000, seed: int = 0, tol: float = RESIDUAL_TOL,
                    T: float = 1.0) -> VerificationReport:
    """Residual at ``n_probes`` random points of the entry's validity region.

    Probes keep every denominator at least 0.1 away from zero and every
    radicand at least 1e-6; ``dM/dt`` is uniform in [-10, 10].
    """
    entry = _entry(id)
    rng = np.random.default_rng([seed, n_probes])
    x, t, m, i, m_dot = _draw_probes(entry, n_probes, rng, T)
    with np.errstate(all="ignore"):
        r = _residual_arrays(entry, x, t, m, i, m_dot)
    bad = ~(np.abs(r) <= tol)
    probes = [ResidualProbe(*vals) for vals in zip(x, t, m, m_dot, i)]
    return VerificationReport(
        id=entry.id, check="residual", tolerance=tol,
        max_residual=float(np.max(np.abs(r))) if r.size else 0.0,
        n_probes=int(r.size), failures=[k for k in np.flatnonzero(bad)],
        probes=probes, residuals=r)


def sample_path(entry, grid: TimeGrid, seed: int, index: int = 0) -> NoisePath:
    """Driving path matching the entry's noise kind (zero path for deterministic ones)."""
    entry = _entry(entry)
    if entry.noise_kind == "zero":
        return zero_path(grid)
    w = sample_brownian(seed, grid, index)
    return to_geometric(w) if entry.noise_kind == "geometric-brownian" else w


def _fan_points(nx: int, fan_refine: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, (nx - 1) * fan_refine + 1)


def numerical_surface(entry, path: NoisePath, nx: int, fan_refine: int = 20):
    entry = _entry(entry)
    scenario = named_scenario(entry.scenario, path.grid.T)
    fan = integrate_fan(scenario, path, _fan_points(nx, fan_refine))
    return fan, build_surface(fan, np.linspace(0.0, 1.0, nx))


def cross_validate(id, seed: int = 1, dt: float = 1e-3, nx: int = 101, T: float = 1.0,
                   path: NoisePath | None = None, fan_refine: int = 20,
                   tol: float | None = None) -> VerificationReport:
    """Sup-norm gap between the characteristics surface and the closed form.

    Compared on the nodes where both are valid. The fan uses
    ``(nx - 1) * fan_refine + 1`` initial points.
    """
    entry = _entry(id)
    if nx < 2:
        raise ArgumentError("nx must be >= 2")
    if path is None:
        path = sample_path(entry, TimeGrid.uniform(T, dt), seed)
    if tol is None:
        tol = NODE_EXACT_TOL if entry.node_exact else NON_NODE_EXACT_TOL
    _, surf = numerical_surface(entry, path, nx, fan_refine)
    cf = evaluate_grid(entry, surf.x_grid, path, default_functional(entry, path))
    mask = surf.valid & cf.valid
    err = float(np.max(np.abs(surf.u[mask] - cf.u[mask]))) if mask.any() else 0.0
    h = path.grid.steps
    return VerificationReport(id=entry.id, check="cross-validation", tolerance=tol, sup_error=err,
                              dt=float(h.max()), nx=nx, n_compared=int(mask.sum()))


def _level_errors(entry, brownian, dts, T, nx, fan_refine, ref_factor, jac_min):
    """Sup errors of each level against the reference, on their common valid nodes."""
    n_coarse = int(round(T / dts[0])) + 1
    if brownian is None:
        levels = [zero_path(TimeGrid.uniform(T, d)) for d in dts]
        reference = zero_path(TimeGrid.uniform(T, dts[-1] / ref_factor))
    else:
        chain = [brownian]
        for _ in dts[1:]:
            chain.append(bridge_refine(chain[-1], 2))
        ref_w = bridge_refine(chain[-1], ref_factor)
        lift = to_geometric if entry.noise_kind == "geometric-brownian" else (lambda p: p)
        levels = [lift(p) for p in chain]
        reference = lift(ref_w)

    ref = evaluate_grid(entry, np.linspace(0.0, 1.0, nx), reference, default_functional(entry, reference))
    stride = (len(reference.grid) - 1) // (n_coarse - 1)
    mask = ref.valid[:, ::stride].copy()
    ref_u = ref.u[:, ::stride]

    surfaces = []
    for k, path in enumerate(levels):
        fan, surf = numerical_surface(entry, path, nx, fan_refine)
        s = 2**k
        surfaces.append(surf.u[:, ::s])
        mask &= surf.valid[:, ::s]
        if jac_min is not None:
            with np.errstate(invalid="ignore"):
                well = np.min(jacobian(fan)[:, ::s], axis=0) >= jac_min
            mask &= well[None, :]
    errors = [float(np.max(np.abs(u[mask] - ref_u[mask]))) if mask.any() else 0.0 for u in surfaces]
    return errors, int(mask.sum())


def convergence_study(id, seed: int, dt_list, T: float = 1.0, nx: int = 101, fan_refine: int = 20,
                      ref_factor: int = 8, n_paths: int = 1, jac_min: float | None = None) -> ConvergenceTable:
    """Pathwise error of the characteristics solver on nested grids.

    The coarsest Brownian path is sampled once and refined by Brownian bridges,
    so every level sees the same path. The reference closed form is evaluated
    on a further ``ref_factor`` refinement. Errors are sup norms over the
    coarsest time nodes where every level and the reference are valid.

    With ``n_paths > 1`` the reported error is the mean of the per-path sup
    errors over paths ``0..n_paths-1``, an estimate of the strong error.
    ``jac_min`` drops time nodes where the fan's smallest Jacobian falls below
    it, i.e. keeps away from the onset of a shock.
    """
    entry = _entry(id)
    dts = sorted((float(d) for d in dt_list), reverse=True)
    if not dts:
        raise ArgumentError("dt_list is empty")
    if n_paths < 1:
        raise ArgumentError("n_paths must be >= 1")
    for a, b in zip(dts, dts[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise GridError("dt_list must be nested by a factor of 2")

    coarse = TimeGrid.uniform(T, dts[0])
    if entry.noise_kind == "zero":
        errors, n_compared = _level_errors(entry, None, dts, T, nx, fan_refine, ref_factor, jac_min)
        return ConvergenceTable(entry.id, dts, errors, n_compared)

    per_path = []
    n_compared = 0
    for index in range(n_paths):
        errors, n = _level_errors(entry, sample_brownian(seed, coarse, index), dts, T, nx,
                                  fan_refine, ref_factor, jac_min)
        per_path.append(errors)
        n_compared += n
    mean = np.mean(np.array(per_path), axis=0)
    return ConvergenceTable(entry.id, dts, [float(e) for e in mean], n_compared)


CONVERGENCE_PATHS = 64
CONVERGENCE_JAC_MIN = 0.25


def check_entry(id, seed: int = 1, n_probes: int = 1000, dt: float = 1e-3, nx: int = 101,
                T: float = 1.0):
    """Residual sweep plus a solver cross-check for one catalog id.

    Node-exact entries are compared directly with ``cross_validate``. The
    others are judged by the error ratio under step halving, using
    ``CONVERGENCE_PATHS`` paths on steps ``4 dt, 2 dt, dt``.
    Returns ``(residual_report, cross_check)``; both expose ``passed``.
    """
    entry = _entry(id)
    report = sweep_residuals(entry, n_probes=n_probes, seed=seed, T=T)
    if entry.node_exact:
        cross = cross_validate(entry, seed=seed, dt=dt, nx=nx, T=T)
    else:
        cross = convergence_study(entry, seed, [4 * dt, 2 * dt, dt], T=T, nx=min(nx, 51), fan_refine=4,
                                  n_paths=CONVERGENCE_PATHS, jac_min=CONVERGENCE_JAC_MIN)
    return report, cross
