"""Flux, initial data and perturbation catalog of the perturbed LWR equation.

The equation is ``du = -(1-2u) u_x dt + h(x, u, u_x, t) o dM_t`` (Stratonovich),
i.e. the LWR flux ``u(1-u)`` plus a noise term ``h``. Each catalog
``PerturbationSpec`` stores ``h`` as the coefficient of ``o dM`` in ``du``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .exceptions import ConfigError, ExplosionError, UnknownIdError

SQRT_CLAMP = 1e-9


@dataclass(frozen=True)
class InitialCondition:
    id: str
    eval: Callable = field(repr=False)
    deriv: Callable = field(repr=False)

    def __call__(self, x):
        return self.eval(x)


INITIAL_CONDITIONS = {
    "one-minus-x": InitialCondition("one-minus-x", lambda x: 1.0 - x, lambda x: -np.ones_like(np.asarray(x, dtype=float))),
    "x": InitialCondition("x", lambda x: np.asarray(x, dtype=float) * 1.0, lambda x: np.ones_like(np.asarray(x, dtype=float))),
    "one-minus-x-squared": InitialCondition("one-minus-x-squared", lambda x: 1.0 - x * x, lambda x: -2.0 * x),
    "x-minus-x-squared": InitialCondition("x-minus-x-squared", lambda x: x - x * x, lambda x: 1.0 - 2.0 * x),
}


def initial_condition(id: str) -> InitialCondition:
    try:
        return INITIAL_CONDITIONS[id]
    except KeyError:
        raise UnknownIdError(f"unknown initial condition {id!r}") from None


def _zeros(x, u, p, t=0.0):
    return np.zeros(np.broadcast(x, u, p).shape)


def _like(value, *args):
    # broadcast without arithmetic so an infinite slope never turns into nan
    return value + np.zeros(np.broadcast(*args).shape)


@dataclass(frozen=True)
class PerturbationSpec:
    """Noise coefficient ``h(x, u, p, t)`` with analytic partials.

    ``eta_noise(x, u, chi, t)`` is the noise coefficient of the solution-value
    equation, ``h - chi * h_p``. When left unset it is evaluated literally;
    catalog entries provide the simplified closed form so that the value
    equation stays exact even when ``chi`` overflows.
    """

    id: str
    h: Callable = field(repr=False)
    h_x: Callable = field(repr=False)
    h_u: Callable = field(repr=False)
    h_p: Callable = field(repr=False)
    noise_kind: str = "brownian"
    eta_noise: Callable | None = field(default=None, repr=False)

    def eta_coefficient(self, x, u, chi, t=0.0):
        if self.eta_noise is not None:
            return self.eta_noise(x, u, chi, t)
        return self.h(x, u, chi, t) - chi * self.h_p(x, u, chi, t)


def _sqrt_mass(u):
    return np.sqrt(np.maximum(u - u * u, 0.0))


def _sqrt_mass_deriv(u):
    uc = np.clip(u, SQRT_CLAMP, 1.0 - SQRT_CLAMP)
    return (1.0 - 2.0 * uc) / (2.0 * np.sqrt(uc - uc * uc))


def _build_catalog():
    specs = {
        "none": dict(
            h=_zeros, h_x=_zeros, h_u=_zeros, h_p=_zeros, eta_noise=_zeros),
        # H(u) = u - u^2 entering with a minus sign: h = -(1-2u) p
        "conservation-lwr": dict(
            h=lambda x, u, p, t=0.0: -(1.0 - 2.0 * u) * p,
            h_x=_zeros,
            h_u=lambda x, u, p, t=0.0: _like(2.0 * p, u),
            h_p=lambda x, u, p, t=0.0: _like(-(1.0 - 2.0 * u), p),
            eta_noise=_zeros),
        "advective": dict(
            h=lambda x, u, p, t=0.0: _like(p, u),
            h_x=_zeros, h_u=_zeros,
            h_p=lambda x, u, p, t=0.0: _like(1.0, u, p),
            eta_noise=_zeros),
        "multiplicative": dict(
            h=lambda x, u, p, t=0.0: _like(u, p),
            h_x=_zeros,
            h_u=lambda x, u, p, t=0.0: _like(1.0, u, p),
            h_p=_zeros,
            eta_noise=lambda x, u, p, t=0.0: _like(u, p)),
        "sqrt-conservation": dict(
            h=lambda x, u, p, t=0.0: _sqrt_mass(u) * p,
            h_x=_zeros,
            h_u=lambda x, u, p, t=0.0: _sqrt_mass_deriv(u) * p,
            h_p=lambda x, u, p, t=0.0: _like(_sqrt_mass(u), p),
            eta_noise=_zeros),
    }
    return specs


_PERTURBATIONS = _build_catalog()
PERTURBATION_IDS = tuple(_PERTURBATIONS)


def perturbation(id: str, noise_kind: str = "brownian") -> PerturbationSpec:
    if id not in _PERTURBATIONS:
        raise UnknownIdError(f"unknown perturbation {id!r}")
    if noise_kind not in ("brownian", "geometric-brownian"):
        raise UnknownIdError(f"unknown noise kind {noise_kind!r}")
    return PerturbationSpec(id=id, noise_kind=noise_kind, **_PERTURBATIONS[id])


@dataclass(frozen=True)
class Scenario:
    ic: InitialCondition
    perturbation: PerturbationSpec
    T: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ConfigError("T must be finite and positive")

    @property
    def noise_kind(self) -> str:
        return self.perturbation.noise_kind


# name -> (initial condition, perturbation, noise kind)
NAMED_SCENARIOS = {
    "d1": ("one-minus-x", "none", "brownian"),
    "d2": ("one-minus-x-squared", "none", "brownian"),
    "d3": ("x", "none", "brownian"),
    "d4": ("x-minus-x-squared", "none", "brownian"),
    "s1": ("one-minus-x", "conservation-lwr", "brownian"),
    "s2": ("one-minus-x-squared", "conservation-lwr", "geometric-brownian"),
    "b1": ("one-minus-x-squared", "advective", "brownian"),
    "b2": ("x", "multiplicative", "brownian"),
    "b3": ("x", "sqrt-conservation", "brownian"),
    "g1": ("x", "advective", "geometric-brownian"),
    "g2": ("x", "multiplicative", "geometric-brownian"),
    "g3": ("x", "sqrt-conservation", "geometric-brownian"),
}


def named_scenario(name: str, T: float = 1.0) -> Scenario:
    try:
        ic, pert, noise = NAMED_SCENARIOS[name.lower()]
    except KeyError:
        raise UnknownIdError(f"unknown scenario {name!r}") from None
    return Scenario(initial_condition(ic), perturbation(pert, noise), T)


def f_drift(u, p):
    """Drift part of the right-hand side, ``-(1 - 2u) p``."""
    return -(1.0 - 2.0 * u) * p


def _increments(spec: PerturbationSpec, xi, eta, chi, t, dt, dm):
    dxi = (1.0 - 2.0 * eta) * dt - spec.h_p(xi, eta, chi, t) * dm
    # the LWR drift is linear in p, so it contributes nothing to d(eta)
    deta = spec.eta_coefficient(xi, eta, chi, t) * dm
    dchi = 2.0 * chi * chi * dt + (spec.h_x(xi, eta, chi, t) + spec.h_u(xi, eta, chi, t) * chi) * dm
    return dxi, deta, dchi


def sce_rhs(spec: PerturbationSpec, state, dt, dM, t=0.0):
    """Stratonovich increments ``(dxi, deta, dchi)`` at ``state = (xi, eta, chi)``.

    Coefficients are evaluated at the given state; choosing Stratonovich
    consistent evaluation points is the integrator's job.
    """
    xi, eta, chi = (np.asarray(s, dtype=float) for s in state)
    if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(eta)) and np.all(np.isfinite(chi))):
        raise ExplosionError("non-finite characteristic state")
    out = _increments(spec, xi, eta, chi, t, dt, dM)
    if xi.ndim == 0:
        return tuple(float(v) for v in out)
    return out


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _central(f, args, k, step=1e-6):
    lo, hi = list(args), list(args)
    lo[k] = lo[k] - step
    hi[k] = hi[k] + step
    return (f(*hi) - f(*lo)) / (2 * step)


def validate_scenario(s: Scenario, n_samples: int = 1001, n_points: int = 200, seed: int = 0,
                      tol: float = 1e-6) -> ValidationReport:
    """Check range of ``g``, derivative consistency and noise compatibility."""
    report = ValidationReport()
    if not (np.isfinite(s.T) and s.T > 0):
        report.violations.append("horizon T must be finite and positive")

    xs = np.linspace(0.0, 1.0, n_samples)
    g = np.asarray(s.ic.eval(xs), dtype=float)
    if np.any(~np.isfinite(g)) or np.any(g < 0.0) or np.any(g > 1.0):
        report.violations.append(f"range: g({s.ic.id}) leaves [0, 1] (min {g.min():.6g}, max {g.max():.6g})")

    xi = xs[1:-1]
    fd = _central(s.ic.eval, (xi,), 0)
    dg = np.asarray(s.ic.deriv(xi), dtype=float)
    err = np.max(np.abs(fd - dg))
    if not err <= tol:
        report.violations.append(f"partials: g' disagrees with central differences by {err:.3g}")

    spec = s.perturbation
    if spec.noise_kind not in ("brownian", "geometric-brownian"):
        report.violations.append(f"noise kind {spec.noise_kind!r} not supported")

    rng = np.random.default_rng(seed)
    x = rng.uniform(0.05, 0.95, n_points)
    u = rng.uniform(0.05, 0.95, n_points)
    p = rng.uniform(-2.0, 2.0, n_points)
    t = rng.uniform(0.0, s.T, n_points)
    for name, k in (("h_x", 0), ("h_u", 1), ("h_p", 2)):
        analytic = np.asarray(getattr(spec, name)(x, u, p, t), dtype=float)
        numeric = _central(spec.h, (x, u, p, t), k)
        err = np.max(np.abs(analytic - numeric))
        if not err <= tol:
            report.violations.append(f"partials: {name} disagrees with central differences by {err:.3g}")
    literal = spec.h(x, u, p, t) - p * spec.h_p(x, u, p, t)
    err = np.max(np.abs(np.asarray(spec.eta_coefficient(x, u, p, t)) - literal))
    if not err <= tol:
        report.violations.append(f"partials: eta noise coefficient disagrees with h - p*h_p by {err:.3g}")
    return report


CONFIG_KEYS = ("ic", "perturbation", "noise", "T", "seed", "dt", "nx")
_CONFIG_TYPES = {"T": float, "dt": float, "seed": int, "nx": int}
_NOISE_ALIASES = {"brownian": "brownian", "bm": "brownian", "geometric-brownian": "geometric-brownian",
                  "gbm": "geometric-brownian", "geometric": "geometric-brownian"}


def parse_config(text: str) -> dict:
    """Parse a flat ``key=value`` scenario block. Unknown keys are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        conv = _CONFIG_TYPES.get(key, str)
        try:
            out[key] = conv(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
    if "noise" in out:
        try:
            out["noise"] = _NOISE_ALIASES[out["noise"].lower()]
        except KeyError:
            raise ConfigError(f"unknown noise {out['noise']!r}") from None
    return out


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())


def scenario_from_config(cfg: dict) -> Scenario:
    try:
        ic = initial_condition(cfg["ic"])
        pert = perturbation(cfg.get("perturbation", "none"), cfg.get("noise", "brownian"))
    except UnknownIdError as exc:
        raise ConfigError(str(exc)) from None
    except KeyError as exc:
        raise ConfigError(f"config is missing {exc}") from None
    return Scenario(ic, pert, float(cfg.get("T", 1.0)))
