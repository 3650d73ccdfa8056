"""Catalog of explicit solutions of the (perturbed) LWR equation.

Each entry is a function of ``(x, t, m, i)``, where ``m`` is the value of the
driving path at ``t`` (``W_t`` or ``S_t``) and ``i`` the value of the path
functional when the entry needs one. Partials are hand-derived and treat
``(t, m, i, x)`` as independent; the chain rule in ``partials`` assembles the
total time derivative with ``dm/dt`` as a free probe value and ``di/dt = exp(m)``.

Formulas with a square root of the form ``(sqrt(1 + 4ab) - 1) / (2a)`` are
evaluated in the rationalized form ``2b / (sqrt(1 + 4ab) + 1)``; it is the
same function, free of cancellation as ``a -> 0``. The unrationalized
expression is kept as ``variant``. For B2, G2 and G3 ``variant`` holds a
near miss that does not satisfy the equation; the tests keep it as a negative
control.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import ArgumentError, DomainError, UnknownIdError
from .model import NAMED_SCENARIOS, initial_condition
from .process import NoisePath, PathFunctional

E = np.e

PROBE_DEN_MIN = 0.1
PROBE_RAD_MIN = 1e-6
BRANCH_TOL = 1e-8


@dataclass(frozen=True)
class ClosedFormSolution:
    """Catalog entry.

    ``formula``/``grad``/``inverse``/``denominators``/``radicands`` take
    ``(x, t, m, i)``. ``grad`` returns the explicit partials
    ``(u_t, u_m, u_i, u_x)``. ``inverse`` is the initial point carried to ``x``
    by the characteristic flow.
    """

    id: str
    scenario: str
    needs_functional: str | None
    formula: Callable = field(repr=False)
    grad: Callable = field(repr=False)
    inverse: Callable = field(repr=False)
    denominators: Callable = field(repr=False)
    radicands: Callable = field(repr=False, default=lambda x, t, m, i: ())
    variant: Callable | None = field(repr=False, default=None)
    branch: Callable | None = field(repr=False, default=None)
    zero_branch: bool = False
    node_exact: bool = True
    note: str = ""

    @property
    def ic(self):
        return initial_condition(NAMED_SCENARIOS[self.scenario][0])

    @property
    def perturbation_id(self) -> str:
        return NAMED_SCENARIOS[self.scenario][1]

    @property
    def noise_kind(self) -> str:
        if self.id.startswith("D"):
            return "zero"
        return NAMED_SCENARIOS[self.scenario][2]

    def evaluate(self, x, t, m=0.0, i=0.0):
        """Raw formula, with the explicit ``t == 0`` branch for entries whose formula is 0/0 there."""
        x, t, m, i = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, t, m, i)))
        with np.errstate(all="ignore"):
            u = self.formula(x, t, m, i)
            if self.zero_branch:
                u = np.where(t == 0.0, self.ic.eval(x), u)
        return u if u.ndim else float(u)

    def validity(self, x, t, m=0.0, i=0.0, den_min=0.0, rad_min=0.0):
        x, t, m, i = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, t, m, i)))
        with np.errstate(all="ignore"):
            ok = np.ones(x.shape, dtype=bool)
            for d in self.denominators(x, t, m, i):
                ok &= np.abs(d) > den_min
            for r in self.radicands(x, t, m, i):
                ok &= r >= rad_min
            u = self.formula(x, t, m, i)
            ok &= np.isfinite(u)
            if self.branch is not None:
                ok &= self.branch(x, t, m, i, u)
        return ok

    def partials(self, x, t, m=0.0, i=0.0, m_dot=0.0):
        """``(u_t, u_x)``; ``u_t`` includes ``u_m * m_dot`` and ``u_i * exp(m)``."""
        with np.errstate(all="ignore"):
            u_t, u_m, u_i, u_x = self.grad(*np.broadcast_arrays(
                *(np.asarray(v, dtype=float) for v in (x, t, m, i))))
            total = u_t + u_m * m_dot + u_i * np.exp(m)
        return total, u_x


def _zero(x):
    return np.zeros_like(x)


# ---- deterministic -------------------------------------------------------

def _d1(x, t, m, i):
    return (1.0 - x + t) / (1.0 + 2.0 * t)


def _d1_grad(x, t, m, i):
    d = 1.0 + 2.0 * t
    return (2.0 * x - 1.0) / d**2, _zero(x), _zero(x), -1.0 / d + 0.0 * x


def _quad_inverse(a, b):
    """Root ``2b / (1 + sqrt(1 + 8ab))`` of ``2a X^2 + X - b = 0`` and its partials in (a, b)."""
    q = np.sqrt(1.0 + 8.0 * a * b)
    den = 1.0 + q
    X = 2.0 * b / den
    # dq/da = 4b/q, dq/db = 4a/q
    X_a = -2.0 * b * (4.0 * b / q) / den**2
    X_b = 2.0 / den - 2.0 * b * (4.0 * a / q) / den**2
    return X, X_a, X_b


def _d2(x, t, m, i):
    X, _, _ = _quad_inverse(t, t + x)
    return 1.0 - X * X


def _d2_grad(x, t, m, i):
    X, X_a, X_b = _quad_inverse(t, t + x)
    X_t = X_a + X_b
    return -2.0 * X * X_t, _zero(x), _zero(x), -2.0 * X * X_b


def _d2_variant(x, t, m, i):
    return 1.0 - (np.sqrt(1.0 + 8.0 * t**2 + 8.0 * t * x) - 1.0) ** 2 / (16.0 * t**2)


def _d3(x, t, m, i):
    return (x - t) / (1.0 - 2.0 * t)


def _d3_grad(x, t, m, i):
    d = 1.0 - 2.0 * t
    return (2.0 * x - 1.0) / d**2, _zero(x), _zero(x), 1.0 / d + 0.0 * x


def _d4_parts(x, t):
    r = np.sqrt(1.0 - 4.0 * t - 4.0 * t * t + 8.0 * t * x)
    den = r + 1.0 - 2.0 * t
    X = 2.0 * (x - t) / den
    r_t = (4.0 * x - 2.0 - 4.0 * t) / r
    r_x = 4.0 * t / r
    X_x = 2.0 / den - 2.0 * (x - t) * r_x / den**2
    X_t = -2.0 / den - 2.0 * (x - t) * (r_t - 2.0) / den**2
    return X, X_t, X_x, den, r * r


def _d4(x, t, m, i):
    X = _d4_parts(x, t)[0]
    return X - X * X


def _d4_grad(x, t, m, i):
    X, X_t, X_x, _, _ = _d4_parts(x, t)
    w = 1.0 - 2.0 * X
    return w * X_t, _zero(x), _zero(x), w * X_x


def _d4_variant(x, t, m, i):
    r = np.sqrt(-4.0 * t**2 + t * (8.0 * x - 4.0) + 1.0)
    return (r + 2.0 * t - 1.0) / (4.0 * t) - (r + 2.0 * t - 1.0) ** 2 / (16.0 * t**2)


# ---- conservation-form noise ----------------------------------------------

def _s1(x, t, m, i):
    return (1.0 - x + t + m) / (1.0 + 2.0 * t + 2.0 * m)


def _s1_grad(x, t, m, i):
    d = 1.0 + 2.0 * t + 2.0 * m
    u_t = (2.0 * x - 1.0) / d**2
    return u_t, u_t, _zero(x), -1.0 / d


def _s2(x, t, m, i):
    c = t + m - 1.0
    X, _, _ = _quad_inverse(c, c + x)
    return 1.0 - X * X


def _s2_grad(x, t, m, i):
    c = t + m - 1.0
    X, X_a, X_b = _quad_inverse(c, c + x)
    u_c = -2.0 * X * (X_a + X_b)
    return u_c, u_c, _zero(x), -2.0 * X * X_b


def _s2_variant(x, t, m, i):
    S = m
    return 1.0 - (np.sqrt(8.0 * (t + S - 1.0) * (t + x + S - 1.0) + 1.0) - 1.0) ** 2 / (16.0 * (S + t - 1.0) ** 2)


# ---- Brownian driver -----------------------------------------------------

def _b1(x, t, m, i):
    X, _, _ = _quad_inverse(t, x + t + m)
    return 1.0 - X * X


def _b1_grad(x, t, m, i):
    X, X_a, X_b = _quad_inverse(t, x + t + m)
    w = -2.0 * X
    return w * (X_a + X_b), w * X_b, _zero(x), w * X_b


def _b1_variant(x, t, m, i):
    return 1.0 - (np.sqrt(8.0 * t * (m + t + x) + 1.0) - 1.0) ** 2 / (16.0 * t**2)


def _b2(x, t, m, i):
    return np.exp(m) * (t - x) / (2.0 * i - 1.0)


def _b2_grad(x, t, m, i):
    d = 2.0 * i - 1.0
    em = np.exp(m)
    u = em * (t - x) / d
    return em / d + 0.0 * x, u, -2.0 * u / d, -em / d + 0.0 * x


def _b2_variant(x, t, m, i):
    return (t - x) / (2.0 * i - 1.0)


def _sqrt_parts(x, t, m):
    """Solution for h = sqrt(u - u^2) u_x with g(x) = x, driver value ``m``."""
    R = m * m + 4.0 * t * t - 4.0 * t - 4.0 * x * x + 4.0 * x
    sR = np.sqrt(R)
    P = m * m + 4.0 * t * t - 4.0 * x * t - 2.0 * t + 2.0 * x
    N = m * sR + P
    D = 2.0 * (1.0 - 4.0 * t + 4.0 * t * t + m * m)
    return R, sR, N, D


def _sqrt_u(x, t, m):
    _, _, N, D = _sqrt_parts(x, t, m)
    return N / D


def _sqrt_grad(x, t, m):
    R, sR, N, D = _sqrt_parts(x, t, m)
    N_t = m * (8.0 * t - 4.0) / (2.0 * sR) + 8.0 * t - 4.0 * x - 2.0
    N_x = m * (4.0 - 8.0 * x) / (2.0 * sR) - 4.0 * t + 2.0
    N_m = sR + m * m / sR + 2.0 * m
    D_t = 2.0 * (8.0 * t - 4.0)
    D_m = 4.0 * m
    D2 = D * D
    return (N_t * D - N * D_t) / D2, (N_m * D - N * D_m) / D2, (N_x * D) / D2


def _sqrt_branch(x, t, m, u):
    # the squared inversion admits a mirror root; keep the one the flow produces
    s = np.sqrt(np.maximum(u - u * u, 0.0))
    fwd = u + (1.0 - 2.0 * u) * t - s * m
    return (u >= 0.0) & (u <= 1.0) & (np.abs(fwd - x) <= BRANCH_TOL * (1.0 + np.abs(x)))


def _b3(x, t, m, i):
    return _sqrt_u(x, t, m)


def _b3_grad(x, t, m, i):
    u_t, u_m, u_x = _sqrt_grad(x, t, m)
    return u_t, u_m, _zero(x), u_x


def _b3_variant(x, t, m, i):
    W = m
    return (W * np.sqrt(W**2 + 4 * t**2 - 4 * t - 4 * x**2 + 4 * x) + W**2 + 4 * t**2 - 4 * x * t - 2 * t + 2 * x) / (
        2 * (1 - 4 * t + 4 * t**2 + W**2))


# ---- geometric Brownian driver --------------------------------------------

def _g1(x, t, m, i):
    return (1.0 - x + t - m) / (2.0 * t - 1.0)


def _g1_grad(x, t, m, i):
    d = 2.0 * t - 1.0
    return (2.0 * x - 3.0 + 2.0 * m) / d**2, -1.0 / d + 0.0 * x, _zero(x), -1.0 / d + 0.0 * x


def _g2(x, t, m, i):
    return np.exp(m) * (x - t) / (E - 2.0 * i)


def _g2_grad(x, t, m, i):
    d = E - 2.0 * i
    em = np.exp(m)
    u = em * (x - t) / d
    return -em / d + 0.0 * x, u, 2.0 * u / d, em / d + 0.0 * x


def _g2_variant(x, t, m, i):
    return E * (x - t) / (E - 2.0 * i)


def _g3(x, t, m, i):
    return _sqrt_u(x, t, m - 1.0)


def _g3_grad(x, t, m, i):
    u_t, u_m, u_x = _sqrt_grad(x, t, m - 1.0)
    return u_t, u_m, _zero(x), u_x


def _g3_variant(x, t, m, i):
    S = m
    S2 = S * S  # exp(-t + 2 W_t)
    return (S - 1.0) * (np.sqrt(4 * t**2 - 4 * t - 4 * x**2 + 4 * x + S2 - 2 * S + 1)
                        + 4 * t**2 - 4 * x * t - 2 * t + 2 * x + S2 - 2 * S + 1) / (
        2 * (4 * t**2 - 4 * t + S2 - 2 * S + 2))


def _entries():
    one = lambda x, t, m, i: (1.0 + 2.0 * t + 0.0 * x,)
    return [
        ClosedFormSolution(
            "D1", "d1", None, _d1, _d1_grad,
            inverse=lambda x, t, m, i: (x + t) / (1.0 + 2.0 * t),
            denominators=one, variant=_d1),
        ClosedFormSolution(
            "D2", "d2", None, _d2, _d2_grad,
            inverse=lambda x, t, m, i: _quad_inverse(t, t + x)[0],
            denominators=lambda x, t, m, i: (),
            radicands=lambda x, t, m, i: (1.0 + 8.0 * t * (t + x),),
            variant=_d2_variant, zero_branch=True),
        ClosedFormSolution(
            "D3", "d3", None, _d3, _d3_grad,
            inverse=_d3,
            denominators=lambda x, t, m, i: (1.0 - 2.0 * t + 0.0 * x,),
            variant=_d3),
        ClosedFormSolution(
            "D4", "d4", None, _d4, _d4_grad,
            inverse=lambda x, t, m, i: _d4_parts(x, t)[0],
            denominators=lambda x, t, m, i: (_d4_parts(x, t)[3],),
            radicands=lambda x, t, m, i: (_d4_parts(x, t)[4],),
            variant=_d4_variant, zero_branch=True),
        ClosedFormSolution(
            "S1", "s1", None, _s1, _s1_grad,
            inverse=lambda x, t, m, i: (x + t + m) / (1.0 + 2.0 * t + 2.0 * m),
            denominators=lambda x, t, m, i: (1.0 + 2.0 * t + 2.0 * m + 0.0 * x,),
            variant=_s1),
        ClosedFormSolution(
            "S2", "s2", None, _s2, _s2_grad,
            inverse=lambda x, t, m, i: _quad_inverse(t + m - 1.0, t + m - 1.0 + x)[0],
            denominators=lambda x, t, m, i: (),
            radicands=lambda x, t, m, i: (1.0 + 8.0 * (t + m - 1.0) * (t + m - 1.0 + x),),
            variant=_s2_variant, zero_branch=True),
        ClosedFormSolution(
            "B1", "b1", None, _b1, _b1_grad,
            inverse=lambda x, t, m, i: _quad_inverse(t, x + t + m)[0],
            denominators=lambda x, t, m, i: (),
            radicands=lambda x, t, m, i: (1.0 + 8.0 * t * (x + t + m),),
            variant=_b1_variant, zero_branch=True),
        ClosedFormSolution(
            "B2", "b2", "exp-of-path", _b2, _b2_grad,
            inverse=lambda x, t, m, i: (x - t) / (1.0 - 2.0 * i),
            denominators=lambda x, t, m, i: (2.0 * i - 1.0 + 0.0 * x,),
            variant=_b2_variant, node_exact=False,
            note="the variant without the factor exp(W_t) is not a solution"),
        ClosedFormSolution(
            "B3", "b3", None, _b3, _b3_grad,
            inverse=_b3,
            denominators=lambda x, t, m, i: (_sqrt_parts(x, t, m)[3],),
            radicands=lambda x, t, m, i: (_sqrt_parts(x, t, m)[0],),
            variant=_b3_variant,
            branch=lambda x, t, m, i, u: _sqrt_branch(x, t, m, u)),
        ClosedFormSolution(
            "G1", "g1", None, _g1, _g1_grad,
            inverse=_g1,
            denominators=lambda x, t, m, i: (2.0 * t - 1.0 + 0.0 * x,),
            variant=_g1),
        ClosedFormSolution(
            "G2", "g2", "exp-of-exp-path", _g2, _g2_grad,
            inverse=lambda x, t, m, i: E * (x - t) / (E - 2.0 * i),
            denominators=lambda x, t, m, i: (E - 2.0 * i + 0.0 * x,),
            variant=_g2_variant, node_exact=False,
            note="the variant without the factor exp(S_t - 1) is not a solution"),
        ClosedFormSolution(
            "G3", "g3", None, _g3, _g3_grad,
            inverse=_g3,
            denominators=lambda x, t, m, i: (_sqrt_parts(x, t, m - 1.0)[3],),
            radicands=lambda x, t, m, i: (_sqrt_parts(x, t, m - 1.0)[0],),
            variant=_g3_variant,
            branch=lambda x, t, m, i, u: _sqrt_branch(x, t, m - 1.0, u),
            note="the variant scaling the whole numerator by (S_t - 1) is not a solution"),
    ]


CATALOG = {e.id: e for e in _entries()}
IDS = tuple(CATALOG)


def lookup(id: str) -> ClosedFormSolution:
    try:
        return CATALOG[id.upper()]
    except (KeyError, AttributeError):
        raise UnknownIdError(f"unknown closed-form id {id!r}") from None


def _entry(id_or_entry) -> ClosedFormSolution:
    return id_or_entry if isinstance(id_or_entry, ClosedFormSolution) else lookup(id_or_entry)


def _check_inputs(entry: ClosedFormSolution, path: NoisePath, functional: PathFunctional | None):
    if entry.needs_functional is None and functional is not None:
        raise ArgumentError(f"{entry.id} does not take a path functional")
    if entry.needs_functional is not None:
        if functional is None:
            raise ArgumentError(f"{entry.id} needs a {entry.needs_functional} functional")
        if functional.kind != entry.needs_functional:
            raise ArgumentError(f"{entry.id} needs {entry.needs_functional}, got {functional.kind}")
    kind = entry.noise_kind
    if kind == "brownian" and path.kind not in ("brownian", "zero"):
        raise ArgumentError(f"{entry.id} is driven by Brownian motion, path is {path.kind}")
    if kind == "geometric-brownian" and path.kind != "geometric-brownian":
        raise ArgumentError(f"{entry.id} is driven by geometric Brownian motion, path is {path.kind}")


def path_state(entry, path: NoisePath, t, functional: PathFunctional | None = None):
    """``(m, i)`` at times ``t``, linearly interpolated between nodes."""
    entry = _entry(entry)
    _check_inputs(entry, path, functional)
    m = path.at(t)
    i = functional.at(t) if functional is not None else np.zeros_like(m)
    return m, i


def default_functional(entry, path: NoisePath) -> PathFunctional | None:
    from .process import path_integral_exp

    entry = _entry(entry)
    if entry.needs_functional is None:
        return None
    return path_integral_exp(path, nested=entry.needs_functional == "exp-of-exp-path")


def evaluate(id, x, t, path: NoisePath, functional: PathFunctional | None = None):
    """Value of the catalog solution at ``(x, t)`` along ``path``.

    Raises ``DomainError`` if any requested point is outside the entry's
    validity region.
    """
    entry = _entry(id)
    m, i = path_state(entry, path, t, functional)
    x_b, t_b, m_b, i_b = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, t, m, i)))
    ok = entry.validity(x_b, t_b, m_b, i_b) | (entry.zero_branch & (t_b == 0.0))
    if not np.all(ok):
        raise DomainError(f"{entry.id} is not valid at {int(np.size(ok) - np.count_nonzero(ok))} point(s)")
    return entry.evaluate(x, t, m, i)


def partials(id, x, t, path: NoisePath | None = None, functional: PathFunctional | None = None,
             m_dot=0.0, m=None, i=None):
    """``(u_t, u_x)`` at ``(x, t)``; path state comes from ``path`` or explicit ``m``/``i``."""
    entry = _entry(id)
    if path is not None:
        m, i = path_state(entry, path, t, functional)
    m = 0.0 if m is None else m
    i = 0.0 if i is None else i
    return entry.partials(x, t, m, i, m_dot)


def _sigma_index(entry: ClosedFormSolution, x: np.ndarray, path: NoisePath, functional) -> np.ndarray:
    t = path.t
    m = path.values
    i = functional.cumulative if functional is not None else np.zeros_like(t)
    X, T, M, I = (a.T for a in np.broadcast_arrays(x[:, None], t[None, :], m[None, :], i[None, :]))
    # arrays are [time, x]
    with np.errstate(all="ignore"):
        fail = np.zeros(X.shape, dtype=bool)
        for d in entry.denominators(X, T, M, I):
            d = np.broadcast_to(d, X.shape)
            fail |= ~(d * d[0] > 0.0)
        for r in entry.radicands(X, T, M, I):
            fail |= ~(np.broadcast_to(r, X.shape) >= 0.0)
        X0 = np.broadcast_to(entry.inverse(X, T, M, I), X.shape)
        fail |= ~((X0 >= 0.0) & (X0 <= 1.0))
        if entry.branch is not None:
            u = entry.formula(X, T, M, I)
            fail |= ~entry.branch(X, T, M, I, u)
    fail[0] = False
    return np.where(fail.any(axis=0), fail.argmax(axis=0), t.size)


def closed_form_sigma(id, x, path: NoisePath, functional: PathFunctional | None = None):
    """First grid time at which the explicit solution stops being defined at ``x``.

    Fails when the carried-back initial point leaves [0, 1], a radicand turns
    negative, or a denominator reaches zero (sign change against t = 0).
    Returns +inf if none of this happens on the path's grid.
    """
    entry = _entry(id)
    if entry.needs_functional is not None and functional is None:
        functional = default_functional(entry, path)
    _check_inputs(entry, path, functional)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    idx = _sigma_index(entry, xs, path, functional)
    out = np.append(path.t, np.inf)[idx]
    return float(out[0]) if np.ndim(x) == 0 else out


def evaluate_grid(id, x_grid, path: NoisePath, functional: PathFunctional | None = None):
    """Masked surface ``u[x, t]`` on the path's grid; invalid for ``t >= sigma(x)``."""
    from .characteristics import SolutionSurface

    entry = _entry(id)
    if entry.needs_functional is not None and functional is None:
        functional = default_functional(entry, path)
    _check_inputs(entry, path, functional)
    x = np.asarray(x_grid, dtype=float)
    t = path.t
    sig = _sigma_index(entry, x, path, functional)
    valid = np.arange(t.size)[None, :] < sig[:, None]
    i = functional.cumulative if functional is not None else np.zeros_like(t)
    u = entry.evaluate(x[:, None], t[None, :], path.values[None, :], i[None, :])
    u = np.where(valid, u, np.nan)
    return SolutionSurface(x, t.copy(), u, valid)
