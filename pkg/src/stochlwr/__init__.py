"""Method of stochastic characteristics for the perturbed LWR traffic equation."""

from .characteristics import (
    CharacteristicFan,
    SolutionSurface,
    StoppingTimeEstimate,
    build_surface,
    detect_tau_inv,
    estimate_sigma,
    integrate_fan,
    integrate_sce,
    invert_xi,
    jacobian,
    stopping_times,
)
from .closedform import CATALOG, ClosedFormSolution, closed_form_sigma, evaluate, lookup, partials
from .model import (
    InitialCondition,
    PerturbationSpec,
    Scenario,
    f_drift,
    initial_condition,
    named_scenario,
    perturbation,
    sce_rhs,
    validate_scenario,
)
from .process import (
    NoisePath,
    PathFunctional,
    TimeGrid,
    bridge_refine,
    path_integral_exp,
    sample_brownian,
    to_geometric,
    zero_path,
)

__version__ = "0.1.0"
