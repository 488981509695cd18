"""Exact simulation and limit analysis of k-unary chemical reaction networks."""

from .crn_model import (
    CrnSpec,
    distance_from_source,
    falling_factorial,
    figure1_spec,
    is_irreducible,
    kappa_plus,
    lattice_class,
    validate_spec,
)
from .entropy import (
    BumpFunction,
    entropy_F,
    entropy_gradient,
    entropy_H,
    entropy_hessian,
    functional_equation_residual,
    hessian_quadratic_form,
)
from .equilibrium import (
    bounds_mM,
    eliminate_species,
    fast_equilibrium_map,
    neumann_series,
    reduce_to_slow,
    solve_invariant,
)
from .errors import *  # noqa: F401,F403
from .experiments import ExperimentConfig, load_config, relaxation_report, run_verification
from .limit_dynamics import (
    integrate_full_ode,
    integrate_reduced_ode,
    integrate_slow_ode,
    single_species_limit,
)
from .networkfile import load_network, parse_network_file
from .simulator import (
    alpha_initial_state,
    exit_time_diagnostics,
    occupation_measure,
    scale_trajectory,
    simulate,
    simulate_grid,
    step,
    time_average,
)
from .stationary import (
    compare_empirical_stationary,
    conditioned_poisson,
    product_form_logweight,
    sample_stationary,
)

__version__ = "0.1.0"
