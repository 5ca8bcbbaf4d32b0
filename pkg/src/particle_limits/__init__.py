"""Exact simulation of exclusion and birth-death random walks on the discrete torus,
with reference PDE solvers and scaling-limit convergence studies."""
from .bdrw import BdrwParams, RunOutcome, bdrw_run, bdrw_small_oracle, bdrw_total_rate
from .harness import (
    BlowupComparison,
    ConvergenceReport,
    ScalingSchedule,
    blowup_study,
    check_a2,
    high_density_study,
    hydrodynamic_study,
)
from .lattice import (
    Configuration,
    DensityField,
    EmpiricalMeasure,
    density_field,
    empirical_measure,
    sample_initial_density,
    sample_initial_exclusion,
    sup_norm_distance,
)
from .pde import (
    BlowupCriterionReport,
    PdeGrid,
    PdeSolution,
    check_blowup_criterion,
    solve_heat,
    solve_reaction_diffusion,
)
from .profiles import profile_from_dict
from .rates import RateFunctions, rates_from_dict
from .rng import RngStream
from .ssep import SsepParams, Trajectory, ssep_run, ssep_step_distribution_oracle

__version__ = "0.1.0"
