"""Equilibrium distributions of density dependent Markov population
processes on the integers: exact truncated solves, stochastic simulation,
the centred Poisson approximation and its Stein-method certificates."""

from .analysis import (
    ConcentrationStats,
    ConvergenceReport,
    ConvergenceRow,
    FitResult,
    concentration_stats,
    convergence_study,
    dynkin_residual,
    fit_loglog,
    kolmogorov_distance,
    shift_tv,
    tv_distance,
)
from .equilibrium import EquilibriumInfo, closed_form_bdi, default_bracket, find_equilibrium
from .errors import (
    ConfigError,
    MultipleRoots,
    NoSignChange,
    PopeqError,
    RateOverflow,
    SingularSystem,
    StuckState,
    UnstableEquilibrium,
    WindowTooSmall,
)
from .lattice import LatticeDist
from .model import (
    AffineRates,
    AssumptionReport,
    BdiGroupBirths,
    ModelSpec,
    TabulatedRates,
    WindowedFn,
    check_assumptions,
    down_remainder_coeff,
    eval_drift,
    eval_drift_prime,
    eval_rate,
    eval_variance_rate,
    generator_apply,
    generator_decompose,
    up_remainder_coeff,
)
from .simulate import OccupationEstimate, SimConfig, ssa_run
from .stationary import TruncationPolicy, centre, stationary_exact
from .stein import (
    BoundReport,
    CentredPoisson,
    HalfLine,
    SteinSolution,
    centred_poisson_pmf,
    stein_set_bound,
    stein_solve,
    stein_tv_bound,
)

__version__ = "0.1.0"
