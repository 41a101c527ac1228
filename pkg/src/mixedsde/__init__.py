"""SDEs driven jointly by Brownian motion and fractional Brownian motion.

The package simulates the Gaussian drivers, transforms coefficient sets
between the Ito (mixed) and Stratonovich/rough formulations via the drift
correction (1/2) sum_i D_b^(i) b^(i), integrates both formulations with
Euler- and Milstein-type schemes, and measures strong convergence rates and
smoothing rates in reproducible experiments.
"""

from ._version import __version__
from .calculus import (
    IntegralRule,
    LevyAreaTable,
    area_distance,
    build_levy_area,
    chen_extend,
    discrete_integral,
    rough_sum,
)
from .experiments import (
    ConfigError,
    CovReport,
    ExperimentSpec,
    RateReport,
    fit_rate,
    run_covcheck,
    run_equivalence,
    run_rate,
    run_wongzakai,
)
from .models import (
    MIXED,
    ROUGH,
    CoefficientSet,
    SdeModel,
    VectorField,
    apply_D,
    constant_field,
    ito_stratonovich_correction,
    jacobian_check,
    make_model,
    mixed_from_rough,
    model_info,
    rough_from_mixed,
    zoo_names,
)
from .paths import (
    FbmParams,
    PathGenerationError,
    RngSeed,
    SamplePath,
    TimeGrid,
    fbm_covariance,
    holder_seminorm,
    read_path,
    sample_brownian,
    sample_fbm,
    smooth_fbm,
    smoothed_derivative,
    write_path,
)
from .solvers import (
    SCHEMES,
    NonFiniteStateError,
    SolveOutput,
    reference_solution,
    solve_milstein_rough,
    solve_natural_euler,
    solve_skewed_euler,
    solve_smoothed_euler,
    strong_error,
)
