"""Long-memory stochastic differential game toolkit.

Exact fractional Brownian path synthesis, singular-kernel quadrature,
explicit change-of-measure kernels, a Nash-equilibrium solver for
power-payoff games driven by long-memory noise, and a deterministic
Monte Carlo verification harness with a scenario-driven CLI.
"""

from .equilibrium import (
    EquilibriumSolution,
    GameSpec,
    GameValidationError,
    PlayerSpec,
    SolverError,
    StrategyTrace,
    TimeFunction,
    aggregate_noise_control,
    allocate_noise_control,
    budget_requirement,
    control_trace,
    density_trace,
    equilibrium_control,
    expected_terminal_payout,
    pointwise_objective,
    projected_running_power,
    projected_terminal_power,
    representation_integrand,
    shrunk_norm_sq,
    simulate_wealth,
    solve_multiplier,
    strategy_trace,
    terminal_payout,
    validate_game,
)
from .fbm import (
    CovarianceSpec,
    EmbeddingError,
    FbmPath,
    HurstExponent,
    TimeGrid,
    autocov,
    coarsen_increments,
    generate_from_covariance,
    generate_increment_matrix,
    generate_paths,
    increments,
    memory_kernel,
)
from .girsanov import (
    DensityPair,
    GirsanovKernel,
    apply_drift,
    density_pair,
    drift_removal_factor,
    running_density,
    terminal_density,
)
from .scenario import (
    Numerics,
    OutputSpec,
    Scenario,
    ScenarioError,
    parse_scenario,
    scenario_from_payload,
    scenario_to_payload,
    write_scenario,
)
from .singular_calculus import (
    FirstKindSolution,
    QuadratureConfig,
    QuadratureError,
    RealFunction,
    beta_fn,
    cell_average_vector,
    explicit_inverse,
    indicator,
    l2_isometry,
    memory_inner_product,
    riesz_potential,
    solve_first_kind,
    wiener_integral,
)
from .verify import CHECK_NAMES, McReport, VerifyConfig, run_suite

__version__ = "0.1.0"
