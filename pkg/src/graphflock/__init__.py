"""Linear-quadratic flocking games on graphs.

Semi-explicit Nash equilibria on transitive graphs via the Laplacian
spectrum, their large-population limits, mean-field epsilon-Nash
certificates on general graphs, the cooperative benchmark, and the
numerical verification machinery (Riccati residuals, best-response
audits, Monte Carlo simulation) that backs them.
"""

from .errors import (
    DomainError,
    GenerationError,
    GraphflockError,
    NumericError,
    ParameterError,
)
from .graphs import (
    Graph,
    Transitivity,
    build_graph,
    complete,
    cycle,
    degree_stats,
    edge_list_graph,
    erdos_renyi,
    graph_distances,
    random_regular,
    read_edge_list,
    torus,
    verify_transitive,
)
from .spectral import (
    EigenSystem,
    SpectralMeasure,
    eigendecompose,
    empirical_measure,
    integrate,
    laplacian,
    laplacian_eigensystem,
    limit_measure,
    measure_moments,
)
from .flow import FlockingSchedule, cycle_closed_form, q_eval, solve_f
from .equilibrium import (
    EquilibriumKernel,
    GaussianLaw,
    build_kernel,
    covariance_bound,
    equilibrium_control,
    game_value,
    game_value_spectral,
    limit_value,
    limit_variance,
    p_matrix,
    player_variance,
    riccati_residual,
    riccati_terminal_residual,
    state_law,
)
from .strategies import (
    BestResponse,
    EpsilonBounds,
    LinearProfile,
    best_response,
    cost_under_profile,
    deviation_gap,
    epsilon_bounds,
    equilibrium_profile,
    mf_profile,
    nash_audit,
    profile_costs,
    zero_profile,
)
from .cooperative import (
    CoopKernel,
    coop_kernel,
    coop_value,
    coop_variance,
)
from .montecarlo import (
    PathEnsemble,
    SimConfig,
    empirical_measure_test,
    ensemble_stats,
    simulate,
)

__version__ = "0.1.0"
