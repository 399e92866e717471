"""Robustness of local tolls in atomic congestion games to misspecified costs."""

__version__ = "0.1.0"

from .game import (  # noqa: E402
    BasisSet,
    DeployedTolls,
    Game,
    GameError,
    agent_cost,
    load_profile,
    resource_cost,
    rosenthal_potential,
    system_cost,
    toll_value,
)
from .equilibrium import (  # noqa: E402
    EnumerationError,
    NashSet,
    StateSpace,
    best_response_dynamics,
    enumerate_nash,
    is_nash,
    optimal_cost,
    poa,
)
from .robust import (  # noqa: E402
    build_index,
    build_lp,
    construct_worst_case_game,
    solve_robust_poa,
    verify_worst_case,
)
from .tolls import (  # noqa: E402
    TollMechanismSpec,
    build_deployed_tolls,
    certify_epsilon,
    design,
    lambda_scale,
    marginal_cost_toll,
    optimal_constant_toll,
    optimal_local_toll,
)
from .experiments import (  # noqa: E402
    PerturbationProtocol,
    run_monte_carlo,
    sweep_lambda,
    sweep_robust_poa,
)
from .io import load_game, save_game  # noqa: E402
