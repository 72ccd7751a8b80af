"""slatesim: a seedable simulator for time-budgeted slate recommendation.

Users examine a slate item by item, spending seconds of a finite time
budget per evaluation; value-based controllers (on-policy, off-policy, and
Monte-Carlo fitted iteration) learn to trade item relevance against
evaluation cost. Includes exact knapsack reference solvers, a cascade
user-choice model, and a deterministic sweep runner.
"""

from .catalog import (
    BudgetDistribution,
    CostDistribution,
    ItemCatalog,
    RelevanceParams,
    generate_synthetic_catalog,
    load_catalog,
    sample_costs,
    sample_initial_budget,
    save_catalog,
)
from .choice import SelectionProfile, UserResponse, bernoulli_click, sample_user_choice, selection_probabilities
from .config import RunConfig, load_config, save_config
from .env import EpisodeLog, SlateState, StepOutcome, affordable_items, reset, rollout_slate, step
from .agents import (
    TrainConfig,
    TrainedPolicy,
    candidate_actions,
    epsilon_greedy_select,
    evaluate_policy,
    featurize,
    load_policy,
    monte_carlo_returns,
    predict_q,
    qlearning_target,
    sarsa_target,
    save_policy,
    train,
)
from .experiment import (
    SweepConfig,
    SweepResult,
    abandon_rate,
    delta_report,
    effective_slate_size,
    play_rate,
    run_sweep,
    sign_test,
)
from .knapsack import KnapsackInstance, KnapsackSolution, greedy_ratio_slate, solve_bruteforce, solve_dp
from .rng import derive_stream

__version__ = "0.1.0"
