"""dormancy-lab: a numerical laboratory for a stochastic host-virus system
with contact-mediated host dormancy.

Exact Gillespie simulation of the six-type individual-based model, its
rescaled ODE limit, closed-form equilibria and invasion conditions, invader
branching processes, Monte-Carlo invasion experiments, and qualitative regime
maps over the (lambda2, q) parameter plane.
"""

__version__ = "0.1.0"

from .model import ModelParams, PopulationState, Transition, TransitionKind, enumerate_transitions, total_rate
from .ode import IntegratorConfig, integrate, rhs2, rhs3, rhs4, rhs6
from .equilibria import (
    EquilibriumReport,
    NoCoexistence,
    coexistence_equilibrium,
    dormancy_virus_equilibrium,
    host_virus_equilibrium,
    invasion_conditions,
    lv_equilibria,
)
from .stability import (
    BifurcationReport,
    SpectrumReport,
    bifurcation_sweep,
    classify_equilibrium,
    eigenvalues,
    jacobian3,
    jacobian4,
    jacobian6,
    matrix_A,
    matrix_F,
)
from .branching import (
    BranchingReport,
    bp_extinction_frequency,
    bp_rates_inv1,
    bp_rates_inv2,
    branching_report,
    extinction_probs,
    mean_matrix,
    perron,
    simulate_bp,
)
from .ssa import SsaConfig, SsaOutcome, StoppingSpec, NeighborhoodTarget, mean_path, run_ssa
from .invasion import InvasionExperiment, InvasionResult, PreconditionError, run_fate, run_invasion
from .regimes import RegimeCell, RegimeGrid, classify, sweep

__all__ = [name for name in dir() if not name.startswith("_")]
