"""Remote state estimation over a packet-dropping channel.

A smart sensor runs a local Kalman filter and each step transmits either
its state estimate or its innovation through a lossy forward channel with
quantization; acknowledgments return over a noisy ternary feedback link.
This package provides the steady-state filter algebra, the receiver-side
augmented filtering recursions, optimal and suboptimal transmission-policy
solvers, and a seeded Monte Carlo simulation harness.
"""

__version__ = "0.1.0"

from .augmented import AugmentedModel, ScalarKernel, StructuredCov
from .channel import FeedbackChannel, ForwardChannel
from .config import RunConfig, build_system
from .errors import (ConfigError, DegenerateBelief, DomainError,
                     NonConvergence, RateOverflow, RemestError,
                     SingularInnovation, StructureViolation, UnknownConstant)
from .lti import SensorSteadyState, SystemModel, solve_dare
from .policy import (Belief, BeliefPolicy, CovEstimate, CovGrid, PolicyTable,
                     belief_update, belief_value_iteration,
                     relative_value_iteration, spsa_multistart,
                     spsa_threshold_search, stage_cost,
                     suboptimal_estimate_update, threshold_policy)
from .quantizer import Family, QuantizerSpec, RatePlan, select_rates
from .simulate import (BeliefDriven, EpisodeConfig, EpisodeResult, Fixed,
                       Suboptimal, Table, Threshold,
                       empirical_covariance_check, run_episode, sweep)

__all__ = [name for name in dir() if not name.startswith("_")]
