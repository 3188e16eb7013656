"""Monte Carlo laboratory for the degenerate SDE dX = |X|^a dW (0 < a < 1/2).

Weak solutions by time change, conditioned and coupled simulation, reflected
relatives, and exact oracles for all of it.
"""

from .conditioned import (
    ConditioningMode,
    bessel3_correspondence_check,
    bessel3_hitting_prob,
    conditioned_ensemble,
    conditioned_green_integral,
    drift,
    green_bessel3,
    green_interval,
    mean_exit_time,
    simulate_conditioned,
)
from .coupled import (
    CoupledSample,
    chasing_experiment,
    coupled_ensemble,
    envelope_check,
    euler_coupled,
    excursion_agreement,
    r_identity_residual,
    transform_residuals,
    uniqueness_refinement,
)
from .reflected import (
    CoefficientPair,
    coefficient,
    fold_check,
    max_coupling_check,
    odd_extension,
    scale_function,
    scale_inverse,
    simulate_reflected,
    simulate_signed,
    skorokhod_map,
)
from .rng import BrownianPath, SeedId, bridge_crossing_prob, gen_path, substream
from .stats import Estimate, OracleTest, estimate, oracle_test, trend_test
from .timechange import (
    AdditiveFunctional,
    DiffusionPath,
    additive_functional,
    exit_sample,
    occupation_fraction,
    time_change_solution,
)

__version__ = "0.1.0"
