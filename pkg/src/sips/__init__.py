"""Three-tier simulator and analysis toolkit for virus-patch dynamics on
directed networks: an exact 3^n-state Markov chain, node-level ODE models
with saturating rate families, and spectral/equilibrium analysis that
predicts the asymptotic regime."""

from .dynamics import (PopulationState, SteadyStateResult, Trajectory,
                       derivative, integrate, steady_state)
from .equilibria import (EquilibriumResult, RegimeReport, classify,
                         full_spectral_report, infected_equilibrium,
                         mixed_equilibrium, patched_equilibrium)
from .exactsim import (ChainState, GeneratorMatrix, SampledTrajectory,
                       build_generator, gillespie, marginal_flux_residual,
                       marginal_trajectory, marginals, solve_forward)
from .harness import (ComparisonReport, ExperimentConfig, deviation,
                      emit_report, run_sweep)
from .netmodel import (RateNetwork, RateRanges, ValidationReport,
                       generate_scale_free, generate_small_world, load, save,
                       validate)
from .rates import (RateFamily, RateModel, ThresholdMatrices, build_model,
                    eval_rates, threshold_matrices, validate_conditions)
from .spectral import (SpectralReport, extinction_sufficient_checks,
                       perron_pair, spectral_abscissa, spectral_radius,
                       virus_survival_checks)

__version__ = "0.1.0"
