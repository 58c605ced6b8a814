"""Secure multi-sensor fusion estimation under measurement injection attacks.

Joint recursive estimation of a linear system's state and the additive
attack signal on each vulnerable sensor, pairwise error cross-covariance
propagation, and matrix-weighted fusion of the local estimates, with a
Monte Carlo harness and a plain augmented Kalman filter baseline.
"""

from .attack import (AttackSpec, assemble_measurement, attack_trace,
                     generate_attack, inject_attack, none_attack)
from .baseline import AkfState, akf_gain, akf_step, init_akf
from .cross_covariance import CrossState, init_cross, propagate_cross
from .errors import (ConfigurationError, EstimatorError, FusionError,
                     InputError, SecFusionError)
from .fusion import (FusedEstimate, FusionWeights, assemble_sigma,
                     compute_weights, fuse_states, state_block)
from .local_estimator import (GainPair, Innovation, LocalEstimatorState,
                              LocalInit, XiTriple, compute_gains, compute_xi,
                              extract_estimates, init_local,
                              innovate_and_update, propagate_covariances,
                              pphi_given_gain, px_given_gain)
from .model import (AugmentedSubsystem, EnhancedSensor, ObservabilityReport,
                    SensorSpec, StepMatrix, SystemModel,
                    build_augmented_subsystem, build_enhanced_sensor,
                    check_observability, cross_process_noise, measure,
                    step_truth)
from .simulation import (BUILTIN_SCENARIOS, ConsistencyReport, MseReport,
                         OptimalityReport, RunRecord, ScenarioConfig,
                         Schedule, builtin_ieee4bus, builtin_scalar,
                         builtin_scalar_consistency, builtin_scalar_pair,
                         compute_schedule, covariance_consistency_probe,
                         gain_optimality_probe, observability_reports,
                         run_monte_carlo, run_rng, run_scenario,
                         simulate_run, time_averaged)

__version__ = "0.1.0"
