"""Median-of-means Nash equilibrium seeking under heavy-tailed gradient noise."""

from .analysis import (
    ChungInstance,
    RateEnvelope,
    chung_oracle,
    envelope_shape,
    fit_envelope,
    fit_loglog_slope,
    tail_bound_test,
)
from .estimators import (
    BlockPlan,
    ThresholdParams,
    bias_corrected_estimate,
    clip,
    deviation_threshold,
    median,
    mom_estimate,
    plan_blocks,
)
from .game import (
    AffineGame,
    BoxConstraint,
    GameAnalysis,
    GameSpec,
    analyze,
    benchmark_game,
    project,
    solve_equilibrium,
)
from .harness import AggregateCurve, ExperimentSpec, read_csv, run_experiment, run_trials, write_csv
from .noise import CorruptionModel, NoiseModel, RngStream, certify_moment, corrupt, draw_noise, draw_pareto
from .seekers import Schedules, SeekerConfig, Trajectory, run_seeker, schedule_values

__version__ = "0.1.0"
