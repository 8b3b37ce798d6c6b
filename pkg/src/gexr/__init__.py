"""Simulation and estimation toolkit for extremes of Gaussian fields.

Simulates Gaussian processes and fields with stationary increments, estimates
the constants appearing in the tail asymptotics of their suprema (per-unit,
drifted, sup-inf, and generalized-functional variants), and numerically
audits the uniform tail approximations and double-maxima bounds those
constants calibrate.
"""

from .covmodels import (
    DriftFunction,
    LimitFieldComponent,
    LimitFieldSpec,
    ModelError,
    ThresholdedFamilySpec,
    VarianceFunction,
)
from .constants import (
    LevelTrace,
    estimate_generalized_constant,
    estimate_generalized_piterbarg,
    estimate_joint_constant,
    estimate_pickands,
    estimate_piterbarg,
    window_sup_constant,
)
from .doublesum import (
    DoubleMaximaConfig,
    bonferroni_bracket,
    estimate_double_maxima,
    eval_double_bound,
    fit_bound_constant,
    separation,
)
from .functionals import FunctionalSpec, apply_functional, verify_functional
from .mc import Estimate, ExtrapolationSchedule
from .rng import RngStream
from .simkit import (
    FbmSampler,
    GridSpec,
    LimitFieldSampler,
    ResidualSampler,
    SamplePath,
    SimulationError,
    StatIncrSampler,
    dump_paths,
    load_paths,
    simulate_conditional_residual,
    simulate_fgn,
    simulate_limit_field,
    simulate_statincr,
)
from .tailprob import (
    AsymptoticSetup,
    ConditionalSampler,
    conditional_tail,
    crude_mc_tail,
    eval_mainm_formula,
    eval_pickands_formula,
    survival_psi,
    uniform_ratio_audit,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
