"""Constant estimators against closed-form and quadrature oracles.

Oracles used here, all independent of the estimator code paths:

* alpha = 2: the field is t*Z, so E[exp(sup_grid(sqrt2 t Z - t^2))] is a
  one-dimensional normal integral, evaluated by adaptive quadrature; the
  interval constant also has the closed form 1 + S/sqrt(pi) in the continuum.
* alpha = 1: sqrt2 B(t) - t is a time-changed drifted Brownian motion, whose
  running-maximum law is explicit by the reflection principle; E[exp(max)]
  over [0, S] follows by one quadrature.
"""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from gexr.covmodels import (
    DriftFunction,
    LimitFieldSpec,
    ModelError,
    VarianceFunction,
)
from gexr.constants import (
    estimate_generalized_constant,
    estimate_generalized_piterbarg,
    estimate_joint_constant,
    estimate_pickands,
    estimate_piterbarg,
    local_step_exponent,
    window_sup_constant,
    window_sup_levels,
)
from gexr.functionals import FunctionalSpec, apply_functional
from gexr.mc import Estimate, ExtrapolationSchedule
from gexr.rng import RngStream
from gexr.simkit import GridSpec, LimitFieldSampler

SUP = FunctionalSpec.sup()


def quadratic_grid_constant(t_grid: np.ndarray) -> float:
    """Exact E[max_grid exp(sqrt2 t Z - t^2)] for the alpha=2 field by quadrature."""
    t = np.asarray(t_grid, dtype=float)

    def integrand(z):
        return math.exp(np.max(math.sqrt(2.0) * t * z - t**2)) * norm.pdf(z)

    # the integrand has a kink per grid point; full_output silences the
    # (harmless, ~1e-8) roundoff warning quad emits near them
    lo = integrate.quad(integrand, -12, 0, limit=400, full_output=1)[0]
    hi = integrate.quad(integrand, 0, 12, limit=800, full_output=1)[0]
    return lo + hi


def brownian_interval_constant(S: float) -> float:
    """Exact continuum E[sup_{[0,S]} exp(sqrt2 B(t) - t)], reflection principle.

    sqrt2 B(t) - t equals W(2t) - (1/2)(2t) in law; for M = sup of W(s) - cs
    over [0, T]: P(M > x) = Psi((x + cT)/sqrt T) + e^{-2cx} Psi((x - cT)/sqrt T).
    """
    c, T = 0.5, 2.0 * S

    def tail(x):
        rt = math.sqrt(T)
        return norm.sf((x + c * T) / rt) + math.exp(-2 * c * x) * norm.sf(
            (x - c * T) / rt
        )

    val, _ = integrate.quad(lambda x: math.exp(x) * tail(x), 0, 200, limit=400)
    return 1.0 + val


# ---------------------------------------------------------------------------
# generalized constant on a fixed grid


def test_single_point_domain_is_exactly_one():
    est = estimate_generalized_constant(
        LimitFieldSpec.fbm(1.0),
        DriftFunction.zero(),
        SUP,
        GridSpec(((0.0, 0.0, 1),)),
        200,
        RngStream(1),
    )
    assert est.value == 1.0
    assert est.stderr == 0.0


def test_degenerate_field_closed_form():
    h = DriftFunction(fn=lambda t: np.atleast_2d(t)[:, 0] ** 2)
    est = estimate_generalized_constant(
        LimitFieldSpec.degenerate_field(1),
        h,
        SUP,
        GridSpec.line(-1.0, 1.0, 9),
        100,
        RngStream(1),
    )
    # exp(sup(-t^2)) = 1, attained at the origin
    assert est.value == 1.0 and est.stderr == 0.0
    est = estimate_generalized_constant(
        LimitFieldSpec.degenerate_field(1),
        h,
        SUP,
        GridSpec.line(1.0, 2.0, 5),
        100,
        RngStream(1),
    )
    assert est.value == pytest.approx(math.exp(-1.0), abs=1e-14)


def test_generalized_constant_quadrature_oracle_alpha2():
    grid = GridSpec.line(0.0, 2.0, 65)
    est = estimate_generalized_constant(
        LimitFieldSpec.fbm(2.0), DriftFunction.zero(), SUP, grid, 40_000, RngStream(11)
    )
    exact = quadratic_grid_constant(grid.axis_values(0))
    assert abs(est.value - exact) < 3 * est.stderr + 1e-3


def test_window_identity_matches_direct_mc():
    eta = LimitFieldSpec.fbm(1.0)
    sams = window_sup_constant(eta, 1.0, 1 / 8, 40_000, RngStream(12))[0]
    win = Estimate.from_samples(sams)
    direct = estimate_generalized_constant(
        eta, DriftFunction.zero(), SUP, GridSpec.line(0.0, 1.0, 9), 40_000, RngStream(13)
    )
    comb = math.sqrt(win.stderr**2 + direct.stderr**2)
    assert abs(win.value - direct.value) < 3 * comb


def test_window_identity_exact_alpha2():
    grid = GridSpec.line(0.0, 2.0, 65)
    sams = window_sup_constant(LimitFieldSpec.fbm(2.0), 2.0, 1 / 32, 60_000, RngStream(8))[0]
    est = Estimate.from_samples(sams)
    exact = quadratic_grid_constant(grid.axis_values(0))
    assert abs(est.value - exact) < 3 * est.stderr


def test_window_validation():
    with pytest.raises(ModelError):
        window_sup_constant(LimitFieldSpec.fbm(1.0), 1.0, 0.3, 10, RngStream(1))
    with pytest.raises(ModelError):
        # refinement needs step-halving divisibility
        window_sup_levels(
            LimitFieldSpec.fbm(1.0), [1.5], 0.5, 10, RngStream(1), refine=3
        )


# ---------------------------------------------------------------------------
# CRN monotonicity (exact per sample)


def test_domain_drift_and_grid_monotonicity_per_sample():
    eta = LimitFieldSpec.fbm(1.0)
    grid = GridSpec.line(0.0, 2.0, 33)
    sampler = LimitFieldSampler(eta, grid)
    field = sampler.sample(RngStream(21).generator(), 500)
    w = math.sqrt(2.0) * field - sampler.variance()
    full = apply_functional(SUP, w, grid_ndim=1)
    # domain: sup over the left half never exceeds the full sup
    assert np.all(apply_functional(SUP, w[:, :17], grid_ndim=1) <= full)
    # grid: sup over every second point never exceeds the fine-grid sup
    assert np.all(apply_functional(SUP, w[:, ::2], grid_ndim=1) <= full)
    # drift: larger h gives a smaller functional, sample by sample
    t = grid.axis_values(0)
    assert np.all(
        apply_functional(SUP, w - 2 * t, grid_ndim=1)
        <= apply_functional(SUP, w - t, grid_ndim=1)
    )


def test_joint_constant_reduces_to_generalized_for_one_functional():
    eta = LimitFieldSpec.fbm(1.0)
    grid = GridSpec.line(0.0, 1.0, 9)
    a = estimate_joint_constant(
        eta, DriftFunction.zero(), [SUP], grid, 2000, RngStream(31)
    )
    b = estimate_generalized_constant(
        eta, DriftFunction.zero(), SUP, grid, 2000, RngStream(31)
    )
    assert a.value == b.value and a.stderr == b.stderr


def test_joint_constant_bounded_by_each_marginal():
    eta = LimitFieldSpec.fbm(1.0)
    grid = GridSpec.line(-1.0, 1.0, 17)
    gammas = [SUP, FunctionalSpec.mix(0.8)]
    joint = estimate_joint_constant(
        eta, DriftFunction.zero(), gammas, grid, 4000, RngStream(32)
    )
    for g in gammas:
        single = estimate_generalized_constant(
            eta, DriftFunction.zero(), g, grid, 4000, RngStream(32)
        )
        # same substream keys -> same paths -> exact per-sample domination
        assert joint.value <= single.value + 1e-12


# ---------------------------------------------------------------------------
# long-domain limits


def test_pickands_alpha2_quick():
    schedule = ExtrapolationSchedule(
        domain_sizes=(2.0, 4.0, 8.0), grid_steps=(1 / 8, 1 / 16), stop_rule=0.02
    )
    trace = estimate_pickands(LimitFieldSpec.fbm(2.0), schedule, 4000, RngStream(41))
    target = 1.0 / math.sqrt(math.pi)
    assert abs(trace.value - target) < 0.05 * target
    # per-domain interval constants track the closed form 1 + S/sqrt(pi)
    for est in trace.levels:
        S = est.meta["domain"]
        assert est.value == pytest.approx(1.0 + S / math.sqrt(math.pi), rel=0.03)


def test_pickands_alpha1_against_reflection_oracle():
    schedule = ExtrapolationSchedule(
        domain_sizes=(2.0, 4.0, 8.0), grid_steps=(1 / 16, 1 / 32), stop_rule=0.05
    )
    trace = estimate_pickands(LimitFieldSpec.fbm(1.0), schedule, 6000, RngStream(42))
    oracle_dq = (brownian_interval_constant(8.0) - brownian_interval_constant(4.0)) / 4.0
    assert abs(trace.value - oracle_dq) < 0.03 * oracle_dq + 3 * trace.estimate.stderr


def test_pickands_degenerate():
    schedule = ExtrapolationSchedule(domain_sizes=(2.0, 4.0, 8.0))
    trace = estimate_pickands(
        LimitFieldSpec.degenerate_field(1), schedule, 100, RngStream(1)
    )
    assert trace.status == "plateau"
    assert trace.value == 0.0
    assert [e.value for e in trace.levels] == [0.5, 0.25, 0.125]


def test_pickands_rejects_non_sup():
    with pytest.raises(ModelError):
        estimate_pickands(
            LimitFieldSpec.fbm(1.0),
            ExtrapolationSchedule(),
            10,
            RngStream(1),
            gamma=FunctionalSpec.inf(),
        )


def test_piterbarg_degenerate_drift_exact():
    h = DriftFunction(fn=lambda t: np.atleast_2d(t)[:, 0] ** 2)
    schedule = ExtrapolationSchedule(
        domain_sizes=(1.0, 2.0, 4.0), grid_steps=(1 / 8,)
    )
    trace = estimate_piterbarg(
        LimitFieldSpec.degenerate_field(1), h, schedule, 100, RngStream(1)
    )
    assert trace.status == "plateau"
    assert all(e.value == 1.0 for e in trace.levels)


def test_piterbarg_quadratic_drift_oracle():
    # eta = fBm(2), h = 3 t^2 on [-S, S]: exact limit sqrt((1+3)/3)
    gamma_coef = 3.0
    h = DriftFunction(
        fn=lambda t: gamma_coef * np.abs(np.atleast_2d(t)[:, 0]) ** 2
    )
    schedule = ExtrapolationSchedule(
        domain_sizes=(1.0, 2.0, 4.0), grid_steps=(1 / 16,), stop_rule=0.02
    )
    trace = estimate_piterbarg(
        LimitFieldSpec.fbm(2.0), h, schedule, 20_000, RngStream(43), domain="symmetric"
    )
    target = math.sqrt((1 + gamma_coef) / gamma_coef)
    assert abs(trace.value - target) < 0.02 * target + 3 * trace.estimate.stderr
    # right domain [0, S]: 1/2 + (1/2) sqrt((1+gamma)/gamma)
    trace_r = estimate_piterbarg(
        LimitFieldSpec.fbm(2.0), h, schedule, 20_000, RngStream(44), domain="right"
    )
    target_r = 0.5 + 0.5 * target
    assert abs(trace_r.value - target_r) < 0.02 * target_r + 3 * trace_r.estimate.stderr


def test_piterbarg_flat_drift_warns():
    schedule = ExtrapolationSchedule(domain_sizes=(1.0, 2.0, 4.0), grid_steps=(1 / 8,))
    trace = estimate_piterbarg(
        LimitFieldSpec.fbm(1.0), DriftFunction.zero(), schedule, 500, RngStream(1)
    )
    assert "drift_warning" in trace.estimate.meta


def test_piterbarg_domain_validation():
    with pytest.raises(ModelError):
        estimate_piterbarg(
            LimitFieldSpec.fbm(1.0),
            DriftFunction.zero(),
            ExtrapolationSchedule(),
            10,
            RngStream(1),
            domain="left",
        )


# ---------------------------------------------------------------------------
# sup-inf constant


def test_generalized_piterbarg_zero_window_zero_horizon():
    vf = VarianceFunction.fbm(0.8)
    schedule = ExtrapolationSchedule(
        domain_sizes=(0.0, 1.0, 2.0), grid_steps=(1 / 8,), stop_rule=0.05
    )
    trace = estimate_generalized_piterbarg(
        vf, 1.0, 0.0, schedule, 1 / 8, 500, RngStream(51)
    )
    # horizon 0, window 0: the functional is exp(X(0)) = 1 exactly
    assert trace.levels[0].value == 1.0 and trace.levels[0].stderr == 0.0
    # sup over nested horizons: levels nondecrease
    vals = [e.value for e in trace.levels]
    assert vals == sorted(vals)


def test_generalized_piterbarg_validation():
    vf = VarianceFunction.fbm(0.8)
    schedule = ExtrapolationSchedule(domain_sizes=(1.0, 2.0, 4.0), grid_steps=(1 / 8,))
    with pytest.raises(ModelError):
        estimate_generalized_piterbarg(vf, 0.0, 1.0, schedule, 1 / 8, 10, RngStream(1))
    with pytest.raises(ModelError):
        estimate_generalized_piterbarg(vf, 1.0, 0.3, schedule, 1 / 8, 10, RngStream(1))


def test_local_step_exponent():
    assert local_step_exponent(LimitFieldSpec.fbm(1.0)) == 0.5
    assert local_step_exponent(LimitFieldSpec.degenerate_field(1)) == 1.0
