"""Double-maxima estimator, cross-term bound, constant fitting, Bonferroni.

Exact multivariate-normal rectangle probabilities on small joint grids serve
as the oracle for the joint-exceedance Monte Carlo.
"""

import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from gexr.covmodels import ModelError
from gexr.doublesum import (
    DoubleMaximaConfig,
    bonferroni_bracket,
    estimate_double_maxima,
    eval_double_bound,
    fit_bound_constant,
    separation,
)
from gexr.mc import Estimate
from gexr.rng import RngStream
from gexr.tailprob import survival_psi


def gauss_corr(scale=1.0):
    def corr(u, s, t):
        s = np.atleast_2d(np.asarray(s, dtype=float))
        t = np.atleast_2d(np.asarray(t, dtype=float))
        d2 = ((s[:, None, :] - t[None, :, :]) ** 2).sum(axis=-1)
        return np.exp(-d2 / scale**2)

    return corr


def make_config(offset2, m1=1.2, m2=1.2, corr=None, c1=1.0, beta=2.0, s2=2.0, dim=1):
    cell = tuple((0.0, 1.0) for _ in range(dim))
    return DoubleMaximaConfig(
        correlation=corr or gauss_corr(2.0),
        cell1=cell,
        cell2=cell,
        offset1=(0.0,) * dim,
        offset2=offset2,
        m1_fn=lambda u: m1,
        m2_fn=lambda u: m2,
        m_fn=lambda u: max(m1, m2),
        c1=c1,
        beta=beta,
        s2=s2,
    )


# ---------------------------------------------------------------------------
# separation


def test_separation_oracles():
    assert separation([(0.0, 2.0)], [(1.0, 3.0)]) == 0.0  # overlap
    assert separation([(0.0, 1.0)], [(3.0, 4.0)]) == 2.0
    # per-axis gaps 1 and 3
    assert separation(
        [(0.0, 1.0), (0.0, 1.0)], [(2.0, 3.0), (4.0, 5.0)]
    ) == pytest.approx(math.sqrt(10.0))
    # symmetric
    assert separation([(3.0, 4.0)], [(0.0, 1.0)]) == 2.0


def test_separation_rejects_bad_boxes():
    with pytest.raises(ModelError):
        separation([(1.0, 0.0)], [(0.0, 1.0)])
    with pytest.raises(ModelError):
        separation([(0.0, 1.0)], [(0.0, 1.0), (0.0, 1.0)])
    with pytest.raises(ModelError):
        separation([], [])


# ---------------------------------------------------------------------------
# joint-exceedance MC vs exact rectangle probabilities


def _exact_joint(cfg, u, points_per_axis):
    """1 - P(A <= m1) - P(B <= m2) + P(A <= m1, B <= m2), exact."""
    box_a, box_b = cfg.boxes()

    def grid(box):
        axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in box]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    pts_a, pts_b = grid(box_a), grid(box_b)
    pts = np.concatenate([pts_a, pts_b])
    cov = cfg.correlation(u, pts, pts)
    m1, m2 = cfg.m1_fn(u), cfg.m2_fn(u)
    lim = np.concatenate([np.full(len(pts_a), m1), np.full(len(pts_b), m2)])

    def cdf(c, upper):
        mvn = multivariate_normal(
            mean=np.zeros(c.shape[0]), cov=c, allow_singular=True, seed=1
        )
        return float(mvn.cdf(upper))

    n_a = len(pts_a)
    p_a = cdf(cov[:n_a, :n_a], lim[:n_a])
    p_b = cdf(cov[n_a:, n_a:], lim[n_a:])
    p_ab = cdf(cov, lim)
    return 1.0 - p_a - p_b + p_ab


def test_double_maxima_matches_exact_oracle():
    cfg = make_config((2.0,))
    exact = _exact_joint(cfg, 0.0, 3)
    est = estimate_double_maxima(cfg, 0.0, 3, 200_000, RngStream(81))
    assert abs(est.value - exact) < 4 * est.stderr + 5e-4
    assert est.meta["separation"] == 1.0


def test_double_maxima_never_binding_second_box():
    # m2 = -1e9 never binds: joint tail reduces to the single-box tail of A
    cfg = make_config((5.0,), m2=-1e9)
    box_a, _ = cfg.boxes()
    pts = np.linspace(0.0, 1.0, 3)[:, None]
    cov = cfg.correlation(0.0, pts, pts)
    mvn = multivariate_normal(mean=np.zeros(3), cov=cov, allow_singular=True, seed=1)
    exact = 1.0 - float(mvn.cdf(np.full(3, 1.2)))
    est = estimate_double_maxima(cfg, 0.0, 3, 200_000, RngStream(82))
    assert abs(est.value - exact) < 4 * est.stderr + 5e-4


def test_double_maxima_point_cap():
    cfg = make_config((0.0, 0.0), dim=2)
    with pytest.raises(ModelError):
        estimate_double_maxima(cfg, 0.0, 64, 100, RngStream(1))


def test_config_validation():
    with pytest.raises(ModelError):
        make_config((2.0,), s2=1.0)
    with pytest.raises(ModelError):
        make_config((2.0,), c1=-1.0)
    cfg = make_config((2.0,))
    chk = cfg.check(1.0)
    assert chk["floor_ok"] and not chk["threshold_ok"] is None


# ---------------------------------------------------------------------------
# bound evaluation


def test_bound_at_zero_separation():
    cfg = make_config((0.5,))  # overlapping boxes, F = 0
    val = eval_double_bound(cfg, 0.0, c=3.0)
    assert val == pytest.approx(3.0 * 2.0**2 * survival_psi(1.2), rel=1e-14)


def test_bound_s2_scaling():
    a = eval_double_bound(make_config((4.0,), s2=2.0), 0.0, c=1.0)
    b = eval_double_bound(make_config((4.0,), s2=4.0), 0.0, c=1.0)
    assert b == pytest.approx(4.0 * a, rel=1e-14)  # s2^(2d), d = 1


def test_bound_exponential_factor():
    # F = ln 16, beta = 1, c1 = 8: exp(-8 * ln16 / 8) = 1/16
    f = math.log(16.0)
    cfg = make_config((1.0 + f,), c1=8.0, beta=1.0)
    near = make_config((0.5,), c1=8.0, beta=1.0)
    assert eval_double_bound(cfg, 0.0) == pytest.approx(
        eval_double_bound(near, 0.0) / 16.0, rel=1e-12
    )


# ---------------------------------------------------------------------------
# constant fitting


def test_fit_single_config_is_tight():
    cfg = make_config((3.0,))
    est = Estimate(1e-3, 1e-4, 1000, {"ci_exact": (8e-4, 1.2e-3)})
    report = fit_bound_constant([(cfg, 0.0)], [est])
    unit = eval_double_bound(cfg, 0.0, c=1.0)
    assert report.fitted_c == pytest.approx(1.2e-3 / unit, rel=1e-12)
    assert report.table[0]["slack"] == pytest.approx(0.0, abs=1e-15)
    assert report.passed


def test_fit_requires_matching_lengths():
    cfg = make_config((3.0,))
    with pytest.raises(ModelError):
        fit_bound_constant([(cfg, 0.0)], [])


def test_fit_gaussian_family_passes():
    # correlation exp(-d^2/4) decays at least like the bound's exp(-F^2/8)
    configs = [
        (make_config((1.0 + f,), m1=1.8, m2=1.8, c1=1.0, beta=2.0), 0.0)
        for f in (0.0, 1.0, 2.0)
    ]
    estimates = [
        estimate_double_maxima(cfg, u, 4, 60_000, RngStream(83, (i,)))
        for i, (cfg, u) in enumerate(configs)
    ]
    report = fit_bound_constant(configs, estimates)
    assert report.passed and not report.growing_with_separation
    assert math.isfinite(report.fitted_c)
    assert all(row["slack"] >= -1e-15 for row in report.table)


def test_fit_flags_non_decaying_correlation():
    # near-equicorrelated field: joint probability will not decay with
    # separation, so the required constant explodes along the schedule
    def flat(u, s, t):
        s = np.atleast_2d(np.asarray(s, dtype=float))
        t = np.atleast_2d(np.asarray(t, dtype=float))
        d2 = ((s[:, None, :] - t[None, :, :]) ** 2).sum(axis=-1)
        return 0.9 + 0.1 * np.exp(-400.0 * d2)

    configs = [
        (make_config((1.0 + f,), m1=1.5, m2=1.5, corr=flat, c1=8.0, beta=2.0), 0.0)
        for f in (0.0, 2.0, 4.0)
    ]
    estimates = [
        estimate_double_maxima(cfg, u, 3, 40_000, RngStream(84, (i,)))
        for i, (cfg, u) in enumerate(configs)
    ]
    report = fit_bound_constant(configs, estimates)
    assert report.growing_with_separation
    assert not report.passed


# ---------------------------------------------------------------------------
# Bonferroni bracket


def test_bonferroni_single_cell():
    tail = Estimate(0.02, 0.001, 100)
    lower, upper = bonferroni_bracket([tail], [])
    assert lower.value == upper.value == 0.02
    assert upper.stderr == pytest.approx(0.001)


def test_bonferroni_two_cells_no_overlap():
    tails = [Estimate(0.01, 0.001, 100), Estimate(0.02, 0.002, 100)]
    lower, upper = bonferroni_bracket(tails, [Estimate(0.0, 0.0, 100)])
    assert upper.value == pytest.approx(0.03)
    assert lower.value == pytest.approx(0.03)
    assert upper.stderr == pytest.approx(math.sqrt(1e-6 + 4e-6))


def test_bonferroni_three_cells_with_pairs():
    tails = [Estimate(0.01, 0.0, 100)] * 3
    pairs = [Estimate(1e-4, 0.0, 100)] * 6  # ordered pairs
    lower, upper = bonferroni_bracket(tails, pairs)
    assert upper.value == pytest.approx(0.03)
    assert lower.value == pytest.approx(0.0294)


def test_bonferroni_requires_cells():
    with pytest.raises(ModelError):
        bonferroni_bracket([], [])


def test_bonferroni_brackets_exact_union():
    # three correlated scalar cells; exact union by inclusion-exclusion
    rho = 0.3
    cov = np.full((3, 3), rho) + (1 - rho) * np.eye(3)
    m = 1.5

    def orthant(idx):
        c = cov[np.ix_(idx, idx)]
        mvn = multivariate_normal(mean=np.zeros(len(idx)), cov=c, seed=1)
        return 1.0 - float(mvn.cdf(np.full(len(idx), m)))

    # P(union) via inclusion-exclusion on survival events
    def joint_exceed(idx):
        # P(all coords in idx exceed m) by inclusion-exclusion over subsets
        from itertools import combinations

        total = 0.0
        k = len(idx)
        for r in range(1, k + 1):
            for sub in combinations(idx, r):
                c = cov[np.ix_(sub, sub)]
                mvn = multivariate_normal(mean=np.zeros(r), cov=c, seed=1)
                total += (-1) ** (r + 1) * (1.0 - float(mvn.cdf(np.full(r, m))))
        # total is P(union of sub-events); need P(intersection): use
        # inclusion-exclusion the other way around below instead
        return total

    p1 = survival_psi(m)
    union = joint_exceed([0, 1, 2])  # P(at least one exceeds)
    tails = [Estimate(p1, 0.0, 100)] * 3
    # pairwise joint exceedance P(i and j exceed) = p_i + p_j - P(i or j)
    pair = 2 * p1 - joint_exceed([0, 1])
    pairs = [Estimate(pair, 0.0, 100)] * 3  # three unordered pairs
    lower, upper = bonferroni_bracket(tails, pairs)
    assert lower.value - 1e-6 <= union <= upper.value + 1e-6
