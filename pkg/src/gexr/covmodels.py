"""Variance/correlation models and numerical checks of their structure.

The central object is :class:`VarianceFunction`: a variance function
``sigma2(t)`` of a centered process with stationary increments, together
with its regular-variation indices at 0 and at infinity.  Limit fields are
additive combinations of independent one-dimensional components
(:class:`LimitFieldSpec`), and threshold-dependent families of unit-variance
fields are described by :class:`ThresholdedFamilySpec`.

The ``check_*`` functions are numerical audits of the structural conditions
the estimators rely on (threshold growth, drift normalization, convergence of
normalized increment variances to a limit field, local Hoelder control).
They are pure functions returning report objects, never raising on a failed
check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "VarianceFunction",
    "DriftFunction",
    "LimitFieldComponent",
    "LimitFieldSpec",
    "ThresholdedFamilySpec",
    "fgn_autocovariance",
    "check_regular_variation",
    "check_threshold_growth",
    "check_drift_limit",
    "check_increment_limit",
    "variance_function_from_json",
]


class ModelError(ValueError):
    """Invalid or out-of-range model specification."""


# ---------------------------------------------------------------------------
# variance functions


@dataclass(frozen=True)
class VarianceFunction:
    """Variance function sigma2(t) of a stationary-increment process.

    ``alpha0`` / ``alpha_inf`` are the regular-variation indices of sigma2
    at 0 and at infinity; both lie in (0, 2].  ``t_range`` bounds the
    evaluable lags for tabulated models; queries outside it are errors,
    not extrapolations.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    alpha0: float
    alpha_inf: float
    kind: str = "custom"
    t_range: tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        for name, a in (("alpha0", self.alpha0), ("alpha_inf", self.alpha_inf)):
            if not 0.0 < a <= 2.0:
                raise ModelError(f"{name} must lie in (0, 2], got {a}")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12):
            raise ModelError("variance function evaluated at negative lag")
        t = np.abs(t)
        lo, hi = self.t_range
        pos = t > 0
        if np.any(pos & ((t < lo - 1e-300) | (t > hi))):
            raise ModelError(
                f"lag outside evaluable range {self.t_range} of {self.kind} model"
            )
        out = np.zeros_like(t)
        if np.any(pos):
            out[pos] = self.fn(t[pos])
        if np.any(out < 0):
            raise ModelError("variance function returned a negative value")
        return out

    @staticmethod
    def fbm(alpha: float) -> "VarianceFunction":
        """sigma2(t) = t**alpha, alpha in (0, 2]."""
        if not 0.0 < alpha <= 2.0:
            raise ModelError(f"fBm exponent must lie in (0, 2], got {alpha}")
        return VarianceFunction(
            fn=lambda t: t**alpha, alpha0=alpha, alpha_inf=alpha, kind=f"fbm({alpha})"
        )

    @staticmethod
    def sum_of_fbm(weights: Sequence[float], alphas: Sequence[float]) -> "VarianceFunction":
        """sigma2(t) = sum_i w_i t**alpha_i with w_i > 0."""
        w = np.asarray(weights, dtype=float)
        a = np.asarray(alphas, dtype=float)
        if len(w) != len(a) or len(w) == 0 or np.any(w <= 0):
            raise ModelError("sum_of_fbm needs matching positive weights and exponents")
        if np.any((a <= 0) | (a > 2)):
            raise ModelError("sum_of_fbm exponents must lie in (0, 2]")
        # near 0 the smallest exponent dominates; near infinity the largest
        return VarianceFunction(
            fn=lambda t: (w * t[..., None] ** a).sum(axis=-1),
            alpha0=float(a.min()),
            alpha_inf=float(a.max()),
            kind="sumOfFbm",
        )

    @staticmethod
    def from_table(
        table: Sequence[tuple[float, float]], alpha0: float, alpha_inf: float
    ) -> "VarianceFunction":
        """Tabulated sigma2, interpolated log-log linearly between knots."""
        pts = np.asarray(table, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ModelError("table must be a list of [t, var] pairs, at least two")
        t, v = pts[:, 0], pts[:, 1]
        if np.any(t <= 0) or np.any(v <= 0):
            raise ModelError("table knots must have positive lag and variance")
        order = np.argsort(t)
        lt, lv = np.log(t[order]), np.log(v[order])

        def interp(x):
            return np.exp(np.interp(np.log(x), lt, lv))

        return VarianceFunction(
            fn=interp,
            alpha0=alpha0,
            alpha_inf=alpha_inf,
            kind="table",
            t_range=(float(t.min()), float(t.max())),
        )


def variance_function_from_json(doc: str | dict) -> VarianceFunction:
    """Load a model from a JSON document.

    Supported forms::

        {"kind": "fbm", "alpha": 1.5}
        {"kind": "sumOfFbm", "weights": [...], "alphas": [...]}
        {"kind": "custom", "table": [[t, var], ...], "alpha0": a, "alphaInf": b}
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    kind = doc.get("kind")
    if kind == "fbm":
        return VarianceFunction.fbm(float(doc["alpha"]))
    if kind == "sumOfFbm":
        return VarianceFunction.sum_of_fbm(doc["weights"], doc["alphas"])
    if kind == "custom":
        return VarianceFunction.from_table(
            doc["table"], float(doc["alpha0"]), float(doc["alphaInf"])
        )
    raise ModelError(f"unknown variance model kind: {kind!r}")


def fgn_autocovariance(alpha: float, step: float, lag: int) -> float:
    """Autocovariance at integer ``lag`` of stationary-increment noise.

    For increments of a process with Var X(t) = t**alpha on a grid of
    spacing ``step``:  gamma(k) = step**alpha/2 * (|k+1|**a + |k-1|**a - 2|k|**a).
    """
    if not 0.0 < alpha <= 2.0:
        raise ModelError(f"alpha must lie in (0, 2], got {alpha}")
    if step <= 0:
        raise ModelError("step must be positive")
    if lag < 0:
        raise ModelError("lag must be nonnegative")
    k = float(lag)
    return 0.5 * step**alpha * (
        abs(k + 1) ** alpha + abs(k - 1) ** alpha - 2 * abs(k) ** alpha
    )


# ---------------------------------------------------------------------------
# drift functions and limit fields


@dataclass(frozen=True)
class DriftFunction:
    """A drift h on the index set, h(0) = 0, optionally threshold-dependent.

    ``family(u, tau, t)`` gives the pre-limit drift h_{u,tau}; the
    normalized family g**2 * h_{u,tau} is expected to converge to ``fn``.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    family: Callable[[float, float, np.ndarray], np.ndarray] | None = None

    def __call__(self, t) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(t, dtype=float)), dtype=float)

    @staticmethod
    def zero() -> "DriftFunction":
        return DriftFunction(fn=lambda t: np.zeros(np.shape(t)[:1] or ()))


@dataclass(frozen=True)
class LimitFieldComponent:
    """One axis-aligned component of an additive limit field.

    ``mode`` is the scaling limit of the axis: 0 and inf select the local /
    global power-law regimes of ``base``; a finite positive mode freezes the
    base process at that scale.
    """

    axis: int
    scale: float
    mode: float
    base: VarianceFunction

    def __post_init__(self):
        if self.scale < 0:
            raise ModelError("component scale must be nonnegative")
        if self.mode < 0:
            raise ModelError("component mode must be nonnegative (possibly inf)")

    def unit_variance(self, t) -> np.ndarray:
        """Variance of the component's unit process W at coordinate t."""
        t = np.abs(np.asarray(t, dtype=float))
        if self.mode == 0.0:
            return t**self.base.alpha0
        if math.isinf(self.mode):
            return t**self.base.alpha_inf
        return self.base(self.mode * t) / self.base(self.mode)

    def variance(self, t) -> np.ndarray:
        return self.scale * self.unit_variance(t)


@dataclass(frozen=True)
class LimitFieldSpec:
    """Additive limit field: eta(t) = sum_i sqrt(c_i) W_i(t_{axis_i}).

    Components are independent.  The empty component list is the degenerate
    field eta == 0, legal everywhere downstream.
    """

    dim: int
    components: tuple[LimitFieldComponent, ...] = ()

    def __post_init__(self):
        for c in self.components:
            if not 0 <= c.axis < self.dim:
                raise ModelError(f"component axis {c.axis} outside field dimension")
        if self.components and sum(c.scale for c in self.components) <= 0:
            raise ModelError("at least one component must have positive scale")

    @property
    def degenerate(self) -> bool:
        return not self.components or all(c.scale == 0 for c in self.components)

    def variance(self, points: np.ndarray) -> np.ndarray:
        """Analytic Var eta at an (N, dim) array of points (or (N,) if dim=1)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[1] != self.dim:
            raise ModelError("points do not match field dimension")
        out = np.zeros(pts.shape[0])
        for c in self.components:
            out += c.variance(pts[:, c.axis])
        return out

    @staticmethod
    def fbm(alpha: float, scale: float = 1.0) -> "LimitFieldSpec":
        """One-dimensional field sqrt(scale) * B_alpha."""
        comp = LimitFieldComponent(0, scale, 0.0, VarianceFunction.fbm(alpha))
        return LimitFieldSpec(dim=1, components=(comp,))

    @staticmethod
    def degenerate_field(dim: int = 1) -> "LimitFieldSpec":
        return LimitFieldSpec(dim=dim, components=())


# ---------------------------------------------------------------------------
# threshold-dependent families


@dataclass(frozen=True)
class ThresholdedFamilySpec:
    """A family of unit-variance centered Gaussian fields with thresholds.

    ``correlation(u, tau, s, t)`` evaluates the correlation between field
    values at point arrays s (N, d) and t (M, d), returning an (N, M) matrix.
    ``threshold(u, tau)`` is the exceedance level; ``index_grid(u)`` the
    finite set of tau values active at u.  ``drift`` (optional) holds the
    denominator perturbation h_{u,tau}; absent means h == 0.
    """

    correlation: Callable[[float, float, np.ndarray, np.ndarray], np.ndarray]
    threshold: Callable[[float, float], float]
    index_grid: Callable[[float], Sequence[float]] = field(default=lambda u: (0.0,))
    drift: DriftFunction | None = None
    structure: Callable[[float, float, np.ndarray, np.ndarray], np.ndarray] | None = None

    def corr_matrix(self, u: float, tau: float, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        r = np.asarray(self.correlation(u, tau, pts, pts), dtype=float)
        d = np.diag(r)
        if np.any(np.abs(d - 1.0) > 1e-8):
            raise ModelError("family correlation is not unit-variance on the grid")
        return r

    def drift_values(self, u: float, tau: float, points: np.ndarray) -> np.ndarray:
        if self.drift is None or self.drift.family is None:
            return np.zeros(len(points))
        return np.asarray(self.drift.family(u, tau, np.asarray(points, dtype=float)))


# ---------------------------------------------------------------------------
# numerical checks


@dataclass(frozen=True)
class CheckReport:
    """Outcome of a structural check: per-level trace plus a verdict."""

    levels: tuple[float, ...]
    deviations: tuple[float, ...]
    passed: bool
    detail: dict = field(default_factory=dict)

    @property
    def max_deviation(self) -> float:
        return max(self.deviations) if self.deviations else 0.0


def check_regular_variation(
    vf: VarianceFunction,
    limit_point: str,
    ratios: Sequence[float] = (2.0, 4.0),
    t_grid: Sequence[float] | None = None,
    tolerance: float = 0.05,
) -> CheckReport:
    """Check sigma2(lam*t)/sigma2(t) -> lam**index along a geometric grid.

    ``limit_point`` is "zero" or "infinity".  Pass/fail is judged by the
    relative deviation at the extreme of the grid; the default 5% tolerance
    reflects that slowly varying factors converge slowly on desk-scale grids.
    """
    if limit_point not in ("zero", "infinity"):
        raise ModelError("limit_point must be 'zero' or 'infinity'")
    at_zero = limit_point == "zero"
    index = vf.alpha0 if at_zero else vf.alpha_inf
    if t_grid is None:
        lo, hi = vf.t_range
        if at_zero:
            start = max(1e-6, lo)
            t_grid = np.geomspace(min(1.0, hi / max(ratios)), start, 8)
        else:
            stop = min(1e6, hi / max(ratios))
            t_grid = np.geomspace(max(1.0, lo), stop, 8)
    t_grid = np.asarray(t_grid, dtype=float)
    devs = []
    for t in t_grid:
        dev = 0.0
        for lam in ratios:
            ratio = float(vf(lam * t) / vf(t))
            target = lam**index
            dev = max(dev, abs(ratio - target) / target)
        devs.append(dev)
    # grid extreme = last entry (grids are ordered toward the limit point)
    passed = devs[-1] <= tolerance
    return CheckReport(
        levels=tuple(t_grid),
        deviations=tuple(devs),
        passed=passed,
        detail={"index": index, "ratios": tuple(ratios), "tolerance": tolerance},
    )


def check_threshold_growth(
    family: ThresholdedFamilySpec, u_schedule: Sequence[float]
) -> CheckReport:
    """Check that inf over tau of the threshold grows along the u-schedule."""
    infs = [
        min(family.threshold(u, tau) for tau in family.index_grid(u)) for u in u_schedule
    ]
    growing = all(b > a for a, b in zip(infs, infs[1:]))
    return CheckReport(
        levels=tuple(u_schedule),
        deviations=tuple(infs),
        passed=growing and all(v > 0 for v in infs),
        detail={"min_thresholds": tuple(infs)},
    )


def check_drift_limit(
    family: ThresholdedFamilySpec,
    h: DriftFunction,
    u_schedule: Sequence[float],
    points: np.ndarray,
    tolerance: float = 1e-2,
) -> CheckReport:
    """Check sup |g**2 h_{u,tau}(t) - h(t)| decreases to below tolerance."""
    if family.drift is None or family.drift.family is None:
        raise ModelError("family has no drift component to check")
    pts = np.asarray(points, dtype=float)
    target = h(pts)
    devs = []
    for u in u_schedule:
        worst = 0.0
        for tau in family.index_grid(u):
            g = family.threshold(u, tau)
            vals = g**2 * np.asarray(family.drift.family(u, tau, pts))
            worst = max(worst, float(np.max(np.abs(vals - target))))
        devs.append(worst)
    decreasing = all(b <= a + 1e-12 for a, b in zip(devs, devs[1:]))
    return CheckReport(
        levels=tuple(u_schedule),
        deviations=tuple(devs),
        passed=decreasing and devs[-1] <= tolerance,
        detail={"tolerance": tolerance},
    )


def check_increment_limit(
    family: ThresholdedFamilySpec,
    eta: LimitFieldSpec,
    u_schedule: Sequence[float],
    points: np.ndarray,
    tolerance: float = 5e-2,
    holder_exponents: Sequence[float] | None = None,
) -> CheckReport:
    """Convergence of g**2 Var(Z(t)-Z(0)) to 2 Var eta(t), plus Hoelder ratio.

    Uses only one-dimensional variance evaluations (correlation against the
    origin), which is the formulation that stays cheap on fine grids.  The
    Hoelder part reports, per candidate exponent, the worst ratio of the
    normalized increment variance against sum_i |t_i - s_i|**a, and keeps
    the best-fitting exponent.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != eta.dim and pts.shape[0] == eta.dim:
        pts = pts.T
    origin = np.zeros((1, pts.shape[1]))
    target = 2.0 * eta.variance(pts)
    if holder_exponents is None:
        alphas = [c.base.alpha0 for c in eta.components] or [1.0]
        ainfs = [c.base.alpha_inf for c in eta.components] or [1.0]
        a0 = min(alphas)
        holder_exponents = sorted({a0 / 2.0, a0, min(a0, min(ainfs))})
    devs = []
    holder_best = []
    for u in u_schedule:
        worst = 0.0
        ratios = {a: 0.0 for a in holder_exponents}
        for tau in family.index_grid(u):
            g = family.threshold(u, tau)
            r0 = np.asarray(family.correlation(u, tau, pts, origin)).reshape(-1)
            incr = g**2 * 2.0 * (1.0 - r0)
            worst = max(worst, float(np.max(np.abs(incr - target))))
            nz = np.any(pts != 0.0, axis=1)
            if np.any(nz):
                for a in holder_exponents:
                    denom = (np.abs(pts[nz]) ** a).sum(axis=1)
                    ratios[a] = max(ratios[a], float(np.max(incr[nz] / denom)))
        devs.append(worst)
        holder_best.append(min(ratios, key=lambda a: ratios[a]))
    stabilized = devs[-1] <= tolerance
    return CheckReport(
        levels=tuple(u_schedule),
        deviations=tuple(devs),
        passed=stabilized,
        detail={
            "tolerance": tolerance,
            "holder_exponents": tuple(holder_exponents),
            "best_holder_exponent": holder_best[-1] if holder_best else None,
        },
    )
