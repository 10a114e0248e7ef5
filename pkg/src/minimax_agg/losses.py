"""Loss-function abstraction for transductive ensemble aggregation.

A binary loss is specified by its two partial losses: the loss of a
randomized prediction g in [-1, 1] when the true label is +1 or -1.
From the partials we derive the score function Gamma(g) = l_minus(g) -
l_plus(g), its pseudoinverse, the potential well Psi(m) that carries the
per-example inner optimization, and the optimal prediction map g(m).

Eight standard losses ship with closed forms for Psi, Psi', and g; the
generic numeric path (bisection on the monotone score function) covers
user-defined losses and is used to cross-check the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "LossSpec",
    "ConvexityReport",
    "REGISTRY_NAMES",
    "get_loss",
    "registry_losses",
    "partial_loss",
    "score",
    "score_inverse",
    "potential_well",
    "potential_well_slope",
    "predict_one",
    "generic_potential_well",
    "generic_potential_well_slope",
    "generic_predict",
    "expected_loss",
    "convexity_condition_check",
    "loss_from_table",
]

# Bisection budget for inverting the score function. The loop converges to
# adjacent floats long before 200 iterations; the hard cap is a guard.
_BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class LossSpec:
    """A binary loss given by its partial losses and their derivatives.

    ``partial_plus``/``partial_minus`` accept scalars or ndarrays on
    [-1, 1]. ``gamma_lo``/``gamma_hi`` are Gamma(-1)/Gamma(1) and may be
    infinite. The ``closed_*`` callables, when present, are vectorized
    closed forms cross-checked against the generic path in the tests.
    """

    name: str
    partial_minus: Callable
    partial_plus: Callable
    dpartial_minus: Callable
    dpartial_plus: Callable
    gamma_lo: float
    gamma_hi: float
    closed_psi: Optional[Callable] = None
    closed_psi_slope: Optional[Callable] = None
    closed_predict: Optional[Callable] = None
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ConvexityReport:
    condition_C_holds: bool
    worst_margin: float


def _check_domain(g):
    g = np.asarray(g, dtype=float)
    if np.any(g < -1.0) or np.any(g > 1.0):
        raise ValueError("prediction g outside [-1, 1]")
    return g


def _as_result(x, scalar: bool):
    return float(x) if scalar else np.asarray(x, dtype=float)


def partial_loss(spec: LossSpec, label_sign: int, g) -> float:
    """Evaluate l_plus(g) or l_minus(g) depending on the label sign."""
    scalar = np.isscalar(g)
    g = _check_domain(g)
    if label_sign == 1:
        out = spec.partial_plus(g)
    elif label_sign == -1:
        out = spec.partial_minus(g)
    else:
        raise ValueError("label_sign must be +1 or -1")
    return _as_result(out, scalar)


def score(spec: LossSpec, g):
    """Score function Gamma(g) = l_minus(g) - l_plus(g).

    Returns the (possibly infinite) stored endpoint values at g = +-1 so
    that losses with singular partials there stay well-defined.
    """
    scalar = np.isscalar(g)
    g = _check_domain(g)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.asarray(spec.partial_minus(g) - spec.partial_plus(g), dtype=float)
    out = np.where(g == -1.0, spec.gamma_lo, out)
    out = np.where(g == 1.0, spec.gamma_hi, out)
    return _as_result(out, scalar)


def _score_interior(spec: LossSpec, g: float) -> float:
    with np.errstate(divide="ignore", over="ignore"):
        return float(spec.partial_minus(g) - spec.partial_plus(g))


def _score_inverse_scalar(spec: LossSpec, m: float) -> float:
    if np.isnan(m):
        raise ValueError("score_inverse: m is NaN")
    if m <= spec.gamma_lo:
        return -1.0
    if m >= spec.gamma_hi:
        return 1.0

    lo, hi = -1.0, 1.0
    # Bracket so that Gamma(lo) < m <= Gamma(hi), expanding inward from
    # singular endpoints where the partials cannot be evaluated.
    if np.isinf(spec.gamma_lo):
        delta = 0.25
        while delta > 1e-17 and _score_interior(spec, -1.0 + delta) >= m:
            delta *= 0.25
        lo = -1.0 + delta
        if _score_interior(spec, lo) >= m:
            return lo
    if np.isinf(spec.gamma_hi):
        delta = 0.25
        while delta > 1e-17 and _score_interior(spec, 1.0 - delta) < m:
            delta *= 0.25
        hi = 1.0 - delta
        if _score_interior(spec, hi) < m:
            return 1.0

    # Pseudoinverse inf{g : Gamma(g) >= m}: keep Gamma(hi) >= m > Gamma(lo)
    # so flat segments resolve to their left edge.
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _score_interior(spec, mid) >= m:
            hi = mid
        else:
            lo = mid
    return hi


def _score_inverse_vector(spec: LossSpec, m: np.ndarray) -> np.ndarray:
    """Elementwise bisection with the score endpoints held virtually at
    gamma_lo/gamma_hi, so midpoints stay strictly interior and singular
    partials at g = +-1 are never evaluated."""
    if np.any(np.isnan(m)):
        raise ValueError("score_inverse: m is NaN")
    lo = np.full(m.shape, -1.0)
    hi = np.full(m.shape, 1.0)
    active = (m > spec.gamma_lo) & (m < spec.gamma_hi)
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        ok = active & (mid > lo) & (mid < hi)
        if not ok.any():
            break
        probe = np.where(ok, mid, 0.0)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = np.asarray(spec.partial_minus(probe) - spec.partial_plus(probe),
                             dtype=float)
        ge = val >= m
        hi = np.where(ok & ge, mid, hi)
        lo = np.where(ok & ~ge, mid, lo)
    out = hi
    out = np.where(m <= spec.gamma_lo, -1.0, out)
    out = np.where(m >= spec.gamma_hi, 1.0, out)
    return out


def score_inverse(spec: LossSpec, m):
    """Pseudoinverse of the score function, clamped to [-1, 1].

    Total on the reals: m <= Gamma(-1) maps to -1 and m >= Gamma(1) to +1.
    """
    if np.isscalar(m):
        return _score_inverse_scalar(spec, float(m))
    return _score_inverse_vector(spec, np.asarray(m, dtype=float))


def generic_potential_well(spec: LossSpec, m):
    """Potential well evaluated through the numeric score inverse."""
    scalar = np.isscalar(m)
    m = np.atleast_1d(np.asarray(m, dtype=float))
    low = m <= spec.gamma_lo
    high = m >= spec.gamma_hi
    interior = ~(low | high)
    g = np.where(interior, _score_inverse_vector(spec, np.where(interior, m, 0.0)),
                 0.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        mid = np.asarray(spec.partial_plus(g) + spec.partial_minus(g), dtype=float)
    out = np.where(low, -m + 2.0 * float(spec.partial_minus(-1.0)),
                   np.where(high, m + 2.0 * float(spec.partial_plus(1.0)), mid))
    return _as_result(out[0] if scalar else out, scalar)


def _slope_quotient(spec: LossSpec, g: float) -> float:
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        dm = float(spec.dpartial_minus(g))
        dp = float(spec.dpartial_plus(g))
        q = (dm + dp) / (dm - dp)
    if math.isfinite(q):
        return q
    # A partial derivative blows up only at an endpoint, where the
    # quotient limit is the matching linear-branch slope.
    return math.copysign(1.0, g)


def generic_potential_well_slope(spec: LossSpec, m):
    """Subgradient of the potential well via the derivative quotient.

    At the two knots the interior one-sided value is returned, which is a
    valid subgradient since Psi is convex and 1-Lipschitz.
    """
    scalar = np.isscalar(m)
    m = np.atleast_1d(np.asarray(m, dtype=float))
    low = m < spec.gamma_lo
    high = m > spec.gamma_hi
    interior = ~(low | high)
    g = np.where(interior, _score_inverse_vector(spec, np.where(interior, m, 0.0)),
                 0.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        dm = np.asarray(spec.dpartial_minus(g), dtype=float)
        dp = np.asarray(spec.dpartial_plus(g), dtype=float)
        q = (dm + dp) / (dm - dp)
    # a partial derivative blows up only at an endpoint, where the
    # quotient limit is the matching linear-branch slope
    q = np.where(np.isfinite(q), q, np.copysign(1.0, g))
    out = np.where(low, -1.0, np.where(high, 1.0, q))
    return _as_result(out[0] if scalar else out, scalar)


def generic_predict(spec: LossSpec, m):
    """Optimal prediction map via the numeric score inverse."""
    return score_inverse(spec, m)


def potential_well(spec: LossSpec, m):
    """Potential well Psi(m); closed form when available."""
    if spec.closed_psi is not None:
        scalar = np.isscalar(m)
        return _as_result(spec.closed_psi(np.asarray(m, dtype=float)), scalar)
    return generic_potential_well(spec, m)


def potential_well_slope(spec: LossSpec, m):
    """Subgradient Psi'(m) in [-1, 1]; closed form when available."""
    if spec.closed_psi_slope is not None:
        scalar = np.isscalar(m)
        return _as_result(spec.closed_psi_slope(np.asarray(m, dtype=float)), scalar)
    return generic_potential_well_slope(spec, m)


def predict_one(spec: LossSpec, m):
    """Minimax-optimal prediction g(m) for a margin m."""
    if spec.closed_predict is not None:
        scalar = np.isscalar(m)
        return _as_result(spec.closed_predict(np.asarray(m, dtype=float)), scalar)
    return generic_predict(spec, m)


def expected_loss(spec: LossSpec, z, g) -> float:
    """Average loss (1/n) sum_j l(z_j, g_j) against randomized labels z.

    Terms whose label coefficient is exactly zero are dropped so that
    infinite partial losses at the opposite endpoint do not poison the
    average (the 0 * inf limit is 0 here).
    """
    z = np.asarray(z, dtype=float)
    g = np.asarray(g, dtype=float)
    if z.shape != g.shape or z.ndim != 1 or z.size == 0:
        raise ValueError("z and g must be equal-length nonempty vectors")
    if np.any(np.abs(z) > 1.0):
        raise ValueError("labels z outside [-1, 1]")
    g = _check_domain(g)
    wp = 0.5 * (1.0 + z)
    wm = 0.5 * (1.0 - z)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        lp = np.asarray(spec.partial_plus(g), dtype=float)
        lm = np.asarray(spec.partial_minus(g), dtype=float)
        tp = np.where(wp == 0.0, 0.0, wp * lp)
        tm = np.where(wm == 0.0, 0.0, wm * lm)
    return float(np.mean(tp + tm))


def convexity_condition_check(spec: LossSpec, grid_size: int = 101) -> ConvexityReport:
    """Check l_minus' * l_plus'' >= l_minus'' * l_plus' on an interior grid.

    Second derivatives come from central differences of the supplied first
    derivatives (step 1e-5); the inequality is allowed slack 1e-6. This is
    the sufficient-and-necessary convexity condition for the potential
    well, checked diagnostically off the solve path.
    """
    if grid_size < 3:
        raise ValueError("grid_size must be >= 3")
    x = np.linspace(-1.0, 1.0, grid_size + 2)[1:-1]
    h = 1e-5
    dm = np.asarray(spec.dpartial_minus(x), dtype=float)
    dp = np.asarray(spec.dpartial_plus(x), dtype=float)
    d2m = (np.asarray(spec.dpartial_minus(x + h), dtype=float)
           - np.asarray(spec.dpartial_minus(x - h), dtype=float)) / (2.0 * h)
    d2p = (np.asarray(spec.dpartial_plus(x + h), dtype=float)
           - np.asarray(spec.dpartial_plus(x - h), dtype=float)) / (2.0 * h)
    margin = dm * d2p - d2m * dp
    worst = float(np.min(margin))
    return ConvexityReport(condition_C_holds=worst >= -1e-6, worst_margin=worst)


# --------------------------------------------------------------------------
# Registry losses
# --------------------------------------------------------------------------

def _clip(x):
    return np.clip(x, -1.0, 1.0)


def _softplus_pair(m):
    # ln(1 + e^m) + ln(1 + e^-m), overflow-safe
    a = np.abs(m)
    return a + 2.0 * np.log1p(np.exp(-a))


def _zero_one() -> LossSpec:
    return LossSpec(
        name="zero_one",
        partial_minus=lambda g: 0.5 * (1.0 + g),
        partial_plus=lambda g: 0.5 * (1.0 - g),
        dpartial_minus=lambda g: np.full_like(np.asarray(g, float), 0.5),
        dpartial_plus=lambda g: np.full_like(np.asarray(g, float), -0.5),
        gamma_lo=-1.0,
        gamma_hi=1.0,
        closed_psi=lambda m: np.maximum(1.0, np.abs(m)),
        closed_psi_slope=lambda m: np.where(np.abs(m) <= 1.0, 0.0, np.sign(m)),
        closed_predict=_clip,
    )


def _log() -> LossSpec:
    ln2 = math.log(2.0)

    def lm(g):
        with np.errstate(divide="ignore"):
            return ln2 - np.log1p(-np.asarray(g, float))

    def lp(g):
        with np.errstate(divide="ignore"):
            return ln2 - np.log1p(np.asarray(g, float))

    return LossSpec(
        name="log",
        partial_minus=lm,
        partial_plus=lp,
        dpartial_minus=lambda g: 1.0 / (1.0 - np.asarray(g, float)),
        dpartial_plus=lambda g: -1.0 / (1.0 + np.asarray(g, float)),
        gamma_lo=-np.inf,
        gamma_hi=np.inf,
        closed_psi=_softplus_pair,
        closed_psi_slope=lambda m: np.tanh(0.5 * m),
        closed_predict=lambda m: np.tanh(0.5 * m),
    )


def _square() -> LossSpec:
    return LossSpec(
        name="square",
        partial_minus=lambda g: (0.5 * (1.0 + g)) ** 2,
        partial_plus=lambda g: (0.5 * (1.0 - g)) ** 2,
        dpartial_minus=lambda g: 0.5 * (1.0 + np.asarray(g, float)),
        dpartial_plus=lambda g: -0.5 * (1.0 - np.asarray(g, float)),
        gamma_lo=-1.0,
        gamma_hi=1.0,
        closed_psi=lambda m: np.where(np.abs(m) <= 1.0, 0.5 * (m * m + 1.0), np.abs(m)),
        closed_psi_slope=_clip,
        closed_predict=_clip,
    )


def _cw(c: float) -> LossSpec:
    if not 0.0 <= c <= 1.0:
        raise ValueError("cw cost parameter c must lie in [0, 1]")
    lo, hi = 2.0 * c - 2.0, 2.0 * c

    def psi(m):
        return np.select([m <= lo, m >= hi], [-m, m],
                         default=(2.0 * c - 1.0) * m + 4.0 * c * (1.0 - c))

    return LossSpec(
        name=f"cw:{c:g}",
        partial_minus=lambda g: c * (1.0 + g),
        partial_plus=lambda g: (1.0 - c) * (1.0 - g),
        dpartial_minus=lambda g: np.full_like(np.asarray(g, float), c),
        dpartial_plus=lambda g: np.full_like(np.asarray(g, float), c - 1.0),
        gamma_lo=lo,
        gamma_hi=hi,
        closed_psi=psi,
        closed_psi_slope=lambda m: np.select(
            [m < lo, m > hi], [-1.0, 1.0], default=2.0 * c - 1.0),
        closed_predict=lambda m: _clip(m + 1.0 - 2.0 * c),
        params={"c": c},
    )


def _exponential() -> LossSpec:
    k = math.e - 1.0 / math.e
    return LossSpec(
        name="exponential",
        partial_minus=np.exp,
        partial_plus=lambda g: np.exp(-np.asarray(g, float)),
        dpartial_minus=np.exp,
        dpartial_plus=lambda g: -np.exp(-np.asarray(g, float)),
        gamma_lo=-k,
        gamma_hi=k,
        closed_psi=lambda m: np.where(np.abs(m) <= k, np.hypot(2.0, m),
                                      np.abs(m) + 2.0 / math.e),
        closed_psi_slope=lambda m: np.where(np.abs(m) <= k, m / np.hypot(2.0, m),
                                            np.sign(m)),
        closed_predict=lambda m: _clip(np.arcsinh(0.5 * m)),
    )


def _logistic() -> LossSpec:
    edge = 2.0 * math.log1p(1.0 / math.e)
    return LossSpec(
        name="logistic",
        partial_minus=lambda g: np.logaddexp(0.0, np.asarray(g, float)),
        partial_plus=lambda g: np.logaddexp(0.0, -np.asarray(g, float)),
        dpartial_minus=lambda g: 1.0 / (1.0 + np.exp(-np.asarray(g, float))),
        dpartial_plus=lambda g: -1.0 / (1.0 + np.exp(np.asarray(g, float))),
        gamma_lo=-1.0,
        gamma_hi=1.0,
        closed_psi=lambda m: np.where(np.abs(m) <= 1.0, _softplus_pair(m),
                                      np.abs(m) + edge),
        closed_psi_slope=lambda m: np.where(np.abs(m) <= 1.0, np.tanh(0.5 * m),
                                            np.sign(m)),
        closed_predict=_clip,
    )


def _hellinger() -> LossSpec:
    def psi(m):
        mc = np.clip(m, -1.0, 1.0)
        s = mc * np.sqrt(2.0 - mc * mc)
        mid = (2.0 - np.sqrt(np.maximum(0.0, 0.5 * (1.0 - s)))
               - np.sqrt(np.maximum(0.0, 0.5 * (1.0 + s))))
        return np.where(np.abs(m) <= 1.0, mid, np.abs(m))

    def gmap(m):
        mc = np.clip(m, -1.0, 1.0)
        return np.where(np.abs(m) <= 1.0, mc * np.sqrt(2.0 - mc * mc), np.sign(m))

    def slope(m):
        mc = np.clip(m, -1.0, 1.0)
        return np.where(np.abs(m) <= 1.0, mc / np.sqrt(2.0 - mc * mc), np.sign(m))

    def dlm(g):
        with np.errstate(divide="ignore"):
            return 1.0 / (2.0 * np.sqrt(2.0 - 2.0 * np.asarray(g, float)))

    def dlp(g):
        with np.errstate(divide="ignore"):
            return -1.0 / (2.0 * np.sqrt(2.0 + 2.0 * np.asarray(g, float)))

    return LossSpec(
        name="hellinger",
        partial_minus=lambda g: 1.0 - np.sqrt(0.5 * (1.0 - np.asarray(g, float))),
        partial_plus=lambda g: 1.0 - np.sqrt(0.5 * (1.0 + np.asarray(g, float))),
        dpartial_minus=dlm,
        dpartial_plus=dlp,
        gamma_lo=-1.0,
        gamma_hi=1.0,
        closed_psi=psi,
        closed_psi_slope=slope,
        closed_predict=gmap,
    )


def _adaboost() -> LossSpec:
    def lm(g):
        g = np.asarray(g, float)
        with np.errstate(divide="ignore"):
            return np.sqrt((1.0 + g) / (1.0 - g))

    def lp(g):
        g = np.asarray(g, float)
        with np.errstate(divide="ignore"):
            return np.sqrt((1.0 - g) / (1.0 + g))

    def dlm(g):
        g = np.asarray(g, float)
        with np.errstate(divide="ignore"):
            return 1.0 / ((1.0 - g) ** 1.5 * np.sqrt(1.0 + g))

    def dlp(g):
        g = np.asarray(g, float)
        with np.errstate(divide="ignore"):
            return -1.0 / ((1.0 + g) ** 1.5 * np.sqrt(1.0 - g))

    return LossSpec(
        name="adaboost",
        partial_minus=lm,
        partial_plus=lp,
        dpartial_minus=dlm,
        dpartial_plus=dlp,
        gamma_lo=-np.inf,
        gamma_hi=np.inf,
        # The tabulated sum of square roots telescopes to sqrt(m^2 + 4).
        closed_psi=lambda m: np.hypot(m, 2.0),
        closed_psi_slope=lambda m: m / np.hypot(m, 2.0),
        closed_predict=lambda m: m / np.hypot(m, 2.0),
    )


def _absolute(name: str) -> LossSpec:
    # Partial losses 1 -+ g: same Psi and g as zero_one up to scaling
    # (Psi(m) = 2 * Psi_01(m/2), g(m) = g_01(m/2)).
    return LossSpec(
        name=name,
        partial_minus=lambda g: 1.0 + np.asarray(g, float),
        partial_plus=lambda g: 1.0 - np.asarray(g, float),
        dpartial_minus=lambda g: np.ones_like(np.asarray(g, float)),
        dpartial_plus=lambda g: -np.ones_like(np.asarray(g, float)),
        gamma_lo=-2.0,
        gamma_hi=2.0,
        closed_psi=lambda m: np.maximum(2.0, np.abs(m)),
        closed_psi_slope=lambda m: np.where(np.abs(m) <= 2.0, 0.0, np.sign(m)),
        closed_predict=lambda m: _clip(0.5 * m),
    )


_FACTORIES = {
    "zero_one": _zero_one,
    "log": _log,
    "square": _square,
    "exponential": _exponential,
    "logistic": _logistic,
    "hellinger": _hellinger,
    "adaboost": _adaboost,
    "absolute": lambda: _absolute("absolute"),
    "hinge": lambda: _absolute("hinge"),
}

REGISTRY_NAMES = tuple(list(_FACTORIES) + ["cw:<c>"])


def get_loss(name: str) -> LossSpec:
    """Look up a registry loss; ``cw:<c>`` selects the cost-weighted loss."""
    if name.startswith("cw"):
        if name == "cw":
            return _cw(0.5)
        if name.startswith("cw:"):
            try:
                c = float(name.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad cost parameter in {name!r}") from None
            return _cw(c)
    try:
        return _FACTORIES[name]()
    except KeyError:
        raise ValueError(
            f"unknown loss {name!r}; available: {', '.join(REGISTRY_NAMES)}"
        ) from None


def registry_losses(cw_costs=(0.1, 0.25, 0.5, 0.9)):
    """All registry losses, with the cost-weighted loss at several costs."""
    specs = [get_loss(n) for n in _FACTORIES]
    specs.extend(_cw(c) for c in cw_costs)
    return specs


def loss_from_table(name: str, grid, values_minus, values_plus) -> LossSpec:
    """Build a loss from tabulated partial losses via monotone interpolation.

    ``grid`` must be strictly increasing within [-1, 1] and include both
    endpoints; the partials must be monotone in the proper directions.
    """
    from scipy.interpolate import PchipInterpolator

    grid = np.asarray(grid, dtype=float)
    vm = np.asarray(values_minus, dtype=float)
    vp = np.asarray(values_plus, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise ValueError("grid must be a 1-d array with at least 3 points")
    if grid[0] != -1.0 or grid[-1] != 1.0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must increase strictly from -1 to 1")
    if vm.shape != grid.shape or vp.shape != grid.shape:
        raise ValueError("partial-loss tables must match the grid length")
    if np.any(np.diff(vm) < 0) or np.any(np.diff(vp) > 0):
        raise ValueError("l_minus must be nondecreasing and l_plus nonincreasing")

    im = PchipInterpolator(grid, vm)
    ip = PchipInterpolator(grid, vp)
    return LossSpec(
        name=name,
        partial_minus=im,
        partial_plus=ip,
        dpartial_minus=im.derivative(),
        dpartial_plus=ip.derivative(),
        gamma_lo=float(vm[0] - vp[0]),
        gamma_hi=float(vm[-1] - vp[-1]),
    )
