"""Brute-force certification of the game value, independent of the slack path.

``grid_minimax`` evaluates the minimax game directly on grids over the
predictions and the adversary's labels, touching only the partial losses
(never the potential well or slack function), so it can certify the main
solver. The inner maximization over the label grid is exact: a
cutting-plane loop accumulates adversary scenarios until the restricted
min-max matches the full grid adversary's best response.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from . import game as game_mod
from . import losses
from .game import EnsembleProblem, InfeasibleProblemError

__all__ = ["GridSpec", "GridMinimaxResult", "SandwichReport",
           "grid_minimax", "feasible_z_sample", "sandwich_check",
           "random_feasible_problem"]

_BIG = 1e30          # stand-in for infinite partial losses at g = +-1
_FEAS_SLACK = 1e-12


@dataclass(frozen=True)
class GridSpec:
    resolution: int = 201
    max_n: int = 3
    max_p: int = 3

    def __post_init__(self):
        if self.resolution < 11 or self.resolution % 2 == 0:
            raise ValueError("resolution must be odd and >= 11")


@dataclass(frozen=True)
class GridMinimaxResult:
    value: float
    g_grid: np.ndarray
    tolerance: float


@dataclass(frozen=True)
class SandwichReport:
    lower: float
    upper: float
    value: float
    passed: bool


def _loss_tables(spec, gv):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        lp = np.asarray(spec.partial_plus(gv), dtype=float)
        lm = np.asarray(spec.partial_minus(gv), dtype=float)
    lp = np.nan_to_num(lp, posinf=_BIG, neginf=-_BIG)
    lm = np.nan_to_num(lm, posinf=_BIG, neginf=-_BIG)
    return lp, lm


def _feasible_mask(F, b, zv, n):
    shape = (zv.size,) * n
    feas = np.ones(shape, dtype=bool)
    for i in range(F.shape[0]):
        corr = np.zeros(shape)
        for ax in range(n):
            idx = [None] * n
            idx[ax] = slice(None)
            corr = corr + F[i, ax] * zv[tuple(idx)]
        feas &= corr / n >= b[i] - _FEAS_SLACK
    return feas


def _scenario_tensor(lp, lm, z, n):
    """sum_j [(1+z_j) l_plus(g_j) + (1-z_j) l_minus(g_j)] / (2n) over the g grid."""
    out = 0.0
    for j in range(n):
        t = (0.5 * (1.0 + z[j]) * lp + 0.5 * (1.0 - z[j]) * lm) / n
        idx = [None] * n
        idx[j] = slice(None)
        out = out + t[tuple(idx)]
    return out


def _grid_best_response(lp, lm, zv, g_idx, feas, n):
    """Exact max over the feasible label grid of the loss at a fixed g."""
    w = (lp[list(g_idx)] - lm[list(g_idx)]) / (2.0 * n)
    const = float(np.sum((lp[list(g_idx)] + lm[list(g_idx)]) / (2.0 * n)))
    corr = 0.0
    for j in range(n):
        idx = [None] * n
        idx[j] = slice(None)
        corr = corr + w[j] * zv[tuple(idx)]
    masked = np.where(feas, corr, -np.inf)
    flat = int(np.argmax(masked))
    best_idx = np.unravel_index(flat, masked.shape)
    value = const + float(masked[best_idx])
    z_best = zv[np.asarray(best_idx)]
    return value, z_best


def grid_minimax(problem: EnsembleProblem, grid: Optional[GridSpec] = None,
                 max_scenarios: int = 64) -> GridMinimaxResult:
    """Directly evaluate min over grid g of max over feasible grid z.

    The grid adversary under-approximates the polytope max, so the value
    carries a one-sided tolerance budget built from grid spacing and the
    partial losses' derivative bounds on the grid.
    """
    if grid is None:
        grid = GridSpec()
    if problem.variant != "plain":
        raise ValueError("grid_minimax supports the plain variant only")
    n, p = problem.n, problem.p
    if n > grid.max_n or p > grid.max_p:
        raise ValueError(f"grid oracle limited to n <= {grid.max_n}, p <= {grid.max_p}")
    F, b = problem.matrix, problem.constraints.b

    resolution = grid.resolution
    zv = np.linspace(-1.0, 1.0, resolution)
    feas = _feasible_mask(F, b, zv, n)
    if not feas.any():
        # distinguish a too-coarse grid from genuine infeasibility
        resolution = 4 * (resolution - 1) + 1
        zv = np.linspace(-1.0, 1.0, resolution)
        feas = _feasible_mask(F, b, zv, n)
        if not feas.any():
            raise InfeasibleProblemError(
                "no feasible label vector found, even at 4x grid resolution")

    gv = zv
    lp, lm = _loss_tables(problem.loss, gv)

    # Seed the scenario set with the adversary's answer to g = 0.
    mid = (resolution - 1) // 2
    _, z0 = _grid_best_response(lp, lm, zv, (mid,) * n, feas, n)
    restricted = _scenario_tensor(lp, lm, z0, n)

    value = np.inf
    g_idx = (mid,) * n
    for _ in range(max_scenarios):
        flat = int(np.argmin(restricted))
        g_idx = np.unravel_index(flat, restricted.shape)
        lower = float(restricted[g_idx])
        full, z_new = _grid_best_response(lp, lm, zv, g_idx, feas, n)
        value = full
        if full <= lower + 1e-9 * max(1.0, abs(lower)):
            break
        restricted = np.maximum(restricted, _scenario_tensor(lp, lm, z_new, n))

    h = 2.0 / (resolution - 1)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        dm = np.abs(np.asarray(problem.loss.dpartial_minus(gv), dtype=float))
        dp = np.abs(np.asarray(problem.loss.dpartial_plus(gv), dtype=float))
        gamma = np.abs(np.asarray(losses.score(problem.loss, gv), dtype=float))
    l_g = float(max(dm[np.isfinite(dm)].max(), dp[np.isfinite(dp)].max()))
    l_z = 0.5 * float(gamma[np.isfinite(gamma)].max())
    tolerance = l_g * h + l_z * h

    return GridMinimaxResult(value=value, g_grid=gv[np.asarray(g_idx)],
                             tolerance=tolerance)


def feasible_z_sample(problem: EnsembleProblem, count: int, seed: int = 0,
                      max_draws: int = 1_000_000):
    """Rejection-sample label vectors satisfying the plain constraints."""
    if problem.variant != "plain":
        raise ValueError("feasible_z_sample supports the plain variant only")
    F, b, n = problem.matrix, problem.constraints.b, problem.n
    rng = np.random.default_rng(seed)
    out = []
    batch = max(1024, 4 * count)
    drawn = 0
    while len(out) < count and drawn < max_draws:
        z = rng.uniform(-1.0, 1.0, size=(batch, n))
        drawn += batch
        ok = np.all(F @ z.T / n >= b[:, None] - _FEAS_SLACK, axis=0)
        out.extend(z[ok])
    if len(out) < count:
        # fall back to classifier prediction rows, which satisfy their own
        # constraint when b is an attainable correlation level
        for i in range(problem.p):
            z = F[i]
            if np.all(F @ z / n >= b - _FEAS_SLACK):
                out.append(z.copy())
            if len(out) >= count:
                break
    if not out:
        # last resort: maximize the concave worst constraint margin
        # min_i (F_i z / n - b_i) over the box by projected subgradient
        z = np.zeros(n)
        for k in range(500):
            slacks = F @ z / n - b
            if slacks.min() >= _FEAS_SLACK:
                break
            i = int(np.argmin(slacks))
            z = np.clip(z + (1.0 / np.sqrt(k + 1.0)) * F[i], -1.0, 1.0)
        if np.all(F @ z / n >= b - _FEAS_SLACK):
            out.append(z)
    if not out:
        raise InfeasibleProblemError("no feasible sample found")
    return [np.asarray(z, dtype=float) for z in out[:count]]


def _pointwise_min_loss(spec, z_j: float) -> float:
    """min over g in [-1, 1] of the expected loss against a fixed z_j."""
    wp, wm = 0.5 * (1.0 + z_j), 0.5 * (1.0 - z_j)
    gv = np.linspace(-1.0, 1.0, 1001)
    lp, lm = _loss_tables(spec, gv)
    vals = wp * lp + wm * lm
    k = int(np.argmin(vals))
    lo = gv[max(k - 1, 0)]
    hi = gv[min(k + 1, gv.size - 1)]

    def f(g):
        v = wp * float(spec.partial_plus(g)) + wm * float(spec.partial_minus(g))
        return v if np.isfinite(v) else _BIG

    res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return min(float(vals[k]), float(res.fun))


def sandwich_check(problem: EnsembleProblem, report, z0,
                   tol: float = 1e-6, threads: int = 1) -> SandwichReport:
    """Bracket the solved game value between a feasible adversary's best
    case and the solved predictor's worst case."""
    z0 = np.asarray(z0, dtype=float)
    F, b, n = problem.matrix, problem.constraints.b, problem.n
    if problem.variant != "plain":
        raise ValueError("sandwich_check supports the plain variant only")
    if not np.all(F @ z0 / n >= b - 1e-9):
        raise ValueError("z0 violates the constraint set")

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            minima = list(pool.map(
                lambda zj: _pointwise_min_loss(problem.loss, zj), z0))
    else:
        minima = [_pointwise_min_loss(problem.loss, zj) for zj in z0]
    lower = float(np.mean(minima))

    sigma = report.sigma_star
    g0 = game_mod.predict(problem, sigma).g
    lp, lm = _loss_tables(problem.loss, g0)
    # worst case over z of the loss at g0: constant part plus a box LP on
    # the z-linear part, evaluated through the Lagrange dual. Warm-starting
    # at sigma makes the dual value at most slack(sigma) up to roundoff.
    a = np.nan_to_num(lp - lm, posinf=_BIG, neginf=-_BIG)
    upper = 0.5 * float(np.mean(lp + lm)) + 0.5 * game_mod.dual_box_lp(
        F, b, a, warm_starts=[sigma])

    value = report.game_value
    passed = lower <= value + tol and value <= upper + tol
    return SandwichReport(lower=lower, upper=upper, value=value, passed=passed)


def random_feasible_problem(loss, n: int, p: int, seed: int = 0,
                            margin: float = 0.05) -> EnsembleProblem:
    """Draw a random problem that is feasible by construction: the
    constraint levels are set from a hidden ground-truth labeling minus a
    margin."""
    rng = np.random.default_rng(seed)
    F = rng.uniform(-1.0, 1.0, size=(p, n))
    z_true = rng.uniform(-1.0, 1.0, size=n)
    b = F @ z_true / n - margin
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return game_mod.make_problem(F, b, loss)
