"""Projected subgradient minimization of the convex slack function.

The slack function is convex and Lipschitz but only piecewise smooth, so
the solver is a projected subgradient method with best-iterate tracking.
The default step schedule holds the step fixed within an epoch and
shrinks it geometrically between epochs, doubling instead whenever the
iterate is still travelling in a consistent direction; this reaches
sharp (piecewise-linear) minima far faster than the classical
inverse-sqrt schedule and detects unbounded descent (infeasible
constraint sets) by running into the sigma-norm cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import game as game_mod

__all__ = ["SolveOptions", "SolveReport", "ConvexSolveResult",
           "minimize_convex", "minimize_slack"]

STEP_RULES = ("geometric", "inv_sqrt", "fixed")


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 50_000
    step_rule: str = "geometric"
    step_size: Optional[float] = None   # eta0; default 1 / max_j ||x_j||_2
    epoch_len: int = 250                # geometric rule only
    decay: float = 0.3                  # geometric rule only
    stop_tol: float = 1e-8
    stop_window: int = 100
    sigma_cap: float = 1e6
    seed: int = 0
    stochastic: bool = False
    keep_history: bool = False

    def __post_init__(self):
        if self.max_iters < 1 or self.epoch_len < 1 or self.stop_window < 1:
            raise ValueError("iteration counts must be positive")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        if self.stop_tol <= 0 or self.sigma_cap <= 0 or self.decay <= 0:
            raise ValueError("tolerances must be positive")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")


@dataclass(frozen=True)
class ConvexSolveResult:
    best_x: np.ndarray
    best_value: float
    iters_used: int
    converged: bool
    infeasible_suspected: bool
    history: Optional[list] = None


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a slack minimization."""

    sigma_star: np.ndarray
    slack_star: float
    game_value: float
    iters_used: int
    converged: bool
    infeasible_suspected: bool
    history: Optional[list] = field(default=None, repr=False)


def minimize_convex(objective: Callable, subgradient: Callable, dim: int,
                    options: SolveOptions,
                    project: Optional[Callable] = None,
                    prox: Optional[Callable] = None,
                    warm_starts=(), eta0: float = 1.0) -> ConvexSolveResult:
    """Generic best-iterate projected subgradient loop.

    ``prox``, when given, is applied as ``x = prox(x, eta)`` after the
    subgradient step (the subgradient must then exclude the prox'd term).
    """
    if options.step_size is not None:
        eta0 = options.step_size

    candidates = [np.zeros(dim)]
    candidates.extend(np.asarray(w, dtype=float).copy() for w in warm_starts)
    best_x, best_f = None, np.inf
    for c in candidates:
        if project is not None:
            c = project(c)
        f = objective(c)
        if f < best_f:
            best_x, best_f = c.copy(), f

    x = best_x.copy()
    history = [] if options.keep_history else None
    window_best = best_f
    eta = eta0
    epoch_start_x = x.copy()
    epoch_best = best_f
    epoch_path = 0.0
    stalled_epochs = 0
    infeasible = False
    converged = False
    k = 0

    while k < options.max_iters:
        g = subgradient(x)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite subgradient at iteration {k}")
        if options.step_rule == "inv_sqrt":
            eta = eta0 / np.sqrt(k + 1.0)
        elif options.step_rule == "fixed":
            eta = eta0
        x_prev = x
        x = x - eta * g
        if prox is not None:
            x = prox(x, eta)
        if project is not None:
            x = project(x)
        # movement after projection, so pinned coordinates don't inflate it
        epoch_path += float(np.linalg.norm(x - x_prev))
        f = objective(x)
        if not np.isfinite(f):
            raise FloatingPointError(f"non-finite objective at iteration {k}")
        if f < best_f:
            best_f = f
            best_x = x.copy()
        k += 1

        if options.step_rule == "geometric" and k % options.epoch_len == 0:
            if history is not None:
                history.append(best_f)
            improvement = epoch_best - best_f
            if float(np.max(np.abs(x))) > options.sigma_cap \
                    and improvement > options.stop_tol:
                infeasible = True
                break
            # an epoch stalled at some eta may only need a smaller step, so
            # stop after two stalled epochs in a row (one decay apart)
            stalled_epochs = stalled_epochs + 1 \
                if improvement <= options.stop_tol else 0
            if stalled_epochs >= 2:
                converged = True
                break
            travel = float(np.linalg.norm(x - epoch_start_x))
            if epoch_path > 0 and travel > 0.5 * epoch_path:
                eta *= 2.0      # still moving one way: optimum is further out
            else:
                eta *= options.decay
            epoch_start_x = x.copy()
            epoch_best = best_f
            epoch_path = 0.0

        if options.step_rule != "geometric" and k % options.stop_window == 0:
            if history is not None:
                history.append(best_f)
            improving = window_best - best_f > options.stop_tol
            if float(np.max(np.abs(x))) > options.sigma_cap and improving:
                infeasible = True
                break
            if not improving:
                converged = True
                break
            window_best = best_f

    return ConvexSolveResult(best_x=best_x, best_value=best_f, iters_used=k,
                             converged=converged, infeasible_suspected=infeasible,
                             history=history)


def default_step_size(matrix: np.ndarray) -> float:
    col_norms = np.linalg.norm(matrix, axis=0)
    top = float(col_norms.max())
    return 1.0 / top if top > 0 else 1.0


def minimize_slack(problem, options: Optional[SolveOptions] = None,
                   warm_starts=()) -> SolveReport:
    """Minimize the problem's slack function over admissible weights."""
    if options is None:
        options = SolveOptions()
    cons = problem.constraints

    objective = lambda s: game_mod.slack(problem, s)

    if cons.variant == "uncertainty":
        eps = cons.epsilon

        def subgrad(s):
            # strip the L1 part: it is handled by the soft-threshold prox
            return game_mod.slack_subgradient(problem, s) - eps * np.sign(s)

        prox = lambda s, eta: np.sign(s) * np.maximum(np.abs(s) - eta * eps, 0.0)
        project = None
    else:
        subgrad = lambda s: game_mod.slack_subgradient(problem, s)
        prox = None
        project = lambda s: np.maximum(s, 0.0)

    if options.stochastic:
        rng = np.random.default_rng(options.seed)

        def subgrad(s):  # noqa: F811  (seeded single-example estimate)
            j = int(rng.integers(problem.n))
            return game_mod.example_subgradient(problem, s, j)

    res = minimize_convex(objective, subgrad, problem.p, options,
                          project=project, prox=prox, warm_starts=warm_starts,
                          eta0=default_step_size(problem.matrix))
    return SolveReport(
        sigma_star=res.best_x,
        slack_star=res.best_value,
        game_value=0.5 * res.best_value,
        iters_used=res.iters_used,
        converged=res.converged,
        infeasible_suspected=res.infeasible_suspected,
        history=res.history,
    )
