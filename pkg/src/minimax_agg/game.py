"""Slack function, subgradients, predictions, and the box-LP dual bound.

The aggregation game is solved through the slack function
``gamma(sigma) = -b @ sigma + mean_j Psi(x_j @ sigma)``; half its minimum
is the game value. Four problem variants share this machinery: plain
correlation constraints, weighted test sets, L-infinity uncertainty on
the constraint vector (an L1-regularized slack), and constraints derived
from general loss bounds (a score-transformed plain problem).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import losses
from .losses import LossSpec

__all__ = [
    "ConstraintSpec",
    "EnsembleProblem",
    "PredictionVector",
    "InfeasibleProblemError",
    "make_problem",
    "slack",
    "slack_subgradient",
    "example_subgradient",
    "effective_margins",
    "predict",
    "transform_general_loss",
    "dual_box_lp",
    "game_value",
    "lipschitz_bound",
]

VARIANTS = ("plain", "weighted", "uncertainty", "general_loss")


class InfeasibleProblemError(RuntimeError):
    """No label vector satisfies the constraint set."""


@dataclass(frozen=True)
class ConstraintSpec:
    """Constraint side of the game: b plus the variant parameters."""

    b: np.ndarray
    variant: str = "plain"
    r: Optional[np.ndarray] = None          # weighted: per-example weights
    epsilon: float = 0.0                    # uncertainty: L-inf radius on b
    scale_margins: bool = True              # weighted: r_j * Psi(m_j / r_j)
                                            # vs the label-noise form r_j * Psi(m_j)

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        if self.b.ndim != 1 or self.b.size == 0:
            raise ValueError("b must be a nonempty vector")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.variant == "weighted":
            if self.r is None:
                raise ValueError("weighted variant requires r")
            object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
            if np.any(self.r < 0):
                raise ValueError("weights r must be nonnegative")
        if self.variant == "uncertainty" and self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


@dataclass(frozen=True)
class EnsembleProblem:
    """Prediction matrix (p classifiers x n examples) plus constraints."""

    matrix: np.ndarray
    constraints: ConstraintSpec
    loss: LossSpec

    def __post_init__(self):
        object.__setattr__(self, "matrix",
                           np.ascontiguousarray(self.matrix, dtype=float))

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def variant(self) -> str:
        return self.constraints.variant


def make_problem(matrix, b, loss: LossSpec, variant: str = "plain",
                 r=None, epsilon: float = 0.0,
                 scale_margins: bool = True) -> EnsembleProblem:
    """Validate and assemble an :class:`EnsembleProblem`."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise ValueError("prediction matrix must be 2-d with p, n >= 1")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("prediction matrix must be finite")
    if variant != "general_loss" and np.any(np.abs(matrix) > 1.0):
        raise ValueError("raw prediction matrix entries must lie in [-1, 1]")
    spec = ConstraintSpec(b=b, variant=variant, r=r, epsilon=epsilon,
                          scale_margins=scale_margins)
    if spec.b.size != matrix.shape[0]:
        raise ValueError("b length must match the classifier count p")
    if variant == "weighted" and spec.r.size != matrix.shape[1]:
        raise ValueError("r length must match the example count n")
    if np.any(spec.b <= 0.0) or np.any(spec.b > 1.0):
        warnings.warn(
            "constraint vector b outside (0, 1]: still a valid constraint "
            "set, but outside the usual estimation regime", stacklevel=2)
    return EnsembleProblem(matrix=matrix, constraints=spec, loss=loss)


def _check_sigma(problem: EnsembleProblem, sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (problem.p,):
        raise ValueError(f"sigma must have shape ({problem.p},)")
    if problem.variant != "uncertainty" and np.any(sigma < 0):
        raise ValueError(f"sigma must be nonnegative for the {problem.variant} variant")
    return sigma


def effective_margins(problem: EnsembleProblem, sigma):
    """Per-example margins fed to the potential well / prediction map.

    Returns ``(margins, weightless)`` where ``weightless`` marks examples
    with r_j = 0 in the weighted variant (their margin is reported as 0
    and their slack term is dropped).
    """
    sigma = _check_sigma(problem, sigma)
    raw = problem.matrix.T @ sigma
    cons = problem.constraints
    if cons.variant == "weighted":
        weightless = cons.r == 0.0
        if cons.scale_margins:
            m = np.where(weightless, 0.0, raw / np.where(weightless, 1.0, cons.r))
        else:
            m = np.where(weightless, 0.0, raw)
        return m, weightless
    return raw, np.zeros(problem.n, dtype=bool)


def slack(problem: EnsembleProblem, sigma) -> float:
    """Slack function of the problem's variant at the weights sigma."""
    sigma = _check_sigma(problem, sigma)
    cons = problem.constraints
    m, weightless = effective_margins(problem, sigma)
    psi = np.asarray(losses.potential_well(problem.loss, m), dtype=float)
    if cons.variant == "weighted":
        total = float(np.sum(np.where(weightless, 0.0, cons.r * psi)))
        val = -float(cons.b @ sigma) + total / problem.n
    else:
        val = -float(cons.b @ sigma) + float(np.mean(psi))
    if cons.variant == "uncertainty":
        val += cons.epsilon * float(np.sum(np.abs(sigma)))
    return val


def _psi_slope_weights(problem: EnsembleProblem, sigma):
    """Per-example weights s_j such that the smooth subgradient part is
    -b + (1/n) * matrix @ s."""
    cons = problem.constraints
    m, weightless = effective_margins(problem, sigma)
    s = np.asarray(losses.potential_well_slope(problem.loss, m), dtype=float)
    if cons.variant == "weighted":
        if cons.scale_margins:
            # d/dsigma of r_j * Psi(x_j @ sigma / r_j) = Psi'(.) * x_j
            s = np.where(weightless, 0.0, s)
        else:
            s = np.where(weightless, 0.0, cons.r * s)
    return s


def slack_subgradient(problem: EnsembleProblem, sigma) -> np.ndarray:
    """A subgradient of the slack function at sigma.

    For the uncertainty variant the L1 term contributes
    epsilon * sign(sigma), with 0 chosen at sigma_i = 0.
    """
    sigma = _check_sigma(problem, sigma)
    s = _psi_slope_weights(problem, sigma)
    grad = -problem.constraints.b + (problem.matrix @ s) / problem.n
    if problem.variant == "uncertainty":
        grad = grad + problem.constraints.epsilon * np.sign(sigma)
    return grad


def example_subgradient(problem: EnsembleProblem, sigma, j: int) -> np.ndarray:
    """Single-example unbiased estimate of the smooth subgradient part.

    Excludes the uncertainty variant's L1 term (handled by the proximal
    step in the solver).
    """
    sigma = _check_sigma(problem, sigma)
    s = _psi_slope_weights(problem, sigma)
    return -problem.constraints.b + s[j] * problem.matrix[:, j]


@dataclass(frozen=True)
class PredictionVector:
    """Per-example predictions g in [-1, 1] with their margins."""

    g: np.ndarray
    margins: np.ndarray
    weightless: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def predict(problem: EnsembleProblem, sigma) -> PredictionVector:
    """Minimax-optimal predictions g(margin_j) for the given weights."""
    m, weightless = effective_margins(problem, sigma)
    g = np.asarray(losses.predict_one(problem.loss, m), dtype=float)
    return PredictionVector(g=g, margins=m, weightless=weightless)


def transform_general_loss(raw_predictions, loss_bounds, loss: LossSpec):
    """Rewrite per-classifier loss bounds as linear label constraints.

    Maps the raw prediction matrix entrywise through the score function
    and converts the loss bounds eps_i into constraint levels
    ``b_i = mean_j [l_plus(h_ij) + l_minus(h_ij)] - 2 * eps_i``, so the
    plain game on the transformed problem equals the general-loss game.
    """
    raw = np.asarray(raw_predictions, dtype=float)
    eps = np.asarray(loss_bounds, dtype=float)
    if raw.ndim != 2:
        raise ValueError("raw prediction matrix must be 2-d")
    if eps.shape != (raw.shape[0],):
        raise ValueError("loss_bounds length must match the classifier count")
    if np.any(np.abs(raw) > 1.0):
        raise ValueError("raw prediction entries must lie in [-1, 1]")

    transformed = np.asarray(losses.score(loss, raw), dtype=float)
    bad = ~np.isfinite(transformed)
    if np.any(bad):
        cells = [(int(i), int(j)) for i, j in zip(*np.nonzero(bad))]
        raise ValueError(
            f"score transform is infinite for loss {loss.name!r} at "
            f"(classifier, example) cells {cells[:5]}"
            f"{' ...' if len(cells) > 5 else ''}")
    with np.errstate(over="ignore"):
        sums = (np.asarray(loss.partial_plus(raw), dtype=float)
                + np.asarray(loss.partial_minus(raw), dtype=float))
    if not np.all(np.isfinite(sums)):
        cells = [(int(i), int(j)) for i, j in zip(*np.nonzero(~np.isfinite(sums)))]
        raise ValueError(
            f"partial losses are infinite for loss {loss.name!r} at cells "
            f"{cells[:5]}")
    b_ell = sums.mean(axis=1) - 2.0 * eps
    return transformed, b_ell


def dual_box_lp(F, b, a, options=None, warm_starts=()) -> float:
    """Value of ``max z @ a / n`` over z in the box intersected with
    ``F z / n >= b``, computed through its Lagrange dual
    ``min_{sigma >= 0} [-b @ sigma + ||F.T @ sigma + a||_1 / n]``.

    The returned value is the best dual objective found, so it never
    understates the primal maximum. Raises
    :class:`InfeasibleProblemError` when the dual decreases without bound
    (empty primal feasible set).
    """
    from .optimize import SolveOptions, minimize_convex

    F = np.asarray(F, dtype=float)
    b = np.asarray(b, dtype=float)
    a = np.asarray(a, dtype=float)
    p, n = F.shape
    if b.shape != (p,) or a.shape != (n,):
        raise ValueError("dimension mismatch between F, b, and a")
    if options is None:
        options = SolveOptions()

    def objective(sig):
        return -float(b @ sig) + float(np.sum(np.abs(F.T @ sig + a))) / n

    def subgrad(sig):
        return -b + (F @ np.sign(F.T @ sig + a)) / n

    res = minimize_convex(objective, subgrad, p, options,
                          project=lambda x: np.maximum(x, 0.0),
                          warm_starts=warm_starts)
    if res.infeasible_suspected:
        raise InfeasibleProblemError(
            "infeasible-primal suspected: dual objective unbounded below")
    return res.best_value


def game_value(report) -> float:
    """Game value V = gamma(sigma*) / 2 from a solve report."""
    return 0.5 * report.slack_star


def lipschitz_bound(problem: EnsembleProblem) -> float:
    """Euclidean Lipschitz constant of the slack function in sigma."""
    col_norms = np.linalg.norm(problem.matrix, axis=0)
    bound = float(np.linalg.norm(problem.constraints.b) + col_norms.max())
    if problem.variant == "uncertainty":
        bound += problem.constraints.epsilon * np.sqrt(problem.p)
    return bound
