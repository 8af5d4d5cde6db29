"""Regularized-hull engine: closed-form l2 path and augmented-Lagrangian l1 path."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .core import (ClassificationResult, CompressedGalleryCollection, HullSolution, SolverConfig,
                   as_array, classify, residual_per_class)
from .errors import ConfigError, DegenerateGeometryError, DimensionError
from .solvers import LassoProblem, constrained_ridge_solve, lasso_solve

log = logging.getLogger(__name__)

# |sum(a) - 1| required (with a flat objective) before the l1 loop may stop early
CONSTRAINT_STOP_TOL = 1e-3


@dataclass(frozen=True)
class L1State:
    a: np.ndarray
    beta: np.ndarray
    multiplier: float
    iteration: int = 0
    augmented_objective: float = np.inf


def _check_shapes(Y: np.ndarray, D: CompressedGalleryCollection):
    if Y.shape[0] != D.dimension:
        raise DimensionError("Y", f"{D.dimension} rows", f"{Y.shape[0]} rows")


def l2_objective(Y, D, a, beta, cfg: SolverConfig) -> float:
    r = as_array(Y) @ a - D.matrix @ beta
    return float(r @ r + cfg.lambda1 * (a @ a) + cfg.lambda2 * (beta @ beta))


def l1_objective(Y, D, a, beta, cfg: SolverConfig) -> float:
    """The non-augmented l1 objective (no multiplier or penalty terms)."""
    r = as_array(Y) @ a - D.matrix @ beta
    return float(r @ r + cfg.lambda1 * np.abs(a).sum() + cfg.lambda2 * np.abs(beta).sum())


def augmented_objective(Y, D, a, beta, multiplier, cfg: SolverConfig) -> float:
    gap = a.sum() - 1.0
    gamma = cfg.gamma_for(Y)
    return l1_objective(Y, D, a, beta, cfg) + multiplier * gap + 0.5 * gamma * gap * gap


def solve_l2(Y, D: CompressedGalleryCollection, cfg: SolverConfig) -> HullSolution:
    Ym = as_array(Y)
    _check_shapes(Ym, D)
    if not (cfg.lambda1 > 0 and cfg.lambda2 > 0):
        raise ConfigError("the l2 path needs lambda1 > 0 and lambda2 > 0")
    a, beta = constrained_ridge_solve(Ym, D.matrix, cfg.lambda1, cfg.lambda2)
    return HullSolution(
        a=a,
        beta=beta,
        residuals=residual_per_class(Ym, a, D, beta),
        objective_trace=(l2_objective(Ym, D, a, beta, cfg),),
        constraint_trace=(abs(a.sum() - 1.0),),
    )


def l1_update_a(state: L1State, Y, D: CompressedGalleryCollection, cfg: SolverConfig) -> np.ndarray:
    """Lasso over the query coefficients with the penalty row stacked under Y."""
    Ym = as_array(Y)
    n_a = Ym.shape[1]
    gamma = cfg.gamma_for(Ym)
    root = np.sqrt(gamma / 2.0)
    design = np.vstack([Ym, np.full((1, n_a), root)])
    target = np.concatenate([D.matrix @ state.beta, [root * (1.0 - state.multiplier / gamma)]])
    res = lasso_solve(LassoProblem(design, target, cfg.lambda1), cfg.lasso_tol, cfg.lasso_max_iters)
    if not res.converged:
        log.debug("a-update lasso stopped after %d sweeps without converging", res.sweeps)
    return res.coef


def l1_update_beta(a_next, Y, D: CompressedGalleryCollection, cfg: SolverConfig) -> np.ndarray:
    target = as_array(Y) @ np.asarray(a_next, dtype=float)
    res = lasso_solve(LassoProblem(D.matrix, target, cfg.lambda2), cfg.lasso_tol, cfg.lasso_max_iters)
    if not res.converged:
        log.debug("beta-update lasso stopped after %d sweeps without converging", res.sweeps)
    return res.coef


def l1_update_multiplier(state: L1State, a_next, cfg: SolverConfig, gamma: float = None) -> float:
    """``gamma`` overrides ``cfg.gamma``; required when the config leaves it data-dependent."""
    if gamma is None:
        if cfg.gamma is None:
            raise ConfigError("multiplier step needs an explicit gamma")
        gamma = cfg.gamma
    return state.multiplier + gamma * (float(np.sum(a_next)) - 1.0)


def solve_l1(Y, D: CompressedGalleryCollection, cfg: SolverConfig) -> HullSolution:
    """Alternate a-update, beta-update and multiplier step.

    A one-frame query has the single feasible point a = [1], so only the
    beta lasso is solved. Otherwise the loop runs until ``max_outer_iters``
    or until the objective change drops below ``lasso_tol`` with
    ``|sum(a) - 1| < 1e-3``. The final ``a`` is rescaled to sum to one
    before residuals are taken.
    """
    Ym = as_array(Y)
    _check_shapes(Ym, D)
    n_a = Ym.shape[1]
    if n_a == 1:
        a = np.ones(1)
        beta = l1_update_beta(a, Ym, D, cfg)
        return HullSolution(a, beta, residual_per_class(Ym, a, D, beta),
                            (l1_objective(Ym, D, a, beta, cfg),), (0.0,))

    gamma = cfg.gamma_for(Ym)
    state = L1State(a=np.zeros(n_a), beta=np.zeros(D.total_atoms), multiplier=cfg.multiplier_for(n_a))
    objectives, violations = [], []
    for t in range(cfg.max_outer_iters):
        a = l1_update_a(state, Ym, D, cfg)
        beta = l1_update_beta(a, Ym, D, cfg)
        multiplier = l1_update_multiplier(state, a, cfg, gamma)
        state = L1State(a, beta, multiplier, t + 1, augmented_objective(Ym, D, a, beta, multiplier, cfg))
        objectives.append(l1_objective(Ym, D, a, beta, cfg))
        violations.append(abs(a.sum() - 1.0))
        if (t > 0 and abs(objectives[-1] - objectives[-2]) < cfg.lasso_tol
                and violations[-1] < CONSTRAINT_STOP_TOL):
            break

    a, beta = state.a, state.beta
    total = a.sum()
    if abs(total) < 1e-12:
        raise DegenerateGeometryError("query coefficients sum to zero; no hull point to rescale")
    if violations[-1] > CONSTRAINT_STOP_TOL:
        log.warning("l1 path ended with |sum(a) - 1| = %.2e", violations[-1])
    if violations[-1] > 1e-6:
        a = a / total
    return HullSolution(
        a=a,
        beta=beta,
        residuals=residual_per_class(Ym, a, D, beta),
        objective_trace=tuple(objectives),
        constraint_trace=tuple(violations),
        converged=violations[-1] <= CONSTRAINT_STOP_TOL,
    )


def classify_rh(Y, D: CompressedGalleryCollection, cfg: SolverConfig, norm: str = "l2") -> ClassificationResult:
    if norm not in ("l1", "l2"):
        raise ConfigError(f"norm must be 'l1' or 'l2', got {norm!r}")
    start = time.perf_counter()
    sol = solve_l1(Y, D, cfg) if norm == "l1" else solve_l2(Y, D, cfg)
    label = classify(sol.residuals)
    return ClassificationResult(label, sol.residuals, sol, time.perf_counter() - start)
