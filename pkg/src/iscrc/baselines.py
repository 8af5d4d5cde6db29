"""Image-level SRC/CRC baselines with the average-residual rule.

Every frame of the query set is coded on its own over the whole gallery
dictionary (lasso for SRC, ridge for CRC); per-class residuals are averaged
over the frames and the smallest average wins.
"""

from __future__ import annotations

import time
from typing import Sequence

import numpy as np
import scipy.linalg

from .core import (ClassificationResult, CompressedGalleryCollection, HullSolution, ImageSet,
                   SolverConfig, as_array, classify)
from .errors import ConfigError, DimensionError, SolverError
from .solvers import lasso_solve_many


def code_frames(Y, D: CompressedGalleryCollection, cfg: SolverConfig, norm: str) -> np.ndarray:
    """Coefficients of every frame over ``D``, one column per frame.

    SRC uses ``lambda2`` as the lasso penalty and CRC uses it as the ridge
    penalty, matching the gallery-side weight of the hull engines.
    """
    Ym = as_array(Y)
    if Ym.shape[0] != D.dimension:
        raise DimensionError("Y", f"{D.dimension} rows", f"{Ym.shape[0]} rows")
    if norm == "l1":
        coefs, _ = lasso_solve_many(D.matrix, Ym, cfg.lambda2, cfg.lasso_tol, cfg.lasso_max_iters)
        return coefs
    if norm == "l2":
        if not cfg.lambda2 > 0:
            raise ConfigError("CRC needs lambda2 > 0")
        M = D.matrix.T @ D.matrix
        M[np.diag_indices_from(M)] += cfg.lambda2
        try:
            factor = scipy.linalg.cho_factor(M, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"ridge factorization failed: {exc}") from exc
        return scipy.linalg.cho_solve(factor, D.matrix.T @ Ym)
    raise ConfigError(f"norm must be 'l1' or 'l2', got {norm!r}")


def average_residuals(Y, D: CompressedGalleryCollection, coefs: np.ndarray) -> dict:
    Ym = as_array(Y)
    out = {}
    for label, sl in D.slices():
        R = Ym - D.matrix[:, sl] @ coefs[sl]
        out[label] = float(np.einsum("ij,ij->j", R, R).mean())
    return out


def classify_baseline(Y, D: CompressedGalleryCollection, cfg: SolverConfig, norm: str) -> ClassificationResult:
    start = time.perf_counter()
    coefs = code_frames(Y, D, cfg, norm)
    residuals = average_residuals(Y, D, coefs)
    n = coefs.shape[1]
    sol = HullSolution(a=np.full(n, 1.0 / n), beta=coefs.mean(axis=1), residuals=residuals)
    return ClassificationResult(classify(residuals), residuals, sol, time.perf_counter() - start)


def baseline_src_crc(queries: Sequence[ImageSet], D: CompressedGalleryCollection, cfg: SolverConfig,
                     norm: str) -> list:
    """One ClassificationResult per query set, in order."""
    return [classify_baseline(q, D, cfg, norm) for q in queries]
