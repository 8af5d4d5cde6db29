"""Kernelized convex-hull engine.

Both hulls are convex (coefficients on capped simplices) and live in the
feature space of a kernel, so only Gram matrices are needed:

    min  a^T Kyy a - 2 a^T Kyd beta + beta^T Kdd beta
    s.t. sum(a) = sum(beta) = 1,  0 <= a_i, beta_j <= tau
"""

from __future__ import annotations

import threading
import time
import weakref
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import (ClassificationResult, CompressedGalleryCollection, HullSolution, KernelSpec,
                   SolverConfig, as_array, classify)
from .errors import DimensionError, SolverError
from .solvers import CappedSimplex, qp_capped_simplex_blocks

__all__ = ["KernelSpec", "GramBlocks", "kernel_eval", "kernel_matrix", "gallery_gram", "build_gram",
           "solve_kch", "classify_kch"]

NEGATIVE_RESIDUAL_TOL = 1e-8
SYMMETRY_TOL = 1e-10


def kernel_eval(x, y, spec: KernelSpec) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise DimensionError("y", x.size, y.size)
    if spec.kind == "linear":
        return float(x @ y)
    diff = x - y
    return float(np.exp(-(diff @ diff) / (2.0 * spec.delta ** 2)))


def kernel_matrix(X, Z, spec: KernelSpec) -> np.ndarray:
    """Kernel between every column of ``X`` and every column of ``Z``."""
    X, Z = as_array(X), as_array(Z)
    if X.shape[0] != Z.shape[0]:
        raise DimensionError("Z", f"{X.shape[0]} rows", f"{Z.shape[0]} rows")
    if spec.kind == "linear":
        return X.T @ Z
    sq = cdist(X.T, Z.T, "sqeuclidean")
    return np.exp(-sq / (2.0 * spec.delta ** 2))


def _symmetric_gram(X, spec: KernelSpec) -> np.ndarray:
    K = kernel_matrix(X, X, spec)
    asym = np.abs(K - K.T).max()
    if asym > SYMMETRY_TOL:
        raise SolverError(f"Gram matrix asymmetric by {asym:.2e}")
    K = 0.5 * (K + K.T)
    if spec.kind == "gaussian":
        np.fill_diagonal(K, 1.0)
    K.setflags(write=False)
    return K


_gallery_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()
_cache_lock = threading.Lock()


def gallery_gram(D: CompressedGalleryCollection, spec: KernelSpec) -> np.ndarray:
    """``k(D, D)``, computed once per (gallery object, kernel) and shared."""
    with _cache_lock:
        per_gallery = _gallery_cache.setdefault(D, {})
        K = per_gallery.get(spec)
    if K is None:
        K = _symmetric_gram(D.matrix, spec)
        with _cache_lock:
            K = per_gallery.setdefault(spec, K)
    return K


@dataclass(frozen=True)
class GramBlocks:
    Kyy: np.ndarray
    Kyd: np.ndarray
    Kdd: np.ndarray
    class_offsets: tuple

    def joint(self) -> np.ndarray:
        """The QP matrix over ``[a; beta]``."""
        return np.block([[self.Kyy, -self.Kyd], [-self.Kyd.T, self.Kdd]])


def build_gram(Y, D: CompressedGalleryCollection, spec: KernelSpec) -> GramBlocks:
    Ym = as_array(Y)
    if Ym.shape[0] != D.dimension:
        raise DimensionError("Y", f"{D.dimension} rows", f"{Ym.shape[0]} rows")
    return GramBlocks(
        Kyy=_symmetric_gram(Ym, spec),
        Kyd=kernel_matrix(Ym, D.matrix, spec),
        Kdd=gallery_gram(D, spec),
        class_offsets=tuple(D.slices()),
    )


def kernel_residuals(G: GramBlocks, a, beta) -> dict:
    """r_k = ||phi(Y) a - phi(D_k) beta_k||^2 from Gram blocks alone."""
    hull_sq = float(a @ G.Kyy @ a)
    out = {}
    for label, sl in G.class_offsets:
        bk = beta[sl]
        r = hull_sq - 2.0 * float(a @ G.Kyd[:, sl] @ bk) + float(bk @ G.Kdd[sl, sl] @ bk)
        if r < 0.0:
            if r < -NEGATIVE_RESIDUAL_TOL:
                raise SolverError(f"kernel residual for {label!r} is {r:.3e}; Gram matrix is not PSD")
            r = 0.0
        out[label] = r
    return out


def solve_kch(Y, D: CompressedGalleryCollection, cfg: SolverConfig) -> HullSolution:
    Ym = as_array(Y)
    c_a = CappedSimplex(Ym.shape[1], cfg.tau)
    c_b = CappedSimplex(D.total_atoms, cfg.tau)
    G = build_gram(Ym, D, cfg.kernel)
    qp = qp_capped_simplex_blocks(G.joint(), c_a, c_b, cfg.qp_tol, cfg.qp_max_iters)
    return HullSolution(
        a=qp.a,
        beta=qp.beta,
        residuals=kernel_residuals(G, qp.a, qp.beta),
        objective_trace=qp.trace,
        constraint_trace=(abs(qp.a.sum() - 1.0),),
        converged=qp.converged,
    )


def classify_kch(Y, D: CompressedGalleryCollection, cfg: SolverConfig) -> ClassificationResult:
    start = time.perf_counter()
    sol = solve_kch(Y, D, cfg)
    label = classify(sol.residuals)
    return ClassificationResult(label, sol.residuals, sol, time.perf_counter() - start)
