"""Per-class dictionary learning: replace each gallery set by a few unit-norm atoms.

Alternates lasso coding of every frame over the current atoms with a
closed-form atom update (the unit vector best aligned with the atom's
residual). Both steps can only lower ``||X - D C||^2 + code_lambda ||C||_1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import CompressedGalleryCollection, FeatureMatrix, ImageSet, as_array
from .errors import ConfigError, DataError
from .solvers import lasso_solve_many

log = logging.getLogger(__name__)

CODE_TOL = 1e-8
CODE_MAX_SWEEPS = 2000
UNUSED_ATOM_TOL = 1e-12


@dataclass(frozen=True)
class DictLearnConfig:
    atoms: int = 10
    code_lambda: float = 0.001
    max_iters: int = 30
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.atoms < 1 or self.max_iters < 1:
            raise ConfigError("atoms and max_iters must be positive")
        if self.code_lambda < 0:
            raise ConfigError("code_lambda must be nonnegative")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")


def _initial_atoms(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[1]
    order = rng.permutation(n) if n > k else np.arange(n)
    norms = np.linalg.norm(X, axis=0)
    chosen, spare = [], []
    for j in order:
        if norms[j] == 0.0:
            continue
        col = X[:, j] / norms[j]
        if any(np.array_equal(col, c) for c in chosen):
            spare.append(col)
        else:
            chosen.append(col)
        if len(chosen) == k:
            break
    chosen.extend(spare[: k - len(chosen)])
    if len(chosen) < k:
        raise DataError("not enough nonzero frames to initialize the dictionary")
    return np.column_stack(chosen)


def _objective(X, D, C, lam):
    R = X - D @ C
    return float(np.sum(R * R) + lam * np.abs(C).sum())


def compress_set(X, cfg: DictLearnConfig = DictLearnConfig()):
    """Learn unit-norm atoms for one image set.

    Returns ``(atoms, trace)``: a ``FeatureMatrix`` of ``min(atoms, frames)``
    columns and the objective after every outer iteration. An atom that no
    frame uses is moved onto the worst-reconstructed frame.
    """
    Xm = as_array(X)
    n = Xm.shape[1]
    k = min(cfg.atoms, n)
    if k < cfg.atoms:
        log.info("clamping dictionary size from %d to %d frames", cfg.atoms, n)
    rng = np.random.default_rng(cfg.seed)
    D = _initial_atoms(Xm, k, rng)
    C = np.zeros((k, n))
    trace = []
    for it in range(cfg.max_iters):
        C, _ = lasso_solve_many(D, Xm, cfg.code_lambda, CODE_TOL, CODE_MAX_SWEEPS, init=C)
        R = Xm - D @ C
        reseeded = set()
        # an atom whose codes are at rounding level (e.g. a duplicate) counts as unused
        unused_tol = UNUSED_ATOM_TOL * max(float(np.abs(C).max()), 1.0)
        for j in range(k):
            c = C[j]
            if np.abs(c).max() <= unused_tol:
                col_err = np.einsum("ij,ij->j", R, R)
                col_err[list(reseeded)] = -1.0
                worst = int(np.argmax(col_err))
                if np.linalg.norm(Xm[:, worst]) > 0:
                    D[:, j] = Xm[:, worst] / np.linalg.norm(Xm[:, worst])
                    reseeded.add(worst)
                    log.debug("iteration %d: atom %d unused, reseeded from frame %d", it, j, worst)
                continue
            E = R + np.outer(D[:, j], c)
            v = E @ c
            norm = np.linalg.norm(v)
            if norm == 0.0:
                continue
            D[:, j] = v / norm
            R = E - np.outer(D[:, j], c)
        trace.append(_objective(Xm, D, C, cfg.code_lambda))
        if len(trace) > 1 and abs(trace[-2] - trace[-1]) <= cfg.tol * max(abs(trace[-2]), 1e-300):
            break
    return FeatureMatrix(D, normalize=True), trace


def compress_gallery(sets: Sequence[ImageSet], cfg: DictLearnConfig = DictLearnConfig()) -> CompressedGalleryCollection:
    labels = [s.label for s in sets]
    if any(not label for label in labels):
        raise DataError("every gallery set needs a label")
    if len(set(labels)) != len(labels):
        raise DataError("gallery labels must be unique")
    classes = []
    for s in sets:
        atoms, _ = compress_set(s, cfg)
        classes.append((s.label, atoms))
    return CompressedGalleryCollection(tuple(classes))
