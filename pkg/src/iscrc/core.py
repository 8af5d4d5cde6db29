"""Domain types and the residual/argmin arithmetic shared by every engine.

Samples are stored column-wise throughout: a ``d x n`` matrix holds ``n``
feature vectors of dimension ``d``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError, DimensionError

UNIT_NORM_TOL = 1e-10
GAMMA_SCALE = 25.0


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class FeatureMatrix:
    """Immutable ``d x n`` real matrix, one sample per column.

    With ``normalize=True`` every column is scaled to unit Euclidean norm;
    an all-zero column cannot be normalized and raises :class:`DataError`.
    """

    __slots__ = ("_values",)

    def __init__(self, values, normalize: bool = False):
        arr = np.array(values, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got {arr.ndim}-D")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError(f"feature matrix must be non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("feature matrix contains non-finite entries")
        if normalize:
            norms = np.linalg.norm(arr, axis=0)
            if np.any(norms == 0.0):
                bad = int(np.flatnonzero(norms == 0.0)[0])
                raise DataError(f"column {bad} has zero norm and cannot be normalized")
            arr = arr / norms
        self._values = _readonly(arr)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def rows(self) -> int:
        return self._values.shape[0]

    @property
    def cols(self) -> int:
        return self._values.shape[1]

    @property
    def shape(self) -> tuple:
        return self._values.shape

    def normalized(self) -> "FeatureMatrix":
        return FeatureMatrix(self._values, normalize=True)

    def first(self, n: Optional[int]) -> "FeatureMatrix":
        """Keep the first ``n`` columns; all of them if there are fewer."""
        if n is None or n >= self.cols:
            return self
        if n < 1:
            raise ConfigError(f"frame count must be positive, got {n}")
        return FeatureMatrix(self._values[:, :n])

    def has_unit_columns(self, tol: float = UNIT_NORM_TOL) -> bool:
        return bool(np.all(np.abs(np.linalg.norm(self._values, axis=0) - 1.0) <= tol))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._values
        return self._values.astype(dtype)

    def __repr__(self):
        return f"FeatureMatrix({self.rows}x{self.cols})"


def as_array(x) -> np.ndarray:
    """Return the raw 2-D array behind a FeatureMatrix, ImageSet or array."""
    if isinstance(x, ImageSet):
        return x.features.values
    if isinstance(x, FeatureMatrix):
        return x.values
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


@dataclass(frozen=True)
class ImageSet:
    """A labeled set of frames. Query sets may leave ``label`` as None."""

    label: Optional[str]
    features: FeatureMatrix
    set_id: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.features, FeatureMatrix):
            object.__setattr__(self, "features", FeatureMatrix(self.features))
        if self.label is not None and not isinstance(self.label, str):
            object.__setattr__(self, "label", str(self.label))

    @property
    def n_frames(self) -> int:
        return self.features.cols

    @property
    def dimension(self) -> int:
        return self.features.rows

    def first(self, n: Optional[int]) -> "ImageSet":
        return dataclasses.replace(self, features=self.features.first(n))


@dataclass(frozen=True, eq=False)
class CompressedGalleryCollection:
    """Per-class dictionaries ``D_k`` concatenated into one ``D``.

    Hashing is by identity so that kernel caches can key on the object.
    """

    classes: tuple

    def __post_init__(self):
        classes = tuple((str(label), atoms if isinstance(atoms, FeatureMatrix) else FeatureMatrix(atoms))
                        for label, atoms in self.classes)
        if not classes:
            raise DataError("gallery must contain at least one class")
        labels = [label for label, _ in classes]
        if len(set(labels)) != len(labels):
            dup = next(lab for lab in labels if labels.count(lab) > 1)
            raise DataError(f"duplicate gallery label {dup!r}")
        dim = classes[0][1].rows
        for label, atoms in classes:
            if atoms.rows != dim:
                raise DimensionError(f"atoms[{label}]", f"{dim} rows", f"{atoms.rows} rows")
            if not atoms.has_unit_columns():
                raise DataError(f"atoms of class {label!r} are not unit-norm")
        object.__setattr__(self, "classes", classes)
        stacked = np.hstack([atoms.values for _, atoms in classes])
        object.__setattr__(self, "_matrix", _readonly(stacked))
        offsets = np.cumsum([0] + [atoms.cols for _, atoms in classes])
        object.__setattr__(self, "_offsets", tuple(int(o) for o in offsets))

    @classmethod
    def from_sets(cls, sets: Sequence[ImageSet]) -> "CompressedGalleryCollection":
        """Use the (unit-normalized) frames themselves as atoms."""
        return cls(tuple((s.label, s.features.normalized()) for s in sets))

    @property
    def labels(self) -> list:
        return [label for label, _ in self.classes]

    @property
    def matrix(self) -> np.ndarray:
        """The concatenated dictionary ``D``."""
        return self._matrix

    @property
    def dimension(self) -> int:
        return self._matrix.shape[0]

    @property
    def total_atoms(self) -> int:
        return self._matrix.shape[1]

    def slices(self) -> list:
        """``(label, slice)`` pairs locating each class's block of ``beta``."""
        o = self._offsets
        return [(label, slice(o[i], o[i + 1])) for i, (label, _) in enumerate(self.classes)]

    def atom_counts(self) -> dict:
        return {label: atoms.cols for label, atoms in self.classes}


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"
    delta: float = 5.0

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian"):
            raise ConfigError(f"unknown kernel {self.kind!r}")
        if self.kind == "gaussian" and not self.delta > 0:
            raise ConfigError(f"gaussian kernel width must be positive, got {self.delta}")


@dataclass(frozen=True)
class SolverConfig:
    """Every scalar the engines consume.

    ``multiplier_init=None`` means ``2.5 / n_a`` for a query of ``n_a``
    frames. ``gamma=None`` means ``GAMMA_SCALE`` times the mean squared
    frame norm of the query (25 for unit-norm features).
    """

    lambda1: float = 0.001
    lambda2: float = 0.001
    multiplier_init: Optional[float] = None
    gamma: Optional[float] = None
    tau: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    max_outer_iters: int = 10
    lasso_tol: float = 1e-6
    lasso_max_iters: int = 5000
    qp_tol: float = 1e-8
    qp_max_iters: int = 5000
    atoms_per_class: int = 10

    def __post_init__(self):
        if isinstance(self.kernel, Mapping):
            object.__setattr__(self, "kernel", KernelSpec(**self.kernel))
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("lambda1 and lambda2 must be nonnegative")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        for name in ("lasso_tol", "qp_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("max_outer_iters", "lasso_max_iters", "qp_max_iters", "atoms_per_class"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")

    def multiplier_for(self, n_a: int) -> float:
        if self.multiplier_init is not None:
            return float(self.multiplier_init)
        return 2.5 / n_a

    def gamma_for(self, Y) -> float:
        if self.gamma is not None:
            return float(self.gamma)
        Y = as_array(Y)
        return GAMMA_SCALE * float(np.mean(np.einsum("ij,ij->j", Y, Y)))

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "SolverConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown solver options: {sorted(unknown)}")
        return cls(**dict(data))


@dataclass(frozen=True)
class HullSolution:
    a: np.ndarray
    beta: np.ndarray
    residuals: dict
    objective_trace: tuple = ()
    constraint_trace: tuple = ()
    converged: bool = True

    def __post_init__(self):
        object.__setattr__(self, "objective_trace", tuple(float(v) for v in self.objective_trace))
        object.__setattr__(self, "constraint_trace", tuple(float(v) for v in self.constraint_trace))
        object.__setattr__(self, "converged", bool(self.converged))


@dataclass(frozen=True)
class ClassificationResult:
    predicted: str
    residuals: dict
    solution: HullSolution
    elapsed: float


def residual_per_class(Y, a, D: CompressedGalleryCollection, beta) -> dict:
    """r_k = ||Y a - D_k beta_k||^2 for every class, in gallery order."""
    Y = as_array(Y)
    a = np.asarray(a, dtype=float).ravel()
    beta = np.asarray(beta, dtype=float).ravel()
    if a.size != Y.shape[1]:
        raise DimensionError("a", Y.shape[1], a.size)
    if beta.size != D.total_atoms:
        raise DimensionError("beta", D.total_atoms, beta.size)
    if Y.shape[0] != D.dimension:
        raise DimensionError("Y", f"{D.dimension} rows", f"{Y.shape[0]} rows")
    hull = Y @ a
    out = {}
    for label, sl in D.slices():
        diff = hull - D.matrix[:, sl] @ beta[sl]
        out[label] = float(diff @ diff)
    return out


def classify(residuals: Mapping) -> str:
    """Label with the smallest residual; ties go to the earliest label."""
    if not residuals:
        raise DataError("cannot classify from an empty residual map")
    best_label, best = None, np.inf
    for label, r in residuals.items():
        if not np.isfinite(r):
            raise DataError(f"residual for {label!r} is not finite")
        if best_label is None or r < best:
            best_label, best = label, r
    return best_label
