"""Seeded synthetic image-set generators.

``subspace``: each class owns a random orthonormal ``dim x subspace_dim``
basis. A set draws its own offset around the class centre (a stand-in for
a different video of the same person), frames scatter around that offset,
isotropic ambient noise is added and every frame is unit-normalized.

``shells``: concentric shells of radius ``1/(1+k)`` in the first
``dim - 1`` coordinates, lifted onto the unit sphere with a random-sign
last coordinate. Convex hulls of different classes overlap in input space,
so the classes need a nonlinear kernel. ``subspace_dim`` is ignored.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import FeatureMatrix, ImageSet
from .errors import ConfigError

SET_JITTER = 0.3
FRAME_SPREAD = 0.5


@dataclass(frozen=True)
class SyntheticSpec:
    """``sets_per_class`` counts every set of a class; set 0 is the gallery."""

    classes: int = 10
    dim: int = 100
    subspace_dim: int = 5
    noise_sigma: float = 0.05
    frames_per_set: int = 50
    sets_per_class: int = 4
    seed: int = 42
    geometry: str = "subspace"

    def __post_init__(self):
        if self.classes < 1 or self.dim < 1:
            raise ConfigError("classes and dim must be positive")
        if self.geometry not in ("subspace", "shells"):
            raise ConfigError(f"unknown geometry {self.geometry!r}")
        if self.geometry == "subspace" and not 1 <= self.subspace_dim < self.dim:
            raise ConfigError("need 1 <= subspace_dim < dim")
        if self.frames_per_set < 1:
            raise ConfigError("frames_per_set must be >= 1")
        if self.sets_per_class < 2:
            raise ConfigError("sets_per_class must be >= 2 (one gallery plus queries)")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be nonnegative")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data) -> "SyntheticSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown synthetic options: {sorted(unknown)}")
        return cls(**dict(data))


def class_label(k: int) -> str:
    return f"class_{k:02d}"


def _subspace_sets(spec: SyntheticSpec, rng: np.random.Generator):
    r = spec.subspace_dim
    out = []
    for k in range(spec.classes):
        basis, _ = np.linalg.qr(rng.standard_normal((spec.dim, r)))
        centre = rng.standard_normal(r)
        centre /= np.linalg.norm(centre)
        sets = []
        for _ in range(spec.sets_per_class):
            offset = centre + SET_JITTER * rng.standard_normal(r) / np.sqrt(r)
            coeffs = offset[:, None] + FRAME_SPREAD * rng.standard_normal((r, spec.frames_per_set)) / np.sqrt(r)
            frames = basis @ coeffs + spec.noise_sigma * rng.standard_normal((spec.dim, spec.frames_per_set))
            sets.append(FeatureMatrix(frames, normalize=True))
        out.append(sets)
    return out


def _shell_sets(spec: SyntheticSpec, rng: np.random.Generator):
    """Class k lies on a shell of radius 1/(1+k) in the first dim-1 coordinates.

    The last coordinate is +-sqrt(1 - radius^2) with a random sign per frame,
    so every frame has unit norm and the linear hulls of all classes meet
    near the axis. Only a nonlinear kernel separates them.
    """
    if spec.dim < 2:
        raise ConfigError("shells geometry needs dim >= 2")
    out = []
    for k in range(spec.classes):
        radius = 1.0 / (1.0 + k)
        height = np.sqrt(1.0 - radius ** 2)
        sets = []
        for _ in range(spec.sets_per_class):
            directions = rng.standard_normal((spec.dim - 1, spec.frames_per_set))
            directions /= np.linalg.norm(directions, axis=0)
            signs = rng.choice([-1.0, 1.0], size=spec.frames_per_set)
            frames = np.vstack([radius * directions, height * signs])
            frames += spec.noise_sigma * rng.standard_normal(frames.shape)
            sets.append(FeatureMatrix(frames, normalize=True))
        out.append(sets)
    return out


def generate_synthetic(spec: SyntheticSpec):
    """Return ``(galleries, queries)``.

    One gallery set per class in class order; queries are ordered by set
    index, then class, so any prefix covers the classes evenly.
    """
    rng = np.random.default_rng(spec.seed)
    per_class = _subspace_sets(spec, rng) if spec.geometry == "subspace" else _shell_sets(spec, rng)
    galleries = [ImageSet(class_label(k), sets[0], f"{class_label(k)}/set0")
                 for k, sets in enumerate(per_class)]
    queries = [ImageSet(class_label(k), per_class[k][s], f"{class_label(k)}/set{s}")
               for s in range(1, spec.sets_per_class) for k in range(spec.classes)]
    return galleries, queries
