"""File formats: per-set CSV matrices, JSON manifests and compressed-gallery JSON.

A set file is header-free CSV with one row per feature dimension and one
column per frame. A manifest lists the set files:

    {"feature_dim": 100, "normalize": true,
     "entries": [{"label": "a", "set_id": "a/0", "path": "a0.csv", "role": "gallery"}, ...]}

Relative paths resolve against the manifest's directory.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import CompressedGalleryCollection, FeatureMatrix, ImageSet
from .errors import DataError
from .synthetic import SyntheticSpec, generate_synthetic

GALLERY_FORMAT = "iscrc-gallery"
GALLERY_VERSION = 1


def read_set_csv(path) -> FeatureMatrix:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot open set file: {exc.strerror}", path=path) from exc
    rows = []
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise DataError(f"non-numeric value ({exc})", path=path, row=lineno) from None
            if rows and len(values) != len(rows[0]):
                raise DataError(f"expected {len(rows[0])} columns, found {len(values)}", path=path, row=lineno)
            if not all(np.isfinite(values)):
                raise DataError("non-finite value", path=path, row=lineno)
            rows.append(values)
    if not rows:
        raise DataError("set file is empty", path=path)
    return FeatureMatrix(np.array(rows))


def write_set_csv(path, features) -> None:
    values = np.asarray(features.values if isinstance(features, FeatureMatrix) else features, dtype=float)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in values:
            writer.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class ManifestEntry:
    label: str
    set_id: str
    path: Path
    role: str


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    entries: tuple
    feature_dim: Optional[int] = None
    normalize: bool = True


def load_manifest(manifest_path) -> DatasetManifest:
    manifest_path = Path(manifest_path)
    try:
        data = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read manifest: {exc.strerror}", path=manifest_path) from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON ({exc.msg})", path=manifest_path, row=exc.lineno) from None
    if not isinstance(data, dict) or not isinstance(data.get("entries"), list):
        raise DataError("manifest needs an 'entries' list", path=manifest_path)
    root = manifest_path.parent
    entries = []
    for i, raw in enumerate(data["entries"]):
        try:
            label, rel, role = str(raw["label"]), raw["path"], raw.get("role", "gallery")
        except (KeyError, TypeError):
            raise DataError(f"entry {i} needs 'label' and 'path'", path=manifest_path) from None
        if role not in ("gallery", "query"):
            raise DataError(f"entry {i} has unknown role {role!r}", path=manifest_path)
        if role == "gallery" and not label:
            raise DataError(f"gallery entry {i} has an empty label", path=manifest_path)
        entries.append(ManifestEntry(label, str(raw.get("set_id", f"{label}/{i}")), root / rel, role))
    dim = data.get("feature_dim")
    return DatasetManifest(root, tuple(entries), None if dim is None else int(dim),
                           bool(data.get("normalize", True)))


def load_dataset(manifest_path, frames: Optional[int] = None, normalize: Optional[bool] = None):
    """Read every set named by a manifest; returns ``(galleries, queries)``.

    ``frames`` keeps the first N frames of each set (all of them if the set
    is shorter). ``normalize`` overrides the manifest's flag.
    """
    manifest = load_manifest(manifest_path)
    norm = manifest.normalize if normalize is None else normalize
    dim = manifest.feature_dim
    galleries, queries = [], []
    for entry in manifest.entries:
        if not entry.path.exists():
            raise DataError("set file does not exist", path=entry.path)
        features = read_set_csv(entry.path)
        if dim is None:
            dim = features.rows
        if features.rows != dim:
            raise DataError(f"feature dimension {features.rows} != {dim}", path=entry.path)
        features = features.first(frames)
        if norm:
            try:
                features = features.normalized()
            except DataError as exc:
                raise DataError(str(exc), path=entry.path) from None
        target = galleries if entry.role == "gallery" else queries
        target.append(ImageSet(entry.label, features, entry.set_id))
    labels = [g.label for g in galleries]
    if len(set(labels)) != len(labels):
        raise DataError("gallery labels must be unique", path=manifest_path)
    return galleries, queries


def save_gallery(D: CompressedGalleryCollection, path, normalized: bool = True, meta: Optional[dict] = None) -> None:
    doc = {
        "format": GALLERY_FORMAT,
        "version": GALLERY_VERSION,
        "dimension": D.dimension,
        "normalized_inputs": normalized,
        "meta": meta or {},
        "classes": [{"label": label, "atoms": atoms.values.T.tolist()} for label, atoms in D.classes],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_gallery(path):
    """Returns ``(gallery, document)``; atoms are stored one list per atom."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read gallery: {exc.strerror}", path=path) from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON ({exc.msg})", path=path, row=exc.lineno) from None
    if doc.get("format") != GALLERY_FORMAT:
        raise DataError(f"not a {GALLERY_FORMAT} file", path=path)
    try:
        classes = tuple((c["label"], FeatureMatrix(np.array(c["atoms"], dtype=float).T)) for c in doc["classes"])
        gallery = CompressedGalleryCollection(classes)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed gallery ({exc})", path=path) from None
    if gallery.dimension != doc.get("dimension", gallery.dimension):
        raise DataError("stored dimension does not match the atoms", path=path)
    return gallery, doc


def write_synthetic(spec: SyntheticSpec, out_dir) -> Path:
    """Write one CSV per set plus ``manifest.json``; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    galleries, queries = generate_synthetic(spec)
    entries = []
    for role, sets in (("gallery", galleries), ("query", queries)):
        for s in sets:
            name = s.set_id.replace("/", "_") + ".csv"
            write_set_csv(out_dir / name, s.features)
            entries.append({"label": s.label, "set_id": s.set_id, "path": name, "role": role})
    manifest = {"feature_dim": spec.dim, "normalize": True,
                "synthetic": spec.to_dict(), "entries": entries}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1))
    return path
