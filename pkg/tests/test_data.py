import json

import numpy as np
import pytest

from iscrc import (ConfigError, DataError, DictLearnConfig, SyntheticSpec, compress_gallery, generate_synthetic,
                   load_dataset, load_gallery, save_gallery)
from iscrc.data import read_set_csv, write_set_csv, write_synthetic


def write_manifest(tmp_path, entries, **extra):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"entries": entries, **extra}))
    return path


class TestSetFiles:
    def test_roundtrip_is_exact(self, tmp_path, rng):
        X = rng.standard_normal((4, 3))
        write_set_csv(tmp_path / "s.csv", X)
        assert np.array_equal(read_set_csv(tmp_path / "s.csv").values, X)

    def test_bad_row_named(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,2\n3,abc\n")
        with pytest.raises(DataError, match="row 2") as info:
            read_set_csv(p)
        assert info.value.row == 2 and str(p) in str(info.value)

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "ragged.csv"
        p.write_text("1,2\n3,4\n5\n")
        with pytest.raises(DataError, match="row 3"):
            read_set_csv(p)

    def test_non_finite_row(self, tmp_path):
        p = tmp_path / "nan.csv"
        p.write_text("1,2\nnan,4\n")
        with pytest.raises(DataError, match="row 2"):
            read_set_csv(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("\n")
        with pytest.raises(DataError, match="empty"):
            read_set_csv(p)


class TestManifest:
    def _two_classes(self, tmp_path, rng, frames=(6, 6)):
        entries = []
        for k, n in enumerate(frames):
            write_set_csv(tmp_path / f"g{k}.csv", rng.standard_normal((5, n)))
            entries.append({"label": f"L{k}", "path": f"g{k}.csv", "role": "gallery"})
        write_set_csv(tmp_path / "q.csv", rng.standard_normal((5, 30)))
        entries.append({"label": "L0", "path": "q.csv", "role": "query", "set_id": "q"})
        return write_manifest(tmp_path, entries, feature_dim=5)

    def test_two_galleries(self, tmp_path, rng):
        g, q = load_dataset(self._two_classes(tmp_path, rng))
        assert [s.label for s in g] == ["L0", "L1"]
        assert len(q) == 1 and q[0].set_id == "q"
        assert all(s.features.has_unit_columns() for s in g + q)

    def test_frame_limit_larger_than_set(self, tmp_path, rng):
        path = self._two_classes(tmp_path, rng)
        _, q = load_dataset(path, frames=50)
        assert q[0].n_frames == 30
        _, q = load_dataset(path, frames=10)
        assert q[0].n_frames == 10

    def test_frame_limit_identity(self, tmp_path, rng):
        path = self._two_classes(tmp_path, rng)
        g_all, q_all = load_dataset(path)
        g_n, q_n = load_dataset(path, frames=30)
        for a, b in zip(g_all + q_all, g_n + q_n):
            assert np.array_equal(a.features.values, b.features.values)

    def test_normalization_flag(self, tmp_path, rng):
        path = self._two_classes(tmp_path, rng)
        g, _ = load_dataset(path, normalize=False)
        raw = read_set_csv(tmp_path / "g0.csv").values
        assert np.array_equal(g[0].features.values, raw)

    def test_missing_file(self, tmp_path):
        path = write_manifest(tmp_path, [{"label": "a", "path": "nope.csv"}])
        with pytest.raises(DataError, match="nope.csv"):
            load_dataset(path)

    def test_dimension_mismatch(self, tmp_path, rng):
        write_set_csv(tmp_path / "a.csv", rng.standard_normal((5, 3)))
        write_set_csv(tmp_path / "b.csv", rng.standard_normal((6, 3)))
        path = write_manifest(tmp_path, [{"label": "a", "path": "a.csv"}, {"label": "b", "path": "b.csv"}])
        with pytest.raises(DataError, match="b.csv"):
            load_dataset(path)

    def test_duplicate_gallery_label(self, tmp_path, rng):
        write_set_csv(tmp_path / "a.csv", rng.standard_normal((5, 3)))
        path = write_manifest(tmp_path, [{"label": "a", "path": "a.csv"}, {"label": "a", "path": "a.csv"}])
        with pytest.raises(DataError, match="unique"):
            load_dataset(path)

    @pytest.mark.parametrize("doc", ["{not json", json.dumps({"entries": 3}),
                                     json.dumps({"entries": [{"path": "x.csv"}]}),
                                     json.dumps({"entries": [{"label": "a", "path": "x.csv", "role": "probe"}]})])
    def test_malformed_manifest(self, tmp_path, doc):
        p = tmp_path / "m.json"
        p.write_text(doc)
        with pytest.raises(DataError):
            load_dataset(p)


class TestGalleryFile:
    def test_roundtrip(self, tmp_path):
        g, _ = generate_synthetic(SyntheticSpec(classes=3, dim=12, subspace_dim=2, frames_per_set=8, seed=2))
        D = compress_gallery(g, DictLearnConfig(atoms=4))
        save_gallery(D, tmp_path / "g.json", meta={"atoms": 4})
        D2, doc = load_gallery(tmp_path / "g.json")
        assert D2.labels == D.labels
        assert np.array_equal(D2.matrix, D.matrix)
        assert doc["meta"] == {"atoms": 4}

    def test_rejects_other_json(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text(json.dumps({"format": "something"}))
        with pytest.raises(DataError):
            load_gallery(p)


class TestSynthetic:
    def test_deterministic_bytes(self, tmp_path):
        spec = SyntheticSpec(classes=2, dim=10, subspace_dim=2, frames_per_set=5, seed=9)
        m1 = write_synthetic(spec, tmp_path / "a")
        m2 = write_synthetic(spec, tmp_path / "b")
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
        g, q = load_dataset(m1)
        g2, q2 = generate_synthetic(spec)
        # loading re-normalizes, which may move the last bit
        assert all(np.allclose(a.features.values, b.features.values, rtol=0, atol=1e-15)
                   for a, b in zip(g + q, g2 + q2))
        assert m2.exists()

    def test_shapes_and_labels(self):
        spec = SyntheticSpec(classes=4, dim=30, subspace_dim=3, frames_per_set=7, sets_per_class=3, seed=1)
        g, q = generate_synthetic(spec)
        assert len(g) == 4 and len(q) == 8
        assert all(s.features.shape == (30, 7) for s in g + q)
        assert [s.label for s in q[:4]] == [s.label for s in g]
        assert all(s.features.has_unit_columns() for s in g + q)

    def test_subspace_structure(self):
        spec = SyntheticSpec(classes=2, dim=40, subspace_dim=3, noise_sigma=0.0, seed=3)
        g, q = generate_synthetic(spec)
        for k in range(2):
            stacked = np.hstack([g[k].features.values] + [s.features.values for s in q if s.label == g[k].label])
            sv = np.linalg.svd(stacked, compute_uv=False)
            assert sv[3] < 1e-10 * sv[0]

    def test_shells_unit_norm(self):
        g, q = generate_synthetic(SyntheticSpec(classes=3, dim=4, geometry="shells", seed=7))
        assert all(s.features.has_unit_columns() for s in g + q)

    @pytest.mark.parametrize("kw", [{"subspace_dim": 100}, {"frames_per_set": 0}, {"sets_per_class": 1},
                                    {"geometry": "torus"}, {"noise_sigma": -1.0}])
    def test_invalid_spec(self, kw):
        with pytest.raises(ConfigError):
            SyntheticSpec(**kw)

    def test_spec_roundtrip(self):
        spec = SyntheticSpec(classes=3, seed=5)
        assert SyntheticSpec.from_dict(spec.to_dict()) == spec
        with pytest.raises(ConfigError):
            SyntheticSpec.from_dict({"clases": 3})
