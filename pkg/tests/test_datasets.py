import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from hokpool.classify import LinearModel
from hokpool.config import RunConfig, load_config, load_schema
from hokpool.datasets import (
    Dataset,
    dumps_dataset,
    load_dataset,
    load_descriptors,
    load_model,
    save_dataset,
    save_descriptors,
    save_model,
    synth_generate,
)
from hokpool.errors import ConfigError, InvalidInputError, InvalidParameterError
from hokpool.pooling import average_pool

FIXTURE = Path(__file__).parent / "fixtures" / "tiny.jsonl"


class TestLoadDataset:
    def test_fixture(self):
        ds = load_dataset(FIXTURE)
        assert ds.classes == ["chop", "stir"] and ds.d == 2
        assert [(s.id, s.label, s.n, s.d) for s in ds] == [("a", 0, 3, 2), ("b", 1, 1, 2), ("c", 0, 2, 2)]
        np.testing.assert_array_equal(ds[1].scores, [[0.25, 0.75]])

    def test_empty_body(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text('{"classes": ["x", "y"], "d": 2}\n')
        assert len(load_dataset(path)) == 0

    def test_round_trip(self, tmp_path):
        ds = synth_generate(n_classes=3, per_class=2, length_range=(3, 5), seed=1)
        save_dataset(ds, tmp_path / "d.jsonl")
        back = load_dataset(tmp_path / "d.jsonl")
        assert back.classes == ds.classes and back.d == ds.d
        for a, b in zip(ds, back):
            assert (a.id, a.label) == (b.id, b.label)
            np.testing.assert_array_equal(a.scores, b.scores)

    @pytest.mark.parametrize(
        "line, message",
        [
            ('{"id": "z", "label": "chop", "scores": [[0.5, 0.5]]', "malformed JSON"),
            ('{"id": "z", "label": "bake", "scores": [[0.5, 0.5]]}', "label 'bake'"),
            ('{"id": "a", "label": "chop", "scores": [[0.5, 0.5]]}', "duplicate id"),
            ('{"id": "z", "label": "chop", "scores": [[0.2, 0.3, 0.5]]}', "length 3"),
            ('{"id": "z", "label": "chop", "scores": [[0.2, 0.2]]}', "sums to"),
            ('{"id": "z", "label": "chop"}', "scores"),
        ],
    )
    def test_bad_line_named(self, tmp_path, line, message):
        path = tmp_path / "bad.jsonl"
        path.write_text(FIXTURE.read_text() + line + "\n")
        with pytest.raises(InvalidInputError, match=f":5: .*{message}"):
            load_dataset(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "blank.jsonl"
        path.write_text("\n")
        with pytest.raises(InvalidInputError, match="header"):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidInputError):
            load_dataset(tmp_path / "nope.jsonl")


class TestSynth:
    def test_noiseless_frames_are_modes(self):
        ds = synth_generate(n_classes=4, per_class=3, noise=0.0, seed=2)
        modes = {tuple(np.round(row, 12)) for s in ds for row in s.scores}
        assert len(modes) <= 4 * 3
        for row in modes:
            assert max(row) == pytest.approx(0.7)

    def test_reversed_pairs(self):
        ds = synth_generate(n_classes=2, per_class=1, length_range=(30, 30), noise=0.0, seed=0)
        first = np.argmax(ds[0].scores, axis=1)
        second = np.argmax(ds[1].scores, axis=1)
        order = lambda seq: list(dict.fromkeys(seq.tolist()))  # noqa: E731
        assert order(first) == order(second)[::-1]

    def test_pair_means_match(self):
        ds = synth_generate(n_classes=2, per_class=400, noise=0.3, seed=7)
        means = [np.mean([average_pool(s).values for s in ds if s.label == c], axis=0) for c in (0, 1)]
        assert np.max(np.abs(means[0] - means[1])) < 0.02

    def test_byte_identical(self):
        a = dumps_dataset(synth_generate(seed=11, per_class=3))
        b = dumps_dataset(synth_generate(seed=11, per_class=3))
        assert a == b
        assert a != dumps_dataset(synth_generate(seed=12, per_class=3))

    def test_shape(self):
        ds = synth_generate(n_classes=6, per_class=5, length_range=(30, 50))
        assert len(ds) == 30 and ds.d == 6
        assert all(30 <= s.n <= 50 for s in ds)
        np.testing.assert_array_equal(np.bincount(ds.labels), [5] * 6)

    @pytest.mark.parametrize(
        "kw", [dict(n_classes=1), dict(per_class=0), dict(length_range=(5, 2)), dict(noise=1.5), dict(peak=0.0)]
    )
    def test_invalid(self, kw):
        with pytest.raises(InvalidParameterError):
            synth_generate(**kw)


class TestArtifacts:
    def test_descriptor_round_trip(self, tmp_path, rng):
        values = rng.standard_normal((3, 5))
        save_descriptors(tmp_path / "d.npz", values, ["a", "b", "c"], [0, 1, 0], {"kind": "average"})
        v, ids, labels, meta = load_descriptors(tmp_path / "d.npz")
        np.testing.assert_array_equal(v, values)
        assert ids == ["a", "b", "c"] and labels.tolist() == [0, 1, 0]
        assert meta["kind"] == "average" and meta["length"] == 5

    def test_model_round_trip(self, tmp_path, rng):
        model = LinearModel(rng.standard_normal((2, 3)), rng.standard_normal(2), 0.1, 5, (3.0, 2.0, 1.0))
        save_model(tmp_path / "m.npz", model, {"kind": "hok"})
        back, meta = load_model(tmp_path / "m.npz")
        np.testing.assert_array_equal(back.weights, model.weights)
        assert back.objective_trace == model.objective_trace
        assert meta["final_objective"] == 1.0

    def test_unreadable_descriptor(self, tmp_path):
        with pytest.raises(InvalidInputError):
            load_descriptors(tmp_path / "missing.npz")


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert (cfg.pivots.k_f, cfg.pivots.k_t, cfg.pivots.sigma_t) == (48, 5, 0.1)
        assert (cfg.hok.alpha, cfg.hok.r) == (0.1, 3)
        assert cfg.second_order.sigma == 0.1
        jsonschema.validate(cfg.to_dict(), load_schema("run_config.schema.json"))

    def test_round_trip(self):
        cfg = RunConfig().with_overrides(hok__alpha=0.5, folds=7)
        assert RunConfig.from_dict(cfg.to_dict()) == cfg

    @pytest.mark.parametrize(
        "doc",
        [
            {"bogus": 1},
            {"hok": {"alpha": 0.0}},
            {"hok": {"alpha": 1.5}},
            {"hok": {"r": 5}},
            {"pivots": {"k_f": 0}},
            {"folds": 1},
            {"hok": {"zeta1": 0.9, "zeta2": 0.9}},
            {"hok": {"extra": True}},
        ],
    )
    def test_rejects(self, doc):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(doc)

    def test_bad_override(self):
        with pytest.raises(ConfigError):
            RunConfig().with_overrides(hok__alpha=-1.0)

    def test_load_config(self, tmp_path):
        assert load_config(None) == RunConfig()
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"seed": 4, "pivots": {"k_f": 32}}))
        cfg = load_config(path)
        assert cfg.seed == 4 and cfg.pivots.k_f == 32
        path.write_text("{")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_pivot_schema_matches_serialization(self, rng):
        from conftest import random_pivots

        jsonschema.validate(random_pivots(rng, 3, 4).to_dict(), load_schema("pivots.schema.json"))

    def test_dataset_object(self):
        ds = Dataset(["a", "b"], 2)
        assert len(ds) == 0 and ds.labels.shape == (0,)
