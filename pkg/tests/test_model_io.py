from __future__ import annotations

import numpy as np
import pytest

from follicle.config import TrainConfig
from follicle.errors import ModelFormatError
from follicle.model_io import MAGIC, load_model, save_model
from follicle.nn import Adam, build_model, cross_entropy

CONFIG = TrainConfig(input_size=16, conv_filters=(2, 3, 4), dense_hidden=8, seed=33, epochs=1)


def trained_model():
    model = build_model(CONFIG)
    rng = np.random.default_rng(34)
    adam = Adam(model.params())
    for _ in range(3):
        x = rng.random((4, 16, 16, 3)).astype(np.float32)
        y = rng.integers(0, 3, 4)
        probs = model.forward(x, train=True, rng=rng)
        model.backward(probs, y)
        adam.step()
    return model, adam


class TestRoundTrip:
    def test_save_load_save_is_byte_identical(self, tmp_path):
        model, adam = trained_model()
        p1, p2 = tmp_path / "a.foll1", tmp_path / "b.foll1"
        save_model(model, p1, adam_step=adam.t, extra={"config_hash": "cafe"})
        loaded = load_model(p1)
        save_model(loaded.model, p2, adam_step=loaded.adam_step, extra=loaded.header["extra"])
        assert p1.read_bytes() == p2.read_bytes()

    def test_weights_and_moments_round_trip_exactly(self, tmp_path):
        model, adam = trained_model()
        path = tmp_path / "m.foll1"
        save_model(model, path, adam_step=adam.t)
        loaded = load_model(path)
        assert loaded.adam_step == adam.t
        for orig, back in zip(model.params(), loaded.model.params()):
            assert orig.name == back.name
            assert np.array_equal(orig.value, back.value)
            assert np.array_equal(orig.m, back.m)
            assert np.array_equal(orig.v, back.v)

    def test_loaded_model_predicts_identically(self, tmp_path):
        model, adam = trained_model()
        path = tmp_path / "m.foll1"
        save_model(model, path, adam_step=adam.t)
        loaded = load_model(path)
        x = np.random.default_rng(35).random((3, 16, 16, 3)).astype(np.float32)
        assert np.array_equal(model.forward(x), loaded.model.forward(x))

    def test_deterministic_bytes_for_same_model(self, tmp_path):
        model, adam = trained_model()
        p1, p2 = tmp_path / "a.foll1", tmp_path / "b.foll1"
        save_model(model, p1, adam_step=adam.t)
        save_model(model, p2, adam_step=adam.t)
        assert p1.read_bytes() == p2.read_bytes()

    def test_config_restored(self, tmp_path):
        model, _ = trained_model()
        path = tmp_path / "m.foll1"
        save_model(model, path)
        assert load_model(path).config == CONFIG


class TestFormatErrors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad"
        path.write_bytes(b"NOTRIGHT" + b"\x00" * 32)
        with pytest.raises(ModelFormatError, match="magic"):
            load_model(path)

    def test_unsupported_version(self, tmp_path):
        model, _ = trained_model()
        path = tmp_path / "m.foll1"
        save_model(model, path)
        data = bytearray(path.read_bytes())
        data[len(MAGIC)] = 99
        path.write_bytes(bytes(data))
        with pytest.raises(ModelFormatError, match="version"):
            load_model(path)

    def test_truncated_file_is_clean_error(self, tmp_path):
        model, _ = trained_model()
        path = tmp_path / "m.foll1"
        save_model(model, path)
        full = path.read_bytes()
        for cut in (4, len(full) // 2, len(full) - 3):
            path.write_bytes(full[:cut])
            with pytest.raises(ModelFormatError):
                load_model(path)

    def test_header_blob_mismatch_names_layer(self, tmp_path):
        import json

        model, _ = trained_model()
        path = tmp_path / "m.foll1"
        save_model(model, path)
        data = path.read_bytes()
        hlen = int.from_bytes(data[7:11], "little")
        header = json.loads(data[11 : 11 + hlen])
        header["params"][0]["shape"] = [3, 3, 2, 99]
        new_header = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        path.write_bytes(
            data[:7] + len(new_header).to_bytes(4, "little") + new_header + data[11 + hlen :]
        )
        with pytest.raises(ModelFormatError, match="conv1.weight"):
            load_model(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        model, _ = trained_model()
        path = tmp_path / "m.foll1"
        save_model(model, path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(ModelFormatError, match="trailing"):
            load_model(path)
