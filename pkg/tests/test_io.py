import json

import numpy as np
import pytest

from lbdn import io
from lbdn.circconv import ConvParams
from lbdn.exceptions import FormatVersionError
from lbdn.sandwich import extract_weights, random_params, realize


def arrays_equal(a, b):
    for la, lb in zip(a.layers, b.layers):
        for name in ("X", "Y", "b", "d"):
            u, v = getattr(la, name), getattr(lb, name)
            if u is None or v is None:
                assert u is None and v is None
            else:
                np.testing.assert_array_equal(u, v)
        assert la.g == lb.g and la.h == lb.h


class TestModelDocuments:
    def test_exact_round_trip(self, tmp_path):
        params = random_params([3, 5, 4, 2], gamma=7.5, seed=0, activation="tanh")
        path = tmp_path / "model.json"
        io.save_params(path, params)
        again = io.load_params(path)
        assert again.gamma == 7.5 and again.activation == "tanh"
        arrays_equal(params, again)

    def test_single_unit_layers_keep_shape(self, tmp_path):
        params = random_params([1, 1, 1], seed=1)
        io.save_params(tmp_path / "m.json", params)
        again = io.load_params(tmp_path / "m.json")
        assert again.layers[0].X.shape == (1, 1) and again.layers[0].Y.shape == (1, 1)

    def test_layout(self):
        doc = io.params_to_dict(random_params([2, 3, 1], seed=2))
        assert doc["format_version"] == io.FORMAT_VERSION and doc["kind"] == "model"
        assert set(doc["layers"][0]) == {"d", "X", "Y", "b", "g", "h"}
        assert doc["layers"][1]["d"] is None
        json.dumps(doc)

    @pytest.mark.parametrize("version", ["2.0", "0.9", "x"])
    def test_rejects_unknown_major(self, version):
        doc = io.params_to_dict(random_params([2, 1], seed=0))
        doc["format_version"] = version
        with pytest.raises(FormatVersionError):
            io.params_from_dict(doc)

    def test_accepts_newer_minor(self):
        doc = io.params_to_dict(random_params([2, 1], seed=0))
        doc["format_version"] = "1.7"
        io.params_from_dict(doc)

    def test_missing_version(self):
        with pytest.raises(FormatVersionError):
            io.weights_from_dict({"W": [], "b": [], "Lambda": [], "gamma": 1.0})

    def test_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ValueError):
            io.read_json(path)


class TestWeightDocuments:
    def test_round_trip(self, tmp_path):
        weights = extract_weights(realize(random_params([2, 4, 3, 1], gamma=3.0, seed=3)))
        io.save_weights(tmp_path / "w.json", weights)
        kind, again = io.load_document(tmp_path / "w.json")
        assert kind == "weights" and again.gamma == 3.0
        for u, v in zip(weights.W + weights.b + weights.Lambda, again.W + again.b + again.Lambda):
            np.testing.assert_array_equal(u, v)

    def test_document_kind_dispatch(self, tmp_path):
        io.save_params(tmp_path / "m.json", random_params([2, 1], seed=0))
        assert io.load_document(tmp_path / "m.json")[0] == "model"
        doc = io.params_to_dict(random_params([2, 1], seed=0))
        doc["kind"] = "spline"
        io.write_json(tmp_path / "odd.json", doc)
        with pytest.raises(ValueError):
            io.load_document(tmp_path / "odd.json")


class TestOtherFormats:
    def test_conv_params(self):
        params = ConvParams.random(2, 3, 4, seed=0)
        again = io.conv_from_dict(json.loads(json.dumps(io.conv_to_dict(params))))
        np.testing.assert_array_equal(again.P, params.P)
        np.testing.assert_array_equal(again.d, params.d)
        np.testing.assert_array_equal(again.b, params.b)

    def test_metrics_csv(self, tmp_path):
        rows = [{"epoch": 0, "lr": 0.0, "train_mse": 0.1 + 0.2, "test_mse": 1 / 3, "tightness": float("nan")}]
        io.write_metrics(tmp_path / "m.csv", rows)
        (back,) = io.read_csv(tmp_path / "m.csv")
        assert list(back) == list(io.METRIC_COLUMNS)
        assert float(back["train_mse"]) == 0.1 + 0.2 and float(back["test_mse"]) == 1 / 3
        assert np.isnan(float(back["tightness"]))
