import csv

import numpy as np
import pytest

from missnet.errors import SchemaError
from missnet.nn import build_network, load_network, neutralizer_tables, save_network, write_neutralizers


def _net(seed=0):
    net = build_network({"preset": "fusion", "modalities": [("a", 3, 2), ("b", 2, 2)],
                         "method": "m_promissing"}, seed=seed)
    rng = np.random.default_rng(seed)
    for v in net.params().values():
        v += rng.normal(size=v.shape)
    return net


class TestModelFile:
    def test_round_trip_is_exact(self, tmp_path):
        net = _net(3)
        save_network(net, tmp_path / "m.txt")
        back = load_network(tmp_path / "m.txt")
        assert back.desc == net.desc
        for k, v in net.params().items():
            assert np.array_equal(back.params()[k], v)

    def test_predictions_survive(self, tmp_path):
        net = _net(1)
        save_network(net, tmp_path / "m.txt")
        X = {"a": np.array([[0.1, np.nan, 2.0]]), "b": np.array([[np.nan, np.nan]])}
        assert np.array_equal(load_network(tmp_path / "m.txt").predict(X), net.predict(X))

    def test_bad_header(self, tmp_path):
        (tmp_path / "m.txt").write_text("something else\n")
        with pytest.raises(SchemaError):
            load_network(tmp_path / "m.txt")

    def test_missing_param(self, tmp_path):
        save_network(_net(), tmp_path / "m.txt")
        lines = (tmp_path / "m.txt").read_text().splitlines()
        (tmp_path / "m.txt").write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(SchemaError):
            load_network(tmp_path / "m.txt")


class TestNeutralizerCsv:
    def test_tables_only_for_nan_dense(self):
        assert sorted(neutralizer_tables(_net())) == ["a/rep", "b/rep"]

    def test_csv_values(self, tmp_path):
        net = _net(2)
        tables = neutralizer_tables(net)
        write_neutralizers(tmp_path / "u.csv", tables)
        with open(tmp_path / "u.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 3 + 2 * 2
        lay = net.layers()["a/rep"]
        first = rows[0]
        k, j = int(first["neuron"]), int(first["feature"])
        assert float(first["value"]) == -lay.b[k] / (lay.p * lay.W[k, j])
