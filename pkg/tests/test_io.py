import json
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from levytree import io
from levytree.errors import ValidationError
from levytree.estimate import chi_hat
from levytree.learn import learn_tree
from levytree.simulate import IncrementMatrix

EXAMPLES = Path(__file__).resolve().parents[1] / "examples_data"


def _prices(tmp_path, text):
    p = tmp_path / "prices.csv"
    p.write_text(text)
    return p


def test_ingest_log_returns(tmp_path):
    inc = io.ingest_prices(_prices(tmp_path, "date,A,B\n2021-01-04,100,50\n2021-01-05,110,50\n2021-01-06,99,25\n"))
    assert_allclose(inc.data, [[np.log(1.1), 0.0], [np.log(0.9), np.log(0.5)]], rtol=1e-14)
    assert inc.labels == ["A", "B"]


def test_ingest_constant_prices(tmp_path):
    inc = io.ingest_prices(_prices(tmp_path, "date,A\n2021-01-04,7\n2021-01-05,7\n2021-01-06,7\n"))
    assert_array_equal(inc.data, np.zeros((2, 1)))


@pytest.mark.parametrize(
    "body, match",
    [
        ("date,A\n2021-01-04,100\n2021-01-05,0\n", r"row 3.*A: price must be positive"),
        ("date,A\n2021-01-04,100\n2021-01-05,\n", "missing"),
        ("date,A\n2021-01-05,100\n2021-01-04,101\n", "strictly increasing"),
        ("date,A\n2021-01-04,100\n2021-01-04,101\n", "strictly increasing"),
        ("date,A\n2021-01-04,100\nyesterday,101\n", "date"),
        ("time,A\n2021-01-04,100\n2021-01-05,101\n", "header"),
        ("date,A\n2021-01-04,100\n", "two price rows"),
        ("date,A,B\n2021-01-04,100,1\n2021-01-05,101\n", "cells"),
    ],
)
def test_ingest_errors(tmp_path, body, match):
    with pytest.raises(ValidationError, match=match):
        io.ingest_prices(_prices(tmp_path, body))


def test_ingest_example_prices():
    inc = io.ingest_prices(EXAMPLES / "prices.csv")
    assert inc.data.shape == (750, 5)
    assert np.all(np.isfinite(inc.data))


def test_increments_round_trip(tmp_path):
    inc = IncrementMatrix(np.random.default_rng(0).standard_cauchy((20, 3)), seed=5, labels=["a", "b", "c"])
    io.write_increments(tmp_path / "x.csv", inc)
    back = io.read_increments(tmp_path / "x.csv")
    assert_array_equal(back.data, inc.data)
    assert back.labels == ["a", "b", "c"]
    meta = json.loads((tmp_path / "x.csv.json").read_text())
    assert meta["seed"] == 5


def test_read_increments_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,X1\n1,abc\n")
    with pytest.raises(ValidationError, match="row 2"):
        io.read_increments(p)
    with pytest.raises(ValidationError, match="cannot read"):
        io.read_increments(tmp_path / "missing.csv")


def test_chi_round_trip(tmp_path):
    est = chi_hat(np.random.default_rng(1).standard_cauchy((200, 3)), 20)
    io.write_chi(tmp_path, est, ["a", "b", "c"])
    back, labels = io.read_chi(tmp_path)
    assert labels == ["a", "b", "c"]
    for name in ("chi", "chi_pp", "chi_pm", "chi_mp", "chi_mm"):
        assert_array_equal(getattr(back, name), getattr(est, name))
    assert (back.k, back.n) == (20, 200)


def test_dot_round_trip(tmp_path):
    x = np.random.default_rng(2).standard_cauchy((300, 1))
    x = np.hstack([x, x + np.random.default_rng(3).normal(size=(300, 1)), np.random.default_rng(4).standard_cauchy((300, 1))])
    learned = learn_tree(x, 60, warn=False)
    p = tmp_path / "t.dot"
    p.write_text(io.tree_to_dot(learned, ["a", "b", "c"]))
    assert io.read_dot_tree(p, ["a", "b", "c"]) == learned.topology
    assert "gamma_hat" in p.read_text()


def test_config_loads_example():
    model = io.load_model(EXAMPLES / "hr_chain3.json")
    assert model.d == 3
    assert model.dependence.edges[(1, 2)].m == 0.8
    assert_allclose(model.dependence.gamma()[0, 2], 3.0)


def _cfg(**over):
    cfg = json.loads((EXAMPLES / "hr_chain3.json").read_text())
    cfg.update(over)
    return cfg


@pytest.mark.parametrize(
    "over, match",
    [
        ({"family": "gauss"}, r"config\.family"),
        ({"tree": [[1, 2], [2, 4]]}, r"config\.tree\[1\]"),
        ({"tree": [[1, 2], [2, 1]]}, r"config\.tree"),
        ({"edge_params": {"1-2": 1.0}}, r"config\.edge_params.*2-3"),
        ({"edge_params": {"1-2": 1.0, "2-3": -1.0}}, r"config\.edge_params"),
        ({"m": {"1-2": 1.5, "2-3": 0.5}}, r"config\.m"),
        ({"margins": {"alpha": [1.0, 2.5, 1.0]}}, r"config\.margins"),
        ({"drift": [0.0, 0.0]}, r"config\.drift"),
        ({"colour": "red"}, "unknown fields"),
    ],
)
def test_config_errors_name_the_field(over, match):
    with pytest.raises(ValidationError, match=match):
        io.model_from_config(_cfg(**over))


def test_invalid_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{")
    with pytest.raises(ValidationError, match="invalid JSON"):
        io.load_model(p)


def test_default_threads(monkeypatch):
    monkeypatch.setenv("LEVYTREE_THREADS", "3")
    assert io.default_threads() == 3
    monkeypatch.setenv("LEVYTREE_THREADS", "many")
    with pytest.raises(ValidationError):
        io.default_threads()
