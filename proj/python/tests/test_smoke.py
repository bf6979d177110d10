import json
import math
import os
import subprocess

import pytest

import droplab


def test_kinds():
    assert droplab.DROPPING_KINDS == ("dropout", "dropedge", "dropnode", "dropmessage")


def test_graph_construction():
    g = droplab.Graph.from_edges(3, [(0, 1), (1, 2)])
    assert g.n == 3
    assert g.edges() == [(0, 1), (1, 2)]
    assert g.degrees() == [1, 2, 1]
    with pytest.raises(ValueError):
        droplab.Graph.from_edges(2, [(0, 0)])


def test_generators():
    g = droplab.make_regular_graph(20, 4, 1)
    assert set(g.degrees()) == {4}
    s = droplab.make_sbm(n=60, blocks=3, dim=8, seed=2)
    assert s.num_classes == 3
    assert len(s.features()) == 60 and len(s.features()[0]) == 8
    assert droplab.perturb_add_edges(s, 0.5, 3).num_undirected > s.num_undirected
    assert droplab.rewire(s, 0.5, 3).num_undirected == s.num_undirected


def test_dataset_round_trip(tmp_path):
    s = droplab.make_sbm(n=30, dim=4, seed=5)
    droplab.save_dataset(s, tmp_path / "d")
    back = droplab.load_dataset(tmp_path / "d")
    assert back.edges() == s.edges()
    assert back.labels == s.labels


def test_variance_closed_forms():
    # n = 10, c = 3, d = 4, delta = 0.5
    assert droplab.variance_closed_form("dropout", 10, 3, 4, 0.5) == pytest.approx(120.0)
    assert droplab.variance_closed_form("dropedge", 10, 3, 4, 0.5) == pytest.approx(180.0)
    assert droplab.variance_closed_form("dropnode", 10, 3, 4, 0.5) == pytest.approx(360.0)
    assert droplab.variance_closed_form("dropmessage", 10, 3, 4, 0.5) == pytest.approx(30.0)
    with pytest.raises(ValueError):
        droplab.variance_closed_form("dropsomething", 10, 3, 4, 0.5)


def test_variance_monte_carlo_agrees():
    g = droplab.make_regular_graph(20, 4, 1)
    r = droplab.variance_monte_carlo("dropmessage", g, 4, 0.3, 5000, 9)
    assert abs(r["estimate"] - r["closed_form"]) < 5 * r["std_error"]


def test_regularization_check():
    r = droplab.regularization_check("dropmessage", 0.1, 5000, 1)
    assert r["base_loss"] == pytest.approx(12 * math.log(2))
    assert abs(r["gap"] - r["taylor_term"]) < 0.1 * r["taylor_term"]


def test_entropy():
    assert droplab.entropy_clean([0.5, 0.5], [1, 1], [1, 1], 4) == pytest.approx(math.log(2))
    dm = droplab.entropy_expected("dropmessage", [0.3, 0.7], [2, 3], [4, 5], 8, 0.4)
    do = droplab.entropy_expected("dropout", [0.3, 0.7], [2, 3], [4, 5], 8, 0.4)
    assert dm >= do


def test_diversity_bound():
    g = droplab.Graph.from_edges(3, [(0, 1), (1, 2)])
    # 1 - 1/degree when the degree is below c
    assert droplab.diversity_rate_bound(g, 40) == pytest.approx([0.0, 0.5, 0.0])


def test_run_experiment(tmp_path):
    cfg = json.loads(droplab.config_defaults("variance"))
    cfg["trials"] = 500
    cfg["rates"] = [0.5]
    droplab.run_experiment(json.dumps(cfg), tmp_path / "v")
    echo = json.loads((tmp_path / "v" / "config.json").read_text())
    assert echo["trials"] == 500
    with pytest.raises(ValueError):
        droplab.config_defaults("nonsense")


@pytest.mark.skipif(not os.environ.get("DROPLAB_CLI"), reason="command-line tool not built")
def test_matches_command_line_tool(tmp_path):
    cfg = json.loads(droplab.config_defaults("entropy"))
    droplab.run_experiment(json.dumps(cfg), tmp_path / "py")
    subprocess.run([os.environ["DROPLAB_CLI"], "entropy", "--out", str(tmp_path / "cli")], check=True,
                   capture_output=True)
    for name in os.listdir(tmp_path / "py"):
        assert (tmp_path / "py" / name).read_bytes() == (tmp_path / "cli" / name).read_bytes()
