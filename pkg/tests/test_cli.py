import json
import os

import numpy as np
import pytest

from netwalk.cli import main
from netwalk.graph import load_edge_list

TINY = dict(batch_size=16, walk_len=6, eval_every=5, patience=2, window=10, max_iters=10,
            eval_transitions=2000, latent_dim=4, gen_hidden=8, gen_proj=6, disc_hidden=6,
            disc_proj=5, d_steps_per_g=2)


@pytest.fixture(scope="module")
def sbm(tmp_path_factory):
    out = tmp_path_factory.mktemp("sbm")
    assert main(["synth", "dcsbm", "--n", "60", "--k", "2", "--out", str(out), "--seed", "1"]) == 0
    return out


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["stats", str(tmp_path / "nope.txt"), "--out", str(tmp_path)]) == 2
    assert "nope.txt" in capsys.readouterr().err
    assert main(["train", str(tmp_path / "nope.txt"), "--out", str(tmp_path)]) == 2
    assert main(["generate", str(tmp_path / "x.nwck"), "--out", str(tmp_path)]) == 2


def test_usage_errors(tmp_path):
    assert main([]) == 2
    assert main(["synth", "bogus", "--out", str(tmp_path)]) == 2
    assert main(["--threads", "0", "stats", "x", "--out", str(tmp_path)]) == 2


def test_synth_outputs(sbm):
    names = set(os.listdir(sbm))
    assert {"graph.txt", "dcsbm_spec.json", "edge_probabilities.npy", "communities.txt",
            "manifest.json"} <= names
    g = load_edge_list(sbm / "graph.txt")
    assert g.n <= 60 and g.m > 0
    m = manifest(sbm)
    assert m["command"] == "synth" and m["seeds"] == {"seed": 1}


def test_synth_config_model(sbm, tmp_path):
    assert main(["synth", "config", "--edges", str(sbm / "graph.txt"), "--keep", "0.5",
                 "--out", str(tmp_path), "--seed", "2"]) == 0
    a, b = load_edge_list(sbm / "graph.txt"), load_edge_list(tmp_path / "graph.txt")
    assert a.m == b.m
    assert sorted(a.degrees().tolist()) == sorted(b.degrees().tolist())


def test_stats_comparison(sbm, tmp_path):
    other = tmp_path / "other"
    assert main(["synth", "dcsbm", "--n", "60", "--k", "2", "--out", str(other), "--seed", "2"]) == 0
    out = tmp_path / "stats"
    assert main(["stats", str(sbm / "graph.txt"), str(other / "graph.txt"), "--out", str(out),
                 "--communities", str(sbm / "communities.txt")]) == 0
    assert (out / "comparison.csv").exists() and (out / "graph.stats.json").exists()
    digest = manifest(out)["inputs"][str(sbm / "graph.txt")]
    assert len(digest) == 64


def test_linkpred_adamic_adar(sbm, tmp_path):
    assert main(["linkpred", str(sbm / "graph.txt"), "--method", "adamic-adar",
                 "--out", str(tmp_path)]) == 0
    row = json.loads((tmp_path / "linkpred.json").read_text())
    assert row["method"] == "adamic-adar" and row["dataset"] == "graph"
    assert 0.5 < row["auc"] <= 1 and 0 < row["ap"] <= 1


def test_train_generate_interpolate_deterministic(sbm, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(TINY))
    runs = []
    for r in ("a", "b"):
        d = tmp_path / r
        assert main(["train", str(sbm / "graph.txt"), "--out", str(d / "train"), "--config", str(cfg),
                     "--seed", "5", "--stop", "val"]) == 0
        assert main(["generate", str(d / "train" / "checkpoint.nwck"), "--out", str(d / "gen"),
                     "--walks", "3000", "--seed", "6"]) == 0
        runs.append(d)
    a, b = runs
    for rel in ("train/checkpoint.nwck", "train/split.json", "train/train_log.ndjson",
                "gen/generated.txt", "gen/scores.txt"):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
    lcc = load_edge_list(a / "train" / "lcc.txt")
    gen = load_edge_list(a / "gen" / "generated.txt")
    assert gen.m == lcc.m
    assert set(np.unique(gen.node_ids)) <= set(lcc.node_ids.tolist())
    assert manifest(a / "train")["config"]["seed"] == 5

    # the checkpoint drives link prediction and the latent grid as well
    assert main(["linkpred", str(sbm / "graph.txt"), "--method", "netgan", "--checkpoint",
                 str(a / "train" / "checkpoint.nwck"), "--split", str(a / "train" / "split.json"),
                 "--walks", "2000", "--out", str(tmp_path / "lp")]) == 0
    cfg4 = dict(TINY, latent_dim=2)
    cfg.write_text(json.dumps(cfg4))
    assert main(["train", str(sbm / "graph.txt"), "--out", str(tmp_path / "t2"), "--config", str(cfg),
                 "--max-iters", "5"]) == 0
    assert main(["interpolate", str(tmp_path / "t2" / "checkpoint.nwck"), str(sbm / "graph.txt"),
                 "--bins", "3", "--walks-per-bin", "200", "--communities", str(sbm / "communities.txt"),
                 "--trajectory", "0", "1", "--out", str(tmp_path / "lat")]) == 0
    rows = json.loads((tmp_path / "lat" / "bins.json").read_text())
    assert [tuple(r["bin"]) for r in rows] == [(0, 1), (1, 1), (2, 1)]


def test_generate_edges_flag_and_eo_mode(sbm, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(dict(TINY, max_iters=5)))
    assert main(["train", str(sbm / "graph.txt"), "--out", str(tmp_path / "t"), "--config", str(cfg),
                 "--stop", "eo", "--target-eo", "0.9"]) == 0
    ck = json.loads((tmp_path / "t" / "manifest.json").read_text())["config"]
    assert ck["stop_mode"] == "EO" and ck["target_eo"] == 0.9
    lcc = load_edge_list(tmp_path / "t" / "lcc.txt")
    target = lcc.n + 5
    assert main(["generate", str(tmp_path / "t" / "checkpoint.nwck"), "--out", str(tmp_path / "g"),
                 "--walks", "5000", "--edges", str(target)]) == 0
    assert load_edge_list(tmp_path / "g" / "generated.txt").m == target
