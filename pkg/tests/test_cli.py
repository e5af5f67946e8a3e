import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crmaps.cli import dumps, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


class TestExamples:
    def test_classify(self, capsys):
        d = run_json(capsys, "classify", "--family", "2", "--s", "0.7", "--eps", "-1")
        assert d["family"] == 2 and d["eps"] == -1 and abs(d["s"] - 0.7) < 1e-12

    def test_rank(self, capsys):
        d = run_json(capsys, "rank", "--family", "3", "--eps", "1", "--s0", "0.5")
        assert d["rank"] == 16 and d["rank_s_frozen"] == 15 and len(d["singular_values"]) <= 20

    def test_verify_subset(self, capsys):
        code, out, err = run(capsys, "verify", "--suite", "1,2")
        d = json.loads(out)
        assert code == 0 and d["all_passed"] and [c["criterion"] for c in d["criteria"]] == [1, 2]
        assert "[PASS] criterion 1" in err


class TestSubcommands:
    def test_catalog(self, capsys, tmp_path):
        code, out, _ = run(capsys, "catalog", "list", "--format", "csv")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and any(r["name"] == "H6-" for r in rows)
        jets = run_json(capsys, "catalog", "jets", "--family", "2", "--s", "0.4", "--eps", "1")
        assert jets["jets"]["values"][12] == [0.2, 0.0]
        target = tmp_path / "g.json"
        assert main(["catalog", "emit", "--family", "3", "--s", "0.9", "--eps", "-1", "--out", str(target)]) == 0
        (tmp_path / "m.json").write_text(json.dumps(json.loads(target.read_text())["map"]))
        d = run_json(capsys, "classify", "--map", str(tmp_path / "m.json"), "--eps", "-1")
        assert d["family"] == 3 and abs(d["s"] - 0.9) < 1e-12

    def test_expand(self, capsys):
        code, out, _ = run(capsys, "expand", "--family", "1", "--eps", "1", "--jet-order", "3", "--format", "csv")
        rows = list(csv.DictReader(io.StringIO(out)))
        g_w3 = [r for r in rows if r["component"] == "2" and r["i"] == "0" and r["j"] == "3"]
        assert code == 0 and float(g_w3[0]["re"]) == 0.25

    def test_membership(self, capsys):
        d = run_json(capsys, "check-membership", "--family", "3", "--s", "0.4", "--eps", "-1", "--f2")
        assert d["pass"] and d["F2"]["in_F2"]
        d = run_json(capsys, "check-membership", "--family", "2", "--eps", "1", "--formal", "--jet-order", "5")
        assert d["pass"] and d["method"] == "formal"
        d = run_json(capsys, "check-membership", "--sphere", "6", "--eps", "-1")
        assert d["model"] == "sphere" and d["pass"]
        d = run_json(capsys, "check-membership", "--family", "2", "--eps", "1", "--samples", "10")
        assert d["n_evaluated"] == 10

    def test_act_then_normalize(self, capsys, tmp_path):
        gamma = '{"lambda": 1.5, "r": 0.2, "u": [0, 1], "c": [0.1, 0.3]}'
        gp = '{"lambda": 0.7, "c_p": [[0.1, 0], [0, 0.2]]}'
        d = run_json(capsys, "act", "--family", "3", "--s", "0.4", "--eps", "1", "--gamma", gamma, "--gamma-prime", gp)
        path = tmp_path / "acted.json"
        path.write_text(json.dumps(d["map"]))
        n = run_json(capsys, "normalize", "--map", str(path), "--eps", "1")
        assert max(n["residuals"].values()) < 1e-8
        c = run_json(capsys, "classify", "--map", str(path), "--eps", "1", "--details")
        assert c["family"] == 3 and abs(c["s"] - 0.4) < 1e-8 and "normalization" in c

    def test_sphere_germ(self, capsys):
        d = run_json(capsys, "classify", "--sphere", "5", "--eps", "-1", "--at", "0.1,0.2,0.05")
        assert abs(d["s"] - 0.5) < 1e-8

    def test_stabilizer(self, capsys):
        assert run_json(capsys, "stabilizer", "--family", "3", "--eps", "1")["classification"] == "two_element"

    def test_sweep_csv_is_deterministic(self, capsys, tmp_path):
        args = ["sweep", "--base-family", "3", "--eps", "-1", "--grid-spec", "ray:rmax=0.9,n=5"]
        outs = []
        for name in ("a.csv", "b.csv"):
            assert main(args + ["--out", str(tmp_path / name)]) == 0
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1]
        header = outs[0].decode().splitlines()[0]
        assert header == "p_re,p_im,p_u,family,s,certificate,flags"

    def test_accumulate_control_writes_trace(self, capsys, tmp_path):
        out = tmp_path / "trace.csv"
        code, _, err = run(capsys, "accumulate", "--eps", "1", "--n-grid", "3", "--steps", "10", "--out", str(out))
        assert code == 1 and json.loads(err)["error"] == "SearchStalled"
        assert out.read_text().startswith("eval,best_distance,p_re,p_im,p_u")

    def test_census(self, capsys):
        assert run_json(capsys, "census", "--eps", "1")["count"] == 3


class TestConfigAndErrors:
    def test_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('eps = -1\nseed = 7\n[samples]\nmembership = 25\n')
        d = run_json(capsys, "check-membership", "--family", "2", "--config", str(cfg))
        assert d["n_evaluated"] == 25
        d = run_json(capsys, "check-membership", "--family", "2", "--config", str(cfg), "--samples", "30")
        assert d["n_evaluated"] == 30

    def test_bad_config_key(self, capsys, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("colour = 1\n")
        assert run(capsys, "census", "--config", str(cfg))[0] == 2

    @pytest.mark.parametrize("argv", [
        ["bogus"], ["classify", "--eps", "1"], ["classify", "--family", "2"],
        ["classify", "--family", "2", "--eps", "1", "--jet-order", "2"], ["census", "--eps", "1", "--format", "csv"],
        ["act", "--family", "2", "--eps", "1", "--gamma", '{"lam": 2}'],
        ["act", "--family", "2", "--eps", "1", "--gamma", '{"u": [1, 0, 0]}'],
        ["act", "--family", "2", "--eps", "1", "--gamma-prime", '{"a": 1}'],
    ])
    def test_usage_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == 2

    def test_domain_error(self, capsys):
        code, out, err = run(capsys, "classify", "--sphere", "7", "--eps", "-1", "--at", "0.1,0.2,0.05")
        assert code == 1 and out == "" and json.loads(err)["error"] == "NotInF2"

    def test_gamma_json_scalars(self, capsys):
        d = run_json(capsys, "act", "--family", "2", "--s", "0.3", "--eps", "1",
                     "--gamma", '{"lambda": 2, "u": 1, "c": [0.1, 0.2]}', "--gamma-prime", '{"u": [0, 1]}')
        assert d["gamma"]["u"] == [1.0, 0.0] and d["gamma_p"]["u"] == [0.0, 1.0]

    def test_help(self, capsys):
        assert main(["--help"]) == 0


class TestJson:
    def test_seventeen_digits(self):
        assert dumps(0.1) == "0.10000000000000001"
        assert dumps([1.0, float("nan"), 2]) == "[1.0, null, 2]"
        assert json.loads(dumps({"a": np.float64(1e-300), "b": 1 + 2j})) == {"a": 1e-300, "b": [1.0, 2.0]}

    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_lossless(self, x):
        assert json.loads(dumps({"x": x}))["x"] == x
