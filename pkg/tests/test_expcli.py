import json
import os

import numpy as np
import pytest

from hennion_lab import make_algebra
from hennion_lab.algebra import save_element
from hennion_lab.expcli import (
    cmd_contraction,
    cmd_fcs,
    cmd_metric,
    cmd_process,
    load_map_file,
    main,
)

QUBIT = make_algebra([2], [1.0])


def write_state(path, diag):
    x = QUBIT.element([np.diag(np.asarray(diag, dtype=float))])
    save_element(str(path), x)
    return str(path)


def write_map(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    return str(path)


PROCESS_CONFIG = {
    "master_seed": 11,
    "algebra": {"dims": [2], "weights": [1.0]},
    "driver": {"kind": "constant"},
    "ensemble": {"recipe": "depolarizing", "eps": 0.5},
    "plan": {"m_start": 1, "n_end": 12},
    "estimator": {"n_samples": 8, "refine_iters": 0, "eta_samples": 6},
}

FCS_CONFIG = {
    "master_seed": 12,
    "algebra": {"dims": [2], "weights": [1.0]},
    "bond": {"dims": [2], "weights": [1.0]},
    "driver": {"kind": "constant"},
    "generator": {"recipe": "product"},
    "plan": {"gaps": [1, 2], "window": 8, "pre_run_length": 10},
    "estimator": {"n_samples": 6, "refine_iters": 0, "eta_samples": 6},
}


class TestMetricCommand:
    def test_identical_files(self, tmp_path):
        fx = write_state(tmp_path / "x.json", [1.2, 0.8])
        report = cmd_metric(fx, fx)
        assert report["d"] <= 1e-12
        assert report["t_plus"] is None

    def test_hand_computed_pair(self, tmp_path):
        fx = write_state(tmp_path / "x.json", [1.5, 0.5])
        fy = write_state(tmp_path / "y.json", [0.5, 1.5])
        report = cmd_metric(fx, fy)
        assert report["d"] == pytest.approx(0.8, abs=1e-9)
        assert report["d_from_line"] == pytest.approx(0.8, abs=1e-9)
        assert report["t_plus"] == pytest.approx(1.5, abs=1e-8)
        assert report["oracle_delta_d"] <= 1e-6
        assert report["component_verdict"] == "same_component"

    def test_projection_vs_identity(self, tmp_path):
        fx = write_state(tmp_path / "x.json", [2.0, 0.0])
        fy = write_state(tmp_path / "y.json", [1.0, 1.0])
        report = cmd_metric(fx, fy)
        assert report["d"] == 1.0
        assert report["component_verdict"] == "distance_one"

    def test_exit_code_on_missing_file(self, tmp_path, capsys):
        fx = write_state(tmp_path / "x.json", [1.0, 1.0])
        assert main(["metric", fx, str(tmp_path / "nope.json")]) == 2

    def test_exit_code_on_math_domain(self, tmp_path, capsys):
        fx = write_state(tmp_path / "x.json", [1.0, 1.0])
        fy = write_state(tmp_path / "y.json", [1.0, -1.0])  # traceless
        assert main(["metric", fx, fy]) == 3
        assert "math_domain" in capsys.readouterr().out

    def test_exit_code_on_mismatched_algebras(self, tmp_path):
        fx = write_state(tmp_path / "x.json", [1.0, 1.0])
        other = make_algebra([3], [1.0])
        fy = tmp_path / "y.json"
        save_element(str(fy), other.identity())
        assert main(["metric", fx, str(fy)]) == 2


class TestContractionCommand:
    def test_replacement_map_file(self, tmp_path):
        target = [[[1.2, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.8, 0.0]]]
        payload = {
            "kind": "strongly_summable",
            "algebra": {"dims": [2], "weights": [0.5]},
            "pairs": [
                {
                    "a": [[[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]],
                    "m": [target],
                }
            ],
        }
        path = write_map(tmp_path / "rep.json", payload)
        report = cmd_contraction(path, n_samples=12, refine=0, out_dir=str(tmp_path))
        assert report["verdict"] == "certified_yes"
        assert report["upper"] <= 1e-9
        assert os.path.exists(report["fixed_point_path"])

    def test_kraus_map_file(self, tmp_path):
        payload = {
            "kind": "kraus",
            "algebra": {"dims": [2], "weights": [1.0]},
            "operators": [
                [[[[0.8, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.8, 0.0]]]],
                [[[[0.6, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-0.6, 0.0]]]],
            ],
        }
        s = load_map_file(write_map(tmp_path / "k.json", payload))
        assert s.flags.completely_positive == "yes"

    def test_non_faithful_exit_code(self, tmp_path, capsys):
        payload = {
            "kind": "kraus",
            "algebra": {"dims": [2], "weights": [1.0]},
            "operators": [
                [[[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]],
            ],
        }
        path = write_map(tmp_path / "corner.json", payload)
        assert main(["contraction", path, "--samples", "4", "--refine", "0"]) == 4
        out = capsys.readouterr().out
        assert "hypothesis_violation" in out

    def test_schema_rejects_unknown_keys(self, tmp_path):
        payload = {
            "kind": "kraus",
            "algebra": {"dims": [2], "weights": [1.0]},
            "operators": [],
            "surprise": 1,
        }
        path = write_map(tmp_path / "bad.json", payload)
        assert main(["contraction", path]) == 2


class TestProcessCommand:
    def test_outputs_and_schema(self, tmp_path):
        out = tmp_path / "run"
        summary = cmd_process(dict(PROCESS_CONFIG), str(out))
        assert summary["streams"][0]["C"] == pytest.approx(0.5, abs=1e-3)
        names = sorted(os.listdir(out))
        assert "runs.csv" in names and "summary.json" in names
        assert "manifest.json" in names and "c_of_length.dat" in names
        header = open(out / "runs.csv").readline().strip().split(",")
        assert header == [
            "run_id",
            "direction",
            "length",
            "c_lower",
            "c_upper",
            "spread_l1",
            "residual_inf",
            "nu_hit",
            "log_norm_accum",
        ]
        manifest = json.loads(open(out / "manifest.json").read())
        for name in manifest["files"]:
            assert os.path.exists(out / name)

    def test_unknown_config_key_rejected(self, tmp_path):
        bad = dict(PROCESS_CONFIG)
        bad["surprise"] = True
        import jsonschema

        with pytest.raises(jsonschema.ValidationError):
            cmd_process(bad, str(tmp_path / "x"))

    def test_determinism_bytes(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        cmd_process(dict(PROCESS_CONFIG), str(out_a))
        cmd_process(dict(PROCESS_CONFIG), str(out_b))
        for name in sorted(os.listdir(out_a)):
            if name == "manifest.json":
                continue
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_seed_override_changes_streams(self, tmp_path):
        cfg = dict(PROCESS_CONFIG)
        cfg["ensemble"] = {"recipe": "random_kraus", "k": 2, "mix_eps": 0.4}
        cfg["driver"] = {"kind": "iid_shift"}
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        cmd_process(dict(cfg), str(out_a))
        cfg["master_seed"] = 999
        cmd_process(dict(cfg), str(out_b))
        assert (out_a / "runs.csv").read_bytes() != (out_b / "runs.csv").read_bytes()


class TestFcsCommand:
    def test_product_generator_run(self, tmp_path):
        out = tmp_path / "fcs"
        summary = cmd_fcs(dict(FCS_CONFIG), str(out))
        assert summary["all_pass"]
        assert summary["degenerate"]
        rows = open(out / "decay.csv").read().strip().splitlines()
        assert rows[0] == "gap,corr,bound_rhs,pass"
        assert len(rows) == 3

    def test_covariance_rows(self, tmp_path):
        out = tmp_path / "fcs"
        cmd_fcs(dict(FCS_CONFIG), str(out))
        rows = open(out / "covariance.csv").read().strip().splitlines()
        assert rows[0] == "shift,deviation,budget,pass"
        assert all(line.endswith(",1") for line in rows[1:])


class TestCliWiring:
    def test_metric_json_flag(self, tmp_path, capsys):
        fx = write_state(tmp_path / "x.json", [1.5, 0.5])
        fy = write_state(tmp_path / "y.json", [0.5, 1.5])
        assert main(["--json", "metric", fx, fy]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["d"] == pytest.approx(0.8, abs=1e-9)

    def test_process_requires_out(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(PROCESS_CONFIG))
        assert main(["process", "--config", str(cfg_path)]) == 2

    def test_process_config_roundtrip(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(PROCESS_CONFIG))
        code = main([
            "--json",
            "process",
            "--config",
            str(cfg_path),
            "--out",
            str(tmp_path / "out"),
        ])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["C_mean"] == pytest.approx(0.5, abs=1e-3)
