"""Command-line front end: validation, artifacts, determinism, exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest

from pfluidlab.cli import ExperimentConfig, main


def invoke(argv):
    return main(argv)


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = ExperimentConfig(p=1.7, delta=0.3, nmesh=[4, 8, 16], seed=5)
        path = tmp_path / "c.json"
        cfg.dump(path)
        loaded = ExperimentConfig.load(path, {})
        assert loaded == cfg

    def test_unknown_field_named(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"viscosity_exponent": 2}))
        with pytest.raises(Exception) as exc:
            ExperimentConfig.load(path, {})
        assert "viscosity_exponent" in str(exc.value)

    def test_validation_names_field(self):
        cfg = ExperimentConfig(p=1.4)
        with pytest.raises(Exception) as exc:
            cfg.validate(convergence=True)
        assert "'p'" in str(exc.value)


class TestRunCommand:
    def test_zero_solution_produces_zero_output(self, tmp_path):
        out = tmp_path / "z"
        rc = invoke(
            ["run", "--solution", "zero", "--nmesh", "4", "--T", "0.2",
             "--p", "1.8", "--out", str(out)]
        )
        assert rc == 0
        blob = np.load(out / "state_n4.npz")
        assert np.abs(blob["u"]).max() == 0.0

    def test_smoke_run_writes_csv(self, tmp_path):
        out = tmp_path / "tg"
        rc = invoke(
            ["run", "--solution", "taylor-green-2d", "--nmesh", "8",
             "--p", "2.0", "--T", "0.3", "--out", str(out)]
        )
        assert rc == 0
        csv = (out / "steps_n8.csv").read_text().splitlines()
        assert csv[0] == "# pfluid-lab v1"
        rows = csv[2:]
        assert len(rows) >= 2
        kin = [float(r.split(",")[5]) for r in rows]
        assert all(np.isfinite(kin))

    def test_invalid_p_rejected(self, tmp_path):
        rc = invoke(
            ["run", "--p", "0.5", "--nmesh", "4", "--out", str(tmp_path / "x")]
        )
        assert rc == 1

    def test_determinism_byte_identical(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            rc = invoke(
                ["run", "--solution", "taylor-green-2d", "--nmesh", "4",
                 "--p", "1.8", "--T", "0.2", "--seed", "3", "--out", str(out)]
            )
            assert rc == 0
            outs.append((out / "steps_n4.csv").read_bytes())
        assert outs[0] == outs[1]


class TestConvergenceCommand:
    def test_single_mesh_size_rejected(self, tmp_path):
        rc = invoke(
            ["convergence", "--nmesh", "8", "--out", str(tmp_path / "c")]
        )
        assert rc == 1

    def test_p_out_of_theorem_range_rejected(self, tmp_path):
        rc = invoke(
            ["convergence", "--p", "1.4", "--nmesh", "4", "8", "16",
             "--out", str(tmp_path / "c")]
        )
        assert rc == 1

    def test_small_sweep_writes_table(self, tmp_path):
        out = tmp_path / "c"
        rc = invoke(
            ["convergence", "--p", "2.0", "--delta", "0.05",
             "--nmesh", "4", "8", "16", "--T", "0.25", "--out", str(out)]
        )
        assert rc == 0
        csv = (out / "convergence_p2.0_delta0.05.csv").read_text().splitlines()
        assert csv[0] == "# pfluid-lab v1"
        assert csv[1].startswith("h,k,p,delta,max_a2")
        assert len(csv) == 2 + 3


class TestPropsCommand:
    def test_deterministic_report(self, tmp_path):
        blobs = []
        for tag in ("a", "b"):
            out = tmp_path / f"r{tag}.json"
            rc = invoke(["props", "--seed", "7", "--count", "800", "--out", str(out)])
            assert rc == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_zero_count_rejected(self, tmp_path):
        rc = invoke(["props", "--count", "0", "--out", str(tmp_path / "r.json")])
        assert rc == 1

    def test_default_run_passes(self, tmp_path):
        out = tmp_path / "r.json"
        rc = invoke(["props", "--count", "2000", "--out", str(out)])
        assert rc == 0
        rep = json.loads(out.read_text())
        assert rep["all_ok"]


class TestGronwallCommand:
    def test_zero_bundle_passes(self, tmp_path):
        from pfluidlab.gronwall import GronwallData

        data = GronwallData(
            k=0.1, M=3, a=np.zeros(4), b=np.zeros(4), r=np.zeros(4), s=np.zeros(4),
            gamma0=1.0, gamma1=1.0, gamma2=1.0, gamma3=1.0,
            lam=0.0, Lam=1.0, theta=0.5, p=1.8, h=1e-3,
        )
        bundle = tmp_path / "b.json"
        bundle.write_text(json.dumps(data.to_dict()))
        out = tmp_path / "v.json"
        rc = invoke(["gronwall", str(bundle), "--out", str(out)])
        assert rc == 0
        verdict = json.loads(out.read_text())
        assert verdict["status"] == "pass"

    def test_corrupted_bundle_parse_error(self, tmp_path):
        bundle = tmp_path / "bad.json"
        bundle.write_text('{"k": 0.1, "M": 3, "a": [0, 0')
        rc = invoke(["gronwall", str(bundle), "--out", str(tmp_path / "v.json")])
        assert rc == 1

    def test_missing_key_named(self, tmp_path, capsys):
        bundle = tmp_path / "short.json"
        bundle.write_text(json.dumps({"k": 0.1, "M": 3}))
        rc = invoke(["gronwall", str(bundle), "--out", str(tmp_path / "v.json")])
        assert rc == 1
        assert "malformed" in capsys.readouterr().err

    def test_entry_point_runs(self):
        out = subprocess.run(
            [sys.executable, "-m", "pfluidlab.cli", "--help"],
            capture_output=True, text=True,
        )
        assert out.returncode == 0
        assert "convergence" in out.stdout
