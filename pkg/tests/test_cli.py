import json

import pytest

from bsodiag.cli import main


def run(argv):
    return main(argv)


class TestUsageErrors:
    def test_missing_required_flag_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["diagnose", "--snapshot", "x", "--cmdb", "y"])  # no --fkg
        assert exc.value.code == 2
        assert "--fkg" in capsys.readouterr().err

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_input_file_is_runtime_error(self, tmp_path):
        code = run(
            [
                "diagnose",
                "--snapshot",
                str(tmp_path / "nope"),
                "--fkg",
                str(tmp_path / "fkg.json"),
                "--cmdb",
                str(tmp_path / "cmdb.json"),
            ]
        )
        assert code == 1


class TestHappyPath:
    def test_simulate_mine_diagnose_evaluate(self, tmp_path, capsys):
        out = tmp_path / "scen"
        code = run(
            [
                "simulate",
                "--preset",
                "zero_noise",
                "--seed",
                "7",
                "--cases",
                "4",
                "--history-days",
                "60",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert (out / "cmdb.json").exists()
        assert (out / "catalog.json").exists()
        assert (out / "history.jsonl").exists()
        case_dirs = sorted(p for p in out.iterdir() if p.is_dir())
        assert len(case_dirs) == 4
        assert (case_dirs[0] / "truth.json").exists()

        fkg_path = tmp_path / "fkg.json"
        code = run(["mine", "--history", str(out / "history.jsonl"), "--out", str(fkg_path)])
        assert code == 0
        fkg = json.loads(fkg_path.read_text())
        assert fkg["edges"]

        diag_path = tmp_path / "diagnosis.json"
        code = run(
            [
                "diagnose",
                "--snapshot",
                str(case_dirs[0]),
                "--fkg",
                str(fkg_path),
                "--cmdb",
                str(out / "cmdb.json"),
                "-k",
                "3",
                "--out",
                str(diag_path),
            ]
        )
        assert code == 0
        diagnosis = json.loads(diag_path.read_text())
        assert diagnosis["status"] in ("ok", "no_path")
        assert diagnosis["ranked"]
        assert diagnosis["provenance"]["config"]["k"] == 3
        assert diagnosis["timings"]["failure_analysis_s"] >= 0

        report_path = tmp_path / "report.json"
        code = run(
            [
                "evaluate",
                "--scenarios",
                str(out),
                "--fkg",
                str(fkg_path),
                "--methods",
                "bsodiag,time_first,hierarchy_first,random",
                "--out",
                str(report_path),
            ]
        )
        assert code == 0
        report = json.loads(report_path.read_text())
        assert sorted(report["metrics"]) == [
            "bsodiag",
            "hierarchy_first",
            "random",
            "time_first",
        ]
        assert report["n_cases"] == 4
        table = capsys.readouterr().out
        assert "PR@1" in table and "bsodiag" in table

    def test_single_case_simulate_writes_bundle_at_root(self, tmp_path):
        out = tmp_path / "one"
        assert run(["simulate", "--preset", "zero_noise", "--seed", "3", "--out", str(out)]) == 0
        assert (out / "meta.json").exists()
        assert (out / "truth.json").exists()

    def test_diagnose_stdout_when_no_out(self, tmp_path, capsys):
        out = tmp_path / "scen"
        run(["simulate", "--preset", "zero_noise", "--seed", "9", "--out", str(out)])
        fkg_path = tmp_path / "fkg.json"
        fkg_path.write_text(json.dumps({"nodes": [], "edges": [], "provenance": {}}))
        code = run(
            [
                "diagnose",
                "--snapshot",
                str(out),
                "--fkg",
                str(fkg_path),
                "--cmdb",
                str(out / "cmdb.json"),
            ]
        )
        assert code == 0
        assert json.loads(capsys.readouterr().out)["ranked"]


class TestConfigPrecedence:
    def test_flag_beats_file_beats_default(self, tmp_path, monkeypatch):
        from bsodiag.cli import _config_from_args
        import argparse

        cfg_file = tmp_path / "bsodiag.toml"
        cfg_file.write_text("alpha = 0.05\nk = 2\n[walk]\ndamping = 0.5\n")

        ns = argparse.Namespace(config=str(cfg_file), alpha=0.2)
        cfg = _config_from_args(ns)
        assert cfg.alpha == 0.2  # flag wins
        assert cfg.k == 2  # file wins over default
        assert cfg.walk.damping == 0.5
        assert cfg.delta_minutes == 1  # default

        monkeypatch.setenv("BSODIAG_CONFIG", str(cfg_file))
        cfg = _config_from_args(argparse.Namespace())
        assert cfg.k == 2  # env-pointed file applies
