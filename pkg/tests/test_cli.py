import csv
import json
import os

import pytest

from bincorr.cli import main


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestCGLMPCommand:
    def test_both_modes_n2(self, tmp_path):
        out = tmp_path / "run"
        code = main(["cglmp", "-N", "2", "--mode", "both", "--out", str(out)])
        assert code == 0
        rows = read_csv(out / "cglmp_N2_optimal.csv")
        assert rows[0] == ["N", "mode", "v_crit", "solve_time"]
        assert [r[1] for r in rows[1:]] == ["multi", "binarised"]
        v_multi, v_bin = float(rows[1][2]), float(rows[2][2])
        assert v_multi == pytest.approx(0.7071, abs=0.003)
        assert v_bin == pytest.approx(0.7071, abs=0.003)
        manifest = json.load(open(out / "cglmp_N2_optimal.manifest.json"))
        assert manifest["command"] == "cglmp"
        assert len(manifest["results"]) == 2
        # CSV and JSON agree exactly on shared numbers
        assert repr(manifest["results"][0]["v_critical"]) == rows[1][2]
        for f in manifest["files"]:
            assert os.path.exists(f)

    def test_invalid_dimension_is_usage_error(self, tmp_path):
        code = main(["cglmp", "-N", "1", "--out", str(tmp_path)])
        assert code == 2

    def test_maxent_state(self, tmp_path):
        code = main(
            ["cglmp", "-N", "3", "--mode", "multi", "--state", "maxent", "--out", str(tmp_path)]
        )
        assert code == 0
        rows = read_csv(tmp_path / "cglmp_N3_maxent.csv")
        # maximally entangled state is known to be suboptimal but nonlocal
        assert 0.60 < float(rows[1][2]) < 0.75


class TestRACCommand:
    def test_full_run(self, tmp_path, rac3):
        code = main(["rac", "-N", "3", "--mode", "both", "--out", str(tmp_path)])
        assert code == 0
        rows = read_csv(tmp_path / "rac_d3.csv")
        assert float(rows[1][2]) == pytest.approx(0.732, abs=0.005)
        assert float(rows[2][2]) == pytest.approx(0.788, abs=0.005)
        assert float(rows[2][3]) > 9.1  # witness value at v=1
        manifest = json.load(open(tmp_path / "rac_d3.manifest.json"))
        bin_result = manifest["results"][1]
        assert bin_result["witness_violated_v1"] is True
        assert bin_result["witness_violated_v0"] is False

    def test_invalid_dimension(self, tmp_path):
        assert main(["rac", "-N", "1", "--out", str(tmp_path)]) == 2


class TestSteeringCommand:
    def test_mub_run(self, tmp_path):
        code = main(
            ["steering", "--construction", "mub", "-N", "2", "-k", "2", "--out", str(tmp_path)]
        )
        assert code == 0
        rows = read_csv(tmp_path / "steering_mub_d2.csv")
        assert float(rows[1][2]) == pytest.approx(0.7071, abs=1e-3)
        assert float(rows[1][3]) == pytest.approx(0.7071, abs=1e-3)

    def test_zero_trials(self, tmp_path):
        code = main(
            [
                "steering", "--construction", "random", "-N", "2", "--trials", "0",
                "--seed", "5", "--out", str(tmp_path),
            ]
        )
        assert code == 0
        rows = read_csv(tmp_path / "steering_random_d2.csv")
        assert len(rows) == 1  # header only

    def test_random_trials_monotone_and_reproducible(self, tmp_path):
        args = [
            "steering", "--construction", "random", "-N", "2", "--n-meas", "2",
            "--trials", "3", "--seed", "11", "--workers", "1",
        ]
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(out_a)]) == 0
        assert main(args + ["--out", str(out_b)]) == 0
        rows_a = read_csv(out_a / "steering_random_d2.csv")
        rows_b = read_csv(out_b / "steering_random_d2.csv")
        numeric_cols = (0, 1, 2, 3, 4)
        for ra, rb in zip(rows_a, rows_b):
            for c in numeric_cols:
                assert ra[c] == rb[c]  # byte identical
        for row in rows_a[1:]:
            assert float(row[4]) >= -1e-6  # gap


class TestVerifyCommand:
    def test_fresh_pair_passes(self, tmp_path):
        out = tmp_path / "run"
        assert main(["cglmp", "-N", "2", "--mode", "multi", "--out", str(out)]) == 0
        cert = out / "cglmp_N2_optimal_multi.cert.json"
        obj = out / "cglmp_N2_optimal_multi.object.json"
        assert main(["verify", str(cert), str(obj)]) == 0

    def test_tampered_certificate_fails_with_code_4(self, tmp_path):
        out = tmp_path / "run"
        main(["cglmp", "-N", "2", "--mode", "multi", "--out", str(out)])
        cert_path = out / "cglmp_N2_optimal_multi.cert.json"
        doc = json.load(open(cert_path))
        doc["coefficients"][0][0][0][0] += 0.1
        tampered = tmp_path / "tampered.json"
        json.dump(doc, open(tampered, "w"))
        code = main(["verify", str(tampered), str(out / "cglmp_N2_optimal_multi.object.json")])
        assert code == 4

    def test_mismatched_scenario_distinct_code(self, tmp_path):
        out = tmp_path / "run"
        main(["cglmp", "-N", "2", "--mode", "both", "--out", str(out)])
        code = main(
            [
                "verify",
                str(out / "cglmp_N2_optimal_multi.cert.json"),
                str(out / "cglmp_N2_optimal_binarised.object.json"),
            ]
        )
        assert code == 2

    def test_missing_file_is_io_error(self, tmp_path):
        assert main(["verify", str(tmp_path / "nope.json"), str(tmp_path / "nope2.json")]) == 5


class TestTable2Command:
    def test_small_table(self, tmp_path):
        code = main(["reproduce-table2", "--max-N", "4", "--out", str(tmp_path)])
        assert code == 0
        rows = read_csv(tmp_path / "table2.csv")
        assert rows[0] == ["mode", "2", "3", "4"]
        assert float(rows[1][1]) == pytest.approx(0.707, abs=0.003)
        assert float(rows[1][3]) == pytest.approx(0.673, abs=0.003)
        assert float(rows[2][2]) == pytest.approx(0.794, abs=0.005)
        assert float(rows[2][3]) == pytest.approx(0.814, abs=0.005)
        assert rows[3] == ["multi_flags", "ok", "ok", "ok"]
        assert rows[4] == ["binarised_flags", "ok", "ok", "ok"]

    def test_invalid_max(self, tmp_path):
        assert main(["reproduce-table2", "--max-N", "9", "--out", str(tmp_path)]) == 2


class TestPlumbing:
    def test_unwritable_out_dir(self):
        assert main(["cglmp", "-N", "2", "--out", "/dev/null/x"]) == 5

    def test_env_var_default_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BINCORR_OUT", str(tmp_path / "envout"))
        from bincorr.cli import build_parser

        args = build_parser().parse_args(["cglmp", "-N", "2"])
        assert args.out == str(tmp_path / "envout")

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
