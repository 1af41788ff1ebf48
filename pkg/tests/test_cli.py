import json
from pathlib import Path

import pytest

from slagcy.cli import (
    ScenarioError,
    emit_report,
    load_scenario,
    main,
    report_json,
    run_scenario,
)

REPO = Path(__file__).resolve().parent.parent
SCENARIOS = REPO / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"


def write_scenario(tmp_path, text, name="case.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestScenarioLoading:
    def test_flat_scenario_parses(self):
        sc = load_scenario(SCENARIOS / "flat_embed.ini")
        assert sc.kind == "embed"
        assert sc.order == 6
        assert sc.mode == "exact"
        assert str(sc.tolerance) == "0"

    def test_unknown_kind(self, tmp_path):
        path = write_scenario(tmp_path, "[scenario]\nkind = fly\n")
        with pytest.raises(ScenarioError, match="kind"):
            load_scenario(path)

    def test_missing_required_section(self, tmp_path):
        path = write_scenario(tmp_path, "[scenario]\nkind = embed\n")
        with pytest.raises(ScenarioError, match="metric"):
            load_scenario(path)

    def test_missing_file(self):
        with pytest.raises(ScenarioError, match="cannot read"):
            load_scenario("/nonexistent/path.ini")

    def test_inline_comments_stripped(self, tmp_path):
        path = write_scenario(
            tmp_path,
            '[scenario]\nkind = embed  ; one of the five kinds\norder = 4\n'
            'mode = exact\n\n[metric]\ng11 = "1"\ng22 = "1"\ng33 = "1"\n')
        sc = load_scenario(path)
        assert sc.kind == "embed"
        assert sc.order == 4

    def test_tolerance_env_override(self, tmp_path, monkeypatch):
        path = write_scenario(
            tmp_path,
            '[scenario]\nkind = embed\norder = 4\nmode = float\n\n'
            '[metric]\ng11 = "1"\ng22 = "1"\ng33 = "1"\n')
        monkeypatch.setenv("SLAGCY_TOLERANCE", "1e-6")
        assert load_scenario(path).tolerance == 1e-6
        monkeypatch.delenv("SLAGCY_TOLERANCE")
        assert load_scenario(path).tolerance == 1e-12
        monkeypatch.setenv("SLAGCY_TOLERANCE", "not-a-number")
        with pytest.raises(ScenarioError, match="SLAGCY_TOLERANCE"):
            load_scenario(path)


class TestExitCodes:
    def test_pass_is_zero(self, tmp_path, capsys):
        code = main(["embed", "--scenario", str(SCENARIOS / "flat_embed.ini"),
                     "--out-json", str(tmp_path / "r.json")])
        assert code == 0

    def test_verdict_failure_is_one(self, tmp_path):
        code = main(["family-check", "--scenario", str(SCENARIOS / "det_drift_check.ini"),
                     "--out-json", str(tmp_path / "r.json")])
        assert code == 1
        data = json.loads((tmp_path / "r.json").read_text())
        assert any(not v["passed"] for v in data["verdicts"])

    def test_parse_error_is_two(self, tmp_path, capsys):
        path = write_scenario(
            tmp_path,
            '[scenario]\nkind = embed\norder = 4\nmode = exact\n\n'
            '[metric]\ng11 = "sin("\ng22 = "1"\ng33 = "1"\n')
        code = main(["embed", "--scenario", path])
        assert code == 2
        assert "offset 4" in capsys.readouterr().err

    def test_kind_mismatch_is_two(self, capsys):
        code = main(["phi", "--scenario", str(SCENARIOS / "flat_embed.ini")])
        assert code == 2


class TestGolden:
    def test_flat_embed_json_is_byte_stable(self, tmp_path):
        out1 = tmp_path / "r1.json"
        out2 = tmp_path / "r2.json"
        for out in (out1, out2):
            code = main(["embed", "--scenario", str(SCENARIOS / "flat_embed.ini"),
                         "--deterministic", "--out-json", str(out)])
            assert code == 0
        b1, b2 = out1.read_bytes(), out2.read_bytes()
        assert b1 == b2
        assert b1 == (GOLDEN / "flat_embed.json").read_bytes()


class TestPhiPipeline:
    def test_bessel_phi_report_and_csv(self, tmp_path):
        json_path = tmp_path / "phi.json"
        csv_path = tmp_path / "phi.csv"
        code = main(["phi", "--scenario", str(SCENARIOS / "bessel_phi.ini"),
                     "--out-json", str(json_path), "--out-csv", str(csv_path)])
        assert code == 0
        data = json.loads(json_path.read_text())
        assert data["schema_version"] == 1
        assert data["phi"]["classification"] == "non-constant"
        assert abs(data["phi"]["phi"][-1] - 0.70316) < 1e-4
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "t,phi,g11_int,g22_int,g33_int"
        assert len(lines) == 22  # 21 samples + header

    def test_twod_scenario_passes(self, tmp_path):
        json_path = tmp_path / "phi2d.json"
        code = main(["phi2d", "--scenario", str(SCENARIOS / "twod_offdiag_phi.ini"),
                     "--out-json", str(json_path)])
        assert code == 0
        data = json.loads(json_path.read_text())
        names = [v["name"] for v in data["verdicts"]]
        assert "phi_constant_equal_1" in names

    def test_json_roundtrip_reproduces_verdicts(self, tmp_path):
        report = run_scenario(SCENARIOS / "det_drift_check.ini")
        text = report_json(report, deterministic=True)
        data = json.loads(text)
        assert [v["passed"] for v in data["verdicts"]] == \
               [v["passed"] for v in report.verdicts]


class TestVerifyKind:
    def test_embed_dump_then_verify(self, tmp_path):
        dump = tmp_path / "structure.txt"
        code = main(["embed", "--scenario", str(SCENARIOS / "poly_embed.ini"),
                     "--dump", str(dump), "--out-json", str(tmp_path / "e.json"),
                     "--order", "4"])
        assert code == 0
        scenario = write_scenario(
            tmp_path,
            f'[scenario]\nkind = verify\nmode = exact\ntolerance = 0\n\n'
            f'[input]\nstructure = {dump}\n')
        code = main(["verify", "--scenario", scenario,
                     "--out-json", str(tmp_path / "v.json")])
        assert code == 0

    def test_verify_detects_corruption(self, tmp_path):
        dump = tmp_path / "structure.txt"
        main(["embed", "--scenario", str(SCENARIOS / "poly_embed.ini"),
              "--dump", str(dump), "--order", "4", "--out-json",
              str(tmp_path / "e.json")])
        text = dump.read_text().splitlines()
        # corrupt one a12 coefficient
        for k, line in enumerate(text):
            if line == "[A 1 2]":
                text.insert(k + 1, "1 0 0 1 0 0 : 1/100")
                break
        dump.write_text("\n".join(text) + "\n")
        scenario = write_scenario(
            tmp_path,
            f'[scenario]\nkind = verify\nmode = exact\ntolerance = 0\n\n'
            f'[input]\nstructure = {dump}\n')
        code = main(["verify", "--scenario", scenario,
                     "--out-json", str(tmp_path / "v.json")])
        assert code == 1
        data = json.loads((tmp_path / "v.json").read_text())
        failing = {v["name"] for v in data["verdicts"] if not v["passed"]}
        assert "res_symmetry" in failing


class TestEmitReport:
    def test_emits_csv_header_for_empty_phi(self, tmp_path):
        report = run_scenario(SCENARIOS / "det_drift_check.ini")
        csv_path = tmp_path / "out.csv"
        emit_report(report, csv_path=str(csv_path))
        assert csv_path.read_text() == "t,phi,g11_int,g22_int,g33_int\n"

    def test_atomic_write_creates_parents(self, tmp_path):
        report = run_scenario(SCENARIOS / "det_drift_check.ini")
        nested = tmp_path / "a" / "b" / "r.json"
        emit_report(report, json_path=str(nested))
        assert nested.exists()
