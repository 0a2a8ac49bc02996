import json
import subprocess
import sys

import pytest

from tichain.cli import main
from tichain.ruleset import builtin_chain_ruleset, format_ruleset


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_passes(capsys):
    code, out, _ = run(["verify", "--n", "5,7"], capsys)
    assert code == 0
    rec = json.loads(out)
    assert rec["passed"] and rec["n"] == [5, 7]
    assert {s["suite"] for s in rec["suites"]} >= {"determinism", "inverse", "classification"}


def test_verify_even_length(capsys):
    assert run(["verify", "--n", "4"], capsys)[0] == 0


def test_verify_broken_rules_fail(tmp_path, capsys):
    path = tmp_path / "broken.rules"
    path.write_text(format_ruleset(builtin_chain_ruleset())
                    + "rule R_ARROW U -> R_ARROW u action=carry\n")
    code, out, _ = run(["verify", "--n", "4", "--rules", str(path)], capsys)
    assert code == 1
    assert not json.loads(out)["passed"]


def test_unparseable_rules_fail(tmp_path, capsys):
    path = tmp_path / "bad.rules"
    path.write_text("symbol W arity=1 upper\nillegal Q W item=1\n")
    code, _, err = run(["verify", "--n", "4", "--rules", str(path)], capsys)
    assert code == 1 and "Q" in err


def test_missing_file_is_an_error(capsys):
    code, _, err = run(["verify", "--n", "4", "--rules", "/nonexistent.rules"], capsys)
    assert code == 2 and err


def test_spectrum_chain(capsys):
    code, out, _ = run(["spectrum", "--n", "7"], capsys)
    assert code == 0
    rec = json.loads(out)["records"][0]
    assert rec["dim"] == 9057 and rec["degeneracy"] == 1
    assert rec["gap"] == pytest.approx(5.478104631727e-3, rel=1e-8)
    assert rec["wall_ms"] is None


def test_spectrum_even_and_uniform(capsys):
    assert run(["spectrum", "--n", "4,6"], capsys)[0] == 0
    code, out, _ = run(["spectrum", "--n", "5", "--variant", "uniform_bracket"], capsys)
    assert code == 0
    assert json.loads(out)["records"][0]["lambda0"] == pytest.approx(3.0, abs=1e-9)


def test_gap_scan(capsys):
    code, out, _ = run(["spectrum", "--n", "5,7,9", "--gap-scan"], capsys)
    assert code == 0
    fit = json.loads(out)["fit"]
    assert fit["positive"] and fit["decreasing"] and -8 <= fit["slope"] <= 0


def test_entropy_single_region(capsys):
    code, out, err = run(["entropy", "--n", "7", "--region-len", "3"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("n,t,state,region_start,region_len,entropy_bits")
    assert len(lines) == 2 and lines[1].startswith("7,1,phi_g,4,3,")
    assert "# PASS" in err


def test_entropy_cycle_psi(capsys):
    code, out, _ = run(["entropy", "--n", "5", "--t", "2", "--cycle", "--state", "psi:1",
                        "--region-len", "3"], capsys)
    assert code == 0
    assert len(out.splitlines()) == 11


def test_entropy_bad_state(capsys):
    code, _, err = run(["entropy", "--n", "7", "--state", "psi:0"], capsys)
    assert code == 2 and "phi_g" in err


def test_path_dump(capsys):
    code, out, _ = run(["path", "--n", "5", "--x", "1"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "# n=5 K=6"
    assert lines[1].split()[:5] == ["<", "^^", "U1", "W", ">"]
    assert lines[-1].split()[:5] == ["<", "e1", "o", "E1", ">"]


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# chain spectrum\ncommand=spectrum\nn=5\nvariant=frustration_free\n")
    code, out, _ = run(["--config", str(cfg)], capsys)
    assert code == 0
    assert json.loads(out)["records"][0]["variant"] == "frustration_free"
    code, out, _ = run(["--config", str(cfg), "--n", "7"], capsys)
    assert json.loads(out)["records"][0]["n"] == 7


def test_outputs_are_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert main(["spectrum", "--n", "5,7", "--out", str(tmp_path / d)]) == 0
        assert main(["entropy", "--n", "7", "--out", str(tmp_path / d)]) == 0
    for name in ("spectrum.json", "entropy.csv", "entropy_summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tichain", "path", "--n", "5"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("# n=5 K=6")
