import json
import math
import numpy as np
from gwcrit import ReportLog
from gwcrit.cli import main


STABLE = ["--family", "stable", "--nu", "0.5", "--c", "0.5"]


def test_family_validate(capsys):
    assert main(["family", "validate", *STABLE, "--depth", "1000"]) == 0
    out = capsys.readouterr().out
    assert "p_0..p_5: 0.5 0.25 0.1875 0.03125" in out
    assert "tail_certified=True" in out


def test_family_invalid_scale(capsys):
    assert main(["family", "validate", "--nu", "0.5", "--c", "0.8", "--depth", "100"]) == 1
    assert "InvalidFamilyError" in capsys.readouterr().err


def test_invalid_scale_stops_every_command(capsys):
    bad = ["--family", "stable", "--nu", "0.5", "--c", "0.8"]
    assert main(["simulate", *bad, "--n", "1", "--reps", "1000"]) == 1
    assert main(["iterate", *bad, "--n", "2"]) == 1
    assert main(["coeffs", *bad, "--n", "1", "--order", "8"]) == 1
    captured = capsys.readouterr()
    assert captured.out == ""
    assert captured.err.count("InvalidFamilyError") == 3


def test_iterate_csv(tmp_path):
    out = str(tmp_path / "trace.csv")
    assert main(["iterate", *STABLE, "--n", "2", "--initial", "2", "--out", out]) == 0
    cols = ReportLog().load_csv(out)
    assert cols["n"].tolist() == [0, 1, 2]
    assert math.isclose(cols["Qn"][2], 0.3232233, abs_tol=1e-7)
    assert math.isclose(cols["p1n"][2], 0.1174175, abs_tol=1e-7)
    assert math.isclose(cols["Qn_2"][1], 0.75)


def test_coeffs_json(capsys):
    assert main(["coeffs", *STABLE, "--n", "1", "--order", "8", "--jmax", "3", "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert np.allclose(payload["columns"]["p_j"], [0.5, 0.25, 0.1875, 0.03125])
    assert payload["summary"]["order"] == 8


def test_invariant(tmp_path):
    out = str(tmp_path / "u.json")
    assert main(["invariant", *STABLE, "--jmax", "4", "--out", out]) == 0
    payload = ReportLog().load_json(out)
    assert payload["summary"]["u1"] == 2.0
    assert payload["summary"]["provenance"] == "analytic-from-V"
    assert np.allclose(payload["columns"]["u_j"][:3], [0.0, 2.0, 1.5])
    assert len(payload["columns"]["u_j_empirical"]) == 5


def test_asym_thm4(tmp_path):
    out = str(tmp_path / "thm4.csv")
    assert main(["asym", "thm4", *STABLE, "--nmax", "100000", "--out", out]) == 0
    cols = ReportLog().load_csv(out)
    assert {"n", "lhs", "rhs_main", "rhs_correction", "residual", "normalized"} <= set(cols)
    assert cols["n"][-1] == 100000


def test_asym_unknown_check(capsys):
    assert main(["asym", "nosuch", *STABLE]) == 2
    assert "Unknown check" in capsys.readouterr().err


def test_simulate(capsys, mc_replicates):
    assert main(["simulate", *STABLE, "--n", "2", "--reps", str(mc_replicates), "--seed", "7"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert abs(payload["q_hat"][2] - 0.3232233) <= 4.0 * payload["q_stderr"][2]
    assert payload["config_echo"]["seed"] == 7


def test_usage_error():
    assert main(["iterate", "--family", "weird"]) == 2
    assert main([]) == 2


def test_config_key_values(tmp_path):
    cfg = tmp_path / "fam.cfg"
    cfg.write_text("# perturbed family\nfamily=perturbed\nnu=0.5\nc=0.4\nd=0.2\n", encoding="utf-8")
    assert main(["family", "validate", "--config", str(cfg), "--depth", "1000"]) == 0


def test_config_yaml_flag_override(tmp_path, capsys):
    cfg = tmp_path / "fam.yaml"
    cfg.write_text("family: stable\nnu: 0.5\nc: 0.8\n", encoding="utf-8")
    assert main(["family", "validate", "--config", str(cfg), "--c", "0.5", "--depth", "100"]) == 0
    assert "StableFamily(nu=0.5, c=0.5)" in capsys.readouterr().out


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("family=stable\nnu=0.5\nc=0.5\ncolour=blue\n", encoding="utf-8")
    assert main(["family", "validate", "--config", str(cfg)]) == 2


def test_perturbed_needs_d():
    assert main(["family", "validate", "--family", "perturbed", "--nu", "0.5", "--c", "0.4"]) == 2


def test_report(tmp_path):
    out = tmp_path / "report"
    code = main(["report", *STABLE, "--checks", "family,lemma4,thm2,invariant", "--nmax", "1000", "--out", str(out)])
    assert code == 0
    summary = ReportLog().load_json(str(out / "summary.json"))
    assert summary["pass"] is True
    assert summary["checks"] == ["family", "lemma4", "thm2", "invariant"]
    assert (out / "thm2.csv").exists()
    diagnostics = {c["name"]: c for c in summary["criteria"] if not c["hard"]}
    # U(p_0) differs from one, which only shows up as a failed diagnostic.
    assert diagnostics["invariant.normalization_one"]["passed"] is False


def test_report_unknown_check(tmp_path):
    assert main(["report", *STABLE, "--checks", "family,nosuch", "--out", str(tmp_path)]) == 2


def test_explicit_s_zero_is_honoured(capsys):
    args = ["asym", "basic_lemma", *STABLE, "--nmax", "10000", "--format", "json"]
    main([*args, "--s", "0"])
    payload = json.loads(capsys.readouterr().out)
    assert payload["summary"]["s"] == [0.0]
    assert set(payload["columns"]["s"]) == {0.0}
    main(args)
    payload = json.loads(capsys.readouterr().out)
    assert payload["summary"]["s"] == [0.0, 0.5]
