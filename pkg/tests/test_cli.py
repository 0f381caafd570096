import csv
import json
import subprocess
import sys

import pytest

from photocount.cli import PRESETS, ExperimentConfig, main


def load_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config=")
    config = json.loads(lines[0][len("# config=") :])
    return config, list(csv.DictReader(lines[1:]))


def test_pn_preset(tmp_path):
    out = tmp_path / "pn"
    assert main(["pn", "--preset", "fig2a-solid", "--out", str(out)]) == 0
    summary = json.loads((out / "pn_summary.json").read_text())
    assert summary["mean"] == pytest.approx(77.8, rel=0.02)
    assert summary["local_regime"] == "above_threshold"
    assert summary["config"]["laser"]["absorption_kappa"] == 0.7
    assert "output_dir" not in summary["config"]
    config, rows = load_csv(out / "pn.csv")
    assert config == summary["config"]
    assert list(rows[0]) == ["n", "P_n", "log_P_n"]
    # 17 significant digits: doubles round-trip exactly
    assert len(rows[1]["P_n"].split("e")[0].replace(".", "").lstrip("-")) == 17
    assert sum(float(r["P_n"]) for r in rows) == pytest.approx(1.0, abs=1e-10)


def test_pn_zero_loss_rejected(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"laser": {"absorption_kappa": 0.0}}))
    assert main(["pn", "--config", str(cfg), "--gamma", "0", "--out", str(tmp_path / "o")]) == 2
    assert "total loss" in capsys.readouterr().err


def test_zero_nonlinearity_rejected(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"laser": {"saturation_B": 0.0}}))
    assert main(["pn", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "saturation_B" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_bad_grid_points(tmp_path, capsys):
    assert main(["response", "--grid-points", "1", "--out", str(tmp_path)]) == 2
    assert "grid_points" in capsys.readouterr().err


def test_bad_config_field(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["pn", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_unknown_preset():
    with pytest.raises(SystemExit) as err:
        main(["pn", "--preset", "fig9"])
    assert err.value.code == 2


def test_response_above(tmp_path):
    out = tmp_path / "r"
    assert main(["response", "--preset", "fig2a", "--out", str(out)]) == 0
    doc = json.loads((out / "response.json").read_text())
    assert doc["classification"] == "above_ensemble" and not doc["monotone"]
    assert doc["peak"]["gamma_star"] == pytest.approx(0.137, rel=0.05)
    assert doc["gamma_star_analytic"] == pytest.approx(0.1366, abs=1e-4)
    _, rows = load_csv(out / "response.csv")
    assert list(rows[0]) == ["gamma", "mu_r", "branch_id"]
    assert {r["branch_id"] for r in rows} == {"0", "1"}


def test_response_below(tmp_path):
    out = tmp_path / "r"
    assert main(["response", "--preset", "fig2b", "--out", str(out), "--format", "json"]) == 0
    doc = json.loads((out / "response.json").read_text())
    assert doc["monotone"] and doc["peak"] is None
    assert doc["lasing_threshold_gamma"] == 0.0
    assert not (out / "response.csv").exists()


def test_density_reproducible_and_annotated(tmp_path):
    runs = []
    for k in range(2):
        out = tmp_path / f"d{k}"
        code = main(["density", "--preset", "fig2b-dashed", "--samples", "40000", "--seed", "7", "--out", str(out)])
        runs.append((code, out))
    assert runs[0][0] == runs[1][0] == 0
    a, b = (o / "density_monte_carlo.csv" for _, o in runs)
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads((runs[0][1] / "density.json").read_text())
    assert [round(s, 2) for s in doc["deterministic"]["shoulders_mu_over_mu_max"]] == [0.91]
    _, rows = load_csv(runs[0][1] / "density_deterministic.csv")
    assert list(rows[0]) == ["mu", "mu_over_mu_max", "density", "method", "flag"]
    assert any(r["flag"] == "shoulder" for r in rows)
    comparison = json.loads((runs[0][1] / "comparison.json").read_text())
    assert comparison["tolerance"] == pytest.approx(0.02 * 5)


def test_config_then_flags_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"preset": "fig2b-solid", "seed": 3, "mc_samples": 20000}))
    out = tmp_path / "s"
    assert main(["sample-gamma", "--config", str(cfg), "--seed", "4", "--out", str(out)]) == 0
    doc = json.loads((out / "gamma_samples.json").read_text())
    assert doc["config"]["seed"] == 4 and doc["config"]["mc_samples"] == 20000
    assert doc["config"]["ensemble"]["mean_gamma"] == 0.5
    assert doc["n"] == 20000


def test_fig2_manifest(tmp_path):
    out = tmp_path / "nested" / "fig2"
    code = main(["fig2", "--out", str(out), "--samples", "20000", "--seed", "1"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["entries"]) == {"fig2a-solid", "fig2a-dashed", "fig2b-solid", "fig2b-dashed", "fig2a", "fig2b"}
    for name, entry in manifest["entries"].items():
        assert entry["status"] in ("ok", "failed"), entry.get("error")
        for art in entry["artifacts"]:
            assert (out / art["path"]).exists() and len(art["sha256"]) == 64
    assert code == (0 if manifest["all_passed"] else 1)


def test_presets_are_porter_thomas():
    for name, doc in PRESETS.items():
        cfg = ExperimentConfig.from_dict(doc)
        assert cfg.ensemble.nu == 1 and cfg.laser.saturation_B == 0.005, name


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "photocount", "pn", "--preset", "fig2b-solid", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "pn.csv").exists()
