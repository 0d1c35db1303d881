import csv
import json
from pathlib import Path

import numpy as np
import pytest

from lqrtransfer import cli, scenarios as sc
from lqrtransfer.cli import EXIT_DATA, EXIT_RANK, EXIT_SAMPLES, main

CONFIGS = Path(__file__).resolve().parents[1] / "scripts" / "configs"


def _model_dict(model):
    return {"A": model.A.tolist(), "B": model.B.tolist(), "C": model.C.tolist()}


def _config(tmp_path, name="cfg.json", **overrides):
    cfg = {"n": 3, "T0": 4, "T1": 6, "N": 2, "horizon": 40,
           "cost": {"Q": [[4.0]], "R": [[1.0]]}, "seed": 0,
           "target": _model_dict(sc.exact_target()),
           "sources": [_model_dict(s) for s in sc.exact_sources()]}
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_simulate_printed_scenario(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(CONFIGS / "scenario_a_printed.json"),
                 "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["source_1.csv", "source_2.csv", "target.csv"]
    assert len(_rows(out / "target.csv")) == 4
    assert len(_rows(out / "source_1.csv")) == 6
    first = (out / "target.csv").read_text().splitlines()[0]
    assert first == "t,entry_00"


def test_simulate_is_byte_identical(tmp_path):
    cfg = CONFIGS / "scenario_a_printed.json"
    for run in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / run),
                     "--seed", "5"]) == 0
    for name in ("target.csv", "source_1.csv", "source_2.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_rejects_empty_target(tmp_path, capsys):
    assert main(["simulate", "--config", str(_config(tmp_path, T0=0)),
                 "--out", str(tmp_path / "out")]) == EXIT_DATA
    assert "empty" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_simulate_rejects_short_sources(tmp_path):
    assert main(["simulate", "--config", str(_config(tmp_path, T1=5)),
                 "--out", str(tmp_path / "out")]) == EXIT_DATA


def test_unvalidated_model_reports_rank(tmp_path, capsys):
    bad = {"A": [[0.5, 0.0], [0.0, 0.3]], "B": [[1.0], [1.0]], "C": [[1.0, 0.0]]}
    cfg = _config(tmp_path, n=2, target=bad, sources=[bad], N=1)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_RANK
    assert "observability matrix has rank 1" in capsys.readouterr().err


def test_transfer_from_files(tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--config", str(_config(tmp_path)), "--out", str(sim)]) == 0
    cfg = _config(tmp_path, "files.json", target={"file": "sim/target.csv"},
                  sources=[{"file": "sim/source_1.csv"}, {"file": "sim/source_2.csv"}])
    out = tmp_path / "out"
    assert main(["transfer", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["Z"] <= 1e-6
    modes = sorted(z[0] for z in report["selected_modes"])
    np.testing.assert_allclose(modes, sorted(sc.TARGET_MODES), atol=1e-6)
    assert report["sample_counts"]["target_used"] == 4
    gain = _rows(out / "gain.csv")
    assert len(gain) == 1 and len(gain[0]) == 7
    assert _rows(out / "dictionary.csv")[0].keys() == {"re", "im", "source_index"}


def test_transfer_report_with_model(tmp_path):
    out = tmp_path / "out"
    cfg = _config(tmp_path, fig1={"T_grid": [20, 40]})
    assert main(["transfer", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    for key in ("Z", "gain_error", "closed_loop_cost", "reconstruction_residual"):
        assert np.isfinite(report[key])
    assert [T for T, _ in report["gain_error_curve"]] == [20, 40]
    assert report["gain_error"] < 1e-3
    assert "wall" not in json.dumps(report)
    assert json.loads((out / "timing.json").read_text())


def test_transfer_outputs_deterministic(tmp_path):
    cfg = _config(tmp_path)
    for run in ("a", "b"):
        assert main(["transfer", "--config", str(cfg), "--out", str(tmp_path / run)]) == 0
    for name in ("report.json", "gain.csv", "dictionary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_transfer_printed_scenario_recovers_modes(tmp_path):
    out = tmp_path / "out"
    assert main(["transfer", "--config", str(CONFIGS / "scenario_a_printed.json"),
                 "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    modes = sorted(z[0] for z in report["selected_modes"])
    np.testing.assert_allclose(modes, sorted(sc.TARGET_MODES), atol=1e-1)


def test_transfer_six_targets(tmp_path):
    rng = np.random.default_rng(1)
    targets = sc.perturbed_targets(sc.exact_target(), [0, 0.01, 0.02, 0.04, 0.08, 0.1], rng)
    cfg = _config(tmp_path, targets=[_model_dict(t) for t in targets])
    out = tmp_path / "out"
    assert main(["transfer", "--config", str(cfg), "--out", str(out)]) == 0
    Z = [json.loads((out / f"report_{i}.json").read_text())["Z"] for i in range(1, 7)]
    assert len(set(Z)) == 6


def test_missing_file_exit_code(tmp_path, capsys):
    cfg = _config(tmp_path, target={"file": "nowhere.csv"})
    out = tmp_path / "out"
    assert main(["transfer", "--config", str(cfg), "--out", str(out)]) == EXIT_DATA
    assert "nowhere.csv" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


def test_missing_config(tmp_path, capsys):
    assert main(["transfer", "--config", str(tmp_path / "absent.json")]) == EXIT_DATA
    assert "absent.json" in capsys.readouterr().err


def test_short_target_exit_code(tmp_path):
    cfg = _config(tmp_path, T0=3)
    assert main(["transfer", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_SAMPLES


def test_source_count_must_match(tmp_path):
    cfg = _config(tmp_path, N=3)
    assert main(["transfer", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_fig1_single_point(tmp_path):
    cfg = _config(tmp_path, fig1={"T_grid": [20], "reference_horizon": 100})
    assert main(["fig1", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = _rows(tmp_path / "o" / "fig1.csv")
    assert len(rows) == 1 and float(rows[0]["error"]) > 0


def test_fig1_exact_data_decays_like_transfer(tmp_path):
    grid = list(range(10, 61, 10))
    curves = {}
    for mode in ("exact", "transfer"):
        cfg = _config(tmp_path, f"{mode}.json",
                      fig1={"T_grid": grid, "data": mode, "reference": "model"})
        assert main(["fig1", "--config", str(cfg), "--out", str(tmp_path / mode)]) == 0
        curves[mode] = np.array([float(r["error"]) for r in _rows(tmp_path / mode / "fig1.csv")])
    for err in curves.values():
        assert np.all(np.diff(np.log(err)) < 0)
    np.testing.assert_allclose(curves["exact"], curves["transfer"], rtol=1e-4)


def test_fig2_identical_targets(tmp_path):
    t = _model_dict(sc.exact_target())
    cfg = _config(tmp_path, targets=[t, t, t])
    assert main(["fig2", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = _rows(tmp_path / "o" / "fig2.csv")
    assert len(rows) == 3 and rows[0] == rows[1] == rows[2]


def test_fig2_embedded_exact_target_is_best(tmp_path):
    cfg = _config(tmp_path, fig2={"scales": [0.0, 0.02, 0.05, 0.1]})
    assert main(["fig2", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = _rows(tmp_path / "o" / "fig2.csv")
    Z = [float(r["Z"]) for r in rows]
    err = [float(r["error"]) for r in rows]
    assert Z[0] < 1e-10 and err[0] == min(err)


def test_fig2_needs_two_targets(tmp_path):
    assert main(["fig2", "--config", str(_config(tmp_path)), "--out",
                 str(tmp_path / "o")]) == EXIT_DATA


def test_seed_changes_perturbed_batch(tmp_path):
    cfg = _config(tmp_path, fig2={"scales": [0.02, 0.05]})
    Z = []
    for seed in ("1", "2"):
        out = tmp_path / seed
        assert main(["fig2", "--config", str(cfg), "--out", str(out), "--seed", seed]) == 0
        Z.append([r["Z"] for r in _rows(out / "fig2.csv")])
    assert Z[0] != Z[1]


def test_write_outputs_all_or_nothing(tmp_path, monkeypatch):
    calls = []
    real = cli.os.replace

    def spy(src, dst):
        calls.append(dst)
        real(src, dst)

    monkeypatch.setattr(cli.os, "replace", spy)
    cli.write_outputs(tmp_path, {"a.txt": "1", "b.txt": "2"})
    assert len(calls) == 2 and not list(tmp_path.glob(".*.tmp"))


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
