import json

import numpy as np
import pytest

from embed_features import embed_means, onehot_from_predictions, rff_for_sigma
from load_dataset import DatasetLoader, write_labeled_csv
from main import main, render_report, resolve_threads
from random_streams import RngStream
from solve_proportions import solve_bbse_unconstrained


def run_json(capsys, *argv):
    code = main(list(argv) + ["--json"])
    out = capsys.readouterr().out
    return code, json.loads(out) if out else None


def write_predictions(path, values):
    path.write_text("pred\n" + "\n".join(str(int(v)) for v in values) + "\n", encoding="utf-8")


@pytest.fixture
def singleton_pair(tmp_path):
    src = tmp_path / "s.csv"
    tgt = tmp_path / "t.csv"
    write_labeled_csv(src, np.array([[0.0, 0.0], [5.0, 5.0]]), np.array([1, 2]))
    write_labeled_csv(tgt, np.array([[0.0, 0.0]]))
    return str(src), str(tgt)


# ============================================
# estimate
# ============================================

def test_estimate_exact_match(capsys, singleton_pair):
    src, tgt = singleton_pair
    code, report = run_json(capsys, "estimate", "--source", src, "--target", tgt)

    assert code == 0
    assert report["schema_version"] == 1
    assert report["alpha"]["1"] == pytest.approx(1.0, abs=1e-6)
    assert report["alpha"]["2"] == pytest.approx(0.0, abs=1e-6)
    assert report["noise_mass"] == pytest.approx(0.0, abs=1e-6)
    assert report["sigma"] > 0
    assert set(report["certificate"]) >= {"bound_w", "bound_minclass", "eps_n", "eps_m"}


def test_estimate_warns_about_target_labels(capsys, caplog, csv_pair):
    src, _, labeled = csv_pair
    code, report = run_json(capsys, "estimate", "--source", str(src), "--target", str(labeled),
                            "--method", "energy")
    assert code == 0
    assert "ignoring 'label'" in caplog.text
    assert sum(report["alpha"].values()) <= 1.0 + 1e-10


def test_bbse_hard_matches_unconstrained_solution(capsys, tmp_path, csv_pair):
    src, tgt, _ = csv_pair
    loader = DatasetLoader(str(src), str(tgt))
    source, target = loader.load()

    rng = np.random.default_rng(0)
    preds_src = source.labels + 1
    flip = rng.random(source.n) < 0.1
    preds_src[flip] = rng.integers(1, 4, size=int(flip.sum()))
    preds_tgt = rng.choice([1, 2, 3], p=[0.5, 0.3, 0.2], size=target.m)
    write_predictions(tmp_path / "ps.csv", preds_src)
    write_predictions(tmp_path / "pt.csv", preds_tgt)

    ce = embed_means(onehot_from_predictions(preds_src, preds_tgt, 3), source, target)
    expected = solve_bbse_unconstrained(ce)
    assert np.all(expected >= 0)

    code, report = run_json(capsys, "estimate", "--source", str(src), "--target", str(tgt),
                            "--method", "bbse", "--mode", "hard",
                            "--predictions-source", str(tmp_path / "ps.csv"),
                            "--predictions-target", str(tmp_path / "pt.csv"))
    assert code == 0
    alpha = np.array([report["alpha"][k] for k in ("1", "2", "3")])
    np.testing.assert_allclose(alpha, expected, atol=1e-6)
    unconstrained = np.array([report["bbse_unconstrained"][k] for k in ("1", "2", "3")])
    np.testing.assert_allclose(unconstrained, expected, atol=1e-12)


def test_text_report_round_trips(capsys, csv_pair):
    src, tgt, _ = csv_pair
    args = ["estimate", "--source", str(src), "--target", str(tgt), "--sigma", "3.5",
            "--features", "64"]
    assert main(args) == 0
    lines = dict(line.split(" = ", 1) for line in capsys.readouterr().out.splitlines())
    _, report = run_json(capsys, *args)

    assert lines["schema_version"] == "1"
    for label, value in report["alpha"].items():
        assert float(lines[f"alpha.{label}"]) == value
    assert float(lines["delta_min"]) == report["delta_min"]


def test_repeated_runs_give_identical_reports(capsys, csv_pair):
    src, tgt, _ = csv_pair
    args = ["estimate", "--source", str(src), "--target", str(tgt), "--features", "64"]
    main(args)
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first


def test_out_file_matches_stdout(capsys, tmp_path, singleton_pair):
    src, tgt = singleton_pair
    out = tmp_path / "report.txt"
    assert main(["estimate", "--source", src, "--target", tgt, "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == capsys.readouterr().out


def test_config_file_with_flag_override(capsys, tmp_path, csv_pair):
    src, tgt, _ = csv_pair
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"source": str(src), "target": str(tgt), "method": "rff",
                                  "mode": "soft", "features": 64, "sigma": 2.0}),
                      encoding="utf-8")
    code, report = run_json(capsys, "estimate", "--config", str(config), "--mode", "hard")
    assert code == 0
    assert report["mode"] == "hard"
    assert report["sigma"] == 2.0
    assert report["noise_mass"] is None


def test_energy_estimate_in_large_units(capsys, tmp_path, csv_pair):
    src, tgt, _ = csv_pair
    source, target = DatasetLoader(str(src), str(tgt)).load()
    big_src = tmp_path / "big_source.csv"
    big_tgt = tmp_path / "big_target.csv"
    write_labeled_csv(big_src, source.points * 1e5 + 4e5, source.labels + 1)
    write_labeled_csv(big_tgt, target.points * 1e5 + 4e5)

    args = ["--method", "energy", "--mode", "hard"]
    _, reference = run_json(capsys, "estimate", "--source", str(src), "--target", str(tgt),
                            *args)
    code, report = run_json(capsys, "estimate", "--source", str(big_src), "--target",
                            str(big_tgt), *args)
    assert code == 0
    assert report["converged"] is True
    for label, value in reference["alpha"].items():
        assert report["alpha"][label] == pytest.approx(value, abs=1e-6)


def test_non_convergence_exit_code(capsys, csv_pair):
    src, tgt, _ = csv_pair
    code = main(["estimate", "--source", str(src), "--target", str(tgt), "--features", "64",
                 "--max-iter", "1", "--tol", "1e-300"])
    assert code == 4
    assert "converged = false" in capsys.readouterr().out


# ============================================
# Input errors
# ============================================

def test_malformed_source_exit_code(tmp_path, singleton_pair):
    _, tgt = singleton_pair
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n", encoding="utf-8")
    assert main(["estimate", "--source", str(bad), "--target", tgt]) == 2


def test_unknown_config_key_exit_code(tmp_path, singleton_pair):
    src, tgt = singleton_pair
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"source": src, "target": tgt, "kernel": "rbf"}),
                      encoding="utf-8")
    assert main(["estimate", "--config", str(config)]) == 2


def test_missing_target_exit_code(singleton_pair):
    src, _ = singleton_pair
    assert main(["estimate", "--source", src]) == 2


def test_sigma_flags_are_exclusive(singleton_pair):
    src, tgt = singleton_pair
    with pytest.raises(SystemExit):
        main(["estimate", "--source", src, "--target", tgt, "--sigma", "1", "--auto-sigma"])


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("DFM_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv("DFM_THREADS", "zero")
    with pytest.raises(ValueError):
        resolve_threads(None)


def test_report_renders_nan_as_null():
    text = render_report({"value": float("nan"), "rows": [[1.0, 2.0]]}, as_json=True)
    assert json.loads(text) == {"schema_version": 1, "value": None, "rows": [[1.0, 2.0]]}
    assert "rows.1 = 1,2" in render_report({"rows": [[1.0, 2.0]]})


# ============================================
# diagnose
# ============================================

def test_diagnose_two_class_delta_min(capsys, tmp_path):
    rng = np.random.default_rng(3)
    points = np.vstack([rng.normal(size=(60, 2)), rng.normal(size=(60, 2)) + 3.0])
    src = tmp_path / "s.csv"
    tgt = tmp_path / "t.csv"
    write_labeled_csv(src, points, np.repeat([1, 2], 60))
    write_labeled_csv(tgt, rng.normal(size=(40, 2)))

    code, report = run_json(capsys, "diagnose", "--source", str(src), "--target", str(tgt),
                            "--sigma", "1.5", "--features", "256", "--seed", "7")
    assert code == 0

    source, target = DatasetLoader(str(src), str(tgt)).load()
    ce = embed_means(rff_for_sigma(2, 256, 1.5, RngStream(7)), source, target)
    half_gap = 0.5 * float(np.sum((ce.phi[0] - ce.phi[1]) ** 2))
    assert report["delta_min"] == pytest.approx(half_gap, abs=1e-10)
    np.testing.assert_allclose(report["gram"], ce.gram().dense, atol=1e-14)
    assert report["contamination"]["rank"] == 2


def test_diagnose_single_class(capsys, tmp_path):
    src = tmp_path / "s.csv"
    tgt = tmp_path / "t.csv"
    write_labeled_csv(src, np.array([[0.0], [1.0]]), np.array([4, 4]))
    write_labeled_csv(tgt, np.array([[0.5]]))
    code, report = run_json(capsys, "diagnose", "--source", str(src), "--target", str(tgt),
                            "--sigma", "1.0", "--features", "32")
    assert code == 0
    assert report["delta_min"] is None
    assert report["class_labels"] == ["4"]


def test_diagnose_constant_classifier(capsys, tmp_path, csv_pair):
    src, tgt, _ = csv_pair
    source, target = DatasetLoader(str(src), str(tgt)).load()
    write_predictions(tmp_path / "ps.csv", np.ones(source.n))
    write_predictions(tmp_path / "pt.csv", np.ones(target.m))
    code, _ = run_json(capsys, "diagnose", "--source", str(src), "--target", str(tgt),
                       "--method", "bbse", "--predictions-source", str(tmp_path / "ps.csv"),
                       "--predictions-target", str(tmp_path / "pt.csv"))
    assert code == 3


# ============================================
# select-bandwidth
# ============================================

def test_single_sigma_grid(capsys, csv_pair):
    src, tgt, _ = csv_pair
    code, report = run_json(capsys, "select-bandwidth", "--source", str(src), "--target",
                            str(tgt), "--features", "64", "--sigma-grid", "2.0")
    assert code == 0
    assert report["sigma"] == 2.0
    assert report["sigma_grid"] == [2.0]
    assert len(report["delta_min"]) == 1


def test_selected_sigma_reproduces_delta_min(capsys, csv_pair):
    src, tgt, _ = csv_pair
    common = ["--source", str(src), "--target", str(tgt), "--features", "128", "--seed", "5"]
    _, selection = run_json(capsys, "select-bandwidth", *common,
                            "--sigma-grid", "4.0", "1.0", "2.0")
    assert selection["sigma_grid"] == [4.0, 1.0, 2.0]
    best = selection["sigma_grid"].index(selection["sigma"])

    _, diagnosis = run_json(capsys, "diagnose", *common, "--sigma", repr(selection["sigma"]))
    assert diagnosis["delta_min"] == pytest.approx(selection["delta_min"][best], rel=1e-12)


# ============================================
# benchmark / holdout
# ============================================

def sweep_config(tmp_path, **overrides):
    config = dict(methods=["rffm-soft"], eps_grid=[0.1], dims=[2], reps=1, c=3, n=300,
                  m=300, features=64, sigma_multipliers=[1.0])
    config.update(overrides)
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


def test_benchmark_single_row(capsys, tmp_path):
    assert main(["benchmark", "--config", sweep_config(tmp_path), "--threads", "1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("method,noise_kind,eps,dim,rep,error_l2")
    assert len(lines) == 2


def test_benchmark_is_byte_identical(tmp_path):
    config = sweep_config(tmp_path, methods=["rffm-hard", "energy-soft"], reps=2)
    outputs = []
    for i, threads in enumerate(["1", "1", "4"]):
        out = tmp_path / f"run{i}.csv"
        assert main(["benchmark", "--config", config, "--threads", threads,
                     "--no-runtime", "--out", str(out)]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_benchmark_svg(tmp_path):
    prefix = tmp_path / "plot"
    assert main(["benchmark", "--config", sweep_config(tmp_path), "--threads", "1",
                 "--out", str(tmp_path / "r.csv"), "--svg", str(prefix)]) == 0
    assert (tmp_path / "plot_background-uniform.svg").exists()


def test_benchmark_invalid_config(tmp_path):
    assert main(["benchmark", "--config", sweep_config(tmp_path, eps_grid=[0.5])]) == 2


def test_holdout_command(capsys, tmp_path, csv_pair):
    src, _, labeled = csv_pair
    config = tmp_path / "holdout.json"
    config.write_text(json.dumps({"methods": ["energy-soft", "bbse+-soft"]}), encoding="utf-8")
    code = main(["holdout", "--source", str(src), "--target", str(labeled),
                 "--config", str(config), "--threads", "1"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("method,holdout,held_out_mass")
    assert len(lines) == 1 + 2 * 4
