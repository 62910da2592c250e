import json

import numpy as np
import pytest

from nerboot.cli import main

from conftest import benchmark_dataset


def write_fixture_csv(path, n=60, seed=1):
    d = benchmark_dataset(n=n, m=3, seed=seed)
    lines = ["cluster,y,s,x1"]
    labels = np.repeat([f"area{i:02d}" for i in range(d.n)], d.sizes)
    for lab, y, s, x in zip(labels, d.y, d.s, d.x[:, 0]):
        lines.append(f"{lab},{float(y)!r},{float(s)!r},{float(x)!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture(scope="module")
def fixture_csv(tmp_path_factory):
    return write_fixture_csv(tmp_path_factory.mktemp("data") / "bench.csv")


def _fit_args(csv_path, out, seed="11", b=("24", "6", "6")):
    return [
        "fit", str(csv_path), "--out", str(out),
        "--b1", b[0], "--b2", b[1], "--c", b[2], "--seed", seed,
    ]


def test_fit_end_to_end(fixture_csv, tmp_path, capsys):
    out = tmp_path / "report"
    assert main(_fit_args(fixture_csv, out, b=("100", "50", "50"))) == 0
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["global"]["sigma2_v"] > 0
    assert payload["failures"] == {"single": 0, "outer": 0, "inner": 0}
    clusters = payload["clusters"]
    assert len(clusters) == 60
    assert clusters[0]["cluster"] == "area00"
    # in aggregate the corrected estimate exceeds the too-small naive plug-in
    # (per cluster the ordering is dominated by bootstrap noise)
    naive = np.array([c["naive"] for c in clusters])
    robust = np.array([c["mse_bc_robust"] for c in clusters])
    assert np.all(robust > 0.0)
    assert robust.mean() > naive.mean()

    csv_lines = (tmp_path / "report.csv").read_text().splitlines()
    assert csv_lines[0].startswith("cluster,n_i,eblup,rho,naive")
    assert len(csv_lines) == 61


def test_fit_deterministic_across_runs_and_jobs(fixture_csv, tmp_path):
    out_a, out_b, out_c = (tmp_path / k for k in ("a", "b", "c"))
    assert main(_fit_args(fixture_csv, out_a)) == 0
    assert main(_fit_args(fixture_csv, out_b)) == 0
    assert main(_fit_args(fixture_csv, out_c) + ["--jobs", "2"]) == 0
    blob = (tmp_path / "a.json").read_bytes()
    assert blob == (tmp_path / "b.json").read_bytes()
    assert blob == (tmp_path / "c.json").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_fit_missing_file_exit_code(capsys):
    assert main(["fit", "no_such_file.csv", "--seed", "1"]) == 3
    assert "no_such_file.csv" in capsys.readouterr().err


def test_fit_singleton_cluster_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("cluster,y,x1\nlonely,1.0,0.5\npair,1.0,0.5\npair,2.0,0.7\n")
    code = main(["fit", str(bad), "--seed", "1"])
    assert code == 3
    assert "lonely" in capsys.readouterr().err


def test_fit_missing_seed_prints_one(fixture_csv, tmp_path, capsys):
    out = tmp_path / "r"
    assert main([
        "fit", str(fixture_csv), "--out", str(out),
        "--b1", "2", "--b2", "1", "--c", "1",
    ]) == 0
    assert "seed:" in capsys.readouterr().err


def test_dist_three_point(capsys):
    assert main(["dist", "three-point", "1", "3", "--count", "20000", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "p: 0.3333333333333333" in out
    assert "1.7320508" in out
    assert "fourth moment" in out


def test_dist_student_t(capsys):
    assert main(["dist", "student-t", "1", "6", "--count", "20000", "--seed", "2"]) == 0
    out = capsys.readouterr().out
    assert "df: 6" in out
    assert "0.816496" in out


def test_dist_infeasible_moments(capsys):
    assert main(["dist", "three-point", "1", "0.5", "--seed", "3"]) == 2
    assert main(["dist", "student-t", "1", "3", "--seed", "3"]) == 2
    assert main(["dist", "pearson", "1", "3", "--seed", "3"]) == 2


def test_simulate_summary_fields(tmp_path, capsys):
    args = [
        "simulate", "--model", "m1", "--n", "8", "--ratio", "1",
        "--replicates", "6", "--b1", "3", "--b2", "2", "--c", "2",
        "--seed", "5", "--jobs", "1",
    ]
    assert main(args) == 0
    payload = json.loads(capsys.readouterr().out)
    for key in ("rb_median", "cv_median", "rbn_median"):
        assert key in payload
    assert payload["model"] == "m1"
    assert "robust" in payload["estimators"]


def test_simulate_invalid_ratio_usage_error(capsys):
    code = main(["simulate", "--model", "m1", "--ratio", "3", "--seed", "1"])
    assert code == 2
    err = capsys.readouterr().err
    assert "0.5, 1, 2" in err
    assert "--sigma-u" in err


def test_simulate_custom_sigmas(tmp_path, capsys):
    args = [
        "simulate", "--model", "m2", "--n", "8", "--sigma-u", "0.3",
        "--sigma-v", "1.0", "--replicates", "4", "--b1", "2", "--single-only",
        "--seed", "6", "--jobs", "1",
    ]
    assert main(args) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["sigma2_u"] == 0.3
    assert payload["double_bootstrap"] is False


def test_simulate_writes_records_and_summary(tmp_path):
    out = tmp_path / "study"
    args = [
        "simulate", "--model", "m1", "--n", "8", "--ratio", "1",
        "--replicates", "5", "--b1", "2", "--single-only",
        "--seed", "7", "--jobs", "1", "--out", str(out),
    ]
    assert main(args) == 0
    records = (tmp_path / "study_records.csv").read_text().splitlines()
    assert records[0] == (
        "replicate,cluster,theta_true,theta_hat,naive,mse_boot,mse_double,"
        "mse_bc_robust"
    )
    assert len(records) == 1 + 5 * 8
    # single-only runs leave the double-bootstrap columns empty
    assert records[1].endswith(",,")
    summary = json.loads((tmp_path / "study_summary.json").read_text())
    assert summary["replicates"] == 5


def test_simulate_all_models_table(tmp_path, capsys):
    args = [
        "simulate", "--all-models", "--n", "8", "--ratio", "1",
        "--replicates", "3", "--b1", "2", "--single-only",
        "--seed", "8", "--jobs", "1", "--table", "--out", str(tmp_path / "all"),
    ]
    assert main(args) == 0
    table_rows = [ln for ln in capsys.readouterr().out.splitlines() if ln.strip()]
    # header + rule + two lines (medians, means) per model
    assert len(table_rows) == 2 + 2 * 8
    assert table_rows[0].startswith("model")
    assert table_rows[2].startswith("m1")

    payload = json.loads((tmp_path / "all_summary.json").read_text())
    assert set(payload) == {f"m{k}" for k in range(1, 9)}
    # per-model records files exist alongside the summary
    assert (tmp_path / "all_m3_records.csv").exists()


def test_config_file_merging(fixture_csv, tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("# study defaults\nb1 = 2\nb2 = 1\nc = 1\nseed = 42\n")
    out = tmp_path / "viaconf"
    assert main(["fit", str(fixture_csv), "--out", str(out), "--config", str(conf)]) == 0
    payload = json.loads((tmp_path / "viaconf.json").read_text())
    assert payload["config"]["b1"] == 2
    assert payload["config"]["seed"] == 42

    # explicit flag wins over the file
    out2 = tmp_path / "flagwins"
    assert main([
        "fit", str(fixture_csv), "--out", str(out2),
        "--config", str(conf), "--b1", "3",
    ]) == 0
    payload2 = json.loads((tmp_path / "flagwins.json").read_text())
    assert payload2["config"]["b1"] == 3
