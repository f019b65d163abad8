"""Command-line interface: exit codes, schemas, and determinism."""

import json
import subprocess
import sys

import pytest

from maxentlab.cli import main

PRIOR = {"outcomes": ["0", "1"], "probs": [0.5, 0.5]}
FEATURES = {"names": ["x"], "matrix": [[0.0, 1.0]]}
CONSTRAINTS_EQ = {"kinds": ["eq"], "targets": [0.8], "featureset": FEATURES}
CONSTRAINTS_GE = {"kinds": ["ge"], "targets": [0.8], "featureset": FEATURES}
CONSTRAINTS_GE9 = {"kinds": ["ge"], "targets": [0.9], "featureset": FEATURES}
THREE_FEATURES = {"names": ["x"], "matrix": [[0.0, 1.0, 2.0]]}


@pytest.fixture
def files(tmp_path):
    def write(name, obj):
        path = tmp_path / name
        path.write_text(json.dumps(obj))
        return str(path)

    return tmp_path, write


def test_project_bernoulli_fixture(files):
    tmp, write = files
    out = tmp / "report.json"
    code = main(
        [
            "project",
            "--prior",
            write("p.json", PRIOR),
            "--constraints",
            write("a.json", CONSTRAINTS_EQ),
            "--output",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert abs(report["lambda_star"][0] - 1.3862943611198906) < 1e-6
    assert report["status"] == "converged"


def test_project_empty_constraints_is_identity(files):
    tmp, write = files
    out = tmp / "report.json"
    constraints = {"kinds": [], "targets": [], "featureset": {"names": [], "matrix": []}}
    code = main(
        [
            "project",
            "--prior",
            write("p.json", PRIOR),
            "--constraints",
            write("a.json", constraints),
            "--output",
            str(out),
        ]
    )
    assert code == 0
    assert json.loads(out.read_text())["min_divergence"] == 0.0


def test_project_infeasible_exit_code(files):
    tmp, write = files
    prior3 = {"outcomes": ["0", "1", "2"], "probs": [1 / 3, 1 / 3, 1 / 3]}
    constraints = {"kinds": ["eq"], "targets": [3.0], "featureset": THREE_FEATURES}
    code = main(
        [
            "project",
            "--prior",
            write("p.json", prior3),
            "--constraints",
            write("a.json", constraints),
            "--output",
            str(tmp / "r.json"),
        ]
    )
    assert code == 3


def test_project_boundary_exit_code(files):
    tmp, write = files
    prior3 = {"outcomes": ["0", "1", "2"], "probs": [1 / 3, 1 / 3, 1 / 3]}
    constraints = {"kinds": ["eq"], "targets": [2.0], "featureset": THREE_FEATURES}
    code = main(
        [
            "project",
            "--prior",
            write("p.json", prior3),
            "--constraints",
            write("a.json", constraints),
            "--output",
            str(tmp / "r.json"),
        ]
    )
    assert code == 4


def test_project_schema_violation_diagnostic(files, capsys):
    tmp, write = files
    bad = {"outcomes": ["0", "1"], "probs": [0.9, 0.4]}  # sums to 1.3
    code = main(
        [
            "project",
            "--prior",
            write("p.json", bad),
            "--constraints",
            write("a.json", CONSTRAINTS_EQ),
            "--output",
            str(tmp / "r.json"),
        ]
    )
    assert code == 2
    assert "deviation" in capsys.readouterr().err


def test_project_malformed_json_reports_line(files, tmp_path, capsys):
    tmp, write = files
    bad = tmp_path / "broken.json"
    bad.write_text('{"outcomes": ["0"],\n  "probs": [}')
    code = main(
        [
            "project",
            "--prior",
            str(bad),
            "--constraints",
            write("a.json", CONSTRAINTS_EQ),
            "--output",
            str(tmp / "r.json"),
        ]
    )
    assert code == 2
    assert "line 2" in capsys.readouterr().err


def test_fit_from_samples(files):
    tmp, write = files
    samples = tmp / "samples.txt"
    samples.write_text("1\n" * 8 + "0\n" * 2)
    out = tmp / "fit.json"
    code = main(
        [
            "fit",
            "--prior",
            write("p.json", PRIOR),
            "--features",
            write("f.json", FEATURES),
            "--samples",
            str(samples),
            "--output",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert report["alpha"] == [0.8]
    assert abs(report["log_loss_fit"]["lambda_star"][0] - 1.3862943611198906) < 1e-6
    assert report["tv_distance"] <= 1e-6
    assert report["prescriptions_agree"]


def test_fit_single_outcome_flags_boundary(files):
    tmp, write = files
    samples = tmp / "samples.txt"
    samples.write_text("1\n" * 5)
    code = main(
        [
            "fit",
            "--prior",
            write("p.json", PRIOR),
            "--features",
            write("f.json", FEATURES),
            "--samples",
            str(samples),
            "--output",
            str(tmp / "fit.json"),
        ]
    )
    assert code == 4


def test_fit_unknown_label_exit_code(files, capsys):
    tmp, write = files
    samples = tmp / "samples.txt"
    samples.write_text("0\n2\n")
    code = main(
        [
            "fit",
            "--prior",
            write("p.json", PRIOR),
            "--features",
            write("f.json", FEATURES),
            "--samples",
            str(samples),
            "--output",
            str(tmp / "fit.json"),
        ]
    )
    assert code == 2
    assert "unknown outcome label" in capsys.readouterr().err


def test_fit_empty_samples_exit_code(files):
    tmp, write = files
    samples = tmp / "samples.txt"
    samples.write_text("\n")
    code = main(
        [
            "fit",
            "--prior",
            write("p.json", PRIOR),
            "--features",
            write("f.json", FEATURES),
            "--samples",
            str(samples),
            "--output",
            str(tmp / "fit.json"),
        ]
    )
    assert code == 2


def test_diagnose_random_instances(files):
    tmp, write = files
    out = tmp / "diag.json"
    code = main(
        ["diagnose", "--random", "--instances", "5", "--seed", "1", "--output", str(out)]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert report["all_pass"]
    assert len(report["instances"]) == 5


def test_diagnose_fixture_files(files):
    tmp, write = files
    data = {"outcomes": ["0", "1"], "probs": [0.2, 0.8]}
    out = tmp / "diag.json"
    code = main(
        [
            "diagnose",
            "--prior",
            write("p.json", PRIOR),
            "--features",
            write("f.json", FEATURES),
            "--data",
            write("d.json", data),
            "--output",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads(out.read_text())
    names = {r["name"] for r in report["instances"][0]["reports"]}
    assert "pythagorean" in names
    pyth = [r for r in report["instances"][0]["reports"] if r["name"] == "pythagorean"]
    assert abs(pyth[0]["residual"]) <= 1e-10


def test_diagnose_corrupted_model_file(files, capsys):
    tmp, write = files
    bad = {"outcomes": ["0", "1"], "probs": [0.7, 0.7]}
    code = main(
        [
            "diagnose",
            "--prior",
            write("p.json", bad),
            "--features",
            write("f.json", FEATURES),
            "--data",
            write("d.json", PRIOR),
            "--output",
            str(tmp / "diag.json"),
        ]
    )
    assert code == 2


def test_sanov_fixture(files):
    tmp, write = files
    out = tmp / "sanov.json"
    code = main(
        [
            "sanov",
            "--prior",
            write("p.json", PRIOR),
            "--constraints",
            write("a.json", CONSTRAINTS_GE),
            "--n",
            "10",
            "--nested",
            write("b.json", CONSTRAINTS_GE9),
            "--curve",
            "10,20,40",
            "--curve-output",
            str(tmp / "curve.csv"),
            "--output",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert abs(report["log_prob"] - (-2.906120114864304)) < 1e-9
    assert abs(report["nested"]["lhs"] - report["nested"]["rhs"]) < 1e-10
    lines = (tmp / "curve.csv").read_text().strip().split("\n")
    assert len(lines) == 4
    res10 = float(lines[1].split(",")[3])
    res40 = float(lines[3].split(",")[3])
    assert res40 < res10


def test_sanov_cap_requires_monte_carlo(files, capsys):
    tmp, write = files
    code = main(
        [
            "sanov",
            "--prior",
            write("p.json", PRIOR),
            "--constraints",
            write("a.json", CONSTRAINTS_GE),
            "--n",
            "100",
            "--cap",
            "50",
            "--output",
            str(tmp / "s.json"),
        ]
    )
    assert code == 2
    assert "monte-carlo" in capsys.readouterr().err


def test_sanov_monte_carlo_mode(files):
    tmp, write = files
    out = tmp / "mc.json"
    code = main(
        [
            "sanov",
            "--prior",
            write("p.json", PRIOR),
            "--constraints",
            write("a.json", CONSTRAINTS_GE),
            "--n",
            "10",
            "--monte-carlo",
            "--trials",
            "50000",
            "--seed",
            "11",
            "--output",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert report["method"] == "monte-carlo"
    assert report["wilson_low"] <= 56 / 1024 + 0.01


def test_entropy_approx_csv(files):
    tmp, write = files
    out = tmp / "exp.csv"
    code = main(
        [
            "entropy-approx",
            "--alphabet-size",
            "20",
            "--n",
            "40,80",
            "--trials",
            "3",
            "--seed",
            "5",
            "--output",
            str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0].startswith("prior_mode,D,n,trial")
    assert len(lines) == 7


def test_entropy_approx_doubling_span(files):
    tmp, write = files
    out = tmp / "exp.csv"
    code = main(
        [
            "entropy-approx",
            "--alphabet-size",
            "10",
            "--n",
            "20..80",
            "--trials",
            "2",
            "--seed",
            "5",
            "--output",
            str(out),
        ]
    )
    assert code == 0
    rows = out.read_text().strip().split("\n")[1:]
    seen = sorted({int(r.split(",")[2]) for r in rows})
    assert seen == [20, 40, 80]


def test_config_file_defaults_with_flag_override(files):
    tmp, write = files
    config = write("config.json", {"trials": 4, "seed": 123})
    out1 = tmp / "a.csv"
    code = main(
        [
            "entropy-approx",
            "--alphabet-size",
            "10",
            "--n",
            "30",
            "--config",
            config,
            "--output",
            str(out1),
        ]
    )
    assert code == 0
    rows = out1.read_text().strip().split("\n")[1:]
    assert len(rows) == 4  # trials from config
    # flag wins over config
    out2 = tmp / "b.csv"
    main(
        [
            "entropy-approx",
            "--alphabet-size",
            "10",
            "--n",
            "30",
            "--trials",
            "2",
            "--config",
            config,
            "--output",
            str(out2),
        ]
    )
    assert len(out2.read_text().strip().split("\n")) == 3


def test_determinism_across_reruns_and_threads(files):
    tmp, write = files
    prior = write("p.json", PRIOR)
    constraints = write("a.json", CONSTRAINTS_GE)
    outs = []
    for tag, threads in (("t1", "1"), ("t8", "8"), ("t1b", "1")):
        out = tmp / f"mc-{tag}.json"
        code = main(
            [
                "sanov",
                "--prior",
                prior,
                "--constraints",
                constraints,
                "--n",
                "10",
                "--monte-carlo",
                "--trials",
                "200000",
                "--seed",
                "7",
                "--threads",
                threads,
                "--output",
                str(out),
            ]
        )
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_dump_config_reproduces_run(files):
    tmp, write = files
    out1 = tmp / "a.csv"
    cfg = tmp / "run.json"
    code = main(
        [
            "entropy-approx",
            "--alphabet-size",
            "12",
            "--n",
            "30,60",
            "--trials",
            "3",
            "--seed",
            "21",
            "--output",
            str(out1),
            "--dump-config",
            str(cfg),
        ]
    )
    assert code == 0
    saved = json.loads(cfg.read_text())
    assert saved["command"] == "entropy-approx"
    # replay from the saved configuration alone
    out2 = tmp / "b.csv"
    params = tmp / "params.json"
    params.write_text(json.dumps(saved["params"]))
    code = main(
        [
            "entropy-approx",
            "--config",
            str(params),
            "--seed",
            str(saved["seed"]),
            "--output",
            str(out2),
        ]
    )
    assert code == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_missing_required_option_exits_2(files, capsys):
    tmp, write = files
    code = main(["project", "--prior", write("p.json", PRIOR)])
    assert code == 2
    assert "--constraints" in capsys.readouterr().err


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "maxentlab", "--help"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "entropy-approx" in proc.stdout
