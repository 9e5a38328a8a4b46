import json
import os

import pytest

from bisekit import ArgumentError
from bisekit.cli import main
from bisekit.conditions import step0_bound
from bisekit.config import DEFAULT_THRESHOLDS, KINDS, build_config, parse_text, with_values


def run_cli(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def read_all(folder):
    return {f: (folder / f).read_bytes() for f in sorted(os.listdir(folder))}


def test_parse_text_types_and_comments():
    text = """
    # a comment
    kind = check-g
    seed = 7
    n = 40         # trailing comment
    Ks = 2, 4
    times = 0.1,0.2
    pairs = 5:50, 20:200
    offspring = binary
    """
    v = parse_text(text)
    assert v == {
        "kind": "check-g",
        "seed": 7,
        "n": 40,
        "Ks": (2, 4),
        "times": (0.1, 0.2),
        "pairs": ((5, 50), (20, 200)),
        "offspring": "binary",
    }
    cfg = build_config(v)
    assert cfg.pass_threshold == DEFAULT_THRESHOLDS["check-g"]
    assert with_values(cfg, threshold=0.3).pass_threshold == 0.3


@pytest.mark.parametrize(
    "text",
    ["kind check-g", "colour = red", "n = ten", "pairs = 5-50"],
)
def test_parse_errors(text):
    with pytest.raises(ArgumentError):
        parse_text(text)


@pytest.mark.parametrize(
    "values",
    [
        {"kind": "nope", "seed": 1},
        {"kind": "check-g"},
        {"kind": "check-g", "seed": -1},
        {"kind": "check-g", "seed": 1, "n": 0},
        {"kind": "check-g", "seed": 1, "step": -0.5},
        {"kind": "check-g", "seed": 1, "times": ()},
        {"kind": "check-g", "seed": 1, "offspring": "zipf"},
        {"kind": "check-g", "seed": 1, "threshold": -1.0},
    ],
)
def test_validation_errors(values):
    with pytest.raises(ArgumentError):
        build_config(values)


def test_every_kind_has_a_threshold():
    assert set(DEFAULT_THRESHOLDS) <= set(KINDS)
    for kind in KINDS:
        build_config({"kind": kind, "seed": 0})


def test_cli_errors_exit_with_status_2(tmp_path, capsys):
    assert main(["check-r", "--out", str(tmp_path)]) == 2
    assert main(["check-r", "--seed", "1", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 2
    assert main(["check-r", "--set", "seed=abc", "--out", str(tmp_path)]) == 2
    assert main(["check-r", "--seed", "1", "--set", "n", "--out", str(tmp_path)]) == 2
    assert main(["check-r", "--seed", "1", "--workers", "0", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_config_file_and_flags(tmp_path):
    cfg = tmp_path / "r.cfg"
    cfg.write_text("kind = check-r\nseed = 3\nreplicas = 4\nn = 6\n")
    code, out = run_cli(tmp_path, "a", "check-r", "--config", str(cfg), "--n", "5")
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["n"] == 5 and manifest["seed"] == 3


def test_check_r_on_trees_gives_unit_ratios(tmp_path):
    code, out = run_cli(tmp_path, "r", "check-r", "--seed", "5", "--replicas", "5", "--n", "6")
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["pass"] is True
    assert report["statistic"] == pytest.approx(0.0)


def test_reruns_are_byte_identical(tmp_path):
    args = ["check-g", "--seed", "11", "--replicas", "20", "--n", "8", "--continuum-replicas", "40", "--set", "min_count=2"]
    _, a = run_cli(tmp_path, "a", *args)
    _, b = run_cli(tmp_path, "b", *args)
    files = read_all(a)
    assert files == read_all(b)
    assert {"manifest.json", "report.json"} <= set(files)
    stamp = json.loads(files["manifest.json"])["hash"]
    for name, body in files.items():
        if name.endswith(".csv"):
            assert body.decode().startswith(f"# manifest {stamp}")
        if name.endswith(".svg"):
            assert stamp in body.decode()


def test_worker_count_does_not_change_results(tmp_path):
    args = ["empirical-measure", "--seed", "2", "--replicas", "6", "--n", "6", "--K1s", "5,10", "--K2", "30", "--hosts", "2"]
    _, a = run_cli(tmp_path, "one", *args, "--workers", "1")
    _, b = run_cli(tmp_path, "two", *args, "--workers", "2")
    assert read_all(a) == read_all(b)


def test_lemma_step0_reports_the_bound(tmp_path):
    code, out = run_cli(tmp_path, "s", "lemma-step0", "--seed", "1", "--replicas", "50", "--K", "1", "--K1s", "20", "--M", "100")
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    details = report["details"]
    assert details["bound"] == pytest.approx(step0_bound(100))
    assert details["fresh_points"] == 10
    assert report["statistic"] == pytest.approx(details["bound"] - details["probability"])
    assert report["pass"] == (report["statistic"] <= report["threshold"])
