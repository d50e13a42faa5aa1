import json
from pathlib import Path

import pytest

from bandit_subset.cli import main, parse_space, read_config, read_space_csv, UsageError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_select_grid_distinct(capsys):
    code, out, _ = run(capsys, "select", "--space", "grid:0:2:15", "--kernel", "rbf:1.0", "--k", "5",
                       "--mode", "distinct", "--seed", "7")
    data = json.loads(out)
    assert code == 0 and len(set(data["chosen"])) == 5 and data["complete"]


def test_select_iterations_trace_length(capsys):
    code, out, _ = run(capsys, "select", "--space", "orthonormal:8", "--k", "10000", "--mode", "iterations",
                       "--seed", "1")
    assert code == 0 and len(json.loads(out)["trace"]) == 10000


def test_select_toy_config(capsys):
    code, out, _ = run(capsys, "select", "--config", str(CONFIGS / "example1.cfg"))
    assert code == 0 and sorted(json.loads(out)["chosen"]) == [0, 2]


def test_flags_override_config(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"space": "orthonormal:4", "k": 3, "mode": "iterations", "seed": 2}))
    code, out, _ = run(capsys, "select", "--config", str(cfg), "--k", "7")
    assert code == 0 and json.loads(out)["iterations_used"] == 7


def test_incomplete_exit_code(capsys):
    code, out, _ = run(capsys, "select", "--space", "example1", "--k", "3", "--max-iterations", "20", "--seed", "0")
    assert code == 2 and not json.loads(out)["complete"]


@pytest.mark.parametrize("argv", [
    ["select", "--space", "grid:0:2", "--k", "2", "--seed", "1"],
    ["select", "--space", "grid:0:2:5", "--kernel", "matern", "--k", "2", "--seed", "1"],
    ["select", "--space", "example1", "--kernel", "rbf:1", "--k", "2", "--seed", "1"],
    ["select", "--space", "grid:0:2:5", "--k", "2"],
    ["verify", "nonsense"],
    ["verify", "lemma_maxq", "--m", "3"],
    ["experiment", "superarm"],
    ["experiment", "nope", "--seed", "1"],
    ["experiment", "sphere", "--seed", "1", "--duplicates-consume"],
    ["bogus"],
])
def test_usage_errors_exit_1(capsys, argv):
    assert main(argv) == 1


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("space = example1\ncolour = red\n")
    code, _, err = run(capsys, "select", "--config", str(cfg))
    assert code == 1 and "colour" in err


def test_config_parsing(tmp_path):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("# comment\nspace = grid:0:1:3  # trailing\nmax-iterations = 9\n")
    assert read_config(cfg) == {"space": "grid:0:1:3", "max_iterations": "9"}
    cfg.write_text("just words\n")
    with pytest.raises(UsageError):
        read_config(cfg)


def test_verify_max_correction(capsys):
    code, out, _ = run(capsys, "verify", "lemma_maxq", "--m", "4", "--k", "3")
    data = json.loads(out)
    assert code == 0 and data["holds"] and data["details"]["uniform_value"] == 0.421875


def test_verify_coverage(capsys):
    code, out, _ = run(capsys, "verify", "lemma1", "--eps", "0.2", "--k", "30", "--runs", "2000", "--seed", "3")
    assert code == 0 and json.loads(out)["details"]["pass_rate"] >= 0.9876 - 3 * 0.0025


def test_verify_net_upper(capsys):
    code, out, _ = run(capsys, "verify", "thm2", "--preset", "sphere:0.05", "--c", "3", "--seed", "5")
    assert code == 0 and json.loads(out)["holds"]


def test_verify_bad_preset(capsys):
    assert main(["verify", "thm1", "--preset", "cube:3"]) == 1


def test_gen_roundtrip(capsys, tmp_path):
    out = tmp_path / "space.csv"
    assert main(["gen", "--space", "sphere:0.1", "--seed", "4", "--out", str(out)]) == 0
    space = read_space_csv(out)
    assert len(space) == 1000
    again, _ = parse_space(f"csv:{out}")
    assert again.actions.tolist() == space.actions.tolist()


def test_experiment_writes_and_replays(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["experiment", "gibbs", "--seed", "2", "--repetitions", "2", "--eval-instances", "50",
            "--workers", "1", "--out-dir", str(a)]
    assert main(argv) == 0
    hist = (a / "gibbs_histogram.csv").read_text().splitlines()
    assert len(hist) == 1001
    assert main(["experiment", "--manifest", str(a / "gibbs_manifest.json"), "--out-dir", str(b)]) == 0
    for name in ("gibbs.csv", "gibbs_histogram.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_experiment_unwritable_dir(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["experiment", "gibbs", "--seed", "1", "--out-dir", str(blocker / "sub")]) == 1


def test_threads_env(monkeypatch):
    from bandit_subset.evaluation import default_workers
    monkeypatch.setenv("BANDIT_SUBSET_THREADS", "3")
    assert default_workers() == 3


def test_help_lists_flags(capsys):
    assert main(["select", "--help"]) == 0
    out = capsys.readouterr().out
    for flag in ("--space", "--kernel", "--k", "--mode", "--max-iterations", "--oracle", "--ts-rounds", "--seed"):
        assert flag in out
