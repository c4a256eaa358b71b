"""Command line interface: config resolution, formats, and determinism."""
import json

import pytest

from treecolour.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_oracle_tv_prints_fraction_then_float(capsys):
    code, out, err = run_cli(capsys, "oracle", "tv", "--d", "2",
                             "--height", "1", "--k", "3",
                             "--c", "1", "--q", "2")
    assert code == 0
    assert out.splitlines() == ["3/4", "0.75"]


def test_walk_dp_reports_the_exact_stopping_identity(capsys):
    code, out, _ = run_cli(capsys, "walk", "dp", "--cap", "12",
                           "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["expected_stopped_plus_one"] == "1/1"
    assert payload["config"]["cap"] == 12


def test_walk_fp_csv_schema(capsys):
    code, out, _ = run_cli(capsys, "walk", "fp", "--imax", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "i,probability,probability_float"
    assert lines[1].startswith("0,1/2,")
    assert len(lines) == 5


def test_walk_smatrix_has_a_delta_trailer(capsys):
    code, out, _ = run_cli(capsys, "walk", "smatrix", "--columns", "30",
                           "--cap", "4", "--seed", "9")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "column,fail_row,good_row"
    assert lines[1] == "0,1,0"
    assert lines[-1].startswith("# delta,")


def test_missing_required_field_is_a_config_error(capsys):
    code, _, err = run_cli(capsys, "decay", "--k", "4", "--height", "2")
    assert code == 2
    assert "missing required field: d" in err


def test_naive_coupling_rejects_equal_roots(capsys):
    code, _, err = run_cli(capsys, "couple", "--d", "2", "--k", "4",
                           "--height", "2", "--c", "2", "--q", "2",
                           "--coupling", "naive")
    assert code == 2
    assert "c != q" in err


def test_validate_rejects_equal_roots(capsys):
    code, _, err = run_cli(capsys, "validate", "--d", "2", "--k", "4",
                           "--height", "1", "--c", "1", "--q", "1",
                           "--trials", "100")
    assert code == 2


def test_budget_exhaustion_is_exit_three(capsys):
    code, _, err = run_cli(capsys, "oracle", "measure", "--d", "3",
                           "--height", "3", "--k", "5", "--c", "1",
                           "--budget", "100")
    assert code == 3
    assert "enumeration refused" in err


def test_config_file_merges_and_flags_win(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment line\nd = 2\nk = 3\nheight = 1\nc = 1\nq = 2\n")
    code, out, _ = run_cli(capsys, "oracle", "tv", "--config", str(cfg))
    assert code == 0
    assert out.splitlines()[0] == "3/4"
    # a flag overrides the file value: q = 1 makes the distance zero
    code, out, _ = run_cli(capsys, "oracle", "tv", "--config", str(cfg),
                           "--q", "1")
    assert code == 0
    assert out.splitlines()[0] == "0/1"


def test_unknown_config_key_is_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("d = 2\nwobble = 3\n")
    code, _, err = run_cli(capsys, "oracle", "tv", "--config", str(cfg))
    assert code == 2
    assert "wobble" in err


def test_out_writes_atomically_and_prints_a_summary(tmp_path, capsys):
    target = tmp_path / "fp.csv"
    code, out, _ = run_cli(capsys, "walk", "fp", "--imax", "2",
                           "--out", str(target))
    assert code == 0
    assert str(target) in out
    lines = target.read_text().strip().splitlines()
    assert lines[0] == "i,probability,probability_float"
    assert not list(tmp_path.glob(".tmp-*"))


def test_decay_csv_schema(capsys):
    code, out, _ = run_cli(capsys, "decay", "--d", "2", "--k", "4",
                           "--height", "2", "--trials", "50", "--seed", "1")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "level,mean,stderr,bound_v1,bound_v2"
    assert len(lines) == 3


def test_branching_csv_schema(capsys):
    code, out, _ = run_cli(capsys, "branching", "--d", "2", "--k", "4",
                           "--trials", "200", "--seed", "1")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == ("coupling,mean,stderr,naive_two_level,"
                        "src_non_rescuable_bad,src_unmatched_rescuable,"
                        "src_unmatched_fail")
    assert lines[1].startswith("improved,")


def test_json_output_embeds_the_resolved_config(capsys):
    code, out, _ = run_cli(capsys, "branching", "--d", "2", "--k", "4",
                           "--trials", "100", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["config"]["d"] == 2
    assert payload["config"]["coupling"] == "improved"
    assert "mean" in payload


def test_oracle_listlaw_requires_exclude_parent(capsys):
    code, _, err = run_cli(capsys, "oracle", "listlaw", "--d", "2", "--k", "4")
    assert code == 2
    assert "exclude-parent" in err


def test_oracle_listlaw_constrained_measure(capsys):
    code, out, _ = run_cli(capsys, "oracle", "listlaw", "--d", "2",
                           "--k", "3", "--exclude-parent", "2",
                           "--require", "1")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "entries,mass,mass_float"
    entries = [line.split(",")[0] for line in lines[1:]]
    assert entries == ["1-1", "1-3", "3-1"]
    assert all(line.split(",")[1] == "1/3" for line in lines[1:])


@pytest.mark.parametrize("argv", [
    ("decay", "--d", "2", "--k", "4", "--height", "2",
     "--trials", "200", "--seed", "3"),
    ("branching", "--d", "3", "--k", "5", "--trials", "200", "--seed", "3"),
    ("tvbound", "--d", "2", "--k", "4", "--height", "2",
     "--trials", "200", "--seed", "3"),
    ("eventA", "--d", "6", "--k", "4", "--trials", "200", "--seed", "3"),
    ("stats", "--d", "3", "--k", "5", "--trials", "200", "--seed", "3"),
])
def test_outputs_are_byte_identical_across_thread_counts(argv, capsys):
    outputs = []
    for threads in ("1", "2", "8"):
        code, out, _ = run_cli(capsys, *argv, "--threads", threads)
        assert code == 0
        outputs.append(out)
    assert outputs[0] == outputs[1] == outputs[2]
