"""Chart rendering over the checked-in CLI CSV fixtures."""
import math
from pathlib import Path

import pytest

from tcplots import PlotSpec, SchemaError, render
from tcplots.cli import main

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def _spec(tmp_path, kind, *names, **kwargs):
    return PlotSpec(inputs=tuple(str(FIXTURES / n) for n in names),
                    kind=kind, out=str(tmp_path / "chart"), **kwargs)


def _assert_images(info):
    for key in ("png", "svg"):
        path = Path(info[key])
        assert path.exists()
        assert path.stat().st_size > 0


def test_decay_chart_renders_both_series_with_bounds(tmp_path):
    info = render(_spec(tmp_path, "decay", "decay_naive.csv",
                        "decay_improved.csv",
                        labels=("naive", "improved")))
    _assert_images(info)
    # two couplings, each with the two bound-variant overlays
    assert info["series"] == 6


def test_ksweep_chart_places_the_threshold_markers(tmp_path):
    info = render(_spec(tmp_path, "ksweep", "ksweep_d100.csv", degree=100))
    _assert_images(info)
    base = 100 / math.log(100)
    assert info["markers"] == pytest.approx([base, 2 * base])
    assert info["markers"][0] == pytest.approx(21.7, abs=0.05)
    assert info["markers"][1] == pytest.approx(43.4, abs=0.05)


def test_smatrix_chart_renders(tmp_path):
    info = render(_spec(tmp_path, "smatrix", "smatrix.csv"))
    _assert_images(info)
    assert info["series"] == 1


def test_rendering_is_idempotent_and_does_not_mutate_inputs(tmp_path):
    before = (FIXTURES / "decay_naive.csv").read_bytes()
    spec = _spec(tmp_path, "decay", "decay_naive.csv")
    first = render(spec)
    second = render(spec)
    assert first["png"] == second["png"]
    assert (FIXTURES / "decay_naive.csv").read_bytes() == before


def test_empty_csv_is_an_explicit_error(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("level,mean,stderr,bound_v1,bound_v2\n")
    spec = PlotSpec(inputs=(str(empty),), kind="decay",
                    out=str(tmp_path / "chart"))
    with pytest.raises(SchemaError, match="no data rows"):
        render(spec)
    assert not (tmp_path / "chart.png").exists()


def test_schema_mismatch_names_the_missing_column(tmp_path):
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("level,value\n1,0.5\n")
    spec = PlotSpec(inputs=(str(wrong),), kind="decay",
                    out=str(tmp_path / "chart"))
    with pytest.raises(SchemaError, match="'mean'"):
        render(spec)


def test_spec_validation():
    with pytest.raises(SchemaError):
        PlotSpec(inputs=("a.csv",), kind="pie", out="x")
    with pytest.raises(SchemaError):
        PlotSpec(inputs=(), kind="decay", out="x")
    with pytest.raises(SchemaError):
        PlotSpec(inputs=("a.csv",), kind="decay", out="x",
                 labels=("one", "two"))


def test_cli_renders_and_reports(tmp_path, capsys):
    code = main(["--kind", "ksweep",
                 "--input", str(FIXTURES / "ksweep_d100.csv"),
                 "--out", str(tmp_path / "sweep.png"), "--degree", "100"])
    out = capsys.readouterr().out
    assert code == 0
    assert "sweep.png" in out
    assert (tmp_path / "sweep.svg").exists()


def test_cli_schema_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("k,value\n4,1\n")
    code = main(["--kind", "ksweep", "--input", str(bad),
                 "--out", str(tmp_path / "x")])
    err = capsys.readouterr().err
    assert code == 2
    assert "'mean'" in err
