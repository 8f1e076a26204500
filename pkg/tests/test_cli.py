from __future__ import annotations

import csv

import pytest

from convlab.bench.cli import build_parser, run
from convlab.bench.report import REPORT_COLUMNS
from convlab.core.models import AlgoConfig, Algorithm, ConvShape
from convlab.errors import UsageError
from convlab.ir.lower import lower
from convlab.ir.text import pipeline_text
from convlab.settings import load_settings

SMALL = ["--layers", "conv5.x", "--scale", "8"]


@pytest.mark.parametrize(
    "argv",
    [[], ["tune", "nope"], ["report"], ["verify", "--layers", "conv9.x"], ["verify", "--scale", "12"]],
)
def test_usage_errors_exit_2(argv, capsys):
    assert run(argv) == 2
    assert capsys.readouterr().err.startswith("error: usage:")


def test_parser_rejects_instead_of_exiting():
    with pytest.raises(UsageError):
        build_parser().parse_args(["dump-ir"])


def test_verify_small_layer(capsys):
    assert run(["verify", *SMALL]) == 0
    out = capsys.readouterr().out
    assert "ilpm" in out
    assert "winograd" in out


def test_verify_through_the_kernels():
    assert run(["verify", *SMALL, "--ir", "--algorithms", "ilpm", "direct_cache"]) == 0


def test_dump_ir_writes_the_text_form(tmp_path, capsys):
    path = tmp_path / "ilpm.ir"
    assert run(["dump-ir", "ilpm", "--layer", "conv5.x", "--scale", "8", "--out", str(path)]) == 0
    cfg = AlgoConfig(Algorithm.ILPM, gemm_tile_m=8, workgroup_channels=8)
    assert path.read_text() == pipeline_text(lower(cfg, ConvShape(8, 8, 7, 7)))

    assert run(["dump-ir", "ilpm", "--layer", "conv5.x", "--scale", "8", "--transpose"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("kernel ilpm workgroup=8x1 grid=1x1x1")
    assert "BARRIER" in out


def _report(tmp_path, name):
    out = tmp_path / f"{name}.csv"
    plot = tmp_path / f"{name}.plot"
    argv = ["report", *SMALL, "--algorithms", "ilpm", "direct_cache",
            "--machine", "embedded", "--out", str(out), "--plot", str(plot)]
    assert run(argv) == 0
    return out, plot


def test_report_is_reproducible(tmp_path):
    first, plot = _report(tmp_path, "first")
    second, _ = _report(tmp_path, "second")
    assert first.read_bytes() == second.read_bytes()
    with first.open() as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == REPORT_COLUMNS
    assert [(r[1], r[2], r[3].split()[0]) for r in rows[1:]] == [
        ("conv5.x", "embedded", "ilpm"),
        ("conv5.x", "embedded", "direct_cache"),
    ]
    assert plot.read_text().splitlines()[0] == "layer,algorithm,cycles"


def test_report_ranks_tuned_configurations(tmp_path):
    out = tmp_path / "tuned.csv"
    argv = ["report", *SMALL, "--algorithms", "ilpm", "direct_nocache", "--machine", "embedded",
            "--tune", "--out", str(out)]
    assert run(argv) == 0
    with out.open() as fh:
        rows = list(csv.reader(fh))[1:]
    assert [r[3].split()[0] for r in rows] == ["ilpm", "direct_nocache"]
    # K=8 at this scale leaves one ILP-M workgroup width
    assert "workgroup_channels=8" in rows[0][3]


def test_launch_failure_exit_3(tmp_path, capsys):
    machine = tmp_path / "cramped.machine"
    machine.write_text("base = embedded\nshared_per_cu = 16\n")
    argv = ["report", *SMALL, "--algorithms", "ilpm", "--machine", str(machine), "--out", str(tmp_path / "r.csv")]
    assert run(argv) == 3
    assert capsys.readouterr().err.startswith("error: launch:")


def test_unknown_machine_exit_2(tmp_path, capsys):
    assert run(["report", *SMALL, "--machine", "mainframe", "--out", str(tmp_path / "r.csv")]) == 2
    assert capsys.readouterr().err.startswith("error: config:")


def test_settings_are_saved_and_used(capsys):
    assert run(["settings", "--seed", "7", "--machine", "integrated"]) == 0
    saved = load_settings()
    assert (saved.seed, saved.machine) == (7, "integrated")
    assert "saved" in capsys.readouterr().out

    assert run(["settings"]) == 0
    assert "saved" not in capsys.readouterr().out
    assert run(["verify", *SMALL, "--algorithms", "ilpm"]) == 0
    assert "seed 7" in capsys.readouterr().out


def test_settings_reject_unknown_machine(capsys):
    assert run(["settings", "--machine", "mainframe"]) == 2
    assert load_settings().machine == "dedicated"
