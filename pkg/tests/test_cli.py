import csv

import numpy as np
import pytest

from pbcs.cli import m_from_percent, main, parse_shape
from pbcs.errors import UsageError
from pbcs.iofmt import (
    RawCubeSpec,
    SyntheticCubeSpec,
    generate_synthetic_cube,
    load_cube,
    read_measurements,
    read_raw_cube,
)
from pbcs.metrics import mse
from pbcs.sensing import SensingConfig, acquire


def run(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:  # argparse rejections
        return exc.code


@pytest.fixture
def cube_file(tmp_path):
    p = tmp_path / "cube.bsq"
    assert run("synth", "--shape", "8x8x8", "--seed", 0, "-o", p) == 0
    return p


def test_parse_shape():
    assert parse_shape("16x16x8") == (16, 16, 8)
    for bad in ("16x16", "axbxc", "0x2x2"):
        with pytest.raises(Exception):
            parse_shape(bad)


def test_m_from_percent():
    assert m_from_percent(50, 128) == 64
    assert m_from_percent(0.1, 128) == 1
    assert m_from_percent(99.9, 128) == 127
    for p in (0, 100, -5, 150):
        with pytest.raises(UsageError):
            m_from_percent(p, 128)


def test_synth_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.raw", tmp_path / "b.raw"
    assert run("synth", "--shape", "16x16x8", "--seed", 7, "--drift", 0.05, "-o", a) == 0
    assert run("synth", "--shape", "16x16x8", "--seed", 7, "--drift", 0.05, "-o", b) == 0
    assert a.read_bytes() == b.read_bytes()
    cube = read_raw_cube(a, RawCubeSpec("bsq", "uint16", "little", 16, 16, 8))
    assert cube == generate_synthetic_cube(SyntheticCubeSpec((16, 16, 8), 7))
    assert "16 rows x 16 columns x 8 bands" in capsys.readouterr().out


def test_synth_bad_shape(tmp_path):
    assert run("synth", "--shape", "16by16", "-o", tmp_path / "x") == 2


def test_missing_seed_is_drawn_and_printed(tmp_path, capsys):
    assert run("synth", "--shape", "2x2x2", "-o", tmp_path / "x") == 0
    assert "seed:" in capsys.readouterr().out


def test_acquire(tmp_path, cube_file):
    out = tmp_path / "y.pbcs"
    assert run("acquire", cube_file, "--shape", "8x8x8", "--m-percent", 50, "--seed", 3, "-o", out) == 0
    ms = read_measurements(out)
    assert ms.config.m == 32
    cube = read_raw_cube(cube_file, RawCubeSpec("bsq", "uint16", "little", 8, 8, 8))
    assert ms == acquire(cube, SensingConfig(32, 3, 8, 8))


def test_acquire_window(tmp_path, cube_file):
    out = tmp_path / "y.pbcs"
    assert run("acquire", cube_file, "--shape", "8x8x8", "--window", "2:5,:,0:4",
               "--m-percent", 50, "--seed", 3, "-o", out) == 0
    ms = read_measurements(out)
    assert ms.cube_shape == (3, 8, 4) and ms.config.m == 16


@pytest.mark.parametrize("p", [100, 0, 250])
def test_acquire_bad_percentage(tmp_path, cube_file, p):
    assert run("acquire", cube_file, "--shape", "8x8x8", "--m-percent", p, "--seed", 1, "-o", tmp_path / "y") == 2


def test_error_exit_codes(tmp_path, cube_file):
    assert run("reconstruct", tmp_path / "missing.pbcs", "-o", tmp_path / "e.npy") == 3
    (tmp_path / "junk.pbcs").write_bytes(b"junk" * 20)
    assert run("reconstruct", tmp_path / "junk.pbcs", "-o", tmp_path / "e.npy") == 4
    assert run("acquire", cube_file, "--shape", "8x8x9", "--m-percent", 50, "--seed", 1, "-o", tmp_path / "y") == 4


def test_reserved_predictor(tmp_path, cube_file):
    y = tmp_path / "y.pbcs"
    run("acquire", cube_file, "--shape", "8x8x8", "--m-percent", 50, "--seed", 0, "-o", y)
    assert run("reconstruct", y, "--predictor", "ls", "-o", tmp_path / "e.npy") == 2


def test_reconstruct_tv_then_itv(tmp_path, cube_file):
    y = tmp_path / "y.pbcs"
    run("acquire", cube_file, "--shape", "8x8x8", "--m-percent", 50, "--seed", 0, "-o", y)
    assert run("reconstruct", y, "--method", "tv", "--truth", cube_file, "-o", tmp_path / "tv.npy",
               "--report", tmp_path / "tv.csv") == 0
    assert run("reconstruct", y, "--method", "itv", "--truth", cube_file, "-o", tmp_path / "itv.npy",
               "--report", tmp_path / "itv.csv") == 0
    truth = read_raw_cube(cube_file, RawCubeSpec("bsq", "uint16", "little", 8, 8, 8))
    tv_mse = mse(load_cube(tmp_path / "tv.npy"), truth)
    itv_mse = mse(load_cube(tmp_path / "itv.npy"), truth)
    assert itv_mse <= tv_mse
    hist = list(csv.DictReader(open(tmp_path / "itv.csv")))
    assert float(hist[0]["mse"]) == tv_mse
    assert len(list(csv.DictReader(open(tmp_path / "tv.csv")))) == 1


def test_reconstruct_single_row(tmp_path):
    c = tmp_path / "c.bsq"
    y = tmp_path / "y.pbcs"
    run("synth", "--shape", "1x8x8", "--seed", 2, "-o", c)
    run("acquire", c, "--shape", "1x8x8", "--m-percent", 60, "--seed", 2, "-o", y)
    assert run("reconstruct", y, "--method", "itv", "-o", tmp_path / "e.npy", "--report", tmp_path / "h.csv") == 0
    hist = list(csv.DictReader(open(tmp_path / "h.csv")))
    assert [h["iteration"] for h in hist] == ["0", "1"]


def _numeric(path):
    rows = list(csv.DictReader(open(path)))
    for r in rows:
        del r["wall_seconds"]
    return rows


def test_sweep_cardinality_and_determinism(tmp_path):
    c = tmp_path / "c.bsq"
    run("synth", "--shape", "4x6x6", "--seed", 1, "-o", c)
    args = ["sweep", c, "--shape", "4x6x6", "--percentages", "30,50", "--methods", "tv,itv",
            "--seed", 5, "--max-outer", 5]
    assert run(*args, "-o", tmp_path / "a.csv") == 0
    assert run(*args, "--jobs", 2, "-o", tmp_path / "b.csv") == 0
    a = _numeric(tmp_path / "a.csv")
    assert len(a) == 4
    assert [(r["m_percent"], r["method"]) for r in a] == [
        ("30.0", "tv"), ("30.0", "itv"), ("50.0", "tv"), ("50.0", "itv")]
    assert a == _numeric(tmp_path / "b.csv")


def test_sweep_windows_are_averaged(tmp_path):
    c = tmp_path / "c.bsq"
    run("synth", "--shape", "6x6x6", "--seed", 1, "-o", c)
    base = ["sweep", c, "--shape", "6x6x6", "--percentages", "50", "--methods", "tv", "--seed", 2]
    run(*base, "--window", "0:3,:,:", "-o", tmp_path / "w0.csv")
    run(*base, "--window", "3:6,:,:", "-o", tmp_path / "w1.csv")
    run(*base, "--window", "0:3,:,:", "--window", "3:6,:,:", "-o", tmp_path / "both.csv")
    m = [float(_numeric(tmp_path / f)[0]["mse"]) for f in ("w0.csv", "w1.csv", "both.csv")]
    assert m[2] == pytest.approx((m[0] + m[1]) / 2, rel=1e-12)


def test_export(tmp_path, cube_file):
    assert run("export", cube_file, "--shape", "8x8x8", "--band", 3, "-o", tmp_path / "b.png") == 0
    assert (tmp_path / "b.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert run("export", cube_file, "--shape", "8x8x8", "--band", 8, "-o", tmp_path / "b.png") == 2
