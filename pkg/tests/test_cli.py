import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from idcompress.archive import read_archive, read_frames
from idcompress.cli import main


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def tg(tmp_path, capsys):
    path = tmp_path / "tg.bin"
    code, _, _ = _run(capsys, "gen", "taylor-green", "--grid", "20,20", "--dt", "0.1", "--steps", "100",
                      "--qoi", "u1", "--out", path)
    assert code == 0
    return path


def test_taylor_green_cf_and_error(tmp_path, capsys, tg):
    meta = json.loads((tmp_path / "tg.bin.json").read_text())
    assert meta["m"] == 400 and meta["n"] == 100 and meta["dims"] == [20, 20]
    arc = tmp_path / "tg.spid"
    code, out, _ = _run(capsys, "compress", "--in", tg, "--rank", "1", "--workers", "1", "--out", arc)
    assert code == 0 and json.loads(out)["ranks"] == [1]
    code, out, _ = _run(capsys, "metrics", "--exact", tg, "--archive", arc)
    rep = json.loads(out)
    assert code == 0
    assert rep["cf"] == 80.0 and rep["rel_frob_error"] <= 1e-12


def test_worker_count_same_digest(tmp_path, capsys, tg):
    digests = []
    for w in (1, 8):
        out_path = tmp_path / f"w{w}.spid"
        assert _run(capsys, "compress", "--in", tg, "--blocks", "2,2", "--chunk", "10", "--stride", "2",
                    "--workers", w, "--out", out_path)[0] == 0
        digests.append(hashlib.sha256(out_path.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_info_round_trips_config(tmp_path, capsys, tg):
    arc = tmp_path / "a.spid"
    _run(capsys, "compress", "--in", tg, "--blocks", "2", "--chunk", "20", "--rank", "2", "--tol", "1e-8",
         "--stride", "3", "--out", arc)
    code, out, _ = _run(capsys, "info", "--in", arc)
    info = json.loads(out)
    assert code == 0
    meta = info["metadata"]
    assert meta == read_archive(arc).metadata
    assert meta["plan"] == {"blocks_per_axis": [2, 2], "time_chunk": 20}
    assert meta["rank_rule"] == {"stage1_rank": 2, "stage2_tol": 1e-8}
    assert meta["subsample"]["strides"] == [3] and meta["qoi"] == "u1"
    assert info["blocks"] == 4


def test_decompress_writes_frames(tmp_path, capsys, tg):
    arc, rec = tmp_path / "a.spid", tmp_path / "rec.bin"
    _run(capsys, "compress", "--in", tg, "--out", arc)
    assert _run(capsys, "decompress", "--in", arc, "--out", rec)[0] == 0
    np.testing.assert_allclose(read_frames(rec, 400), read_frames(tg, 400), atol=1e-14)
    assert json.loads((tmp_path / "rec.bin.json").read_text())["n"] == 100


def test_unstructured_subid(tmp_path, capsys):
    path, arc = tmp_path / "u.bin", tmp_path / "u.spid"
    assert _run(capsys, "gen", "taylor-green", "--unstructured", "--seed", "3", "--qoi", "p", "--out", path)[0] == 0
    assert _run(capsys, "compress", "--in", path, "--stride", "2", "--out", arc)[0] == 0
    assert read_archive(arc).metadata["skeleton_form"] == "fine"
    rep = json.loads(_run(capsys, "metrics", "--exact", path, "--archive", arc)[1])
    assert rep["cf"] == 80.0 and rep["rel_frob_error"] <= 1e-12


def test_synthetic_generators(tmp_path, capsys):
    a_path = tmp_path / "r.bin"
    assert _run(capsys, "gen", "synthetic", "--rank", "3", "--rows", "30", "--cols", "12", "--seed", "1",
                "--out", a_path)[0] == 0
    assert np.linalg.matrix_rank(read_frames(a_path, 30)) == 3
    b_path = tmp_path / "b.bin"
    assert _run(capsys, "gen", "synthetic", "--block-ranks", "1,2", "--rows", "20", "--cols", "8",
                "--out", b_path)[0] == 0
    b = read_frames(b_path, 20)
    assert np.linalg.matrix_rank(b[:10]) == 1 and np.linalg.matrix_rank(b[10:]) == 2


def test_verify_bounds(tmp_path, capsys):
    out_path = tmp_path / "vb.json"
    code, out, _ = _run(capsys, "verify-bounds", "--seed-count", "2", "--tau-grid", "0.5,1,2", "--out", out_path)
    rep = json.loads(out)
    assert code == 0
    assert rep["tau_grid"] == [0.5, 1.0, 2.0]
    assert rep["thm1"]["violations"] == 0 and rep["thm2"]["violations"] == 0
    assert json.loads(out_path.read_text()) == rep


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["compress"],
        ["gen", "synthetic", "--rank", "1", "--block-ranks", "1", "--rows", "3", "--cols", "3", "--out", "x"],
        ["gen", "taylor-green", "--grid", "20", "--out", "x"],
        ["gen", "taylor-green", "--dt", "-1", "--out", "x"],
        ["verify-bounds", "--tau-grid", "a,b"],
    ],
)
def test_usage_errors_exit_one(capsys, argv):
    assert _run(capsys, *argv)[0] == 1


def test_arity_and_missing_files(tmp_path, capsys, tg):
    code, _, err = _run(capsys, "compress", "--in", tg, "--stride", "1,1,1", "--out", tmp_path / "x")
    assert code == 1 and "--stride" in err
    code, _, _ = _run(capsys, "info", "--in", tmp_path / "missing.spid")
    assert code == 1


def test_numerical_errors_exit_two(tmp_path, capsys, tg):
    bad = tmp_path / "bad.spid"
    bad.write_bytes(b"XXXXnot an archive")
    code, _, err = _run(capsys, "info", "--in", bad)
    assert code == 2 and err.startswith("BadMagic")
    trunc = tmp_path / "tg_short.bin"
    trunc.write_bytes(tg.read_bytes()[:-8])
    (tmp_path / "tg_short.bin.json").write_text((tmp_path / "tg.bin.json").read_text())
    code, _, err = _run(capsys, "compress", "--in", trunc, "--out", tmp_path / "t.spid")
    assert code == 2 and err.startswith("TruncatedPayload")


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "idcompress.cli", "info", "--in", str(tmp_path / "none")],
                         capture_output=True, text=True)
    assert res.returncode == 1
