import csv
import io
import json
import math
import subprocess
import sys

import pytest

from detapprox.cli import REPORT_COLUMNS, main, parse_complex
from detapprox.sparsemat import from_entries, read_matrix_market, write_matrix_market


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture
def gen(tmp_path):
    def _gen(*flags):
        path = tmp_path / f"m{len(list(tmp_path.iterdir()))}.mtx"
        code, text = run("generate", *flags, "-o", str(path))
        assert code == 0, text
        return str(path), text

    return _gen


def write(tmp_path, name, M):
    path = tmp_path / name
    path.write_text(write_matrix_market(M))
    return str(path)


@pytest.mark.parametrize(
    "text, value",
    [("3", 3), ("-0.5i", -0.5j), ("0+0.5i", 0.5j), ("1-2j", 1 - 2j), ("i", 1j), ("-i", -1j), ("1e-3+2E1i", 1e-3 + 20j)],
)
def test_parse_complex(text, value):
    assert parse_complex(text) == value


@pytest.mark.parametrize("text", ["", "abc", "1+", "1+2", "2i+1", "1 2"])
def test_parse_complex_rejects(text):
    with pytest.raises(Exception):
        parse_complex(text)


def test_generate_summaries(gen):
    path, text = gen("--kind", "laplacian2d", "--m", "30")
    assert "n=900 nnz=4380 hermitian=true" in text
    M = read_matrix_market(open(path).read())
    assert M.order == 900
    assert "kind=laplacian2d m=30" in open(path).read().splitlines()[1]
    _, text = gen("--kind", "toeplitz", "--n", "10")
    assert "nnz=28" in text
    path, text = gen("--kind", "example2x2", "--alpha", "0+0.5i")
    assert "n=2 nnz=4" in text
    assert read_matrix_market(open(path).read()).to_dense()[0, 1] == 0.5j


def test_generate_to_stdout():
    code, text = run("generate", "--kind", "block_t3", "--n", "6")
    assert code == 0 and text.startswith("%%MatrixMarket")


def test_generate_usage_errors():
    assert run("generate", "--kind", "nope", "--n", "3")[0] == 2
    assert run("generate", "--kind", "laplacian2d")[0] == 2
    assert run("generate", "--kind", "example2x2", "--alpha", "x")[0] == 2
    assert run("frobnicate")[0] == 2


def test_zone_csv_report(gen):
    path, _ = gen("--kind", "laplacian2d", "--m", "30")
    code, text = run("zone", "--matrix", path, "--block-size", "30", "--order", "1", "--exact", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == REPORT_COLUMNS
    assert len(rows) == 3
    for row in rows[1:]:
        for cell in row:
            if cell:
                float(cell)
    assert float(rows[1][REPORT_COLUMNS.index("rel_err_logdet")]) == pytest.approx(0.1150, abs=1e-4)


def test_zone_identity_and_json(tmp_path):
    path = write(tmp_path, "eye.mtx", from_entries(6, [(i, i, 1) for i in range(6)]))
    code, text = run("zone", "--matrix", path, "--block-offsets", "0,2,5,6", "--order", "3", "--format", "json")
    assert code == 0
    doc = json.loads(text)
    assert doc["schema"] == 1 and len(doc["rows"]) == 4
    assert all(r["delta_re"] == 0 and r["delta_im"] == 0 for r in doc["rows"])


def test_zone_checkerboard_skips_odd_orders(gen):
    path, _ = gen("--kind", "checkerboard", "--k", "8", "--block-size", "4", "--coupling-scale", "0.2", "--seed", "3")
    code, text = run("zone", "--matrix", path, "--block-size", "4", "--order", "4", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [r["skipped"] for r in rows] == ["0", "1", "0", "1", "0"]


def test_zone_output_is_deterministic(gen):
    path, _ = gen("--kind", "checkerboard", "--k", "8", "--block-size", "4", "--coupling-scale", "0.2", "--seed", "7")
    first = run("zone", "--matrix", path, "--block-size", "4", "--order", "6", "--rho", "power", "--format", "json")
    second = run("zone", "--matrix", path, "--block-size", "4", "--order", "6", "--rho", "power", "--format", "json")
    assert first == second


def test_zone_text_format(gen):
    path, _ = gen("--kind", "toeplitz", "--n", "12")
    code, text = run("zone", "--matrix", path, "--block-size", "3", "--order", "2", "--exact")
    assert code == 0 and "hermitian_exact" in text and "ln det(M)" in text


def test_zone_exit_codes(tmp_path, gen, monkeypatch):
    singular = write(tmp_path, "s.mtx", from_entries(2, [(0, 1, 1), (1, 0, 1)]))
    assert run("zone", "--matrix", singular, "--block-size", "1")[0] == 3

    path, _ = gen("--kind", "toeplitz", "--n", "6", "--a", "1")
    code, text = run("zone", "--matrix", path, "--block-size", "1", "--rho", "value:1.5", "--format", "csv")
    assert code == 4 and text.startswith("p,")
    assert run("zone", "--matrix", path, "--block-size", "1", "--rho", "value:1.5", "--no-bounds")[0] == 0

    dd, _ = gen("--kind", "diag_dominant_random", "--n", "30", "--seed", "1")
    assert run("zone", "--matrix", dd, "--block-size", "1", "--order", "4", "--rho", "gersh", "--nnz-cap", "10")[0] == 7

    monkeypatch.setenv("ZONEDET_DENSE_CAP", "4")
    assert run("zone", "--matrix", dd, "--block-size", "1", "--exact")[0] == 6


def test_zone_usage_errors(tmp_path, gen):
    path, _ = gen("--kind", "toeplitz", "--n", "6")
    assert run("zone", "--matrix", path, "--block-size", "4")[0] == 2
    assert run("zone", "--matrix", path, "--block-offsets", "0,2,5")[0] == 2
    assert run("zone", "--matrix", path, "--block-size", "2", "--rho", "value:x")[0] == 2
    assert run("zone", "--matrix", path, "--block-size", "2", "--order", "-1")[0] == 2
    assert run("zone", "--matrix", str(tmp_path / "missing.mtx"), "--block-size", "2")[0] == 2
    bad = tmp_path / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 9 1\n")
    assert run("zone", "--matrix", str(bad), "--block-size", "1")[0] == 2


def test_spai_report(gen):
    path, _ = gen("--kind", "toeplitz", "--n", "100")
    code, text = run("spai", "--matrix", path, "--exact", "--format", "json")
    doc = json.loads(text)
    assert code == 0 and doc["schema"] == 1
    assert doc["ln_sigma"] == pytest.approx(math.log(2) + 99 * math.log(1.5), rel=1e-14)
    assert doc["ln_det"] == pytest.approx(math.log(101), rel=1e-12)
    code, text = run("spai", "--matrix", path, "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert rows[0]["ln_det"] == ""


def test_spai_cholesky_breakdown(tmp_path):
    path = write(tmp_path, "indef.mtx", from_entries(2, [(0, 0, 1), (0, 1, 2), (1, 0, 2), (1, 1, 1)]))
    assert run("spai", "--matrix", path)[0] == 5


def test_exact_printouts(tmp_path, gen):
    path, _ = gen("--kind", "example2x2", "--alpha", "0+0.5i")
    code, text = run("exact", "--matrix", path, "--format", "json")
    doc = json.loads(text)
    assert doc["ln_abs"] == pytest.approx(math.log(1.25))
    assert doc["principal_phase"] == pytest.approx(0.0, abs=1e-15)
    assert doc["det_re"] == pytest.approx(1.25)
    path, _ = gen("--kind", "block_t3", "--n", "9")
    code, text = run("exact", "--matrix", path)
    assert float(text.split("ln_abs")[1].split()[0]) == pytest.approx(3 * math.log(3 / 8))
    eye = write(tmp_path, "eye.mtx", from_entries(3, [(i, i, 1) for i in range(3)]))
    _, text = run("exact", "--matrix", eye)
    assert "ln_abs           0\n" in text


def test_console_entry_point(gen):
    path, _ = gen("--kind", "toeplitz", "--n", "4")
    proc = subprocess.run(
        [sys.executable, "-m", "detapprox", "exact", "--matrix", path, "--format", "csv"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "n,ln_abs,principal_phase,det_re,det_im"
