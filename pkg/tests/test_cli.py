import csv
import subprocess
import sys

import pytest

from glaaseg.cli import main


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    for name in ("phantom1", "phantom2"):
        assert main(["synth", "--phantom", name, "-L", "2", "--seed", "7", "--out", str(out)]) == 0
    return out


def read_kv(path):
    return dict(line.split(" = ", 1) for line in path.read_text().splitlines() if " = " in line)


def test_synth_outputs(corpus):
    for suffix in ("_clean.pgm", ".pgm", "_gt.pgm", "_manifest.txt"):
        assert (corpus / f"phantom1{suffix}").exists()
    m = read_kv(corpus / "phantom1_manifest.txt")
    assert m["command"] == "synth" and m["seed"] == "7" and m["looks"] == "2"
    assert "numpy_version" in m


def test_synth_deterministic(tmp_path, corpus):
    assert main(["synth", "--phantom", "phantom1", "-L", "2", "--seed", "7", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "phantom1.pgm").read_bytes() == (corpus / "phantom1.pgm").read_bytes()


def test_synth_from_spec_file(tmp_path):
    spec = tmp_path / "s.txt"
    spec.write_text("name = blob\nwidth = 30\nheight = 20\nbackground = 10\nshape = disk 15 10 6 200\n")
    assert main(["synth", "--spec", str(spec), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "blob.pgm").exists()


def test_synth_errors(tmp_path, capsys):
    assert main(["synth", "-L", "0", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("width = 3\n")
    assert main(["synth", "--spec", str(bad), "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_segment_with_gt(tmp_path, corpus):
    rc = main(["segment", str(corpus / "phantom1.pgm"), "--solver", "model3",
               "--gt", str(corpus / "phantom1_gt.pgm"), "--out", str(tmp_path)])
    assert rc == 0
    rep = read_kv(tmp_path / "report.txt")
    assert float(rep["dsc"]) > 0.9 and "pp" in rep
    assert "pp normalization" in (tmp_path / "report.txt").read_text()
    man = read_kv(tmp_path / "manifest.txt")
    assert man["config.mu"] == "20.0" and man["solver"] == "model3" and man["preset"] == "synth-fpa"
    rows = list(csv.reader(open(tmp_path / "trace.csv")))
    assert rows[0] == ["iteration", "objective", "c1", "c2"]
    assert len(rows) - 1 == int(rep["iterations"])


def test_segment_without_gt_omits_dsc(tmp_path, corpus):
    assert main(["segment", str(corpus / "phantom2.pgm"), "--solver", "model2", "--out", str(tmp_path)]) == 0
    assert "dsc" not in read_kv(tmp_path / "report.txt")


def test_segment_flags_override_preset(tmp_path, corpus):
    assert main(["segment", str(corpus / "phantom2.pgm"), "--preset", "interior", "--iters", "7",
                 "--tol", "0", "--out", str(tmp_path)]) == 0
    man = read_kv(tmp_path / "manifest.txt")
    assert man["config.mu"] == "1.0" and man["config.max_iters"] == "7"
    assert read_kv(tmp_path / "report.txt")["iterations"] == "7"


def test_segment_stability_warning(tmp_path, corpus, capsys):
    rc = main(["segment", str(corpus / "phantom1.pgm"), "--solver", "model3", "--lambda", "0.1",
               "--alpha", "0.2", "--iters", "20", "--out", str(tmp_path)])
    assert rc == 0
    assert "warning:" in capsys.readouterr().err
    assert "warning = " in (tmp_path / "report.txt").read_text()


def test_segment_errors(tmp_path, corpus, capsys):
    junk = tmp_path / "junk.pgm"
    junk.write_bytes(b"xx")
    assert main(["segment", str(junk), "--out", str(tmp_path)]) == 2
    assert main(["segment", str(tmp_path / "none.pgm"), "--out", str(tmp_path)]) == 2
    assert main(["segment", str(corpus / "phantom1.pgm"), "--gt", str(corpus / "phantom2_gt.pgm"),
                 "--out", str(tmp_path)]) == 2
    assert main(["segment", str(corpus / "phantom1.pgm"), "--mu", "-1", "--out", str(tmp_path)]) == 2
    assert main(["segment", str(corpus / "phantom1.pgm"), "--mu", "1e308", "--out", str(tmp_path)]) == 3
    assert "numerical abort" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["segment", str(corpus / "phantom1.pgm"), "--solver", "model7", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_segment_deterministic(tmp_path, corpus):
    for run in ("a", "b"):
        assert main(["segment", str(corpus / "phantom1.pgm"), "--solver", "model4",
                     "--out", str(tmp_path / run)]) == 0
    for name in ("mask.pgm", "overlay.pgm", "trace.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bench_rows(tmp_path, corpus):
    out = tmp_path / "bench.csv"
    assert main(["bench", str(corpus), "--repeats", "1", "--iters", "20", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 8
    assert {r["image"] for r in rows} == {"phantom1.pgm", "phantom2.pgm"}
    assert {r["solver"] for r in rows} == {"model1", "model2", "model3", "model4"}
    assert all(r["dsc"] for r in rows)
    assert (tmp_path / "bench_manifest.txt").exists()


def test_bench_errors(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["bench", str(empty), "--out", str(tmp_path / "b.csv")]) == 2
    assert main(["bench", str(tmp_path / "nope"), "--out", str(tmp_path / "b.csv")]) == 2
    assert main(["bench", str(empty), "--repeats", "0", "--out", str(tmp_path / "b.csv")]) == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "glaaseg", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "glaaseg" in out.stdout
    out = subprocess.run([sys.executable, "-m", "glaaseg"], capture_output=True, text=True)
    assert out.returncode == 2
