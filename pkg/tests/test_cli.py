import json

import pytest

from vibphase.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from vibphase.io import read_audit, read_paln1
from vibphase.segmentation import DatasetManifest, ManifestEntry

SMALL = ["--n-samples", "3000"]
PROTOCOL = ["--trim", "0", "--keep", "all", "--window-len", "600", "--skip-len", "150"]


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--preset", "mixed", "--out", str(out), "--seed", "7", *SMALL]) == EXIT_OK
    return out


def test_synth_writes_benchmark(corpus, tmp_path):
    files = sorted((corpus / "records").glob("*.csv"))
    assert len(files) == 96
    manifest = DatasetManifest.load(corpus / "manifest.json")
    assert manifest.counts() == {"train": 66, "val": 6, "test": 24}
    again = tmp_path / "again"
    assert main(["synth", "--config", str(corpus / "config.json"), "--out", str(again)]) == EXIT_OK
    assert all(f.read_bytes() == (again / "records" / f.name).read_bytes() for f in files)


def test_synth_rejects_zero_files(tmp_path, capsys):
    assert main(["synth", "--preset", "mixed", "--files-per-class", "0", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "files-per-class" in capsys.readouterr().err
    assert not (tmp_path / "records").exists()


def test_align_audit(corpus, tmp_path):
    out = tmp_path / "aligned"
    code = main(["align", "--manifest", str(corpus / "manifest.json"), "--out", str(out), *PROTOCOL,
                 "--mode", "none", "--mode", "reference:x", "--mode", "independent"])
    assert code == EXIT_OK
    ref = read_audit(out / "reference-x" / "audit.csv")
    none = read_audit(out / "none" / "audit.csv")
    assert len(ref) == 96 * 17
    assert max(abs(r["post_phase_x"]) for r in ref) < 0.02
    assert all(r["pre_phase_y"] == r["post_phase_y"] and r["dt_x"] == 0.0 for r in none)
    ind = read_audit(out / "independent" / "audit.csv")
    assert max(abs(r[f"post_phase_{a}"]) for r in ind for a in "xyz") < 0.02
    assert (out / "reference-x" / "audit.png").is_file()
    store = read_paln1(out / "reference-x" / "class0_00.paln1")
    assert store.mode == "reference:x" and store.stack.data.shape == (17, 3, 600)


def test_ingest_skips_corrupt_file(corpus, tmp_path, caplog):
    data = tmp_path / "data"
    data.mkdir()
    for src in sorted((corpus / "records").glob("class?_0[0-3].csv")):
        (data / src.name).write_bytes(src.read_bytes())
    bad = data / "class5_00.csv"
    lines = bad.read_text().splitlines()
    lines[-5] = "1.0,oops,2.0"
    bad.write_text("\n".join(lines) + "\n")
    assert main(["ingest", str(data), "--out", str(tmp_path / "ing"), "--split", "1:1:1"]) == EXIT_OK
    assert "class5_00.csv" in caplog.text and "oops" in caplog.text
    rows = (tmp_path / "ing" / "ingest.csv").read_text().splitlines()
    assert len(rows) == 1 + 23
    assert len(DatasetManifest.load(tmp_path / "ing" / "manifest.json").entries) == 23


def test_align_warns_and_continues(corpus, tmp_path, caplog):
    manifest = DatasetManifest.load(corpus / "manifest.json")
    broken = tmp_path / "broken.csv"
    broken.write_text("# sample_rate_hz=3000\nx,y,z\n1,2\n")
    entries = [ManifestEntry(str(broken), manifest.entries[0].label, manifest.entries[0].split)]
    entries += [ManifestEntry(str(manifest.resolve(e)), e.label, e.split) for e in manifest.entries[1:6]]
    mpath = tmp_path / "m.json"
    DatasetManifest(tuple(entries), manifest.windowing).save(mpath)
    code = main(["align", "--manifest", str(mpath), "--out", str(tmp_path / "a"), *PROTOCOL, "--mode", "none",
                 "--format", "csv"])
    assert code == EXIT_OK
    assert "skipping" in caplog.text and "broken.csv" in caplog.text
    assert len(read_audit(tmp_path / "a" / "none" / "audit.csv")) == 5 * 17


def test_evaluate_and_rerun(tmp_path, capsys):
    out = tmp_path / "ev"
    args = ["evaluate", "--preset", "mixed", "--files-per-class", "4", "--split", "2:1:1", *SMALL, *PROTOCOL,
            "--repetitions", "1", "--out", str(out)]
    for m in ("none", "independent", "reference:x", "reference:y", "reference:z"):
        args += ["--mode", m]
    assert main(args) == EXIT_OK
    table = capsys.readouterr().out
    assert "Preprocessing Method" in table and "Z-axis Reference" in table
    report = json.loads((out / "report.json").read_text())
    assert len(report["rows"]) == 5
    for name in ("report.txt", "report.csv", "accuracy.png", "confusion.png", "config.json"):
        assert (out / name).is_file()

    again = tmp_path / "ev2"
    assert main(["evaluate", "--config", str(out / "config.json"), "--out", str(again)]) == EXIT_OK
    assert json.loads((again / "report.json").read_text()) == report
    assert (again / "report.csv").read_bytes() == (out / "report.csv").read_bytes()

    rendered = tmp_path / "rep"
    assert main(["report", str(out / "report.json"), "--out", str(rendered)]) == EXIT_OK
    assert (rendered / "report.txt").read_text() == (out / "report.txt").read_text()


def test_evaluate_from_manifest(corpus, tmp_path):
    code = main(["evaluate", "--manifest", str(corpus / "manifest.json"), *PROTOCOL, "--repetitions", "1",
                 "--mode", "reference:x", "--out", str(tmp_path)])
    assert code == EXIT_OK
    acc = json.loads((tmp_path / "report.json").read_text())["rows"][0]["accuracy_mean"]
    assert 0.0 <= acc <= 1.0


@pytest.mark.parametrize(
    "argv",
    [
        ["evaluate"],
        ["evaluate", "--preset", "mixed", "--manifest", "m.json"],
        ["evaluate", "--preset", "nope"],
        ["evaluate", "--preset", "mixed", "--dominant-freq", "20", "--detect-band", "5:100"],
        ["evaluate", "--preset", "mixed", "--k-grid", "2,4"],
        ["evaluate", "--preset", "mixed", "--mode", "sideways"],
        ["evaluate", "--preset", "mixed", "--repetitions", "0"],
        ["align", "--manifest", "missing.json"],
        ["synth"],
        ["frobnicate"],
    ],
)
def test_config_errors_exit_1(argv, tmp_path):
    assert main([*argv, "--out", str(tmp_path)] if argv[0] != "frobnicate" else argv) == EXIT_CONFIG


def test_ingest_all_bad_exits_2(tmp_path):
    (tmp_path / "a.csv").write_text("x,y\n1,2\n")
    assert main(["ingest", str(tmp_path / "a.csv"), "--sample-rate", "100", "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_bad_report_exits_2(tmp_path):
    p = tmp_path / "r.json"
    p.write_text("{}")
    assert main(["report", str(p), "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_version(capsys):
    assert main(["--version"]) == EXIT_OK
    assert capsys.readouterr().out.strip()
