import json
import subprocess
import sys

import pytest
import yaml

from affectbench.cli import main
from affectbench.ingest import TaskInterval, write_annotation_file
from affectbench.synth import SynthSpec, generate_corpus, write_corpus

SMALL = {"n_participants": 3, "segments_per_quadrant": 1, "segment_s": 60.0}


def _cli(*args):
    return main([str(a) for a in args])


def _config(path, **data):
    path.write_text(yaml.safe_dump(data, sort_keys=True))
    return path


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = _config(root / "synth.yaml", synth=SMALL, out=str(root / "gen"))
    assert _cli("synth", "--config", cfg) == 0
    run = root / "gen" / "run.yaml"
    data = yaml.safe_load(run.read_text())
    data.update(models=[{"kind": "lda"}, {"kind": "rf", "n_trees": 10}], tasks=["arousal", "quadrant"])
    run.write_text(yaml.safe_dump(data))
    return run


def test_synth_writes_dataset_and_config(small_run):
    gen = small_run.parent
    assert {p.name for p in (gen / "data" / "SYNTH").iterdir()} == {
        "descriptor.yaml", "eda.csv", "ppg.csv", "annotations.csv"}
    assert yaml.safe_load(small_run.read_text())["datasets"] == ["data/SYNTH"]


def test_ingest_manifest_and_rerun(small_run):
    manifest = small_run.parent / "run" / "manifest.json"
    assert _cli("ingest", "--config", small_run) == 0
    first = manifest.read_bytes()
    segs = json.loads(first)["segments"]
    # participants x quadrants x segments per quadrant
    assert len(segs) == 3 * 4 * 1
    assert _cli("ingest", "--config", small_run) == 0
    assert manifest.read_bytes() == first


def test_features_schema(small_run):
    assert _cli("features", "--config", small_run) == 0
    out = small_run.parent / "run"
    header = (out / "features_combined.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 3 + 54 + 3
    rows = [line.split(",") for line in (out / "features_combined.csv").read_text().splitlines()[1:]]
    values = [float(v) for r in rows for v in r[3:-3]]
    assert len(rows) == 12 and all(0.0 <= v <= 1.0 for v in values)
    assert set(json.loads((out / "imputation.json").read_text())) == {"eda", "ppg", "combined"}


def test_artifacts_bench_report(small_run, capsys):
    out = small_run.parent / "run"
    assert _cli("artifacts", "--config", small_run) == 0
    assert (out / "quality.md").read_text().startswith("| Dataset |")
    assert _cli("bench", "--config", small_run, "--workers", 2) == 0
    results = json.loads((out / "results.json").read_text())
    # 3 modalities x 2 tasks x 2 models plus one shuffled-label control
    assert len(results) == 13
    assert json.loads((out / "failures.json").read_text()) == []
    rankings = (out / "rankings.md").read_bytes()
    (out / "rankings.md").unlink()
    assert _cli("report", "--config", small_run) == 0
    assert (out / "rankings.md").read_bytes() == rankings
    assert "finished_utc" in json.loads((out / "run_metadata.json").read_text())["bench"]


def test_cross_on_multi(tmp_path):
    cfg = _config(tmp_path / "s.yaml", synth="multi", out=str(tmp_path / "gen"))
    assert _cli("synth", "--config", cfg) == 0
    run = tmp_path / "gen" / "run.yaml"
    data = yaml.safe_load(run.read_text())
    data.update(models=["lda"], tasks=["arousal"], modalities=["eda"], cohort_dimensions=["setting", "device"])
    run.write_text(yaml.safe_dump(data))
    assert _cli("cross", "--config", run) == 0
    results = json.loads((tmp_path / "gen" / "run" / "cross_results.json").read_text())
    # setting: 3 groups -> 6 ordered pairs; device: 2 groups -> 2 pairs plus one LODO over the 2-dataset group
    protocols = sorted(r["protocol"] for r in results)
    assert protocols.count("cross") == 8 and protocols.count("lodo") == 2
    assert "| Modality |" in (tmp_path / "gen" / "run" / "cohort_tables.md").read_text()


def test_cross_needs_dimensions(small_run):
    assert _cli("cross", "--config", small_run) == 1


def test_missing_annotation_file(tmp_path, capsys):
    d = write_corpus(generate_corpus(SynthSpec(**SMALL)), tmp_path / "D")
    (d / "annotations.csv").unlink()
    cfg = _config(tmp_path / "c.yaml", datasets=[str(d)], out=str(tmp_path / "o"))
    assert _cli("ingest", "--config", cfg) == 2
    assert str(d / "annotations.csv") in capsys.readouterr().err


@pytest.mark.parametrize("data", [{"bogus_key": 1}, {"models": ["svm"]}, {"rebalance": "sometimes"},
                                  {"train_fractions": [1.5]}, {"protocols": ["kfold"]}])
def test_bad_config(tmp_path, data):
    assert _cli("ingest", "--config", _config(tmp_path / "c.yaml", datasets=["x"], **data)) == 1


def test_missing_config_and_no_datasets(tmp_path):
    assert _cli("ingest", "--config", tmp_path / "nope.yaml") == 1
    assert _cli("ingest", "--config", _config(tmp_path / "c.yaml", out=str(tmp_path))) == 1


def test_no_segments_exit_3(tmp_path):
    d = write_corpus(generate_corpus(SynthSpec(**SMALL)), tmp_path / "D")
    with open(d / "annotations.csv", "w", newline="") as fh:
        write_annotation_file(fh, [TaskInterval("P01", "hapv_01", 10000.0, 10060.0)])
    cfg = _config(tmp_path / "c.yaml", datasets=[str(d)], out=str(tmp_path / "o"))
    assert _cli("ingest", "--config", cfg) == 3


def test_report_without_results(tmp_path):
    assert _cli("report", "--out", tmp_path) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "affectbench", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "bench" in proc.stdout
