import json
import shutil
from importlib import resources
from pathlib import Path

import pytest
import yaml

from versekit import cli
from versekit.cli import main


def copy_project(config: Path, dest: Path) -> Path:
    shutil.copytree(config.parent, dest)
    return dest / config.name


def edit_config(config: Path, **changes) -> None:
    raw = yaml.safe_load(config.read_text(encoding="utf-8"))
    raw.update(changes)
    config.write_text(yaml.safe_dump(raw), encoding="utf-8")


def run(config: Path, command: str, *extra: str) -> int:
    return main([command, "--config", str(config), "-q", *extra])


def report(config: Path, command: str, out: str = "out") -> dict:
    return json.loads((config.parent / out / "_run" / f"{command}.json").read_text(encoding="utf-8"))


def errors(rep: dict) -> str:
    return "\n".join(e.get("error", "") for e in rep["events"])


def vrs_copy(dest: Path) -> Path:
    src = resources.files("versekit.data").joinpath("versification")
    dest.mkdir()
    for name in cli.SCHEME_FILES.values():
        (dest / name).write_bytes(src.joinpath(name).read_bytes())
    return dest


# ---------------------------------------------------------------------------
# validate


def test_validate_passes(toy_project, capsys):
    assert run(toy_project, "validate") == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS canonical index: 41899 verses" in out


def test_validate_reports_missing_scheme_file(toy_project, tmp_path, capsys):
    config = copy_project(toy_project, tmp_path / "p")
    vrs = vrs_copy(tmp_path / "vrs")
    (vrs / "lxx.vrs").unlink()
    edit_config(config, versification_data=str(vrs))
    assert run(config, "validate") == 1
    assert "FAIL versification files: missing: lxx.vrs" in capsys.readouterr().out


def test_validate_reports_book_deltas(toy_project, tmp_path, capsys):
    config = copy_project(toy_project, tmp_path / "p")
    vrs = vrs_copy(tmp_path / "vrs")
    org = vrs / "org.vrs"
    org.write_text(org.read_text(encoding="utf-8").replace("GEN 1:31 ", "GEN 1:30 ", 1), encoding="utf-8")
    edit_config(config, versification_data=str(vrs))
    assert run(config, "validate") == 1
    out = capsys.readouterr().out
    line = next(x for x in out.splitlines() if x.startswith("FAIL canonical index"))
    assert "expected 41899" in line and "GEN" in line


# ---------------------------------------------------------------------------
# config and fetch


def test_bad_config_exits_1(toy_project, tmp_path):
    config = copy_project(toy_project, tmp_path / "p")
    assert run(tmp_path / "nope.yaml", "fetch") == 1
    original = config.read_text(encoding="utf-8")
    edit_config(config, bogus=1)
    assert run(config, "fetch") == 1
    config.write_text(original, encoding="utf-8")
    edit_config(config, seed="zero")
    assert run(config, "fetch") == 1


def test_unknown_license_tag_exits_1(toy_project, tmp_path):
    config = copy_project(toy_project, tmp_path / "p")
    assert run(config, "fetch", "--license-allow", "CC0") == 1


def test_fetch_rejects_bad_checksum(toy_project, tmp_path):
    config = copy_project(toy_project, tmp_path / "p")
    manifest = config.parent / "corpus.tsv"
    rows = manifest.read_text(encoding="utf-8").split("\n")
    cells = rows[1].split("\t")
    cells[3] = "0" * 64
    rows[1] = "\t".join(cells)
    manifest.write_text("\n".join(rows), encoding="utf-8")
    assert run(config, "fetch") == 2
    assert "checksum mismatch" in errors(report(config, "fetch"))
    assert not (config.parent / "corpus" / cells[0]).exists()


def test_fetch_is_cached(toy_project, tmp_path):
    config = copy_project(toy_project, tmp_path / "p")
    assert run(config, "fetch") == 0
    assert {e["status"] for e in report(config, "fetch")["events"]} == {"fetched"}
    assert run(config, "fetch") == 0
    assert {e["status"] for e in report(config, "fetch")["events"]} == {"cached"}


def test_license_filter(toy_project, tmp_path):
    config = copy_project(toy_project, tmp_path / "p")
    assert run(config, "fetch", "--license-allow", "CC BY-SA") == 0
    fetched = sorted(p.name for p in (config.parent / "corpus").iterdir() if p.is_dir())
    assert fetched == ["nat-natbib", "rla-rla", "tga-tgaNT"]


def test_missing_prerequisite_exits_2(toy_project, tmp_path):
    config = copy_project(toy_project, tmp_path / "p")
    assert run(config, "split") == 2
    assert "missing prerequisite" in errors(report(config, "split"))
    assert run(config, "extract") == 2


def test_output_dir_overrides(toy_project, tmp_path, monkeypatch):
    config = copy_project(toy_project, tmp_path / "p")
    assert run(config, "fetch", "--output-dir", str(tmp_path / "flag")) == 0
    assert (tmp_path / "flag" / "_run" / "fetch.json").is_file()
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert run(config, "fetch") == 0
    assert (tmp_path / "env" / "_run" / "fetch.json").is_file()
    assert not (config.parent / "out").exists()


def test_internal_error_exits_3(toy_project, tmp_path, monkeypatch):
    config = copy_project(toy_project, tmp_path / "p")

    def boom(ws):
        raise RuntimeError("boom")

    monkeypatch.setitem(cli.STAGES, "stats", boom)
    assert run(config, "stats") == 3
    rep = report(config, "stats")
    assert rep["status"] == "internal-error" and "RuntimeError: boom" in errors(rep)


# ---------------------------------------------------------------------------
# full pipeline


def test_pipeline_outputs(toy_run):
    out = toy_run.parent / "out"
    for rel in ("stats/translations.tsv", "splits/toy/CV.fold4.manifest",
                "splits/toy/RelatedLanguage-GospelTranslation.manifest",
                "align/toy/GospelTranslation/hyp.txt", "score/toy/CV.fold0/report.json"):
        assert (out / rel).is_file(), rel
    rep = json.loads((out / "score/toy/GospelTranslation/report.json").read_text(encoding="utf-8"))
    assert set(rep["corpus"]) == {"bleu", "spbleu", "chrf3", "wer", "ter"}


@pytest.mark.parametrize("command", ["fetch", "extract", "clean", "stats", "pairs", "split", "align", "score"])
def test_rerun_writes_nothing(toy_run, command):
    assert run(toy_run, command) == 0
    rep = report(toy_run, command)
    assert rep["written"] == [] and rep["exit_code"] == 0


def test_config_change_is_refused_downstream(toy_run, tmp_path):
    config = copy_project(toy_run, tmp_path / "p")
    raw = yaml.safe_load(config.read_text(encoding="utf-8"))
    raw["metrics"]["subword_vocab"] += 1
    config.write_text(yaml.safe_dump(raw), encoding="utf-8")
    assert run(config, "score") == 2
    assert "fingerprint mismatch" in errors(report(config, "score"))


def test_seed_and_jobs_keep_the_fingerprint(toy_run):
    a = cli.load_config(toy_run)
    b = cli.load_config(toy_run, seed=5, jobs=3)
    assert a.fingerprint == b.fingerprint


def test_external_scoring(toy_run, tmp_path):
    out = toy_run.parent / "out"
    manifest = out / "splits/toy/GospelTranslation.manifest"
    hyp = tmp_path / "mine.txt"
    shutil.copy(out / "align/toy/GospelTranslation/hyp.txt", hyp)
    assert run(toy_run, "score", "--hyp", str(hyp), "--manifest", str(manifest)) == 0
    ext = json.loads((out / "score/external/mine/report.json").read_text(encoding="utf-8"))
    own = json.loads((out / "score/toy/GospelTranslation/report.json").read_text(encoding="utf-8"))
    assert ext["corpus"] == own["corpus"]

    short = tmp_path / "short.txt"
    short.write_text("only one line\n", encoding="utf-8")
    assert run(toy_run, "score", "--hyp", str(short), "--manifest", str(manifest)) == 2
    assert "expected" in errors(report(toy_run, "score")) and "one per test verse" in errors(report(toy_run, "score"))
    assert run(toy_run, "score", "--hyp", str(hyp)) == 1
    assert run(toy_run, "score", "--hyp", str(tmp_path / "none.txt"), "--manifest", str(manifest)) == 2
