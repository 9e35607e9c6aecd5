"""Pipeline driver: `versekit <command> --config <path>`.

Commands run in order fetch, extract, clean, stats, pairs, split, align,
score; `validate` checks a config without touching the corpus.  Every stage
writes under the output directory, records a sidecar `.meta.json` holding
the config fingerprint and the digests of its inputs and outputs, and skips
work whose sidecar still matches.  Files are written to a temp name and
renamed into place.

Exit codes: 0 success, 1 validation failure, 2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import re
import shutil
import sys
import tempfile
import time
import traceback
import urllib.parse
import urllib.request
import zipfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import yaml

from . import __version__
from .align import AlignmentError, TokenizedCorpus, smt_decode, symmetric_score, train_smt
from .digest import bytes_digest, file_digest, tree_digest
from .extract import ExtractFile, corpus_stats, extract_translation, is_text
from .metrics import MetricError, SubwordModel, score_hypotheses, train_subword
from .tasks import (
    GENERATOR_ID, ManifestError, PairingCandidateSet, PairingError, SplitError, SplitManifest,
    build_task, builtin_families, dumps as manifest_dumps, loads as manifest_loads, select_pairing,
    shared_positions, task_spec,
)
from .textclean import RuleError, clean_extract, default_rules_text, parse_rules
from .versification import (
    CANONICAL_SIZE, NT_BOOKS, SCHEME_FILES, CanonicalIndex, VersificationError, VersificationScheme,
    all_schemes, book_count_deltas, canonical_index, default_index, load_tables_from_dir, scheme_text,
)

EXIT_OK, EXIT_VALIDATION, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
CONFIG_VERSION = 1
OUTPUT_ENV = "VERSEKIT_OUTPUT_DIR"
LICENSES = ("CC BY-SA", "CC BY-NC", "CC BY-ND", "CC BY-NC-ND", "Public Domain")
MANIFEST_COLUMNS = ("translation_id", "license", "source", "sha256")
MANIFEST_OPTIONAL = ("family", "country")
USFM_SUFFIXES = (".sfm", ".usfm")
RUN_DIR = "_run"
COMMANDS = ("fetch", "extract", "clean", "stats", "pairs", "split", "align", "score", "validate")

log = logging.getLogger("versekit")


class CliError(Exception):
    code = EXIT_INTERNAL


class ConfigError(CliError):
    code = EXIT_VALIDATION


class DataError(CliError):
    code = EXIT_DATA


DOMAIN_ERRORS = (ManifestError, MetricError, PairingError, SplitError, VersificationError, RuleError,
                 AlignmentError)


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class PipelineConfig:
    base: Path                      # directory of the config file; relative paths resolve here
    corpus_dir: Path
    output_dir: Path
    manifest_path: Path
    versification_data: Path | None = None
    rules_path: Path | None = None
    clean_enable: dict[str, tuple[str, ...]] = field(default_factory=dict)
    seed: int = 0
    jobs: int = 1
    license_allow: tuple[str, ...] | None = None
    families: tuple[str, ...] = ()
    pairing_rules: dict = field(default_factory=dict)
    max_verses: int = 2000
    pair_iterations: int = 5
    tasks: tuple[str, ...] = ()
    align_tasks: tuple[str, ...] = ()
    align_folds: tuple[int, ...] = (0,)
    align_iterations: int = 5
    subword_vocab: int = 2000
    subword_lines: int = 2000
    fetch_retries: int = 3
    fetch_backoff: float = 1.0
    settings: dict = field(default_factory=dict)  # normalized settings behind the fingerprint

    @property
    def fingerprint(self) -> str:
        text = json.dumps(self.settings, sort_keys=True, ensure_ascii=False)
        return bytes_digest(text.encode("utf-8"))[:16]


_SCHEMA = {
    "version": int, "corpus_dir": str, "output_dir": str, "manifest_path": str,
    "versification_data": (str, type(None)), "cleaning": dict, "seed": int, "jobs": int,
    "license_allow": (list, type(None)), "pairing": dict, "tasks": list, "align": dict, "metrics": dict,
    "fetch": dict,
}
_SUBKEYS = {
    "cleaning": {"rules": (str, type(None)), "enable": dict},
    "pairing": {"families": list, "rules": dict, "max_verses": int, "iterations": int},
    "align": {"tasks": list, "folds": list, "iterations": int},
    "metrics": {"subword_vocab": int, "subword_lines": int},
    "fetch": {"retries": int, "backoff": (int, float)},
}


def _check_types(d: dict, schema: dict, where: str) -> None:
    unknown = sorted(set(d) - set(schema))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {', '.join(unknown)}")
    for k, v in d.items():
        t = schema[k]
        if isinstance(v, bool) or not isinstance(v, t):
            raise ConfigError(f"{where}{k}: wrong type {type(v).__name__}")


def load_config(path: str | Path, seed: int | None = None, jobs: int | None = None,
                license_allow: Sequence[str] | None = None, output_dir: str | None = None) -> PipelineConfig:
    """Read and check a version-1 YAML config; command line values win."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except yaml.YAMLError as err:
        raise ConfigError(f"config is not valid YAML: {err}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    _check_types(raw, _SCHEMA, "")
    if raw.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}")
    for key in ("corpus_dir", "output_dir", "manifest_path"):
        if key not in raw:
            raise ConfigError(f"config lacks {key}")
    for key, sub in _SUBKEYS.items():
        _check_types(raw.get(key) or {}, sub, f"{key}.")
    base = path.resolve().parent
    cleaning = raw.get("cleaning") or {}
    pairing = raw.get("pairing") or {}
    align = raw.get("align") or {}
    metrics = raw.get("metrics") or {}
    fetch = raw.get("fetch") or {}
    enable = {}
    for tid, ids in (cleaning.get("enable") or {}).items():
        if not isinstance(ids, list) or not all(isinstance(x, str) for x in ids):
            raise ConfigError(f"cleaning.enable.{tid}: expected a list of rule ids or categories")
        enable[str(tid)] = tuple(ids)
    allow = license_allow if license_allow is not None else raw.get("license_allow")
    if allow is not None:
        bad = [t for t in allow if t not in LICENSES]
        if bad:
            raise ConfigError(f"license_allow: unknown tags {bad}; known: {', '.join(LICENSES)}")
        allow = tuple(allow)
    tasks = tuple(str(t) for t in raw.get("tasks") or ())
    for t in tasks:
        try:
            task_spec(t)
        except SplitError as err:
            raise ConfigError(f"tasks: {err}") from None
    align_tasks = tuple(str(t) for t in align.get("tasks") or ())
    missing = [t for t in align_tasks if t not in tasks]
    if missing:
        raise ConfigError(f"align.tasks not listed under tasks: {', '.join(missing)}")
    out = os.environ.get(OUTPUT_ENV) or raw["output_dir"]
    if output_dir is not None:
        out = output_dir
    resolve = lambda p: (base / p) if p is not None else None  # noqa: E731
    cfg = PipelineConfig(
        base=base,
        corpus_dir=resolve(raw["corpus_dir"]),
        output_dir=Path(out) if (output_dir is not None or os.environ.get(OUTPUT_ENV)) else resolve(out),
        manifest_path=resolve(raw["manifest_path"]),
        versification_data=resolve(raw.get("versification_data")),
        rules_path=resolve(cleaning.get("rules")),
        clean_enable=enable,
        seed=int(seed if seed is not None else raw.get("seed", 0)),
        jobs=max(1, int(jobs if jobs is not None else raw.get("jobs", 1))),
        license_allow=allow,
        families=tuple(str(f) for f in pairing.get("families") or ()),
        pairing_rules=dict(pairing.get("rules") or {}),
        max_verses=pairing.get("max_verses", 2000),
        pair_iterations=pairing.get("iterations", 5),
        tasks=tasks,
        align_tasks=align_tasks,
        align_folds=tuple(int(k) for k in align.get("folds", [0])),
        align_iterations=align.get("iterations", 5),
        subword_vocab=metrics.get("subword_vocab", 2000),
        subword_lines=metrics.get("subword_lines", 2000),
        fetch_retries=fetch.get("retries", 3),
        fetch_backoff=float(fetch.get("backoff", 1.0)),
    )
    # Everything that shapes artifacts except the seed, worker count and
    # output location.  Paths are kept as written so the value is portable.
    cfg.settings = {
        "version": CONFIG_VERSION, "corpus_dir": raw["corpus_dir"], "manifest_path": raw["manifest_path"],
        "versification_data": raw.get("versification_data"), "cleaning": {
            "rules": cleaning.get("rules"), "enable": {k: list(v) for k, v in sorted(enable.items())}},
        "license_allow": list(allow) if allow is not None else None,
        "pairing": {"families": list(cfg.families), "rules": cfg.pairing_rules, "max_verses": cfg.max_verses,
                    "iterations": cfg.pair_iterations},
        "tasks": list(tasks),
        "align": {"tasks": list(align_tasks), "folds": list(cfg.align_folds), "iterations": cfg.align_iterations},
        "metrics": {"subword_vocab": cfg.subword_vocab, "subword_lines": cfg.subword_lines},
    }
    return cfg


# ---------------------------------------------------------------------------
# Corpus manifest


@dataclass(frozen=True)
class ManifestRow:
    translation_id: str
    license: str
    source: str
    sha256: str
    family: str = ""
    country: str = ""


def parse_corpus_manifest(text: str) -> list[ManifestRow]:
    rows = list(csv.reader(io.StringIO(text), delimiter="\t", quoting=csv.QUOTE_NONE))
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows:
        return []
    header = rows[0]
    if tuple(header[:4]) != MANIFEST_COLUMNS or not set(header[4:]) <= set(MANIFEST_OPTIONAL):
        raise ConfigError(f"corpus manifest header must start with {', '.join(MANIFEST_COLUMNS)}")
    out = []
    seen = set()
    for n, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise ConfigError(f"corpus manifest row {n}: {len(r)} columns, header has {len(header)}")
        d = dict(zip(header, r))
        row = ManifestRow(**d)
        if not re.fullmatch(r"[A-Za-z0-9][A-Za-z0-9_.-]*", row.translation_id):
            raise ConfigError(f"corpus manifest row {n}: bad translation id {row.translation_id!r}")
        if row.translation_id in seen:
            raise ConfigError(f"corpus manifest row {n}: duplicate translation id {row.translation_id}")
        seen.add(row.translation_id)
        if row.license not in LICENSES:
            raise ConfigError(f"corpus manifest row {n}: license {row.license!r} not in {', '.join(LICENSES)}")
        if not re.fullmatch(r"[0-9a-f]{64}", row.sha256):
            raise ConfigError(f"corpus manifest row {n}: sha256 must be 64 lowercase hex digits")
        out.append(row)
    return out


def manifest_rows(cfg: PipelineConfig) -> list[ManifestRow]:
    try:
        text = cfg.manifest_path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"corpus manifest {cfg.manifest_path.name} not found") from None
    rows = parse_corpus_manifest(text)
    if cfg.license_allow is not None:
        rows = [r for r in rows if r.license in cfg.license_allow]
    return rows


# ---------------------------------------------------------------------------
# Workspace: atomic writes, sidecar cache, events


class Workspace:
    def __init__(self, cfg: PipelineConfig, command: str):
        self.cfg = cfg
        self.root = cfg.output_dir
        self.command = command
        self.events: list[dict] = []
        self.written: list[str] = []

    def path(self, rel: str) -> Path:
        return self.root / rel

    def event(self, name: str, level: int = logging.INFO, **kv) -> None:
        rec = {"event": name, **kv}
        self.events.append(rec)
        log.log(level, " ".join(f"{k}={_logval(v)}" for k, v in rec.items()))

    def write(self, rel: str, data: bytes) -> None:
        """Atomic write; an identical existing file is left untouched."""
        p = self.path(rel)
        if p.is_file() and p.read_bytes() == data:
            return
        p.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=f".{p.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp, p)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        self.written.append(rel)

    def cached(self, meta_rel: str, inputs: dict[str, Any]) -> bool:
        """True when the sidecar matches the fingerprint, the inputs and every output on disk."""
        p = self.path(meta_rel)
        if not p.is_file():
            return False
        try:
            meta = json.loads(p.read_text(encoding="utf-8"))
        except ValueError:
            return False
        if meta.get("fingerprint") != self.cfg.fingerprint or meta.get("inputs") != _jsonable(inputs):
            return False
        for rel, digest in (meta.get("outputs") or {}).items():
            q = self.path(rel)
            if not q.is_file() or file_digest(q) != digest:
                return False
        return True

    def commit(self, meta_rel: str, inputs: dict[str, Any], outputs: dict[str, bytes], **extra) -> None:
        """Write outputs, then the sidecar that records them."""
        for rel, data in outputs.items():
            self.write(rel, data)
        meta = {"fingerprint": self.cfg.fingerprint, "tool_version": __version__, **extra,
                "inputs": inputs, "outputs": {rel: bytes_digest(data) for rel, data in sorted(outputs.items())}}
        self.write(meta_rel, _json_bytes(meta))

    def read_meta(self, meta_rel: str, needed_by: str) -> dict:
        """Load an upstream sidecar, refusing one written under another config."""
        p = self.path(meta_rel)
        if not p.is_file():
            raise DataError(f"missing prerequisite {meta_rel} for {needed_by} (run `versekit {_stage(meta_rel)}`)")
        meta = json.loads(p.read_text(encoding="utf-8"))
        if meta.get("fingerprint") != self.cfg.fingerprint:
            raise DataError(f"fingerprint mismatch: {meta_rel} was made with config {meta.get('fingerprint')}, "
                            f"current config is {self.cfg.fingerprint}")
        for rel, digest in (meta.get("outputs") or {}).items():
            q = self.path(rel)
            if not q.is_file() or file_digest(q) != digest:
                raise DataError(f"{rel} does not match its sidecar {meta_rel}; rerun `versekit {_stage(rel)}`")
        return meta

    def report(self, status: str, code: int, elapsed: float) -> None:
        # the run report lives outside the compared artifact tree
        rep = {"command": self.command, "status": status, "exit_code": code, "fingerprint": self.cfg.fingerprint,
               "seed": self.cfg.seed, "jobs": self.cfg.jobs, "tool_version": __version__,
               "elapsed_seconds": round(elapsed, 3), "written": self.written, "events": self.events}
        d = self.root / RUN_DIR
        d.mkdir(parents=True, exist_ok=True)
        tmp = d / f".{self.command}.json.tmp"
        tmp.write_bytes(_json_bytes(rep))
        os.replace(tmp, d / f"{self.command}.json")


def _stage(rel: str) -> str:
    return rel.split("/", 1)[0]


def _logval(v) -> str:
    s = str(v)
    return json.dumps(s, ensure_ascii=False) if (not s or re.search(r'[\s="]', s)) else s


def _jsonable(x):
    return json.loads(json.dumps(x, sort_keys=True))


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, ensure_ascii=False, indent=1, sort_keys=True) + "\n").encode("utf-8")


def _pool_map(fn: Callable, items: Sequence, jobs: int) -> list:
    """Map in a process pool; results come back in input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))


def slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-") or "family"


def task_stem(label: str) -> str:
    return label.replace("(", "-").replace(")", "")


# ---------------------------------------------------------------------------
# Versification data


def _tables(cfg: PipelineConfig):
    if cfg.versification_data is None:
        return all_schemes()
    try:
        return list(load_tables_from_dir(cfg.versification_data).values())
    except FileNotFoundError as err:
        raise ConfigError(f"versification data: {Path(err.filename).name} not found") from None


def _index(cfg: PipelineConfig) -> CanonicalIndex:
    if cfg.versification_data is None:
        return default_index()
    orig = next(t for t in _tables(cfg) if t.scheme is VersificationScheme.ORIGINAL)
    return canonical_index(orig)


def _versification_digest(cfg: PipelineConfig) -> str:
    if cfg.versification_data is None:
        texts = [scheme_text(s) for s in SCHEME_FILES]
        return bytes_digest("".join(texts).encode("utf-8"))
    return bytes_digest("".join(file_digest(cfg.versification_data / n) for n in SCHEME_FILES.values()).encode())


def _rules_text(cfg: PipelineConfig) -> str:
    if cfg.rules_path is None:
        return default_rules_text()
    try:
        return cfg.rules_path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"cleaning rules file {cfg.rules_path.name} not found") from None


# ---------------------------------------------------------------------------
# fetch


def _download(url: str, dest: Path, retries: int, backoff: float) -> None:
    for attempt in range(retries):
        try:
            with urllib.request.urlopen(url, timeout=60) as resp, open(dest, "wb") as f:
                shutil.copyfileobj(resp, f)
            return
        except (OSError, ValueError) as err:
            if attempt == retries - 1:
                raise DataError(f"unreachable source after {retries} attempts: {err}") from None
            time.sleep(backoff * 2 ** attempt)


def _unpack(file: Path, tree: Path, name: str) -> None:
    tree.mkdir()
    if zipfile.is_zipfile(file):
        with zipfile.ZipFile(file) as z:
            for info in z.infolist():
                target = (tree / info.filename).resolve()
                if not target.is_relative_to(tree.resolve()):
                    raise DataError(f"archive member {info.filename} escapes the target directory")
            z.extractall(tree)
    else:
        shutil.copyfile(file, tree / name)


def fetch_row(cfg: PipelineConfig, row: ManifestRow) -> str:
    """Fetch one translation into corpus_dir/<id>; returns "cached" or "fetched".

    The checksum covers the tree for a local directory and the file bytes
    for a file, archive or URL.
    """
    dest = cfg.corpus_dir / row.translation_id
    marker = cfg.corpus_dir / f"{row.translation_id}.sha256"
    if dest.is_dir() and marker.is_file() and marker.read_text().strip() == row.sha256:
        return "cached"
    cfg.corpus_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=cfg.corpus_dir, prefix=".fetch-") as tmp:
        tmp = Path(tmp)
        tree = tmp / "tree"
        scheme = urllib.parse.urlparse(row.source).scheme
        if scheme in ("http", "https", "file", "ftp"):
            name = Path(urllib.parse.urlparse(row.source).path).name or "download"
            f = tmp / "download"
            _download(row.source, f, cfg.fetch_retries, cfg.fetch_backoff)
            digest = file_digest(f)
            if digest == row.sha256:
                _unpack(f, tree, name)
        else:
            src = cfg.base / row.source
            if src.is_dir():
                shutil.copytree(src, tree)
                digest = tree_digest(tree)
            elif src.is_file():
                digest = file_digest(src)
                if digest == row.sha256:
                    _unpack(src, tree, src.name)
            else:
                raise DataError(f"source {row.source} not found")
        if digest != row.sha256:
            raise DataError(f"checksum mismatch: manifest {row.sha256[:12]}..., got {digest[:12]}...")
        if dest.exists():
            shutil.rmtree(dest)
        os.replace(tree, dest)
    marker.write_text(row.sha256 + "\n")
    return "fetched"


def cmd_fetch(ws: Workspace) -> int:
    cfg = ws.cfg
    failed = 0
    for row in manifest_rows(cfg):
        try:
            status = fetch_row(cfg, row)
            ws.event("fetch", translation=row.translation_id, status=status)
        except DataError as err:
            failed += 1
            ws.event("fetch", logging.ERROR, translation=row.translation_id, status="error", error=str(err))
    return EXIT_DATA if failed else EXIT_OK


# ---------------------------------------------------------------------------
# extract


def _extract_worker(args):
    tid, files, tables, index = args
    extract, scheme, _counts, warnings = extract_translation(tid, files, tables, index)
    return extract.to_text().encode("utf-8"), scheme.name, warnings


def cmd_extract(ws: Workspace) -> int:
    cfg = ws.cfg
    tables = _tables(cfg)
    index = _index(cfg)
    vdigest = _versification_digest(cfg)
    vref = "".join(f"{r}\n" for r in index.refs).encode("utf-8")
    if not ws.cached("extract/vref.meta.json", {"versification": vdigest}):
        ws.commit("extract/vref.meta.json", {"versification": vdigest}, {"extract/vref.txt": vref})
    todo = []
    for row in manifest_rows(cfg):
        src = cfg.corpus_dir / row.translation_id
        if not src.is_dir():
            raise DataError(f"missing prerequisite: corpus directory for {row.translation_id} (run `versekit fetch`)")
        files = sorted(p for p in src.rglob("*") if p.is_file() and p.suffix.lower() in USFM_SUFFIXES)
        if not files:
            raise DataError(f"{row.translation_id}: no USFM files in the corpus directory")
        inputs = {"source": tree_digest(src), "versification": vdigest}
        meta = f"extract/{row.translation_id}.meta.json"
        if ws.cached(meta, inputs):
            ws.event("extract", translation=row.translation_id, status="cached")
            continue
        todo.append((row, inputs, meta, files))
    results = _pool_map(_extract_worker, [(r.translation_id, f, tables, index) for r, _, _, f in todo], cfg.jobs)
    for (row, inputs, meta, _), (data, scheme, warnings) in zip(todo, results):
        ex = ExtractFile.from_text(row.translation_id, data.decode("utf-8"))
        ws.commit(meta, inputs, {f"extract/{row.translation_id}.txt": data},
                  translation_id=row.translation_id, license=row.license, family=row.family, country=row.country,
                  scheme=scheme, verses=sum(1 for line in ex.lines if line), warnings=warnings)
        for w in warnings:
            ws.event("extract-warning", logging.WARNING, translation=row.translation_id, warning=w)
        ws.event("extract", translation=row.translation_id, status="written", scheme=scheme)
    return EXIT_OK


# ---------------------------------------------------------------------------
# clean


def _clean_worker(args):
    tid, data, rules_text, enabled = args
    ex = ExtractFile.from_text(tid, data.decode("utf-8"))
    cleaned, report = clean_extract(ex, parse_rules(rules_text), enabled)
    return cleaned.to_text().encode("utf-8"), report


def _report_dict(report, fingerprint: str) -> dict:
    flags = [asdict(f) for f in report.flags]
    return {"fingerprint": fingerprint, "translation_id": report.translation_id,
            "dominant_script": report.dominant_script, "script_counts": report.script_counts,
            "changes": report.changes, "lines_changed": report.lines_changed,
            "flag_counts": {k: report.flag_count(k) for k in ("private-use", "wrong-script")},
            "flags": flags[:200], "flags_truncated": len(flags) > 200}


def cmd_clean(ws: Workspace) -> int:
    cfg = ws.cfg
    rules_text = _rules_text(cfg)
    try:
        parse_rules(rules_text)
    except RuleError as err:
        raise ConfigError(f"cleaning rules: {err}") from None
    todo = []
    for row in manifest_rows(cfg):
        tid = row.translation_id
        ws.read_meta(f"extract/{tid}.meta.json", f"clean {tid}")
        data = ws.path(f"extract/{tid}.txt").read_bytes()
        enabled = cfg.clean_enable.get(tid, ())
        inputs = {"extract": bytes_digest(data), "rules": bytes_digest(rules_text.encode("utf-8")),
                  "enabled": list(enabled)}
        meta = f"clean/{tid}.meta.json"
        if ws.cached(meta, inputs):
            ws.event("clean", translation=tid, status="cached")
            continue
        todo.append((tid, inputs, meta, data, enabled))
    results = _pool_map(_clean_worker, [(t, d, rules_text, e) for t, _, _, d, e in todo], cfg.jobs)
    for (tid, inputs, meta, _, _), (data, report) in zip(todo, results):
        ws.commit(meta, inputs, {f"clean/{tid}.txt": data,
                                 f"clean/{tid}.report.json": _json_bytes(_report_dict(report, cfg.fingerprint))},
                  translation_id=tid, changes=report.total_changes)
        ws.event("clean", translation=tid, status="written", changes=report.total_changes,
                 flags=len(report.flags))
    return EXIT_OK


def _clean_extract(ws: Workspace, tid: str, needed_by: str, expected: int) -> tuple[ExtractFile, str]:
    ws.read_meta(f"clean/{tid}.meta.json", needed_by)
    data = ws.path(f"clean/{tid}.txt").read_bytes()
    try:
        ex = ExtractFile.from_text(tid, data.decode("utf-8"), expected)
    except ValueError as err:
        raise DataError(str(err)) from None
    return ex, bytes_digest(data)


# ---------------------------------------------------------------------------
# stats


def _tsv(fingerprint: str, header: Sequence[str], rows: Iterable[Sequence]) -> bytes:
    lines = [f"# fingerprint: {fingerprint}", "\t".join(header)]
    lines += ["\t".join(str(x) for x in r) for r in rows]
    return ("\n".join(lines) + "\n").encode("utf-8")


def cmd_stats(ws: Workspace) -> int:
    cfg = ws.cfg
    rows = manifest_rows(cfg)
    index = _index(cfg)
    extracts, inputs = [], {}
    for row in rows:
        ex, digest = _clean_extract(ws, row.translation_id, "stats", len(index))
        extracts.append(ex)
        inputs[row.translation_id] = digest
    inputs = {"clean": inputs, "manifest": [asdict(r) for r in rows]}
    if ws.cached("stats/stats.meta.json", inputs):
        ws.event("stats", status="cached")
        return EXIT_OK
    meta = {r.translation_id: {"family": r.family, "country": r.country} for r in rows}
    st = corpus_stats(extracts, meta, index)
    lic = {r.translation_id: r for r in rows}
    fp = cfg.fingerprint
    nt_total = sum(1 for r in index.refs if r.book.code in NT_BOOKS)
    outputs = {
        "stats/translations.tsv": _tsv(fp, ("translation_id", "ot", "nt", "dt", "total", "nt_share", "license",
                                            "family", "country"),
                                       [(tid, ot, nt, dt, tot, f"{nt / nt_total:.4f}", lic[tid].license,
                                         lic[tid].family, lic[tid].country) for tid, ot, nt, dt, tot in st.rows()]),
        "stats/families.tsv": _tsv(fp, ("family", "translations"), st.by_family.items()),
        "stats/countries.tsv": _tsv(fp, ("country", "translations"), st.by_country.items()),
    }
    ws.commit("stats/stats.meta.json", inputs, outputs)
    ws.event("stats", status="written", translations=len(rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# pairs


def _resolve_family(cfg: PipelineConfig, name: str) -> Path:
    fams = builtin_families()
    if name in fams:
        return fams[name]
    p = cfg.base / name
    if not p.is_file():
        raise ConfigError(f"pairing family {name!r} is neither a built-in family nor a file")
    return p


def _load_family(cfg: PipelineConfig, name: str) -> tuple[PairingCandidateSet, dict, bytes]:
    p = _resolve_family(cfg, name)
    data = p.read_bytes()
    try:
        raw = yaml.safe_load(data.decode("utf-8"))
        return PairingCandidateSet.from_dict(raw), raw, data
    except (yaml.YAMLError, TypeError, PairingError) as err:
        raise ConfigError(f"pairing family {name}: {err}") from None


def score_requests(cs: PairingCandidateSet) -> list[tuple[str, str]]:
    """(row, column) cells needed by selection: target x source and related x target."""
    out: list[tuple[str, str]] = []
    for t in cs.role("target"):
        out.extend((t, s) for s in cs.role("source") if s != t)
    for r in cs.role("related"):
        for t in cs.role("target"):
            if r != t and (t, r) not in out and (r, t) not in out:
                out.append((r, t))
    return out


def _score_worker(args):
    a_lines, b_lines, positions, iterations = args
    corpus = TokenizedCorpus.from_lines((a_lines[i], b_lines[i]) for i in positions)
    if len(corpus) == 0:
        return None
    return symmetric_score(corpus, "hmm", iterations).score


def cmd_pairs(ws: Workspace) -> int:
    cfg = ws.cfg
    index = _index(cfg)
    if not cfg.families:
        ws.event("pairs", status="no-families")
    for name in cfg.families:
        cs, raw, data = _load_family(cfg, name)
        fam = slug(cs.family)
        inputs: dict[str, Any] = {"candidates": bytes_digest(data)}
        requests = [] if cs.scores else score_requests(cs)
        extracts = {}
        for tid in sorted({x for pair in requests for x in pair}):
            extracts[tid], inputs[tid] = _clean_extract(ws, tid, f"pairs {fam}", len(index))
        meta = f"pairs/{fam}.meta.json"
        if ws.cached(meta, inputs):
            ws.event("pairs", family=fam, status="cached")
            continue
        origin = "file"
        if requests:
            origin = "computed"
            jobs = []
            for a, b in requests:
                pos = shared_positions([extracts[a], extracts[b]], index)[:cfg.max_verses]
                jobs.append((extracts[a].lines, extracts[b].lines, pos, cfg.pair_iterations))
            values = _pool_map(_score_worker, jobs, cfg.jobs)
            pairs = [[a, b, round(v, 6)] for (a, b), v in zip(requests, values) if v is not None and v > 0]
            raw = dict(raw)
            raw["scores"] = {"pairs": pairs}
            cs = PairingCandidateSet.from_dict(raw)
        try:
            decision = select_pairing(cs)
        except PairingError as err:
            raise DataError(f"pairing {fam}: {err}") from None
        scores = [[a, b, v] for (a, b), v in sorted(cs.scores.items())]
        doc = {"fingerprint": cfg.fingerprint, "family": cs.family, "branch": cs.branch, "score_origin": origin,
               "decision": decision.to_dict(), "scores": scores}
        candidates = dict(raw)
        candidates["scores"] = {"pairs": scores}
        outputs = {f"pairs/{fam}.json": _json_bytes(doc),
                   f"pairs/{fam}.audit.tsv": decision.audit_text().encode("utf-8"),
                   f"pairs/{fam}.candidates.yaml": yaml.safe_dump(candidates, sort_keys=False,
                                                                  allow_unicode=True).encode("utf-8")}
        ws.commit(meta, inputs, outputs, family=cs.family)
        ws.event("pairs", family=fam, status="written", source=decision.source, target=decision.target,
                 related=decision.related, scores=origin)
    return EXIT_OK


def _decisions(ws: Workspace, needed_by: str) -> list[tuple[str, dict, str]]:
    out = []
    for name in ws.cfg.families:
        cs, _, _ = _load_family(ws.cfg, name)
        fam = slug(cs.family)
        ws.read_meta(f"pairs/{fam}.meta.json", needed_by)
        data = ws.path(f"pairs/{fam}.json").read_bytes()
        out.append((fam, json.loads(data)["decision"], bytes_digest(data)))
    return out


# ---------------------------------------------------------------------------
# split


def cmd_split(ws: Workspace) -> int:
    cfg = ws.cfg
    index = _index(cfg)
    for fam, dec, ddigest in _decisions(ws, "split"):
        trio = {}
        digests = {"pairs": ddigest}
        for role in ("source", "target", "related"):
            trio[role], digests[role] = _clean_extract(ws, dec[role], f"split {fam}", len(index))
        for name in cfg.tasks:
            spec = task_spec(name)
            stem = task_stem(spec.label)
            inputs = dict(digests)
            if spec.is_cv:
                inputs["seed"] = cfg.seed
            meta = f"splits/{fam}/{stem}.meta.json"
            if ws.cached(meta, inputs):
                ws.event("split", family=fam, task=spec.label, status="cached")
                continue
            try:
                manifests = build_task(spec, trio["source"], trio["target"], trio["related"], cfg.seed, index)
            except SplitError as err:
                # a pair may simply lack the books of a task; recorded, not fatal
                ws.commit(meta, inputs, {}, task=spec.label, status="unavailable", reason=str(err))
                ws.event("split", logging.WARNING, family=fam, task=spec.label, status="unavailable",
                         reason=str(err))
                continue
            outputs = {}
            for m in manifests:
                m = SplitManifest(m.task, m.pair, m.train, m.validation, m.test, m.related_train, m.seed,
                                  m.generator, m.fold, m.missing_test_books, (("fingerprint", cfg.fingerprint),))
                suffix = f".fold{m.fold}" if m.fold is not None else ""
                outputs[f"splits/{fam}/{stem}{suffix}.manifest"] = manifest_dumps(m).encode("utf-8")
            ws.commit(meta, inputs, outputs, task=spec.label, status="ok")
            ws.event("split", family=fam, task=spec.label, status="written", manifests=len(outputs),
                     test=len(manifests[0].test))
    return EXIT_OK


def _load_split(ws: Workspace, rel: str) -> tuple[SplitManifest, bytes]:
    p = ws.path(rel)
    if not p.is_file():
        raise DataError(f"missing prerequisite {rel} (run `versekit split`)")
    data = p.read_bytes()
    try:
        m = manifest_loads(data.decode("utf-8"))
    except ManifestError as err:
        raise DataError(f"{rel}: {err}") from None
    fp = dict(m.extra).get("fingerprint")
    if fp != ws.cfg.fingerprint:
        raise DataError(f"fingerprint mismatch: {rel} was made with config {fp}, current config is "
                        f"{ws.cfg.fingerprint}")
    return m, data


def _align_units(ws: Workspace) -> list[tuple[str, str, str]]:
    """(family slug, manifest path, unit name) for every configured align run."""
    out = []
    for name in ws.cfg.families:
        cs, _, _ = _load_family(ws.cfg, name)
        fam = slug(cs.family)
        for t in ws.cfg.align_tasks:
            spec = task_spec(t)
            stem = task_stem(spec.label)
            meta = ws.read_meta(f"splits/{fam}/{stem}.meta.json", f"align {fam}/{stem}")
            if meta.get("status") == "unavailable":
                continue
            folds = ws.cfg.align_folds if spec.is_cv else (None,)
            for k in folds:
                unit = f"{stem}.fold{k}" if k is not None else stem
                out.append((fam, f"splits/{fam}/{unit}.manifest", unit))
    return out


# ---------------------------------------------------------------------------
# align


def _lexicon_tsv(table, fingerprint: str, top: int = 5) -> bytes:
    lines = [f"# fingerprint: {fingerprint}", "source\ttarget\tprobability"]
    for src, row in table.items():
        lines += [f"{src}\t{tgt}\t{p:.6g}" for tgt, p in row[:top]]
    return ("\n".join(lines) + "\n").encode("utf-8")


def cmd_align(ws: Workspace) -> int:
    cfg = ws.cfg
    index = _index(cfg)
    for fam, rel, unit in _align_units(ws):
        m, mdata = _load_split(ws, rel)
        s_id, t_id, r_id = m.pair
        src, sd = _clean_extract(ws, s_id, f"align {fam}/{unit}", len(index))
        tgt, td = _clean_extract(ws, t_id, f"align {fam}/{unit}", len(index))
        inputs = {"manifest": bytes_digest(mdata), "source": sd, "target": td, "iterations": cfg.align_iterations}
        pairs = [(src.lines[index.position(r)], tgt.lines[index.position(r)]) for r in m.train]
        if m.related_train:
            rel_ex, inputs["related"] = _clean_extract(ws, r_id, f"align {fam}/{unit}", len(index))
            pairs += [(src.lines[index.position(r)], rel_ex.lines[index.position(r)]) for r in m.related_train]
        meta = f"align/{fam}/{unit}/meta.json"
        if ws.cached(meta, inputs):
            ws.event("align", family=fam, unit=unit, status="cached")
            continue
        corpus = TokenizedCorpus.from_lines(pairs)
        if len(corpus) == 0:
            raise DataError(f"align {fam}/{unit}: no training pairs")
        table = train_smt(corpus, cfg.align_iterations, cfg.jobs)
        hyps = [smt_decode(src.lines[index.position(r)], table) for r in m.test]
        outputs = {f"align/{fam}/{unit}/lexicon.tsv": _lexicon_tsv(table, cfg.fingerprint),
                   f"align/{fam}/{unit}/hyp.txt": "".join(h + "\n" for h in hyps).encode("utf-8")}
        ws.commit(meta, inputs, outputs, model="ibm2-diag", decoder="word-greedy", train_pairs=len(corpus),
                  test_verses=len(m.test), manifest=rel)
        ws.event("align", family=fam, unit=unit, status="written", train=len(corpus), test=len(m.test))
    return EXIT_OK


# ---------------------------------------------------------------------------
# score


def _score_one(ws: Workspace, out_dir: str, m: SplitManifest, mdata: bytes, hyp_data: bytes, index) -> None:
    cfg = ws.cfg
    t_id = m.pair[1]
    ref, rd = _clean_extract(ws, t_id, f"score {out_dir}", len(index))
    inputs = {"hypotheses": bytes_digest(hyp_data), "manifest": bytes_digest(mdata), "reference": rd,
              "seed": cfg.seed}
    meta = f"{out_dir}/meta.json"
    if ws.cached(meta, inputs):
        ws.event("score", unit=out_dir, status="cached")
        return
    text = hyp_data.decode("utf-8")
    hyps = text.split("\n")
    if hyps and hyps[-1] == "":
        hyps.pop()
    if len(hyps) != len(m.test):
        raise DataError(f"hypothesis file has {len(hyps)} lines, expected {len(m.test)} (one per test verse)")
    train_refs = [ref.lines[index.position(r)] for r in m.train]
    train_refs = [x for x in train_refs if is_text(x)][:cfg.subword_lines]
    sub = train_subword(train_refs, cfg.subword_vocab, cfg.seed)
    try:
        report = score_hypotheses(hyps, ref, list(m.test), index, sub)
    except MetricError as err:
        raise DataError(f"score {out_dir}: {err}") from None
    report.fingerprint.update({"config": cfg.fingerprint, "seed": cfg.seed, "task": m.task.label,
                               "pair": list(m.pair), "fold": m.fold})
    outputs = {f"{out_dir}/report.json": report.to_json().encode("utf-8"),
               f"{out_dir}/verses.tsv": report.verses_tsv().encode("utf-8"),
               f"{out_dir}/summary.txt": report.summary().encode("utf-8"),
               f"{out_dir}/subword.json": sub.to_json().encode("utf-8")}
    ws.commit(meta, inputs, outputs, seed=cfg.seed)
    ws.event("score", unit=out_dir, status="written",
             **{k: "n/a" if v is None else f"{v:.2f}" for k, v in report.corpus.items()})


def cmd_score(ws: Workspace, hyp: str | None = None, manifest: str | None = None, name: str | None = None) -> int:
    index = _index(ws.cfg)
    if hyp is not None or manifest is not None:
        if hyp is None or manifest is None:
            raise ConfigError("external scoring needs both --hyp and --manifest")
        try:
            mdata = Path(manifest).read_bytes()
            hyp_data = Path(hyp).read_bytes()
        except FileNotFoundError as err:
            raise DataError(f"{Path(err.filename).name} not found") from None
        try:
            m = manifest_loads(mdata.decode("utf-8"))
        except ManifestError as err:
            raise DataError(f"{Path(manifest).name}: {err}") from None
        label = slug(name or Path(hyp).stem)
        _score_one(ws, f"score/external/{label}", m, mdata, hyp_data, index)
        return EXIT_OK
    for fam, rel, unit in _align_units(ws):
        m, mdata = _load_split(ws, rel)
        ws.read_meta(f"align/{fam}/{unit}/meta.json", f"score {fam}/{unit}")
        hyp_data = ws.path(f"align/{fam}/{unit}/hyp.txt").read_bytes()
        _score_one(ws, f"score/{fam}/{unit}", m, mdata, hyp_data, index)
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def validate_config(config_path: str | Path, **overrides) -> list[tuple[str, bool, str]]:
    """Run every check and return (check, passed, detail) rows."""
    checks: list[tuple[str, bool, str]] = []
    try:
        cfg = load_config(config_path, **overrides)
    except ConfigError as err:
        return [("config", False, str(err))]
    checks.append(("config", True, f"fingerprint {cfg.fingerprint}"))

    checks.append(("manifest_path", cfg.manifest_path.is_file(), cfg.manifest_path.name))
    if cfg.manifest_path.is_file():
        try:
            rows = manifest_rows(cfg)
            checks.append(("corpus manifest", True, f"{len(rows)} translations"))
        except ConfigError as err:
            checks.append(("corpus manifest", False, str(err)))
    parent = cfg.corpus_dir if cfg.corpus_dir.exists() else cfg.corpus_dir.parent
    checks.append(("corpus_dir", parent.is_dir(), "corpus directory or its parent exists"))

    if cfg.versification_data is not None:
        missing = [n for n in SCHEME_FILES.values() if not (cfg.versification_data / n).is_file()]
        checks.append(("versification files", not missing,
                       "missing: " + ", ".join(missing) if missing else "all six schemes present"))
    try:
        tables = _tables(cfg)
        orig = next(t for t in tables if t.scheme is VersificationScheme.ORIGINAL)
        try:
            idx = canonical_index(orig)
            checks.append(("canonical index", True, f"{len(idx)} verses"))
        except VersificationError:
            checks.append(("canonical index", False, f"expected {CANONICAL_SIZE}; {book_count_deltas(orig)}"))
    except (ConfigError, VersificationError, OSError) as err:
        checks.append(("versification data", False, str(err)))

    try:
        rules = parse_rules(_rules_text(cfg))
        checks.append(("cleaning rules", True, f"{len(rules)} rules"))
    except (ConfigError, RuleError) as err:
        checks.append(("cleaning rules", False, str(err)))

    for name in cfg.families:
        try:
            cs, _, _ = _load_family(cfg, name)
            detail = f"{cs.family}: {len(cs.translations)} translations"
            if cs.scores:
                detail += " -> " + " / ".join(select_pairing(cs).triple)
            checks.append((f"pairing {name}", True, detail))
        except (ConfigError, PairingError) as err:
            checks.append((f"pairing {name}", False, str(err)))
    return checks


def cmd_validate(config_path: str | Path, **overrides) -> int:
    checks = validate_config(config_path, **overrides)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# Entry point


STAGES = {"fetch": cmd_fetch, "extract": cmd_extract, "clean": cmd_clean, "stats": cmd_stats,
          "pairs": cmd_pairs, "split": cmd_split, "align": cmd_align}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="versekit", description="Scripture corpus pipeline.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="pipeline config (YAML, version 1)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--license-allow", help="comma-separated license tags to keep")
    p.add_argument("--output-dir", help=f"override output_dir (also ${OUTPUT_ENV})")
    p.add_argument("--hyp", help="score: external hypothesis file, one line per test verse")
    p.add_argument("--manifest", help="score: split manifest for --hyp")
    p.add_argument("--name", help="score: report name for --hyp")
    p.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if not log.handlers:
        h = logging.StreamHandler(sys.stderr)
        h.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(h)
        log.propagate = False
    log.setLevel(logging.WARNING if args.quiet else logging.INFO)
    overrides = {"seed": args.seed, "jobs": args.jobs, "output_dir": args.output_dir,
                 "license_allow": [t.strip() for t in args.license_allow.split(",")] if args.license_allow else None}
    if args.command == "validate":
        return cmd_validate(args.config, **overrides)
    start = time.monotonic()
    try:
        cfg = load_config(args.config, **overrides)
    except ConfigError as err:
        log.error(f"event=config status=error error={_logval(err)}")
        return err.code
    ws = Workspace(cfg, args.command)
    try:
        if args.command == "score":
            code = cmd_score(ws, args.hyp, args.manifest, args.name)
        else:
            code = STAGES[args.command](ws)
        status = "ok" if code == EXIT_OK else "error"
    except CliError as err:
        code, status = err.code, "error"
        ws.event(args.command, logging.ERROR, status="error", error=str(err))
    except DOMAIN_ERRORS as err:
        code, status = EXIT_DATA, "error"
        ws.event(args.command, logging.ERROR, status="error", error=f"{type(err).__name__}: {err}")
    except Exception as err:  # noqa: BLE001 - anything else is a bug
        code, status = EXIT_INTERNAL, "internal-error"
        ws.event(args.command, logging.ERROR, status="internal-error", error=f"{type(err).__name__}: {err}")
        log.error(traceback.format_exc().rstrip())
    ws.report(status, code, time.monotonic() - start)
    return code


def run(argv: Sequence[str]) -> int:
    """Programmatic entry that never calls sys.exit."""
    return main(list(argv))


if __name__ == "__main__":
    sys.exit(main())
