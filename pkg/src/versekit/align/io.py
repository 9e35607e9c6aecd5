"""Plain-text model files.

Numbers are written with float.hex so a model reads back bit for bit.
Tokens are JSON strings, one per line.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .models import AlignmentError, HmmAlignModel, Ibm1Model, Ibm2DiagModel, TTable

MAGIC = "versekit-align-model"
VERSION = 1


def _hex(values) -> str:
    return " ".join(float(v).hex() for v in values)


def _unhex(text: str) -> list[float]:
    return [float.fromhex(x) for x in text.split()]


def dumps(model) -> str:
    t = model.t
    out = [f"{MAGIC} {VERSION}", f"kind {model.kind}"]
    out.append("log_likelihood " + _hex(model.log_likelihood))
    if isinstance(model, HmmAlignModel):
        out.append("p_null " + float(model.p_null).hex())
        out.append("jump " + _hex(model.jump))
    elif isinstance(model, Ibm2DiagModel):
        out.append("lambda " + float(model.lam).hex())
        out.append("p0 " + ("none" if model.p0 is None else float(model.p0).hex()))
        out.append("lambda_history " + _hex(model.lambda_history))
    out.append(f"source {len(t.source_tokens)}")
    out.extend(json.dumps(w, ensure_ascii=False) for w in t.source_tokens)
    out.append(f"target {len(t.target_tokens)}")
    out.extend(json.dumps(w, ensure_ascii=False) for w in t.target_tokens)
    out.append("mass " + _hex(t.mass))
    out.append(f"table {len(t.prob)}")
    out.extend(f"{r} {c} {float(p).hex()}" for r, c, p in zip(t.rows, t.cols, t.prob))
    return "\n".join(out) + "\n"


def loads(text: str):
    lines = text.split("\n")
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise AlignmentError("truncated model file")
        line = lines[pos]
        pos += 1
        return line

    def field(name: str) -> str:
        key, _, value = take().partition(" ")
        if key != name:
            raise AlignmentError(f"model file line {pos}: expected {name}, got {key!r}")
        return value

    head = take().split()
    if len(head) != 2 or head[0] != MAGIC:
        raise AlignmentError("not a versekit alignment model file")
    if int(head[1]) != VERSION:
        raise AlignmentError(f"unsupported model file version {head[1]}")
    kind = field("kind")
    ll = _unhex(field("log_likelihood"))
    extra = {}
    if kind == "hmm":
        extra["p_null"] = float.fromhex(field("p_null"))
        extra["jump"] = np.array(_unhex(field("jump")))
    elif kind == "ibm2":
        extra["lam"] = float.fromhex(field("lambda"))
        p0 = field("p0")
        extra["p0"] = None if p0 == "none" else float.fromhex(p0)
        extra["lambda_history"] = _unhex(field("lambda_history"))
    elif kind != "ibm1":
        raise AlignmentError(f"unknown model kind {kind!r}")
    src = tuple(json.loads(take()) for _ in range(int(field("source"))))
    tgt = tuple(json.loads(take()) for _ in range(int(field("target"))))
    mass = np.array(_unhex(field("mass")))
    n = int(field("table"))
    rows = np.empty(n, dtype=np.int64)
    cols = np.empty(n, dtype=np.int64)
    prob = np.empty(n)
    for k in range(n):
        r, c, p = take().split()
        rows[k], cols[k], prob[k] = int(r), int(c), float.fromhex(p)
    table = TTable(src, tgt, rows, cols, prob, mass)
    if kind == "hmm":
        return HmmAlignModel(table, extra["jump"], extra["p_null"], ll)
    if kind == "ibm2":
        return Ibm2DiagModel(table, extra["lam"], extra["p0"], ll, extra["lambda_history"])
    return Ibm1Model(table, ll)


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8")


def load_model(path: str | Path):
    return loads(Path(path).read_text(encoding="utf-8"))


def models_equal(a, b) -> bool:
    if a.kind != b.kind or a.log_likelihood != b.log_likelihood:
        return False
    ta, tb = a.t, b.t
    same = (ta.source_tokens == tb.source_tokens and ta.target_tokens == tb.target_tokens
            and np.array_equal(ta.rows, tb.rows) and np.array_equal(ta.cols, tb.cols)
            and np.array_equal(ta.prob, tb.prob) and np.array_equal(ta.mass, tb.mass))
    if not same:
        return False
    if a.kind == "hmm":
        return a.p_null == b.p_null and np.array_equal(a.jump, b.jump)
    if a.kind == "ibm2":
        return a.lam == b.lam and a.p0 == b.p0 and a.lambda_history == b.lambda_history
    return True
