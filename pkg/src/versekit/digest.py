"""Content digests for files and directory trees."""
from __future__ import annotations

import hashlib
from pathlib import Path


def bytes_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def tree_digest(root: str | Path) -> str:
    """sha256 over (relative path, file sha256) of every file under root, sorted."""
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(q for q in root.rglob("*") if q.is_file()):
        h.update(f"{p.relative_to(root).as_posix()}\t{file_digest(p)}\n".encode())
    return h.hexdigest()
