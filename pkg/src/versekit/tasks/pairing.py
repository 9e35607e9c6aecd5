"""Source / target / related translation pairing from alignment score tables.

Selection runs three rule chains, one per role.  Each chain starts from the
role's configured candidates and narrows them step by step; every step is
logged as an audit entry holding the candidate list before and after it.
The final entry of each chain leaves exactly one candidate.

All thresholds are ratios (to the best score, the next score or the median of
the whole table), so multiplying every score by a positive constant never
changes a decision.
"""
from __future__ import annotations

import statistics
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

SCOPE_RANK = {"Bible": 3, "NT+": 2, "NT": 1, "unknown": 1}
ROLES = ("source", "target", "related")


class PairingError(ValueError):
    """Raised for malformed candidate sets or when a role cannot be filled."""


@dataclass(frozen=True)
class TranslationInfo:
    id: str
    iso: str
    scope: str = "unknown"
    script: str = "unknown"
    roles: tuple[str, ...] = ()
    cluster: str | None = None  # language grouping wider than one ISO code, e.g. hin/urd
    branch: str | None = None
    country: str | None = None
    ot_books: tuple[str, ...] = ()

    def __post_init__(self):
        if self.scope not in SCOPE_RANK:
            raise PairingError(f"{self.id}: unknown scope {self.scope!r}")
        for r in self.roles:
            if r not in ROLES:
                raise PairingError(f"{self.id}: unknown role {r!r}")

    @property
    def language(self) -> str:
        return self.cluster or self.iso

    @property
    def rank(self) -> int:
        return SCOPE_RANK[self.scope]


@dataclass(frozen=True)
class SelectionRules:
    tie_margin: float = 0.01            # target scores within 1% of the best count as tied
    adaptation_pair_ratio: float = 4.0  # a pair scoring this many medians marks both as adaptations
    outlier_ratio: float = 1.25         # related top score this far above the next is excluded ...
    outlier_floor_ratio: float = 2.0    # ... when it is also at least this many medians
    prefer_ot_overlap: bool = True
    prefer_script: bool = True

    @classmethod
    def from_dict(cls, d: Mapping[str, Any] | None) -> "SelectionRules":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise PairingError(f"unknown rule parameters: {sorted(unknown)}")
        return cls(**d)


@dataclass
class PairingCandidateSet:
    family: str
    translations: dict[str, TranslationInfo]
    scores: dict[tuple[str, str], float]  # (row, column) cells of the score table
    branch: str = ""
    rules: SelectionRules = field(default_factory=SelectionRules)

    def role(self, name: str) -> list[str]:
        return [t.id for t in self.translations.values() if name in t.roles]

    def score(self, a: str, b: str) -> float | None:
        """Score of `a` against `b`: the cell with `a` as row, else the mirrored cell.

        Published tables are not always symmetric, so the row that belongs to
        the candidate being ranked is the one consulted first.
        """
        v = self.scores.get((a, b))
        return self.scores.get((b, a)) if v is None else v

    def editions(self, tid: str) -> int:
        iso = self.translations[tid].iso
        return sum(1 for t in self.translations.values() if t.iso == iso)

    def median(self) -> float:
        return statistics.median(self.scores.values())

    def scaled(self, factor: float) -> "PairingCandidateSet":
        return replace(self, scores={k: v * factor for k, v in self.scores.items()})

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PairingCandidateSet":
        trs: dict[str, TranslationInfo] = {}
        for row in d.get("translations") or []:
            row = dict(row)
            row["roles"] = tuple(row.get("roles") or ())
            row["ot_books"] = tuple(row.get("ot_books") or ())
            t = TranslationInfo(**row)
            if t.id in trs:
                raise PairingError(f"duplicate translation {t.id}")
            trs[t.id] = t
        scores: dict[tuple[str, str], float] = {}
        table = d.get("scores") or {}
        cols = list(table.get("columns") or [])
        cells = []
        for rid, values in (table.get("rows") or {}).items():
            if len(values) != len(cols):
                raise PairingError(f"score row {rid} has {len(values)} cells for {len(cols)} columns")
            cells.extend((rid, cid, v) for cid, v in zip(cols, values))
        for cell in table.get("pairs") or []:
            # alternative layout: a list of [row, column, value]
            if len(cell) != 3:
                raise PairingError(f"score pair {cell!r} is not [row, column, value]")
            cells.append(tuple(cell))
        for rid, cid, v in cells:
            if v is None:
                continue
            for x in (rid, cid):
                if x not in trs:
                    raise PairingError(f"score for undeclared translation {x}")
            if rid == cid:
                raise PairingError(f"self score for {rid}")
            if not float(v) > 0:
                raise PairingError(f"score {rid}/{cid} must be positive")
            if (rid, cid) in scores:
                raise PairingError(f"duplicate score {rid}/{cid}")
            scores[(rid, cid)] = float(v)
        return cls(d.get("family", "?"), trs, scores, d.get("branch", ""),
                   SelectionRules.from_dict(d.get("rules")))

    @classmethod
    def load(cls, path: str | Path) -> "PairingCandidateSet":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(yaml.safe_load(f))


# Rules inferred from the published outcomes rather than stated with them
HEURISTIC_RULES = frozenset({"outlier", "ot-overlap", "script"})


@dataclass(frozen=True)
class AuditEntry:
    role: str
    rule: str
    before: tuple[str, ...]
    after: tuple[str, ...]
    detail: str = ""

    @property
    def heuristic(self) -> bool:
        return self.rule in HEURISTIC_RULES

    def to_dict(self) -> dict:
        d = asdict(self)
        d["before"], d["after"] = list(self.before), list(self.after)
        d["heuristic"] = self.heuristic
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "AuditEntry":
        return cls(d["role"], d["rule"], tuple(d["before"]), tuple(d["after"]), d.get("detail", ""))


@dataclass
class PairingDecision:
    family: str
    source: str
    target: str
    related: str
    audit: list[AuditEntry]

    @property
    def triple(self) -> tuple[str, str, str]:
        return self.source, self.target, self.related

    def to_dict(self) -> dict:
        return {"family": self.family, "source": self.source, "target": self.target,
                "related": self.related, "audit": [e.to_dict() for e in self.audit]}

    def audit_text(self) -> str:
        lines = []
        for e in self.audit:
            dropped = [x for x in e.before if x not in e.after]
            rule = f"{e.rule} (heuristic)" if e.heuristic else e.rule
            lines.append(f"{e.role}\t{rule}\tkept={','.join(e.after)}\tdropped={','.join(dropped)}\t{e.detail}")
        return "\n".join(lines) + "\n"


class _Chain:
    def __init__(self, role: str, audit: list[AuditEntry], start: Iterable[str], detail: str):
        self.role, self.audit = role, audit
        self.current = tuple(start)
        audit.append(AuditEntry(role, "candidates", (), self.current, detail))

    def step(self, rule: str, keep: Iterable[str], detail: str = "") -> tuple[str, ...]:
        keep = set(keep)
        after = tuple(x for x in self.current if x in keep)
        self.audit.append(AuditEntry(self.role, rule, self.current, after, detail))
        self.current = after
        return after

    def done(self) -> bool:
        return len(self.current) == 1


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _adaptation_pairs(cs: PairingCandidateSet, rules: SelectionRules) -> tuple[set[str], str]:
    m = cs.median()
    flagged: set[str] = set()
    notes = []
    for (a, b), v in sorted(cs.scores.items()):
        if "source" in cs.translations[a].roles or "source" in cs.translations[b].roles:
            continue
        if v >= rules.adaptation_pair_ratio * m:
            flagged.update((a, b))
            notes.append(f"{a}/{b}={_fmt(v)}")
    detail = f"pair score >= {rules.adaptation_pair_ratio:g} x median {_fmt(m)}"
    if notes:
        detail += ": " + "; ".join(notes)
    return flagged, detail


def _best_source(cs: PairingCandidateSet, target: str, sources: list[str]) -> float | None:
    lang = cs.translations[target].language
    vals = [cs.score(target, s) for s in sources if cs.translations[s].language != lang]
    vals = [v for v in vals if v is not None]
    return max(vals) if vals else None


def _select_target(cs, rules, audit, flagged, flag_detail) -> str:
    ch = _Chain("target", audit, cs.role("target"), "configured target candidates")
    if not ch.current:
        raise PairingError(f"{cs.family}: no target candidates")
    ch.step("adaptation-pair", [t for t in ch.current if t not in flagged], flag_detail)
    sources = cs.role("source")
    best = {t: _best_source(cs, t, sources) for t in ch.current}
    ch.step("scored-source", [t for t in ch.current if best[t] is not None],
            "needs a score against a source of another language")
    if not ch.current:
        raise PairingError(f"{cs.family}: no target candidate has a usable source score")
    top_rank = max(cs.translations[t].rank for t in ch.current)
    ch.step("scope-tier", [t for t in ch.current if cs.translations[t].rank == top_rank],
            "Bible > NT+ > NT")
    top = max(best[t] for t in ch.current)
    ch.step("near-tie", [t for t in ch.current if best[t] >= (1 - rules.tie_margin) * top],
            f"best source score within {rules.tie_margin:g} of {_fmt(top)}")
    if not ch.done():
        single = [t for t in ch.current if cs.editions(t) == 1]
        ch.step("single-edition", single or ch.current, "prefer a language with one edition")
    if not ch.done():
        top = max(best[t] for t in ch.current)
        ch.step("max-score", [t for t in ch.current if best[t] == top], f"best source score {_fmt(top)}")
    ch.step("select", ch.current[:1], "first in configuration order" if len(ch.current) > 1 else "")
    return ch.current[0]


def _select_source(cs, audit, target) -> str:
    ch = _Chain("source", audit, cs.role("source"), f"national/gateway candidates for {target}")
    if not ch.current:
        raise PairingError(f"{cs.family}: no source candidates")
    lang = cs.translations[target].language
    ch.step("same-language", [s for s in ch.current if cs.translations[s].language != lang],
            f"target language {lang}")
    ch.step("scored", [s for s in ch.current if cs.score(target, s) is not None], f"score against {target}")
    if not ch.current:
        raise PairingError(f"{cs.family}: no source scored against {target}")
    top = max(cs.score(target, s) for s in ch.current)
    ch.step("max-score", [s for s in ch.current if cs.score(target, s) == top], f"{_fmt(top)}")
    if not ch.done():
        r = max(cs.translations[s].rank for s in ch.current)
        ch.step("scope-tie-break", [s for s in ch.current if cs.translations[s].rank == r], "exact tie: wider scope")
    ch.step("select", ch.current[:1], "first in configuration order" if len(ch.current) > 1 else "")
    return ch.current[0]


def _select_related(cs, rules, audit, flagged, flag_detail, source, target) -> str:
    ch = _Chain("related", audit, cs.role("related"), f"related candidates for {target}")
    tinfo = cs.translations[target]
    langs = {tinfo.language, cs.translations[source].language}
    ch.step("same-language", [r for r in ch.current if r != target and cs.translations[r].language not in langs],
            f"drop editions of {'/'.join(sorted(langs))}")
    ch.step("adaptation-pair", [r for r in ch.current if r not in flagged], flag_detail)
    if not ch.current:
        raise PairingError(f"{cs.family}: every related candidate was excluded")
    if ch.done():
        ch.step("select", ch.current, "only option")
        return ch.current[0]
    ch.step("scored", [r for r in ch.current if cs.score(r, target) is not None], f"score against {target}")
    if not ch.current:
        raise PairingError(f"{cs.family}: no related candidate scored against {target}")
    if ch.done():
        ch.step("select", ch.current, "only option")
        return ch.current[0]

    def sc(r):
        return cs.score(r, target)

    floor = rules.outlier_floor_ratio * cs.median()
    ranked = sorted(ch.current, key=lambda r: -sc(r))
    dropped = []
    while len(ranked) >= 2 and sc(ranked[0]) >= rules.outlier_ratio * sc(ranked[1]) and sc(ranked[0]) >= floor:
        dropped.append(f"{ranked[0]}={_fmt(sc(ranked[0]))} vs {ranked[1]}={_fmt(sc(ranked[1]))}")
        ranked.pop(0)
    ch.step("outlier", ranked, f"top/next >= {rules.outlier_ratio:g} and top >= {_fmt(floor)}"
            + (": " + "; ".join(dropped) if dropped else ""))
    if rules.prefer_ot_overlap and tinfo.ot_books and not ch.done():
        ot = set(tinfo.ot_books)
        overlap = [r for r in ch.current if ot & set(cs.translations[r].ot_books)]
        ch.step("ot-overlap", overlap or ch.current, f"shares OT books with {target}")
    if rules.prefer_script and not ch.done():
        same = [r for r in ch.current if cs.translations[r].script == tinfo.script]
        ch.step("script", same or ch.current, f"script {tinfo.script}")
    if not ch.done():
        top = max(sc(r) for r in ch.current)
        ch.step("max-score", [r for r in ch.current if sc(r) == top], _fmt(top))
    ch.step("select", ch.current[:1], "first in configuration order" if len(ch.current) > 1 else "")
    return ch.current[0]


def select_pairing(cs: PairingCandidateSet, rules: SelectionRules | None = None) -> PairingDecision:
    rules = rules or cs.rules
    for role in ROLES:
        if not cs.role(role):
            raise PairingError(f"{cs.family}: no {role} candidates")
    audit: list[AuditEntry] = []
    flagged, flag_detail = _adaptation_pairs(cs, rules)
    target = _select_target(cs, rules, audit, flagged, flag_detail)
    source = _select_source(cs, audit, target)
    related = _select_related(cs, rules, audit, flagged, flag_detail, source, target)
    return PairingDecision(cs.family, source, target, related, audit)


def replay(audit: Iterable[AuditEntry | Mapping[str, Any]]) -> tuple[str, str, str]:
    """Rebuild (source, target, related) from an audit trail alone.

    Checks that each role's steps chain (every step starts where the previous
    one ended and only removes candidates) and ends with one candidate.
    """
    chains: dict[str, tuple[str, ...]] = {}
    for e in audit:
        e = e if isinstance(e, AuditEntry) else AuditEntry.from_dict(e)
        if e.role not in ROLES:
            raise PairingError(f"audit: unknown role {e.role!r}")
        if e.rule == "candidates":
            if e.role in chains:
                raise PairingError(f"audit: {e.role} chain restarted")
        elif chains.get(e.role) != e.before:
            raise PairingError(f"audit: {e.role}/{e.rule} does not continue the previous step")
        if not set(e.after) <= set(e.before) and e.rule != "candidates":
            raise PairingError(f"audit: {e.role}/{e.rule} adds candidates")
        chains[e.role] = e.after
    out = []
    for role in ROLES:
        final = chains.get(role)
        if final is None or len(final) != 1:
            raise PairingError(f"audit: {role} chain does not end with a single candidate")
        out.append(final[0])
    return tuple(out)


def builtin_families() -> dict[str, Path]:
    """The shipped candidate sets, keyed by file stem."""
    root = resources.files("versekit.data") / "pairings"
    return {p.name[:-5]: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".yaml")}


def load_family(name_or_path: str | Path) -> PairingCandidateSet:
    fams = builtin_families()
    if str(name_or_path) in fams:
        return PairingCandidateSet.load(fams[str(name_or_path)])
    return PairingCandidateSet.load(name_or_path)
