"""A small USFM reader producing a marker tree.

Only as much of USFM is modelled as verse-text extraction needs.  Paragraph
level markers (``\\p``, ``\\q1``, ``\\s1``, ``\\c`` ...) form the top level;
verse markers are milestones inside paragraphs; character and note markers
(``\\nd ...\\nd*``, ``\\f ...\\f*``) are nested containers.  Unknown markers
are kept with their text.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .versification import BookId, VersificationError

NOTE_MARKERS = {"f", "fe", "ef", "x", "ex"}
# Note-internal character styles; an opening one implicitly closes the previous.
NOTE_CHAR_MARKERS = {
    "fr", "ft", "fk", "fq", "fqa", "fl", "fw", "fp", "fv", "fdc", "fm",
    "xo", "xk", "xq", "xt", "xta", "xop", "xot", "xnt", "xdc",
}
CHAR_MARKERS = {
    "add", "bk", "dc", "k", "nd", "ord", "pn", "png", "addpn", "qt", "sig", "sls", "tl", "wj",
    "em", "bd", "it", "bdit", "no", "sc", "sup", "w", "wg", "wh", "wa", "rb", "pro", "fig",
    "ndx", "rq", "qs", "qac", "lik", "liv", "litl", "jmp", "va", "vp", "ca", "cat", "ior", "iqt",
    "xt", "+xt",
} | NOTE_CHAR_MARKERS
NUMBERED = {"c", "v"}

_MARKER_RE = re.compile(r"\\(\+?)([A-Za-z][A-Za-z0-9]*)(\*?)")
_NUMBER_RE = re.compile(r"[^\s\\]+")
_VERSE_NUM_RE = re.compile(r"^(\d+)[a-z]?(?:[-\u2010\u2011\u2013](\d+)[a-z]?)?$")


class UsfmError(ValueError):
    """Malformed USFM input; `offset` is a byte offset into the input."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass
class Element:
    marker: str
    number: str | None = None  # \c and \v numbers, \id book code
    attributes: dict[str, str] = field(default_factory=dict)
    content: list["Element | str"] = field(default_factory=list)
    closed: bool = False  # an explicit end marker was present

    @property
    def base(self) -> str:
        return self.marker.lstrip("+")

    def text(self) -> str:
        """All inline text below this element, markers dropped."""
        parts = []
        for node in self.content:
            parts.append(node if isinstance(node, str) else node.text())
        return "".join(parts)


@dataclass
class UsfmDocument:
    book: BookId
    elements: list[Element]
    warnings: list[str] = field(default_factory=list)

    def walk(self):
        stack = list(reversed(self.elements))
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, Element):
                stack.extend(reversed(node.content))


def _byte_offset(text: str, i: int) -> int:
    return len(text[:i].encode("utf-8"))


def _is_paragraph(name: str, text: str, pos: int) -> bool:
    base = name.lstrip("+")
    if base in CHAR_MARKERS or base in NOTE_MARKERS or base == "v":
        return False
    if re.sub(r"\d+$", "", base) in {"q", "qm", "li", "pi", "ph", "s", "ms", "mt", "mte", "imt",
                                       "is", "io", "iq", "ili", "toc", "toca", "lim", "sd"}:
        return True
    known = {"id", "ide", "h", "rem", "sts", "usfm", "c", "cl", "cp", "cd", "p", "m", "po", "pr",
             "cls", "pmo", "pm", "pmc", "pmr", "pc", "mi", "nb", "b", "qr", "qc", "qa", "qd",
             "d", "r", "mr", "sr", "sp", "ip", "ipi", "im", "imi", "ipq", "imq", "ipr", "ib",
             "iot", "ie", "iex", "lh", "lf", "tr", "periph", "restore", "k1", "k2"}
    if base in known:
        return True
    # Unknown: a later end marker means it is a character style.
    return text.find(f"\\{name}*", pos) < 0


def _split_attributes(el: Element) -> None:
    if not el.content or not isinstance(el.content[-1], str) or "|" not in el.content[-1]:
        return
    head, _, attrs = el.content[-1].rpartition("|")
    if head:
        el.content[-1] = head
    else:
        el.content.pop()
    attrs = attrs.strip()
    found = re.findall(r'([\w-]+)\s*=\s*"([^"]*)"', attrs)
    if found:
        el.attributes = dict(found)
    elif attrs:
        el.attributes = {"lemma": attrs}  # default attribute of \w


def parse_usfm(data: bytes | str, strict: bool = True) -> UsfmDocument:
    """Parse one USFM book.

    With ``strict=False`` ordering problems and stray backslashes become
    warnings on the document instead of errors.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as err:
            raise UsfmError("input is not valid UTF-8", err.start) from None
    else:
        text = data
    if text.startswith("\ufeff"):
        text = text[1:]
    warnings: list[str] = []

    def problem(msg: str, pos: int) -> None:
        if strict:
            raise UsfmError(msg, _byte_offset(text, pos))
        warnings.append(f"{msg} (byte offset {_byte_offset(text, pos)})")

    top: list[Element] = []
    para: Element | None = None
    stack: list[Element] = []  # open character / note containers
    book: BookId | None = None
    last_chapter = 0
    last_verse = 0

    def current() -> list:
        if stack:
            return stack[-1].content
        if para is None:
            return top_text
        return para.content

    top_text: list = []  # text before any paragraph marker (kept for fidelity)

    def add_text(s: str) -> None:
        if not s:
            return
        target = current()
        if target and isinstance(target[-1], str):
            target[-1] += s
        else:
            target.append(s)

    def close_container(name: str | None) -> bool:
        # Close up to and including the innermost container called `name`.
        for k in range(len(stack) - 1, -1, -1):
            if name is None or stack[k].marker == name:
                for el in stack[k:]:
                    _split_attributes(el)
                stack[k].closed = True
                del stack[k:]
                return True
        return False

    pos = 0
    n = len(text)
    while pos < n:
        j = text.find("\\", pos)
        if j < 0:
            add_text(text[pos:])
            break
        add_text(text[pos:j])
        m = _MARKER_RE.match(text, j)
        if not m:
            problem("malformed marker", j)
            pos = j + 1
            continue
        plus, name, star = m.groups()
        marker = plus + name
        pos = m.end()
        if star:
            if not close_container(marker):
                problem(f"end marker \\{marker}* without opening marker", j)
            continue
        # one whitespace character after a marker belongs to the marker
        if pos < n and text[pos] in " \t\r\n":
            pos += 2 if text.startswith("\r\n", pos) else 1

        if marker in NUMBERED or marker == "id":
            tok = _NUMBER_RE.match(text, pos)
            if not tok:
                raise UsfmError(f"\\{marker} without a number", _byte_offset(text, j))
            number = tok.group(0)
            pos = tok.end()
            if pos < n and text[pos] in " \t\r\n":
                pos += 2 if text.startswith("\r\n", pos) else 1
            if marker == "id":
                if book is not None:
                    raise UsfmError("second \\id marker", _byte_offset(text, j))
                try:
                    book = BookId.parse(number)
                except VersificationError:
                    raise UsfmError(f"unknown book code {number!r}", _byte_offset(text, j)) from None
                _drop_trailing_space(current())
                _close_all(stack)
                para = Element("id", number=number)
                top.append(para)
                continue
            if marker == "c":
                if not number.isdigit():
                    raise UsfmError(f"bad chapter number {number!r}", _byte_offset(text, j))
                if int(number) <= last_chapter:
                    problem(f"chapter {number} does not increase", j)
                last_chapter = max(last_chapter, int(number))
                last_verse = 0
                _drop_trailing_space(current())
                _close_all(stack)
                para = Element("c", number=number)
                top.append(para)
                continue
            vm = _VERSE_NUM_RE.match(number)
            if not vm:
                raise UsfmError(f"bad verse number {number!r}", _byte_offset(text, j))
            first = int(vm.group(1))
            last = int(vm.group(2)) if vm.group(2) else first
            if last < first:
                raise UsfmError(f"descending verse range {number!r}", _byte_offset(text, j))
            if first <= last_verse:
                problem(f"verse {number} does not increase in chapter {last_chapter}", j)
            last_verse = max(last_verse, last)
            # verse markers end any open character styles
            while stack and stack[-1].base not in NOTE_MARKERS:
                _split_attributes(stack.pop())
            if stack:
                problem("verse marker inside a note", j)
                _close_all(stack)
            target = current()
            target.append(Element("v", number=number))
            continue

        if _is_paragraph(marker, text, pos):
            _drop_trailing_space(current())
            _close_all(stack)
            para = Element(marker)
            top.append(para)
            continue
        if name in NOTE_CHAR_MARKERS and stack and stack[-1].base in NOTE_CHAR_MARKERS:
            # implicit close of the previous note style
            _split_attributes(stack[-1])
            stack.pop()
        el = Element(marker)
        current().append(el)
        stack.append(el)

    if book is None:
        raise UsfmError("missing \\id book identification marker")
    _drop_trailing_space(current())
    if top_text and "".join(x for x in top_text if isinstance(x, str)).strip():
        warnings.append("text before the \\id marker ignored")
    _close_all(stack)
    return UsfmDocument(book=book, elements=top, warnings=warnings)


def _close_all(stack: list[Element]) -> None:
    # implicit close: no end marker was written
    while stack:
        _split_attributes(stack.pop())


def _drop_trailing_space(nodes: list) -> None:
    # Line breaks before a paragraph marker are layout, not content.
    if nodes and isinstance(nodes[-1], str):
        stripped = nodes[-1].rstrip(" \t\r\n")
        if stripped:
            nodes[-1] = stripped
        else:
            nodes.pop()


def to_usfm(doc: UsfmDocument) -> str:
    """Serialise a document so that parse_usfm(to_usfm(doc)) == doc."""
    out: list[str] = []

    def inline(nodes) -> None:
        for node in nodes:
            if isinstance(node, str):
                out.append(node)
                continue
            if node.marker == "v":
                out.append(f"\\v {node.number} ")
                continue
            out.append(f"\\{node.marker} ")
            inline(node.content)
            if node.attributes:
                if list(node.attributes) == ["lemma"]:
                    out.append("|" + node.attributes["lemma"])
                else:
                    out.append("|" + " ".join(f'{k}="{v}"' for k, v in node.attributes.items()))
            if node.closed:
                out.append(f"\\{node.marker}*")

    for i, el in enumerate(doc.elements):
        if i:
            out.append("\n")
        if el.number is not None:
            out.append(f"\\{el.marker} {el.number}")
        else:
            out.append(f"\\{el.marker}")
        if el.content:
            out.append(" ")
            inline(el.content)
    out.append("\n")
    return "".join(out)
