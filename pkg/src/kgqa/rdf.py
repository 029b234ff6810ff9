"""NTriples parsing and per-subject capsule grouping.

The parser accepts the line-based NTriples subset: IRIs in angle brackets,
quoted literals with optional ``^^<datatype>`` or ``@lang``, blank nodes
``_:label``, a ``.`` terminator, ``#`` comment lines and blank lines.
Parsing is strict: any malformed line raises MalformedLine with its line
number, never silently skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable


class TermKind(Enum):
    IRI = "iri"
    LITERAL = "literal"
    BLANK_NODE = "blank_node"


@dataclass(frozen=True)
class Term:
    kind: TermKind
    lexical: str
    datatype_iri: str | None = None
    language_tag: str | None = None

    def __post_init__(self):
        if self.kind is not TermKind.LITERAL:
            if self.datatype_iri is not None or self.language_tag is not None:
                raise ValueError("only literals carry a datatype or language tag")
            if self.kind is TermKind.IRI and not self.lexical:
                raise ValueError("IRI term must have a non-empty lexical form")
        elif self.datatype_iri is not None and self.language_tag is not None:
            raise ValueError("a literal has at most one of datatype, language tag")

    @staticmethod
    def iri(value: str) -> "Term":
        return Term(TermKind.IRI, value)

    @staticmethod
    def literal(value: str, datatype: str | None = None, lang: str | None = None) -> "Term":
        return Term(TermKind.LITERAL, value, datatype_iri=datatype, language_tag=lang)

    @staticmethod
    def blank(label: str) -> "Term":
        return Term(TermKind.BLANK_NODE, label)


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if self.subject.kind is TermKind.LITERAL:
            raise ValueError("triple subject must be an IRI or blank node")
        if self.predicate.kind is not TermKind.IRI:
            raise ValueError("triple predicate must be an IRI")


@dataclass
class EntityCapsule:
    """All triples sharing one subject, in deterministic order."""

    subject: Term
    triples: list[Triple] = field(default_factory=list)


class MalformedLine(ValueError):
    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


_ECHAR = {
    "t": "\t",
    "b": "\b",
    "n": "\n",
    "r": "\r",
    "f": "\f",
    '"': '"',
    "'": "'",
    "\\": "\\",
}

_IRI_RE = re.compile(r"<([^<>\"{}|^`\\\x00-\x20]*)>")
_BLANK_RE = re.compile(r"_:([A-Za-z0-9][A-Za-z0-9._-]*)")
_LANG_RE = re.compile(r"@([a-zA-Z]+(?:-[a-zA-Z0-9]+)*)")


def _decode_escapes(raw: str, line_number: int) -> str:
    out: list[str] = []
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= len(raw):
            raise MalformedLine(line_number, "dangling escape at end of literal")
        esc = raw[i + 1]
        if esc in _ECHAR:
            out.append(_ECHAR[esc])
            i += 2
        elif esc in ("u", "U"):
            width = 4 if esc == "u" else 8
            hexpart = raw[i + 2 : i + 2 + width]
            if len(hexpart) != width or not re.fullmatch(r"[0-9A-Fa-f]+", hexpart):
                raise MalformedLine(line_number, f"bad \\{esc} escape")
            out.append(chr(int(hexpart, 16)))
            i += 2 + width
        else:
            raise MalformedLine(line_number, f"unknown escape \\{esc}")
    return "".join(out)


class _LineScanner:
    def __init__(self, line: str, line_number: int):
        self.line = line
        self.pos = 0
        self.line_number = line_number

    def fail(self, reason: str):
        raise MalformedLine(self.line_number, reason)

    def skip_ws(self):
        while self.pos < len(self.line) and self.line[self.pos] in " \t":
            self.pos += 1

    def match(self, regex: re.Pattern) -> re.Match | None:
        m = regex.match(self.line, self.pos)
        if m:
            self.pos = m.end()
        return m

    def read_term(self, allow_literal: bool) -> Term:
        self.skip_ws()
        if self.pos >= len(self.line):
            self.fail("unexpected end of statement")
        ch = self.line[self.pos]
        if ch == "<":
            m = self.match(_IRI_RE)
            if not m:
                self.fail("malformed IRI")
            iri = _decode_escapes(m.group(1), self.line_number)
            if not iri:
                self.fail("empty IRI")
            return Term.iri(iri)
        if ch == "_":
            m = self.match(_BLANK_RE)
            if not m:
                self.fail("malformed blank node label")
            return Term.blank(m.group(1))
        if ch == '"':
            if not allow_literal:
                self.fail("literal not allowed in this position")
            return self._read_literal()
        self.fail(f"unexpected character {ch!r}")

    def _read_literal(self) -> Term:
        # find the closing unescaped quote
        i = self.pos + 1
        while i < len(self.line):
            if self.line[i] == "\\":
                i += 2
                continue
            if self.line[i] == '"':
                break
            i += 1
        else:
            self.fail("unterminated literal")
        if i >= len(self.line):
            self.fail("unterminated literal")
        raw = self.line[self.pos + 1 : i]
        self.pos = i + 1
        value = _decode_escapes(raw, self.line_number)
        if self.line.startswith("^^", self.pos):
            self.pos += 2
            m = self.match(_IRI_RE)
            if not m:
                self.fail("malformed datatype IRI")
            return Term.literal(value, datatype=m.group(1))
        if self.line.startswith("@", self.pos):
            m = self.match(_LANG_RE)
            if not m:
                self.fail("malformed language tag")
            return Term.literal(value, lang=m.group(1))
        return Term.literal(value)

    def expect_terminator(self):
        self.skip_ws()
        if self.pos >= len(self.line) or self.line[self.pos] != ".":
            self.fail("missing '.' terminator")
        self.pos += 1
        self.skip_ws()
        rest = self.line[self.pos :]
        if rest and not rest.startswith("#"):
            self.fail(f"trailing content after terminator: {rest!r}")


def parse_ntriples(source: bytes | str | Iterable[str]) -> list[Triple]:
    """Parse NTriples text into triples, preserving statement order.

    Raises MalformedLine on the first line that violates the grammar.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        # only \n / \r\n / \r are line breaks (str.splitlines is too broad)
        lines = re.split(r"\r\n|\n|\r", source)
    else:
        lines = [ln.rstrip("\n").rstrip("\r") for ln in source]

    triples: list[Triple] = []
    for number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        scanner = _LineScanner(line, number)
        subject = scanner.read_term(allow_literal=False)
        predicate = scanner.read_term(allow_literal=False)
        if predicate.kind is not TermKind.IRI:
            scanner.fail("predicate must be an IRI")
        obj = scanner.read_term(allow_literal=True)
        scanner.expect_terminator()
        triples.append(Triple(subject, predicate, obj))
    return triples


def _encode_literal(value: str) -> str:
    out = []
    for ch in value:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return "".join(out)


def serialize_term(term: Term) -> str:
    if term.kind is TermKind.IRI:
        return f"<{term.lexical}>"
    if term.kind is TermKind.BLANK_NODE:
        return f"_:{term.lexical}"
    text = f'"{_encode_literal(term.lexical)}"'
    if term.datatype_iri:
        return f"{text}^^<{term.datatype_iri}>"
    if term.language_tag:
        return f"{text}@{term.language_tag}"
    return text


def serialize_ntriples(triples: Iterable[Triple]) -> str:
    """Canonical NTriples text; reparsing yields term-wise identical triples."""
    return "".join(
        f"{serialize_term(t.subject)} {serialize_term(t.predicate)} {serialize_term(t.object)} .\n"
        for t in triples
    )


def group_capsules(triples: list[Triple]) -> list[EntityCapsule]:
    """Group triples by subject, in first-appearance order of subjects.

    Within a capsule, input order is kept with predicate IRI as tiebreak.
    """
    by_subject: dict[Term, EntityCapsule] = {}
    order: dict[Term, list[tuple[int, Triple]]] = {}
    for index, triple in enumerate(triples):
        if triple.subject not in by_subject:
            by_subject[triple.subject] = EntityCapsule(triple.subject)
            order[triple.subject] = []
        order[triple.subject].append((index, triple))
    for subject, capsule in by_subject.items():
        entries = sorted(order[subject], key=lambda e: (e[0], e[1].predicate.lexical))
        capsule.triples = [t for _, t in entries]
    return list(by_subject.values())
