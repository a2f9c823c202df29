"""Minimal RDF data model, N-Triples parsing, and an in-memory triple store.

The store keeps triples in insertion order, deduplicates on insert (set
semantics), and maintains subject and (subject, predicate) lookups so that
property paths can be resolved without scanning.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

from .errors import ParseError

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"
RDF_TYPE = RDF_NS + "type"
XSD_STRING = XSD_NS + "string"

_WHITESPACE = set(" \t\r\n\f\v")


@dataclass(frozen=True, slots=True)
class Iri:
    value: str

    def __post_init__(self):
        if not self.value:
            raise ValueError("IRI must be non-empty")
        if any(c in _WHITESPACE for c in self.value):
            raise ValueError(f"IRI contains whitespace: {self.value!r}")


@dataclass(frozen=True, slots=True)
class Blank:
    id: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("blank node id must be non-empty")


@dataclass(frozen=True, slots=True)
class Literal:
    lexical: str
    datatype: str = XSD_STRING
    lang: str | None = None


Term = Union[Iri, Blank, Literal]


@dataclass(frozen=True, slots=True)
class Triple:
    subject: Iri | Blank
    predicate: Iri
    object: Term


class Graph:
    """Set of triples with insertion-order iteration and s/p lookups.

    Immutable by convention after loading: concurrent readers are safe as
    long as nothing calls :meth:`add`.
    """

    def __init__(self, triples: Iterable[Triple] = ()):
        self._triples: list[Triple] = []
        self._seen: set[Triple] = set()
        self._by_subject: dict[Iri | Blank, list[Triple]] = {}
        self._sp: dict[tuple[Iri | Blank, str], list[Term]] = {}
        for t in triples:
            self.add(t)

    def add(self, triple: Triple) -> None:
        if triple in self._seen:
            return
        self._seen.add(triple)
        self._triples.append(triple)
        self._by_subject.setdefault(triple.subject, []).append(triple)
        self._sp.setdefault((triple.subject, triple.predicate.value), []).append(triple.object)

    def objects(self, subject: Iri | Blank, predicate: str) -> list[Term]:
        """All objects of (subject, predicate) in insertion order."""
        return list(self._sp.get((subject, predicate), ()))

    def outgoing(self, subject: Iri | Blank) -> list[Triple]:
        return list(self._by_subject.get(subject, ()))

    def has_outgoing(self, term: Term) -> bool:
        return isinstance(term, (Iri, Blank)) and term in self._by_subject

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self._seen

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._seen == other._seen

    def __repr__(self) -> str:
        return f"Graph({len(self._triples)} triples)"


# --------------------------------------------------------------------------
# N-Triples parsing
# --------------------------------------------------------------------------

_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_BLANK_LABEL = re.compile(r"[0-9A-Za-z_](?:[0-9A-Za-z_\-.]*[0-9A-Za-z_\-])?")
_LANG_TAG = re.compile(r"[A-Za-z]+(?:-[0-9A-Za-z]+)*")


class _LineParser:
    def __init__(self, line: str, lineno: int):
        self.s = line
        self.i = 0
        self.n = len(line)
        self.lineno = lineno

    def error(self, reason: str) -> ParseError:
        return ParseError(self.lineno, reason)

    def skip_ws(self) -> None:
        while self.i < self.n and self.s[self.i] in " \t":
            self.i += 1

    def at_end(self) -> bool:
        return self.i >= self.n

    def peek(self) -> str:
        return self.s[self.i] if self.i < self.n else ""

    def _unicode_escape(self, width: int) -> str:
        hexdigits = self.s[self.i : self.i + width]
        if len(hexdigits) != width or any(c not in "0123456789abcdefABCDEF" for c in hexdigits):
            raise self.error(f"invalid \\{'u' if width == 4 else 'U'} escape")
        self.i += width
        code = int(hexdigits, 16)
        if code > 0x10FFFF:
            raise self.error("unicode escape out of range")
        return chr(code)

    def parse_iriref(self) -> Iri:
        if self.peek() != "<":
            raise self.error("expected '<'")
        self.i += 1
        out: list[str] = []
        while True:
            if self.at_end():
                raise self.error("unterminated IRI")
            c = self.s[self.i]
            if c == ">":
                self.i += 1
                break
            if c == "\\":
                self.i += 1
                esc = self.peek()
                if esc == "u":
                    self.i += 1
                    out.append(self._unicode_escape(4))
                elif esc == "U":
                    self.i += 1
                    out.append(self._unicode_escape(8))
                else:
                    raise self.error(f"invalid escape '\\{esc}' in IRI")
                continue
            if c in _WHITESPACE or c == "<":
                raise self.error("whitespace or '<' inside IRI")
            out.append(c)
            self.i += 1
        value = "".join(out)
        if not value:
            raise self.error("empty IRI")
        return Iri(value)

    def parse_blank(self) -> Blank:
        if not self.s.startswith("_:", self.i):
            raise self.error("expected blank node '_:'")
        self.i += 2
        m = _BLANK_LABEL.match(self.s, self.i)
        if not m:
            raise self.error("invalid blank node label")
        self.i = m.end()
        return Blank(m.group())

    def parse_literal(self) -> Literal:
        if self.peek() != '"':
            raise self.error("expected '\"'")
        self.i += 1
        out: list[str] = []
        while True:
            if self.at_end():
                raise self.error("unterminated string literal")
            c = self.s[self.i]
            if c == '"':
                self.i += 1
                break
            if c == "\\":
                self.i += 1
                esc = self.peek()
                if esc in _ESCAPES:
                    out.append(_ESCAPES[esc])
                    self.i += 1
                elif esc == "u":
                    self.i += 1
                    out.append(self._unicode_escape(4))
                elif esc == "U":
                    self.i += 1
                    out.append(self._unicode_escape(8))
                else:
                    raise self.error(f"invalid escape '\\{esc}' in literal")
                continue
            out.append(c)
            self.i += 1
        lexical = "".join(out)
        if self.peek() == "@":
            self.i += 1
            m = _LANG_TAG.match(self.s, self.i)
            if not m:
                raise self.error("invalid language tag")
            self.i = m.end()
            return Literal(lexical, XSD_STRING, lang=m.group())
        if self.s.startswith("^^", self.i):
            self.i += 2
            dt = self.parse_iriref()
            return Literal(lexical, dt.value)
        return Literal(lexical)

    def parse_subject(self) -> Iri | Blank:
        c = self.peek()
        if c == "<":
            return self.parse_iriref()
        if c == "_":
            return self.parse_blank()
        raise self.error("subject must be an IRI or blank node")

    def parse_object(self) -> Term:
        c = self.peek()
        if c == "<":
            return self.parse_iriref()
        if c == "_":
            return self.parse_blank()
        if c == '"':
            return self.parse_literal()
        raise self.error("object must be an IRI, blank node, or literal")

    def parse_statement(self) -> Triple:
        self.skip_ws()
        subject = self.parse_subject()
        self.skip_ws()
        if self.peek() != "<":
            raise self.error("predicate must be an IRI")
        predicate = self.parse_iriref()
        self.skip_ws()
        obj = self.parse_object()
        self.skip_ws()
        if self.peek() != ".":
            raise self.error("expected '.'")
        self.i += 1
        self.skip_ws()
        if not self.at_end() and self.peek() != "#":
            raise self.error("unexpected content after '.'")
        try:
            return Triple(subject, predicate, obj)
        except ValueError as exc:
            raise self.error(str(exc)) from exc


def parse_ntriples(text: str) -> Graph:
    """Parse N-Triples text into a Graph.

    One statement per line; blank lines and ``#`` comment lines are
    skipped. Parsing is all-or-nothing: the first malformed line raises
    :class:`ParseError` with its 1-based line number.
    """
    g = Graph()
    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        g.add(_LineParser(line, lineno).parse_statement())
    return g


# --------------------------------------------------------------------------
# Canonical serialization
# --------------------------------------------------------------------------


def _escape_literal(s: str) -> str:
    out = []
    for c in s:
        if c == "\\":
            out.append("\\\\")
        elif c == '"':
            out.append('\\"')
        elif c == "\n":
            out.append("\\n")
        elif c == "\r":
            out.append("\\r")
        elif c == "\t":
            out.append("\\t")
        elif ord(c) < 0x20:
            out.append(f"\\u{ord(c):04X}")
        else:
            out.append(c)
    return "".join(out)


def term_to_ntriples(term: Term) -> str:
    if isinstance(term, Iri):
        return f"<{term.value}>"
    if isinstance(term, Blank):
        return f"_:{term.id}"
    lex = f'"{_escape_literal(term.lexical)}"'
    if term.lang:
        return f"{lex}@{term.lang}"
    if term.datatype != XSD_STRING:
        return f"{lex}^^<{term.datatype}>"
    return lex


def triple_to_ntriples(t: Triple) -> str:
    return f"{term_to_ntriples(t.subject)} {term_to_ntriples(t.predicate)} {term_to_ntriples(t.object)} ."


def serialize_ntriples(g: Graph) -> str:
    """Canonical N-Triples text, one line per triple in insertion order."""
    return "".join(triple_to_ntriples(t) + "\n" for t in g)


# --------------------------------------------------------------------------
# Instance access
# --------------------------------------------------------------------------


def instances_of_type(g: Graph, type_iri: str) -> list[str]:
    """IRIs of all subjects typed with ``type_iri``, sorted, duplicates removed.

    Blank-node subjects are skipped: they have no stable identifier to
    report as one half of a duplicate pair.
    """
    found = {
        t.subject.value
        for t in g
        if t.predicate.value == RDF_TYPE
        and t.object == Iri(type_iri)
        and isinstance(t.subject, Iri)
    }
    return sorted(found)


def resolve_path(g: Graph, subject: Iri | Blank, path: Sequence[str]) -> list[Term]:
    """Follow a predicate path from ``subject`` and collect terminal terms.

    Intermediate segments traverse resource nodes only; fan-out at any
    segment multiplies results. Order follows stored order, so the result
    is deterministic for a given graph.
    """
    if not path:
        return []
    frontier: list[Term] = [subject]
    for segment in path[:-1]:
        nxt: list[Term] = []
        for node in frontier:
            if isinstance(node, (Iri, Blank)):
                nxt.extend(g.objects(node, segment))
        frontier = nxt
    out: list[Term] = []
    for node in frontier:
        if isinstance(node, (Iri, Blank)):
            out.extend(g.objects(node, path[-1]))
    return out


def local_name(iri: str) -> str:
    """Short field name for an IRI: fragment if present, else last path segment."""
    if "#" in iri:
        candidate = iri.rsplit("#", 1)[1]
    else:
        candidate = iri.rstrip("/").rsplit("/", 1)[-1]
    return candidate or iri
