"""Text format for knowledge bases.

::

    % comment
    @facts
    p(a, b). q(_n1).
    @rules
    R1: p(X, Y) -> q(Y), s(Y, Z).
    -> top.
    @queries
    ? q(X), s(X, Y).

Lowercase identifiers are constants or predicates, capitalized ones are
variables, ``_name`` inside facts is a labeled null.  Rule labels are
optional (``R<n>`` by position otherwise).  Conjunctions use ``,`` or ``&``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .chase import KnowledgeBase, Rule
from .core import Atom, AtomSet, Constant, Term, Variable
from .errors import ParseError

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<section>@[a-z]+)
  | (?P<arrow>->)
  | (?P<null>_[a-z0-9_]+)
  | (?P<var>[A-Z][A-Za-z0-9_]*)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
  | (?P<punct>[(),.?:&])
    """,
    re.VERBOSE,
)

VAR_RE = re.compile(r"[A-Z][A-Za-z0-9_]*\Z")
NULL_RE = re.compile(r"_[a-z0-9_]+\Z")
IDENT_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> List[Token]:
    out: List[Token] = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                out.append(Token(kind, s, line, col))
            col += len(s)
        pos = m.end()
    out.append(Token("eof", "", line, col))
    return out


@dataclass
class KBDocument:
    facts: List[Atom] = field(default_factory=list)
    rules: List[Rule] = field(default_factory=list)
    queries: List[AtomSet] = field(default_factory=list)
    locations: Dict[str, Tuple[int, int]] = field(default_factory=dict, compare=False)

    def kb(self) -> KnowledgeBase:
        return KnowledgeBase(AtomSet(self.facts), tuple(self.rules))

    def structure(self):
        """Comparable value for round-trip checks."""
        return (
            frozenset(self.facts),
            tuple((r.id, r.body, r.head) for r in self.rules),
            tuple(self.queries),
        )


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.arity: Dict[str, Tuple[int, Token]] = {}

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def eat(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            got = t.text or t.kind
            self.fail(f"expected {want!r}, found {got!r}")
        self.i += 1
        return t

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def term(self, where: str) -> Term:
        t = self.tok
        if t.kind == "ident":
            self.i += 1
            return Constant(t.text)
        if t.kind == "var":
            if where == "facts":
                self.fail(f"variable {t.text} not allowed in facts (use _{t.text.lower()})")
            self.i += 1
            return Variable(t.text)
        if t.kind == "null":
            if where != "facts":
                self.fail(f"labeled null {t.text} only allowed in facts")
            self.i += 1
            return Variable(t.text)
        self.fail(f"expected a term, found {t.text or t.kind!r}")

    def atom(self, where: str) -> Atom:
        start = self.tok
        pred = self.eat("ident").text
        args: List[Term] = []
        if self.at("punct", "("):
            self.i += 1
            if not self.at("punct", ")"):
                args.append(self.term(where))
                while self.at("punct", ","):
                    self.i += 1
                    args.append(self.term(where))
            self.eat("punct", ")")
        prev = self.arity.get(pred)
        if prev is None:
            self.arity[pred] = (len(args), start)
        elif prev[0] != len(args):
            self.fail(
                f"predicate {pred} has arity {len(args)} here but {prev[0]} at "
                f"{prev[1].line}:{prev[1].col}",
                start,
            )
        return Atom(pred, args)

    def conj(self, where: str) -> List[Atom]:
        atoms = [self.atom(where)]
        while self.at("punct", ",") or self.at("punct", "&"):
            self.i += 1
            atoms.append(self.atom(where))
        return atoms

    def parse(self) -> KBDocument:
        doc = KBDocument()
        section = None
        while not self.at("eof"):
            if self.at("section"):
                t = self.eat("section")
                if t.text not in ("@facts", "@rules", "@queries"):
                    self.fail(f"unknown section {t.text}", t)
                section = t.text[1:]
                continue
            if section is None:
                self.fail("expected a section header (@facts, @rules, @queries)")
            if section == "facts":
                doc.facts.extend(a for a in self.conj("facts") if a not in doc.facts)
                self.eat("punct", ".")
            elif section == "rules":
                start = self.tok
                rid = None
                nxt = self.toks[self.i + 1]
                if self.tok.kind in ("ident", "var") and nxt.kind == "punct" and nxt.text == ":":
                    rid = self.tok.text
                    self.i += 2
                body: List[Atom] = []
                if not self.at("arrow"):
                    body = self.conj("rules")
                self.eat("arrow")
                head = self.conj("rules")
                self.eat("punct", ".")
                rid = rid or f"R{len(doc.rules)}"
                if any(r.id == rid for r in doc.rules):
                    self.fail(f"duplicate rule label {rid}", start)
                doc.rules.append(Rule(rid, AtomSet(body), AtomSet(head)))
                doc.locations[rid] = (start.line, start.col)
            else:
                self.eat("punct", "?")
                q = self.conj("queries")
                self.eat("punct", ".")
                doc.queries.append(AtomSet(q))
        return doc


def parse(text: str) -> KBDocument:
    return _Parser(text).parse()


def parse_atoms(text: str, where: str = "queries") -> AtomSet:
    """Parse a bare conjunction such as ``p(X), q(X, a)``."""
    p = _Parser(text)
    atoms = p.conj(where)
    if p.at("punct", "."):
        p.i += 1
    p.eat("eof")
    return AtomSet(atoms)


# --------------------------------------------------------------------------
# printing


def _fmt_term(t: Term, where: str) -> str:
    if not t.is_var:
        if IDENT_RE.match(t.name):
            return t.name
        raise ValueError(f"constant {t.name!r} has no textual form")
    if where == "facts":
        if NULL_RE.match(t.name):
            return t.name
        return "_v" + re.sub(r"[^a-z0-9_]", "_", t.name.lower())
    if VAR_RE.match(t.name):
        return t.name
    return "V_" + re.sub(r"[^A-Za-z0-9_]", "_", t.name)


def format_atom(a: Atom, where: str = "rules") -> str:
    if not a.args:
        return a.predicate
    return f"{a.predicate}({', '.join(_fmt_term(t, where) for t in a.args)})"


def format_conj(atoms, where: str = "rules") -> str:
    return ", ".join(format_atom(a, where) for a in AtomSet(atoms).sorted())


def format_rule(r: Rule) -> str:
    body = format_conj(r.body)
    lhs = f"{body} " if body else ""
    return f"{r.id}: {lhs}-> {format_conj(r.head)}."


def print_document(
    facts: Sequence[Atom] = (),
    rules: Sequence[Rule] = (),
    queries: Sequence[AtomSet] = (),
) -> str:
    lines = ["@facts"]
    lines += [format_atom(a, "facts") + "." for a in AtomSet(facts).sorted()]
    lines.append("@rules")
    lines += [format_rule(r) for r in rules]
    if queries:
        lines.append("@queries")
        lines += ["? " + format_conj(q, "queries") + "." for q in queries]
    return "\n".join(lines) + "\n"


def print_doc(doc: KBDocument) -> str:
    return print_document(doc.facts, doc.rules, doc.queries)


def print_kb(kb: KnowledgeBase, queries: Sequence[AtomSet] = ()) -> str:
    return print_document(kb.fact, kb.rules, queries)
