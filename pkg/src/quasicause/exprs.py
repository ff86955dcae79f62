"""Textual process expressions.

Grammar (";" binds tighter than "*", both left-associative):

    term := NAME
          | term ";" term            sequential, temporal order (f then g)
          | term "*" term            parallel
          | "mix(" NUMBER "," term "," term ")"
          | "(" term ")"

Numbers are decimals or exact ratios like ``1/3``. Parsing typechecks
against the supplied bindings and reports source positions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .diagrams import Leaf, Mix, Par, Seq, Term
from .errors import ExprSyntaxError, TypeMismatch, UnboundGenerator
from .procs import LinearProcess
from .wires import Signature

_TOKEN = re.compile(
    r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_:@.\-]*)"
    r"|(?P<number>\d+(?:/\d+|\.\d+)?)"
    r"|(?P<punct>[();,*]))"
)

RESERVED = {"mix"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(src: str) -> List[_Token]:
    tokens = []
    pos = 0
    while pos < len(src):
        match = _TOKEN.match(src, pos)
        if match is None:
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            where = len(src) - len(stripped)
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", where)
        kind = match.lastgroup
        text = match.group(kind)
        tokens.append(_Token(kind, text, match.start(kind)))
        pos = match.end()
    return tokens


def _parse_number(text: str):
    if "/" in text:
        return Fraction(text)
    if "." in text:
        return float(text)
    return Fraction(int(text))


class _Parser:
    def __init__(self, tokens: List[_Token], bindings: Dict[str, LinearProcess],
                 src_len: int):
        self.tokens = tokens
        self.bindings = bindings
        self.i = 0
        self.src_len = src_len

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise ExprSyntaxError("unexpected end of expression", self.src_len)
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next()
        if tok.text != text:
            raise ExprSyntaxError(f"expected {text!r}, found {tok.text!r}", tok.pos)
        return tok

    # term := seq ("*" seq)*
    def parse_term(self) -> Tuple[Term, Signature, Signature]:
        term, ins, outs = self.parse_seq()
        while self.peek() is not None and self.peek().text == "*":
            self.next()
            rhs, rins, routs = self.parse_seq()
            term = Par(term, rhs)
            ins, outs = ins + rins, outs + routs
        return term, ins, outs

    # seq := atom (";" atom)*
    def parse_seq(self) -> Tuple[Term, Signature, Signature]:
        term, ins, outs = self.parse_atom()
        while self.peek() is not None and self.peek().text == ";":
            op = self.next()
            rhs, rins, routs = self.parse_atom()
            if outs.wires != rins.wires:
                raise TypeMismatch(
                    f"cannot wire {outs!r} into {rins!r} at position {op.pos}"
                )
            term = Seq(term, rhs)
            outs = routs
        return term, ins, outs

    def parse_atom(self) -> Tuple[Term, Signature, Signature]:
        tok = self.next()
        if tok.text == "(":
            inner = self.parse_term()
            self.expect(")")
            return inner
        if tok.kind == "name" and tok.text == "mix":
            self.expect("(")
            weight_tok = self.next()
            if weight_tok.kind != "number":
                raise ExprSyntaxError("mix needs a leading weight", weight_tok.pos)
            weight = _parse_number(weight_tok.text)
            if not 0 <= weight <= 1:
                raise ExprSyntaxError(
                    f"mix weight {weight_tok.text} outside [0, 1]", weight_tok.pos
                )
            self.expect(",")
            left, lins, louts = self.parse_term()
            comma = self.expect(",")
            right, rins, routs = self.parse_term()
            self.expect(")")
            if lins.wires != rins.wires or louts.wires != routs.wires:
                raise TypeMismatch(
                    f"mix branches differ: {lins!r}->{louts!r} vs "
                    f"{rins!r}->{routs!r} at position {comma.pos}"
                )
            return Mix(weight, left, right), lins, louts
        if tok.kind == "name":
            if tok.text in RESERVED:
                raise ExprSyntaxError(f"{tok.text!r} is reserved", tok.pos)
            proc = self.bindings.get(tok.text)
            if proc is None:
                raise UnboundGenerator(
                    f"no process bound to {tok.text!r} (position {tok.pos})"
                )
            return Leaf(tok.text), proc.inputs, proc.outputs
        raise ExprSyntaxError(f"unexpected token {tok.text!r}", tok.pos)


def parse_process_expr(
    src: str, bindings: Dict[str, LinearProcess]
) -> Term:
    """Parse and typecheck; returns the term (signatures are re-derivable)."""
    tokens = _tokenize(src)
    if not tokens:
        raise ExprSyntaxError("empty expression", 0)
    parser = _Parser(tokens, bindings, len(src))
    term, _, _ = parser.parse_term()
    trailing = parser.peek()
    if trailing is not None:
        raise ExprSyntaxError(f"trailing input {trailing.text!r}", trailing.pos)
    return term


def _format_weight(w) -> str:
    if isinstance(w, float):
        return repr(w)
    f = Fraction(w)
    return str(f)


def format_term(term: Term) -> str:
    """Pretty-print; parse(format_term(t)) reproduces t exactly."""
    if isinstance(term, Leaf):
        return term.name
    if isinstance(term, Mix):
        return (
            f"mix({_format_weight(term.weight)}, {format_term(term.left)}, "
            f"{format_term(term.right)})"
        )
    if isinstance(term, Seq):
        left = format_term(term.first)
        if isinstance(term.first, Par):
            left = f"({left})"
        right = format_term(term.then)
        if isinstance(term.then, (Par, Seq)):
            right = f"({right})"
        return f"{left} ; {right}"
    if isinstance(term, Par):
        left = format_term(term.left)
        right = format_term(term.right)
        if isinstance(term.right, Par):
            right = f"({right})"
        return f"{left} * {right}"
    raise TypeError(f"not a diagram term: {term!r}")
