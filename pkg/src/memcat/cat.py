"""The model language: a small relational calculus over one candidate.

A model is a sequence of `let` bindings (possibly mutually recursive)
and checks (`acyclic e`, `irreflexive e`).  Expressions combine named
relations with union, intersection, difference, sequence, transitive
and reflexive-transitive closure, and direction filters like WW(e).

Checks are named by an `as` suffix, else by the last comment seen
before them (lowercased, spaces to hyphens), else positionally.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union as TUnion

from .relation import (
    Candidate,
    Relation,
    check_acyclic,
    check_irreflexive,
    closure,
    compose,
    restrict,
)


class CatError(Exception):
    pass


# ----------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Name:
    value: str


@dataclass(frozen=True)
class Empty:
    pass


@dataclass(frozen=True)
class Union:
    left: object
    right: object


@dataclass(frozen=True)
class Inter:
    left: object
    right: object


@dataclass(frozen=True)
class Diff:
    left: object
    right: object


@dataclass(frozen=True)
class Seq:
    left: object
    right: object


@dataclass(frozen=True)
class Plus:
    expr: object


@dataclass(frozen=True)
class Star:
    expr: object


@dataclass(frozen=True)
class DirFilter:
    dir: str
    expr: object


@dataclass(frozen=True)
class Let:
    name: str
    expr: object


@dataclass(frozen=True)
class LetRec:
    bindings: tuple  # ((name, expr), ...)


@dataclass(frozen=True)
class Check:
    kind: str  # "acyclic" | "irreflexive"
    expr: object
    name: Optional[str]


@dataclass(frozen=True)
class Model:
    statements: tuple


DIRS = {
    "RR": ("R", "R"), "RW": ("R", "W"), "WR": ("W", "R"), "WW": ("W", "W"),
    "RM": ("R", "M"), "MR": ("M", "R"), "MW": ("M", "W"), "MM": ("M", "M"),
}

_KEYWORDS = {"let", "rec", "and", "acyclic", "irreflexive", "as"}
_RESERVED_NAMES = ("ctrl+isync", "ctrl+isb", "ctrl+cfence")
_IDENT_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-")
_OPS = set("|&\\;+*()=")


def _lex(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if text.startswith("(*", i):
            depth, j = 1, i + 2
            while j < n and depth:
                if text.startswith("(*", j):
                    depth += 1
                    j += 2
                elif text.startswith("*)", j):
                    depth -= 1
                    j += 2
                else:
                    j += 1
            if depth:
                raise CatError("unterminated comment")
            tokens.append(("comment", text[i + 2:j - 2].strip(), i))
            i = j
            continue
        matched = False
        for res in _RESERVED_NAMES:
            if text.startswith(res, i):
                end = i + len(res)
                if end >= n or text[end] not in _IDENT_CHARS:
                    tokens.append(("name", res, i))
                    i = end
                    matched = True
                    break
        if matched:
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and text[j] in _IDENT_CHARS:
                j += 1
            word = text[i:j]
            tokens.append(("kw" if word in _KEYWORDS else "name", word, i))
            i = j
            continue
        if ch == "0":
            tokens.append(("zero", "0", i))
            i += 1
            continue
        if ch in _OPS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        raise CatError(f"unexpected character {ch!r} at offset {i}")
    tokens.append(("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0
        self.last_comment = None

    def peek(self):
        while self.tokens[self.pos][0] == "comment":
            self.last_comment = self.tokens[self.pos][1]
            self.pos += 1
        return self.tokens[self.pos]

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, kind, value=None):
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            raise CatError(f"expected {value or kind}, got {tok[1]!r}")
        return tok

    # expression grammar: union < inter/diff < seq < postfix < primary
    def expr(self):
        node = self.inter()
        while self.peek()[:2] == ("op", "|"):
            self.next()
            node = Union(node, self.inter())
        return node

    def inter(self):
        node = self.seq()
        while self.peek()[0] == "op" and self.peek()[1] in ("&", "\\"):
            op = self.next()[1]
            rhs = self.seq()
            node = Inter(node, rhs) if op == "&" else Diff(node, rhs)
        return node

    def seq(self):
        node = self.postfix()
        while self.peek()[:2] == ("op", ";"):
            self.next()
            node = Seq(node, self.postfix())
        return node

    def postfix(self):
        node = self.primary()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "+"):
            node = Star(node) if self.next()[1] == "*" else Plus(node)
        return node

    def primary(self):
        kind, value, _ = self.peek()
        if kind == "zero":
            self.next()
            return Empty()
        if kind == "op" and value == "(":
            self.next()
            node = self.expr()
            self.expect("op", ")")
            return node
        if kind == "name":
            self.next()
            if value in DIRS and self.peek()[:2] == ("op", "("):
                self.next()
                inner = self.expr()
                self.expect("op", ")")
                return DirFilter(value, inner)
            return Name(value)
        raise CatError(f"unexpected token {value!r} in expression")

    def statements(self):
        out = []
        check_index = 0
        while True:
            kind, value, _ = self.peek()
            if kind == "eof":
                break
            if kind == "kw" and value == "let":
                self.next()
                out.append(self.let_tail())
            elif kind == "kw" and value in ("acyclic", "irreflexive"):
                # grab the naming comment now: expression lookahead below
                # may consume a comment that belongs to the next check
                comment = self.last_comment
                self.last_comment = None
                self.next()
                check_index += 1
                expr = self.expr()
                name = None
                if self.peek()[:2] == ("kw", "as"):
                    self.next()
                    name = self.expect("name")[1]
                elif comment:
                    name = re.sub(r"\s+", "-", comment.lower())
                if name is None:
                    name = f"check-{check_index}"
                out.append(Check(value, expr, name))
            else:
                raise CatError(f"unexpected token {value!r} at statement level")
        return tuple(out)

    def let_tail(self):
        if self.peek()[:2] == ("kw", "rec"):
            self.next()
            bindings = [self.binding()]
            while self.peek()[:2] == ("kw", "and"):
                self.next()
                bindings.append(self.binding())
            stmt = LetRec(tuple(bindings))
            _check_monotone(stmt)
            return stmt
        name, expr = self.binding()
        return Let(name, expr)

    def binding(self):
        name = self.expect("name")[1]
        self.expect("op", "=")
        return name, self.expr()


def _check_monotone(stmt: LetRec):
    rec_names = {n for n, _ in stmt.bindings}
    if len(rec_names) != len(stmt.bindings):
        raise CatError("duplicate name in recursive binding group")

    def walk(node, in_subtrahend):
        if isinstance(node, Name):
            if in_subtrahend and node.value in rec_names:
                raise CatError(
                    f"recursive name {node.value!r} in a subtrahend: "
                    "recursion must stay monotone"
                )
        elif isinstance(node, Diff):
            walk(node.left, in_subtrahend)
            walk(node.right, True)
        elif isinstance(node, (Union, Inter, Seq)):
            walk(node.left, in_subtrahend)
            walk(node.right, in_subtrahend)
        elif isinstance(node, (Plus, Star, DirFilter)):
            walk(node.expr, in_subtrahend)

    for _, expr in stmt.bindings:
        walk(expr, False)


def parse_cat(text: str) -> Model:
    return Model(_Parser(_lex(text)).statements())


# ---------------------------------------------------------------- evaluation


def builtin_env(cand: Candidate) -> dict:
    from .litmus import ALL_FENCE_KINDS  # cycle-free: litmus imports relation only

    n = cand.n
    env = {
        "po": cand.po,
        "po-loc": cand.po_loc,
        "rf": cand.rf,
        "rfe": cand.rfe,
        "rfi": cand.rfi,
        "co": cand.co,
        "coe": cand.coe,
        "coi": cand.coi,
        "fr": cand.fr,
        "fre": cand.fre,
        "fri": cand.fri,
        "com": cand.com,
        "0": Relation.empty(n),
        "id": Relation.identity(n),
    }
    for name, r in cand.deps.items():
        env[name] = r
    for kind in ALL_FENCE_KINDS:
        env[kind] = cand.fences.get(kind, Relation.empty(n))
    return env


def eval_expr(node, env: dict, cand: Candidate) -> Relation:
    if isinstance(node, Name):
        try:
            return env[node.value]
        except KeyError:
            raise CatError(f"unbound name {node.value!r}") from None
    if isinstance(node, Empty):
        return Relation.empty(cand.n)
    if isinstance(node, Union):
        return eval_expr(node.left, env, cand) | eval_expr(node.right, env, cand)
    if isinstance(node, Inter):
        return eval_expr(node.left, env, cand) & eval_expr(node.right, env, cand)
    if isinstance(node, Diff):
        return eval_expr(node.left, env, cand) - eval_expr(node.right, env, cand)
    if isinstance(node, Seq):
        return compose(eval_expr(node.left, env, cand), eval_expr(node.right, env, cand))
    if isinstance(node, Plus):
        return closure(eval_expr(node.expr, env, cand))
    if isinstance(node, Star):
        return closure(eval_expr(node.expr, env, cand), reflexive=True)
    if isinstance(node, DirFilter):
        src, tgt = DIRS[node.dir]
        return restrict(eval_expr(node.expr, env, cand), src, tgt, cand.events)
    raise CatError(f"cannot evaluate {node!r}")


@dataclass(frozen=True)
class CheckResult:
    name: str
    kind: str
    ok: bool
    witness: object


@dataclass(frozen=True)
class ModelResult:
    passed: bool
    checks: tuple
    env: dict

    @property
    def failed(self) -> Optional[str]:
        for c in self.checks:
            if not c.ok:
                return c.name
        return None


def _bind(env: dict, name: str, value: Relation):
    if name in env:
        raise CatError(f"name {name!r} is already bound")
    env[name] = value


def run_model(model: Model, cand: Candidate) -> ModelResult:
    env = builtin_env(cand)
    checks = []
    for stmt in model.statements:
        if isinstance(stmt, Let):
            _bind(env, stmt.name, eval_expr(stmt.expr, env, cand))
        elif isinstance(stmt, LetRec):
            for name, _ in stmt.bindings:
                _bind(env, name, Relation.empty(cand.n))
            # chaotic iteration to the least fixpoint; all operators that
            # may see recursive names are monotone, so this terminates
            changed = True
            while changed:
                changed = False
                for name, expr in stmt.bindings:
                    new = eval_expr(expr, env, cand)
                    if new != env[name]:
                        env[name] = new
                        changed = True
        elif isinstance(stmt, Check):
            r = eval_expr(stmt.expr, env, cand)
            if stmt.kind == "acyclic":
                witness = check_acyclic(r)
            else:
                witness = check_irreflexive(r)
            checks.append(CheckResult(stmt.name, stmt.kind, witness is None, witness))
        else:  # pragma: no cover
            raise CatError(f"unknown statement {stmt!r}")
    return ModelResult(all(c.ok for c in checks), tuple(checks), env)
