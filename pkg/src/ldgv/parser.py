"""Concrete syntax for LDGV (``.ldgv``) and LSST (``.lsst``) programs.

The grammar is written down in ``docs/grammar.ebnf``.  Both dialects share one
lexer; type abbreviations are expanded and ``dualof`` is resolved while
parsing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import ast as A
from .ast import Mult

# ---------------------------------------------------------------------------
# Positions, errors, program containers


@dataclass(frozen=True)
class SourcePos:
    line: int
    column: int
    offset: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class ParseError(SyntaxError):
    def __init__(self, message: str, pos: SourcePos, expected: frozenset = frozenset()):
        self.pos = pos
        self.expected = expected
        exp = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{pos}: {message}{exp}")


class DuplicateDefinition(ParseError):
    pass


class UnknownTypeName(ParseError):
    pass


@dataclass
class TermDef:
    name: str
    declared: A.Type | None
    body: A.Expr
    pos: SourcePos | None = None


@dataclass
class Program:
    type_defs: list = field(default_factory=list)
    term_defs: list = field(default_factory=list)

    @property
    def main(self) -> A.Expr | None:
        for d in self.term_defs:
            if d.name == "main":
                return d.body
        return None


# ---------------------------------------------------------------------------
# Lexer

KEYWORDS = {
    "type", "val", "let", "in", "case", "of", "rec", "natrec", "new", "fork",
    "send", "recv", "select", "rcase", "close", "wait", "dualof", "fun",
    "lambda", "with", "Unit", "Int", "Nat", "End", "Sigma",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<end>end[!?])
  | (?P<plus>\(\+\))
  | (?P<sym>->|-o(?![A-Za-z0-9_])|[(){}\[\]<>,:;.=!?+\-*&])
  | (?P<label>'[A-Za-z_][A-Za-z0-9_]*)
  | (?P<chan>@[A-Za-z0-9_#]+)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # sym, kw, ident, label, int, chan, eof
    text: str
    pos: SourcePos


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        pos = SourcePos(line, col, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", pos)
        s = m.group()
        kind = m.lastgroup
        if kind != "ws":
            if kind in ("end", "plus"):
                kind = "sym"
            elif kind == "ident" and s in KEYWORDS:
                kind = "kw"
            toks.append(Token(kind, s, pos))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        i = m.end()
    toks.append(Token("eof", "<eof>", SourcePos(line, col, len(text))))
    return toks


# ---------------------------------------------------------------------------
# Shared parser machinery


class _Base:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.aliases: dict[str, object] = {}
        self.tvars: list[str] = []

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "kw") and t.text in texts

    def accept(self, *texts: str) -> Token | None:
        if self.at(*texts):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            self.fail(f"unexpected {self.tok.text!r}", {text})
        return t  # type: ignore[return-value]

    def fail(self, msg: str, expected=(), pos: SourcePos | None = None, cls=ParseError):
        raise cls(msg, pos or self.tok.pos, frozenset(expected))

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            self.fail(f"expected an identifier, found {t.text!r}", {"identifier"})
        self.i += 1
        return t.text

    def binder(self) -> str:
        name = self.ident()
        return A.fresh("_") if name == "_" else name

    def label(self) -> str:
        t = self.tok
        if t.kind == "label":
            self.i += 1
            return t.text[1:]
        if t.kind == "ident" and t.text[0].isupper():
            self.i += 1
            return t.text
        self.fail(f"expected a label, found {t.text!r}", {"label"})
        raise AssertionError

    def label_set(self) -> frozenset:
        self.expect("{")
        labs = [self.label()]
        while self.accept(","):
            labs.append(self.label())
        self.expect("}")
        return frozenset(labs)

    def arrow(self) -> Mult | None:
        if self.accept("->"):
            return Mult.UN
        if self.accept("-o"):
            return Mult.LIN
        return None

    def is_binder_paren(self) -> bool:
        return self.at("(") and self.peek().kind == "ident" and self.peek(2).text == ":" and self.peek(2).kind == "sym"

    # -- expressions common to both dialects --------------------------------
    def expr0(self) -> A.Expr:
        if self.accept("let"):
            return self.let_bindings()
        if self.accept("fun"):
            self.expect("(")
            x = self.binder()
            self.expect(":")
            ann = self.type0()
            self.expect(")")
            m = self.arrow()
            if m is None:
                self.fail("expected an arrow", {"->", "-o"})
            return A.Lam(m, x, ann, self.expr0())  # type: ignore[arg-type]
        if self.accept("lambda"):
            self.expect("(")
            x = self.binder()
            self.expect(":")
            ann = self.type0()
            self.expect(")")
            self.expect(".")
            return A.Lam(Mult.UN, x, ann, self.expr0())
        return self.expr1()

    def let_bindings(self) -> A.Expr:
        pos = self.tok.pos
        if self.accept("("):
            x = self.binder()
            self.expect(",")
            y = self.binder()
            self.expect(")")
            self.expect("=")
            bound = self.expr0()
            rest = self._let_rest()
            return A.LetPair(x, y, bound, rest)
        del pos
        x = self.binder()
        self.expect("=")
        bound = self.expr0()
        return A.Let(x, bound, self._let_rest())

    def _let_rest(self) -> A.Expr:
        if self.accept(";"):
            if self.at("in"):
                self.i += 1
                return self.expr0()
            return self.let_bindings()
        self.expect("in")
        return self.expr0()

    def expr1(self) -> A.Expr:
        m = self.expr2()
        while self.accept("+"):
            m = A.Add(m, self.expr2())
        return m

    def expr2(self) -> A.Expr:
        if self.accept("-"):
            if self.tok.kind == "int":
                n = int(self.tok.text)
                self.i += 1
                return A.IntLit(-n)
            return A.Neg(self.expr2())
        return self.expr3()

    def starts_atom(self) -> bool:
        t = self.tok
        if t.kind in ("ident", "label", "int", "chan"):
            return True
        return t.kind in ("sym", "kw") and t.text in ("(", "<", "case", "rec", "natrec", "rcase")

    def expr3(self) -> A.Expr:
        head = self.app_head()
        while self.starts_atom():
            head = A.App(head, self.expr4())
        return head

    def require_value(self, m: A.Expr, pos: SourcePos, what: str) -> A.Expr:
        if not self.value_pred(m):
            self.fail(f"{what} must be a value", pos=pos)
        return m

    def value_pred(self, m: A.Expr) -> bool:
        return A.is_value(m)


# ---------------------------------------------------------------------------
# LDGV


class LdgvParser(_Base):
    # -- types ---------------------------------------------------------------
    def type0(self) -> A.Type:
        if self.is_binder_paren():
            self.expect("(")
            x = self.binder()
            self.expect(":")
            dom = self.type0()
            self.expect(")")
            m = self.arrow()
            if m is None:
                self.fail("expected an arrow after a dependent binder", {"->", "-o"})
            return A.Pi(m, x, dom, self.type0())  # type: ignore[arg-type]
        t = self.type1()
        m = self.arrow()
        if m is not None:
            return A.Pi(m, A.fresh("x"), t, self.type0())
        return t

    def _payload(self) -> tuple[str, A.Type]:
        if self.is_binder_paren():
            self.expect("(")
            x = self.binder()
            self.expect(":")
            t = self.type0()
            self.expect(")")
            return x, t
        return A.fresh("x"), self.type2()

    def type1(self) -> A.Type:
        if self.at("!", "?"):
            op = self.tok.text
            self.i += 1
            x, pay = self._payload()
            self.accept(".")
            cont = self.type1()
            return A.Send(x, pay, cont) if op == "!" else A.Recv(x, pay, cont)
        if self.at("dualof"):
            pos = self.tok.pos
            self.i += 1
            t = self.type1()
            try:
                return A.dual(t)
            except A.NotASessionType as e:
                self.fail(str(e), pos=pos)
        if self.at("rec", "natrec"):
            self.i += 1
            v = self.type_value()
            zero = self.type2()
            self.expect("[")
            a = self.ident()
            kind = None
            if self.accept(":"):
                kind = self.kind()
            self.expect("]")
            self.tvars.append(a)
            try:
                succ = self.type1()
            finally:
                self.tvars.pop()
            return A.NatRec(v, zero, a, kind, succ)
        if self.at("Sigma"):
            self.i += 1
            self.expect("(")
            x = self.binder()
            self.expect(":")
            fst = self.type0()
            self.expect(")")
            self.accept(".")
            return A.Sigma(x, fst, self.type1())
        return self.type2()

    def kind(self) -> A.Kind:
        b = self.ident()
        m = self.ident()
        try:
            return A.Kind(A.Base(b), Mult(m))
        except ValueError:
            self.fail(f"unknown kind {b} {m}", {"session", "general", "un", "lin"})
            raise

    def type2(self) -> A.Type:
        t = self.tok
        if t.kind == "kw" and t.text in ("Unit", "Int", "Nat", "End"):
            self.i += 1
            return {"Unit": A.Unit, "Int": A.Int, "Nat": A.Nat, "End": A.End}[t.text]
        if self.at("{"):
            return A.LabelTy(self.label_set())
        if self.at("case"):
            self.i += 1
            v = self.type_value()
            self.expect("of")
            self.expect("{")
            bs = []
            while True:
                lab = self.label()
                self.expect(":")
                bs.append((lab, self.type0()))
                if not self.accept(","):
                    break
            self.expect("}")
            self._check_distinct([b[0] for b in bs], t.pos)
            return A.Case(v, A.branches(bs))
        if self.at("["):
            self.i += 1
            if self.peek().text == ":" and self.tok.kind == "ident":
                x = self.binder()
                self.expect(":")
            else:
                x = A.fresh("x")
            fst = self.type0()
            self.expect(",")
            snd = self.type0()
            self.expect("]")
            return A.Sigma(x, fst, snd)
        if self.at("("):
            # equality type or parenthesised type
            if self._looks_like_eq(self.i + 1):
                self.i += 1
                eq = self.eq_type()
                self.expect(")")
                return eq
            self.i += 1
            ty = self.type0()
            self.expect(")")
            return ty
        if self._looks_like_eq(self.i):
            return self.eq_type()
        if t.kind == "ident":
            self.i += 1
            if t.text in self.tvars:
                return A.TVar(t.text)
            if t.text in self.aliases:
                return self.aliases[t.text]  # type: ignore[return-value]
            self.fail(f"unknown type name {t.text!r}", pos=t.pos, cls=UnknownTypeName)
        self.fail(f"unexpected {t.text!r} in type", {"type"})
        raise AssertionError

    def _looks_like_eq(self, j: int) -> bool:
        t = self.toks[j]
        if t.kind in ("label", "int"):
            return True
        if t.kind == "sym" and t.text == "(" and self.toks[j + 1].text == ")":
            return True
        if t.kind == "ident":
            if t.text == "S" and self.toks[j + 1].text == "(":
                return True
            return self.toks[j + 1].text == "=" and self.toks[j + 1].kind == "sym"
        return False

    def eq_type(self) -> A.Type:
        lhs = self.type_value()
        self.expect("=")
        rhs = self.type_value()
        self.expect(":")
        return A.Eq(self.type2(), lhs, rhs)

    def type_value(self) -> A.Expr:
        """A value in type position: name, label, numeral or unit."""
        t = self.tok
        if t.kind == "label":
            self.i += 1
            return A.LabelV(t.text[1:])
        if t.kind == "int":
            self.i += 1
            return A.nat_lit(int(t.text))
        if self.accept("("):
            self.expect(")")
            return A.UnitV()
        if t.kind == "ident":
            self.i += 1
            if t.text == "Z":
                return A.Zero()
            if t.text == "S" and self.at("("):
                self.i += 1
                v = self.type_value()
                self.expect(")")
                return A.Succ(v)
            if t.text[0].isupper():
                return A.LabelV(t.text)
            return A.Var(t.text)
        self.fail(f"expected a value, found {t.text!r}", {"value"})
        raise AssertionError

    def _check_distinct(self, labs: list[str], pos: SourcePos) -> None:
        if len(set(labs)) != len(labs):
            self.fail("duplicate branch label", pos=pos)

    # -- expressions ---------------------------------------------------------
    def app_head(self) -> A.Expr:
        t = self.tok
        if self.accept("send"):
            return A.SendE(self.expr4())
        if self.accept("recv"):
            return A.RecvE(self.expr4())
        if self.accept("fork"):
            return A.Fork(self.expr4())
        if self.accept("new"):
            return A.New(self.type2())
        if not self.starts_atom():
            self.fail(f"unexpected {t.text!r} in expression", {"expression"})
        return self.expr4()

    def expr4(self) -> A.Expr:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return A.IntLit(int(t.text))
        if t.kind == "label":
            self.i += 1
            return A.LabelV(t.text[1:])
        if t.kind == "chan":
            self.i += 1
            return A.Chan(t.text[1:])
        if t.kind == "ident":
            self.i += 1
            if t.text == "Z":
                return A.Zero()
            if t.text == "S" and self.at("("):
                self.i += 1
                v = self.expr0()
                self.expect(")")
                return A.Succ(v)
            if t.text[0].isupper():
                return A.LabelV(t.text)
            return A.Var(t.text)
        if self.accept("("):
            if self.accept(")"):
                return A.UnitV()
            m = self.expr0()
            if self.accept(","):
                n = self.expr0()
                self.expect(")")
                return self.make_pair(m, n)
            self.expect(")")
            return m
        if self.accept("<"):
            x = self.binder()
            ann = self.type0() if self.accept(":") else None
            self.expect("=")
            pos = self.tok.pos
            v = self.require_value(self.expr0(), pos, "the first pair component")
            self.expect(",")
            n = self.expr0()
            self.expect(">")
            return A.PairE(x, ann, v, n)
        if self.accept("case"):
            pos = self.tok.pos
            v = self.require_value(self.expr4(), pos, "a case scrutinee")
            self.expect("of")
            self.expect("{")
            bs = []
            while True:
                lab = self.label()
                self.expect(":")
                bs.append((lab, self.expr0()))
                if not self.accept(","):
                    break
            self.expect("}")
            self._check_distinct([b[0] for b in bs], t.pos)
            return A.CaseE(v, A.branches(bs))
        if self.accept("rec", "natrec"):
            return self.natrec()
        self.fail(f"unexpected {t.text!r} in expression", {"expression"})
        raise AssertionError

    def make_pair(self, m: A.Expr, n: A.Expr) -> A.Expr:
        if A.is_value(m):
            return A.PairE(A.fresh("x"), None, m, n)
        x = A.fresh("x")
        return A.Let(x, m, A.PairE(A.fresh("x"), None, A.Var(x), n))

    def natrec(self) -> A.Expr:
        pos = self.tok.pos
        v = self.require_value(self.expr4(), pos, "a recursor scrutinee")
        self.expect("{")
        z = self.ident()
        if z != "Z":
            self.fail("expected the zero arm", {"Z"})
        self.expect(":")
        zero = self.expr0()
        self.expect(",")
        s = self.ident()
        if s != "S":
            self.fail("expected the successor arm", {"S"})
        self.expect("(")
        x = self.binder()
        self.expect(")")
        self.expect("with")
        self.expect("[")
        a = self.ident()
        self.expect("]")
        self.expect("(")
        y = self.binder()
        self.expect(":")
        self.tvars.append(a)
        try:
            rt = self.type0()
            self.expect(")")
            self.expect(":")
            succ = self.expr0()
        finally:
            self.tvars.pop()
        self.expect("}")
        return A.NatRecE(v, zero, x, a, y, rt, succ)

    # -- programs ------------------------------------------------------------
    def program(self) -> Program:
        prog = Program()
        sigs: dict[str, tuple[A.Type, SourcePos]] = {}
        defined: set[str] = set()
        while self.tok.kind != "eof":
            start = self.tok.pos
            if self.accept("type"):
                name = self.ident()
                if name in self.aliases:
                    self.fail(f"duplicate type {name!r}", pos=start, cls=DuplicateDefinition)
                self.expect("=")
                ty = self.type0()
                self.aliases[name] = ty
                prog.type_defs.append((name, ty))
                continue
            self.expect("val")
            name = self.ident()
            if self.accept(":"):
                if name in sigs or name in defined:
                    self.fail(f"duplicate signature for {name!r}", pos=start, cls=DuplicateDefinition)
                sigs[name] = (self.type0(), start)
                continue
            if name in defined:
                self.fail(f"duplicate definition of {name!r}", pos=start, cls=DuplicateDefinition)
            params = self.params()
            self.expect("=")
            body = self.expr0()
            declared = sigs.get(name, (None, None))[0]
            body = self.desugar_params(params, declared, body, start)
            prog.term_defs.append(TermDef(name, declared, body, start))
            defined.add(name)
        for name, (_, pos) in sigs.items():
            if name not in defined:
                raise ParseError(f"signature for {name!r} has no definition", pos)
        return prog

    def params(self) -> list:
        out = []
        while True:
            if self.tok.kind == "ident":
                out.append((self.binder(), None))
            elif self.is_binder_paren():
                self.expect("(")
                x = self.binder()
                self.expect(":")
                out.append((x, self.type0()))
                self.expect(")")
            else:
                return out

    def desugar_params(self, params, declared, body, pos):
        ty = declared
        lams = []
        for x, ann in params:
            if ty is not None and isinstance(ty, A.Pi):
                lams.append((ty.mult, x, ann or ty.dom))
                ty = A.subst_type(ty.cod, ty.binder, A.Var(x))
            elif ann is not None:
                lams.append((Mult.UN, x, ann))
                ty = None
            else:
                raise ParseError(f"parameter {x!r} needs a type (no signature covers it)", pos)
        for m, x, ann in reversed(lams):
            body = A.Lam(m, x, ann, body)
        return body


def parse_ldgv(text: str) -> Program:
    return LdgvParser(text).program()


def parse_type(text: str, aliases: dict | None = None) -> A.Type:
    p = LdgvParser(text)
    p.aliases = dict(aliases or {})
    t = p.type0()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.tok.text!r} after type", {"<eof>"})
    return t


def parse_expr(text: str, aliases: dict | None = None) -> A.Expr:
    p = LdgvParser(text)
    p.aliases = dict(aliases or {})
    m = p.expr0()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.tok.text!r} after expression", {"<eof>"})
    return m


# ---------------------------------------------------------------------------
# LSST


class LsstParser(_Base):
    def type0(self):
        from .lsst import syntax as L

        t = self.type1()
        m = self.arrow()
        if m is not None:
            return L.LFun(m, t, self.type0())
        return t

    def type1(self):
        from .lsst import syntax as L

        t = self.type2()
        if self.accept("*"):
            return L.LProd(t, self.type1())
        return t

    def type2(self):
        from .lsst import syntax as L

        if self.at("!", "?"):
            op = self.tok.text
            self.i += 1
            pay = self.type3()
            self.accept(".")
            cont = self.type2()
            return L.LSend(pay, cont) if op == "!" else L.LRecv(pay, cont)
        if self.at("dualof"):
            pos = self.tok.pos
            self.i += 1
            t = self.type2()
            try:
                return L.lsst_dual(t)
            except A.NotASessionType as e:
                self.fail(str(e), pos=pos)
        return self.type3()

    def type3(self):
        from .lsst import syntax as L

        t = self.tok
        if self.accept("Unit"):
            return L.LUnit()
        if self.accept("Int"):
            return L.LInt()
        if self.accept("end!"):
            return L.LEndOut()
        if self.accept("end?"):
            return L.LEndIn()
        if self.at("(+)", "+", "&"):
            op = self.tok.text
            self.i += 1
            self.expect("{")
            bs = []
            while True:
                lab = self.label()
                self.expect(":")
                bs.append((lab, self.type0()))
                if not self.accept(","):
                    break
            self.expect("}")
            if len({b[0] for b in bs}) != len(bs):
                self.fail("duplicate branch label", pos=t.pos)
            bt = A.branches(bs)
            return L.LBranch(bt) if op == "&" else L.LSelect(bt)
        if self.accept("("):
            ty = self.type0()
            self.expect(")")
            return ty
        if t.kind == "ident":
            self.i += 1
            if t.text in self.aliases:
                return self.aliases[t.text]
            self.fail(f"unknown type name {t.text!r}", pos=t.pos, cls=UnknownTypeName)
        self.fail(f"unexpected {t.text!r} in type", {"type"})

    def value_pred(self, m):
        from .lsst.syntax import lsst_is_value

        return lsst_is_value(m)

    def starts_atom(self) -> bool:
        return super().starts_atom() and not self.at("rec", "natrec")

    def app_head(self):
        from .lsst import syntax as L

        t = self.tok
        if self.accept("send"):
            return A.SendE(self.expr4())
        if self.accept("recv"):
            return A.RecvE(self.expr4())
        if self.accept("fork"):
            return A.Fork(self.expr4())
        if self.accept("close"):
            return L.Close(self.expr4())
        if self.accept("wait"):
            return L.Wait(self.expr4())
        if self.accept("new"):
            return L.LNew(self.type3())
        if self.accept("select"):
            return L.Select(self.label())
        if not self.starts_atom():
            self.fail(f"unexpected {t.text!r} in expression", {"expression"})
        return self.expr4()

    def expr4(self):
        from .lsst import syntax as L

        t = self.tok
        if t.kind == "int":
            self.i += 1
            return A.IntLit(int(t.text))
        if t.kind == "chan":
            self.i += 1
            return A.Chan(t.text[1:])
        if t.kind == "label":
            self.i += 1
            return A.LabelV(t.text[1:])
        if t.kind == "ident":
            self.i += 1
            if t.text[0].isupper():
                self.fail("labels are not first-class in LSST", pos=t.pos)
            return A.Var(t.text)
        if self.accept("("):
            if self.accept(")"):
                return A.UnitV()
            m = self.expr0()
            if self.accept(","):
                n = self.expr0()
                self.expect(")")
                return L.LPair(m, n)
            self.expect(")")
            return m
        if self.accept("rcase"):
            chan = self.expr4()
            self.expect("of")
            self.expect("{")
            bs = []
            while True:
                lab = self.label()
                self.expect(":")
                x = self.binder()
                self.expect(".")
                bs.append((lab, L.RBranch(x, self.expr0())))
                if not self.accept(","):
                    break
            self.expect("}")
            if len({b[0] for b in bs}) != len(bs):
                self.fail("duplicate branch label", pos=t.pos)
            return L.RCase(chan, A.branches(bs))
        self.fail(f"unexpected {t.text!r} in expression", {"expression"})

    def program(self):
        from .lsst import syntax as L

        prog = L.LsstProgram()
        sigs: dict = {}
        defined: set = set()
        while self.tok.kind != "eof":
            start = self.tok.pos
            if self.accept("type"):
                name = self.ident()
                if name in self.aliases:
                    self.fail(f"duplicate type {name!r}", pos=start, cls=DuplicateDefinition)
                self.expect("=")
                ty = self.type0()
                self.aliases[name] = ty
                prog.type_defs.append((name, ty))
                continue
            self.expect("val")
            name = self.ident()
            if self.accept(":"):
                if name in sigs or name in defined:
                    self.fail(f"duplicate signature for {name!r}", pos=start, cls=DuplicateDefinition)
                sigs[name] = (self.type0(), start)
                continue
            if name in defined:
                self.fail(f"duplicate definition of {name!r}", pos=start, cls=DuplicateDefinition)
            params = []
            while True:
                if self.tok.kind == "ident":
                    params.append((self.binder(), None))
                elif self.is_binder_paren():
                    self.expect("(")
                    x = self.binder()
                    self.expect(":")
                    params.append((x, self.type0()))
                    self.expect(")")
                else:
                    break
            self.expect("=")
            body = self.expr0()
            declared = sigs.get(name, (None, None))[0]
            ty, lams = declared, []
            for x, ann in params:
                if isinstance(ty, L.LFun):
                    lams.append((ty.mult, x, ann or ty.dom))
                    ty = ty.cod
                elif ann is not None:
                    lams.append((Mult.UN, x, ann))
                    ty = None
                else:
                    raise ParseError(f"parameter {x!r} needs a type (no signature covers it)", start)
            for m, x, ann in reversed(lams):
                body = A.Lam(m, x, ann, body)
            prog.term_defs.append(L.LsstDef(name, declared, body, start))
            defined.add(name)
        for name, (_, pos) in sigs.items():
            if name not in defined:
                raise ParseError(f"signature for {name!r} has no definition", pos)
        return prog


def parse_lsst(text: str):
    return LsstParser(text).program()


def parse_lsst_type(text: str, aliases: dict | None = None):
    p = LsstParser(text)
    p.aliases = dict(aliases or {})
    t = p.type0()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.tok.text!r} after type", {"<eof>"})
    return t


def parse_lsst_expr(text: str):
    p = LsstParser(text)
    m = p.expr0()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.tok.text!r} after expression", {"<eof>"})
    return m
