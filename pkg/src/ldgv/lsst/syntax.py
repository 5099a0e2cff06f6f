"""Syntax of LSST, the classical synchronous session calculus.

Expression nodes reuse the LDGV value/expression classes where the two
languages coincide (names, unit, integers, lambdas, application, pairs, lets,
fork, send, recv); only the LSST-specific primitives and the LSST types are
defined here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import ast as A
from ..ast import Mult, Node

# ---------------------------------------------------------------------------
# Types


class LType(Node):
    pass


@dataclass(frozen=True)
class LUnit(LType):
    pass


@dataclass(frozen=True)
class LInt(LType):
    pass


@dataclass(frozen=True)
class LFun(LType):
    mult: Mult
    dom: LType
    cod: LType


@dataclass(frozen=True)
class LProd(LType):
    fst: LType
    snd: LType


@dataclass(frozen=True)
class LSend(LType):
    payload: LType
    cont: LType


@dataclass(frozen=True)
class LRecv(LType):
    payload: LType
    cont: LType


@dataclass(frozen=True)
class LSelect(LType):
    branches: tuple


@dataclass(frozen=True)
class LBranch(LType):
    branches: tuple


@dataclass(frozen=True)
class LEndOut(LType):
    pass


@dataclass(frozen=True)
class LEndIn(LType):
    pass


def is_lsession(t: LType) -> bool:
    return isinstance(t, (LSend, LRecv, LSelect, LBranch, LEndOut, LEndIn))


def lsst_dual(s: LType) -> LType:
    if isinstance(s, LSend):
        return LRecv(s.payload, lsst_dual(s.cont))
    if isinstance(s, LRecv):
        return LSend(s.payload, lsst_dual(s.cont))
    if isinstance(s, LSelect):
        return LBranch(tuple((lab, lsst_dual(b)) for lab, b in s.branches))
    if isinstance(s, LBranch):
        return LSelect(tuple((lab, lsst_dual(b)) for lab, b in s.branches))
    if isinstance(s, LEndOut):
        return LEndIn()
    if isinstance(s, LEndIn):
        return LEndOut()
    raise A.NotASessionType(f"not a session type: {show_lsst(s)}")


def lsst_is_lin(t: LType) -> bool:
    if isinstance(t, (LUnit, LInt)):
        return False
    if isinstance(t, LFun):
        return t.mult is Mult.LIN
    if isinstance(t, LProd):
        return lsst_is_lin(t.fst) or lsst_is_lin(t.snd)
    return True


def lsst_sub(a: LType, b: LType) -> bool:
    if isinstance(a, (LUnit, LInt, LEndOut, LEndIn)):
        return type(a) is type(b)
    if isinstance(a, LFun) and isinstance(b, LFun):
        return a.mult <= b.mult and lsst_sub(b.dom, a.dom) and lsst_sub(a.cod, b.cod)
    if isinstance(a, LProd) and isinstance(b, LProd):
        return lsst_sub(a.fst, b.fst) and lsst_sub(a.snd, b.snd)
    if isinstance(a, LSend) and isinstance(b, LSend):
        return lsst_sub(b.payload, a.payload) and lsst_sub(a.cont, b.cont)
    if isinstance(a, LRecv) and isinstance(b, LRecv):
        return lsst_sub(a.payload, b.payload) and lsst_sub(a.cont, b.cont)
    if isinstance(a, LSelect) and isinstance(b, LSelect):
        da, db = dict(a.branches), dict(b.branches)
        return set(db) <= set(da) and all(lsst_sub(da[lab], db[lab]) for lab in db)
    if isinstance(a, LBranch) and isinstance(b, LBranch):
        da, db = dict(a.branches), dict(b.branches)
        return set(da) <= set(db) and all(lsst_sub(da[lab], db[lab]) for lab in da)
    return False


# ---------------------------------------------------------------------------
# LSST-only expressions.  LSST lambdas reuse ast.Lam with an LType annotation.


@dataclass(frozen=True)
class Select(A.Value):
    label: str
    # the internal-choice type of the channel, filled in by the checker
    annot: LType | None = None


@dataclass(frozen=True)
class RCase(A.Expr):
    chan: A.Expr
    # tuple of (label, RBranch)
    branches: tuple


@dataclass(frozen=True)
class RBranch(Node):
    binder: str
    body: A.Expr
    _binds = (("binder", "term", ("body",)),)


@dataclass(frozen=True)
class Close(A.Expr):
    chan: A.Expr


@dataclass(frozen=True)
class Wait(A.Expr):
    chan: A.Expr


@dataclass(frozen=True)
class LPair(A.Expr):
    """Non-dependent LSST pair ``(M, N)``."""

    fst: A.Expr
    snd: A.Expr


@dataclass(frozen=True)
class LNew(A.Expr):
    annot: LType


def lsst_is_value(m: A.Expr) -> bool:
    if isinstance(m, LPair):
        return lsst_is_value(m.fst) and lsst_is_value(m.snd)
    if isinstance(m, A.SendE):
        return lsst_is_value(m.chan)
    return isinstance(m, A.Value)


@dataclass
class LsstDef:
    name: str
    declared: LType | None
    body: A.Expr
    pos: object = None


@dataclass
class LsstProgram:
    type_defs: list = field(default_factory=list)
    term_defs: list = field(default_factory=list)

    @property
    def main(self) -> A.Expr | None:
        for d in self.term_defs:
            if d.name == "main":
                return d.body
        return None


# ---------------------------------------------------------------------------
# Printing


def _branches(bs, fn) -> str:
    return "{" + ", ".join(f"{lab}: {fn(b)}" for lab, b in bs) + "}"


def _lty(t: LType, lvl: int = 0) -> str:
    s, own = _lty_raw(t)
    return s if own >= lvl else f"({s})"


def _lty_raw(t: LType) -> tuple[str, int]:
    if isinstance(t, LUnit):
        return "Unit", 3
    if isinstance(t, LInt):
        return "Int", 3
    if isinstance(t, LEndOut):
        return "end!", 3
    if isinstance(t, LEndIn):
        return "end?", 3
    if isinstance(t, LSelect):
        return "(+)" + _branches(t.branches, _lty), 3
    if isinstance(t, LBranch):
        return "&" + _branches(t.branches, _lty), 3
    if isinstance(t, LSend):
        return f"!{_lty(t.payload, 3)}. {_lty(t.cont, 2)}", 2
    if isinstance(t, LRecv):
        return f"?{_lty(t.payload, 3)}. {_lty(t.cont, 2)}", 2
    if isinstance(t, LProd):
        return f"{_lty(t.fst, 2)} * {_lty(t.snd, 1)}", 1
    if isinstance(t, LFun):
        arrow = "->" if t.mult is Mult.UN else "-o"
        return f"{_lty(t.dom, 1)} {arrow} {_lty(t.cod, 0)}", 0
    raise TypeError(f"cannot print {t!r}")


class _LPrinter:
    def __init__(self) -> None:
        self.names: dict[str, str] = {}

    def bind(self, name: str, scope: list) -> tuple[str, dict]:
        avoid = set()
        for node in scope:
            for other in A.free_names(node):
                if other != name:
                    avoid.add(self.names.get(other, other))
        base = A.base_name(name)
        shown, i = base, 0
        while shown in avoid:
            i += 1
            shown = f"{base}{i}"
        saved = dict(self.names)
        self.names[name] = shown
        return shown, saved

    def expr(self, m: A.Expr, lvl: int = 0) -> str:
        s, own = self.raw(m)
        return s if own >= lvl else f"({s})"

    def raw(self, m: A.Expr) -> tuple[str, int]:
        if isinstance(m, A.Var):
            return self.names.get(m.name, m.name), 4
        if isinstance(m, A.Chan):
            return f"@{m.name}", 4
        if isinstance(m, A.UnitV):
            return "()", 4
        if isinstance(m, A.IntLit):
            return (str(m.value), 4) if m.value >= 0 else (f"(-{-m.value})", 4)
        if isinstance(m, A.LabelV):
            return f"'{m.label}", 4
        if isinstance(m, A.Lam):
            ann = _lty(m.annot)
            x, saved = self.bind(m.binder, [m.body])
            body = self.expr(m.body)
            self.names = saved
            arrow = "->" if m.mult is Mult.UN else "-o"
            return f"fun ({x}:{ann}) {arrow} {body}", 0
        if isinstance(m, A.App):
            return f"{self.expr(m.fun, 3)} {self.expr(m.arg, 4)}", 3
        if isinstance(m, LPair):
            return f"({self.expr(m.fst)}, {self.expr(m.snd)})", 4
        if isinstance(m, A.LetPair):
            bound = self.expr(m.bound)
            x, saved = self.bind(m.fst, [m.body])
            y, _ = self.bind(m.snd, [m.body, A.Var(m.fst)])
            body = self.expr(m.body)
            self.names = saved
            return f"let ({x}, {y}) = {bound} in {body}", 0
        if isinstance(m, A.Let):
            bound = self.expr(m.bound)
            x, saved = self.bind(m.name, [m.body])
            body = self.expr(m.body)
            self.names = saved
            return f"let {x} = {bound} in {body}", 0
        if isinstance(m, LNew):
            return f"new {_lty(m.annot, 3)}", 3
        if isinstance(m, A.Fork):
            return f"fork {self.expr(m.body, 4)}", 3
        if isinstance(m, A.SendE):
            return f"send {self.expr(m.chan, 4)}", 3
        if isinstance(m, A.RecvE):
            return f"recv {self.expr(m.chan, 4)}", 3
        if isinstance(m, Select):
            return f"select {m.label}", 3
        if isinstance(m, Close):
            return f"close {self.expr(m.chan, 4)}", 3
        if isinstance(m, Wait):
            return f"wait {self.expr(m.chan, 4)}", 3
        if isinstance(m, RCase):
            parts = []
            for lab, br in m.branches:
                x, saved = self.bind(br.binder, [br.body])
                parts.append(f"{lab}: {x}. {self.expr(br.body)}")
                self.names = saved
            return f"rcase {self.expr(m.chan, 4)} of {{{', '.join(parts)}}}", 4
        if isinstance(m, A.Neg):
            return (f"-{self.expr(m.body, 4)}" if not isinstance(m.body, A.IntLit) else f"-({self.expr(m.body)})"), 2
        if isinstance(m, A.Add):
            return f"{self.expr(m.left, 1)} + {self.expr(m.right, 2)}", 1
        raise TypeError(f"cannot print {m!r}")


def show_lsst(node: Node) -> str:
    if isinstance(node, LType):
        return _lty(node)
    return _LPrinter().expr(node)  # type: ignore[arg-type]


def show_lsst_program(prog: LsstProgram) -> str:
    lines = [f"type {n} = {_lty(t)}" for n, t in prog.type_defs]
    for d in prog.term_defs:
        if d.declared is not None:
            lines.append(f"val {d.name} : {_lty(d.declared)}")
        lines.append(f"val {d.name} = {show_lsst(d.body)}")
    return "\n".join(lines) + ("\n" if lines else "")
