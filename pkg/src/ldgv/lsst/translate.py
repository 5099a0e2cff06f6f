"""Typed translation from LSST into LDGV."""

from __future__ import annotations

from .. import ast as A
from ..ast import Mult
from ..parser import Program, TermDef
from . import syntax as L

EOS = "EOS"


def translate_type(t: L.LType) -> A.Type:
    if isinstance(t, L.LUnit):
        return A.Unit
    if isinstance(t, L.LInt):
        return A.Int
    if isinstance(t, L.LFun):
        return A.Pi(t.mult, A.fresh("x"), translate_type(t.dom), translate_type(t.cod))
    if isinstance(t, L.LProd):
        return A.Sigma(A.fresh("x"), translate_type(t.fst), translate_type(t.snd))
    if isinstance(t, L.LSend):
        return A.Send(A.fresh("x"), translate_type(t.payload), translate_type(t.cont))
    if isinstance(t, L.LRecv):
        return A.Recv(A.fresh("x"), translate_type(t.payload), translate_type(t.cont))
    if isinstance(t, (L.LSelect, L.LBranch)):
        x = A.fresh("l")
        labs = A.LabelTy(frozenset(lab for lab, _ in t.branches))
        body = A.Case(A.Var(x), A.branches((lab, translate_type(s)) for lab, s in t.branches))
        return (A.Send if isinstance(t, L.LSelect) else A.Recv)(x, labs, body)
    if isinstance(t, L.LEndOut):
        return A.Send(A.fresh("x"), A.labels(EOS), A.End)
    if isinstance(t, L.LEndIn):
        return A.Recv(A.fresh("x"), A.labels(EOS), A.End)
    raise TypeError(f"not an LSST type: {t!r}")


def translate_expr(m: A.Expr) -> A.Expr:
    tr = translate_expr
    if isinstance(m, (A.Var, A.Chan, A.UnitV, A.IntLit)):
        return m
    if isinstance(m, A.Lam):
        return A.Lam(m.mult, m.binder, translate_type(m.annot), tr(m.body))
    if isinstance(m, L.Select):
        if m.annot is None:
            raise ValueError(f"select {m.label} carries no channel type; run the LSST checker first")
        x = A.fresh("x")
        return A.Lam(Mult.LIN, x, translate_type(m.annot), A.App(A.SendE(A.Var(x)), A.LabelV(m.label)))
    if isinstance(m, A.App):
        return A.App(tr(m.fun), tr(m.arg))
    if isinstance(m, (L.LPair, A.PairE)):
        fst, snd = tr(m.fst), tr(m.snd)
        if A.is_value(fst):
            return A.PairE(A.fresh("x"), None, fst, snd)
        x = A.fresh("x")
        return A.Let(x, fst, A.PairE(A.fresh("x"), None, A.Var(x), snd))
    if isinstance(m, A.LetPair):
        return A.LetPair(m.fst, m.snd, tr(m.bound), tr(m.body))
    if isinstance(m, A.Let):
        return A.Let(m.name, tr(m.bound), tr(m.body))
    if isinstance(m, A.Fork):
        return A.Fork(tr(m.body))
    if isinstance(m, L.LNew):
        return A.New(translate_type(m.annot))
    if isinstance(m, A.SendE):
        return A.SendE(tr(m.chan))
    if isinstance(m, A.RecvE):
        return A.RecvE(tr(m.chan))
    if isinstance(m, L.RCase):
        x, y = A.fresh("l"), A.fresh("c")
        arms = A.branches(
            (lab, A.subst_expr(tr(rb.body), rb.binder, A.Var(y))) for lab, rb in m.branches
        )
        return A.LetPair(x, y, A.RecvE(tr(m.chan)), A.CaseE(A.Var(x), arms))
    if isinstance(m, L.Close):
        return A.App(A.SendE(tr(m.chan)), A.LabelV(EOS))
    if isinstance(m, L.Wait):
        return A.LetPair(A.fresh("x"), A.fresh("c"), A.RecvE(tr(m.chan)), A.UnitV())
    if isinstance(m, A.Neg):
        return A.Neg(tr(m.body))
    if isinstance(m, A.Add):
        return A.Add(tr(m.left), tr(m.right))
    raise TypeError(f"not an LSST expression: {m!r}")


def translate(tp) -> Program:
    """Translate a checked LSST program (see ``lsst_type_check``)."""
    prog = tp.program if hasattr(tp, "program") else tp
    out = Program()
    for name, t in prog.type_defs:
        out.type_defs.append((name, translate_type(t)))
    for d in prog.term_defs:
        declared = translate_type(d.declared) if d.declared is not None else None
        out.term_defs.append(TermDef(d.name, declared, translate_expr(d.body), d.pos))
    return out
