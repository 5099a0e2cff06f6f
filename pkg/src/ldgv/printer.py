"""Pretty printer emitting the concrete LDGV syntax accepted by the parser."""

from __future__ import annotations

from . import ast as A


class _Printer:
    def __init__(self, root: A.Node):
        # display name for every bound name currently in scope
        self.names: dict[tuple[str, str], str] = {}
        self.root_free = A.free_names(root, "term") | A.free_names(root, "type")

    # -- binders -------------------------------------------------------------
    def bind(self, ns: str, name: str, scope: list[A.Node]) -> tuple[str, dict]:
        avoid: set[str] = set()
        for node in scope:
            if node is None:
                continue
            for other in A.free_names(node, ns):
                if other != name:
                    avoid.add(self.names.get((ns, other), other))
            other_ns = "type" if ns == "term" else "term"
            for other in A.free_names(node, other_ns):
                avoid.add(self.names.get((other_ns, other), other))
        base = A.base_name(name)
        if not (base[0].islower() or base[0] == "_"):
            base = "x" + base
        shown, i = base, 0
        while shown in avoid:
            i += 1
            shown = f"{base}{i}"
        saved = dict(self.names)
        self.names[(ns, name)] = shown
        return shown, saved

    def var(self, ns: str, name: str) -> str:
        return self.names.get((ns, name), name)

    # -- values shared by types and terms -------------------------------------
    def label(self, lab: str) -> str:
        return f"'{lab}"

    # -- types ---------------------------------------------------------------
    def ty(self, t: A.Type, lvl: int = 0) -> str:
        s, own = self._ty(t)
        return s if own >= lvl else f"({s})"

    def _ty(self, t: A.Type) -> tuple[str, int]:
        if isinstance(t, A.UnitT):
            return "Unit", 2
        if isinstance(t, A.IntT):
            return "Int", 2
        if isinstance(t, A.NatT):
            return "Nat", 2
        if isinstance(t, A.EndT):
            return "End", 2
        if isinstance(t, A.LabelTy):
            return "{" + ", ".join(sorted(t.labels)) + "}", 2
        if isinstance(t, A.Eq):
            return f"({self.expr(t.lhs, 3)} = {self.expr(t.rhs, 3)} : {self.ty(t.index, 2)})", 2
        if isinstance(t, A.TVar):
            n = self.var("type", t.name)
            return (n, 2) if t.pol is A.Polarity.POS else (f"dualof {n}", 1)
        if isinstance(t, A.Case):
            bs = ", ".join(f"{lab}: {self.ty(b)}" for lab, b in t.branches)
            return f"case {self.expr(t.scrutinee, 3)} of {{{bs}}}", 2
        if isinstance(t, A.Pi):
            arrow = "->" if t.mult is A.Mult.UN else "-o"
            dom = self.ty(t.dom, 1) if t.binder not in A.free_names(t.cod) else None
            if dom is not None:
                return f"{dom} {arrow} {self.ty(t.cod)}", 0
            full_dom = self.ty(t.dom)
            x, saved = self.bind("term", t.binder, [t.cod])
            cod = self.ty(t.cod)
            self.names = saved
            return f"({x}:{full_dom}) {arrow} {cod}", 0
        if isinstance(t, A.Sigma):
            fst = self.ty(t.fst)
            if t.binder not in A.free_names(t.snd):
                return f"[{fst}, {self.ty(t.snd)}]", 2
            x, saved = self.bind("term", t.binder, [t.snd])
            snd = self.ty(t.snd)
            self.names = saved
            return f"[{x}:{fst}, {snd}]", 2
        if isinstance(t, (A.Send, A.Recv)):
            op = "!" if isinstance(t, A.Send) else "?"
            if t.binder not in A.free_names(t.cont):
                return f"{op}{self.ty(t.payload, 2)}. {self.ty(t.cont, 1)}", 1
            pay = self.ty(t.payload)
            x, saved = self.bind("term", t.binder, [t.cont])
            cont = self.ty(t.cont, 1)
            self.names = saved
            return f"{op}({x}:{pay}). {cont}", 1
        if isinstance(t, A.NatRec):
            zero = self.ty(t.zero, 2)
            a, saved = self.bind("type", t.tvar, [t.succ])
            succ = self.ty(t.succ, 1)
            self.names = saved
            kind = f" : {t.kind}" if t.kind is not None else ""
            return f"rec {self.expr(t.scrutinee, 3)} {zero} [{a}{kind}] {succ}", 1
        raise TypeError(f"cannot print {t!r}")

    # -- expressions ---------------------------------------------------------
    def expr(self, m: A.Expr, lvl: int = 0) -> str:
        s, own = self._expr(m)
        return s if own >= lvl else f"({s})"

    def _expr(self, m: A.Expr) -> tuple[str, int]:
        if isinstance(m, A.Var):
            return self.var("term", m.name), 4
        if isinstance(m, A.Chan):
            return f"@{m.name}", 4
        if isinstance(m, A.LabelV):
            return self.label(m.label), 4
        if isinstance(m, A.UnitV):
            return "()", 4
        if isinstance(m, A.IntLit):
            return (str(m.value), 4) if m.value >= 0 else (f"(-{-m.value})", 4)
        if isinstance(m, A.Zero):
            return "Z", 4
        if isinstance(m, A.Succ):
            return f"S({self.expr(m.pred)})", 4
        if isinstance(m, A.Lam):
            ann = self.ty(m.annot)
            x, saved = self.bind("term", m.binder, [m.body])
            body = self.expr(m.body)
            self.names = saved
            arrow = "->" if m.mult is A.Mult.UN else "-o"
            return f"fun ({x}:{ann}) {arrow} {body}", 0
        if isinstance(m, A.CaseE):
            bs = ", ".join(f"{lab}: {self.expr(b)}" for lab, b in m.branches)
            return f"case {self.expr(m.scrutinee, 4)} of {{{bs}}}", 4
        if isinstance(m, A.App):
            return f"{self.expr(m.fun, 3)} {self.expr(m.arg, 4)}", 3
        if isinstance(m, A.PairE):
            fst = self.expr(m.fst)
            ann = f" : {self.ty(m.annot)}" if m.annot is not None else ""
            x, saved = self.bind("term", m.binder, [m.snd])
            snd = self.expr(m.snd)
            self.names = saved
            return f"<{x}{ann} = {fst}, {snd}>", 4
        if isinstance(m, A.LetPair):
            bound = self.expr(m.bound)
            x, saved = self.bind("term", m.fst, [m.body])
            y, _ = self.bind("term", m.snd, [m.body])
            if y == x:
                y, _ = self.bind("term", m.snd, [m.body, A.Var(m.fst)])
            body = self.expr(m.body)
            self.names = saved
            return f"let ({x}, {y}) = {bound} in {body}", 0
        if isinstance(m, A.Let):
            bound = self.expr(m.bound)
            x, saved = self.bind("term", m.name, [m.body])
            body = self.expr(m.body)
            self.names = saved
            return f"let {x} = {bound} in {body}", 0
        if isinstance(m, A.New):
            return f"new {self.ty(m.annot, 2)}", 3
        if isinstance(m, A.Fork):
            return f"fork {self.expr(m.body, 4)}", 3
        if isinstance(m, A.SendE):
            return f"send {self.expr(m.chan, 4)}", 3
        if isinstance(m, A.RecvE):
            return f"recv {self.expr(m.chan, 4)}", 3
        if isinstance(m, A.Neg):
            return f"-{self.expr(m.body, 4)}" if not isinstance(m.body, A.IntLit) else f"-({self.expr(m.body)})", 2
        if isinstance(m, A.Add):
            return f"{self.expr(m.left, 1)} + {self.expr(m.right, 2)}", 1
        if isinstance(m, A.NatRecE):
            scr = self.expr(m.scrutinee, 4)
            zero = self.expr(m.zero)
            saved = dict(self.names)
            scope = [m.succ, m.rec_type]
            x, _ = self.bind("term", m.pred, scope)
            y, _ = self.bind("term", m.rec, scope + [A.Var(m.pred)])
            a, _ = self.bind("type", m.tvar, scope)
            rt = self.ty(m.rec_type)
            succ = self.expr(m.succ)
            self.names = saved
            return f"natrec {scr} {{Z: {zero}, S({x}) with [{a}]({y}:{rt}): {succ}}}", 4
        raise TypeError(f"cannot print {m!r}")

    # -- processes -----------------------------------------------------------
    def proc(self, p: A.Process) -> str:
        if isinstance(p, A.ProcE):
            return f"<{self.expr(p.expr)}>"
        if isinstance(p, A.Par):
            return f"{self.proc(p.left)} | {self.proc(p.right)}"
        if isinstance(p, A.Nu):
            ann = f" : {self.ty(p.annot)}" if p.annot is not None else ""
            return f"(nu @{p.c} @{p.d}{ann}) ({self.proc(p.body)})"
        raise TypeError(f"cannot print {p!r}")


def show(node: A.Node) -> str:
    pr = _Printer(node)
    if isinstance(node, A.Type):
        return pr.ty(node)
    if isinstance(node, A.Expr):
        return pr.expr(node)
    if isinstance(node, A.Process):
        return pr.proc(node)
    # LSST nodes bring their own printer
    from .lsst.syntax import show_lsst

    return show_lsst(node)


def show_program(prog) -> str:
    lines = []
    for name, ty in prog.type_defs:
        lines.append(f"type {name} = {show(ty)}")
    for d in prog.term_defs:
        if d.declared is not None:
            lines.append(f"val {d.name} : {show(d.declared)}")
        lines.append(f"val {d.name} = {show(d.body)}")
    return "\n".join(lines) + ("\n" if lines else "")
