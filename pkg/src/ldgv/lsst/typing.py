"""Bidirectional typing for LSST with input/output environments.

The only elaboration performed is recording, on every ``select``, the
internal-choice type of the channel it is applied to; the translation needs
that type to build the image of ``select``.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, replace

from .. import ast as A
from ..ast import Mult
from ..checker import CheckError, DefResult, Report
from ..env import EMPTY, TermBind, TypeEnv, consume
from . import syntax as L
from .syntax import show_lsst


@dataclass
class TypedLsstProgram:
    program: L.LsstProgram
    report: Report


def _same(a: L.LType, b: L.LType) -> bool:
    return L.lsst_sub(a, b) and L.lsst_sub(b, a)


def _same_env(g1: TypeEnv, g2: TypeEnv) -> str | None:
    d1 = {e.name: e.type for e in g1.entries}
    d2 = {e.name: e.type for e in g2.entries}
    for name in list(d1) + list(d2):
        if name not in d1 or name not in d2 or not _same(d1[name], d2[name]):
            return name
    return None


class LsstChecker:
    def __init__(self) -> None:
        self._trace: list[str] = []
        self._bound: set[str] = set()

    @contextmanager
    def rule(self, name: str):
        self._trace.append(name)
        try:
            yield
        finally:
            self._trace.pop()

    def err(self, code: str, message: str, env: TypeEnv | None = None) -> CheckError:
        return CheckError(code, message, None, list(self._trace) or ["<top>"], env)

    def _ext(self, env: TypeEnv, x: str, t: L.LType) -> TypeEnv:
        self._bound.add(x)
        return env.extend(x, t, L.lsst_is_lin(t))

    def _drop(self, env: TypeEnv, entry: TermBind, what: str) -> TypeEnv:
        for i, e in enumerate(env.entries):
            if e is entry:
                if e.lin:
                    raise self.err("LinearityViolation", f"linear {what} {A.base_name(e.name)} is never consumed", env)
                return TypeEnv(env.entries[:i] + env.entries[i + 1 :])
        return env

    def _lookup(self, env: TypeEnv, name: str, shown: str):
        e = env.entry(name)
        if e is None:
            if name in self._bound:
                raise self.err("LinearityViolation", f"linear name {shown} used after it was consumed", env)
            raise self.err("UnboundName", f"unbound name {shown}", env)
        return e.type, (consume(env, name) if e.lin else env)

    def _expect(self, env: TypeEnv, got: L.LType, want: L.LType) -> None:
        with self.rule("GV-Sub"):
            if not L.lsst_sub(got, want):
                raise self.err("NotASubtype", f"{show_lsst(got)} is not a subtype of {show_lsst(want)}", env)

    def _session(self, env: TypeEnv, t: L.LType, cls, what: str):
        if not isinstance(t, cls):
            raise self.err("NotASubtype", f"{what} on a value of type {show_lsst(t)}", env)
        return t

    # -- synthesis -----------------------------------------------------------
    def synth(self, env: TypeEnv, m: A.Expr) -> tuple[L.LType, TypeEnv, A.Expr]:
        if isinstance(m, A.Var):
            with self.rule("GV-Name"):
                t, out = self._lookup(env, m.name, m.name)
                return t, out, m
        if isinstance(m, A.Chan):
            with self.rule("GV-Name"):
                t, out = self._lookup(env, "@" + m.name, "@" + m.name)
                return t, out, m
        if isinstance(m, A.UnitV):
            return L.LUnit(), env, m
        if isinstance(m, A.IntLit):
            return L.LInt(), env, m
        if isinstance(m, A.Lam):
            with self.rule("GV-Abs"):
                inner = self._ext(env, m.binder, m.annot)
                param = inner.entries[-1]
                t, out, body = self.synth(inner, m.body)
                out = self._drop(out, param, "parameter")
                if m.mult is Mult.UN and out.entries != env.entries:
                    raise self.err("LinearityViolation", "unrestricted function consumes linear resources", env)
                return L.LFun(m.mult, m.annot, t), out, replace(m, body=body)
        if isinstance(m, A.App):
            if isinstance(m.fun, L.Select):
                with self.rule("GV-Select"):
                    t, out, arg = self.synth(env, m.arg)
                    sel = self._session(env, t, L.LSelect, f"select {m.fun.label}")
                    cont = dict(sel.branches).get(m.fun.label)
                    if cont is None:
                        raise self.err("NotASubtype", f"{show_lsst(sel)} offers no {m.fun.label}", env)
                    return cont, out, A.App(replace(m.fun, annot=sel), arg)
            with self.rule("GV-App"):
                ft, out1, fun = self.synth(env, m.fun)
                f = self._session(env, ft, L.LFun, "application")
                out2, arg = self.check(out1, m.arg, f.dom)
                return f.cod, out2, A.App(fun, arg)
        if isinstance(m, L.LPair):
            with self.rule("GV-Pair"):
                t1, out1, a = self.synth(env, m.fst)
                t2, out2, b = self.synth(out1, m.snd)
                return L.LProd(t1, t2), out2, L.LPair(a, b)
        if isinstance(m, A.PairE):
            # runtime pairs produced by communication
            with self.rule("GV-Pair"):
                t1, out1, a = self.synth(env, m.fst)
                t2, out2, b = self.synth(out1, m.snd)
                return L.LProd(t1, t2), out2, replace(m, fst=a, snd=b)
        if isinstance(m, A.LetPair):
            with self.rule("GV-LetPair"):
                bt, out1, bound = self.synth(env, m.bound)
                p = self._session(env, bt, L.LProd, "let-pair")
                inner = self._ext(out1, m.fst, p.fst)
                ex = inner.entries[-1]
                inner = self._ext(inner, m.snd, p.snd)
                ey = inner.entries[-1]
                t, out, body = self.synth(inner, m.body)
                out = self._drop(self._drop(out, ey, "binding"), ex, "binding")
                return t, out, replace(m, bound=bound, body=body)
        if isinstance(m, A.Let):
            with self.rule("GV-Let"):
                bt, out1, bound = self.synth(env, m.bound)
                inner = self._ext(out1, m.name, bt)
                e = inner.entries[-1]
                t, out, body = self.synth(inner, m.body)
                return t, self._drop(out, e, "binding"), replace(m, bound=bound, body=body)
        if isinstance(m, A.Fork):
            with self.rule("GV-Fork"):
                out, body = self.check(env, m.body, L.LUnit())
                return L.LUnit(), out, A.Fork(body)
        if isinstance(m, L.LNew):
            with self.rule("GV-New"):
                if not L.is_lsession(m.annot):
                    raise self.err("KindMismatch", f"new needs a session type, got {show_lsst(m.annot)}", env)
                return L.LProd(m.annot, L.lsst_dual(m.annot)), env, m
        if isinstance(m, A.SendE):
            with self.rule("GV-Send"):
                t, out, chan = self.synth(env, m.chan)
                s = self._session(env, t, L.LSend, "send")
                return L.LFun(Mult.LIN, s.payload, s.cont), out, A.SendE(chan)
        if isinstance(m, A.RecvE):
            with self.rule("GV-Recv"):
                t, out, chan = self.synth(env, m.chan)
                s = self._session(env, t, L.LRecv, "recv")
                return L.LProd(s.payload, s.cont), out, A.RecvE(chan)
        if isinstance(m, L.RCase):
            with self.rule("GV-RCase"):
                return self._rcase(env, m)
        if isinstance(m, L.Close):
            with self.rule("GV-Close"):
                t, out, chan = self.synth(env, m.chan)
                self._session(env, t, L.LEndOut, "close")
                return L.LUnit(), out, L.Close(chan)
        if isinstance(m, L.Wait):
            with self.rule("GV-Wait"):
                t, out, chan = self.synth(env, m.chan)
                self._session(env, t, L.LEndIn, "wait")
                return L.LUnit(), out, L.Wait(chan)
        if isinstance(m, L.Select):
            raise self.err("NotASubtype", f"select {m.label} must be applied to a channel", env)
        if isinstance(m, A.Neg):
            out, body = self.check(env, m.body, L.LInt())
            return L.LInt(), out, A.Neg(body)
        if isinstance(m, A.Add):
            out1, a = self.check(env, m.left, L.LInt())
            out2, b = self.check(out1, m.right, L.LInt())
            return L.LInt(), out2, A.Add(a, b)
        raise self.err("KindMismatch", f"not an LSST expression: {m!r}", env)

    def _rcase(self, env: TypeEnv, m: L.RCase):
        t, out1, chan = self.synth(env, m.chan)
        br = self._session(env, t, L.LBranch, "rcase")
        offered = dict(br.branches)
        handled = [lab for lab, _ in m.branches]
        if set(handled) != set(offered):
            raise self.err(
                "NotASubtype",
                f"rcase handles {{{', '.join(sorted(handled))}}} but the channel offers {{{', '.join(sorted(offered))}}}",
                env,
            )
        results = []
        for lab, rb in m.branches:
            inner = self._ext(out1, rb.binder, offered[lab])
            e = inner.entries[-1]
            bt, out, body = self.synth(inner, rb.body)
            out = self._drop(out, e, "channel")
            results.append((lab, bt, out, replace(rb, body=body)))
        first = results[0]
        for lab, _, out, _ in results[1:]:
            diff = _same_env(first[2], out)
            if diff is not None:
                raise self.err(
                    "BranchEnvMismatch",
                    f"branches {first[0]} and {lab} leave different resources (first difference: {A.base_name(diff)})",
                    env,
                )
        types = [r[1] for r in results]
        for cand in types:
            if all(L.lsst_sub(t, cand) for t in types):
                return cand, first[2], L.RCase(chan, tuple((lab, rb) for lab, _, _, rb in results))
        raise self.err("NotASubtype", "rcase branches have incompatible types", env)

    # -- checking ------------------------------------------------------------
    def check(self, env: TypeEnv, m: A.Expr, want: L.LType) -> tuple[TypeEnv, A.Expr]:
        if isinstance(m, L.Select):
            with self.rule("GV-Select"):
                f = self._session(env, want, L.LFun, f"select {m.label}")
                sel = self._session(env, f.dom, L.LSelect, f"select {m.label}")
                cont = dict(sel.branches).get(m.label)
                if cont is None:
                    raise self.err("NotASubtype", f"{show_lsst(sel)} offers no {m.label}", env)
                self._expect(env, cont, f.cod)
                return env, replace(m, annot=sel)
        t, out, elab = self.synth(env, m)
        self._expect(env, t, want)
        return out, elab


def lsst_check_program(prog: L.LsstProgram, keep_going: bool = True) -> TypedLsstProgram:
    report = Report()
    elaborated = L.LsstProgram(list(prog.type_defs), [])
    env = EMPTY
    for d in prog.term_defs:
        ck = LsstChecker()
        try:
            with ck.rule(f"def {d.name}"):
                if d.declared is not None:
                    out, body = ck.check(env, d.body, d.declared)
                    ty = d.declared
                else:
                    ty, out, body = ck.synth(env, d.body)
                if out.entries != env.entries:
                    raise ck.err("LinearityViolation", "top-level definition consumed resources", env)
                if L.lsst_is_lin(ty) and d.name != "main":
                    raise ck.err("LinearityViolation", f"top-level definition {d.name} has a linear type", env)
            report.results.append(DefResult(d.name, True, ty, None, d.pos))
            elaborated.term_defs.append(L.LsstDef(d.name, d.declared, body, d.pos))
            env = env.extend(d.name, ty, False)
        except CheckError as e:
            e.pos = d.pos
            report.results.append(DefResult(d.name, False, None, e, d.pos))
            if d.declared is not None:
                env = env.extend(d.name, d.declared, False)
            if not keep_going:
                break
    report.program = elaborated
    return TypedLsstProgram(elaborated, report)


def lsst_type_check(prog: L.LsstProgram) -> TypedLsstProgram:
    """Check and elaborate; raises the first CheckError."""
    tp = lsst_check_program(prog, keep_going=False)
    for r in tp.report.results:
        if not r.ok:
            raise r.error
    return tp


def lsst_check_process(env: TypeEnv, p: A.Process, main_type: L.LType | None = None) -> None:
    ck = LsstChecker()

    def go(env: TypeEnv, p: A.Process) -> TypeEnv:
        if isinstance(p, A.ProcE):
            with ck.rule("Proc-Expr"):
                if p.main:
                    if main_type is not None:
                        return ck.check(env, p.expr, main_type)[0]
                    return ck.synth(env, p.expr)[1]
                return ck.check(env, p.expr, L.LUnit())[0]
        if isinstance(p, A.Par):
            return go(go(env, p.left), p.right)
        if isinstance(p, A.Nu):
            inner = ck._ext(env, "@" + p.c, p.annot)
            ec = inner.entries[-1]
            inner = ck._ext(inner, "@" + p.d, L.lsst_dual(p.annot))
            ed = inner.entries[-1]
            out = go(inner, p.body)
            return ck._drop(ck._drop(out, ed, "endpoint"), ec, "endpoint")
        raise TypeError(f"not a process: {p!r}")

    out = go(env, p)
    if out.linear_names():
        raise ck.err("LinearityViolation", f"unused linear resources: {', '.join(out.linear_names())}", out)
