"""Algorithmic type system: conversion, unfolding, kinding, subtyping and
bidirectional typing with input/output environments."""

from __future__ import annotations

import os
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

from . import ast as A
from .ast import GU, SL, SU, Base, Kind, Mult, Polarity
from .env import EMPTY, TermBind, TypeEnv, TyVarBind, consume, same_env, unr
from .printer import show

DEFAULT_FUEL = 128

CODES = (
    "NotConvertible",
    "UnfoldFailed",
    "KindMismatch",
    "NotASubtype",
    "LinearityViolation",
    "BranchEnvMismatch",
    "DependencyOnLinear",
    "UnboundName",
    "FuelExhausted",
    "ValueRestriction",
)


def default_fuel() -> int:
    raw = os.environ.get("LDST_FUEL")
    if raw:
        try:
            value = int(raw)
        except ValueError:
            return DEFAULT_FUEL
        if value > 0:
            return value
    return DEFAULT_FUEL


class CheckError(Exception):
    def __init__(self, code: str, message: str, pos=None, trace: list | None = None, env: TypeEnv | None = None):
        assert code in CODES, code
        self.code = code
        self.message = message
        self.pos = pos
        self.trace = list(trace or ["<top>"])
        self.env = env
        super().__init__(f"{code}: {message}")

    def render(self) -> str:
        where = f"{self.pos}: " if self.pos is not None else ""
        lines = [f"{where}{self.code}: {self.message}", "  rules: " + " > ".join(self.trace)]
        if self.env is not None and len(self.env):
            lines.append("  environment:")
            lines.extend("    " + ln for ln in self.env.dump().splitlines())
        return "\n".join(lines)


@dataclass(frozen=True)
class SynthResult:
    type: A.Type
    out_env: TypeEnv

    def __iter__(self):
        return iter((self.type, self.out_env))


def _eq_entry(x: A.Expr, ty: A.Type, v: A.Expr) -> tuple[str, A.Eq]:
    return A.fresh("eq"), A.Eq(ty, x, v)


def _mentions(t: A.Node, names) -> set[str]:
    return A.free_names(t, "term") & set(names)


class Checker:
    def __init__(self, fuel: int | None = None):
        self.fuel = fuel if fuel is not None else default_fuel()
        self._budget: int | None = None
        self._trace: list[str] = []
        self._bound: set[str] = set()
        # entries looked up so far, by identity (shadowed names share a name)
        self._used: dict[int, TermBind] = {}
        # discarded End channels, reported but not rejected
        self.lints: dict[str, None] = {}
        # id(NatRecE node) -> (zero type, succ body, kind, tvar)
        self.natrec_info: dict[int, tuple] = {}

    # -- plumbing ------------------------------------------------------------
    @contextmanager
    def rule(self, name: str):
        self._trace.append(name)
        try:
            yield
        finally:
            self._trace.pop()

    def err(self, code: str, message: str, env: TypeEnv | None = None) -> CheckError:
        return CheckError(code, message, None, list(self._trace) or ["<top>"], env)

    @contextmanager
    def _fuel_scope(self):
        outer = self._budget is None
        if outer:
            self._budget = self.fuel
        try:
            yield
        finally:
            if outer:
                self._budget = None

    def _spend(self) -> None:
        assert self._budget is not None
        self._budget -= 1
        if self._budget < 0:
            raise self.err("FuelExhausted", f"recursor unrolling exceeded fuel {self.fuel}")

    def prepare(self, env: TypeEnv) -> TypeEnv:
        """Fill in missing multiplicity flags, kinding each entry in its prefix."""
        if all(isinstance(e, TyVarBind) or e.lin is not None for e in env):
            return env
        out = EMPTY
        for e in env:
            if isinstance(e, TyVarBind):
                out = TypeEnv(out.entries + (e,))
            elif e.lin is not None:
                out = TypeEnv(out.entries + (e,))
            else:
                out = out.extend(e.name, e.type, self._kind(out, e.type).is_lin)
        return out

    # -- value conversion ----------------------------------------------------
    def convert_value(self, env: TypeEnv, v: A.Expr) -> A.Expr:
        seen: set[str] = set()
        while True:
            if isinstance(v, (A.LabelV, A.Zero, A.Succ, A.IntLit, A.UnitV)):
                return v
            if not isinstance(v, A.Var) or v.name in seen:
                raise self.err("NotConvertible", f"{show(v)} has no head form")
            seen.add(v.name)
            nxt = None
            for e in env.equalities():
                eq = e.type
                if isinstance(eq.lhs, A.Var) and eq.lhs.name == v.name:
                    nxt = eq.rhs
                elif isinstance(eq.rhs, A.Var) and eq.rhs.name == v.name and not (
                    isinstance(eq.lhs, A.Var) and eq.lhs.name in seen
                ):
                    nxt = eq.lhs
                if nxt is not None:
                    break
            if nxt is None:
                raise self.err("NotConvertible", f"no equation for {show(v)}")
            v = nxt

    def _try_convert(self, env: TypeEnv, v: A.Expr) -> A.Expr | None:
        try:
            return self.convert_value(env, v)
        except CheckError as e:
            if e.code != "NotConvertible":
                raise
            return None

    # -- unfolding -----------------------------------------------------------
    def unfold(self, env: TypeEnv, t: A.Type) -> A.Type:
        with self._fuel_scope():
            return self._unfold(env, t)

    def _scrutinee_labels(self, env: TypeEnv, v: A.Expr) -> frozenset:
        t = self._unfold(env, self._value_type(env, v))
        if not isinstance(t, A.LabelTy):
            raise self.err("NotASubtype", f"{show(v)} has type {show(t)}, not a label type", env)
        return t.labels

    def _unfold(self, env: TypeEnv, t: A.Type) -> A.Type:
        if isinstance(t, A.Case):
            with self.rule("A-Unfold-Case"):
                head = self._try_convert(env, t.scrutinee)
                if head is not None:
                    b = t.branch(head.label) if isinstance(head, A.LabelV) else None
                    if b is None:
                        raise self.err("UnfoldFailed", f"case over {show(head)} has no matching branch", env)
                    return self._unfold(env, b)
                if not isinstance(t.scrutinee, A.Var):
                    raise self.err("UnfoldFailed", f"cannot unfold case over {show(t.scrutinee)}", env)
                labs = self._scrutinee_labels(env, t.scrutinee)
                if not labs <= t.labels:
                    raise self.err("UnfoldFailed", f"case type misses labels {sorted(labs - t.labels)}", env)
                results = {}
                for lab in sorted(labs):
                    name, eq = _eq_entry(t.scrutinee, A.LabelTy(labs), A.LabelV(lab))
                    results[lab] = self._unfold(env.extend(name, eq, False), t.branch(lab))
                return self._commute(t.scrutinee, results)
        if isinstance(t, A.NatRec):
            with self.rule("A-Unfold-Rec"):
                head = self._try_convert(env, t.scrutinee)
                if isinstance(head, A.Zero):
                    return self._unfold(env, t.zero)
                if isinstance(head, A.Succ):
                    self._spend()
                    return self._unfold(env, unroll(t, head.pred))
                raise self.err("UnfoldFailed", f"recursor over {show(t.scrutinee)} cannot be unrolled", env)
        return t

    def _commute(self, x: A.Expr, results: dict) -> A.Type:
        ts = list(results.values())
        first = ts[0]
        if all(isinstance(r, A.LabelTy) for r in ts):
            with self.rule("A-Unfold-Case1"):
                return A.LabelTy(frozenset().union(*(r.labels for r in ts)))
        if all(A.alpha_eq(r, first) for r in ts):
            return first
        with self.rule("A-Unfold-Case2"):
            cls = type(first)
            if not all(type(r) is cls for r in ts):
                names = sorted({type(r).__name__ for r in ts})
                raise self.err("UnfoldFailed", f"branches expose different constructors: {', '.join(names)}")
            if cls in (A.Send, A.Recv, A.Sigma, A.Pi):
                head_field = {A.Send: "payload", A.Recv: "payload", A.Sigma: "fst", A.Pi: "dom"}[cls]
                tail_field = {A.Send: "cont", A.Recv: "cont", A.Sigma: "snd", A.Pi: "cod"}[cls]
                head = getattr(first, head_field)
                if not all(A.alpha_eq(getattr(r, head_field), head) for r in ts):
                    raise self.err("UnfoldFailed", "branches disagree on the exposed component")
                if cls is A.Pi and len({r.mult for r in ts}) > 1:
                    raise self.err("UnfoldFailed", "branches disagree on multiplicity")
                y = A.fresh(first.binder)
                tails = {
                    lab: A.subst_type(getattr(r, tail_field), r.binder, A.Var(y)) for lab, r in results.items()
                }
                rest = A.Case(x, A.branches(tails))
                if cls is A.Pi:
                    return A.Pi(first.mult, y, head, rest)
                return cls(y, head, rest)
            raise self.err("UnfoldFailed", f"cannot commute {cls.__name__} out of a case")

    # -- values inside types -------------------------------------------------
    def _value_type(self, env: TypeEnv, v: A.Expr) -> A.Type:
        if isinstance(v, A.Var):
            e = env.entry(v.name)
            if e is None:
                raise self.err("UnboundName", f"unbound name {v.name}", env)
            if e.lin:
                raise self.err("DependencyOnLinear", f"type depends on linear name {v.name}", env)
            return e.type
        if isinstance(v, A.LabelV):
            return A.labels(v.label)
        if isinstance(v, A.Zero):
            return A.Nat
        if isinstance(v, A.Succ):
            t = self._unfold(env, self._value_type(env, v.pred))
            if not isinstance(t, A.NatT):
                raise self.err("NotASubtype", f"S applied to {show(t)}", env)
            return A.Nat
        if isinstance(v, A.IntLit):
            return A.Int
        if isinstance(v, A.UnitV):
            return A.Unit
        raise self.err("KindMismatch", f"{show(v)} cannot appear in a type", env)

    # -- kinding -------------------------------------------------------------
    def kind_synth(self, env: TypeEnv, t: A.Type) -> Kind:
        env = self.prepare(env)
        with self._fuel_scope():
            return self._kind(env, t)

    def kind_check(self, env: TypeEnv, t: A.Type, k: Kind) -> None:
        got = self.kind_synth(env, t)
        with self.rule("A-Sub-Kind"):
            if not got <= k:
                raise self.err("KindMismatch", f"{show(t)} has kind {got}, expected {k}", env)

    def cond_extend(self, env: TypeEnv, x: str, t: A.Type) -> TypeEnv:
        k = self._kind(env, t)
        return env if k.is_lin else env.extend(x, t, False)

    def _ext(self, env: TypeEnv, x: str, t: A.Type) -> TypeEnv:
        self._bound.add(x)
        return env.extend(x, t, self._kind(env, t).is_lin)

    def _kind(self, env: TypeEnv, t: A.Type) -> Kind:
        if self._budget is None:
            with self._fuel_scope():
                return self._kind(env, t)
        if isinstance(t, (A.UnitT, A.EndT)):
            with self.rule("A-Unit-F" if isinstance(t, A.UnitT) else "A-End-F"):
                return SU
        if isinstance(t, (A.IntT, A.NatT, A.LabelTy)):
            return GU
        if isinstance(t, A.Eq):
            with self.rule("A-Eq-F"):
                self._kind(env, t.index)
                for side in (t.lhs, t.rhs):
                    self._sub(env, self._value_type(env, side), t.index)
                return GU
        if isinstance(t, A.Case):
            with self.rule("A-Lab-F"):
                head = self._try_convert(env, t.scrutinee)
                if isinstance(head, A.LabelV):
                    b = t.branch(head.label)
                    if b is None:
                        raise self.err("KindMismatch", f"case type has no branch {head.label}", env)
                    return self._kind(env, b)
                labs = self._scrutinee_labels(env, t.scrutinee)
                if not labs <= t.labels:
                    raise self.err("KindMismatch", f"case type misses labels {sorted(labs - t.labels)}", env)
                k: Kind | None = None
                for lab in sorted(labs):
                    name, eq = _eq_entry(t.scrutinee, A.LabelTy(labs), A.LabelV(lab))
                    kb = self._kind(env.extend(name, eq, False), t.branch(lab))
                    k = kb if k is None else k.join(kb)
                assert k is not None
                return k
        if isinstance(t, A.Pi):
            with self.rule("A-Pi-F"):
                self._kind(env, t.dom)
                self._kind(self.cond_extend(env, t.binder, t.dom), t.cod)
                return Kind(Base.GENERAL, t.mult)
        if isinstance(t, A.Sigma):
            with self.rule("A-Sigma-F"):
                k1 = self._kind(env, t.fst)
                k2 = self._kind(self.cond_extend(env, t.binder, t.fst), t.snd)
                return Kind(Base.GENERAL, k1.mult.join(k2.mult))
        if isinstance(t, (A.Send, A.Recv)):
            with self.rule("A-Ssn-Out-F" if isinstance(t, A.Send) else "A-Ssn-In-F"):
                self._kind(env, t.payload)
                kc = self._kind(self.cond_extend(env, t.binder, t.payload), t.cont)
                if not kc <= SL:
                    raise self.err("KindMismatch", f"continuation {show(t.cont)} is not a session type", env)
                return SL
        if isinstance(t, A.NatRec):
            with self.rule("A-Rec-F"):
                st = self._unfold(env, self._value_type(env, t.scrutinee))
                if not isinstance(st, A.NatT):
                    raise self.err("KindMismatch", f"recursor index has type {show(st)}", env)
                kz = self._kind(env, t.zero)
                k = t.kind if t.kind is not None else kz
                for _ in range(4):
                    ks = self._kind(env.extend_tyvar(t.tvar, k), t.succ)
                    if kz <= k and ks <= k:
                        return k
                    if t.kind is not None:
                        raise self.err("KindMismatch", f"recursor arms do not fit kind {t.kind}", env)
                    k = k.join(ks).join(kz)
                raise self.err("KindMismatch", "recursor kind does not stabilise", env)
        if isinstance(t, A.TVar):
            with self.rule("A-TVar-F"):
                b = env.tyvar(t.name)
                if b is None:
                    raise self.err("UnboundName", f"unbound type variable {t.name}", env)
                k = b.kind or SL
                if t.pol is Polarity.NEG and not k <= SL:
                    raise self.err("KindMismatch", f"dualof {t.name} needs a session kind", env)
                return k
        raise self.err("KindMismatch", f"not a type: {t!r}", env)

    # -- subtyping -----------------------------------------------------------
    def sub_synth(self, env: TypeEnv, a: A.Type, b: A.Type) -> Kind:
        env = self.prepare(env)
        with self._fuel_scope():
            return self._sub(env, a, b)

    def sub_check(self, env: TypeEnv, a: A.Type, b: A.Type, k: Kind | None = None) -> Kind:
        got = self.sub_synth(env, a, b)
        if k is not None and not got <= k:
            with self.rule("AS-Check"):
                raise self.err("KindMismatch", f"subtyping holds at {got}, not at {k}", env)
        return got

    def _not_sub(self, env: TypeEnv, a: A.Type, b: A.Type, why: str = "") -> CheckError:
        extra = f" ({why})" if why else ""
        return self.err("NotASubtype", f"{show(a)} is not a subtype of {show(b)}{extra}", env)

    def _sub(self, env: TypeEnv, a: A.Type, b: A.Type) -> Kind:
        if self._budget is None:
            with self._fuel_scope():
                return self._sub(env, a, b)
        if A.alpha_eq(a, b):
            return self._kind(env, a)
        if isinstance(a, A.Case):
            head = self._try_convert(env, a.scrutinee)
            if head is not None:
                with self.rule("AS-Case-Left1"):
                    br = a.branch(head.label) if isinstance(head, A.LabelV) else None
                    if br is None:
                        raise self._not_sub(env, a, b, f"no branch for {show(head)}")
                    return self._sub(env, br, b)
            with self.rule("AS-Case-Left2"):
                return self._case_split(env, a, lambda e, br: self._sub(e, br, b))
        if isinstance(b, A.Case):
            head = self._try_convert(env, b.scrutinee)
            if head is not None:
                with self.rule("AS-Case-Right1"):
                    br = b.branch(head.label) if isinstance(head, A.LabelV) else None
                    if br is None:
                        raise self._not_sub(env, a, b, f"no branch for {show(head)}")
                    return self._sub(env, a, br)
            with self.rule("AS-Case-Right2"):
                return self._case_split(env, b, lambda e, br: self._sub(e, a, br))
        if isinstance(a, A.NatRec):
            head = self._try_convert(env, a.scrutinee)
            if head is not None:
                with self.rule("AS-Rec-Left"):
                    return self._sub(env, self._rec_step(a, head), b)
        if isinstance(b, A.NatRec):
            head = self._try_convert(env, b.scrutinee)
            if head is not None:
                with self.rule("AS-Rec-Right"):
                    return self._sub(env, a, self._rec_step(b, head))
        if isinstance(a, A.NatRec) and isinstance(b, A.NatRec):
            with self.rule("AS-Rec"):
                if not A.alpha_eq(a.scrutinee, b.scrutinee):
                    raise self._not_sub(env, a, b, "recursors over different indices")
                kz = self._sub(env, a.zero, b.zero)
                alpha = A.fresh(a.tvar)
                sa = A.subst(a.succ, "type", a.tvar, lambda o: A.TVar(alpha, o.pol))
                sb = A.subst(b.succ, "type", b.tvar, lambda o: A.TVar(alpha, o.pol))
                k = a.kind or b.kind or self._kind(env, a)
                ks = self._sub(env.extend_tyvar(alpha, k), sa, sb)
                return kz.join(ks)
        if isinstance(a, A.TVar) and isinstance(b, A.TVar):
            with self.rule("AS-TVar"):
                if a.name != b.name or a.pol is not b.pol:
                    raise self._not_sub(env, a, b)
                return self._kind(env, a)
        if isinstance(a, (A.UnitT, A.EndT)) and isinstance(b, (A.UnitT, A.EndT)):
            with self.rule("AS-Unit"):
                return SU
        if isinstance(a, A.IntT) and isinstance(b, A.IntT) or isinstance(a, A.NatT) and isinstance(b, A.NatT):
            return GU
        if isinstance(a, A.LabelTy) and isinstance(b, A.LabelTy):
            with self.rule("AS-Label"):
                if not a.labels <= b.labels:
                    raise self._not_sub(env, a, b)
                return GU
        if isinstance(a, A.Pi) and isinstance(b, A.Pi):
            with self.rule("AS-Pi"):
                if not a.mult <= b.mult:
                    raise self._not_sub(env, a, b, "multiplicity")
                self._sub(env, b.dom, a.dom)
                y = A.fresh(b.binder)
                inner = self.cond_extend(env, y, b.dom)
                self._sub(inner, A.subst_type(a.cod, a.binder, A.Var(y)), A.subst_type(b.cod, b.binder, A.Var(y)))
                return Kind(Base.GENERAL, b.mult)
        if isinstance(a, A.Sigma) and isinstance(b, A.Sigma):
            with self.rule("AS-Sigma"):
                k1 = self._sub(env, a.fst, b.fst)
                y = A.fresh(a.binder)
                inner = self.cond_extend(env, y, a.fst)
                k2 = self._sub(inner, A.subst_type(a.snd, a.binder, A.Var(y)), A.subst_type(b.snd, b.binder, A.Var(y)))
                return Kind(Base.GENERAL, k1.mult.join(k2.mult))
        if isinstance(a, A.Send) and isinstance(b, A.Send):
            with self.rule("AS-Send"):
                self._sub(env, b.payload, a.payload)
                y = A.fresh(b.binder)
                inner = self.cond_extend(env, y, b.payload)
                self._sub(inner, A.subst_type(a.cont, a.binder, A.Var(y)), A.subst_type(b.cont, b.binder, A.Var(y)))
                return SL
        if isinstance(a, A.Recv) and isinstance(b, A.Recv):
            with self.rule("AS-Recv"):
                self._sub(env, a.payload, b.payload)
                y = A.fresh(a.binder)
                inner = self.cond_extend(env, y, a.payload)
                self._sub(inner, A.subst_type(a.cont, a.binder, A.Var(y)), A.subst_type(b.cont, b.binder, A.Var(y)))
                return SL
        if isinstance(a, A.Eq) and isinstance(b, A.Eq):
            with self.rule("AS-Eq"):
                self._sub(env, a.index, b.index)
                for x, y in ((a.lhs, b.lhs), (a.rhs, b.rhs)):
                    cx, cy = self._try_convert(env, x) or x, self._try_convert(env, y) or y
                    if not A.alpha_eq(cx, cy):
                        raise self._not_sub(env, a, b)
                return GU
        raise self._not_sub(env, a, b)

    def _rec_step(self, t: A.NatRec, head: A.Expr) -> A.Type:
        if isinstance(head, A.Zero):
            return t.zero
        if isinstance(head, A.Succ):
            self._spend()
            return unroll(t, head.pred)
        raise self.err("NotASubtype", f"recursor index {show(head)} is not a natural number")

    def _case_split(self, env: TypeEnv, t: A.Case, fn) -> Kind:
        if not isinstance(t.scrutinee, A.Var):
            raise self.err("NotASubtype", f"case over {show(t.scrutinee)} cannot be split", env)
        labs = self._scrutinee_labels(env, t.scrutinee)
        if not labs <= t.labels:
            raise self.err("NotASubtype", f"case type misses labels {sorted(labs - t.labels)}", env)
        k: Kind | None = None
        for lab in sorted(labs):
            name, eq = _eq_entry(t.scrutinee, A.LabelTy(labs), A.LabelV(lab))
            kb = fn(env.extend(name, eq, False), t.branch(lab))
            k = kb if k is None else k.join(kb)
        assert k is not None
        return k

    def _is_sub(self, env: TypeEnv, a: A.Type, b: A.Type) -> bool:
        try:
            self._sub(env, a, b)
            return True
        except CheckError as e:
            if e.code == "FuelExhausted":
                raise
            return False

    # -- expression typing ---------------------------------------------------
    def type_synth(self, env: TypeEnv, m: A.Expr) -> SynthResult:
        env = self.prepare(env)
        with self._fuel_scope():
            t, out = self._synth(env, m)
        return SynthResult(t, out)

    def type_check(self, env: TypeEnv, m: A.Expr, t: A.Type) -> TypeEnv:
        env = self.prepare(env)
        with self._fuel_scope():
            return self._check(env, m, t)

    def _lookup(self, env: TypeEnv, name: str, shown: str) -> tuple[A.Type, TypeEnv]:
        e = env.entry(name)
        if e is None:
            if name in self._bound:
                raise self.err("LinearityViolation", f"linear name {shown} used after it was consumed", env)
            raise self.err("UnboundName", f"unbound name {shown}", env)
        self._used[id(e)] = e
        if e.lin:
            return e.type, consume(env, name)
        return e.type, env

    def _drop(self, env: TypeEnv, entry: TermBind, what: str) -> TypeEnv:
        """Remove a local binder after its scope; linear ones must be gone."""
        for i, e in enumerate(env.entries):
            if e is entry:
                if e.lin:
                    raise self.err(
                        "LinearityViolation", f"linear {what} {A.base_name(e.name)} is never consumed", env
                    )
                if id(e) not in self._used and not A.base_name(e.name).startswith("_") and A.alpha_eq(e.type, A.End):
                    self.lints[f"{what} {A.base_name(e.name)} of type End is discarded"] = None
                return TypeEnv(env.entries[:i] + env.entries[i + 1 :])
        return env

    def _synth(self, env: TypeEnv, m: A.Expr) -> tuple[A.Type, TypeEnv]:
        if isinstance(m, A.Var):
            with self.rule("A-Name"):
                return self._lookup(env, m.name, m.name)
        if isinstance(m, A.Chan):
            with self.rule("A-Name"):
                return self._lookup(env, "@" + m.name, "@" + m.name)
        if isinstance(m, A.UnitV):
            return A.Unit, env
        if isinstance(m, A.LabelV):
            return A.labels(m.label), env
        if isinstance(m, A.IntLit):
            return A.Int, env
        if isinstance(m, A.Zero):
            return A.Nat, env
        if isinstance(m, A.Succ):
            with self.rule("A-Nat-Succ"):
                return A.Nat, self._check(env, m.pred, A.Nat)
        if isinstance(m, A.Lam):
            with self.rule("A-Pi-I"):
                return self._lam(env, m, None)
        if isinstance(m, A.App):
            with self.rule("A-Pi-E"):
                return self._app(env, m)
        if isinstance(m, A.CaseE):
            return self._case(env, m, None)
        if isinstance(m, A.PairE):
            with self.rule("A-Sigma-I"):
                return self._pair(env, m, None)
        if isinstance(m, A.LetPair):
            return self._let_pair(env, m, None)
        if isinstance(m, A.Let):
            with self.rule("A-Let"):
                return self._let(env, m, None)
        if isinstance(m, A.New):
            with self.rule("A-Ssn-I"):
                k = self._kind(env, m.annot)
                if not k <= SL:
                    raise self.err("KindMismatch", f"new needs a session type, got {show(m.annot)}", env)
                return A.Sigma(A.fresh("c"), m.annot, A.dual(m.annot)), env
        if isinstance(m, A.Fork):
            with self.rule("A-Fork"):
                return A.Unit, self._check(env, m.body, A.Unit)
        if isinstance(m, A.SendE):
            with self.rule("A-Ssn-Send-E"):
                t, out = self._synth(env, m.chan)
                u = self._unfold(out, t)
                if not isinstance(u, A.Send):
                    raise self.err("NotASubtype", f"send on a channel of type {show(t)}", env)
                return A.Pi(Mult.LIN, u.binder, u.payload, u.cont), out
        if isinstance(m, A.RecvE):
            with self.rule("A-Ssn-Recv-E"):
                t, out = self._synth(env, m.chan)
                u = self._unfold(out, t)
                if not isinstance(u, A.Recv):
                    raise self.err("NotASubtype", f"recv on a channel of type {show(t)}", env)
                return A.Sigma(u.binder, u.payload, u.cont), out
        if isinstance(m, A.NatRecE):
            with self.rule("A-Nat-E"):
                return self._natrec(env, m)
        if isinstance(m, A.Neg):
            with self.rule("A-Int-Neg"):
                return A.Int, self._check(env, m.body, A.Int)
        if isinstance(m, A.Add):
            with self.rule("A-Int-Add"):
                out = self._check(env, m.left, A.Int)
                return A.Int, self._check(out, m.right, A.Int)
        raise self.err("KindMismatch", f"cannot type {m!r}", env)

    def _check(self, env: TypeEnv, m: A.Expr, t: A.Type) -> TypeEnv:
        if isinstance(m, A.Lam):
            with self.rule("A-Pi-I"):
                return self._lam(env, m, t)[1]
        if isinstance(m, A.CaseE):
            return self._case(env, m, t)[1]
        if isinstance(m, A.PairE):
            with self.rule("A-Sigma-I"):
                return self._pair(env, m, t)[1]
        if isinstance(m, A.LetPair):
            return self._let_pair(env, m, t)[1]
        if isinstance(m, A.Let):
            with self.rule("A-Let"):
                return self._let(env, m, t)[1]
        got, out = self._synth(env, m)
        with self.rule("A-Sub-Type"):
            self._sub(env, got, t)
        return out

    def _lam(self, env: TypeEnv, m: A.Lam, expected: A.Type | None) -> tuple[A.Type, TypeEnv]:
        self._kind(env, m.annot)
        target = None
        if expected is not None:
            try:
                u = self._unfold(env, expected)
            except CheckError:
                u = None
            if isinstance(u, A.Pi):
                if not m.mult <= u.mult:
                    raise self.err("NotASubtype", f"a {m.mult.value} function is expected to be {u.mult.value}", env)
                self._sub(env, u.dom, m.annot)
                target = A.subst_type(u.cod, u.binder, A.Var(m.binder))
        inner = self._ext(env, m.binder, m.annot)
        param = inner.entries[-1]
        if target is not None:
            out = self._check(inner, m.body, target)
            body_t = target
        else:
            body_t, out = self._synth(inner, m.body)
        out = self._drop(out, param, "parameter")
        if m.mult is Mult.UN and out.entries != env.entries:
            used = [n for n in env.linear_names() if n not in out.linear_names()]
            raise self.err(
                "LinearityViolation",
                f"unrestricted function consumes linear {', '.join(used) or 'resources'}",
                env,
            )
        result = A.Pi(m.mult, m.binder, m.annot, body_t)
        if expected is not None and target is None:
            with self.rule("A-Sub-Type"):
                self._sub(env, result, expected)
        return result, out

    def _app(self, env: TypeEnv, m: A.App) -> tuple[A.Type, TypeEnv]:
        ft, out1 = self._synth(env, m.fun)
        u = self._unfold(out1, ft)
        if not isinstance(u, A.Pi):
            raise self.err("NotASubtype", f"applying a value of type {show(ft)}", env)
        out2 = self._check(out1, m.arg, u.dom)
        if u.binder in A.free_names(u.cod):
            if not A.is_value(m.arg):
                raise self.err(
                    "ValueRestriction",
                    f"argument {show(m.arg)} to a dependent function must be a value",
                    env,
                )
            cod = A.subst_type(u.cod, u.binder, m.arg)
            self._kind(unr_view(out2), cod)
            return cod, out2
        return u.cod, out2

    def _case(self, env: TypeEnv, m: A.CaseE, expected: A.Type | None) -> tuple[A.Type, TypeEnv]:
        v = m.scrutinee
        head = self._try_convert(env, v)
        if isinstance(head, A.LabelV):
            with self.rule("A-Lab-E1"):
                # still requires the scrutinee to be well typed
                self._synth(env, v)
                br = m.branch(head.label)
                if br is None:
                    raise self.err("NotASubtype", f"case has no branch for {head.label}", env)
                if expected is not None:
                    return expected, self._check(env, br, expected)
                return self._synth(env, br)
        with self.rule("A-Lab-E2"):
            vt, env1 = self._synth(env, v)
            u = self._unfold(env1, vt)
            if not isinstance(u, A.LabelTy):
                raise self.err("NotASubtype", f"case on a value of type {show(vt)}", env)
            keys = frozenset(lab for lab, _ in m.branches)
            if not u.labels <= keys:
                missing = ", ".join(sorted(u.labels - keys))
                raise self.err("NotASubtype", f"{show(u)} is not a subtype of {{{', '.join(sorted(keys))}}} (missing {missing})", env)
            results = []
            for lab in sorted(u.labels):
                name, eq = _eq_entry(v, u, A.LabelV(lab))
                inner = env1.extend(name, eq, False) if isinstance(v, A.Var) else env1
                br = m.branch(lab)
                if expected is not None:
                    out = self._check(inner, br, expected)
                    bt = expected
                else:
                    bt, out = self._synth(inner, br)
                if isinstance(v, A.Var):
                    out = consume(out, name)
                results.append((lab, bt, out))
            return self._merge_branches(env1, v, results)

    def _merge_branches(self, env: TypeEnv, v: A.Expr, results: list) -> tuple[A.Type, TypeEnv]:
        _, first_t, first_out = results[0]
        for lab, _, out in results[1:]:
            diff = same_env(first_out, out)
            if diff is not None:
                raise self.err(
                    "BranchEnvMismatch",
                    f"branches {results[0][0]} and {lab} leave different resources (first difference: {A.base_name(diff)})",
                    env,
                )
        types = [t for _, t, _ in results]
        if all(A.alpha_eq(t, first_t) for t in types):
            return first_t, first_out
        if isinstance(v, A.Var):
            return A.Case(v, A.branches((lab, t) for lab, t, _ in results)), first_out
        for cand in types:
            if all(self._is_sub(first_out, t, cand) for t in types):
                return cand, first_out
        raise self.err("NotASubtype", "branches have incompatible types", env)

    def _pair(self, env: TypeEnv, m: A.PairE, expected: A.Type | None) -> tuple[A.Type, TypeEnv]:
        target: A.Sigma | None = None
        if expected is not None:
            try:
                u = self._unfold(env, expected)
            except CheckError:
                u = None
            if isinstance(u, A.Sigma):
                target = u
        if m.annot is not None:
            self._kind(env, m.annot)
        if target is not None:
            fst_t = target.fst
            out1 = self._check(env, m.fst, fst_t)
            if m.annot is not None:
                self._sub(env, m.annot, fst_t)
        else:
            got, out1 = self._synth(env, m.fst)
            fst_t = got
            if m.annot is not None:
                self._sub(env, got, m.annot)
                fst_t = m.annot
        x = m.binder
        extra: list[str] = []
        inner = out1
        if not self._kind(env, fst_t).is_lin:
            inner = inner.extend(x, fst_t, False)
            name, eq = _eq_entry(A.Var(x), fst_t, m.fst)
            inner = inner.extend(name, eq, False)
            extra = [name, x]
        if target is not None:
            snd_t = A.subst_type(target.snd, target.binder, A.Var(x))
            out2 = self._check(inner, m.snd, snd_t)
        else:
            snd_t, out2 = self._synth(inner, m.snd)
        for name in extra:
            out2 = consume(out2, name)
        if target is not None:
            return expected, out2  # type: ignore[return-value]
        return A.Sigma(x, fst_t, snd_t), out2

    def _let(self, env: TypeEnv, m: A.Let, expected: A.Type | None) -> tuple[A.Type, TypeEnv]:
        bt, out1 = self._synth(env, m.bound)
        inner = self._ext(out1, m.name, bt)
        bound = inner.entries[-1]
        if expected is not None:
            out2 = self._check(inner, m.body, expected)
            t = expected
        else:
            t, out2 = self._synth(inner, m.body)
        out2 = self._drop(out2, bound, "binding")
        if m.name in A.free_names(t):
            if not A.is_value(m.bound):
                raise self.err("ValueRestriction", f"result type depends on {m.name}, bound to a non-value", env)
            t = A.subst_type(t, m.name, m.bound)
        return t, out2

    def _let_pair(self, env: TypeEnv, m: A.LetPair, expected: A.Type | None) -> tuple[A.Type, TypeEnv]:
        bt, out1 = self._synth(env, m.bound)
        u = self._unfold(out1, bt)
        if not isinstance(u, A.Sigma):
            raise self.err("NotASubtype", f"let-pair on a value of type {show(bt)}", env)
        x, y = m.fst, m.snd
        snd_t = A.subst_type(u.snd, u.binder, A.Var(x))
        try:
            fu = self._unfold(out1, u.fst)
        except CheckError:
            fu = None
        if isinstance(fu, A.LabelTy):
            with self.rule("A-Sigma-G"):
                results = []
                for lab in sorted(fu.labels):
                    inner = self._ext(out1, x, u.fst)
                    ex = inner.entries[-1]
                    name, eq = _eq_entry(A.Var(x), fu, A.LabelV(lab))
                    inner = self._ext(inner.extend(name, eq, False), y, snd_t)
                    ey = inner.entries[-1]
                    if expected is not None:
                        out = self._check(inner, m.body, expected)
                        t = expected
                    else:
                        t, out = self._synth(inner, m.body)
                    out = self._drop(out, ey, "binding")
                    out = consume(out, name)
                    out = self._drop(out, ex, "binding")
                    if expected is None:
                        t = self._close_over(out, t, x, lab, y)
                    results.append((lab, t, out))
                return self._merge_branches(out1, A.LabelV("_"), results)
        with self.rule("A-Sigma-E"):
            inner = self._ext(out1, x, u.fst)
            ex = inner.entries[-1]
            known = m.bound.fst if isinstance(m.bound, A.PairE) and A.is_value(m.bound.fst) else None
            eq_name = None
            if known is not None and not ex.lin:
                # a literal pair: remember what the first component is
                eq_name, eq = _eq_entry(A.Var(x), u.fst, known)
                inner = inner.extend(eq_name, eq, False)
            inner = self._ext(inner, y, snd_t)
            ey = inner.entries[-1]
            if expected is not None:
                out = self._check(inner, m.body, expected)
                t = expected
            else:
                t, out = self._synth(inner, m.body)
            out = self._drop(out, ey, "binding")
            if eq_name is not None:
                out = consume(out, eq_name)
            out = self._drop(out, ex, "binding")
            if expected is None:
                if known is not None and x in A.free_names(t):
                    t = A.subst_type(t, x, known)
                t = self._close_over(out, t, x, None, y)
            return t, out

    def _close_over(self, env: TypeEnv, t: A.Type, x: str, lab: str | None, y: str) -> A.Type:
        if lab is not None and x in A.free_names(t):
            t = A.subst_type(t, x, A.LabelV(lab))
        bad = _mentions(t, [x, y])
        if bad:
            raise self.err(
                "ValueRestriction",
                f"result type {show(t)} depends on pattern variable {A.base_name(sorted(bad)[0])}",
                env,
            )
        return t

    def _natrec(self, env: TypeEnv, m: A.NatRecE) -> tuple[A.Type, TypeEnv]:
        v = m.scrutinee
        vt, _ = self._synth(unr_view(env), v)
        if not isinstance(self._unfold(env, vt), A.NatT):
            raise self.err("NotASubtype", f"natrec over a value of type {show(vt)}", env)
        rec_t = m.rec_type
        alpha = m.tvar
        # zero arm
        zenv = env
        zname = None
        if isinstance(v, A.Var):
            zname, eq = _eq_entry(v, A.Nat, A.Zero())
            zenv = env.extend(zname, eq, False)
        b0, out0 = self._synth(zenv, m.zero)
        if zname is not None:
            out0 = consume(out0, zname)
        base = unr_view(env)
        dependent = alpha in A.free_names(rec_t, "type")
        if dependent:
            s0 = match_tvar(rec_t, b0, alpha)
            if s0 is None:
                raise self.err("NotASubtype", f"zero arm type {show(b0)} does not fit {show(rec_t)}", env)
            k = self._kind(base, s0)
        else:
            self._sub(zenv, b0, rec_t)
            s0, k = None, None
        r = None
        for _ in range(4):
            senv = base.extend(m.pred, A.Nat, False)
            self._bound.add(m.pred)
            senv = senv.extend_tyvar(alpha, k)
            if isinstance(v, A.Var):
                name, eq = _eq_entry(v, A.Nat, A.Succ(A.Var(m.pred)))
                senv = senv.extend(name, eq, False)
            senv = self._ext(senv, m.rec, rec_t)
            b1, _ = self._synth(senv, m.succ)
            if not dependent:
                self._sub(senv, b1, rec_t)
                break
            r = match_tvar(rec_t, b1, alpha)
            if r is None:
                raise self.err("NotASubtype", f"successor arm type {show(b1)} does not fit {show(rec_t)}", env)
            if m.pred in A.free_names(r):
                raise self.err("DependencyOnLinear", "recursor step type mentions the predecessor", env)
            kr = self._kind(base.extend_tyvar(alpha, k), r)
            if kr <= k:
                break
            k = k.join(kr)
        if not dependent:
            return rec_t, out0
        assert r is not None and s0 is not None and k is not None
        self.natrec_info[id(m)] = (s0, r, k, alpha)
        rho = A.NatRec(v, s0, alpha, k, r)
        return A.subst_tvar(rec_t, alpha, rho), out0

    # -- processes -----------------------------------------------------------
    def check_process(self, env: TypeEnv, p: A.Process, main_type: A.Type | None = None) -> None:
        """Check a configuration; the main thread is checked against
        ``main_type`` when given and synthesized otherwise."""
        env = self.prepare(env)
        self._main_type = main_type
        with self._fuel_scope():
            out = self._proc(env, p)
        left = out.linear_names()
        if left:
            raise self.err("LinearityViolation", f"unused linear resources: {', '.join(left)}", out)

    def _proc(self, env: TypeEnv, p: A.Process) -> TypeEnv:
        if isinstance(p, A.ProcE):
            with self.rule("Proc-Expr"):
                if p.main:
                    if getattr(self, "_main_type", None) is not None:
                        return self._check(env, p.expr, self._main_type)
                    return self._synth(env, p.expr)[1]
                return self._check(env, p.expr, A.Unit)
        if isinstance(p, A.Par):
            with self.rule("Proc-Par"):
                return self._proc(self._proc(env, p.left), p.right)
        if isinstance(p, A.Nu):
            with self.rule("Proc-Channel"):
                if p.annot is None:
                    raise self.err("KindMismatch", "channel binder without a session type", env)
                k = self._kind(env, p.annot)
                if not k <= SL:
                    raise self.err("KindMismatch", f"{show(p.annot)} is not a session type", env)
                inner = self._ext(env, "@" + p.c, p.annot)
                ec = inner.entries[-1]
                inner = self._ext(inner, "@" + p.d, A.dual(p.annot))
                ed = inner.entries[-1]
                out = self._proc(inner, p.body)
                out = self._drop(out, ed, "endpoint")
                return self._drop(out, ec, "endpoint")
        raise TypeError(f"not a process: {p!r}")

    # -- elaboration ---------------------------------------------------------
    def elaborate(self, m: A.Node) -> A.Node:
        """Copy recorded recursor information into NatRecE nodes."""

        def go(n: A.Node) -> A.Node:
            new = A.map_children(n, lambda _f, c: go(c))
            info = self.natrec_info.get(id(n)) if isinstance(n, A.NatRecE) else None
            if info is not None:
                s0, r, k, alpha = info
                r = A.subst(r, "type", alpha, lambda o: A.TVar(new.tvar, o.pol))
                new = replace(new, info_zero=s0, info_succ=r, info_kind=k)
            return new

        return go(m)


def unr_view(env: TypeEnv) -> TypeEnv:
    return unr(env)


def unroll(t: A.NatRec, pred: A.Expr) -> A.Type:
    """One unrolling of ``rec S(pred) A [a] B``."""
    rho = A.NatRec(pred, t.zero, t.tvar, t.kind, t.succ)
    return A.subst_tvar(t.succ, t.tvar, rho)  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# Matching a recursor annotation against an arm type


def match_tvar(pattern: A.Type, target: A.Type, alpha: str) -> A.Type | None:
    """Find S with pattern[S/alpha+, dual S/alpha-] alpha-equal to target."""
    found: list[A.Type] = []

    def bind(cand: A.Type, locals_: set[str]) -> bool:
        if A.free_names(cand, "term") & locals_:
            return False
        if found:
            return A.alpha_eq(found[0], cand)
        found.append(cand)
        return True

    def go(p: A.Node, t: A.Node, locals_: set[str]) -> bool:
        if isinstance(p, A.TVar) and p.name == alpha:
            if p.pol is Polarity.POS:
                return bind(t, locals_)  # type: ignore[arg-type]
            try:
                return bind(A.dual(t), locals_)  # type: ignore[arg-type]
            except A.NotASessionType:
                return False
        if type(p) is not type(t):
            return False
        if not (p._binds and isinstance(p, A.Type)):
            for f in p.__dataclass_fields__:
                if f in ("kind",):
                    continue
                pv, tv = getattr(p, f), getattr(t, f)
                if isinstance(pv, A.Node):
                    if not go(pv, tv, locals_):
                        return False
                elif A._is_branches(pv):
                    if [lab for lab, _ in pv] != [lab for lab, _ in tv]:
                        return False
                    if not all(go(a, b, locals_) for (_, a), (_, b) in zip(pv, tv)):
                        return False
                elif pv != tv:
                    return False
            return True
        if isinstance(p, A.NatRec):
            if p.tvar == alpha:
                return A.alpha_eq(p, t)
            beta = A.fresh(p.tvar)
            pp = A.subst(p.succ, "type", p.tvar, lambda o: A.TVar(beta, o.pol))
            tt = A.subst(t.succ, "type", t.tvar, lambda o: A.TVar(beta, o.pol))
            return go(p.scrutinee, t.scrutinee, locals_) and go(p.zero, t.zero, locals_) and go(pp, tt, locals_)
        # one term binder: Pi, Sigma, Send, Recv
        (bfield, _, scope), = p._binds
        z = A.fresh(getattr(p, bfield))
        for f in p.__dataclass_fields__:
            if f in (bfield, "_binds"):
                continue
            pv, tv = getattr(p, f), getattr(t, f)
            if f in scope:
                pv = A.subst_type(pv, getattr(p, bfield), A.Var(z))
                tv = A.subst_type(tv, getattr(t, bfield), A.Var(z))
                if not go(pv, tv, locals_ | {z}):
                    return False
            elif isinstance(pv, A.Node):
                if not go(pv, tv, locals_):
                    return False
            elif pv != tv:
                return False
        return True

    if not go(pattern, target, set()):
        return None
    if not found:
        return None
    return found[0]


# ---------------------------------------------------------------------------
# Whole programs


@dataclass
class DefResult:
    name: str
    ok: bool
    type: A.Type | None = None
    error: CheckError | None = None
    pos: object = None


@dataclass
class Report:
    results: list = field(default_factory=list)
    program: object = None
    lints: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def failures(self) -> list:
        return [r for r in self.results if not r.ok]

    def to_text(self) -> str:
        lines = []
        for r in self.results:
            if r.ok:
                lines.append(f"ok    {r.name} : {show(r.type)}")
            else:
                e = r.error
                where = f" at {r.pos}" if r.pos is not None else ""
                lines.append(f"FAIL  {r.name}{where}: {e.code}: {e.message}")
                lines.append(f"      rules: {' > '.join(e.trace)}")
        for lint in self.lints:
            lines.append(f"lint  {lint}")
        summary = "all definitions check" if self.ok else f"{len(self.failures())} definition(s) failed"
        lines.append(summary)
        return "\n".join(lines)

    def to_data(self) -> dict:
        out = []
        for r in self.results:
            item = {"name": r.name, "status": "ok" if r.ok else "error"}
            if r.pos is not None:
                item["position"] = {"line": r.pos.line, "column": r.pos.column}
            if r.ok:
                item["type"] = show(r.type)
            else:
                item.update(code=r.error.code, message=r.error.message, trace=r.error.trace)
            out.append(item)
        return {"ok": self.ok, "definitions": out, "lints": list(self.lints)}


def check_program(prog, keep_going: bool = True, fuel: int | None = None) -> Report:
    from .parser import Program, TermDef

    report = Report()
    elaborated = Program(list(prog.type_defs), [])
    env = EMPTY
    for d in prog.term_defs:
        ck = Checker(fuel)
        try:
            with ck._fuel_scope():
                if d.declared is not None:
                    with ck.rule(f"def {d.name}"):
                        ck._kind(env, d.declared)
                        out = ck._check(env, d.body, d.declared)
                    ty = d.declared
                else:
                    with ck.rule(f"def {d.name}"):
                        ty, out = ck._synth(env, d.body)
                if out.entries != env.entries:
                    raise ck.err("LinearityViolation", "top-level definition consumed resources", env)
                if ck._kind(env, ty).is_lin and d.name != "main":
                    raise ck.err("LinearityViolation", f"top-level definition {d.name} has a linear type", env)
            report.results.append(DefResult(d.name, True, ty, None, d.pos))
            report.lints.extend(f"{d.name}: {msg}" for msg in ck.lints)
            body = ck.elaborate(d.body)
            elaborated.term_defs.append(TermDef(d.name, d.declared, body, d.pos))
            env = env.extend(d.name, ty, False)
        except CheckError as e:
            e.pos = d.pos
            report.results.append(DefResult(d.name, False, None, e, d.pos))
            if d.declared is not None:
                env = env.extend(d.name, d.declared, False)
            if not keep_going:
                break
    report.program = elaborated
    return report


# Module-level conveniences with a default checker


def convert_value(env: TypeEnv, v: A.Expr) -> A.Expr:
    return Checker().convert_value(env, v)


def unfold(env: TypeEnv, t: A.Type, fuel: int | None = None) -> A.Type:
    return Checker(fuel).unfold(Checker(fuel).prepare(env), t)


def kind_synth(env: TypeEnv, t: A.Type) -> Kind:
    return Checker().kind_synth(env, t)


def kind_check(env: TypeEnv, t: A.Type, k: Kind) -> None:
    Checker().kind_check(env, t, k)


def cond_extend(env: TypeEnv, x: str, t: A.Type) -> TypeEnv:
    ck = Checker()
    return ck.cond_extend(ck.prepare(env), x, t)


def sub_synth(env: TypeEnv, a: A.Type, b: A.Type, fuel: int | None = None) -> Kind:
    return Checker(fuel).sub_synth(env, a, b)


def sub_check(env: TypeEnv, a: A.Type, b: A.Type, k: Kind | None = None, fuel: int | None = None) -> Kind:
    return Checker(fuel).sub_check(env, a, b, k)


def type_synth(env: TypeEnv, m: A.Expr) -> SynthResult:
    return Checker().type_synth(env, m)


def type_check(env: TypeEnv, m: A.Expr, t: A.Type) -> TypeEnv:
    return Checker().type_check(env, m, t)


def check_process(env: TypeEnv, p: A.Process, main_type: A.Type | None = None) -> None:
    Checker().check_process(env, p, main_type)


def is_equivalent(env: TypeEnv, a: A.Type, b: A.Type) -> bool:
    """Mutual subtyping, our stand-in for type conversion."""
    ck = Checker()
    env = ck.prepare(env)
    with ck._fuel_scope():
        return ck._is_sub(env, a, b) and ck._is_sub(env, b, a)
