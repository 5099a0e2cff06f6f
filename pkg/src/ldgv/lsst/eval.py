"""Synchronous LSST reduction, run on the scheduler of ``ldgv.eval``."""

from __future__ import annotations

from .. import ast as A
from ..eval import (
    Config,
    LdgvSemantics,
    NeedsRendezvous,
    RunResult,
    Spawn,
    Stepped,
    StuckExpr,
    initial_config,
    run_config,
    split_defs,
    step_config,
)
from ..printer import show
from . import syntax as L


class LsstSemantics(LdgvSemantics):
    name = "lsst"

    def is_value(self, m: A.Expr) -> bool:
        return L.lsst_is_value(m)

    def _find(self, m: A.Expr):
        v = self.is_value
        if isinstance(m, L.LPair):
            if not v(m.fst):
                return self._sub(m.fst, lambda e: L.LPair(e, m.snd))
            return self._sub(m.snd, lambda e: L.LPair(m.fst, e))
        if isinstance(m, (L.Close, L.Wait)):
            if not v(m.chan):
                return self._sub(m.chan, lambda e: type(m)(e))
            return m, lambda e: e
        if isinstance(m, L.RCase):
            if not v(m.chan):
                return self._sub(m.chan, lambda e: L.RCase(e, m.branches))
            return m, lambda e: e
        return super()._find(m)

    def reduce(self, r: A.Expr, plug):
        if isinstance(r, A.App):
            f = self.resolve(r.fun)
            if isinstance(f, L.Select):
                chan = self.resolve(r.arg)
                if isinstance(chan, A.Chan):
                    return NeedsRendezvous(chan.name, "select", f.label, plug)
                return StuckExpr(f"select on non-channel {show(chan)}")
        if isinstance(r, A.LetPair):
            p = self.resolve(r.bound)
            if isinstance(p, L.LPair):
                body = A.subst_expr(A.subst_expr(r.body, r.fst, p.fst), r.snd, p.snd)
                return Stepped(plug(body), "Rl-Prod-Elim")
        if isinstance(r, L.RCase):
            chan = self.resolve(r.chan)
            if isinstance(chan, A.Chan):
                return NeedsRendezvous(chan.name, "branch", r.branches, plug)
            return StuckExpr(f"rcase on non-channel {show(chan)}")
        if isinstance(r, (L.Close, L.Wait)):
            chan = self.resolve(r.chan)
            what = "close" if isinstance(r, L.Close) else "wait"
            if isinstance(chan, A.Chan):
                return NeedsRendezvous(chan.name, what, None, plug)
            return StuckExpr(f"{what} on non-channel {show(chan)}")
        if isinstance(r, L.LNew):
            return Spawn("new", r.annot, plug)
        return super().reduce(r, plug)

    def new_pair(self, c: str, d: str, annot) -> A.Expr:
        return L.LPair(A.Chan(c), A.Chan(d))

    def rendezvous(self, a: NeedsRendezvous, b: NeedsRendezvous):
        if a.direction == "send" and b.direction == "recv":
            return a.plug(A.Chan(a.chan)), b.plug(L.LPair(a.payload, A.Chan(b.chan))), "Rl-Com", False
        if a.direction == "select" and b.direction == "branch":
            rb = dict(b.payload).get(a.payload)
            if rb is None:
                return None
            body = A.subst_expr(rb.body, rb.binder, A.Chan(b.chan))
            return a.plug(A.Chan(a.chan)), b.plug(body), "Rl-Branch", False
        if a.direction == "close" and b.direction == "wait":
            return a.plug(A.UnitV()), b.plug(A.UnitV()), "Rl-Close", True
        return None


def lsst_load(prog: L.LsstProgram, entry: str = "main") -> tuple[Config, LsstSemantics]:
    main, values, _ = split_defs(prog, entry, L.lsst_is_value)
    return initial_config(main), LsstSemantics(values)


def lsst_step(cfg: Config, sem: LsstSemantics):
    return step_config(cfg, sem)


def lsst_run(prog: L.LsstProgram, entry: str = "main", max_steps: int = 10_000, seed: int | None = None) -> RunResult:
    cfg, sem = lsst_load(prog, entry)
    return run_config(cfg, max_steps, sem=sem, seed=seed)
