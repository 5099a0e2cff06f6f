"""Small-step operational semantics and a deterministic thread scheduler.

Threads hold closed expressions; reduction substitutes values for names.
The scheduler is parameterised by a ``Semantics`` object so that LSST can
reuse it with its own primitives.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Callable

from . import ast as A
from .printer import show

Plug = Callable[[A.Expr], A.Expr]


def _id(e: A.Expr) -> A.Expr:
    return e


# ---------------------------------------------------------------------------
# Single-expression steps


@dataclass(frozen=True)
class Stepped:
    expr: A.Expr
    rule: str


@dataclass(frozen=True)
class NeedsRendezvous:
    chan: str
    # "send" or "recv" for LDGV; LSST adds "select", "branch", "close", "wait"
    direction: str
    payload: object
    plug: Plug


@dataclass(frozen=True)
class Spawn:
    """A step that needs the configuration: ``new`` or ``fork``."""

    what: str
    arg: object
    plug: Plug


@dataclass(frozen=True)
class Finished:
    value: A.Expr


@dataclass(frozen=True)
class StuckExpr:
    reason: str


class LdgvSemantics:
    """Reduction rules.  ``defs`` maps top-level names to their values; a
    name is replaced by its definition only when a rule eliminates it, so
    configurations keep referring to definitions by name."""

    name = "ldgv"

    def __init__(self, defs: dict | None = None):
        self.defs = dict(defs or {})

    def resolve(self, v: A.Expr) -> A.Expr:
        while isinstance(v, A.Var) and v.name in self.defs:
            v = self.defs[v.name]
        return v

    def is_value(self, m: A.Expr) -> bool:
        return A.is_value(m)

    def decompose(self, m: A.Expr) -> tuple[A.Expr, Plug] | None:
        """Split into a redex and its evaluation context; None for values."""
        if self.is_value(m):
            return None
        return self._find(m)

    def _sub(self, m: A.Expr, wrap: Callable[[A.Expr], A.Expr]):
        r, k = self._find(m)
        return r, (lambda e: wrap(k(e)))

    def _find(self, m: A.Expr) -> tuple[A.Expr, Plug]:
        v = self.is_value
        if isinstance(m, A.App):
            if not v(m.fun):
                return self._sub(m.fun, lambda e: A.App(e, m.arg))
            if not v(m.arg):
                return self._sub(m.arg, lambda e: A.App(m.fun, e))
            return m, _id
        if isinstance(m, A.PairE):
            if not v(m.fst):
                return self._sub(m.fst, lambda e: A.PairE(m.binder, m.annot, e, m.snd))
            snd = A.subst_expr(m.snd, m.binder, m.fst)
            return self._sub(snd, lambda e: A.PairE(m.binder, m.annot, m.fst, e))
        if isinstance(m, (A.LetPair, A.Let)):
            if not v(m.bound):
                return self._sub(m.bound, lambda e: replace(m, bound=e))
            return m, _id
        if isinstance(m, (A.SendE, A.RecvE)):
            if not v(m.chan):
                return self._sub(m.chan, lambda e: type(m)(e))
            return m, _id
        if isinstance(m, A.Succ):
            return self._sub(m.pred, A.Succ)
        if isinstance(m, A.Neg):
            if not v(m.body):
                return self._sub(m.body, A.Neg)
            return m, _id
        if isinstance(m, A.Add):
            if not v(m.left):
                return self._sub(m.left, lambda e: A.Add(e, m.right))
            if not v(m.right):
                return self._sub(m.right, lambda e: A.Add(m.left, e))
            return m, _id
        return m, _id

    def reduce(self, r: A.Expr, plug: Plug):
        """One step of the redex ``r`` in context ``plug``."""
        if isinstance(r, A.App):
            f = self.resolve(r.fun)
            if isinstance(f, A.Lam):
                return Stepped(plug(A.subst_expr(f.body, f.binder, r.arg)), "Rl-Betav")
            if isinstance(f, A.SendE):
                chan = self.resolve(f.chan)
                if isinstance(chan, A.Chan):
                    return NeedsRendezvous(chan.name, "send", r.arg, plug)
                return StuckExpr(f"send on non-channel {show(f.chan)}")
            return StuckExpr(f"application of non-function {show(f)}")
        if isinstance(r, A.CaseE):
            s = self.resolve(r.scrutinee)
            if not isinstance(s, A.LabelV):
                return StuckExpr(f"match against a non-value label {show(s)}")
            b = r.branch(s.label)
            if b is None:
                return StuckExpr(f"no branch for label {s.label}")
            return Stepped(plug(b), "Rl-Case")
        if isinstance(r, A.LetPair):
            p = self.resolve(r.bound)
            if not isinstance(p, A.PairE):
                return StuckExpr(f"let-pair on non-pair {show(p)}")
            snd = A.subst_expr(p.snd, p.binder, p.fst)
            body = A.subst_expr(A.subst_expr(r.body, r.fst, p.fst), r.snd, snd)
            return Stepped(plug(body), "Rl-Prod-Elim")
        if isinstance(r, A.Let):
            return Stepped(plug(A.subst_expr(r.body, r.name, r.bound)), "Rl-Let")
        if isinstance(r, A.NatRecE):
            s = self.resolve(r.scrutinee)
            if isinstance(s, A.Zero):
                return Stepped(plug(r.zero), "RL-Z")
            if isinstance(s, A.Succ):
                again = replace(r, scrutinee=self.resolve(s.pred))
                body = r.succ
                if r.info_succ is not None:
                    rho = A.NatRec(s.pred, r.info_zero, r.tvar, r.info_kind, r.info_succ)
                    body = A.subst_tvar(body, r.tvar, rho)
                body = A.subst_expr(A.subst_expr(body, r.pred, s.pred), r.rec, again)
                return Stepped(plug(body), "RL-S")
            return StuckExpr(f"natrec over non-numeral {show(s)}")
        if isinstance(r, A.RecvE):
            chan = self.resolve(r.chan)
            if isinstance(chan, A.Chan):
                return NeedsRendezvous(chan.name, "recv", None, plug)
            return StuckExpr(f"recv on non-channel {show(r.chan)}")
        if isinstance(r, A.Neg):
            body = self.resolve(r.body)
            if isinstance(body, A.IntLit):
                return Stepped(plug(A.IntLit(-body.value)), "Rl-Neg")
            return StuckExpr(f"negation of {show(body)}")
        if isinstance(r, A.Add):
            left, right = self.resolve(r.left), self.resolve(r.right)
            if isinstance(left, A.IntLit) and isinstance(right, A.IntLit):
                return Stepped(plug(A.IntLit(left.value + right.value)), "Rl-Add")
            return StuckExpr(f"addition of {show(left)} and {show(right)}")
        if isinstance(r, A.New):
            return Spawn("new", r.annot, plug)
        if isinstance(r, A.Fork):
            return Spawn("fork", r.body, plug)
        return StuckExpr(f"no rule for {show(r)}")

    def step_expr(self, m: A.Expr):
        d = self.decompose(m)
        if d is None:
            return Finished(m)
        return self.reduce(*d)

    # -- configuration-level hooks -------------------------------------------
    def new_pair(self, c: str, d: str, annot) -> A.Expr:
        return A.PairE(A.fresh("c"), None, A.Chan(c), A.Chan(d))

    def rendezvous(self, a: NeedsRendezvous, b: NeedsRendezvous):
        """Combine two blocked actions on peered endpoints, sender first."""
        if a.direction == "send" and b.direction == "recv":
            received = A.PairE(A.fresh("x"), None, a.payload, A.Chan(b.chan))
            return a.plug(A.Chan(a.chan)), b.plug(received), "Rl-Com", False
        return None

    def is_unit(self, m: A.Expr) -> bool:
        return isinstance(m, A.UnitV)


LDGV = LdgvSemantics()


def step_expr(m: A.Expr):
    return LDGV.step_expr(m)


# ---------------------------------------------------------------------------
# Configurations


@dataclass(frozen=True)
class Thread:
    tid: int
    expr: A.Expr
    main: bool = False


@dataclass(frozen=True)
class Config:
    threads: tuple
    # endpoint -> peer endpoint
    peers: tuple = ()
    next_tid: int = 1
    next_chan: int = 1
    # allocation index -> current session type of the "c" endpoint
    types: tuple = ()
    closed: frozenset = frozenset()

    def peer(self, name: str) -> str | None:
        return dict(self.peers).get(name)

    def type_of(self, k: int):
        return dict(self.types).get(k)


def endpoint_index(name: str) -> int:
    return int(name[1:])


def initial_config(main: A.Expr) -> Config:
    return Config((Thread(0, main, True),))


def split_defs(prog, entry: str = "main", is_value=A.is_value) -> tuple[A.Expr, dict, list]:
    """The entry body, the value definitions before it (kept by name) and the
    remaining definitions, which are let-bound around the entry body."""
    defs = list(prog.term_defs)
    idx = next((i for i, d in enumerate(defs) if d.name == entry), None)
    if idx is None:
        raise KeyError(entry)
    values: dict = {}
    lets: list = []
    for d in defs[:idx]:
        if is_value(d.body) and not (A.free_names(d.body) & {x.name for x in lets}):
            values[d.name] = d.body
        else:
            lets.append(d)
    m = defs[idx].body
    for d in reversed(lets):
        if d.name in A.free_names(m):
            m = A.Let(d.name, d.body, m)
    return m, values, lets


@dataclass(frozen=True)
class StepEvent:
    index: int
    rule: str
    tids: tuple

    def __str__(self) -> str:
        return f"{self.index} {self.rule} {' '.join(map(str, self.tids))}"


@dataclass(frozen=True)
class AllFinished:
    values: tuple  # (tid, value) pairs
    main: A.Expr | None

    kind = "AllFinished"


@dataclass(frozen=True)
class Deadlocked:
    blocked: tuple  # (tid, description) pairs

    kind = "Deadlocked"


@dataclass(frozen=True)
class Stuck:
    tid: int
    reason: str

    kind = "Stuck"


@dataclass(frozen=True)
class OutOfFuel:
    steps: int

    kind = "OutOfFuel"


@dataclass(frozen=True)
class TypedReplayFailure:
    step: int
    message: str

    kind = "TypedReplayFailure"


Outcome = AllFinished | Deadlocked | Stuck | OutOfFuel | TypedReplayFailure


def _gc(threads: list, sem) -> tuple:
    return tuple(t for t in threads if t.main or not sem.is_unit(t.expr))


def _analyse(sem, cfg: Config, order: list[int], only: set | None):
    """Return (pure step, blocked list, stuck) for the threads in ``order``."""
    blocked = []
    for i in order:
        th = cfg.threads[i]
        if only is not None and th.tid not in only:
            continue
        res = sem.step_expr(th.expr)
        if isinstance(res, Finished):
            continue
        if isinstance(res, StuckExpr):
            return None, blocked, (th.tid, res.reason)
        if isinstance(res, NeedsRendezvous):
            blocked.append((i, res))
            continue
        return (i, res), blocked, None
    return None, blocked, None


def step_config(
    cfg: Config,
    sem=LDGV,
    rng: random.Random | None = None,
    only: set | None = None,
    advance_types: Callable | None = None,
):
    """One scheduler step: a new Config with its StepEvent, or an Outcome."""
    order = list(range(len(cfg.threads)))
    if rng is not None:
        rng.shuffle(order)
    pure, blocked, stuck = _analyse(sem, cfg, order, only)
    threads = list(cfg.threads)
    if pure is not None:
        i, res = pure
        th = threads[i]
        if isinstance(res, Stepped):
            threads[i] = replace(th, expr=res.expr)
            ev = (res.rule, (th.tid,))
            return replace(cfg, threads=_gc(threads, sem)), ev
        assert isinstance(res, Spawn)
        if res.what == "fork":
            threads[i] = replace(th, expr=res.plug(A.UnitV()))
            threads.append(Thread(cfg.next_tid, res.arg, False))
            new = replace(cfg, threads=_gc(threads, sem), next_tid=cfg.next_tid + 1)
            return new, ("Rl-Fork", (th.tid, cfg.next_tid))
        k = cfg.next_chan
        c, d = f"c{k}", f"d{k}"
        threads[i] = replace(th, expr=res.plug(sem.new_pair(c, d, res.arg)))
        types = cfg.types + ((k, res.arg),) if advance_types is not None else cfg.types
        new = replace(
            cfg,
            threads=_gc(threads, sem),
            peers=cfg.peers + ((c, d), (d, c)),
            next_chan=k + 1,
            types=types,
        )
        return new, ("Rl-New", (th.tid,))
    if stuck is not None:
        return Stuck(*stuck)
    peers = dict(cfg.peers)
    for x in range(len(blocked)):
        for y in range(x + 1, len(blocked)):
            (i, a), (j, b) = blocked[x], blocked[y]
            if peers.get(a.chan) != b.chan:
                continue
            for (si, s), (ri, r) in (((i, a), (j, b)), ((j, b), (i, a))):
                res = sem.rendezvous(s, r)
                if res is None:
                    continue
                new_s, new_r, rule, closes = res
                threads[si] = replace(threads[si], expr=new_s)
                threads[ri] = replace(threads[ri], expr=new_r)
                new = replace(cfg, threads=threads)
                k = endpoint_index(s.chan)
                if closes:
                    new = replace(
                        new,
                        peers=tuple(p for p in cfg.peers if endpoint_index(p[0]) != k),
                        closed=cfg.closed | {k},
                    )
                elif isinstance(s.payload, A.LabelV) and s.payload.label == "EOS":
                    new = replace(new, closed=cfg.closed | {k})
                if advance_types is not None:
                    new = replace(new, types=advance_types(cfg, s))
                new = replace(new, threads=_gc(list(new.threads), sem))
                tids = tuple(sorted((cfg.threads[si].tid, cfg.threads[ri].tid)))
                return new, (rule, tids)
    if only is not None:
        return None
    if all(sem.decompose(t.expr) is None for t in cfg.threads):
        main = next((t.expr for t in cfg.threads if t.main), None)
        return AllFinished(tuple((t.tid, t.expr) for t in cfg.threads), main)
    desc = tuple(
        (cfg.threads[i].tid, f"{r.direction} on @{r.chan}") for i, r in blocked
    )
    return Deadlocked(desc)


# ---------------------------------------------------------------------------
# Typed replay: carry endpoint types and re-check after every step


def _advance(cfg: Config, s: NeedsRendezvous) -> tuple:
    from .checker import Checker
    from .env import EMPTY

    k = endpoint_index(s.chan)
    types = dict(cfg.types)
    t = types[k]
    ck = Checker()
    if s.chan.startswith("c"):
        u = ck.unfold(EMPTY, t)
        if not isinstance(u, A.Send):
            raise ValueError(f"endpoint @{s.chan} of type {show(t)} cannot send")
        nxt = A.subst_type(u.cont, u.binder, s.payload) if A.is_value(s.payload) else u.cont
    else:
        u = ck.unfold(EMPTY, A.dual(t))
        if not isinstance(u, A.Send):
            raise ValueError(f"endpoint @{s.chan} of type {show(A.dual(t))} cannot send")
        nxt = A.dual(A.subst_type(u.cont, u.binder, s.payload))
    types[k] = nxt
    return tuple(sorted(types.items()))


def render_process(cfg: Config) -> A.Process:
    procs = [A.ProcE(t.expr, t.main) for t in cfg.threads]
    p: A.Process = procs[0] if procs else A.ProcE(A.UnitV())
    for q in procs[1:]:
        p = A.Par(p, q)
    for k, t in sorted(cfg.types, reverse=True):
        c, d = f"c{k}", f"d{k}"
        if k in cfg.closed and c not in dict(cfg.peers):
            continue
        p = A.Nu(c, d, p, t)
    return p


def check_config(cfg: Config, env=None, main_type: A.Type | None = None) -> None:
    from .checker import Checker
    from .env import EMPTY

    Checker().check_process(env if env is not None else EMPTY, render_process(cfg), main_type)


# ---------------------------------------------------------------------------
# Running


@dataclass
class RunResult:
    outcome: Outcome
    steps: int
    trace: list = field(default_factory=list)
    config: Config | None = None

    @property
    def main_value(self) -> A.Expr | None:
        if isinstance(self.outcome, AllFinished):
            return self.outcome.main
        return None


def run_config(
    cfg: Config,
    max_steps: int = 10_000,
    sem=LDGV,
    seed: int | None = None,
    typed_replay: bool = False,
    on_step: Callable | None = None,
    replay_env=None,
    main_type: A.Type | None = None,
) -> RunResult:
    rng = random.Random(seed) if seed is not None else None
    trace: list[StepEvent] = []
    advance = _advance if typed_replay else None
    if typed_replay:
        check_config(cfg, replay_env, main_type)
    for n in range(max_steps):
        res = step_config(cfg, sem, rng, advance_types=advance)
        if not isinstance(res, tuple):
            return RunResult(res, n, trace, cfg)
        cfg, (rule, tids) = res
        ev = StepEvent(n, rule, tids)
        trace.append(ev)
        if on_step is not None:
            on_step(ev, cfg)
        if typed_replay:
            from .checker import CheckError

            try:
                check_config(cfg, replay_env, main_type)
            except CheckError as e:
                return RunResult(TypedReplayFailure(n, e.render()), n + 1, trace, cfg)
    return RunResult(OutOfFuel(max_steps), max_steps, trace, cfg)


@dataclass
class Loaded:
    config: Config
    sem: LdgvSemantics
    env: object
    main_type: A.Type | None


def load_program(prog, entry: str = "main", report=None) -> Loaded:
    """Initial configuration for ``entry``; with a check report, the typing
    environment of the named definitions for typed replay."""
    from .env import EMPTY

    main, values, _ = split_defs(prog, entry)
    env = EMPTY
    main_type = None
    if report is not None:
        types = {r.name: r.type for r in report.results if r.ok}
        for name in values:
            env = env.extend(name, types[name], False)
        main_type = types.get(entry)
    return Loaded(initial_config(main), LdgvSemantics(values), env, main_type)


def run_program(prog, entry: str = "main", check: bool = True, **kw) -> RunResult:
    """Check (unless disabled) and run the entry definition."""
    report = None
    if check:
        from .checker import check_program

        report = check_program(prog)
        if not report.ok:
            raise ValueError(report.to_text())
        prog = report.program
    ld = load_program(prog, entry, report)
    return run_config(ld.config, sem=ld.sem, replay_env=ld.env, main_type=ld.main_type, **kw)


def show_value(v: A.Expr) -> str:
    """Results print without the parentheses a negative literal needs inside terms."""
    if isinstance(v, A.IntLit):
        return str(v.value)
    return show(v)


def outcome_text(res: RunResult, entry: str = "main") -> str:
    o = res.outcome
    if isinstance(o, AllFinished):
        lines = [f"{entry} = {show_value(o.main)}" if o.main is not None else "all threads finished"]
        for tid, v in o.values:
            if o.main is None or tid != 0:
                lines.append(f"thread {tid} = {show_value(v)}")
        return "\n".join(lines)
    if isinstance(o, Deadlocked):
        return "deadlocked: " + "; ".join(f"thread {t} blocked on {d}" for t, d in o.blocked)
    if isinstance(o, Stuck):
        return f"stuck: thread {o.tid}: {o.reason}"
    if isinstance(o, OutOfFuel):
        return f"out of fuel after {o.steps} steps"
    return f"typed replay failed after step {o.step}:\n{o.message}"


def outcome_data(res: RunResult, entry: str = "main") -> dict:
    o = res.outcome
    data: dict = {"outcome": o.kind, "steps": res.steps}
    if isinstance(o, AllFinished):
        data["main"] = {"name": entry, "value": show_value(o.main)} if o.main is not None else None
        data["threads"] = [{"id": tid, "value": show_value(v)} for tid, v in o.values]
    elif isinstance(o, Deadlocked):
        data["blocked"] = [{"id": tid, "on": d} for tid, d in o.blocked]
    elif isinstance(o, Stuck):
        data.update(thread=o.tid, reason=o.reason)
    elif isinstance(o, TypedReplayFailure):
        data.update(step=o.step, message=o.message)
    return data
