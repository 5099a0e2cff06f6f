"""Co-run an LSST program and its LDGV translation step by step."""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import ast as A
from ..checker import check_program
from ..eval import AllFinished, Config, LdgvSemantics, initial_config, show_value, split_defs, step_config
from . import syntax as L
from .eval import lsst_load
from .translate import translate, translate_expr
from .typing import lsst_type_check

DEFAULT_BOUND = 8


class SimulationMismatch(Exception):
    def __init__(self, step: int, lsst_cfg, ldgv_cfg, message: str):
        self.step = step
        self.lsst_cfg = lsst_cfg
        self.ldgv_cfg = ldgv_cfg
        super().__init__(message)


@dataclass
class SimStep:
    index: int
    rule: str
    tids: tuple
    ldgv_rules: tuple

    @property
    def ldgv_steps(self) -> int:
        return len(self.ldgv_rules)


@dataclass
class SimReport:
    steps: list = field(default_factory=list)
    lsst_outcome: object = None
    ldgv_outcome: object = None
    lsst_value: A.Expr | None = None
    ldgv_value: A.Expr | None = None
    error: str | None = None
    mismatch: SimulationMismatch | None = None

    @property
    def values_agree(self) -> bool:
        if self.lsst_value is None or self.ldgv_value is None:
            return self.lsst_value is None and self.ldgv_value is None
        return A.alpha_eq(translate_expr(self.lsst_value), self.ldgv_value)

    @property
    def ok(self) -> bool:
        return self.error is None and self.values_agree

    @property
    def max_ldgv_steps(self) -> int:
        return max((s.ldgv_steps for s in self.steps), default=0)

    def to_text(self) -> str:
        lines = [f"{s.index} {s.rule} {' '.join(map(str, s.tids))} -> {s.ldgv_steps} ({', '.join(s.ldgv_rules)})" for s in self.steps]
        lines.append(f"lsst steps: {len(self.steps)}")
        lines.append(f"ldgv steps: {sum(s.ldgv_steps for s in self.steps)} (at most {self.max_ldgv_steps} per lsst step)")
        if self.lsst_value is not None:
            lines.append(f"lsst main = {show_value(self.lsst_value)}")
        if self.ldgv_value is not None:
            lines.append(f"ldgv main = {show_value(self.ldgv_value)}")
        if self.error:
            lines.append(f"FAIL: {self.error}")
        else:
            lines.append("simulation ok" if self.ok else "FAIL: final values differ")
        return "\n".join(lines)

    def to_data(self) -> dict:
        return {
            "ok": self.ok,
            "steps": [
                {"index": s.index, "rule": s.rule, "threads": list(s.tids), "ldgv_rules": list(s.ldgv_rules)}
                for s in self.steps
            ],
            "lsst_steps": len(self.steps),
            "ldgv_steps": sum(s.ldgv_steps for s in self.steps),
            "lsst_value": show_value(self.lsst_value) if self.lsst_value is not None else None,
            "ldgv_value": show_value(self.ldgv_value) if self.ldgv_value is not None else None,
            "error": self.error,
        }


def _closed_names(cfg: Config) -> set[str]:
    return {f"{p}{k}" for k in cfg.closed for p in "cd"}


def _erase(m: A.Node, dead: set[str]) -> A.Node:
    if isinstance(m, A.Chan):
        return A.UnitV() if m.name in dead else m
    return A.map_children(m, lambda _f, c: _erase(c, dead))


def normalize(cfg: Config) -> tuple:
    """Canonical form of an LDGV configuration up to closed channels.

    Endpoints of channels that carried the end-of-session label behave like
    unit; threads left holding only such endpoints or unit are dropped."""
    dead = _closed_names(cfg)
    threads = []
    for t in cfg.threads:
        e = _erase(t.expr, dead)
        if not t.main and isinstance(e, A.UnitV):
            continue
        threads.append((t.tid, A.canonical(e)))
    live = tuple(sorted(k for k in range(1, cfg.next_chan) if k not in cfg.closed))
    return tuple(threads), live


def lsst_image(cfg: Config) -> Config:
    """Translate every thread of an LSST configuration."""
    from dataclasses import replace

    threads = tuple(replace(t, expr=translate_expr(t.expr)) for t in cfg.threads)
    return replace(cfg, threads=threads)


def _search(start: Config, sem, involved: set, target, bound: int):
    """Shortest sequence of at most ``bound`` steps of the involved threads
    leading to a configuration equal to ``target``."""
    frontier = [(start, frozenset(involved), ())]
    seen = {normalize(start)}
    for _ in range(bound):
        nxt = []
        for cfg, only, rules in frontier:
            tids = sorted(only)
            choices = [{t} for t in tids] + [{a, b} for i, a in enumerate(tids) for b in tids[i + 1 :]]
            for choice in choices:
                res = step_config(cfg, sem, only=choice)
                if not isinstance(res, tuple):
                    continue
                new, (rule, ltids) = res
                key = normalize(new)
                if key in seen:
                    continue
                seen.add(key)
                path = rules + (rule,)
                if key == target:
                    return new, path
                nxt.append((new, only | set(ltids), path))
        frontier = nxt
    return None


def simulate_check(prog: L.LsstProgram, max_steps: int = 10_000, bound: int = DEFAULT_BOUND, entry: str = "main") -> SimReport:
    rep = SimReport()
    tp = lsst_type_check(prog)
    target_prog = translate(tp)
    checked = check_program(target_prog)
    if not checked.ok:
        rep.error = "translation does not check:\n" + checked.to_text()
        return rep
    g, gsem = lsst_load(tp.program, entry)
    main, values, _ = split_defs(checked.program, entry)
    l, lsem = initial_config(main), LdgvSemantics(values)
    if normalize(l) != normalize(lsst_image(g)):
        rep.error = "initial configurations differ"
        return rep
    for n in range(max_steps):
        res = step_config(g, gsem)
        if not isinstance(res, tuple):
            rep.lsst_outcome = res
            break
        g, (rule, tids) = res
        target = normalize(lsst_image(g))
        found = _search(l, lsem, set(tids), target, bound)
        matched = found is not None
        if matched:
            l, rules = found
        else:
            rules = []
        rep.steps.append(SimStep(n, rule, tids, tuple(rules)))
        if not matched:
            rep.mismatch = SimulationMismatch(n, g, l, f"LSST step {n} ({rule}) not matched within {bound} LDGV steps")
            rep.error = str(rep.mismatch)
            return rep
    else:
        rep.error = f"out of fuel after {max_steps} steps"
        return rep
    # let the LDGV side finish on its own (it should already be done)
    lres = step_config(l, lsem)
    rep.ldgv_outcome = lres if not isinstance(lres, tuple) else None
    if isinstance(rep.lsst_outcome, AllFinished):
        rep.lsst_value = rep.lsst_outcome.main
    if isinstance(rep.ldgv_outcome, AllFinished):
        rep.ldgv_value = rep.ldgv_outcome.main
    if rep.ldgv_outcome is None:
        rep.error = "LDGV side can still step after LSST finished"
    elif type(rep.ldgv_outcome) is not type(rep.lsst_outcome):
        rep.error = f"outcomes differ: {rep.lsst_outcome.kind} vs {rep.ldgv_outcome.kind}"
    return rep
