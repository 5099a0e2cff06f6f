"""Hypothesis generators for closed, well-kinded LDGV types."""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

from hypothesis import strategies as st

from ldgv import ast as A
from ldgv.lsst import syntax as L

LABELS = ("A", "B", "C")
MAX_DEPTH = 6

LABEL_SETS = tuple(frozenset(c) for n in (1, 2, 3) for c in combinations(LABELS, n))
label_sets = st.sampled_from(LABEL_SETS)


def build_session(choose, depth: int = MAX_DEPTH, lvars=(), nvars=(), tvar=None, polarities=(A.Polarity.POS,)):
    """A session type whose case scrutinees and recursor indices are bound by
    an enclosing payload, so the result kinds in the empty environment.
    ``choose`` picks one element of a tuple."""
    choices = ("end",)
    if depth > 0:
        choices += ("send", "recv", "send", "recv", "natrec")
        if lvars:
            choices += ("case",)
    if tvar is not None:
        choices += ("tvar", "tvar")
    what = choose(choices)
    if what == "end":
        return A.End
    if what == "tvar":
        return A.TVar(tvar, choose(polarities))
    sub = dict(lvars=lvars, nvars=nvars, tvar=tvar, polarities=polarities)
    if what in ("send", "recv"):
        x = A.fresh("x")
        pay = choose(("int", "unit", "labels", "nat"))
        if pay == "labels":
            ls = choose(LABEL_SETS)
            payload: A.Type = A.LabelTy(ls)
            sub["lvars"] = lvars + ((x, ls),)
        elif pay == "nat":
            payload = A.Nat
            sub["nvars"] = nvars + (x,)
        else:
            payload = A.Int if pay == "int" else A.Unit
        cont = build_session(choose, depth - 1, **sub)
        return (A.Send if what == "send" else A.Recv)(x, payload, cont)
    if what == "case":
        x, ls = choose(lvars)
        arms = [(lab, build_session(choose, depth - 1, **sub)) for lab in sorted(ls)]
        return A.Case(A.Var(x), A.branches(arms))
    # natrec over a numeral or a received natural number
    if nvars and choose((True, False)):
        idx: A.Expr = A.Var(choose(nvars))
    else:
        idx = A.nat_lit(choose((0, 1, 2)))
    zero = build_session(choose, depth - 1, **sub)
    a = A.fresh("a")
    succ = build_session(choose, depth - 1, **{**sub, "tvar": a})
    return A.NatRec(idx, zero, a, None, succ)


@lru_cache(maxsize=None)
def _sampled(options: tuple):
    return st.sampled_from(options)


def _chooser(draw):
    return lambda options: draw(_sampled(tuple(options)))


@st.composite
def session_types(draw, depth: int = MAX_DEPTH, lvars=(), nvars=(), tvar=None, polarities=(A.Polarity.POS,)):
    return build_session(_chooser(draw), depth, lvars, nvars, tvar, polarities)


def build_general(choose, depth: int = 3):
    """A well-kinded closed type mixing the general and session fragments."""
    kinds = ("session", "base", "labels", "pi", "sigma") if depth > 0 else ("session", "base", "labels")
    what = choose(kinds)
    if what == "session":
        return build_session(choose, min(depth + 1, MAX_DEPTH))
    if what == "base":
        return choose((A.Unit, A.Int, A.Nat))
    if what == "labels":
        return A.LabelTy(choose(LABEL_SETS))
    x = A.fresh("x")
    if choose((True, False)):
        ls = choose(LABEL_SETS)
        dom: A.Type = A.LabelTy(ls)
        if choose((True, False)):
            cod: A.Type = A.Case(A.Var(x), A.branches((lab, build_general(choose, depth - 1)) for lab in sorted(ls)))
        else:
            cod = build_general(choose, depth - 1)
    else:
        dom = build_general(choose, depth - 1)
        cod = build_general(choose, depth - 1)
    if what == "pi":
        return A.Pi(choose((A.Mult.UN, A.Mult.LIN)), x, dom, cod)
    return A.Sigma(x, dom, cod)


@st.composite
def general_types(draw, depth: int = 3):
    return build_general(_chooser(draw), depth)


def weaken(t: A.Type, rnd) -> A.Type:
    """A candidate supertype obtained by adjusting label payloads."""
    if isinstance(t, A.Send):
        pay = _shrink(t.payload, rnd) if not A.free_names(t.cont) & {t.binder} else t.payload
        return A.Send(t.binder, pay, weaken(t.cont, rnd))
    if isinstance(t, A.Recv):
        pay = _widen(t.payload, rnd) if not A.free_names(t.cont) & {t.binder} else t.payload
        return A.Recv(t.binder, pay, weaken(t.cont, rnd))
    if isinstance(t, A.Pi):
        return A.Pi(A.Mult.LIN if rnd.random() < 0.6 else t.mult, t.binder, t.dom, weaken(t.cod, rnd))
    if isinstance(t, A.Sigma):
        return A.Sigma(t.binder, t.fst, weaken(t.snd, rnd))
    if isinstance(t, A.LabelTy):
        return _widen(t, rnd)
    return t


def _widen(t: A.Type, rnd) -> A.Type:
    if isinstance(t, A.LabelTy) and rnd.random() < 0.8:
        return A.LabelTy(t.labels | {rnd.choice(LABELS)})
    return t


def _shrink(t: A.Type, rnd) -> A.Type:
    if isinstance(t, A.LabelTy) and len(t.labels) > 1 and rnd.random() < 0.8:
        return A.LabelTy(t.labels - {sorted(t.labels)[0]})
    return t


@st.composite
def unfold_candidates(draw):
    """Case and natrec types together with the environment they live in."""
    from ldgv.env import EMPTY

    if draw(st.booleans()):
        ls = draw(label_sets)
        x = A.fresh("l")
        env = EMPTY.extend(x, A.LabelTy(ls), False)
        arms = [(lab, draw(session_types(3))) for lab in sorted(ls)]
        return env, A.Case(A.Var(x), A.branches(arms))
    idx = A.nat_lit(draw(st.integers(0, 3)))
    a = A.fresh("a")
    zero = draw(session_types(3))
    succ = draw(session_types(3, tvar=a))
    return EMPTY, A.NatRec(idx, zero, a, None, succ)


@st.composite
def lsst_session_types(draw, depth: int = 4):
    if depth == 0:
        return draw(st.sampled_from([L.LEndOut(), L.LEndIn()]))
    what = draw(st.sampled_from(["end!", "end?", "send", "recv", "select", "branch"]))
    if what == "end!":
        return L.LEndOut()
    if what == "end?":
        return L.LEndIn()
    if what in ("send", "recv"):
        pay = draw(st.sampled_from([L.LInt(), L.LUnit()]))
        cont = draw(lsst_session_types(depth - 1))
        return L.LSend(pay, cont) if what == "send" else L.LRecv(pay, cont)
    ls = sorted(draw(label_sets))
    bs = tuple((lab, draw(lsst_session_types(depth - 1))) for lab in ls)
    return L.LSelect(bs) if what == "select" else L.LBranch(bs)


def lsst_weaken(t: L.LType, rnd) -> L.LType:
    """A supertype: drop select branches, add branch alternatives."""
    if isinstance(t, (L.LSend, L.LRecv)):
        return type(t)(t.payload, lsst_weaken(t.cont, rnd))
    if isinstance(t, L.LSelect):
        bs = [(lab, lsst_weaken(s, rnd)) for lab, s in t.branches]
        if len(bs) > 1 and rnd.random() < 0.5:
            bs.pop(rnd.randrange(len(bs)))
        return L.LSelect(tuple(bs))
    if isinstance(t, L.LBranch):
        bs = [(lab, lsst_weaken(s, rnd)) for lab, s in t.branches]
        missing = [lab for lab in LABELS if lab not in dict(bs)]
        if missing and rnd.random() < 0.5:
            bs.append((missing[0], L.LEndOut()))
        return L.LBranch(tuple(sorted(bs)))
    return t
