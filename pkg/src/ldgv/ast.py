"""Abstract syntax for LDGV: kinds, types, expressions and processes.

Every syntax class is a frozen dataclass.  Binding structure is declared once
per class in ``_binds`` so that free names, substitution and alpha-equivalence
are implemented generically over both the LDGV and the LSST syntax trees.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Callable, ClassVar, Iterator

# ---------------------------------------------------------------------------
# Multiplicities, kinds, polarities


class Mult(Enum):
    UN = "un"
    LIN = "lin"

    def __le__(self, other: "Mult") -> bool:
        return self is Mult.UN or other is Mult.LIN

    def join(self, other: "Mult") -> "Mult":
        return Mult.LIN if Mult.LIN in (self, other) else Mult.UN


class Base(Enum):
    SESSION = "session"
    GENERAL = "general"


@dataclass(frozen=True)
class Kind:
    base: Base
    mult: Mult

    def __le__(self, other: "Kind") -> bool:
        base_ok = self.base is Base.SESSION or other.base is Base.GENERAL
        return base_ok and self.mult <= other.mult

    def join(self, other: "Kind") -> "Kind":
        base = Base.SESSION if self.base is other.base is Base.SESSION else Base.GENERAL
        return Kind(base, self.mult.join(other.mult))

    @property
    def is_lin(self) -> bool:
        return self.mult is Mult.LIN

    def __str__(self) -> str:
        return f"{self.base.value} {self.mult.value}"


SU = Kind(Base.SESSION, Mult.UN)
SL = Kind(Base.SESSION, Mult.LIN)
GU = Kind(Base.GENERAL, Mult.UN)
GL = Kind(Base.GENERAL, Mult.LIN)


class Polarity(Enum):
    POS = "+"
    NEG = "-"

    def flip(self) -> "Polarity":
        return Polarity.NEG if self is Polarity.POS else Polarity.POS


# ---------------------------------------------------------------------------
# Fresh names

_counter = itertools.count(1)


def base_name(name: str) -> str:
    return name.split("#", 1)[0] or "x"


def fresh(hint: str = "x") -> str:
    """A name that cannot clash with user-written identifiers."""
    return f"{base_name(hint)}#{next(_counter)}"


# ---------------------------------------------------------------------------
# Node base and generic traversal


class Node:
    # (binder field, namespace, fields in scope of the binder)
    _binds: ClassVar[tuple[tuple[str, str, tuple[str, ...]], ...]] = ()

    def __str__(self) -> str:  # pragma: no cover - thin wrapper
        from .printer import show

        return show(self)


Branches = tuple  # tuple[tuple[str, Node], ...], sorted by label


def branches(items) -> tuple:
    """Canonical (label-sorted) branch tuple from a mapping or pairs."""
    pairs = items.items() if isinstance(items, dict) else items
    return tuple(sorted(pairs, key=lambda kv: kv[0]))


def _is_branches(v) -> bool:
    return isinstance(v, tuple) and len(v) > 0 and isinstance(v[0], tuple)


def children(node: Node) -> Iterator[tuple[str, Node]]:
    for f in fields(node):
        v = getattr(node, f.name)
        if isinstance(v, Node):
            yield f.name, v
        elif _is_branches(v):
            for _, c in v:
                yield f.name, c


def map_children(node: Node, fn: Callable[[str, Node], Node]) -> Node:
    changes = {}
    for f in fields(node):
        v = getattr(node, f.name)
        if isinstance(v, Node):
            nv = fn(f.name, v)
            if nv is not v:
                changes[f.name] = nv
        elif _is_branches(v):
            nv = tuple((lab, fn(f.name, c)) for lab, c in v)
            if any(a[1] is not b[1] for a, b in zip(v, nv)):
                changes[f.name] = nv
    return replace(node, **changes) if changes else node


def _occurrence(node: Node, ns: str) -> str | None:
    if ns == "term" and isinstance(node, Var):
        return node.name
    if ns == "type" and isinstance(node, TVar):
        return node.name
    return None


def free_names(node: Node, ns: str = "term") -> set[str]:
    out: set[str] = set()

    def go(n: Node, bound: frozenset) -> None:
        occ = _occurrence(n, ns)
        if occ is not None:
            if occ not in bound:
                out.add(occ)
            return
        extra: dict[str, set] = {}
        for bfield, bns, scope in n._binds:
            if bns == ns:
                for s in scope:
                    extra.setdefault(s, set()).add(getattr(n, bfield))
        for fname, c in children(n):
            go(c, bound | extra[fname] if fname in extra else bound)

    go(node, frozenset())
    return out


def _rename(node: Node, ns: str, old: str, new: str) -> Node:
    if ns == "term":
        return subst(node, "term", old, lambda _occ: Var(new))
    return subst(node, "type", old, lambda occ: TVar(new, occ.pol))


def subst(node: Node, ns: str, name: str, repl: Callable[[Node], Node]) -> Node:
    """Capture-avoiding replacement of free occurrences of ``name``.

    ``repl`` receives the occurrence node (Var or TVar) and returns its
    replacement, which lets type-variable substitution respect polarity.
    """
    probe = repl(Var(name) if ns == "term" else TVar(name, Polarity.POS))
    danger = {"term": free_names(probe, "term"), "type": free_names(probe, "type")}
    if ns == "type":
        try:
            neg = repl(TVar(name, Polarity.NEG))
        except NotASessionType:
            neg = probe  # only failing if a negative occurrence exists
        danger["term"] |= free_names(neg, "term")
        danger["type"] |= free_names(neg, "type")

    def go(n: Node) -> Node:
        occ = _occurrence(n, ns)
        if occ is not None:
            return repl(n) if occ == name else n
        if not n._binds:
            return map_children(n, lambda _f, c: go(c))
        shadowed: set[str] = set()
        for bfield, bns, scope in n._binds:
            b = getattr(n, bfield)
            if bns == ns and b == name:
                shadowed |= set(scope)
            elif b in danger[bns]:
                nb = fresh(b)
                ch = {bfield: nb}
                for s in scope:
                    ch[s] = _rename_field(getattr(n, s), bns, b, nb)
                n = replace(n, **ch)
        return map_children(n, lambda f, c: c if f in shadowed else go(c))

    return go(node)


def _rename_field(v, ns: str, old: str, new: str):
    if isinstance(v, Node):
        return _rename(v, ns, old, new)
    return tuple((lab, _rename(c, ns, old, new)) for lab, c in v)


def subst_value(node: Node, x: str, v: Node) -> Node:
    return subst(node, "term", x, lambda _occ: v)


def subst_type(a: "Type", x: str, v: "Expr") -> "Type":
    return subst_value(a, x, v)  # type: ignore[return-value]


def subst_expr(m: "Expr", x: str, v: "Expr") -> "Expr":
    return subst_value(m, x, v)  # type: ignore[return-value]


def subst_tvar(a: Node, alpha: str, rho: "Type") -> Node:
    """Replace alpha+ by rho and alpha- by dual(rho)."""
    cache: dict[Polarity, Node] = {}

    def repl(occ: Node) -> Node:
        pol = occ.pol  # type: ignore[attr-defined]
        if pol not in cache:
            cache[pol] = rho if pol is Polarity.POS else dual(rho)
        return cache[pol]

    return subst(a, "type", alpha, repl)


# ---------------------------------------------------------------------------
# Alpha-equivalence via a nameless canonical form

_IGNORED = {"kind", "info_zero", "info_succ", "info_kind"}


def canonical(node: Node):
    counter = itertools.count()

    def go(n, env: dict) -> object:
        if isinstance(n, Var):
            return ("bv", env[("term", n.name)]) if ("term", n.name) in env else ("fv", n.name)
        if isinstance(n, TVar):
            key = ("type", n.name)
            return ("tv", env.get(key, n.name), n.pol.value)
        binder_fields = {b for b, _, _ in n._binds}
        scoped: dict[str, dict] = {}
        for bfield, bns, scope in n._binds:
            lvl = next(counter)
            for s in scope:
                scoped.setdefault(s, {})[(bns, getattr(n, bfield))] = lvl
        out: list = [type(n).__name__]
        for f in fields(n):
            if f.name in binder_fields or f.name in _IGNORED:
                continue
            v = getattr(n, f.name)
            sub_env = {**env, **scoped[f.name]} if f.name in scoped else env
            if isinstance(v, Node):
                out.append(go(v, sub_env))
            elif _is_branches(v):
                out.append(tuple((lab, go(c, sub_env)) for lab, c in sorted(v, key=lambda kv: kv[0])))
            elif isinstance(v, frozenset):
                out.append(tuple(sorted(v)))
            else:
                out.append(v)
        return tuple(out)

    return go(node, {})


def alpha_eq(a: Node, b: Node) -> bool:
    return canonical(a) == canonical(b)


# ---------------------------------------------------------------------------
# Types


class Type(Node):
    pass


@dataclass(frozen=True)
class UnitT(Type):
    pass


@dataclass(frozen=True)
class IntT(Type):
    pass


@dataclass(frozen=True)
class NatT(Type):
    pass


@dataclass(frozen=True)
class EndT(Type):
    pass


@dataclass(frozen=True)
class LabelTy(Type):
    labels: frozenset

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValueError("label sets are never empty")


@dataclass(frozen=True)
class Eq(Type):
    index: Type
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Case(Type):
    scrutinee: "Expr"
    branches: tuple

    def branch(self, label: str):
        return dict(self.branches).get(label)

    @property
    def labels(self) -> frozenset:
        return frozenset(lab for lab, _ in self.branches)


@dataclass(frozen=True)
class Pi(Type):
    mult: Mult
    binder: str
    dom: Type
    cod: Type
    _binds = (("binder", "term", ("cod",)),)


@dataclass(frozen=True)
class Sigma(Type):
    binder: str
    fst: Type
    snd: Type
    _binds = (("binder", "term", ("snd",)),)


@dataclass(frozen=True)
class Send(Type):
    binder: str
    payload: Type
    cont: Type
    _binds = (("binder", "term", ("cont",)),)


@dataclass(frozen=True)
class Recv(Type):
    binder: str
    payload: Type
    cont: Type
    _binds = (("binder", "term", ("cont",)),)


@dataclass(frozen=True)
class NatRec(Type):
    scrutinee: "Expr"
    zero: Type
    tvar: str
    kind: Kind | None
    succ: Type
    _binds = (("tvar", "type", ("succ",)),)


@dataclass(frozen=True)
class TVar(Type):
    name: str
    pol: Polarity = Polarity.POS


Unit, Int, Nat, End = UnitT(), IntT(), NatT(), EndT()


def labels(*names: str) -> LabelTy:
    return LabelTy(frozenset(names))


# ---------------------------------------------------------------------------
# Expressions.  Value forms subclass Value; a pair whose second component is
# a value and a ``send`` applied to a value are values as well (see is_value).


class Expr(Node):
    pass


class Value(Expr):
    pass


@dataclass(frozen=True)
class Var(Value):
    name: str


@dataclass(frozen=True)
class Chan(Value):
    name: str


@dataclass(frozen=True)
class LabelV(Value):
    label: str


@dataclass(frozen=True)
class UnitV(Value):
    pass


@dataclass(frozen=True)
class IntLit(Value):
    value: int


@dataclass(frozen=True)
class Zero(Value):
    pass


@dataclass(frozen=True)
class Succ(Value):
    pred: Expr


@dataclass(frozen=True)
class Lam(Value):
    mult: Mult
    binder: str
    annot: Type
    body: Expr
    _binds = (("binder", "term", ("body",)),)


@dataclass(frozen=True)
class CaseE(Expr):
    scrutinee: Expr
    branches: tuple

    def branch(self, label: str):
        return dict(self.branches).get(label)


@dataclass(frozen=True)
class App(Expr):
    fun: Expr
    arg: Expr


@dataclass(frozen=True)
class PairE(Expr):
    binder: str
    annot: Type | None
    fst: Expr
    snd: Expr
    _binds = (("binder", "term", ("snd",)),)


@dataclass(frozen=True)
class LetPair(Expr):
    fst: str
    snd: str
    bound: Expr
    body: Expr
    _binds = (("fst", "term", ("body",)), ("snd", "term", ("body",)))


@dataclass(frozen=True)
class Let(Expr):
    name: str
    bound: Expr
    body: Expr
    _binds = (("name", "term", ("body",)),)


@dataclass(frozen=True)
class New(Expr):
    annot: Type


@dataclass(frozen=True)
class Fork(Expr):
    body: Expr


@dataclass(frozen=True)
class SendE(Expr):
    chan: Expr


@dataclass(frozen=True)
class RecvE(Expr):
    chan: Expr


@dataclass(frozen=True)
class NatRecE(Expr):
    """Term-level recursor ``natrec V { Z: M, S(x) with [a](y:T): N }``.

    The ``info_*`` fields are filled in by the checker with the zero-arm
    type, the successor-arm body of the type-level recursor and its kind; the
    evaluator uses them to instantiate ``a`` when unrolling.
    """

    scrutinee: Expr
    zero: Expr
    pred: str
    tvar: str
    rec: str
    rec_type: Type
    succ: Expr
    info_zero: Type | None = None
    info_succ: Type | None = None
    info_kind: Kind | None = None
    _binds = (
        ("pred", "term", ("succ",)),
        ("rec", "term", ("succ",)),
        ("tvar", "type", ("rec_type", "succ", "info_succ")),
    )


@dataclass(frozen=True)
class Neg(Expr):
    body: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


def is_value(m: Expr) -> bool:
    if isinstance(m, Succ):
        return is_value(m.pred)
    if isinstance(m, Value):
        return True
    if isinstance(m, PairE):
        return is_value(m.fst) and is_value(m.snd)
    if isinstance(m, SendE):
        return is_value(m.chan)
    return False


def DepPair(binder: str, annot: Type | None, fst: Expr, snd: Expr) -> PairE:
    """Value-level dependent pair: a PairE whose components are values."""
    assert is_value(fst) and is_value(snd)
    return PairE(binder, annot, fst, snd)


def SendPartial(chan: Expr) -> SendE:
    assert is_value(chan)
    return SendE(chan)


def nat_lit(n: int) -> Expr:
    v: Expr = Zero()
    for _ in range(n):
        v = Succ(v)
    return v


# ---------------------------------------------------------------------------
# Processes


class Process(Node):
    pass


@dataclass(frozen=True)
class ProcE(Process):
    expr: Expr
    main: bool = False


@dataclass(frozen=True)
class Par(Process):
    left: Process
    right: Process


@dataclass(frozen=True)
class Nu(Process):
    c: str
    d: str
    body: Process
    annot: Type | None = None


# ---------------------------------------------------------------------------
# Duality


class NotASessionType(ValueError):
    pass


def is_session(a: Type) -> bool:
    if isinstance(a, (EndT, UnitT, TVar, Send, Recv)):
        return True
    if isinstance(a, Case):
        return all(is_session(b) for _, b in a.branches)
    if isinstance(a, NatRec):
        return is_session(a.zero) and is_session(a.succ)
    return False


def swap_polarity(a: Node, alpha: str) -> Node:
    return subst(a, "type", alpha, lambda occ: TVar(alpha, occ.pol.flip()))  # type: ignore[attr-defined]


def dual(s: Type) -> Type:
    if isinstance(s, (EndT, UnitT)):
        return s
    if isinstance(s, Send):
        return Recv(s.binder, s.payload, dual(s.cont))
    if isinstance(s, Recv):
        return Send(s.binder, s.payload, dual(s.cont))
    if isinstance(s, Case):
        return Case(s.scrutinee, tuple((lab, dual(b)) for lab, b in s.branches))
    if isinstance(s, TVar):
        return TVar(s.name, s.pol.flip())
    if isinstance(s, NatRec):
        # The recursion variable keeps its meaning: dualising the arm flips
        # its occurrences, which we flip back.
        succ = swap_polarity(dual(s.succ), s.tvar)
        return NatRec(s.scrutinee, dual(s.zero), s.tvar, s.kind, succ)  # type: ignore[arg-type]
    raise NotASessionType(f"not a session type: {s}")
