"""Ordered typing environments with unrestricted projection and join."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

from .ast import Eq, Kind, Type, alpha_eq
from .printer import show


class Unbound(LookupError):
    pass


class JoinConflict(ValueError):
    pass


@dataclass(frozen=True)
class TermBind:
    name: str
    type: Type
    # cached multiplicity, computed once when the entry is added
    lin: bool | None = None


@dataclass(frozen=True)
class TyVarBind:
    name: str
    kind: Kind | None = None


Entry = TermBind | TyVarBind
KindOracle = Callable[["TypeEnv", Type], Kind]


@dataclass(frozen=True)
class TypeEnv:
    entries: tuple = ()

    def __iter__(self) -> Iterator[Entry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: str) -> bool:
        return any(e.name == name for e in self.entries)

    def extend(self, name: str, ty: Type, lin: bool | None = None) -> "TypeEnv":
        return TypeEnv(self.entries + (TermBind(name, ty, lin),))

    def extend_tyvar(self, name: str, kind: Kind | None = None) -> "TypeEnv":
        return TypeEnv(self.entries + (TyVarBind(name, kind),))

    def entry(self, name: str) -> TermBind | None:
        for e in reversed(self.entries):
            if isinstance(e, TermBind) and e.name == name:
                return e
        return None

    def lookup(self, name: str) -> Type | None:
        e = self.entry(name)
        return e.type if e is not None else None

    def tyvar(self, name: str) -> TyVarBind | None:
        for e in reversed(self.entries):
            if isinstance(e, TyVarBind) and e.name == name:
                return e
        return None

    def names(self) -> list[str]:
        return [e.name for e in self.entries if isinstance(e, TermBind)]

    def equalities(self) -> Iterator[TermBind]:
        for e in reversed(self.entries):
            if isinstance(e, TermBind) and isinstance(e.type, Eq):
                yield e

    def linear_names(self) -> list[str]:
        return [e.name for e in self.entries if isinstance(e, TermBind) and e.lin]

    def dump(self) -> str:
        lines = []
        for e in self.entries:
            if isinstance(e, TermBind):
                lines.append(f"{e.name} : {show(e.type)}")
            else:
                lines.append(f"{e.name} : {e.kind if e.kind else 'tyvar'}")
        return "\n".join(lines)

    def __str__(self) -> str:
        return self.dump()


EMPTY = TypeEnv()


def _is_lin(prefix: TypeEnv, e: TermBind, kind_of: KindOracle | None) -> bool:
    if e.lin is not None:
        return e.lin
    if kind_of is None:
        raise ValueError(f"no kind available for {e.name}")
    return kind_of(prefix, e.type).is_lin


def unr(env: TypeEnv, kind_of: KindOracle | None = None) -> TypeEnv:
    kept: list[Entry] = []
    for e in env.entries:
        if isinstance(e, TyVarBind):
            kept.append(e)
        elif not _is_lin(TypeEnv(tuple(kept)), e, kind_of):
            kept.append(e if e.lin is not None else TermBind(e.name, e.type, False))
    kept_t = tuple(kept)
    return env if kept_t == env.entries else TypeEnv(kept_t)


def consume(env: TypeEnv, name: str) -> TypeEnv:
    for i in range(len(env.entries) - 1, -1, -1):
        e = env.entries[i]
        if isinstance(e, TermBind) and e.name == name:
            return TypeEnv(env.entries[:i] + env.entries[i + 1 :])
    raise Unbound(name)


def join(g1: TypeEnv, g2: TypeEnv, kind_of: KindOracle | None = None) -> TypeEnv:
    """Inverse of environment split: shared entries must be unrestricted."""
    out = list(g1.entries)
    for i, e in enumerate(g2.entries):
        same = [o for o in g1.entries if o.name == e.name]
        if not same:
            out.append(e)
            continue
        if isinstance(e, TyVarBind):
            if not any(isinstance(o, TyVarBind) for o in same):
                raise JoinConflict(e.name)
            continue
        if not any(isinstance(o, TermBind) and alpha_eq(e.type, o.type) for o in same):
            raise JoinConflict(f"{e.name}: types disagree")
        if _is_lin(TypeEnv(g2.entries[:i]), e, kind_of):
            raise JoinConflict(f"{e.name}: linear on both sides")
    return TypeEnv(tuple(out))


def same_env(g1: TypeEnv, g2: TypeEnv) -> str | None:
    """Order-insensitive comparison; returns the first differing name or None."""
    d1 = {e.name: e for e in g1.entries if isinstance(e, TermBind)}
    d2 = {e.name: e for e in g2.entries if isinstance(e, TermBind)}
    for name in list(d1) + list(d2):
        a, b = d1.get(name), d2.get(name)
        if a is None or b is None or not alpha_eq(a.type, b.type):
            return name
    return None
