"""Acceptance criteria.  Each criterion is a function returning (ok, detail);
pytest runs them as tests and the run ends with one PASS/FAIL line per
criterion.  ``python tests/test_acceptance.py`` prints the same lines."""

from __future__ import annotations

import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from hypothesis import HealthCheck, given, settings, strategies as st  # noqa: E402

from ldgv import ast as A  # noqa: E402
from ldgv.checker import CheckError, Checker, check_program, is_equivalent, kind_synth, sub_check, type_synth, unfold  # noqa: E402
from ldgv.env import EMPTY, unr  # noqa: E402
from ldgv.eval import AllFinished, Deadlocked, Stuck, run_program, show_value  # noqa: E402
from ldgv.lsst.simulate import simulate_check  # noqa: E402
from ldgv.lsst.translate import translate  # noqa: E402
from ldgv.lsst.typing import lsst_check_program, lsst_type_check  # noqa: E402
from ldgv.parser import parse_ldgv, parse_lsst, parse_type  # noqa: E402

from corpus import NEGATIVE, corpus, listing  # noqa: E402
from strategies import general_types, session_types, unfold_candidates, weaken  # noqa: E402

RESULTS: dict[int, tuple[bool, str]] = {}
TITLES = {
    1: "golden listings parse and check",
    2: "compute server behaviour",
    3: "summing server",
    4: "node round trip",
    5: "recursor equivalences",
    6: "duality involution",
    7: "subtyping reflexivity and transitivity",
    8: "unfolding soundness",
    9: "absence of run-time errors",
    10: "embedding of LSST",
    11: "sendNode synthesis",
    12: "negative suite",
}


def _settings(n: int):
    return settings(
        max_examples=n,
        deadline=None,
        database=None,
        derandomize=True,
        suppress_health_check=list(HealthCheck),
    )


def criterion_1():
    worst = 0.0
    for name in ("compute.ldgv", "sum.ldgv", "node.ldgv"):
        start = time.perf_counter()
        report = check_program(parse_ldgv(listing(name)))
        worst = max(worst, time.perf_counter() - start)
        if not report.ok:
            return False, f"{name}:\n{report.to_text()}"
    start = time.perf_counter()
    report = lsst_check_program(parse_lsst(listing("compute.lsst"))).report
    worst = max(worst, time.perf_counter() - start)
    if not report.ok:
        return False, report.to_text()
    return worst < 1.0, f"4 files, slowest {worst:.3f}s"


def criterion_2():
    prog = parse_ldgv(listing("compute.ldgv"))
    neg = [show_value(run_program(prog).main_value) for _ in range(10)]
    add = show_value(run_program(prog, "addMain").main_value)
    traces = {tuple(map(str, run_program(prog).trace)) for _ in range(10)}
    ok = set(neg) == {"-5"} and add == "7" and len(traces) == 1
    return ok, f"Neg 5 -> {neg[0]} (10 runs, {len(traces)} distinct trace), Add 3 4 -> {add}"


def criterion_3():
    prog = parse_ldgv(listing("sum.ldgv"))
    three = show_value(run_program(prog).main_value)
    zero = show_value(run_program(prog, "zeroMain").main_value)
    return (three, zero) == ("6", "0"), f"n=3 over 1,2,3 -> {three}; n=0 -> {zero}"


def criterion_4():
    prog = parse_ldgv(listing("node.ldgv"))
    got = []
    for entry, sent in (("main", A.PairE("x", None, A.LabelV("Node"), A.IntLit(42))), ("emptyMain", A.PairE("x", None, A.LabelV("Empty"), A.UnitV()))):
        v = run_program(prog, entry).main_value
        got.append(v is not None and A.alpha_eq(v, sent))
    return all(got), "('Node, 42) and ('Empty, ()) received unchanged" if all(got) else f"mismatch {got}"


def criterion_5():
    z = parse_type("rec 0 (!Int. End) [a] ?Int. a")
    one = parse_type("rec 1 (!Int. End) [a] ?Int. a")
    pairs = [(z, parse_type("!Int. End")), (one, parse_type("?Int. !Int. End"))]
    try:
        for a, b in pairs:
            sub_check(EMPTY, a, b)
            sub_check(EMPTY, b, a)
    except CheckError as e:
        return False, e.render()
    return True, "both pairs are mutual subtypes"


def criterion_6():
    count = [0]

    @_settings(1000)
    @given(session_types(polarities=(A.Polarity.POS, A.Polarity.NEG)))
    def prop(s):
        count[0] += 1
        assert A.alpha_eq(A.dual(A.dual(s)), s)

    start = time.perf_counter()
    try:
        prop()
    except AssertionError as e:
        return False, str(e)
    took = time.perf_counter() - start
    return count[0] >= 1000 and took < 5.0, f"{count[0]} types in {took:.2f}s"


def criterion_7():
    refl = [0]
    chains = [0]

    @_settings(1000)
    @given(general_types())
    def reflexive(t):
        kind_synth(EMPTY, t)
        sub_check(EMPTY, t, t)
        refl[0] += 1

    @_settings(1000)
    @given(general_types(), st.integers(0, 2**32))
    def transitive(t, seed):
        rnd = random.Random(seed)
        b = weaken(t, rnd)
        c = weaken(b, rnd)
        try:
            sub_check(EMPTY, t, b)
            sub_check(EMPTY, b, c)
        except CheckError:
            return
        if A.alpha_eq(t, b) and A.alpha_eq(b, c):
            return
        chains[0] += 1
        sub_check(EMPTY, t, c)

    start = time.perf_counter()
    try:
        reflexive()
        transitive()
    except CheckError as e:
        return False, e.render()
    took = time.perf_counter() - start
    ok = refl[0] >= 1000 and chains[0] >= 200 and took < 10.0
    return ok, f"{refl[0]} reflexive, {chains[0]} non-trivial chains in {took:.2f}s"


def criterion_8():
    stats = {"unfolded": 0, "failed cleanly": 0}

    @_settings(500)
    @given(unfold_candidates())
    def prop(pair):
        env, t = pair
        kind_synth(env, t)
        try:
            u = unfold(env, t)
        except CheckError as e:
            assert e.code in ("UnfoldFailed", "FuelExhausted"), e.render()
            stats["failed cleanly"] += 1
            return
        assert not isinstance(u, (A.Case, A.NatRec))
        assert is_equivalent(env, t, u)
        stats["unfolded"] += 1

    try:
        prop()
    except AssertionError as e:
        return False, str(e)
    n = sum(stats.values())
    return n >= 500, f"{n} types: {stats['unfolded']} unfolded, {stats['failed cleanly']} failed cleanly"


def criterion_9():
    samples = corpus()
    outcomes = {}
    replayed = 0
    for s in samples:
        prog = parse_ldgv(s.source)
        if not check_program(prog).ok:
            return False, f"{s.name} does not check"
        res = run_program(prog, s.entry, typed_replay=s.replay)
        outcomes[s.name] = res.outcome
        if s.replay and isinstance(res.outcome, AllFinished):
            replayed += 1
    bad = [n for n, o in outcomes.items() if not isinstance(o, (AllFinished, Deadlocked))]
    ok = len(samples) >= 20 and not bad and replayed >= 5
    stuck = [n for n, o in outcomes.items() if isinstance(o, Stuck)]
    return ok, f"{len(samples)} programs, {len(stuck)} stuck, other failures {bad}, {replayed} typed replays"


def criterion_10():
    start = time.perf_counter()
    tp = lsst_type_check(parse_lsst(listing("compute.lsst")))
    report = check_program(translate(tp))
    if not report.ok:
        return False, report.to_text()
    rep = simulate_check(tp.program)
    took = time.perf_counter() - start
    ok = rep.ok and rep.max_ldgv_steps <= 8 and took < 2.0
    return ok, (
        f"{len(rep.steps)} LSST steps, at most {rep.max_ldgv_steps} LDGV steps each, "
        f"values {rep.lsst_value and show_value(rep.lsst_value)} / {rep.ldgv_value and show_value(rep.ldgv_value)}, {took:.2f}s"
    )


def criterion_11():
    prog = parse_ldgv(listing("node.ldgv"))
    types = dict(prog.type_defs)
    body = next(d.body for d in prog.term_defs if d.name == "sendNode")
    target = A.Pi(A.Mult.UN, "n", types["Node"], A.Pi(A.Mult.UN, "c", types["NodeC"], A.Unit))
    try:
        ty, out = type_synth(EMPTY, body)
        sub_check(EMPTY, ty, target)
    except CheckError as e:
        return False, e.render()
    unrestricted = out == unr(out, Checker().kind_synth)
    return unrestricted, "synthesised type is below the signature; output environment unrestricted"


def criterion_12():
    wrong = []
    for bad in NEGATIVE:
        report = check_program(parse_ldgv(bad.source))
        failed = {r.name: r.error.code for r in report.failures()}
        if failed.get(bad.where) != bad.code:
            wrong.append(f"{bad.name}: expected {bad.code}, got {failed}")
    codes = sorted({b.code for b in NEGATIVE})
    ok = len(NEGATIVE) >= 10 and not wrong
    return ok, f"{len(NEGATIVE)} programs over {', '.join(codes)}" if ok else "; ".join(wrong)


def _record(n: int):
    ok, detail = globals()[f"criterion_{n}"]()
    RESULTS[n] = (ok, detail)
    assert ok, detail


def line(n: int) -> str:
    ok, detail = RESULTS[n]
    return f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {TITLES[n]}: {detail.splitlines()[0] if detail else ''}"


def test_criterion_01_golden_listings():
    _record(1)


def test_criterion_02_compute_behaviour():
    _record(2)


def test_criterion_03_sum_server():
    _record(3)


def test_criterion_04_node_round_trip():
    _record(4)


def test_criterion_05_recursor_equivalences():
    _record(5)


def test_criterion_06_duality_involution():
    _record(6)


def test_criterion_07_subtyping_properties():
    _record(7)


def test_criterion_08_unfolding_soundness():
    _record(8)


def test_criterion_09_no_runtime_errors():
    _record(9)


def test_criterion_10_embedding():
    _record(10)


def test_criterion_11_send_node():
    _record(11)


def test_criterion_12_negative_suite():
    _record(12)


if __name__ == "__main__":
    failed = 0
    for n in TITLES:
        try:
            _record(n)
        except AssertionError:
            failed += 1
        print(line(n))
    sys.exit(1 if failed else 0)
