import random
import time

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from ldgv import ast as A
from ldgv.ast import GL, GU, SL, SU
from ldgv.checker import (
    CODES,
    CheckError,
    Checker,
    check_process,
    check_program,
    cond_extend,
    convert_value,
    is_equivalent,
    kind_check,
    kind_synth,
    sub_check,
    sub_synth,
    type_check,
    type_synth,
    unfold,
)
from ldgv.env import EMPTY, unr
from ldgv.parser import parse_expr, parse_ldgv, parse_type

from corpus import NEGATIVE, listing
from strategies import general_types, unfold_candidates, weaken

LABELS = A.labels("Neg", "Add")


def T(text, aliases=None):
    return parse_type(text, aliases)


def codes(fn, *args):
    with pytest.raises(CheckError) as info:
        fn(*args)
    return info.value.code


# conversion


def test_convert_label_is_itself():
    assert convert_value(EMPTY, A.LabelV("Neg")) == A.LabelV("Neg")


def test_convert_through_equation():
    env = EMPTY.extend("x", LABELS).extend("z", A.Eq(LABELS, A.Var("x"), A.LabelV("Neg")))
    assert convert_value(env, A.Var("x")) == A.LabelV("Neg")


def test_convert_without_equation_fails():
    assert codes(convert_value, EMPTY.extend("x", A.labels("A")), A.Var("x")) == "NotConvertible"


# unfolding


def test_unfold_non_case_is_identity():
    t = T("!(x:Int) End")
    assert unfold(EMPTY, t) == t


def test_unfold_commutes_common_head():
    env = EMPTY.extend("l", LABELS)
    t = A.Case(
        A.Var("l"),
        A.branches([("Neg", T("?(y:Int) !Int. End")), ("Add", T("?(y:Int) ?Int. End"))]),
    )
    u = unfold(env, t)
    assert isinstance(u, A.Recv) and u.payload == A.Int
    assert A.alpha_eq(u.cont, A.Case(A.Var("l"), A.branches([("Neg", T("!Int. End")), ("Add", T("?Int. End"))])))


def test_unfold_recursor_at_zero():
    assert A.alpha_eq(unfold(EMPTY, T("rec Z (!Int. End) [a] ?Int. a")), T("!(x:Int) End"))


def test_unfold_recursor_at_one():
    u = unfold(EMPTY, T("rec S(Z) (!Int. End) [a] ?Int. a"))
    assert A.alpha_eq(u, T("?(y:Int) rec Z (!Int. End) [a] ?Int. a"))


def test_unfold_mismatched_branches_fails_cleanly():
    env = EMPTY.extend("l", LABELS)
    t = A.Case(A.Var("l"), A.branches([("Neg", T("!Int. End")), ("Add", T("?Int. End"))]))
    assert codes(unfold, env, t) == "UnfoldFailed"


# kinding


@pytest.mark.parametrize(
    "text, kind",
    [
        ("Unit", SU),
        ("End", SU),
        ("{Neg, Add}", GU),
        ("!(x:{A}) End", SL),
        ("Int -> Int", GU),
        ("Int -o Int", GL),
        ("[x:Int, !Int. End]", GL),
        ("rec 2 (!Int. End) [a] ?Int. a", SL),
    ],
)
def test_kind_synth(text, kind):
    assert kind_synth(EMPTY, T(text)) == kind


def test_kind_check_with_subkinding():
    kind_check(EMPTY, T("(x:{A}) -o {A}"), GL)
    kind_check(EMPTY, A.Unit, GL)
    assert codes(kind_check, EMPTY, T("!Int. End"), SU) == "KindMismatch"


def test_kind_of_unbound_scrutinee():
    assert codes(kind_synth, EMPTY, A.Case(A.Var("q"), A.branches([("A", A.Unit)]))) == "UnboundName"


# conditional extension


def test_cond_extend():
    assert cond_extend(EMPTY, "x", A.labels("A", "B")).names() == ["x"]
    assert cond_extend(EMPTY, "x", T("!(y:Int) End")).names() == []
    assert cond_extend(EMPTY, "x", A.Unit).names() == ["x"]


# subtyping


def test_sub_reflexive_unit():
    assert sub_check(EMPTY, A.Unit, A.Unit, SU) == SU


def test_sub_labels():
    assert sub_synth(EMPTY, A.labels("Neg"), LABELS) == GU
    assert codes(sub_synth, EMPTY, LABELS, A.labels("Neg")) == "NotASubtype"


def test_sub_case_with_equal_branches():
    env = EMPTY.extend("x", A.labels("A", "B"))
    t = A.Case(A.Var("x"), A.branches([("A", A.Unit), ("B", A.Unit)]))
    assert sub_synth(env, t, A.Unit) == SU


def test_server_dual_is_below_client_parameter():
    prog = parse_ldgv(listing("compute.ldgv"))
    types = dict(prog.type_defs)
    client = next(d for d in prog.term_defs if d.name == "lClient").declared
    sub_check(EMPTY, A.dual(types["TServer"]), client.dom, SL)


def test_sub_pi_multiplicity():
    sub_check(EMPTY, T("Int -> Int"), T("Int -o Int"))
    assert codes(sub_check, EMPTY, T("Int -o Int"), T("Int -> Int")) == "NotASubtype"


def test_recursor_equivalences():
    zero = T("rec 0 (!Int. End) [a] ?Int. a")
    one = T("rec 1 (!Int. End) [a] ?Int. a")
    for a, b in [(zero, T("!Int. End")), (one, T("?Int. !Int. End")), (one, T("?Int. rec 0 (!Int. End) [a] ?Int. a"))]:
        sub_check(EMPTY, a, b)
        sub_check(EMPTY, b, a)


def test_fuel_exhaustion():
    deep = T("rec 40 (!Int. End) [a] a")
    assert codes(unfold, EMPTY, deep, 3) == "FuelExhausted"
    assert A.alpha_eq(unfold(EMPTY, deep, 64), T("!Int. End"))


# typing


def test_synth_unit():
    r = type_synth(EMPTY, A.UnitV())
    assert r.type == A.Unit and r.out_env == EMPTY


def test_synth_send_partial():
    env = EMPTY.extend("c", T("!(x:{A}) End"))
    r = type_synth(env, A.SendE(A.Var("c")))
    assert isinstance(r.type, A.Pi) and r.type.mult is A.Mult.LIN
    assert A.alpha_eq(r.type.cod, A.End)
    assert r.out_env.names() == []


def test_send_node_synthesis():
    prog = parse_ldgv(listing("node.ldgv"))
    send_node = prog.term_defs[0]
    ty, out = type_synth(EMPTY, send_node.body)
    node, node_c = dict(prog.type_defs)["Node"], dict(prog.type_defs)["NodeC"]
    target = A.Pi(A.Mult.UN, "n", node, A.Pi(A.Mult.UN, "c", node_c, A.Unit))
    sub_check(EMPTY, ty, target)
    assert out == unr(out, Checker().kind_synth)
    assert type_check(EMPTY, send_node.body, target) == EMPTY


def test_lserver_against_declared_type():
    prog = parse_ldgv(listing("compute.ldgv"))
    d = next(d for d in prog.term_defs if d.name == "lServer")
    assert type_check(EMPTY, d.body, d.declared) == EMPTY


def test_dependent_application_substitutes_value():
    prog = parse_ldgv("val f : (l:{A, B}) -> case l of {A: Int, B: Unit}\nval f l = case l of {A: 3, B: ()}")
    env = EMPTY.extend("f", prog.term_defs[0].declared, False)
    ty, _ = type_synth(env, parse_expr("f 'B"))
    assert is_equivalent(EMPTY, ty, A.Unit)


def test_error_carries_rule_trace_and_render():
    with pytest.raises(CheckError) as info:
        type_check(EMPTY.extend("c", T("?Int. End"), True), parse_expr("send c 1"), A.End)
    e = info.value
    assert e.code in CODES and e.trace
    assert e.code in e.render()


# processes


def test_process_unit_thread():
    check_process(EMPTY, A.ProcE(A.UnitV(), True))


def test_process_channel_pair():
    s = T("!(x:{A}) End")
    p = A.Nu(
        "c",
        "d",
        A.Par(
            A.ProcE(A.App(A.SendE(A.Chan("c")), A.LabelV("A"))),
            A.ProcE(parse_expr("let (x, y) = recv @d in ()")),
        ),
        s,
    )
    check_process(EMPTY, p)


def test_process_free_channel():
    with pytest.raises(CheckError) as info:
        check_process(EMPTY, A.ProcE(A.Chan("c")))
    assert info.value.code in ("LinearityViolation", "UnboundName")


# programs


@pytest.mark.parametrize("name", ["compute.ldgv", "sum.ldgv", "node.ldgv"])
def test_listings_check(name):
    start = time.perf_counter()
    report = check_program(parse_ldgv(listing(name)))
    assert report.ok, report.to_text()
    assert time.perf_counter() - start < 1.0


def test_report_text_and_data():
    report = check_program(parse_ldgv(NEGATIVE[0].source))
    assert not report.ok
    data = report.to_data()
    assert data["definitions"][0]["code"] == "LinearityViolation"
    assert data["definitions"][0]["position"] == {"line": 2, "column": 1}
    assert "FAIL  main at 2:1" in report.to_text()


@pytest.mark.parametrize("bad", NEGATIVE, ids=lambda b: b.name)
def test_negative_suite(bad):
    report = check_program(parse_ldgv(bad.source))
    failed = {r.name: r.error.code for r in report.failures()}
    assert failed.get(bad.where) == bad.code, report.to_text()


def test_fuel_from_environment(monkeypatch):
    from ldgv.checker import default_fuel

    monkeypatch.setenv("LDST_FUEL", "7")
    assert default_fuel() == 7
    assert Checker().fuel == 7
    assert Checker(9).fuel == 9
    monkeypatch.setenv("LDST_FUEL", "nonsense")
    assert default_fuel() == 128


# properties

SETTINGS = settings(max_examples=200, deadline=None, suppress_health_check=list(HealthCheck))


@SETTINGS
@given(general_types())
def test_sub_reflexive(t):
    kind_synth(EMPTY, t)
    sub_check(EMPTY, t, t)


@SETTINGS
@given(general_types(), st.integers(0, 2**32))
def test_sub_transitive(t, seed):
    rnd = random.Random(seed)
    b = weaken(t, rnd)
    c = weaken(b, rnd)
    sub_check(EMPTY, t, b)
    sub_check(EMPTY, b, c)
    sub_check(EMPTY, t, c)


@SETTINGS
@given(unfold_candidates())
def test_unfold_sound(pair):
    env, t = pair
    kind_synth(env, t)
    try:
        u = unfold(env, t)
    except CheckError as e:
        assert e.code in ("UnfoldFailed", "FuelExhausted")
        return
    assert not isinstance(u, (A.Case, A.NatRec))
    assert is_equivalent(env, t, u)


def test_discarded_end_is_linted_not_rejected():
    src = "val f : !Int. End -> Unit\nval f c = let c = send c 1 in ()\nval g : !Int. End -> End\nval g c = send c 1"
    report = check_program(parse_ldgv(src))
    assert report.ok
    assert report.lints == ["f: binding c of type End is discarded"]
    assert report.to_data()["lints"] == report.lints
