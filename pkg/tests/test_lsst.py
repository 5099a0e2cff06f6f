import random
import time

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from ldgv import ast as A
from ldgv.checker import CheckError, check_program, sub_check
from ldgv.env import EMPTY
from ldgv.eval import AllFinished, show_value
from ldgv.lsst import syntax as L
from ldgv.lsst.eval import lsst_run
from ldgv.lsst.simulate import simulate_check
from ldgv.lsst.translate import EOS, translate, translate_expr, translate_type
from ldgv.lsst.typing import lsst_check_program, lsst_type_check
from ldgv.parser import parse_ldgv, parse_lsst, parse_lsst_type, parse_type
from ldgv.printer import show_program

from corpus import listing
from strategies import lsst_session_types, lsst_weaken


def LT(text):
    return parse_lsst_type(text)


def test_dual_of_server():
    server = LT("&{Neg: ?Int. !Int. end!, Add: ?Int. ?Int. !Int. end!}")
    client = LT("(+){Neg: !Int. ?Int. end?, Add: !Int. !Int. ?Int. end?}")
    assert L.lsst_dual(server) == client


def test_dual_end():
    assert L.lsst_dual(L.LEndOut()) == L.LEndIn()


def test_dual_rejects_int():
    with pytest.raises(A.NotASessionType):
        L.lsst_dual(L.LInt())


def test_select_width():
    s1, s2 = LT("!Int. end!"), LT("?Int. end?")
    assert L.lsst_sub(L.LSelect((("Neg", s1), ("Add", s2))), L.LSelect((("Neg", s1),)))
    assert not L.lsst_sub(L.LSelect((("Neg", s1),)), L.LSelect((("Neg", s1), ("Add", s2))))


def test_branch_width():
    s1, s2 = LT("!Int. end!"), LT("?Int. end?")
    assert L.lsst_sub(L.LBranch((("Neg", s1),)), L.LBranch((("Neg", s1), ("Add", s2))))


def test_constructor_mismatch():
    assert not L.lsst_sub(LT("!Int. end!"), LT("?Int. end!"))


def test_listing_checks():
    start = time.perf_counter()
    tp = lsst_check_program(parse_lsst(listing("compute.lsst")))
    assert tp.report.ok, tp.report.to_text()
    assert time.perf_counter() - start < 1.0
    types = {r.name: r.type for r in tp.report.results}
    assert types["negClient"] == LT("(+){Neg: !Int. ?Int. end?} -> Int -o Int")


def test_server_without_close():
    src = listing("compute.lsst").replace("in close c", "in ()")
    report = lsst_check_program(parse_lsst(src)).report
    failed = {r.name: r.error.code for r in report.failures()}
    assert failed == {"cServer": "LinearityViolation"}


def test_wrong_rcase_labels():
    src = listing("compute.lsst").replace("Add: c. let (x, c)", "Sub: c. let (x, c)")
    with pytest.raises(CheckError) as info:
        lsst_type_check(parse_lsst(src))
    assert info.value.code == "NotASubtype"


def test_select_missing_label():
    src = "val f : (+){Neg: end!} -> Unit\nval f d = close (select Add d)"
    with pytest.raises(CheckError) as info:
        lsst_type_check(parse_lsst(src))
    assert info.value.code == "NotASubtype"


def test_translate_choice_type():
    got = translate_type(LT("(+){Neg: !Int. ?Int. end?}"))
    want = parse_type("!(x:{Neg}). case x of {Neg: !(y:Int). ?(z:Int). ?(w:{EOS}). End}")
    assert A.alpha_eq(got, want)


def test_translate_close_and_unit():
    assert translate_expr(L.Close(A.Var("m"))) == A.App(A.SendE(A.Var("m")), A.LabelV(EOS))
    assert translate_expr(A.UnitV()) == A.UnitV()


def test_translation_checks():
    tp = lsst_type_check(parse_lsst(listing("compute.lsst")))
    report = check_program(translate(tp))
    assert report.ok, report.to_text()
    # the printed translation parses back and checks as well
    again = check_program(parse_ldgv(show_program(translate(tp))))
    assert again.ok, again.to_text()


def test_lsst_run():
    res = lsst_run(parse_lsst(listing("compute.lsst")))
    assert isinstance(res.outcome, AllFinished)
    assert show_value(res.main_value) == "-5"
    assert [e.rule for e in res.trace].count("Rl-Branch") == 1
    assert [e.rule for e in res.trace].count("Rl-Close") == 1


def test_simulation():
    start = time.perf_counter()
    rep = simulate_check(parse_lsst(listing("compute.lsst")))
    assert rep.ok, rep.to_text()
    assert rep.max_ldgv_steps <= 8
    assert all(s.ldgv_steps >= 1 for s in rep.steps)
    assert show_value(rep.lsst_value) == show_value(rep.ldgv_value) == "-5"
    by_rule = {s.rule: s.ldgv_rules for s in rep.steps}
    # the channel rendezvous, the let-pair and the case (plus the beta step
    # of the translated select)
    assert by_rule["Rl-Branch"] == ("Rl-Betav", "Rl-Com", "Rl-Prod-Elim", "Rl-Case")
    assert by_rule["Rl-Close"] == ("Rl-Com", "Rl-Prod-Elim")
    assert time.perf_counter() - start < 2.0


@pytest.mark.parametrize("x", [0, 3, -8])
def test_simulation_client_value(x):
    src = listing("compute.lsst").replace("negClient d 5", f"negClient d ({x})")
    rep = simulate_check(parse_lsst(src))
    assert rep.ok and show_value(rep.lsst_value) == str(-x)


def test_simulation_report_data():
    data = simulate_check(parse_lsst(listing("compute.lsst"))).to_data()
    assert data["ok"] and data["lsst_value"] == "-5" and data["ldgv_value"] == "-5"


SETTINGS = settings(max_examples=200, deadline=None, suppress_health_check=list(HealthCheck))


@SETTINGS
@given(lsst_session_types())
def test_lsst_dual_involution(s):
    assert L.lsst_dual(L.lsst_dual(s)) == s


@SETTINGS
@given(lsst_session_types(), lsst_session_types())
def test_subtyping_preserved_by_translation(a, b):
    if L.lsst_sub(a, b):
        sub_check(EMPTY, translate_type(a), translate_type(b))


@SETTINGS
@given(lsst_session_types(), st.integers(0, 2**32))
def test_subtyping_preserved_on_widened_pairs(a, seed):
    rnd = random.Random(seed)
    b = lsst_weaken(a, rnd)
    assert L.lsst_sub(a, b)
    sub_check(EMPTY, translate_type(a), translate_type(b))


@SETTINGS
@given(lsst_session_types())
def test_translation_commutes_with_duality(s):
    assert A.alpha_eq(translate_type(L.lsst_dual(s)), A.dual(translate_type(s)))
