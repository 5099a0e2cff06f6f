import pytest

from ldgv import ast as A
from ldgv.checker import check_program
from ldgv.eval import (
    AllFinished,
    Config,
    Deadlocked,
    Finished,
    NeedsRendezvous,
    OutOfFuel,
    Spawn,
    Stepped,
    Stuck,
    Thread,
    initial_config,
    load_program,
    outcome_data,
    outcome_text,
    run_program,
    show_value,
    step_config,
    step_expr,
)
from ldgv.parser import parse_expr, parse_ldgv

from corpus import corpus, listing


def E(text):
    return parse_expr(text)


def test_case_on_label():
    r = step_expr(E("case 'Neg of {Neg: 1, Add: 2}"))
    assert r == Stepped(A.IntLit(1), "Rl-Case")


def test_beta():
    r = step_expr(E("(lambda(x:Int). x) 5"))
    assert r == Stepped(A.IntLit(5), "Rl-Betav")


def test_recursor_at_zero():
    r = step_expr(E("rec Z {Z: 7, S(k) with [a](y: Int): y}"))
    assert r == Stepped(A.IntLit(7), "RL-Z")


def test_recursor_at_successor_unrolls_once():
    r = step_expr(E("rec S(Z) {Z: 0, S(k) with [a](y: Int): y + 1}"))
    assert isinstance(r, Stepped) and r.rule == "RL-S"
    assert isinstance(r.expr, A.Add)


def test_value_is_finished():
    assert step_expr(E("5")) == Finished(A.IntLit(5))


def test_send_blocks():
    r = step_expr(E("send @c1 'A"))
    assert isinstance(r, NeedsRendezvous) and (r.chan, r.direction, r.payload) == ("c1", "send", A.LabelV("A"))


def test_fork_and_new_need_the_configuration():
    assert isinstance(step_expr(E("fork 1")), Spawn)
    assert isinstance(step_expr(E("new (!Int. End)")), Spawn)


def _pair_config(left, right):
    return Config(
        (Thread(0, E(left), True), Thread(1, E(right))),
        peers=(("c1", "d1"), ("d1", "c1")),
        next_tid=2,
        next_chan=2,
    )


def test_communication():
    cfg, (rule, tids) = step_config(_pair_config("send @c1 'A", "recv @d1"))
    assert (rule, tids) == ("Rl-Com", (0, 1))
    assert cfg.threads[0].expr == A.Chan("c1")
    got = cfg.threads[1].expr
    assert isinstance(got, A.PairE) and (got.fst, got.snd) == (A.LabelV("A"), A.Chan("d1"))


def test_new_allocates_peered_endpoints():
    cfg, (rule, _) = step_config(initial_config(E("new (!Int. End)")))
    assert rule == "Rl-New"
    pair = cfg.threads[0].expr
    assert (pair.fst, pair.snd) == (A.Chan("c1"), A.Chan("d1"))
    assert cfg.peer("c1") == "d1" and cfg.peer("d1") == "c1"


def test_fork_spawns_a_thread():
    cfg, (rule, tids) = step_config(initial_config(E("fork 1")))
    assert (rule, tids) == ("Rl-Fork", (0, 1))
    assert [t.expr for t in cfg.threads] == [A.UnitV(), A.IntLit(1)]


def test_both_receiving_deadlocks():
    out = step_config(_pair_config("recv @c1", "recv @d1"))
    assert isinstance(out, Deadlocked)
    assert len(out.blocked) == 2


def test_stuck_on_ill_typed_term():
    out = step_config(initial_config(E("case 5 of {A: 1}")))
    assert isinstance(out, Stuck)


def test_out_of_fuel():
    prog = parse_ldgv(listing("compute.ldgv"))
    res = run_program(prog, max_steps=3)
    assert isinstance(res.outcome, OutOfFuel)


def test_compute_client():
    prog = parse_ldgv(listing("compute.ldgv"))
    assert show_value(run_program(prog).main_value) == "-5"
    assert show_value(run_program(prog, "addMain").main_value) == "7"


def test_sum_over_two_numbers():
    src = listing("sum.ldgv") + """
val client2 : dualof SumServer -> Int
val client2 d =
  let d = send d S(S(Z)); d = send d 1; d = send d 2; (r, d) = recv d in r

val twoMain = let (c, d) = new SumServer in let _ = fork (sum c) in client2 d
"""
    res = run_program(parse_ldgv(src), "twoMain", typed_replay=True)
    assert show_value(res.main_value) == "3"


def test_deterministic_trace():
    prog = parse_ldgv(listing("compute.ldgv"))
    runs = [[str(e) for e in run_program(prog).trace] for _ in range(10)]
    assert all(r == runs[0] for r in runs)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_seeded_schedules_agree_on_result(seed):
    prog = parse_ldgv(listing("compute.ldgv"))
    assert show_value(run_program(prog, seed=seed).main_value) == "-5"


def test_outcome_rendering():
    res = run_program(parse_ldgv(listing("compute.ldgv")))
    assert outcome_text(res).splitlines()[0] == "main = -5"
    data = outcome_data(res)
    assert data["outcome"] == "AllFinished" and data["main"] == {"name": "main", "value": "-5"}


def test_definitions_stay_by_name():
    prog = check_program(parse_ldgv(listing("compute.ldgv"))).program
    ld = load_program(prog)
    assert "lServer" in ld.sem.defs
    assert "lServer" in A.free_names(ld.config.threads[0].expr)


@pytest.mark.parametrize("sample", corpus(), ids=lambda s: s.name)
def test_corpus_runs(sample):
    res = run_program(parse_ldgv(sample.source), sample.entry, typed_replay=sample.replay)
    assert not isinstance(res.outcome, Stuck), res.outcome
    if sample.expect is None:
        assert isinstance(res.outcome, Deadlocked)
    else:
        assert isinstance(res.outcome, AllFinished), res.outcome
        assert show_value(res.main_value) == sample.expect
