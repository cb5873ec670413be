"""Trace verdicts, encodings, native oracles, step counting."""

import random

import pytest

from destcalc import harness as H
from destcalc import machine as M
from destcalc import syntax as S
from destcalc.modes import UNIT
from destcalc.typecheck import Checker, TypeEnv
from destcalc.parser import TypeDef, parse_type

from conftest import run_ok


def _golden():
    body = S.CasePair(
        UNIT, S.FillPair(S.FillInr(S.Var("d"))), "dx", "dxs",
        S.Seq(S.FillLeaf(S.Var("dx"), S.Val(S.UnitV())),
              S.FillLeaf(S.Var("dxs"), S.Val(S.InlV(S.UnitV())))),
    )
    return S.FromAmparPrime(S.UpdWith(S.NewAmpar(None), "d", body))


@pytest.fixture(scope="module")
def golden_trace():
    tyenv = TypeEnv({"List": TypeDef("List", ("a",), parse_type("1 + (a * List a)"))})
    ck = Checker(tyenv)
    term = _golden()
    ty = ck.check_command(M.Command((), term), parse_type("List 1"))
    res = M.run_term(term, 1000)
    return ck, ty, res.trace


def test_preservation_ok(golden_trace):
    ck, ty, trace = golden_trace
    assert H.check_preservation(trace, ck, ty).ok


def test_preservation_single_value_trace(golden_trace):
    ck, _, _ = golden_trace
    tr = M.Trace(M.Command((), S.Val(S.UnitV())), [])
    assert H.check_preservation(tr, ck, S.TUnit()).ok


def test_preservation_detects_corruption(golden_trace):
    ck, ty, trace = golden_trace
    steps = list(trace.steps)
    for i, (rule, cmd) in enumerate(steps):
        newctx, changed = [], False
        for e in cmd.ctx:
            if isinstance(e, M.OpenAmpar) and isinstance(e.left, S.HoleV) and not changed:
                newctx.append(M.OpenAmpar(e.holes, S.UnitV()))
                changed = True
            else:
                newctx.append(e)
        if changed:
            steps[i] = (rule, M.Command(tuple(newctx), cmd.focus))
            break
    bad = M.Trace(trace.origin, steps)
    v = H.check_preservation(bad, ck, ty)
    assert not v.ok and v.failures


def test_progress_determinism(golden_trace):
    _, _, trace = golden_trace
    assert H.check_progress_determinism(trace).ok
    # final command alone: zero obligations
    tr = M.Trace(M.Command((), S.Val(S.UnitV())), [])
    assert H.check_progress_determinism(tr).ok
    # ill-typed command reports stuck
    bad = M.Command((), S.CaseSum(UNIT, S.Val(S.UnitV()), "x", S.Var("x"), "y", S.Var("y")))
    v = H.check_progress_determinism(M.Trace(bad, []))
    assert not v.ok and "stuck" in v.failures[0][1]


def test_balance(golden_trace):
    _, _, trace = golden_trace
    assert H.scan_balance(M.Command((), S.Val(S.AmparV(frozenset({1}), S.HoleV(1), S.DestV(1))))).ok
    assert H.scan_trace_balance(trace).ok
    dup = M.Command(
        (M.OpenAmpar(frozenset({1}), S.HoleV(1)),),
        S.Seq(S.FillUnit(S.Val(S.DestV(1))), S.FillUnit(S.Val(S.DestV(1)))),
    )
    assert not H.scan_balance(dup).ok


def test_count_steps():
    assert H.count_steps(S.Val(S.UnitV())) == 0
    with pytest.raises(H.FuelExhausted):
        H.count_steps(S.Fix("x", S.TNamed("T", ()), S.Var("x")), fuel=50)


def test_encodings_round_trip():
    for n in range(65):
        assert H.decode_nat(H.encode_nat(n)) == n
    assert H.decode_bool(H.encode_bool(True)) is True
    assert H.decode_bool(H.encode_bool(False)) is False
    rng = random.Random(11)
    for _ in range(100):
        xs = H.random_list(rng)
        assert H.decode_list(H.encode_list(xs)) == xs
    tree = ((), ((), None, None), None)
    assert H.decode_tree(H.encode_tree((1, (2, None, None), None))) == (1, (2, None, None), None)


def test_decode_rejects_noncanonical():
    with pytest.raises(H.DecodeError):
        H.decode_nat(S.PairV(S.UnitV(), S.UnitV()))
    with pytest.raises(H.DecodeError):
        H.decode_list(S.InrV(S.UnitV()))


def test_native_oracles():
    assert H.list_map(lambda v: v + 1, []) == []
    assert H.list_map(lambda v: v + 1, [1, 2]) == [2, 3]
    two = ((), ((), None, None), None)
    out = H.bfs_relabel(two)
    assert out == (1, (2, None, None), None)  # root 1, left child 2
    deep = ((), ((), None, ((), None, None)), ((), None, None))
    # level order: root=1, children 2,3, grandchild 4
    assert H.bfs_relabel(deep) == (1, (2, None, (4, None, None)), (3, None, None))
    assert H.fifo_queue([("enq", "a"), ("enq", "b"), ("deq",)]) == ["a"]
    assert H.fifo_queue([("deq",)]) == [None]


def test_random_generators_bounds():
    rng = random.Random(0)
    for _ in range(50):
        assert len(H.random_list(rng)) <= 32
        ops = H.random_queue_ops(rng)
        assert 1 <= len(ops) <= 64 and ops[0][0] == "enq"

        def count(t):
            return 0 if t is None else 1 + count(t[1]) + count(t[2])

        assert count(H.random_tree(rng)) <= 31
