"""Small-step machine: rules, substitutions, shifts, the worked trace."""

import pytest

from destcalc import machine as M
from destcalc import syntax as S
from destcalc.modes import Mode, UNIT, ONE_INF
from destcalc.parser import parse_term


def golden_term():
    body = S.CasePair(
        UNIT, S.FillPair(S.FillInr(S.Var("d"))), "dx", "dxs",
        S.Seq(S.FillLeaf(S.Var("dx"), S.Val(S.UnitV())),
              S.FillLeaf(S.Var("dxs"), S.Val(S.InlV(S.UnitV())))),
    )
    return S.FromAmparPrime(S.UpdWith(S.NewAmpar(None), "d", body))


def test_worked_trace_rules_and_value():
    res = M.run_term(golden_term(), 1000)
    assert isinstance(res, M.Finished)
    rules = [r for r, _ in res.trace.steps]
    assert rules[:5] == ["⋉FROM′F", "⋉UPDF", "⋉NEWC", "⋉UPDU", "⋉OP"]
    assert rules[-3:] == ["⋉CL", "⋉FROM′U", "⋉FROM′C"]
    assert res.value == S.InrV(S.PairV(S.UnitV(), S.InlV(S.UnitV())))


def test_worked_trace_hole_numerals():
    res = M.run_term(golden_term(), 1000)
    minted, seen = [], set()
    for _, cmd in res.trace.steps:
        names = M.hnames(cmd)
        minted += sorted(names - seen)
        seen |= names
    assert minted == [1, 2, 4, 6, 7]


def test_new_ampar_rule():
    res = M.step(M.Command((), S.NewAmpar(None)))
    assert isinstance(res, M.Stepped) and res.rule == "⋉NEWC"
    assert res.command.focus == S.Val(S.AmparV(frozenset({1}), S.HoleV(1), S.DestV(1)))


def test_final_and_stuck():
    assert isinstance(M.step(M.Command((), S.Val(S.UnitV()))), M.Final)
    bad = M.Command((), S.CaseSum(UNIT, S.Val(S.UnitV()), "x", S.Var("x"), "y", S.Var("y")))
    assert isinstance(M.step(bad), M.Stuck)


def test_star_side_condition():
    # a focusing rule never fires once the would-be focus is a value
    t = S.FillInl(S.Val(S.DestV(3)))
    ctx = (M.OpenAmpar(frozenset({3}), S.HoleV(3)),)
    res = M.step(M.Command(ctx, t))
    assert res.rule == "[⊕]E₁C"  # direct contraction, no [⊕]E₁F push


def test_subst_var():
    assert M.subst_var(S.Var("x"), "x", S.UnitV()) == S.Val(S.UnitV())
    lam = S.Val(S.LamV("x", UNIT, S.Var("x")))
    assert M.subst_var(lam, "x", S.UnitV()) is lam  # values stay closed
    shadowed = parse_term(r"case p of (x, y) -> x")
    out = M.subst_var(shadowed, "x", S.UnitV())
    assert out.body == S.Var("x")  # binder shadows
    t = S.FillLeaf(S.Var("d"), S.Var("x"))
    out = M.subst_var(t, "x", S.InlV(S.UnitV()))
    assert out == S.FillLeaf(S.Var("d"), S.Val(S.InlV(S.UnitV())))


def test_shift_ops():
    assert M.shift_set(frozenset({1, 3}), 5) == frozenset({6, 8})
    assert M.cond_shift(S.InlV(S.HoleV(3)), frozenset({3}), 5) == S.InlV(S.HoleV(8))
    assert M.cond_shift(S.DestV(7), frozenset({3}), 5) == S.DestV(7)
    # an inner closed ampar binds its own names: they do not shift
    v = S.AmparV(frozenset({3}), S.HoleV(3), S.DestV(3))
    assert M.cond_shift(v, frozenset({3}), 5) == v
    wrapped = S.PairV(S.HoleV(3), v)
    out = M.cond_shift(wrapped, frozenset({3}), 5)
    assert out == S.PairV(S.HoleV(8), v)


def test_hnames():
    assert M.hnames(S.AmparV(frozenset({1}), S.HoleV(1), S.DestV(1))) == {1}
    assert M.hnames(()) == set()
    ctx = (M.FromPrimeF(), M.OpenAmpar(frozenset({6, 7}), S.InrV(S.PairV(S.HoleV(6), S.HoleV(7)))))
    assert M.hnames(ctx) == {6, 7}


def test_hole_subst():
    ctx = (M.OpenAmpar(frozenset({2}), S.HoleV(2)),)
    out = M.hole_subst(ctx, 2, frozenset({4}), S.InrV(S.HoleV(4)))
    assert out == (M.OpenAmpar(frozenset({4}), S.InrV(S.HoleV(4))),)
    out = M.hole_subst(out, 4, frozenset(), S.UnitV())
    assert out == (M.OpenAmpar(frozenset(), S.InrV(S.UnitV())),)
    with pytest.raises(M.HoleNotFound):
        M.hole_subst(ctx, 9, frozenset(), S.UnitV())


def test_run_out_of_fuel_on_divergence():
    t = S.Fix("x", S.TNamed("T", ()), S.Var("x"))
    res = M.run_term(t, 100)
    assert isinstance(res, M.OutOfFuel)
    assert len(res.trace.steps) == 100


def test_canonicalize():
    v = S.AmparV(frozenset({9}), S.HoleV(9), S.DestV(9))
    assert M.canonicalize(v) == S.AmparV(frozenset({1}), S.HoleV(1), S.DestV(1))
    plain = S.InrV(S.PairV(S.UnitV(), S.InlV(S.UnitV())))
    assert M.canonicalize(plain) == plain
    res = M.run_term(golden_term(), 1000)
    assert M.canonicalize(M.canonicalize(res.value)) == M.canonicalize(res.value)
    # alpha-equivalent values canonicalize identically
    a = S.AmparV(frozenset({5, 9}), S.PairV(S.HoleV(5), S.HoleV(9)),
                 S.PairV(S.DestV(5), S.DestV(9)))
    b = S.AmparV(frozenset({2, 3}), S.PairV(S.HoleV(2), S.HoleV(3)),
                 S.PairV(S.DestV(2), S.DestV(3)))
    assert M.canonicalize(a) == M.canonicalize(b)


def test_determinism_scan_on_trace():
    res = M.run_term(golden_term(), 1000)
    for _, cmd in res.trace.steps:
        final = M.is_val(cmd.focus) and not cmd.ctx
        rules = M.applicable_rules(cmd)
        assert len(rules) == (0 if final else 1)


def test_open_renames_fresh():
    # opening the same closed ampar twice mints disjoint hole names
    amp = S.Val(S.AmparV(frozenset({1}), S.HoleV(1), S.DestV(1)))
    t = S.UpdWith(amp, "d", S.FillLeaf(S.Var("d"), S.Val(S.UnitV())))
    res = M.step(M.Command((M.OpenAmpar(frozenset({2}), S.HoleV(2)),), t))
    assert res.rule == "⋉OP"
    opened = res.command.ctx[-1]
    assert opened.holes == frozenset({3})  # fresh past the live {2}
