#!/usr/bin/env python3
"""Print the worked reduction of `() :: Inl ()` step by step.

Runs with from'* as a machine primitive, so the rule names and the
minted hole numerals (2, 4, 6, 7) match the hand-written reduction.
"""

from destcalc import machine as M
from destcalc import syntax as S
from destcalc.cli import print_command
from destcalc.modes import UNIT
from destcalc.printer import print_value


def main():
    body = S.CasePair(
        UNIT, S.FillPair(S.FillInr(S.Var("d"))), "dx", "dxs",
        S.Seq(S.FillLeaf(S.Var("dx"), S.Val(S.UnitV())),
              S.FillLeaf(S.Var("dxs"), S.Val(S.InlV(S.UnitV())))),
    )
    prog = S.FromAmparPrime(S.UpdWith(S.NewAmpar(None), "d", body))
    res = M.run_term(prog, 1000)
    print("origin: %s" % print_command(M.Command((), prog)))
    for i, (rule, cmd) in enumerate(res.trace.steps, start=1):
        print("%-3d %-12s %s" % (i, rule, print_command(cmd)))
    print("final value:", print_value(res.value))


if __name__ == "__main__":
    main()
