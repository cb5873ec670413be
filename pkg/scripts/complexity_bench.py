#!/usr/bin/env python3
"""Machine-step growth of difference-list vs naive list concatenation.

Builds k singleton lists, concatenates them left-nested, and converts to
a plain list.  Difference lists graft in place (linear total steps); the
structural append retraverses its left argument (quadratic).
"""

import argparse

from destcalc import harness as H
from destcalc import syntax as S
from destcalc.prelude import load_prelude


def dlist_prog(env, k):
    concat, dsingle = env.runnable("concatN"), env.runnable("dsingleN")
    acc = S.App(dsingle, S.Val(H.encode_nat(0)))
    for i in range(1, k):
        acc = S.App(S.App(concat, acc), S.App(dsingle, S.Val(H.encode_nat(i % 10))))
    return S.App(env.runnable("toListN"), acc)


def naive_prog(env, k):
    app, cons, nil = (env.runnable(n) for n in ("appendListN", "consN", "nilN"))

    def single(i):
        return S.App(S.App(cons, S.Val(H.encode_nat(i % 10))), nil)

    acc = single(0)
    for i in range(1, k):
        acc = S.App(S.App(app, acc), single(i))
    return acc


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32, 64])
    args = ap.parse_args()
    env = load_prelude()
    print("%6s %12s %12s" % ("k", "dlist steps", "naive steps"))
    prev = None
    for k in args.sizes:
        d = H.count_steps(dlist_prog(env, k), 10**7)
        n = H.count_steps(naive_prog(env, k), 10**7)
        ratios = ""
        if prev is not None:
            ratios = "   ratios: dlist %.2f, naive %.2f" % (d / prev[0], n / prev[1])
        print("%6d %12d %12d%s" % (k, d, n, ratios))
        prev = (d, n)


if __name__ == "__main__":
    main()
