"""Command-line interface: check, run, trace, desugar over `.ld` files.

Exit codes: 0 success, 1 type error, 2 parse error, 3 stuck, 4 fuel
exhausted, 5 harness verdict failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness as H
from . import machine as M
from . import prelude as P
from . import syntax as S
from .parser import ParseError, parse
from .printer import print_term, print_type, print_value
from .typecheck import TypeCheckError

EXIT_OK = 0
EXIT_TYPE = 1
EXIT_PARSE = 2
EXIT_STUCK = 3
EXIT_FUEL = 4
EXIT_VERDICT = 5


def print_component(e) -> str:
    if isinstance(e, M.AppFun):
        return "%s []" % print_term(e.fn, 2)
    if isinstance(e, M.AppArg):
        return "[] %s" % print_value(e.arg, 3)
    if isinstance(e, M.SeqL):
        return "[] ; %s" % print_term(e.rest, 1)
    if isinstance(e, M.CaseSumF):
        return "case [] of { Inl %s -> %s, Inr %s -> %s }" % (
            e.left_var, print_term(e.left_body, 0), e.right_var, print_term(e.right_body, 0))
    if isinstance(e, M.CasePairF):
        return "case [] of (%s, %s) -> %s" % (e.var1, e.var2, print_term(e.body, 0))
    if isinstance(e, M.CaseBangF):
        return "case [] of Mod%s %s -> %s" % (str(e.inner_mode), e.var, print_term(e.body, 0))
    if isinstance(e, M.UpdWithF):
        return "upd [] with %s -> %s" % (e.var, print_term(e.body, 0))
    if isinstance(e, M.ToF):
        return "to* []"
    if isinstance(e, M.FromF):
        return "from* []"
    if isinstance(e, M.FromPrimeF):
        return "from'* []"
    if isinstance(e, M.FillUnitF):
        return "[] <| Unit"
    if isinstance(e, M.FillInlF):
        return "[] <| Inl"
    if isinstance(e, M.FillInrF):
        return "[] <| Inr"
    if isinstance(e, M.FillPairF):
        return "[] <| Pair"
    if isinstance(e, M.FillBangF):
        return "[] <| Mod%s" % str(e.mode)
    if isinstance(e, M.FillFunF):
        return "[] <| Fun %s -> %s" % (e.var, print_term(e.body, 0))
    if isinstance(e, M.FillCompL):
        return "[] <o %s" % print_term(e.child, 3)
    if isinstance(e, M.FillCompR):
        return "%s <o []" % print_value(e.dest, 3)
    if isinstance(e, M.FillLeafL):
        return "[] <! %s" % print_term(e.arg, 3)
    if isinstance(e, M.FillLeafR):
        return "%s <! []" % print_value(e.dest, 3)
    if isinstance(e, M.OpenAmpar):
        hs = " ".join("#%d" % h for h in sorted(e.holes))
        return "{%s}op/ %s, [] /" % (hs, print_value(e.left, 0))
    raise TypeError(e)


def print_command(cmd: M.Command) -> str:
    parts = ["[]"] + [print_component(e) for e in cmd.ctx]
    return "(%s)[%s]" % (" o ".join(parts), print_term(cmd.focus, 0))


def _load(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        src = fh.read()
    env = P.load_prelude()
    return P.load_source(src, base=env)


def _decoded(value, main_ty, env) -> str:
    """Decode Nat/Bool/List-of-Nat results; print raw values otherwise."""
    ty = main_ty
    try:
        if isinstance(ty, S.TNamed) and ty.name == "Nat" and not ty.args:
            return str(H.decode_nat(value))
        if isinstance(ty, S.TNamed) and ty.name == "Bool" and not ty.args:
            return "true" if H.decode_bool(value) else "false"
        if (
            isinstance(ty, S.TNamed)
            and ty.name == "List"
            and ty.args == (S.TNamed("Nat", ()),)
        ):
            return str(H.decode_list(value))
    except H.DecodeError:
        pass
    return print_value(M.canonicalize(value))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="destcalc", description=__doc__)
    ap.add_argument("command", choices=["check", "run", "trace", "desugar"])
    ap.add_argument("file", help=".ld source file")
    ap.add_argument("--fuel", type=int, default=10**6)
    ap.add_argument("--from-prime-primitive", action="store_true",
                    help="treat from'* as a machine primitive instead of sugar")
    ap.add_argument("--json", action="store_true", dest="json_out")
    ap.add_argument("--verify", action="store_true",
                    help="run preservation/progress/balance checks on the trace")
    args = ap.parse_args(argv)
    if args.fuel <= 0:
        ap.error("--fuel must be positive")

    try:
        env = _load(args.file)
    except ParseError as e:
        print("parse error: %s" % e, file=sys.stderr)
        return EXIT_PARSE
    except TypeCheckError as e:
        print("type error [%s]: %s" % (e.kind, e), file=sys.stderr)
        return EXIT_TYPE

    if args.command == "check":
        if env.main is not None:
            ty = env.main_def().ty
            print(print_type(ty))
        else:
            for name in env.order:
                print("%s : %s" % (name, print_type(env.defs[name].ty)))
        return EXIT_OK

    if env.main is None:
        print("error: %s has no main" % args.file, file=sys.stderr)
        return EXIT_TYPE

    main_def = env.main_def()
    term = env.runnable(env.main, from_prime=args.from_prime_primitive)

    if args.command == "desugar":
        print(print_term(term))
        return EXIT_OK

    origin = M.Command((), term)
    checker = env.checker()
    try:
        main_ty = checker.check_command(origin, main_def.ty)
    except TypeCheckError as e:
        print("type error [%s]: %s" % (e.kind, e), file=sys.stderr)
        return EXIT_TYPE

    res = M.run(origin, args.fuel)
    doc = {"program": args.file, "type": print_type(main_ty)}
    steps_doc = []
    if args.command == "trace" and not args.json_out:
        for i, (rule, cmd) in enumerate(res.trace.steps, start=1):
            print("step %d  %s  %s" % (i, rule, print_command(cmd)))

    verdicts = None
    exit_code = EXIT_OK
    if isinstance(res, M.StuckAt):
        print("stuck: %s" % res.reason, file=sys.stderr)
        exit_code = EXIT_STUCK
    elif isinstance(res, M.OutOfFuel):
        print("out of fuel after %d steps" % len(res.trace.steps), file=sys.stderr)
        exit_code = EXIT_FUEL

    if args.verify and exit_code == EXIT_OK:
        pres = H.check_preservation(res.trace, checker, main_ty)
        prog = H.check_progress_determinism(res.trace)
        bal = H.scan_trace_balance(res.trace)
        coerce_free = checker.stats.dest_coercions == 0
        verdicts = {
            "preservation": pres.ok,
            "progress_determinism": prog.ok,
            "balance": bal.ok,
            "no_dest_coercion": coerce_free,
        }
        if not all(verdicts.values()):
            for v in (pres, prog, bal):
                for i, msg in v.failures:
                    print("verdict failure at step %d: %s" % (i, msg), file=sys.stderr)
            exit_code = EXIT_VERDICT

    if args.json_out:
        for i, (rule, cmd) in enumerate(res.trace.steps, start=1):
            entry = {"i": i, "rule": rule, "command": print_command(cmd)}
            if args.verify and verdicts is not None and verdicts["preservation"]:
                entry["type"] = print_type(main_ty)
            steps_doc.append(entry)
        doc["steps"] = steps_doc
        if isinstance(res, M.Finished):
            doc["final"] = print_value(res.value)
        else:
            doc["final"] = None
        if verdicts is not None:
            doc["verdicts"] = verdicts
        sys.stdout.write(json.dumps(doc, ensure_ascii=False) + "\n")
        return exit_code

    if isinstance(res, M.Finished):
        if args.command == "run":
            print(_decoded(res.value, main_ty, env))
        else:
            print(print_value(res.value))
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
