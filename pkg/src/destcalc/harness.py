"""Dynamic metatheory checks over traces, plus encode/decode and native oracles.

The harness re-derives, per trace command, what the safety theorems
promise: the command types at the unchanged program type (preservation),
exactly one rule applies to every non-final command (progress and
determinism), and every hole-name binder pairs one hole with one
destination (balance).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

from . import machine as M
from . import syntax as S
from .typecheck import Checker, CheckStats, TypeCheckError


@dataclass
class Verdict:
    ok: bool
    failures: List[Tuple[int, str]] = field(default_factory=list)

    @classmethod
    def from_failures(cls, failures):
        return cls(not failures, list(failures))


def _trace_commands(tr: M.Trace):
    yield 0, tr.origin
    for i, (_, cmd) in enumerate(tr.steps, start=1):
        yield i, cmd


def check_preservation(tr: M.Trace, checker: Checker, expected_ty=None) -> Verdict:
    """Every command of the trace types at the origin's type."""
    failures = []
    try:
        ty = checker.check_command(tr.origin, expected_ty)
    except TypeCheckError as e:
        return Verdict(False, [(0, "origin does not typecheck: %s" % e)])
    for i, cmd in _trace_commands(tr):
        if i == 0:
            continue
        try:
            ty_i = checker.check_command(cmd, ty)
        except TypeCheckError as e:
            failures.append((i, "command no longer typechecks: %s" % e))
            break
        if not checker.tyenv.equal(ty_i, ty):
            failures.append((i, "type changed"))
            break
    return Verdict.from_failures(failures)


def check_progress_determinism(tr: M.Trace) -> Verdict:
    """No stuck commands, and never a second applicable rule."""
    failures = []
    commands = list(_trace_commands(tr))
    for idx, (i, cmd) in enumerate(commands):
        is_last = idx == len(commands) - 1
        final = M.is_val(cmd.focus) and not cmd.ctx
        rules = M.applicable_rules(cmd)
        if final:
            if rules:
                failures.append((i, "final command still has applicable rules"))
            continue
        if not rules:
            failures.append((i, "stuck: no rule applies"))
            continue
        if len(rules) > 1:
            failures.append((i, "determinism violation: %s" % [n for n, _ in rules]))
            continue
        if not is_last and idx + 1 < len(commands):
            recorded = tr.steps[idx][0]
            if recorded != rules[0][0]:
                failures.append((i, "recorded rule %s but scan finds %s" % (recorded, rules[0][0])))
    return Verdict.from_failures(failures)


# -- balance ------------------------------------------------------------------


def _count_occ(x, h: int, kind, problems=None) -> int:
    """Occurrences of hole/dest named h, not descending under a binder for h.

    The two arms of a sum case are alternatives: exactly one will run, so
    they must mention the name equally often, and count once jointly.
    """
    if isinstance(x, kind) and x.hole == h:
        return 1
    if isinstance(x, (S.HoleV, S.DestV, S.UnitV)):
        return 0
    if isinstance(x, S.AmparV):
        if h in x.holes:
            return 0
        return _count_occ(x.left, h, kind, problems) + _count_occ(x.right, h, kind, problems)
    if isinstance(x, (S.InlV, S.InrV, S.ModV)):
        return _count_occ(x.value, h, kind, problems)
    if isinstance(x, S.PairV):
        return _count_occ(x.fst, h, kind, problems) + _count_occ(x.snd, h, kind, problems)
    if isinstance(x, S.LamV):
        return _count_occ_term(x.body, h, kind, problems)
    raise TypeError(x)


def _count_occ_term(t, h: int, kind, problems=None) -> int:
    if isinstance(t, S.Val):
        return _count_occ(t.value, h, kind, problems)
    if isinstance(t, S.CaseSum):
        n = _count_occ_term(t.scrut, h, kind, problems)
        l = _count_occ_term(t.left_body, h, kind, problems)
        r = _count_occ_term(t.right_body, h, kind, problems)
        if l != r and problems is not None:
            problems.append(
                "case branches mention name %d unevenly (%d vs %d)" % (h, l, r)
            )
        return n + max(l, r)
    n = 0
    for f in S.field_names(type(t)):
        v = getattr(t, f)
        if isinstance(v, S._TERM_TYPES):
            n += _count_occ_term(v, h, kind, problems)
    return n


def _count_occ_component(e, h: int, kind, problems=None) -> int:
    if isinstance(e, M.OpenAmpar):
        # its own binder scope is handled separately; names it binds are free here
        return _count_occ(e.left, h, kind, problems) if h not in e.holes else 0
    if isinstance(e, M.CaseSumF):
        l = _count_occ_term(e.left_body, h, kind, problems)
        r = _count_occ_term(e.right_body, h, kind, problems)
        if l != r and problems is not None:
            problems.append(
                "case branches mention name %d unevenly (%d vs %d)" % (h, l, r)
            )
        return max(l, r)
    n = 0
    for f in S.field_names(type(e)):
        v = getattr(e, f)
        if isinstance(v, S._TERM_TYPES):
            n += _count_occ_term(v, h, kind, problems)
        elif isinstance(v, S._VALUE_TYPES):
            n += _count_occ(v, h, kind, problems)
    return n


def _scan_value_balance(v, failures, where):
    if isinstance(v, S.AmparV):
        probs: List[str] = []
        for h in v.holes:
            holes = _count_occ(v.left, h, S.HoleV, probs) + _count_occ(v.right, h, S.HoleV, probs)
            dests = _count_occ(v.left, h, S.DestV, probs) + _count_occ(v.right, h, S.DestV, probs)
            if holes != 1 or dests != 1:
                failures.append(
                    (0, "%s: ampar name %d has %d hole(s) and %d destination(s)"
                     % (where, h, holes, dests))
                )
        failures.extend((0, "%s: %s" % (where, p)) for p in probs)
        _scan_value_balance(v.left, failures, where)
        _scan_value_balance(v.right, failures, where)
    elif isinstance(v, (S.InlV, S.InrV, S.ModV)):
        _scan_value_balance(v.value, failures, where)
    elif isinstance(v, S.PairV):
        _scan_value_balance(v.fst, failures, where)
        _scan_value_balance(v.snd, failures, where)
    elif isinstance(v, S.LamV):
        _scan_term_balance(v.body, failures, where)


def _scan_term_balance(t, failures, where):
    if isinstance(t, S.Val):
        _scan_value_balance(t.value, failures, where)
        return
    for f in S.field_names(type(t)):
        v = getattr(t, f)
        if isinstance(v, S._TERM_TYPES):
            _scan_term_balance(v, failures, where)


def scan_balance(cmd: M.Command) -> Verdict:
    """One hole and one destination per bound name, for every binder in view."""
    failures: List[Tuple[int, str]] = []
    problems: List[str] = []
    for i, e in enumerate(cmd.ctx):
        if isinstance(e, M.OpenAmpar):
            rest = cmd.ctx[i + 1 :]
            for h in e.holes:
                holes = _count_occ(e.left, h, S.HoleV, problems)
                dests = _count_occ_term(cmd.focus, h, S.DestV, problems)
                for e2 in rest:
                    dests += _count_occ_component(e2, h, S.DestV, problems)
                stray = _count_occ_term(cmd.focus, h, S.HoleV, problems)
                for e2 in rest:
                    stray += _count_occ_component(e2, h, S.HoleV, problems)
                if holes != 1 or dests != 1 or stray != 0:
                    failures.append(
                        (0, "open ampar name %d: %d hole(s), %d destination(s), %d stray hole(s)"
                         % (h, holes, dests, stray))
                    )
            _scan_value_balance(e.left, failures, "open ampar structure")
        else:
            for f in S.field_names(type(e)):
                v = getattr(e, f)
                if isinstance(v, S._TERM_TYPES):
                    _scan_term_balance(v, failures, "component")
                elif isinstance(v, S._VALUE_TYPES):
                    _scan_value_balance(v, failures, "component")
    _scan_term_balance(cmd.focus, failures, "focus")
    failures.extend((0, p) for p in problems)
    return Verdict.from_failures(failures)


def scan_trace_balance(tr: M.Trace) -> Verdict:
    failures = []
    for i, cmd in _trace_commands(tr):
        v = scan_balance(cmd)
        if not v.ok:
            failures.extend((i, msg) for _, msg in v.failures)
    return Verdict.from_failures(failures)


# -- step counting --------------------------------------------------------------


class FuelExhausted(Exception):
    pass


class EvaluationStuck(Exception):
    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


def run_to_value(term, fuel: int = 10**6):
    res = M.run_term(term, fuel)
    if isinstance(res, M.Finished):
        return res
    if isinstance(res, M.OutOfFuel):
        raise FuelExhausted("no value after %d steps" % fuel)
    raise EvaluationStuck(res.reason)


def count_steps(term, fuel: int = 10**6) -> int:
    return len(run_to_value(term, fuel).trace.steps)


# -- encodings -------------------------------------------------------------------


class DecodeError(Exception):
    pass


def encode_nat(n: int):
    v = S.InlV(S.UnitV())
    for _ in range(n):
        v = S.InrV(v)
    return v


def decode_nat(v) -> int:
    n = 0
    while isinstance(v, S.InrV):
        n += 1
        v = v.value
    if isinstance(v, S.InlV) and isinstance(v.value, S.UnitV):
        return n
    raise DecodeError("not a canonical Nat: %r" % (v,))


def encode_bool(b: bool):
    return S.InlV(S.UnitV()) if b else S.InrV(S.UnitV())


def decode_bool(v) -> bool:
    if isinstance(v, S.InlV) and isinstance(v.value, S.UnitV):
        return True
    if isinstance(v, S.InrV) and isinstance(v.value, S.UnitV):
        return False
    raise DecodeError("not a canonical Bool: %r" % (v,))


def encode_list(xs, encode_elem: Callable = encode_nat):
    v = S.InlV(S.UnitV())
    for x in reversed(xs):
        v = S.InrV(S.PairV(encode_elem(x), v))
    return v


def decode_list(v, decode_elem: Callable = decode_nat) -> list:
    out = []
    while True:
        if isinstance(v, S.InlV) and isinstance(v.value, S.UnitV):
            return out
        if isinstance(v, S.InrV) and isinstance(v.value, S.PairV):
            out.append(decode_elem(v.value.fst))
            v = v.value.snd
            continue
        raise DecodeError("not a canonical list: %r" % (v,))


# Trees are None (Nil) or (label, left, right) tuples.


def encode_tree(t, encode_label: Callable = encode_nat):
    if t is None:
        return S.InlV(S.UnitV())
    x, l, r = t
    return S.InrV(
        S.PairV(
            encode_label(x),
            S.PairV(encode_tree(l, encode_label), encode_tree(r, encode_label)),
        )
    )


def encode_unit_tree(t):
    return encode_tree(t, lambda _: S.UnitV())


def decode_tree(v, decode_label: Callable = decode_nat):
    if isinstance(v, S.InlV) and isinstance(v.value, S.UnitV):
        return None
    if isinstance(v, S.InrV) and isinstance(v.value, S.PairV):
        label = decode_label(v.value.fst)
        rest = v.value.snd
        if not isinstance(rest, S.PairV):
            raise DecodeError("malformed tree node: %r" % (v,))
        return (label, decode_tree(rest.fst, decode_label), decode_tree(rest.snd, decode_label))
    raise DecodeError("not a canonical tree: %r" % (v,))


# -- native oracles -----------------------------------------------------------------


def list_map(f: Callable, xs: list) -> list:
    return [f(x) for x in xs]


def bfs_relabel(tree):
    """Level-order relabeling: nodes get 1..n left-to-right, top-to-bottom."""
    import collections

    if tree is None:
        return None
    order = []
    queue = collections.deque([((), tree)])
    while queue:
        path, node = queue.popleft()
        order.append(path)
        _, l, r = node
        if l is not None:
            queue.append((path + (0,), l))
        if r is not None:
            queue.append((path + (1,), r))
    label_of = {path: i + 1 for i, path in enumerate(order)}

    def rebuild(node, path):
        if node is None:
            return None
        _, l, r = node
        return (label_of[path], rebuild(l, path + (0,)), rebuild(r, path + (1,)))

    return rebuild(tree, ())


def oracles(kind: str, data):
    """Dispatch to a native oracle by name."""
    if kind == "bfs_relabel":
        return bfs_relabel(data)
    if kind == "list_map":
        f, xs = data
        return list_map(f, xs)
    if kind == "fifo_queue":
        return fifo_queue(data)
    raise ValueError("unknown oracle %r" % kind)


def fifo_queue(ops: list) -> list:
    """Replay enq/deq ops; returns the value of each dequeue (None if empty)."""
    import collections

    q = collections.deque()
    out = []
    for op in ops:
        if op[0] == "enq":
            q.append(op[1])
        else:
            out.append(q.popleft() if q else None)
    return out


# -- random inputs (fixed seeds recorded by the test suite) --------------------------


def random_list(rng: random.Random, max_len: int = 32, max_elem: int = 15) -> list:
    return [rng.randint(0, max_elem) for _ in range(rng.randint(0, max_len))]


def random_tree(rng: random.Random, max_nodes: int = 31):
    n = rng.randint(0, max_nodes)

    def build(k):
        if k == 0:
            return None
        left = rng.randint(0, k - 1)
        return ((), build(left), build(k - 1 - left))

    return build(n)


def random_queue_ops(rng: random.Random, max_ops: int = 64, max_elem: int = 15) -> list:
    n = rng.randint(1, max_ops)
    ops = [("enq", rng.randint(0, max_elem))]
    for _ in range(n - 1):
        if rng.random() < 0.6:
            ops.append(("enq", rng.randint(0, max_elem)))
        else:
            ops.append(("deq",))
    return ops
