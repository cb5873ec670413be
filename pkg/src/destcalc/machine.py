"""Deterministic small-step abstract machine.

A command is an evaluation-context stack plus a focused term.  Rules come
in three families: focusing (F, pushes a component; never fires when the
would-be focus is already a value), unfocusing (U, pops and reassembles
around a value) and contraction (C, rewrites a redex).  Destination
fills mutate the structure attached to the unique open-ampar component
that binds the hole, via a substitution on the context; fresh hole names
come from max-based formulas so runs are fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

from .modes import Mode, ONE_INF
from . import syntax as S


# ---------------------------------------------------------------------------
# Focusing components


def _meta(**kw):
    return field(default=None, compare=False, repr=False, **kw)


@dataclass(eq=True)
class AppFun:
    fn: object  # pending function term; focus is the argument


@dataclass(eq=True)
class AppArg:
    arg: object  # evaluated argument value; focus is the function


@dataclass(eq=True)
class SeqL:
    rest: object


@dataclass(eq=True)
class CaseSumF:
    mode: Mode
    left_var: str
    left_body: object
    right_var: str
    right_body: object
    scrut_ty_: object = _meta()


@dataclass(eq=True)
class CasePairF:
    mode: Mode
    var1: str
    var2: str
    body: object
    scrut_ty_: object = _meta()


@dataclass(eq=True)
class CaseBangF:
    mode: Mode
    inner_mode: Mode
    var: str
    body: object
    scrut_ty_: object = _meta()


@dataclass(eq=True)
class UpdWithF:
    var: str
    body: object
    scrut_ty_: object = _meta()


@dataclass(eq=True)
class ToF:
    pass


@dataclass(eq=True)
class FromF:
    inner_ty_: object = _meta()


@dataclass(eq=True)
class FromPrimeF:
    left_ty_: object = _meta()


@dataclass(eq=True)
class FillUnitF:
    pass


@dataclass(eq=True)
class FillInlF:
    pass


@dataclass(eq=True)
class FillInrF:
    pass


@dataclass(eq=True)
class FillPairF:
    pass


@dataclass(eq=True)
class FillBangF:
    mode: Mode = None


@dataclass(eq=True)
class FillFunF:
    var: str
    mode: Mode
    body: object
    param_ty_: object = _meta()


@dataclass(eq=True)
class FillCompL:
    child: object  # pending child term; focus is the destination


@dataclass(eq=True)
class FillCompR:
    dest: object  # destination value; focus is the child ampar


@dataclass(eq=True)
class FillLeafL:
    arg: object


@dataclass(eq=True)
class FillLeafR:
    dest: object


@dataclass(eq=True)
class OpenAmpar:
    holes: frozenset
    left: object  # the structure under construction (a Value with holes)


FocusComp = object


@dataclass(eq=True)
class Command:
    ctx: Tuple[FocusComp, ...]
    focus: object
    # cached max hole name per component; derived data, never compared
    ctx_hmax: Optional[Tuple[int, ...]] = field(default=None, compare=False, repr=False)


@dataclass
class Stepped:
    rule: str
    command: Command


@dataclass
class Final:
    value: object


@dataclass
class Stuck:
    reason: str


class HoleNotFound(Exception):
    def __init__(self, h: int):
        super().__init__("no open ampar binds hole %d" % h)
        self.hole = h


# ---------------------------------------------------------------------------
# Hole-name bookkeeping


def hnames_value(v) -> set:
    out = set()
    _hn_value(v, out)
    return out


def _hn_value(v, out: set):
    if isinstance(v, (S.HoleV, S.DestV)):
        out.add(v.hole)
    elif isinstance(v, S.AmparV):
        out |= v.holes
        _hn_value(v.left, out)
        _hn_value(v.right, out)
    elif isinstance(v, (S.InlV, S.InrV, S.ModV)):
        _hn_value(v.value, out)
    elif isinstance(v, S.PairV):
        _hn_value(v.fst, out)
        _hn_value(v.snd, out)
    elif isinstance(v, S.LamV):
        _hn_term(v.body, out)


def hnames_term(t) -> set:
    out = set()
    _hn_term(t, out)
    return out


def _hn_term(t, out: set):
    if isinstance(t, S.Val):
        _hn_value(t.value, out)
        return
    for f in S.field_names(type(t)):
        v = getattr(t, f)
        if isinstance(v, S._TERM_TYPES):
            _hn_term(v, out)


def hnames_component(e) -> set:
    out = set()
    if isinstance(e, OpenAmpar):
        out |= e.holes
        _hn_value(e.left, out)
        return out
    for f in S.field_names(type(e)):
        v = getattr(e, f)
        if isinstance(v, S._TERM_TYPES):
            _hn_term(v, out)
        elif isinstance(v, S._VALUE_TYPES):
            _hn_value(v, out)
    return out


def hnames_ctx(ctx: Tuple[FocusComp, ...]) -> set:
    out = set()
    for e in ctx:
        out |= hnames_component(e)
    return out


def hmax_value(v) -> int:
    cached = v.__dict__.get("_hmax")
    if cached is not None:
        return cached
    if isinstance(v, (S.HoleV, S.DestV)):
        m = v.hole
    elif isinstance(v, S.AmparV):
        m = max(max(v.holes, default=0), hmax_value(v.left), hmax_value(v.right))
    elif isinstance(v, (S.InlV, S.InrV, S.ModV)):
        m = hmax_value(v.value)
    elif isinstance(v, S.PairV):
        m = max(hmax_value(v.fst), hmax_value(v.snd))
    elif isinstance(v, S.LamV):
        m = hmax_term(v.body)
    else:
        m = 0
    v.__dict__["_hmax"] = m
    return m


def hmax_term(t) -> int:
    cached = t.__dict__.get("_hmax")
    if cached is not None:
        return cached
    if isinstance(t, S.Val):
        m = hmax_value(t.value)
    else:
        m = 0
        for f in S.field_names(type(t)):
            v = getattr(t, f)
            if isinstance(v, S._TERM_TYPES):
                m = max(m, hmax_term(v))
    t.__dict__["_hmax"] = m
    return m


def hmax_component(e) -> int:
    if isinstance(e, OpenAmpar):
        return max(max(e.holes, default=0), hmax_value(e.left))
    m = 0
    for f in S.field_names(type(e)):
        v = getattr(e, f)
        if isinstance(v, S._TERM_TYPES):
            m = max(m, hmax_term(v))
        elif isinstance(v, S._VALUE_TYPES):
            m = max(m, hmax_value(v))
    return m


def hnames(x) -> set:
    """Hole names occurring (free or bound) in a value, term, context or command."""
    if isinstance(x, Command):
        return hnames_ctx(x.ctx) | hnames_term(x.focus)
    if isinstance(x, tuple):
        return hnames_ctx(x)
    if isinstance(x, S._VALUE_TYPES):
        return hnames_value(x)
    if isinstance(x, dict):
        return {k for k in x.keys() if isinstance(k, int)}
    return hnames_term(x)


# ---------------------------------------------------------------------------
# Shifts and substitutions


def shift_set(holes, d: int) -> frozenset:
    return frozenset(h + d for h in holes)


def cond_shift(x, holes, d: int):
    """Rename hole/destination occurrences named in `holes` by +d.

    A closed ampar value binds its own name set; names it binds are not
    occurrences of the outer ones and stay untouched.
    """
    if d == 0 or not holes:
        return x
    if isinstance(x, tuple):  # evaluation context
        return tuple(_shift_component(e, holes, d) for e in x)
    if isinstance(x, S._VALUE_TYPES):
        return _shift_value(x, holes, d)
    return _shift_term(x, holes, d)


def _shift_value(v, holes, d):
    if isinstance(v, (S.HoleV, S.DestV)):
        if v.hole in holes:
            return type(v)(v.hole + d)
        return v
    if isinstance(v, S.AmparV):
        inner = holes - v.holes
        if not inner:
            return v
        return S.AmparV(v.holes, _shift_value(v.left, inner, d), _shift_value(v.right, inner, d))
    if isinstance(v, S.UnitV):
        return v
    if isinstance(v, (S.InlV, S.InrV)):
        return type(v)(_shift_value(v.value, holes, d))
    if isinstance(v, S.ModV):
        return S.ModV(v.mode, _shift_value(v.value, holes, d))
    if isinstance(v, S.PairV):
        return S.PairV(_shift_value(v.fst, holes, d), _shift_value(v.snd, holes, d))
    if isinstance(v, S.LamV):
        out = S.LamV(v.var, v.mode, _shift_term(v.body, holes, d))
        out.param_ty_ = v.param_ty_
        return out
    raise TypeError(v)


def _shift_term(t, holes, d):
    if isinstance(t, S.Val):
        nv = _shift_value(t.value, holes, d)
        return t if nv is t.value else S.Val(nv, pos=t.pos)
    return S.map_children(t, lambda c: _shift_term(c, holes, d))


def _shift_component(e, holes, d):
    if isinstance(e, OpenAmpar):
        # open-ampar binders are globally unique; only free occurrences move
        assert not (e.holes & holes)
        return OpenAmpar(e.holes, _shift_value(e.left, holes, d))
    kw = {}
    for f in S.all_field_names(type(e)):
        v = getattr(e, f)
        if isinstance(v, S._TERM_TYPES):
            kw[f] = _shift_term(v, holes, d)
        elif isinstance(v, S._VALUE_TYPES):
            kw[f] = _shift_value(v, holes, d)
        else:
            kw[f] = v
    return type(e)(**kw)


def free_vars_cached(t) -> frozenset:
    """Memoized free term variables (nodes are immutable after build)."""
    cached = t.__dict__.get("_fv")
    if cached is not None:
        return cached
    if isinstance(t, S.Var):
        fv = frozenset((t.name,))
    elif isinstance(t, S.Val):
        fv = frozenset()
    elif isinstance(t, S.CaseSum):
        fv = (
            free_vars_cached(t.scrut)
            | (free_vars_cached(t.left_body) - {t.left_var})
            | (free_vars_cached(t.right_body) - {t.right_var})
        )
    elif isinstance(t, S.CasePair):
        fv = free_vars_cached(t.scrut) | (free_vars_cached(t.body) - {t.var1, t.var2})
    elif isinstance(t, (S.CaseBang, S.UpdWith)):
        fv = free_vars_cached(t.scrut) | (free_vars_cached(t.body) - {t.var})
    elif isinstance(t, S.FillFun):
        fv = free_vars_cached(t.dest) | (free_vars_cached(t.body) - {t.var})
    elif isinstance(t, S.Fix):
        fv = free_vars_cached(t.body) - {t.var}
    else:
        fv = frozenset()
        for f in S.field_names(type(t)):
            v = getattr(t, f)
            if isinstance(v, S._TERM_TYPES):
                fv |= free_vars_cached(v)
    t.__dict__["_fv"] = fv
    return fv


def subst_var(t, x: str, v):
    """Capture-avoiding substitution of the value v for the variable x."""
    if x not in free_vars_cached(t):
        return t
    if isinstance(t, S.Var):
        return S.Val(v, pos=t.pos) if t.name == x else t
    if isinstance(t, S.Val):
        return t  # values are closed
    if isinstance(t, S.CaseSum):
        scrut = subst_var(t.scrut, x, v)
        lb = t.left_body if t.left_var == x else subst_var(t.left_body, x, v)
        rb = t.right_body if t.right_var == x else subst_var(t.right_body, x, v)
        node = S.CaseSum(t.mode, scrut, t.left_var, lb, t.right_var, rb, pos=t.pos)
        node.scrut_ty_ = t.scrut_ty_
        return node
    if isinstance(t, S.CasePair):
        scrut = subst_var(t.scrut, x, v)
        body = t.body if x in (t.var1, t.var2) else subst_var(t.body, x, v)
        node = S.CasePair(t.mode, scrut, t.var1, t.var2, body, pos=t.pos)
        node.scrut_ty_ = t.scrut_ty_
        return node
    if isinstance(t, S.CaseBang):
        scrut = subst_var(t.scrut, x, v)
        body = t.body if t.var == x else subst_var(t.body, x, v)
        node = S.CaseBang(t.mode, scrut, t.inner_mode, t.var, body, pos=t.pos)
        node.scrut_ty_ = t.scrut_ty_
        return node
    if isinstance(t, S.UpdWith):
        scrut = subst_var(t.scrut, x, v)
        body = t.body if t.var == x else subst_var(t.body, x, v)
        node = S.UpdWith(scrut, t.var, body, pos=t.pos)
        node.scrut_ty_ = t.scrut_ty_
        return node
    if isinstance(t, S.FillFun):
        dest = subst_var(t.dest, x, v)
        body = t.body if t.var == x else subst_var(t.body, x, v)
        node = S.FillFun(dest, t.var, t.mode, body, pos=t.pos)
        node.param_ty_ = t.param_ty_
        return node
    if isinstance(t, S.Fix):
        body = t.body if t.var == x else subst_var(t.body, x, v)
        return S.Fix(t.var, t.ann, body, pos=t.pos)
    return S.map_children(t, lambda c: subst_var(c, x, v))


def subst_fix(t, x: str, fix_term):
    """Term-for-variable substitution, used only to unroll `fix` once."""
    if x not in free_vars_cached(t):
        return t
    if isinstance(t, S.Var):
        return fix_term if t.name == x else t
    if isinstance(t, S.Val):
        return t
    if isinstance(t, S.CaseSum):
        node = S.CaseSum(
            t.mode, subst_fix(t.scrut, x, fix_term), t.left_var,
            t.left_body if t.left_var == x else subst_fix(t.left_body, x, fix_term),
            t.right_var,
            t.right_body if t.right_var == x else subst_fix(t.right_body, x, fix_term),
            pos=t.pos,
        )
        node.scrut_ty_ = t.scrut_ty_
        return node
    if isinstance(t, S.CasePair):
        node = S.CasePair(
            t.mode, subst_fix(t.scrut, x, fix_term), t.var1, t.var2,
            t.body if x in (t.var1, t.var2) else subst_fix(t.body, x, fix_term), pos=t.pos,
        )
        node.scrut_ty_ = t.scrut_ty_
        return node
    if isinstance(t, S.CaseBang):
        node = S.CaseBang(
            t.mode, subst_fix(t.scrut, x, fix_term), t.inner_mode, t.var,
            t.body if t.var == x else subst_fix(t.body, x, fix_term), pos=t.pos,
        )
        node.scrut_ty_ = t.scrut_ty_
        return node
    if isinstance(t, S.UpdWith):
        node = S.UpdWith(
            subst_fix(t.scrut, x, fix_term), t.var,
            t.body if t.var == x else subst_fix(t.body, x, fix_term), pos=t.pos,
        )
        node.scrut_ty_ = t.scrut_ty_
        return node
    if isinstance(t, S.FillFun):
        node = S.FillFun(
            subst_fix(t.dest, x, fix_term), t.var, t.mode,
            t.body if t.var == x else subst_fix(t.body, x, fix_term), pos=t.pos,
        )
        node.param_ty_ = t.param_ty_
        return node
    if isinstance(t, S.Fix):
        return S.Fix(
            t.var, t.ann, t.body if t.var == x else subst_fix(t.body, x, fix_term), pos=t.pos
        )
    return S.map_children(t, lambda c: subst_fix(c, x, fix_term))


def _replace_hole(v, h: int, new):
    """Replace the (unique) occurrence of hole h in v; returns (v', count)."""
    if isinstance(v, S.HoleV):
        if v.hole == h:
            return new, 1
        return v, 0
    if isinstance(v, (S.DestV, S.UnitV)):
        return v, 0
    if isinstance(v, S.AmparV):
        if h in v.holes:
            return v, 0  # shadowed by the inner binder
        l, c1 = _replace_hole(v.left, h, new)
        r, c2 = _replace_hole(v.right, h, new)
        return (S.AmparV(v.holes, l, r) if c1 + c2 else v), c1 + c2
    if isinstance(v, (S.InlV, S.InrV)):
        inner, c = _replace_hole(v.value, h, new)
        return (type(v)(inner) if c else v), c
    if isinstance(v, S.ModV):
        inner, c = _replace_hole(v.value, h, new)
        return (S.ModV(v.mode, inner) if c else v), c
    if isinstance(v, S.PairV):
        a, c1 = _replace_hole(v.fst, h, new)
        b, c2 = _replace_hole(v.snd, h, new)
        return (S.PairV(a, b) if c1 + c2 else v), c1 + c2
    if isinstance(v, S.LamV):
        return v, 0  # lambda bodies contain no free holes
    raise TypeError(v)


def hole_subst(ctx: Tuple[FocusComp, ...], h: int, new_holes: frozenset, v) -> Tuple[FocusComp, ...]:
    """Write v into hole h of the open ampar binding it; rebind new_holes."""
    for i in range(len(ctx) - 1, -1, -1):
        e = ctx[i]
        if isinstance(e, OpenAmpar) and h in e.holes:
            left, count = _replace_hole(e.left, h, v)
            if count != 1:
                raise HoleNotFound(h)
            holes = (e.holes - {h}) | new_holes
            return ctx[:i] + (OpenAmpar(holes, left),) + ctx[i + 1 :]
    raise HoleNotFound(h)


# ---------------------------------------------------------------------------
# Stepping


def is_val(t) -> bool:
    return isinstance(t, S.Val)


def _hmaxes(cmd: Command) -> Tuple[int, ...]:
    if cmd.ctx_hmax is None:
        cmd.ctx_hmax = tuple(hmax_component(e) for e in cmd.ctx)
    return cmd.ctx_hmax


def _push(cmd: Command, comp, focus) -> Command:
    return Command(cmd.ctx + (comp,), focus, _hmaxes(cmd) + (hmax_component(comp),))


def _pop(cmd: Command, focus) -> Command:
    return Command(cmd.ctx[:-1], focus, _hmaxes(cmd)[:-1])


def _ctx_max(cmd: Command) -> int:
    return max(_hmaxes(cmd), default=0)


def _fresh_base(cmd: Command, h: int) -> int:
    return max(_ctx_max(cmd), h) + 1


def _subst_cmd(cmd: Command, h: int, new_holes: frozenset, v, focus) -> Command:
    """hole_subst plus maintenance of the cached component maxima."""
    ctx = hole_subst(cmd.ctx, h, new_holes, v)
    maxes = list(_hmaxes(cmd))
    for i in range(len(ctx) - 1, -1, -1):
        if ctx[i] is not cmd.ctx[i]:
            e = ctx[i]
            maxes[i] = max(max(e.holes, default=0), hmax_value(e.left))
            break
    return Command(ctx, focus, tuple(maxes))


def applicable_rules(cmd: Command) -> List[Tuple[str, Callable[[], Command]]]:
    """All rules whose left-hand side matches the command.

    The semantics is deterministic: on every reachable command this list
    has at most one entry.  The harness re-scans it at every step.
    """
    out: List[Tuple[str, Callable[[], Command]]] = []
    t = cmd.focus
    ctx = cmd.ctx

    if is_val(t):
        v = t.value
        if ctx:
            e = ctx[-1]
            if isinstance(e, AppFun):
                out.append(("⊸EU₁", lambda: _pop(cmd, S.App(e.fn, t))))
            elif isinstance(e, AppArg):
                out.append(("⊸EU₂", lambda: _pop(cmd, S.App(t, S.Val(e.arg)))))
            elif isinstance(e, SeqL):
                out.append(("1EU", lambda: _pop(cmd, S.Seq(t, e.rest))))
            elif isinstance(e, CaseSumF):
                def _pop_case_sum():
                    node = S.CaseSum(e.mode, t, e.left_var, e.left_body, e.right_var, e.right_body)
                    node.scrut_ty_ = e.scrut_ty_
                    return _pop(cmd, node)
                out.append(("⊕EU", _pop_case_sum))
            elif isinstance(e, CasePairF):
                def _pop_case_pair():
                    node = S.CasePair(e.mode, t, e.var1, e.var2, e.body)
                    node.scrut_ty_ = e.scrut_ty_
                    return _pop(cmd, node)
                out.append(("⊗EU", _pop_case_pair))
            elif isinstance(e, CaseBangF):
                def _pop_case_bang():
                    node = S.CaseBang(e.mode, t, e.inner_mode, e.var, e.body)
                    node.scrut_ty_ = e.scrut_ty_
                    return _pop(cmd, node)
                out.append(("!EU", _pop_case_bang))
            elif isinstance(e, UpdWithF):
                def _pop_upd():
                    node = S.UpdWith(t, e.var, e.body)
                    node.scrut_ty_ = e.scrut_ty_
                    return _pop(cmd, node)
                out.append(("⋉UPDU", _pop_upd))
            elif isinstance(e, ToF):
                out.append(("⋉TOU", lambda: _pop(cmd, S.ToAmpar(t))))
            elif isinstance(e, FromF):
                def _pop_from():
                    node = S.FromAmpar(t)
                    node.inner_ty_ = e.inner_ty_
                    return _pop(cmd, node)
                out.append(("⋉FROMU", _pop_from))
            elif isinstance(e, FromPrimeF):
                def _pop_fromp():
                    node = S.FromAmparPrime(t)
                    node.left_ty_ = e.left_ty_
                    return _pop(cmd, node)
                out.append(("⋉FROM′U", _pop_fromp))
            elif isinstance(e, FillUnitF):
                out.append(("[1]EU", lambda: _pop(cmd, S.FillUnit(t))))
            elif isinstance(e, FillInlF):
                out.append(("[⊕]E₁U", lambda: _pop(cmd, S.FillInl(t))))
            elif isinstance(e, FillInrF):
                out.append(("[⊕]E₂U", lambda: _pop(cmd, S.FillInr(t))))
            elif isinstance(e, FillPairF):
                out.append(("[⊗]EU", lambda: _pop(cmd, S.FillPair(t))))
            elif isinstance(e, FillBangF):
                out.append(("[!]EU", lambda: _pop(cmd, S.FillBang(t, e.mode))))
            elif isinstance(e, FillFunF):
                def _pop_fill_fun():
                    node = S.FillFun(t, e.var, e.mode, e.body)
                    node.param_ty_ = e.param_ty_
                    return _pop(cmd, node)
                out.append(("[⊸]EU", _pop_fill_fun))
            elif isinstance(e, FillCompL):
                out.append(("[]E_cU₁", lambda: _pop(cmd, S.FillComp(t, e.child))))
            elif isinstance(e, FillCompR):
                out.append(("[]E_cU₂", lambda: _pop(cmd, S.FillComp(S.Val(e.dest), t))))
            elif isinstance(e, FillLeafL):
                out.append(("[]E_LU₁", lambda: _pop(cmd, S.FillLeaf(t, e.arg))))
            elif isinstance(e, FillLeafR):
                out.append(("[]E_LU₂", lambda: _pop(cmd, S.FillLeaf(S.Val(e.dest), t))))
            elif isinstance(e, OpenAmpar):
                out.append(("⋉CL", lambda: _pop(cmd, S.Val(S.AmparV(e.holes, e.left, v)))))
        return out

    if isinstance(t, S.App):
        if not is_val(t.arg):
            out.append(("⊸EF₁", lambda: _push(cmd, AppFun(t.fn), t.arg)))
        elif not is_val(t.fn):
            out.append(("⊸EF₂", lambda: _push(cmd, AppArg(t.arg.value), t.fn)))
        elif isinstance(t.fn.value, S.LamV):
            lam = t.fn.value
            out.append(("⊸EC", lambda: Command(ctx, subst_var(lam.body, lam.var, t.arg.value), _hmaxes(cmd))))
        return out

    if isinstance(t, S.Seq):
        if not is_val(t.first):
            out.append(("1EF", lambda: _push(cmd, SeqL(t.rest), t.first)))
        elif isinstance(t.first.value, S.UnitV):
            out.append(("1EC", lambda: Command(ctx, t.rest, _hmaxes(cmd))))
        return out

    if isinstance(t, S.CaseSum):
        if not is_val(t.scrut):
            def _push_case_sum():
                comp = CaseSumF(t.mode, t.left_var, t.left_body, t.right_var, t.right_body)
                comp.scrut_ty_ = t.scrut_ty_
                return _push(cmd, comp, t.scrut)
            out.append(("⊕EF", _push_case_sum))
        elif isinstance(t.scrut.value, S.InlV):
            out.append(
                ("⊕EC₁", lambda: Command(ctx, subst_var(t.left_body, t.left_var, t.scrut.value.value), _hmaxes(cmd)))
            )
        elif isinstance(t.scrut.value, S.InrV):
            out.append(
                ("⊕EC₂", lambda: Command(ctx, subst_var(t.right_body, t.right_var, t.scrut.value.value), _hmaxes(cmd)))
            )
        return out

    if isinstance(t, S.CasePair):
        if not is_val(t.scrut):
            def _push_case_pair():
                comp = CasePairF(t.mode, t.var1, t.var2, t.body)
                comp.scrut_ty_ = t.scrut_ty_
                return _push(cmd, comp, t.scrut)
            out.append(("⊗EF", _push_case_pair))
        elif isinstance(t.scrut.value, S.PairV):
            pv = t.scrut.value
            out.append(
                ("⊗EC", lambda: Command(ctx, subst_var(subst_var(t.body, t.var1, pv.fst), t.var2, pv.snd), _hmaxes(cmd)))
            )
        return out

    if isinstance(t, S.CaseBang):
        if not is_val(t.scrut):
            def _push_case_bang():
                comp = CaseBangF(t.mode, t.inner_mode, t.var, t.body)
                comp.scrut_ty_ = t.scrut_ty_
                return _push(cmd, comp, t.scrut)
            out.append(("!EF", _push_case_bang))
        elif isinstance(t.scrut.value, S.ModV) and t.scrut.value.mode == t.inner_mode:
            out.append(
                ("!EC", lambda: Command(ctx, subst_var(t.body, t.var, t.scrut.value.value), _hmaxes(cmd)))
            )
        return out

    if isinstance(t, S.UpdWith):
        if not is_val(t.scrut):
            def _push_upd():
                comp = UpdWithF(t.var, t.body)
                comp.scrut_ty_ = t.scrut_ty_
                return _push(cmd, comp, t.scrut)
            out.append(("⋉UPDF", _push_upd))
        elif isinstance(t.scrut.value, S.AmparV):
            av = t.scrut.value

            def _open():
                if av.holes:
                    h3 = max(max(av.holes), _ctx_max(cmd)) + 1
                    d = h3 - min(av.holes)
                else:
                    d = 0
                holes = shift_set(av.holes, d)
                left = cond_shift(av.left, av.holes, d)
                right = cond_shift(av.right, av.holes, d)
                focus = subst_var(t.body, t.var, right)
                comp = OpenAmpar(holes, left)
                return Command(
                    ctx + (comp,), focus,
                    _hmaxes(cmd) + (max(max(holes, default=0), hmax_value(left)),),
                )

            out.append(("⋉OP", _open))
        return out

    if isinstance(t, S.ToAmpar):
        if not is_val(t.inner):
            out.append(("⋉TOF", lambda: _push(cmd, ToF(), t.inner)))
        else:
            out.append(
                ("⋉TOC", lambda: Command(ctx, S.Val(S.AmparV(frozenset(), t.inner.value, S.UnitV())), _hmaxes(cmd)))
            )
        return out

    if isinstance(t, S.FromAmpar):
        if not is_val(t.inner):
            def _push_from():
                comp = FromF()
                comp.inner_ty_ = t.inner_ty_
                return _push(cmd, comp, t.inner)
            out.append(("⋉FROMF", _push_from))
        else:
            v = t.inner.value
            if (
                isinstance(v, S.AmparV)
                and isinstance(v.right, S.ModV)
                and v.right.mode == ONE_INF
            ):
                out.append(("⋉FROMC", lambda: Command(ctx, S.Val(S.PairV(v.left, v.right)), _hmaxes(cmd))))
        return out

    if isinstance(t, S.FromAmparPrime):
        if not is_val(t.inner):
            def _push_fromp():
                comp = FromPrimeF()
                comp.left_ty_ = t.left_ty_
                return _push(cmd, comp, t.inner)
            out.append(("⋉FROM′F", _push_fromp))
        else:
            v = t.inner.value
            if isinstance(v, S.AmparV) and isinstance(v.right, S.UnitV):
                out.append(("⋉FROM′C", lambda: Command(ctx, S.Val(v.left), _hmaxes(cmd))))
        return out

    if isinstance(t, S.NewAmpar):
        out.append(
            ("⋉NEWC", lambda: Command(ctx, S.Val(S.AmparV(frozenset({1}), S.HoleV(1), S.DestV(1))), _hmaxes(cmd)))
        )
        return out

    if isinstance(t, S.FillUnit):
        if not is_val(t.dest):
            out.append(("[1]EF", lambda: _push(cmd, FillUnitF(), t.dest)))
        elif isinstance(t.dest.value, S.DestV):
            h = t.dest.value.hole
            out.append(
                ("[1]EC", lambda: _subst_cmd(cmd, h, frozenset(), S.UnitV(), S.Val(S.UnitV())))
            )
        return out

    if isinstance(t, (S.FillInl, S.FillInr)):
        inl = isinstance(t, S.FillInl)
        if not is_val(t.dest):
            comp = FillInlF() if inl else FillInrF()
            out.append(("[⊕]E₁F" if inl else "[⊕]E₂F", lambda: _push(cmd, comp, t.dest)))
        elif isinstance(t.dest.value, S.DestV):
            h = t.dest.value.hole

            def _fill_sum():
                n = _fresh_base(cmd, h) + 1
                hollow = S.InlV(S.HoleV(n)) if inl else S.InrV(S.HoleV(n))
                return _subst_cmd(cmd, h, frozenset({n}), hollow, S.Val(S.DestV(n)))

            out.append(("[⊕]E₁C" if inl else "[⊕]E₂C", _fill_sum))
        return out

    if isinstance(t, S.FillPair):
        if not is_val(t.dest):
            out.append(("[⊗]EF", lambda: _push(cmd, FillPairF(), t.dest)))
        elif isinstance(t.dest.value, S.DestV):
            h = t.dest.value.hole

            def _fill_pair():
                base = _fresh_base(cmd, h)
                n1, n2 = base + 1, base + 2
                hollow = S.PairV(S.HoleV(n1), S.HoleV(n2))
                focus = S.Val(S.PairV(S.DestV(n1), S.DestV(n2)))
                return _subst_cmd(cmd, h, frozenset({n1, n2}), hollow, focus)

            out.append(("[⊗]EC", _fill_pair))
        return out

    if isinstance(t, S.FillBang):
        if not is_val(t.dest):
            out.append(("[!]EF", lambda: _push(cmd, FillBangF(t.mode), t.dest)))
        elif isinstance(t.dest.value, S.DestV):
            h = t.dest.value.hole

            def _fill_bang():
                n = _fresh_base(cmd, h) + 1
                hollow = S.ModV(t.mode, S.HoleV(n))
                return _subst_cmd(cmd, h, frozenset({n}), hollow, S.Val(S.DestV(n)))

            out.append(("[!]EC", _fill_bang))
        return out

    if isinstance(t, S.FillFun):
        if not is_val(t.dest):
            def _push_fill_fun():
                comp = FillFunF(t.var, t.mode, t.body)
                comp.param_ty_ = t.param_ty_
                return _push(cmd, comp, t.dest)
            out.append(("[⊸]EF", _push_fill_fun))
        elif isinstance(t.dest.value, S.DestV):
            h = t.dest.value.hole

            def _fill_fun():
                assert free_vars_cached(t.body) <= {t.var}, "lambda value must be closed"
                lam = S.LamV(t.var, t.mode, t.body)
                lam.param_ty_ = t.param_ty_
                return _subst_cmd(cmd, h, frozenset(), lam, S.Val(S.UnitV()))

            out.append(("[⊸]EC", _fill_fun))
        return out

    if isinstance(t, S.FillComp):
        if not is_val(t.dest):
            out.append(("[]E_cF₁", lambda: _push(cmd, FillCompL(t.child), t.dest)))
        elif not is_val(t.child):
            out.append(("[]E_cF₂", lambda: _push(cmd, FillCompR(t.dest.value), t.child)))
        elif isinstance(t.dest.value, S.DestV) and isinstance(t.child.value, S.AmparV):
            h = t.dest.value.hole
            av = t.child.value

            def _compose():
                if av.holes:
                    h2 = max(max(av.holes), _ctx_max(cmd), h) + 1
                    d = h2 - min(av.holes)
                else:
                    d = 0
                holes = shift_set(av.holes, d)
                left = cond_shift(av.left, av.holes, d)
                right = cond_shift(av.right, av.holes, d)
                return _subst_cmd(cmd, h, holes, left, S.Val(right))

            out.append(("[]E_cC", _compose))
        return out

    if isinstance(t, S.FillLeaf):
        if not is_val(t.dest):
            out.append(("[]E_LF₁", lambda: _push(cmd, FillLeafL(t.arg), t.dest)))
        elif not is_val(t.arg):
            out.append(("[]E_LF₂", lambda: _push(cmd, FillLeafR(t.dest.value), t.arg)))
        elif isinstance(t.dest.value, S.DestV):
            h = t.dest.value.hole
            v = t.arg.value
            out.append(
                ("[]E_LC", lambda: _subst_cmd(cmd, h, frozenset(), v, S.Val(S.UnitV())))
            )
        return out

    if isinstance(t, S.Fix):
        out.append(("fixC", lambda: Command(ctx, subst_fix(t.body, t.var, t), _hmaxes(cmd))))
        return out

    return out


def step(cmd: Command):
    if is_val(cmd.focus) and not cmd.ctx:
        return Final(cmd.focus.value)
    rules = applicable_rules(cmd)
    if not rules:
        from .printer import print_term
        return Stuck("no rule applies to focus %s" % print_term(cmd.focus, 3))
    if len(rules) > 1:
        names = ", ".join(name for name, _ in rules)
        raise AssertionError("determinism violation: %s all apply" % names)
    name, thunk = rules[0]
    return Stepped(name, thunk())


@dataclass
class Trace:
    origin: Command
    steps: List[Tuple[str, Command]]


@dataclass
class Finished:
    value: object
    trace: Trace


@dataclass
class OutOfFuel:
    trace: Trace


@dataclass
class StuckAt:
    command: Command
    reason: str
    trace: Trace


def run(cmd: Command, fuel: int = 10**6):
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    steps: List[Tuple[str, Command]] = []
    trace = Trace(cmd, steps)
    cur = cmd
    for _ in range(fuel):
        res = step(cur)
        if isinstance(res, Final):
            return Finished(res.value, trace)
        if isinstance(res, Stuck):
            return StuckAt(cur, res.reason, trace)
        steps.append((res.rule, res.command))
        cur = res.command
    return OutOfFuel(trace)


def run_term(t, fuel: int = 10**6):
    return run(Command((), t), fuel)


# ---------------------------------------------------------------------------
# Canonical renaming of bound hole names (for name-insensitive equality)


def canonicalize(v):
    counter = [0]

    def fresh():
        counter[0] += 1
        return counter[0]

    def order_of(vs, targets, acc, shadow):
        # first-occurrence order of target names, left-to-right
        if isinstance(vs, (S.HoleV, S.DestV)):
            if vs.hole in targets and vs.hole not in shadow and vs.hole not in acc:
                acc.append(vs.hole)
        elif isinstance(vs, S.AmparV):
            inner_shadow = shadow | (vs.holes & targets)
            order_of(vs.left, targets, acc, inner_shadow)
            order_of(vs.right, targets, acc, inner_shadow)
        elif isinstance(vs, (S.InlV, S.InrV, S.ModV)):
            order_of(vs.value, targets, acc, shadow)
        elif isinstance(vs, S.PairV):
            order_of(vs.fst, targets, acc, shadow)
            order_of(vs.snd, targets, acc, shadow)

    def walk(v, env):
        if isinstance(v, (S.HoleV, S.DestV)):
            return type(v)(env.get(v.hole, v.hole))
        if isinstance(v, S.UnitV):
            return v
        if isinstance(v, (S.InlV, S.InrV)):
            return type(v)(walk(v.value, env))
        if isinstance(v, S.ModV):
            return S.ModV(v.mode, walk(v.value, env))
        if isinstance(v, S.PairV):
            return S.PairV(walk(v.fst, env), walk(v.snd, env))
        if isinstance(v, S.LamV):
            return v
        if isinstance(v, S.AmparV):
            acc: List[int] = []
            order_of(v.left, v.holes, acc, set())
            order_of(v.right, v.holes, acc, set())
            for h in sorted(v.holes):
                if h not in acc:
                    acc.append(h)
            env2 = dict(env)
            for h in acc:
                env2[h] = fresh()
            return S.AmparV(
                frozenset(env2[h] for h in v.holes), walk(v.left, env2), walk(v.right, env2)
            )
        raise TypeError(v)

    return walk(v, {})
