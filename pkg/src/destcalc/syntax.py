"""Abstract syntax: types, core terms, runtime values, surface sugar.

Core terms follow the destination-calculus grammar exactly; everything a
surface program writes beyond it (constructors, lambdas, literals) is
sugar that `desugar` expands.  Term nodes carry a source position and,
after the checker has run, elaboration stamps (scrutinee/parameter
types) that later phases read; both are ignored by equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

from .modes import INF, Mode, UNIT, ONE_INF

Pos = Optional[Tuple[int, int]]


# ---------------------------------------------------------------------------
# Types (immutable trees; recursion goes through named definitions)


@dataclass(frozen=True, slots=True)
class TUnit:
    pass


@dataclass(frozen=True, slots=True)
class TSum:
    left: "Type"
    right: "Type"


@dataclass(frozen=True, slots=True)
class TProd:
    left: "Type"
    right: "Type"


@dataclass(frozen=True, slots=True)
class TBang:
    mode: Mode
    inner: "Type"


@dataclass(frozen=True, slots=True)
class TArrow:
    dom: "Type"
    mode: Mode
    cod: "Type"


@dataclass(frozen=True, slots=True)
class TDest:
    mode: Mode  # mode of values the hole accepts
    inner: "Type"


@dataclass(frozen=True, slots=True)
class TAmpar:
    left: "Type"  # the structure under construction
    right: "Type"


@dataclass(frozen=True, slots=True)
class TNamed:
    name: str
    args: Tuple["Type", ...] = ()


Type = Union[TUnit, TSum, TProd, TBang, TArrow, TDest, TAmpar, TNamed]

UNIT_T = TUnit()


# ---------------------------------------------------------------------------
# Core terms.  `pos` and fields ending in an underscore (elaboration
# stamps) never participate in equality.


def _meta(**kw):
    return field(default=None, compare=False, repr=False, **kw)


@dataclass(eq=True)
class Var:
    name: str
    pos: Pos = _meta()


@dataclass(eq=True)
class App:
    fn: "Term"
    arg: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class Seq:
    first: "Term"
    rest: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class CaseSum:
    mode: Mode
    scrut: "Term"
    left_var: str
    left_body: "Term"
    right_var: str
    right_body: "Term"
    pos: Pos = _meta()
    scrut_ty_: Optional[Type] = _meta()


@dataclass(eq=True)
class CasePair:
    mode: Mode
    scrut: "Term"
    var1: str
    var2: str
    body: "Term"
    pos: Pos = _meta()
    scrut_ty_: Optional[Type] = _meta()


@dataclass(eq=True)
class CaseBang:
    mode: Mode
    scrut: "Term"
    inner_mode: Mode
    var: str
    body: "Term"
    pos: Pos = _meta()
    scrut_ty_: Optional[Type] = _meta()


@dataclass(eq=True)
class UpdWith:
    scrut: "Term"
    var: str
    body: "Term"
    pos: Pos = _meta()
    scrut_ty_: Optional[Type] = _meta()


@dataclass(eq=True)
class ToAmpar:
    inner: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class FromAmpar:
    inner: "Term"
    pos: Pos = _meta()
    inner_ty_: Optional[Type] = _meta()


@dataclass(eq=True)
class FromAmparPrime:
    inner: "Term"
    pos: Pos = _meta()
    left_ty_: Optional[Type] = _meta()


@dataclass(eq=True)
class NewAmpar:
    # full annotated ampar type `(new* : T >< Dest T)`; resolved or filled
    # in from the expected type by the checker when absent
    ann: Optional[Type] = None
    pos: Pos = _meta()


@dataclass(eq=True)
class FillUnit:
    dest: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class FillInl:
    dest: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class FillInr:
    dest: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class FillPair:
    dest: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class FillBang:
    dest: "Term"
    mode: Mode = UNIT
    pos: Pos = _meta()


@dataclass(eq=True)
class FillFun:
    dest: "Term"
    var: str
    mode: Mode
    body: "Term"
    pos: Pos = _meta()
    param_ty_: Optional[Type] = _meta()


@dataclass(eq=True)
class FillComp:
    dest: "Term"
    child: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class FillLeaf:
    dest: "Term"
    arg: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class Val:
    value: "Value"
    pos: Pos = _meta()


@dataclass(eq=True)
class Fix:
    var: str
    ann: Type
    body: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class Annot:
    """Checker-level annotation (t : T); erased before evaluation."""

    inner: "Term"
    ty: Type
    pos: Pos = _meta()


# ---------------------------------------------------------------------------
# Runtime values


@dataclass(eq=True)
class HoleV:
    hole: int


@dataclass(eq=True)
class DestV:
    hole: int


@dataclass(eq=True)
class AmparV:
    holes: frozenset  # hole names bound between left and right
    left: "Value"  # structure under construction (may contain holes)
    right: "Value"  # carries the matching destinations


@dataclass(eq=True)
class UnitV:
    pass


@dataclass(eq=True)
class InlV:
    value: "Value"


@dataclass(eq=True)
class InrV:
    value: "Value"


@dataclass(eq=True)
class ModV:
    mode: Mode
    value: "Value"


@dataclass(eq=True)
class PairV:
    fst: "Value"
    snd: "Value"


@dataclass(eq=True)
class LamV:
    var: str
    mode: Mode
    body: "Term"
    param_ty_: Optional[Type] = _meta()


Value = Union[HoleV, DestV, AmparV, UnitV, InlV, InrV, ModV, PairV, LamV]

_VALUE_TYPES = (HoleV, DestV, AmparV, UnitV, InlV, InrV, ModV, PairV, LamV)


# ---------------------------------------------------------------------------
# Surface sugar


@dataclass(eq=True)
class UnitS:
    pos: Pos = _meta()


@dataclass(eq=True)
class InlS:
    inner: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class InrS:
    inner: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class PairS:
    fst: "Term"
    snd: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class ModS:
    mode: Mode
    inner: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class LamS:
    var: str
    mode: Mode
    body: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class FromPrimeS:
    inner: "Term"
    pos: Pos = _meta()


@dataclass(eq=True)
class NatLit:
    value: int
    pos: Pos = _meta()


Term = object  # core or sugar node; the union is open for internal markers

SUGAR_NODES = (UnitS, InlS, InrS, PairS, ModS, LamS, FromPrimeS, NatLit)

CASE_NODES = (CaseSum, CasePair, CaseBang)


class FreshNames:
    """Generator of parser-invisible binder names (users cannot write _x)."""

    def __init__(self, prefix: str = "_d"):
        self.prefix = prefix
        self.count = 0

    def fresh(self) -> str:
        self.count += 1
        return "%s%d" % (self.prefix, self.count)


_FIELD_CACHE = {}


def field_names(cls):
    """Data-field names of a node class, caches and positions excluded."""
    names = _FIELD_CACHE.get(cls)
    if names is None:
        import dataclasses

        names = tuple(
            f.name for f in dataclasses.fields(cls) if f.name != "pos" and not f.name.endswith("_")
        )
        _FIELD_CACHE[cls] = names
    return names


def all_field_names(cls):
    key = (cls, "all")
    names = _FIELD_CACHE.get(key)
    if names is None:
        import dataclasses

        names = tuple(f.name for f in dataclasses.fields(cls))
        _FIELD_CACHE[key] = names
    return names


def _children(t) -> list:
    out = []
    for f in field_names(type(t)):
        v = getattr(t, f)
        if _is_term(v):
            out.append(v)
    return out


_TERM_TYPES = (
    Var, App, Seq, CaseSum, CasePair, CaseBang, UpdWith, ToAmpar, FromAmpar,
    FromAmparPrime, NewAmpar, FillUnit, FillInl, FillInr, FillPair, FillBang,
    FillFun, FillComp, FillLeaf, Val, Fix, Annot,
) + SUGAR_NODES


def _is_term(v) -> bool:
    return isinstance(v, _TERM_TYPES)


def term_size(t) -> int:
    """Number of term nodes (values count 1; sugar counts pre-expansion)."""
    n = 1
    for c in _children(t):
        n += term_size(c)
    return n


def max_age_exponent(t) -> int:
    """Largest finite age exponent in any mode annotation of the term."""
    best = 0

    def from_mode(m: Mode):
        nonlocal best
        if m.age != INF:
            best = max(best, int(m.age))

    def from_type(ty):
        if isinstance(ty, (TBang, TDest)):
            from_mode(ty.mode)
            from_type(ty.inner)
        elif isinstance(ty, TArrow):
            from_mode(ty.mode)
            from_type(ty.dom)
            from_type(ty.cod)
        elif isinstance(ty, (TSum, TProd, TAmpar)):
            from_type(ty.left)
            from_type(ty.right)
        elif isinstance(ty, TNamed):
            for a in ty.args:
                from_type(a)

    def walk(node):
        for f in field_names(type(node)):
            v = getattr(node, f)
            if isinstance(v, Mode):
                from_mode(v)
            elif _is_term(v):
                walk(v)
            elif isinstance(v, _TYPE_TYPES):
                from_type(v)

    walk(t)
    return best


_TYPE_TYPES = (TUnit, TSum, TProd, TBang, TArrow, TDest, TAmpar, TNamed)


def free_vars(t) -> set:
    """Free term variables.  Value subterms are closed and contribute none."""
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Val):
        return set()
    if isinstance(t, (LamS, FillFun)):
        inner = free_vars(t.body)
        inner.discard(t.var)
        if isinstance(t, FillFun):
            inner |= free_vars(t.dest)
        return inner
    if isinstance(t, CaseSum):
        out = free_vars(t.scrut)
        out |= free_vars(t.left_body) - {t.left_var}
        out |= free_vars(t.right_body) - {t.right_var}
        return out
    if isinstance(t, CasePair):
        return free_vars(t.scrut) | (free_vars(t.body) - {t.var1, t.var2})
    if isinstance(t, CaseBang):
        return free_vars(t.scrut) | (free_vars(t.body) - {t.var})
    if isinstance(t, UpdWith):
        return free_vars(t.scrut) | (free_vars(t.body) - {t.var})
    if isinstance(t, Fix):
        return free_vars(t.body) - {t.var}
    out = set()
    for c in _children(t):
        out |= free_vars(c)
    return out


# ---------------------------------------------------------------------------
# Desugaring

MOD_INF_UNIT = ModV(ONE_INF, UnitV())


def desugar(t, fresh: Optional[FreshNames] = None):
    """Expand every sugar constructor into core syntax.

    from'* is kept as the FromAmparPrime node here; `lower_from_prime`
    replaces it by its upd/from/Mod expansion when the primitive is not
    enabled.  Idempotent on core terms.
    """
    if fresh is None:
        fresh = FreshNames()

    def dance(fill_of_dest, left_ty=None, pos=None):
        # from'* (upd new* with d -> <fill d>)
        d = fresh.fresh()
        ann = TAmpar(left_ty, TDest(UNIT, left_ty)) if left_ty is not None else None
        return FromAmparPrime(
            UpdWith(NewAmpar(ann, pos=pos), d, fill_of_dest(Var(d, pos=pos)), pos=pos), pos=pos
        )

    def go(t):
        if isinstance(t, UnitS):
            return dance(lambda d: FillUnit(d, pos=t.pos), TUnit(), t.pos)
        if isinstance(t, InlS):
            inner = go(t.inner)
            return dance(lambda d: FillLeaf(FillInl(d, pos=t.pos), inner, pos=t.pos), None, t.pos)
        if isinstance(t, InrS):
            inner = go(t.inner)
            return dance(lambda d: FillLeaf(FillInr(d, pos=t.pos), inner, pos=t.pos), None, t.pos)
        if isinstance(t, ModS):
            inner = go(t.inner)
            return dance(
                lambda d: FillLeaf(FillBang(d, t.mode, pos=t.pos), inner, pos=t.pos), None, t.pos
            )
        if isinstance(t, LamS):
            body = go(t.body)
            return dance(
                lambda d: FillFun(d, t.var, t.mode, body, pos=t.pos), None, t.pos
            )
        if isinstance(t, PairS):
            fst, snd = go(t.fst), go(t.snd)
            d1, d2 = fresh.fresh(), fresh.fresh()
            return dance(
                lambda d: CasePair(
                    UNIT,
                    FillPair(d, pos=t.pos),
                    d1,
                    d2,
                    Seq(FillLeaf(Var(d1), fst, pos=t.pos), FillLeaf(Var(d2), snd, pos=t.pos)),
                    pos=t.pos,
                ),
                None,
                t.pos,
            )
        if isinstance(t, NatLit):
            out = InlS(UnitS(pos=t.pos), pos=t.pos)
            for _ in range(t.value):
                out = InrS(out, pos=t.pos)
            return go(out)
        if isinstance(t, FromPrimeS):
            return FromAmparPrime(go(t.inner), pos=t.pos)
        # core nodes: rebuild with desugared children
        return _rebuild(t, go)

    return go(t)


def _rebuild(t, go):
    kw = {}
    changed = False
    for f in all_field_names(type(t)):
        v = getattr(t, f)
        if _is_term(v):
            nv = go(v)
            changed = changed or (nv is not v)
            kw[f] = nv
        else:
            kw[f] = v
    if not changed:
        return t
    return type(t)(**kw)


def map_children(t, go):
    """Rebuild a term applying `go` to each direct term child."""
    return _rebuild(t, go)


def lower_from_prime(t, fresh: Optional[FreshNames] = None):
    """Replace every FromAmparPrime node by its upd/from/Mod expansion.

    Run after type checking (the expansion's case nodes inherit their
    scrutinee types from the recorded ampar left type, so commands built
    from the result stay re-checkable mid-trace).
    """
    if fresh is None:
        fresh = FreshNames("_f")

    def go(node):
        node = _rebuild(node, go)
        if not isinstance(node, FromAmparPrime):
            return node
        un, st, ex, un2 = (fresh.fresh() for _ in range(4))
        bang_unit = TBang(ONE_INF, TUnit())
        inner = CaseBang(
            UNIT, Var(ex, pos=node.pos), ONE_INF, un2,
            Seq(Var(un2), Var(st), pos=node.pos), pos=node.pos,
        )
        inner.scrut_ty_ = bang_unit
        outer = CasePair(
            UNIT,
            FromAmpar(
                UpdWith(
                    node.inner, un,
                    Seq(Var(un), Val(ModV(ONE_INF, UnitV())), pos=node.pos),
                    pos=node.pos,
                ),
                pos=node.pos,
            ),
            st, ex, inner, pos=node.pos,
        )
        if node.left_ty_ is not None:
            outer.scrut_ty_ = TProd(node.left_ty_, bang_unit)
        return outer

    return go(t)


def erase_annots(t):
    """Drop checker annotations (t : T) before handing terms to the machine."""

    def go(node):
        node = _rebuild(node, go)
        if isinstance(node, Annot):
            return node.inner
        return node

    return go(t)

