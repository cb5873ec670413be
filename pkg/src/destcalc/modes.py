"""Mode semiring (multiplicity x age) and the algebra of typing contexts.

A mode is a pair of a multiplicity (1 or w) and an age (a finite scope
distance ^k, or inf for scope-insensitive data).  Modes annotate every
binding; contexts are finite maps from names to bindings.  Names are
plain Python values: `str` for term variables, `int` for hole names, so
the two namespaces cannot collide.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Dict, FrozenSet, Union

ONE = "1"
MANY = "w"

INF = float("inf")

Age = Union[int, float]  # a natural exponent, or INF
Name = Union[str, int]  # str: variable name, int: hole name


@dataclass(frozen=True, slots=True)
class Mode:
    mult: str  # ONE | MANY
    age: Age

    def __str__(self) -> str:
        age = "inf" if self.age == INF else "^%d" % self.age
        return "[%s %s]" % (self.mult, age)


UNIT = Mode(ONE, 0)  # 1v, the semiring unit ("now", linear)
ONE_UP = Mode(ONE, 1)
ONE_INF = Mode(ONE, INF)
MANY_NOW = Mode(MANY, 0)
MANY_INF = Mode(MANY, INF)


def mult_plus(p: str, q: str) -> str:
    # 1+1 = w; w absorbs
    return MANY


def mult_times(p: str, q: str) -> str:
    return ONE if p == ONE and q == ONE else MANY


def age_plus(a: Age, b: Age) -> Age:
    if a == b and a != INF:
        return a
    return INF


def age_times(a: Age, b: Age) -> Age:
    if a == INF or b == INF:
        return INF
    return a + b


def age_leq(a: Age, b: Age) -> bool:
    # finite ages form a flat order below inf
    return a == b or b == INF


def mode_plus(m: Mode, n: Mode) -> Mode:
    return Mode(mult_plus(m.mult, n.mult), age_plus(m.age, n.age))


def mode_times(m: Mode, n: Mode) -> Mode:
    return Mode(mult_times(m.mult, n.mult), age_times(m.age, n.age))


def mode_leq(m: Mode, n: Mode) -> bool:
    mult_ok = m.mult == n.mult or (m.mult == ONE and n.mult == MANY)
    return mult_ok and age_leq(m.age, n.age)


# ---------------------------------------------------------------------------
# Mode sets (achievable-usage sets for the algorithmic checker)

ModeSet = FrozenSet[Mode]

# Modes m with 1v <= m: what a single plain use of a binding can demand.
USE_SET: ModeSet = frozenset({UNIT, MANY_NOW, ONE_INF, MANY_INF})

EMPTY_SET: ModeSet = frozenset()


_MS_SUM_CACHE = {}
_MS_IMAGE_CACHE = {}
_MS_CLOSE_CACHE = {}


def ms_sum(a: ModeSet, b: ModeSet) -> ModeSet:
    key = (a, b)
    out = _MS_SUM_CACHE.get(key)
    if out is None:
        out = frozenset(mode_plus(m, n) for m in a for n in b)
        _MS_SUM_CACHE[key] = out
    return out


def ms_image(c: Mode, s: ModeSet) -> ModeSet:
    key = (c, s)
    out = _MS_IMAGE_CACHE.get(key)
    if out is None:
        out = frozenset(mode_times(c, m) for m in s)
        _MS_IMAGE_CACHE[key] = out
    return out


def ms_preimage(c: Mode, s: ModeSet) -> ModeSet:
    """All m with c*m in s.  Only meaningful for finite-age scalars c."""
    if c.age == INF:
        raise ValueError("preimage under an inf-age scalar is unbounded")
    out = set()
    for t in s:
        for mult in (ONE, MANY):
            if mult_times(c.mult, mult) != t.mult:
                continue
            if t.age == INF:
                out.add(Mode(mult, INF))
            elif t.age >= c.age:
                out.add(Mode(mult, int(t.age - c.age)))
    return frozenset(out)


def ms_close(s: ModeSet) -> ModeSet:
    """Close a usage set under extra discards of the same name.

    A weakening leaf can always absorb the name once more at mode (w, a)
    for an arbitrary age a; summing that into an achieved mode m yields
    (w, age(m)) when ages agree and (w, inf) otherwise.
    """
    if not s:
        return s
    out = _MS_CLOSE_CACHE.get(s)
    if out is None:
        extra = {Mode(MANY, m.age) for m in s}
        extra.add(MANY_INF)
        out = s | frozenset(extra)
        _MS_CLOSE_CACHE[s] = out
    return out


def discardable(m: Mode) -> bool:
    """Whether a binding of mode m may go entirely unused."""
    return m.mult == MANY


# ---------------------------------------------------------------------------
# Bindings and typing contexts.  Types are opaque payloads here; the
# caller supplies the equality used for clash detection.


@dataclass(frozen=True, slots=True)
class VarB:
    mode: Mode
    ty: Any


@dataclass(frozen=True, slots=True)
class DestB:
    """->h :_mode |_hole_mode ty|  (a destination binding)."""

    mode: Mode
    ty: Any
    hole_mode: Mode


@dataclass(frozen=True, slots=True)
class HoleB:
    """[]h :_hole_mode ty  (a hole binding, value contexts only)."""

    ty: Any
    hole_mode: Mode


Binding = Union[VarB, DestB, HoleB]
TypingContext = Dict[Name, Binding]


class ContextError(Exception):
    pass


class AddClash(ContextError):
    def __init__(self, name: Name, reason: str):
        super().__init__("context addition clash at %r: %s" % (name, reason))
        self.name = name
        self.reason = reason


class NotInvertible(ContextError):
    def __init__(self, h: int):
        super().__init__("destination binding ->%d has outer mode other than 1v" % h)
        self.hole = h


def binding_mode(b: Binding) -> Mode:
    if isinstance(b, HoleB):
        return b.hole_mode
    return b.mode


def scale_binding(n: Mode, b: Binding) -> Binding:
    # Pointwise multiplication of the outer mode; a destination's inner
    # mode is part of its type and is never rescaled.
    if isinstance(b, VarB):
        return VarB(mode_times(n, b.mode), b.ty)
    if isinstance(b, DestB):
        return DestB(mode_times(n, b.mode), b.ty, b.hole_mode)
    return HoleB(b.ty, mode_times(n, b.hole_mode))


def ctx_scale(n: Mode, ctx: TypingContext) -> TypingContext:
    return {name: scale_binding(n, b) for name, b in ctx.items()}


def _add_bindings(name: Name, a: Binding, b: Binding, type_eq: Callable[[Any, Any], bool]) -> Binding:
    if type(a) is not type(b):
        raise AddClash(name, "different binding forms")
    if not type_eq(a.ty, b.ty):
        raise AddClash(name, "different types")
    if isinstance(a, VarB):
        return VarB(mode_plus(a.mode, b.mode), a.ty)
    if isinstance(a, DestB):
        if a.hole_mode != b.hole_mode:
            raise AddClash(name, "different inner modes")
        return DestB(mode_plus(a.mode, b.mode), a.ty, a.hole_mode)
    return HoleB(a.ty, mode_plus(a.hole_mode, b.hole_mode))


def ctx_add(a: TypingContext, b: TypingContext, type_eq: Callable[[Any, Any], bool] = None) -> TypingContext:
    if type_eq is None:
        type_eq = lambda s, t: s == t
    out = dict(a)
    for name, bb in b.items():
        if name in out:
            out[name] = _add_bindings(name, out[name], bb, type_eq)
        else:
            out[name] = bb
    return out


def hole_inverse(delta: TypingContext) -> TypingContext:
    """Turn a Delta of destination bindings into the matching hole bindings.

    Each ->h :_1v |_n T| becomes []h :_n T; any outer mode other than 1v
    makes the inversion undefined.
    """
    out: TypingContext = {}
    for name, b in delta.items():
        if not isinstance(b, DestB):
            raise NotInvertible(name if isinstance(name, int) else -1)
        if b.mode != UNIT:
            raise NotInvertible(name)
        out[name] = HoleB(b.ty, b.hole_mode)
    return out


def is_gamma(ctx: TypingContext) -> bool:
    """Term-typing contexts: variable and destination bindings only."""
    return all(
        (isinstance(b, VarB) and isinstance(n, str)) or (isinstance(b, DestB) and isinstance(n, int))
        for n, b in ctx.items()
    )


def is_theta(ctx: TypingContext) -> bool:
    """Value-typing contexts: destination and hole bindings only."""
    return all(isinstance(b, (DestB, HoleB)) and isinstance(n, int) for n, b in ctx.items())


def is_delta(ctx: TypingContext) -> bool:
    return all(isinstance(b, DestB) and isinstance(n, int) for n, b in ctx.items())
