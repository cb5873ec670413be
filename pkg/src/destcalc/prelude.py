"""Program loading: definition inlining, checking, and the shipped prelude.

Top-level definitions are transparent abbreviations: every reference is
replaced by the definition's (annotated) body before type checking, so
the calculus itself stays module-free.  Recursive functions must use
`fix` explicitly.  The prelude's `.ld` sources are packaged next to this
module; expected-to-fail entries (the scope-escape counterexamples) are
validated to fail with the right diagnostic at load time.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from . import machine as M
from . import syntax as S
from .parser import Program, TermDef, TypeDef, parse
from .typecheck import Checker, CheckStats, TypeCheckError, TypeEnv


@dataclass
class LoadedDef:
    name: str
    ann: Optional[object]
    sugar: object  # inlined, still-sugared body
    core: object  # desugared, elaborated body (from'* kept primitive)
    ty: object


@dataclass
class ProgramEnv:
    tyenv: TypeEnv
    defs: Dict[str, LoadedDef] = field(default_factory=dict)
    order: List[str] = field(default_factory=list)
    main: Optional[str] = None
    stats: CheckStats = field(default_factory=CheckStats)

    def checker(self) -> Checker:
        return Checker(self.tyenv, self.stats)

    def runnable(self, name: str, from_prime: bool = False):
        """The closed, machine-ready core term for a definition."""
        core = self.defs[name].core
        if not from_prime:
            core = S.lower_from_prime(core)
        return S.erase_annots(core)

    def main_def(self) -> LoadedDef:
        if self.main is None:
            raise KeyError("program has no main")
        return self.defs[self.main]


_BINDERS = {
    S.LamS: ("var",),
    S.FillFun: ("var",),
    S.CaseSum: ("left_var", "right_var"),
    S.CasePair: ("var1", "var2"),
    S.CaseBang: ("var",),
    S.UpdWith: ("var",),
    S.Fix: ("var",),
}


def _inline(t, defs: Dict[str, LoadedDef], bound: frozenset):
    if isinstance(t, S.Var):
        if t.name in bound or t.name not in defs:
            return t
        d = defs[t.name]
        if d.ann is not None:
            return S.Annot(d.sugar, d.ann, pos=t.pos)
        return d.sugar
    cls = type(t)
    binders = _BINDERS.get(cls, ())
    if cls is S.CaseSum:
        node = S.CaseSum(
            t.mode,
            _inline(t.scrut, defs, bound),
            t.left_var,
            _inline(t.left_body, defs, bound | {t.left_var}),
            t.right_var,
            _inline(t.right_body, defs, bound | {t.right_var}),
            pos=t.pos,
        )
        return node
    if binders:
        names = frozenset(getattr(t, f) for f in binders)
        kw = {}
        for f in S.all_field_names(cls):
            v = getattr(t, f)
            if S._is_term(v):
                inner_bound = bound | names if f in ("body", "left_body", "right_body") else bound
                kw[f] = _inline(v, defs, inner_bound)
            else:
                kw[f] = v
        return cls(**kw)
    return S.map_children(t, lambda c: _inline(c, defs, bound))


def load_program(
    prog: Program,
    base: Optional[ProgramEnv] = None,
    check: bool = True,
) -> ProgramEnv:
    """Inline, desugar and check every definition of a parsed program."""
    if base is not None:
        tyenv = TypeEnv({**base.tyenv.defs, **prog.type_defs})
        env = ProgramEnv(tyenv, dict(base.defs), list(base.order), prog.main or base.main)
    else:
        env = ProgramEnv(TypeEnv(prog.type_defs), main=prog.main)
    checker = env.checker()
    for d in prog.term_defs:
        inlined = _inline(d.body, env.defs, frozenset())
        core = S.desugar(inlined)
        ty = d.ann
        if check:
            ty = checker.check_term({}, core, d.ann)
        env.defs[d.name] = LoadedDef(d.name, d.ann, inlined, core, ty)
        env.order.append(d.name)
    return env


def load_source(src: str, base: Optional[ProgramEnv] = None, check: bool = True) -> ProgramEnv:
    return load_program(parse(src), base=base, check=check)


# ---------------------------------------------------------------------------
# The shipped prelude


PRELUDE_FILES = [
    "types.ld",
    "data.ld",
    "list.ld",
    "dlist.ld",
    "queue.ld",
    "bfs.ld",
    "alloc.ld",
]

# monomorphic instances derived from the generic sources: suffix, type
# substitution, and the files whose definitions get instantiated
INSTANTIATIONS = [
    ("N", {"T": "Nat", "U": "Nat"}, ["list.ld", "dlist.ld", "queue.ld"]),
    ("R", {"T": "1", "U": "Nat", "S": "Nat"}, ["bfs.ld"]),
]

# these reference instantiated names, so they load last
POST_FILES = [
    "minamide.ld",
    "relabel.ld",
    "sharing.ld",
]

# name -> declared type, for load-time validation of the library surface
EXPECTED_TYPES = {
    "map": "(T -o U) -o[w inf] List T -o List U",
    "map'": "(T -o U) -o[w inf] List T -o[1 ^1] Dest (List U) -o 1",
    "cons": "T -o List T -o List T",
    "append": "DList T -o T -o DList T",
    "concat": "DList T -o DList T -o DList T",
    "toList": "DList T -o List T",
    "singleton": "T -o Queue T",
    "enqueue": "Queue T -o T -o Queue T",
    "dequeue": "Queue T -o 1 + (T * Queue T)",
    "alloc": "(Dest T -o 1) -o[1 inf] T",
    "relabelDps": "Tree 1 -o[1 inf] Tree Nat",
    "sharing": "List Nat",
}

# scope-escape counterexamples live in their own sources and must be rejected
EXPECTED_FAILURES = [
    ("scope_escape2.ld", "AgeEscape"),
    ("scope_escape3.ld", "AgeEscape"),
]


def _read(name: str) -> str:
    return importlib.resources.files(__package__).joinpath("prelude", name).read_text()


def prelude_path(name: str) -> str:
    return str(importlib.resources.files(__package__).joinpath("prelude", name))


def _subst_types_in_term(t, tymap):
    from .typecheck import _subst_type

    def go(node):
        node = S.map_children(node, go)
        kw = None
        if isinstance(node, S.NewAmpar) and node.ann is not None:
            node = S.NewAmpar(_subst_type(node.ann, tymap), pos=node.pos)
        elif isinstance(node, S.Fix):
            node = S.Fix(node.var, _subst_type(node.ann, tymap), node.body, pos=node.pos)
        elif isinstance(node, S.Annot):
            node = S.Annot(node.inner, _subst_type(node.ty, tymap), pos=node.pos)
        return node

    return go(t)


def _rename_refs(t, rename, bound):
    if isinstance(t, S.Var):
        if t.name in rename and t.name not in bound:
            return S.Var(rename[t.name], pos=t.pos)
        return t
    if isinstance(t, S.CaseSum):
        return S.CaseSum(
            t.mode,
            _rename_refs(t.scrut, rename, bound),
            t.left_var,
            _rename_refs(t.left_body, rename, bound | {t.left_var}),
            t.right_var,
            _rename_refs(t.right_body, rename, bound | {t.right_var}),
            pos=t.pos,
        )
    binders = _BINDERS.get(type(t))
    if binders:
        names = frozenset(getattr(t, f) for f in binders)
        kw = {}
        for f in S.all_field_names(type(t)):
            v = getattr(t, f)
            if S._is_term(v):
                inner = bound | names if f in ("body", "left_body", "right_body") else bound
                kw[f] = _rename_refs(v, rename, inner)
            else:
                kw[f] = v
        return type(t)(**kw)
    return S.map_children(t, lambda c: _rename_refs(c, rename, bound))


def instantiate(progs: List[Program], ty_args: Dict[str, str], suffix: str) -> Program:
    """Monomorphic copy of generic definitions: substitute the opaque
    type names and append `suffix` to every definition in the group."""
    from .parser import parse_type
    from .typecheck import _subst_type

    tymap = {name: parse_type(ty_src) for name, ty_src in ty_args.items()}
    rename = {}
    for p in progs:
        for d in p.term_defs:
            rename[d.name] = d.name + suffix
    out = Program()
    for p in progs:
        for d in p.term_defs:
            ann = _subst_type(d.ann, tymap) if d.ann is not None else None
            body = _subst_types_in_term(_rename_refs(d.body, rename, frozenset()), tymap)
            out.term_defs.append(TermDef(rename[d.name], ann, body, d.pos))
    return out


def load_prelude(check: bool = True) -> ProgramEnv:
    """Parse, desugar and check every prelude entry; abort on any failure."""
    env: Optional[ProgramEnv] = None
    parsed: Dict[str, Program] = {}

    def step(fname, prog):
        nonlocal env
        try:
            return load_program(prog, base=env, check=check)
        except TypeCheckError as e:
            raise TypeCheckError(e.kind, "prelude %s: %s" % (fname, e), pos=e.pos, **e.info)

    for fname in PRELUDE_FILES:
        parsed[fname] = parse(_read(fname))
        env = step(fname, parsed[fname])
    for suffix, ty_args, files in INSTANTIATIONS:
        inst = instantiate([parsed[f] for f in files], ty_args, suffix)
        env = step("instance %s" % suffix, inst)
    for fname in POST_FILES:
        env = step(fname, parse(_read(fname)))
    if check:
        from .parser import parse_type

        checker = env.checker()
        for name, ty_src in EXPECTED_TYPES.items():
            want = parse_type(ty_src)
            got = env.defs[name].ty
            if not checker.tyenv.equal(got, want):
                raise TypeCheckError(
                    "TypeMismatch", "prelude %s loads at the wrong type" % name
                )
        for fname, kind in EXPECTED_FAILURES:
            try:
                load_source(_read(fname), base=env, check=True)
            except TypeCheckError as e:
                if e.kind != kind:
                    raise TypeCheckError(
                        e.kind,
                        "prelude %s: expected %s but failed with %s" % (fname, kind, e),
                        pos=e.pos,
                    )
            else:
                raise TypeCheckError(
                    "ArityOrFormError", "prelude %s: expected a %s rejection" % (fname, kind)
                )
    return env
