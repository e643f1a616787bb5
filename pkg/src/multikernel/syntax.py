"""Abstract syntax for multi-signature first-order languages with quotation.

Terms and formulas are immutable trees.  Quotation (`Quote`) wraps a whole
syntax object as a term; quoted syntax is inert: it contributes no free
variables and substitution never descends into it.  Surface syntax is
s-expressions, one formula per line in corpus files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional, Union


class SyntaxError_(Exception):
    """Parse or well-formedness error, with position where available."""


class LanguageError(Exception):
    """Symbol used outside the selected language."""


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Term):
    name: str
    __slots__ = ("name",)


@dataclass(frozen=True)
class Const(Term):
    name: str
    __slots__ = ("name",)


@dataclass(frozen=True)
class App(Term):
    fn: str
    args: tuple
    __slots__ = ("fn", "args")


@dataclass(frozen=True)
class Quote(Term):
    body: Union["Formula", Term]
    __slots__ = ("body",)


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Atom(Formula):
    rel: str
    args: tuple
    __slots__ = ("rel", "args")


@dataclass(frozen=True)
class Not(Formula):
    body: Formula
    __slots__ = ("body",)


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula
    __slots__ = ("left", "right")


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula
    __slots__ = ("left", "right")


@dataclass(frozen=True)
class Imp(Formula):
    left: Formula
    right: Formula
    __slots__ = ("left", "right")


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula
    __slots__ = ("left", "right")


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula
    __slots__ = ("var", "body")


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula
    __slots__ = ("var", "body")


@dataclass(frozen=True)
class Bot(Formula):
    __slots__ = ()


@dataclass(frozen=True)
class Top(Formula):
    __slots__ = ()


@dataclass(frozen=True)
class MacroF(Formula):
    """Unexpanded surface macro (trbox, trdia, tr, mod2, exu, allin, exin).

    `args` mixes Terms, Formulas and binder names; `expand_abbreviation`
    eliminates every MacroF.
    """
    name: str
    args: tuple
    __slots__ = ("name", "args")


BINARY = {And: "and", Or: "or", Imp: "imp", Iff: "iff"}
QUANT = {Forall: "all", Exists: "ex"}


# ---------------------------------------------------------------------------
# Symbol stock and languages
# ---------------------------------------------------------------------------

# name -> (kind, arity).  Dynamic families (Pr_T, Ax_T, dpr_T, ModelsTrSP_n)
# are matched by prefix.
BASE_RELATIONS = {
    "in": 2, "=": 2,
    "NN": 1, "VA": 1, "VAin": 2, "VAat": 3,
    "SentL": 1, "SentLSat": 1, "SentLUM": 1, "SentS1": 1,
    "FmlLUM": 1, "FmlLSat": 1,
    "VarC": 1,
    "SatX": 5, "Sat0": 3, "UniCon": 2, "UniR": 2,
    "OmegaNS": 1, "ModelsZFC": 1, "Models": 3, "ExtIs": 3,
    "InDef": 2, "PrOf": 2,
}

BASE_FUNCTIONS = {
    "S": 1, "+": 2, "*": 2,
    "dneg": 1, "dand": 2, "dor": 2, "dimp": 2, "diff": 2,
    "dall": 2, "dex": 2, "dalln": 2, "dsub": 3,
    "codeof": 1, "num": 1, "pred": 1,
    "fasg1": 2, "fasg2": 4, "numin": 2, "ap": 2,
}

BASE_CONSTANTS = {"0"}

DYNAMIC_REL_PREFIXES = ("Pr_", "Ax_", "ModelsTrSP")
DYNAMIC_FN_PREFIXES = ("dpr_",)

MACRO_NAMES = {"trbox", "trdia", "tr", "mod2", "exu", "allin", "exin"}

VAR_RE = re.compile(r"^x[0-9]+$")


@dataclass(frozen=True)
class LanguageTag:
    name: str
    relations: frozenset
    functions: frozenset
    constants: frozenset

    def has_relation(self, name: str) -> bool:
        return name in self.relations or any(
            name.startswith(p) for p in DYNAMIC_REL_PREFIXES)

    def has_function(self, name: str) -> bool:
        return name in self.functions or any(
            name.startswith(p) for p in DYNAMIC_FN_PREFIXES)

    def has_constant(self, name: str) -> bool:
        return name in self.constants

    def includes(self, other: "LanguageTag") -> bool:
        return (other.relations <= self.relations
                and other.functions <= self.functions
                and other.constants <= self.constants)


def _lang(name, rels=(), fns=(), consts=(), base: Optional[LanguageTag] = None):
    r = set(base.relations) if base else set()
    f = set(base.functions) if base else set()
    c = set(base.constants) if base else set()
    r.update(rels)
    f.update(fns)
    c.update(consts)
    return LanguageTag(name, frozenset(r), frozenset(f), frozenset(c))


LANG_L = _lang("L", BASE_RELATIONS, BASE_FUNCTIONS, BASE_CONSTANTS)
LANG_LSAT = _lang("LSat", {"Sat"}, base=LANG_L)
LANG_LUM = _lang("LUM", {"Uni", "Mod"}, base=LANG_L)
LANG_LIS = _lang("Lis", {"Iso", "Crsm"}, {"iota"}, {"self"}, base=LANG_L)
LANG_LSAT_IS = _lang("LSatIs", {"Sat"}, base=LANG_LIS)
LANG_LUM_IS = _lang("LUMIs", {"Uni", "Mod"}, base=LANG_LIS)
LANG_FULL = _lang("Full", {"Sat", "Uni", "Mod"}, base=LANG_LIS)

LANGS = {t.name: t for t in
         (LANG_L, LANG_LSAT, LANG_LUM, LANG_LIS, LANG_LSAT_IS, LANG_LUM_IS,
          LANG_FULL)}

REL_ARITY = dict(BASE_RELATIONS, Sat=2, Uni=1, Mod=3, Iso=1, Crsm=1)
FN_ARITY = dict(BASE_FUNCTIONS, iota=1)


def rel_arity(name: str) -> int:
    if name in REL_ARITY:
        return REL_ARITY[name]
    if name.startswith(("Pr_", "Ax_")) or name.startswith("ModelsTrSP"):
        return 1
    raise LanguageError(f"unknown relation symbol {name!r}")


def fn_arity(name: str) -> int:
    if name in FN_ARITY:
        return FN_ARITY[name]
    if name.startswith("dpr_"):
        return 1
    raise LanguageError(f"unknown function symbol {name!r}")


# ---------------------------------------------------------------------------
# Traversal helpers
# ---------------------------------------------------------------------------

def term_vars(t: Term) -> frozenset:
    if isinstance(t, Var):
        return frozenset((t.name,))
    if isinstance(t, App):
        out = frozenset()
        for a in t.args:
            out |= term_vars(a)
        return out
    return frozenset()          # Const, Quote: quoted syntax is closed


def free_vars(phi) -> frozenset:
    if isinstance(phi, Term):
        return term_vars(phi)
    if isinstance(phi, Atom):
        out = frozenset()
        for a in phi.args:
            out |= term_vars(a)
        return out
    if isinstance(phi, Not):
        return free_vars(phi.body)
    if isinstance(phi, (And, Or, Imp, Iff)):
        return free_vars(phi.left) | free_vars(phi.right)
    if isinstance(phi, (Forall, Exists)):
        return free_vars(phi.body) - {phi.var}
    if isinstance(phi, (Bot, Top)):
        return frozenset()
    if isinstance(phi, MacroF):
        return _macro_free_vars(phi)
    raise TypeError(f"not a syntax object: {phi!r}")


def _macro_free_vars(m: MacroF) -> frozenset:
    if m.name in ("trbox", "trdia", "tr"):
        return term_vars(m.args[0])
    if m.name == "mod2":
        return term_vars(m.args[0]) | term_vars(m.args[1])
    if m.name == "exu":
        v, body = m.args
        return free_vars(body) - {v}
    if m.name in ("allin", "exin"):
        v, dom, body = m.args
        d = term_vars(dom) if isinstance(dom, Term) else frozenset()
        return d | (free_vars(body) - {v})
    raise SyntaxError_(f"unknown macro {m.name!r}")


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from subterms(a)


def all_symbols(phi) -> frozenset:
    """Non-logical symbol names occurring outside quotes."""
    out = set()

    def walk_t(t):
        if isinstance(t, App):
            out.add(t.fn)
            for a in t.args:
                walk_t(a)
        elif isinstance(t, Const):
            out.add(t.name)

    def walk_f(f):
        if isinstance(f, Atom):
            out.add(f.rel)
            for a in f.args:
                walk_t(a)
        elif isinstance(f, Not):
            walk_f(f.body)
        elif isinstance(f, (And, Or, Imp, Iff)):
            walk_f(f.left)
            walk_f(f.right)
        elif isinstance(f, (Forall, Exists)):
            walk_f(f.body)
        elif isinstance(f, MacroF):
            for a in f.args:
                if isinstance(a, Term):
                    walk_t(a)
                elif isinstance(a, Formula):
                    walk_f(a)

    if isinstance(phi, Term):
        walk_t(phi)
    else:
        walk_f(phi)
    return frozenset(out)


def in_language(phi, lang: LanguageTag) -> bool:
    for s in all_symbols(phi):
        if not (lang.has_relation(s) or lang.has_function(s)
                or lang.has_constant(s)):
            return False
    return True


def is_sentence(phi: Formula) -> bool:
    return isinstance(phi, Formula) and not free_vars(phi)


# ---------------------------------------------------------------------------
# Fresh variables and substitution
# ---------------------------------------------------------------------------

def _var_index(name: str) -> int:
    m = VAR_RE.match(name)
    return int(name[1:]) if m else -1


def fresh_var(avoid, hint: str = "x") -> str:
    top = 0
    for n in avoid:
        top = max(top, _var_index(n) + 1)
    return f"x{max(top, 1)}"


def substitute(phi: Formula, x: str, t: Term) -> Formula:
    """Capture-avoiding substitution of t for free occurrences of x."""
    return substitute_many(phi, {x: t})


def substitute_many(phi: Formula, sub: dict) -> Formula:
    sub = {k: v for k, v in sub.items() if v != Var(k)}
    if not sub:
        return phi
    return _subst_f(phi, sub)


def subst_term(t: Term, sub: dict) -> Term:
    if isinstance(t, Var):
        return sub.get(t.name, t)
    if isinstance(t, App):
        return App(t.fn, tuple(subst_term(a, sub) for a in t.args))
    return t                    # Const, Quote


def _subst_f(phi: Formula, sub: dict) -> Formula:
    if isinstance(phi, Atom):
        return Atom(phi.rel, tuple(subst_term(a, sub) for a in phi.args))
    if isinstance(phi, Not):
        return Not(_subst_f(phi.body, sub))
    if isinstance(phi, (And, Or, Imp, Iff)):
        return type(phi)(_subst_f(phi.left, sub), _subst_f(phi.right, sub))
    if isinstance(phi, (Forall, Exists)):
        return _subst_binder(phi, sub, type(phi))
    if isinstance(phi, (Bot, Top)):
        return phi
    if isinstance(phi, MacroF):
        return _subst_macro(phi, sub)
    raise TypeError(f"not a formula: {phi!r}")


def _subst_binder(phi, sub, cls):
    inner = {k: v for k, v in sub.items() if k != phi.var}
    inner = {k: v for k, v in inner.items()
             if k in free_vars(phi.body)}
    if not inner:
        return cls(phi.var, _subst_f(phi.body, {k: v for k, v in sub.items()
                                                if k != phi.var}))
    clash = set()
    for v in inner.values():
        clash |= term_vars(v)
    if phi.var in clash:
        avoid = (free_vars(phi.body) | clash | set(inner)
                 | {phi.var})
        nv = fresh_var(avoid)
        body = _subst_f(phi.body, {phi.var: Var(nv)})
        return cls(nv, _subst_f(body, inner))
    return cls(phi.var, _subst_f(phi.body, inner))


def _subst_macro(m: MacroF, sub: dict) -> MacroF:
    if m.name in ("trbox", "trdia", "tr", "mod2"):
        return MacroF(m.name, tuple(subst_term(a, sub) for a in m.args))
    if m.name == "exu":
        v, body = m.args
        ph = Exists(v, body)
        res = _subst_binder(ph, sub, Exists)
        return MacroF("exu", (res.var, res.body))
    if m.name in ("allin", "exin"):
        v, dom, body = m.args
        dom2 = subst_term(dom, sub) if isinstance(dom, Term) else dom
        ph = Forall(v, body)
        res = _subst_binder(ph, sub, Forall)
        return MacroF(m.name, (res.var, dom2, res.body))
    raise SyntaxError_(f"unknown macro {m.name!r}")


# ---------------------------------------------------------------------------
# Alpha-equivalence
# ---------------------------------------------------------------------------

def alpha_key(phi):
    """Hashable key identifying phi up to renaming of bound variables."""
    return _akey(phi, {})


def _akey(phi, env):
    if isinstance(phi, Var):
        if phi.name in env:
            return ("b", env[phi.name])
        return ("v", phi.name)
    if isinstance(phi, Const):
        return ("c", phi.name)
    if isinstance(phi, App):
        return ("a", phi.fn) + tuple(_akey(a, env) for a in phi.args)
    if isinstance(phi, Quote):
        return ("q", _akey(phi.body, {}))
    if isinstance(phi, Atom):
        return ("A", phi.rel) + tuple(_akey(a, env) for a in phi.args)
    if isinstance(phi, Not):
        return ("N", _akey(phi.body, env))
    if isinstance(phi, (And, Or, Imp, Iff)):
        return (BINARY[type(phi)], _akey(phi.left, env),
                _akey(phi.right, env))
    if isinstance(phi, (Forall, Exists)):
        env2 = dict(env)
        env2[phi.var] = len(env)
        return (QUANT[type(phi)], _akey(phi.body, env2))
    if isinstance(phi, Bot):
        return ("bot",)
    if isinstance(phi, Top):
        return ("top",)
    if isinstance(phi, MacroF):
        parts = [("M", phi.name)]
        for a in phi.args:
            if isinstance(a, str):
                env2 = dict(env)
                env2[a] = len(env)
                env = env2
                parts.append(("bind",))
            elif isinstance(a, Term):
                parts.append(_akey(a, env))
            else:
                parts.append(_akey(a, env))
        return tuple(parts)
    raise TypeError(f"not a syntax object: {phi!r}")


def alpha_eq(a, b) -> bool:
    return a == b or alpha_key(a) == alpha_key(b)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _tokenize(text: str):
    toks = []
    for m in _TOKEN.finditer(text):
        toks.append((m.group(0), m.start()))
    return toks


def _read_sexp(toks, i):
    if i >= len(toks):
        raise SyntaxError_("unexpected end of input")
    tok, pos = toks[i]
    if tok == "(":
        out = []
        i += 1
        while True:
            if i >= len(toks):
                raise SyntaxError_(f"unclosed '(' at position {pos}")
            if toks[i][0] == ")":
                return out, i + 1
            node, i = _read_sexp(toks, i)
            out.append(node)
    if tok == ")":
        raise SyntaxError_(f"unexpected ')' at position {pos}")
    return tok, i + 1


FORMULA_HEADS = {"in", "=", "not", "and", "or", "imp", "iff", "all", "ex",
                 "Sat", "Uni", "Mod", "Pr", "Ax", "Iso", "Crsm"} | \
    set(BASE_RELATIONS) | MACRO_NAMES


def parse(text: str, lang: LanguageTag = LANG_FULL):
    """Parse a term or formula; formulas are recognized by their head."""
    toks = _tokenize(text)
    if not toks:
        raise SyntaxError_("empty input")
    node, i = _read_sexp(toks, 0)
    if i != len(toks):
        raise SyntaxError_(f"trailing tokens at position {toks[i][1]}")
    return _node(node, lang)


def parse_formula(text: str, lang: LanguageTag = LANG_FULL) -> Formula:
    out = parse(text, lang)
    if not isinstance(out, Formula):
        raise SyntaxError_(f"expected a formula, got term: {text!r}")
    return hygienic(out)


def parse_term(text: str, lang: LanguageTag = LANG_FULL) -> Term:
    out = parse(text, lang)
    if not isinstance(out, Term):
        raise SyntaxError_(f"expected a term, got formula: {text!r}")
    return out


def _is_formula_node(node) -> bool:
    if isinstance(node, str):
        return node in ("bot", "top")
    return bool(node) and isinstance(node[0], str) and (
        node[0] in FORMULA_HEADS or node[0].startswith(("Pr_", "Ax_"))
        or node[0].startswith("ModelsTrSP"))


def _node(node, lang):
    if _is_formula_node(node):
        return _formula(node, lang)
    return _term(node, lang)


def _check_rel(name, lang):
    if not lang.has_relation(name):
        raise LanguageError(f"relation {name!r} not in language {lang.name}")


def _check_fn(name, lang):
    if not lang.has_function(name):
        raise LanguageError(f"function {name!r} not in language {lang.name}")


def _term(node, lang) -> Term:
    if isinstance(node, str):
        if VAR_RE.match(node):
            return Var(node)
        if node == "0" or lang.has_constant(node):
            return Const(node)
        raise LanguageError(f"constant {node!r} not in language {lang.name}")
    if not node or not isinstance(node[0], str):
        raise SyntaxError_(f"bad term: {node!r}")
    head = node[0]
    if head == "quote":
        if len(node) != 2:
            raise SyntaxError_("quote takes one syntax argument")
        return Quote(_node(node[1], lang))
    if head in ("dall", "dex", "dalln"):
        if len(node) != 3:
            raise SyntaxError_(f"{head} takes a variable and a term")
        v = node[1]
        first = Quote(Var(v)) if isinstance(v, str) and VAR_RE.match(v) \
            else _term(v, lang)
        return App(head, (first, _term(node[2], lang)))
    if head == "dsub":
        if len(node) != 4:
            raise SyntaxError_("dsub takes three arguments")
        v = node[2]
        mid = Quote(Var(v)) if isinstance(v, str) and VAR_RE.match(v) \
            else _term(v, lang)
        return App(head, (_term(node[1], lang), mid, _term(node[3], lang)))
    if head == "dpr":
        if len(node) != 3 or not isinstance(node[1], str):
            raise SyntaxError_("dpr takes a theory name and a term")
        name = f"dpr_{node[1]}"
        _check_fn(name, lang)
        return App(name, (_term(node[2], lang),))
    name = head
    _check_fn(name, lang)
    ar = fn_arity(name)
    if len(node) - 1 != ar:
        raise SyntaxError_(f"{name} expects {ar} arguments")
    return App(name, tuple(_term(a, lang) for a in node[1:]))


def _formula(node, lang) -> Formula:
    if node == "bot":
        return Bot()
    if node == "top":
        return Top()
    head = node[0]
    args = node[1:]
    if head == "not":
        return Not(_formula(args[0], lang))
    if head in ("and", "or", "imp", "iff"):
        if len(args) != 2:
            raise SyntaxError_(f"{head} is binary")
        cls = {"and": And, "or": Or, "imp": Imp, "iff": Iff}[head]
        return cls(_formula(args[0], lang), _formula(args[1], lang))
    if head in ("all", "ex"):
        if len(args) != 2 or not isinstance(args[0], str) \
                or not VAR_RE.match(args[0]):
            raise SyntaxError_(f"{head} takes a variable and a body")
        cls = Forall if head == "all" else Exists
        return cls(args[0], _formula(args[1], lang))
    if head == "exu":
        if len(args) != 2 or not isinstance(args[0], str):
            raise SyntaxError_("exu takes a variable and a body")
        return MacroF("exu", (args[0], _formula(args[1], lang)))
    if head in ("allin", "exin"):
        if len(args) != 3 or not isinstance(args[0], str):
            raise SyntaxError_(f"{head} takes var, domain, body")
        dom = args[1]
        if isinstance(dom, str) and not VAR_RE.match(dom) and dom != "0" \
                and not lang.has_constant(dom):
            # predicate-name domain: x in P stands for P(x)
            _check_rel(dom, lang)
            v = args[0]
            cond = Atom(dom, (Var(v),))
            body = _formula(args[2], lang)
            if head == "allin":
                return Forall(v, Imp(cond, body))
            return Exists(v, And(cond, body))
        return MacroF(head, (args[0], _term(dom, lang),
                             _formula(args[2], lang)))
    if head in ("trbox", "trdia", "tr"):
        if len(args) != 1:
            raise SyntaxError_(f"{head} takes one term")
        return MacroF(head, (_term(args[0], lang),))
    if head == "mod2":
        if len(args) != 2:
            raise SyntaxError_("mod2 takes two terms")
        return MacroF("mod2", tuple(_term(a, lang) for a in args))
    if head in ("Pr", "Ax"):
        if len(args) != 2 or not isinstance(args[0], str):
            raise SyntaxError_(f"{head} takes a theory name and a term")
        name = f"{head}_{args[0]}"
        _check_rel(name, lang)
        return Atom(name, (_term(args[1], lang),))
    if head == "Sat" and len(args) == 1:
        return MacroF("tr", (_term(args[0], lang),))
    if head == "Mod" and len(args) == 2:
        return MacroF("mod2", tuple(_term(a, lang) for a in args))
    # plain atom
    _check_rel(head, lang)
    ar = rel_arity(head)
    if len(args) != ar:
        raise SyntaxError_(f"{head} expects {ar} arguments")
    return Atom(head, tuple(_term(a, lang) for a in args))


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def show(phi) -> str:
    if isinstance(phi, Var) or isinstance(phi, Const):
        return phi.name
    if isinstance(phi, App):
        if phi.fn.startswith("dpr_"):
            return f"(dpr {phi.fn[4:]} {show(phi.args[0])})"
        return "(" + " ".join([phi.fn] + [show(a) for a in phi.args]) + ")"
    if isinstance(phi, Quote):
        return f"(quote {show(phi.body)})"
    if isinstance(phi, Atom):
        if phi.rel.startswith("Pr_"):
            return f"(Pr {phi.rel[3:]} {show(phi.args[0])})"
        if phi.rel.startswith("Ax_"):
            return f"(Ax {phi.rel[3:]} {show(phi.args[0])})"
        return "(" + " ".join([phi.rel] + [show(a) for a in phi.args]) + ")"
    if isinstance(phi, Not):
        return f"(not {show(phi.body)})"
    if isinstance(phi, (And, Or, Imp, Iff)):
        return f"({BINARY[type(phi)]} {show(phi.left)} {show(phi.right)})"
    if isinstance(phi, (Forall, Exists)):
        return f"({QUANT[type(phi)]} {phi.var} {show(phi.body)})"
    if isinstance(phi, Bot):
        return "bot"
    if isinstance(phi, Top):
        return "top"
    if isinstance(phi, MacroF):
        parts = [phi.name]
        for a in phi.args:
            parts.append(a if isinstance(a, str) else show(a))
        return "(" + " ".join(parts) + ")"
    raise TypeError(f"not a syntax object: {phi!r}")


# ---------------------------------------------------------------------------
# Hygiene: no variable bound twice along any path
# ---------------------------------------------------------------------------

def hygienic(phi: Formula) -> Formula:
    counter = [max([_var_index(v) for v in free_vars(phi)] + [0])]

    def walk(f, bound):
        if isinstance(f, (Atom, Bot, Top)):
            return f
        if isinstance(f, Not):
            return Not(walk(f.body, bound))
        if isinstance(f, (And, Or, Imp, Iff)):
            return type(f)(walk(f.left, bound), walk(f.right, bound))
        if isinstance(f, (Forall, Exists)):
            v, body = f.var, f.body
            if v in bound:
                counter[0] += 1
                nv = f"x{counter[0]}"
                body = substitute(body, v, Var(nv))
                v = nv
            return type(f)(v, walk(body, bound | {v}))
        if isinstance(f, MacroF):
            if f.name == "exu":
                v, body = f.args
                if v in bound:
                    counter[0] += 1
                    nv = f"x{counter[0]}"
                    body = substitute(body, v, Var(nv))
                    v = nv
                return MacroF("exu", (v, walk(body, bound | {v})))
            if f.name in ("allin", "exin"):
                v, dom, body = f.args
                if v in bound:
                    counter[0] += 1
                    nv = f"x{counter[0]}"
                    body = substitute(body, v, Var(nv))
                    v = nv
                return MacroF(f.name, (v, dom, walk(body, bound | {v})))
            return f
        raise TypeError(f"not a formula: {f!r}")

    # also account for binders already present, so renames are fresh
    def max_bound(f):
        if isinstance(f, (Forall, Exists)):
            return max(_var_index(f.var), max_bound(f.body))
        if isinstance(f, Not):
            return max_bound(f.body)
        if isinstance(f, (And, Or, Imp, Iff)):
            return max(max_bound(f.left), max_bound(f.right))
        if isinstance(f, MacroF):
            m = 0
            for a in f.args:
                if isinstance(a, str):
                    m = max(m, _var_index(a))
                elif isinstance(a, Formula):
                    m = max(m, max_bound(a))
            return m
        return 0

    counter[0] = max(counter[0], max_bound(phi))
    return walk(phi, frozenset())


# ---------------------------------------------------------------------------
# Abbreviation expansion
# ---------------------------------------------------------------------------

def _fresh2(avoid):
    a = fresh_var(avoid)
    b = fresh_var(avoid | {a})
    return a, b


def trbox_formula(t: Term) -> Formula:
    """Fully expanded 'true in every universe' applied to the code term t."""
    u, f = _fresh2(term_vars(t))
    return Forall(u, Imp(Atom("Uni", (Var(u),)),
                         Forall(f, Imp(Atom("VAin", (Var(f), Var(u))),
                                       Atom("Mod", (Var(u), t, Var(f)))))))


def mod2_formula(u_term: Term, t: Term) -> Formula:
    f = fresh_var(term_vars(t) | term_vars(u_term))
    return Forall(f, Imp(Atom("VAin", (Var(f), u_term)),
                         Atom("Mod", (u_term, t, Var(f)))))


def tr_formula(t: Term) -> Formula:
    f = fresh_var(term_vars(t))
    return Forall(f, Imp(Atom("VA", (Var(f),)),
                         Atom("Sat", (t, Var(f)))))


def expand_abbreviation(phi: Formula) -> Formula:
    """Eliminate surface macros; idempotent, introduces no new free variables."""
    if isinstance(phi, (Atom, Bot, Top)):
        return phi
    if isinstance(phi, Not):
        return Not(expand_abbreviation(phi.body))
    if isinstance(phi, (And, Or, Imp, Iff)):
        return type(phi)(expand_abbreviation(phi.left),
                         expand_abbreviation(phi.right))
    if isinstance(phi, (Forall, Exists)):
        return type(phi)(phi.var, expand_abbreviation(phi.body))
    if isinstance(phi, MacroF):
        return _expand_macro(phi)
    raise TypeError(f"not a formula: {phi!r}")


def _expand_macro(m: MacroF) -> Formula:
    if m.name == "trbox":
        return trbox_formula(m.args[0])
    if m.name == "trdia":
        return Not(trbox_formula(App("dneg", (m.args[0],))))
    if m.name == "tr":
        return tr_formula(m.args[0])
    if m.name == "mod2":
        return mod2_formula(m.args[0], m.args[1])
    if m.name == "exu":
        v, body = m.args
        body = expand_abbreviation(body)
        w = fresh_var(free_vars(body) | {v})
        other = substitute(body, v, Var(w))
        return Exists(v, And(body,
                             Forall(w, Imp(other, Atom("=", (Var(v), Var(w)))))))
    if m.name == "allin":
        v, dom, body = m.args
        return Forall(v, Imp(Atom("in", (Var(v), dom)),
                             expand_abbreviation(body)))
    if m.name == "exin":
        v, dom, body = m.args
        return Exists(v, And(Atom("in", (Var(v), dom)),
                             expand_abbreviation(body)))
    raise SyntaxError_(f"unknown macro {m.name!r}")


@lru_cache(maxsize=65536)
def _expanded_key_cached(phi: Formula):
    return alpha_key(expand_abbreviation(phi))


def expanded_key(phi: Formula):
    """Alpha key of the macro-free form; the checker's notion of identity."""
    return _expanded_key_cached(phi)


def expanded_eq(a: Formula, b: Formula) -> bool:
    return expanded_key(a) == expanded_key(b)


# ---------------------------------------------------------------------------
# Small builders used throughout
# ---------------------------------------------------------------------------

def numeral(k: int) -> Term:
    t: Term = Const("0")
    for _ in range(k):
        t = App("S", (t,))
    return t


def numeral_value(t: Term) -> Optional[int]:
    k = 0
    while isinstance(t, App) and t.fn == "S":
        k += 1
        t = t.args[0]
    if isinstance(t, Const) and t.name == "0":
        return k
    return None


def conj(parts) -> Formula:
    parts = list(parts)
    if not parts:
        return Top()
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def close_universally(phi: Formula, order=None) -> Formula:
    vs = sorted(free_vars(phi), key=lambda n: (_var_index(n), n)) \
        if order is None else list(order)
    out = phi
    for v in reversed(vs):
        out = Forall(v, out)
    return out
