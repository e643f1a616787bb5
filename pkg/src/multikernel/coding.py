"""Goedel quotation and the dotted syntactic function calculus.

Codes are `Quote` terms, never materialized numerals.  The provable coding
equalities form a rewrite system: rules collapse dotted applications of
quoted arguments into a single quote.  Quoted syntax is inert; rewriting
never descends inside a quote, so nested codes stay nested.

The rule set is data, loaded from a rules file (`lhs => rhs`, one per line)
so tests can ablate individual rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

from .syntax import (
    App, Atom, And, Bot, Const, Exists, Forall, Formula, Iff, Imp, MacroF,
    Not, Or, Quote, Term, Top, Var,
    alpha_eq, expand_abbreviation, free_vars, numeral, numeral_value, show,
    substitute, term_vars,
)


class CodingError(Exception):
    pass


# ---------------------------------------------------------------------------
# Rule representation: lhs patterns are s-expression node trees in which
# "?name" matches a term, or the content of a quote when written under one.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CodingRule:
    name: str
    lhs: object                       # node tree
    rhs: object                       # node tree template or builtin name
    builtin: Optional[str] = None


DEFAULT_RULES_TEXT = """\
# Provable coding equalities, oriented left to right.
dneg:  (dneg (quote ?a)) => (quote (not ?a))
dand:  (dand (quote ?a) (quote ?b)) => (quote (and ?a ?b))
dor:   (dor (quote ?a) (quote ?b)) => (quote (or ?a ?b))
dimp:  (dimp (quote ?a) (quote ?b)) => (quote (imp ?a ?b))
diff:  (diff (quote ?a) (quote ?b)) => (quote (iff ?a ?b))
dall:  (dall (quote ?v) (quote ?a)) => (quote (all ?v ?a))
dex:   (dex (quote ?v) (quote ?a)) => (quote (ex ?v ?a))
dalln: (dalln (quote ?v) (quote ?a)) => (quote (all ?v (imp (NN ?v) ?a)))
dsub:  (dsub (quote ?a) (quote ?v) (quote ?t)) => @subst
codeof: (codeof (quote ?a)) => (quote (quote ?a))
num:   (num ?t) => @numcode
pred:  (pred (S ?t)) => ?t
dpr:   (dpr ?T (quote ?a)) => @pratom
"""


def _read_nodes(text: str):
    from .syntax import _read_sexp, _tokenize
    toks = _tokenize(text)
    node, i = _read_sexp(toks, 0)
    if i != len(toks):
        raise CodingError(f"trailing tokens in rule part: {text!r}")
    return node


def load_rules(text: str) -> tuple:
    rules = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            name, rest = line.split(":", 1)
            lhs_txt, rhs_txt = rest.split("=>", 1)
        except ValueError:
            raise CodingError(f"malformed rule line: {raw!r}")
        name = name.strip()
        lhs = _read_nodes(lhs_txt.strip())
        rhs_txt = rhs_txt.strip()
        if rhs_txt.startswith("@"):
            rules.append(CodingRule(name, lhs, None, builtin=rhs_txt[1:]))
        else:
            rules.append(CodingRule(name, lhs, _read_nodes(rhs_txt)))
    return tuple(rules)


DEFAULT_RULES = load_rules(DEFAULT_RULES_TEXT)


# ---------------------------------------------------------------------------
# Matching and template instantiation
# ---------------------------------------------------------------------------

def _is_mvar(node) -> bool:
    return isinstance(node, str) and node.startswith("?")


_FORMULA_HEADS = {"in", "=", "not", "and", "or", "imp", "iff", "all", "ex",
                  "NN", "Uni", "Mod", "Sat", "Pr", "bot", "top"}


def _match_term(pat, subject: Term, b: dict) -> bool:
    if _is_mvar(pat):
        key = pat[1:]
        if key in b:
            return b[key] == subject
        b[key] = subject
        return True
    if isinstance(pat, str):
        if subject == Const(pat):
            return True
        return isinstance(subject, Var) and subject.name == pat
    head = pat[0]
    if head == "quote":
        if not isinstance(subject, Quote):
            return False
        return _match_content(pat[1], subject.body, b)
    if head == "dpr":
        if not (isinstance(subject, App) and subject.fn.startswith("dpr_")):
            return False
        tvar = pat[1]
        if not _is_mvar(tvar):
            return False
        b[tvar[1:]] = subject.fn[4:]
        return _match_term(pat[2], subject.args[0], b)
    if not isinstance(subject, App) or subject.fn != head \
            or len(subject.args) != len(pat) - 1:
        return False
    return all(_match_term(p, s, b) for p, s in zip(pat[1:], subject.args))


def _match_content(pat, content, b: dict) -> bool:
    if _is_mvar(pat):
        key = pat[1:]
        if key in b:
            return b[key] == content
        b[key] = content
        return True
    # structured content patterns are only as rich as the shipped rules need
    raise CodingError(f"unsupported quote-content pattern: {pat!r}")


def _inst(node, b: dict):
    """Instantiate an rhs template node tree to a Term."""
    if _is_mvar(node):
        return b[node[1:]]
    if isinstance(node, str):
        if node == "bot":
            return Bot()
        if node == "top":
            return Top()
        return Const(node) if node == "0" else Var(node)
    head = node[0]
    if head == "quote":
        return Quote(_inst_syntax(node[1], b))
    raise CodingError(f"unsupported rhs template: {node!r}")


def _inst_syntax(node, b: dict):
    """Instantiate template content (inside a quote) to a Formula or Term."""
    if _is_mvar(node):
        return b[node[1:]]
    if isinstance(node, str):
        if node == "bot":
            return Bot()
        if node == "top":
            return Top()
        return Const("0") if node == "0" else Var(node)
    head = node[0]
    if head == "quote":
        return Quote(_inst_syntax(node[1], b))
    if head == "not":
        return Not(_inst_syntax(node[1], b))
    if head in ("and", "or", "imp", "iff"):
        cls = {"and": And, "or": Or, "imp": Imp, "iff": Iff}[head]
        return cls(_inst_syntax(node[1], b), _inst_syntax(node[2], b))
    if head in ("all", "ex"):
        binder = _inst_syntax(node[1], b)
        if not isinstance(binder, Var):
            raise CodingError("binder slot must instantiate to a variable")
        cls = Forall if head == "all" else Exists
        body = _inst_syntax(node[2], b)
        if not isinstance(body, Formula):
            raise CodingError("quantified body must be a formula")
        return cls(binder.name, body)
    if head == "NN":
        arg = _inst_syntax(node[1], b)
        return Atom("NN", (arg,))
    raise CodingError(f"unsupported rhs template: {node!r}")


def _apply_builtin(rule: CodingRule, t: Term, b: dict) -> Optional[Term]:
    if rule.builtin == "subst":
        body, v, rep = b["a"], b["v"], b["t"]
        if not isinstance(v, Var) or not isinstance(rep, Term):
            return None
        if isinstance(body, Formula):
            return Quote(substitute(body, v.name, rep))
        from .syntax import subst_term
        return Quote(subst_term(body, {v.name: rep}))
    if rule.builtin == "numcode":
        arg = b["t"]
        if numeral_value(arg) is None:
            return None
        return Quote(arg)
    if rule.builtin == "pratom":
        thy = b["T"]
        arg = t.args[0]
        if not isinstance(arg, Quote):
            return None
        return Quote(Atom(f"Pr_{thy}", (arg,)))
    raise CodingError(f"unknown builtin {rule.builtin!r}")


def _rewrite_root(t: Term, rules) -> Optional[Term]:
    if not isinstance(t, App):
        return None
    for rule in rules:
        b: dict = {}
        if _match_term(rule.lhs, t, b):
            if rule.builtin:
                out = _apply_builtin(rule, t, b)
                if out is not None:
                    return out
            else:
                return _inst(rule.rhs, b)
    return None


def normalize_term(t: Term, rules=DEFAULT_RULES) -> Term:
    """Innermost normalization; quote contents are left untouched."""
    if isinstance(t, App):
        t = App(t.fn, tuple(normalize_term(a, rules) for a in t.args))
        while True:
            nxt = _rewrite_root(t, rules)
            if nxt is None:
                return t
            t = normalize_term(nxt, rules) if isinstance(nxt, App) else nxt
    return t


def coding_normalize(t: Term, rules=DEFAULT_RULES) -> Term:
    """Public entry point: unique normal form of a ground coding term."""
    if not isinstance(t, Term):
        raise CodingError("coding_normalize expects a term")
    if term_vars(t):
        raise CodingError(
            f"non-ground coding term (free: {sorted(term_vars(t))}): {show(t)}")
    return normalize_term(t, rules)


def normalize_formula(phi: Formula, rules=DEFAULT_RULES) -> Formula:
    """Normalize every term of the macro-free form of phi."""
    phi = expand_abbreviation(phi)

    def walk(f):
        if isinstance(f, Atom):
            return Atom(f.rel, tuple(normalize_term(a, rules) for a in f.args))
        if isinstance(f, Not):
            return Not(walk(f.body))
        if isinstance(f, (And, Or, Imp, Iff)):
            return type(f)(walk(f.left), walk(f.right))
        if isinstance(f, (Forall, Exists)):
            return type(f)(f.var, walk(f.body))
        return f

    return walk(phi)


def coding_equal(a, b, rules=DEFAULT_RULES) -> bool:
    """Do a and b denote the same syntax object under the coding equalities?"""
    if isinstance(a, Term) and isinstance(b, Term):
        return normalize_term(a, rules) == normalize_term(b, rules)
    if isinstance(a, Formula) and isinstance(b, Formula):
        return alpha_eq(normalize_formula(a, rules), normalize_formula(b, rules))
    return False


def quote(s) -> Term:
    if not isinstance(s, (Formula, Term)):
        raise CodingError(f"cannot quote {s!r}")
    return Quote(s)


def decode(t: Term):
    if not isinstance(t, Quote):
        raise CodingError(f"not a quotation: {show(t)}")
    return t.body


# ---------------------------------------------------------------------------
# Fixed points (substitution-diagonal construction)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedPoint:
    formula: Formula          # the fixed point itself
    self_term: Term           # ground term provably equal to quote(formula)
    delta: Formula            # the diagonal auxiliary


def _diag_term(x: str) -> Term:
    return App("dsub", (Var(x), Quote(Var(x)), App("codeof", (Var(x),))))


def fixed_point(body: Formula, hole: str, rules=DEFAULT_RULES) -> FixedPoint:
    """Formula F with F = body[t/hole] and t coding-equal to quote(F).

    The hole must occur only at term positions; every other free variable
    of `body` is carried through untouched (parametric diagonalization).
    """
    if hole not in free_vars(body):
        raise CodingError(f"hole {hole!r} is not free in the body")
    delta = substitute(body, hole, _diag_term(hole))
    t0 = App("dsub", (Quote(delta), Quote(Var(hole)),
                      App("codeof", (Quote(delta),))))
    fp = substitute(body, hole, t0)
    check = normalize_term(t0, rules)
    if check != Quote(fp):
        raise CodingError("diagonal construction failed to close")
    return FixedPoint(fp, t0, delta)


def diagonalize(psi: Formula, rules=DEFAULT_RULES):
    """Sentence lam with a checkable proof of lam <-> psi(quote(lam)).

    psi must have exactly one free variable.  The proof consists of the
    coding equality for the diagonal term and the normalization-equal
    biconditional itself.
    """
    fv = sorted(free_vars(psi))
    if len(fv) != 1:
        raise CodingError(
            f"diagonalize needs exactly one free variable, got {fv}")
    x = fv[0]
    fp = fixed_point(psi, x, rules)
    lam = fp.formula
    target = Iff(lam, substitute(psi, x, Quote(lam)))
    from .proofs import ProofScript, Step
    proof = ProofScript((
        Step(1, Atom("=", (fp.self_term, Quote(lam))), ("coding", "eq")),
        Step(2, target, ("coding", "iff")),
    ))
    return lam, proof


# ---------------------------------------------------------------------------
# Stage-indexed truth-in-a-universe formula families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModFamily:
    """Formula family Mod_n built as a fixed point of its own quotation.

    body has free variables {stage, univ, fml, asg} (the circular variant
    drops the stage).  Instantiating the stage at a literal k > 0 unfolds,
    under coding normalization, to the internal-satisfaction clause that
    mentions the codes of the stage-(k-1) members of the family.
    """
    body: Formula
    stage: str
    univ: str
    fml: str
    asg: str
    uni_formula: Formula
    mod0_formula: Optional[Formula]
    rev_lang: str
    circ: bool

    def code(self) -> Term:
        return Quote(self.body)

    def at_stage(self, k: int) -> Formula:
        if self.circ:
            return self.body
        return substitute(self.body, self.stage, numeral(k))


_REV_CLASS = {"L": "FmlLUM"}


def build_mod_family(uni_formula: Formula, mod0_formula: Formula,
                     rev_lang: str = "L", stage: str = "x1", univ: str = "x2",
                     fml: str = "x3", asg: str = "x4",
                     rules=DEFAULT_RULES) -> ModFamily:
    if rev_lang not in _REV_CLASS:
        raise CodingError(f"unsupported revision language {rev_lang!r}")
    if free_vars(uni_formula) != {stage, univ}:
        raise CodingError(
            f"uni formula must have free variables {{{stage},{univ}}}, got "
            f"{sorted(free_vars(uni_formula))}")
    if free_vars(mod0_formula) != {univ, fml, asg}:
        raise CodingError(
            f"stage-0 formula must have free variables {{{univ},{fml},{asg}}},"
            f" got {sorted(free_vars(mod0_formula))}")
    hole = "x99"
    n, u, p, f = Var(stage), Var(univ), Var(fml), Var(asg)
    stage_code = Quote(Var(stage))
    prev = App("num", (App("pred", (n,)),))
    uni_code = App("dsub", (Quote(uni_formula), stage_code, prev))
    mod_code = App("dsub", (Var(hole), stage_code, prev))
    body = And(
        And(And(Atom("NN", (n,)), uni_formula),
            And(Atom(_REV_CLASS[rev_lang], (p,)), Atom("VAin", (f, u)))),
        And(Imp(Atom("=", (n, Const("0"))), mod0_formula),
            Imp(Not(Atom("=", (n, Const("0")))),
                Atom("SatX", (u, uni_code, mod_code, p, f)))))
    fp = fixed_point(body, hole, rules)
    return ModFamily(fp.formula, stage, univ, fml, asg,
                     uni_formula, mod0_formula, rev_lang, circ=False)


def build_mod_circ(uni_formula: Formula, rev_lang: str = "L",
                   stage: str = "x1", univ: str = "x2", fml: str = "x3",
                   asg: str = "x4", rules=DEFAULT_RULES) -> ModFamily:
    """Variant fixed by its own revision: the unfolding quotes the family itself."""
    if rev_lang not in _REV_CLASS:
        raise CodingError(f"unsupported revision language {rev_lang!r}")
    if free_vars(uni_formula) != {stage, univ}:
        raise CodingError("uni formula must have the stage and universe free")
    hole = "x99"
    u, p, f = Var(univ), Var(fml), Var(asg)
    uni0 = substitute(uni_formula, stage, numeral(0))
    body = And(
        And(uni0, And(Atom(_REV_CLASS[rev_lang], (p,)), Atom("VAin", (f, u)))),
        Atom("SatX", (u, Quote(uni0), Var(hole), p, f)))
    fp = fixed_point(body, hole, rules)
    return ModFamily(fp.formula, stage, univ, fml, asg,
                     uni_formula, None, rev_lang, circ=True)


def unfold(fam: ModFamily, k: int, rules=DEFAULT_RULES):
    """The two sides of the stage-k biconditional (definitional unfolding)."""
    if k < 0:
        raise CodingError("stage must be a natural number")
    lhs = fam.at_stage(k)
    rhs = normalize_formula(lhs, rules)
    return lhs, rhs


def verify_dagger(fam: ModFamily, k: int, rules=DEFAULT_RULES):
    """Checkable proof that the stage-k member unfolds as constructed."""
    lhs, rhs = unfold(fam, k, rules)
    target = Iff(lhs, rhs)
    for v in (fam.asg, fam.fml, fam.univ):
        target = Forall(v, target)
    from .proofs import ProofScript, Step
    return ProofScript((Step(1, target, ("coding", "iff")),))
