"""Theory registry: every system as a bundle of schema recognizers.

A theory is a name, a language, a set of deductive rules, and an ordered
list of recognizers.  A recognizer inspects a candidate sentence (in
macro-free form) and returns a justification label or None.  Schema
instances (T_CM, the modal axioms, reflection instances, transfer lemmas)
are recognized shape by shape; single axioms are matched exactly up to
renaming of bound variables.

Besides its axioms proper, a theory recognizes instance schemas it proves
outright (box compositionality, Soundness-Lemma transfers, Hilbert-Bernays
conditions for registered provability symbols, representability of its own
recursive axiom set).  Each bank entry is decidable; the proof checker
trusts nothing unregistered.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from . import prop
from .coding import fixed_point, normalize_term
from .syntax import (
    And, App, Atom, Bot, Const, Exists, Forall, Formula, Iff, Imp,
    LANG_L, LANG_LSAT, LANG_LSAT_IS, LANG_LUM, LANG_LUM_IS, LanguageError,
    LanguageTag, Not, Or, Quote, Term, Top, Var,
    alpha_key, conj, expand_abbreviation, expanded_key, free_vars,
    in_language, is_sentence, mod2_formula, numeral, parse_formula, show,
    substitute, substitute_many, term_vars, tr_formula, trbox_formula,
)


class TheoryError(Exception):
    pass


# ---------------------------------------------------------------------------
# Shape extraction helpers (macro-free formulas throughout)
# ---------------------------------------------------------------------------

def match_trbox(phi: Formula) -> Optional[Term]:
    """Extract t from the expanded 'true in every universe' form."""
    if not isinstance(phi, Forall):
        return None
    u, b = phi.var, phi.body
    if not (isinstance(b, Imp) and b.left == Atom("Uni", (Var(u),))
            and isinstance(b.right, Forall)):
        return None
    f, c = b.right.var, b.right.body
    if not (isinstance(c, Imp) and c.left == Atom("VAin", (Var(f), Var(u)))):
        return None
    m = c.right
    if not (isinstance(m, Atom) and m.rel == "Mod"
            and m.args[0] == Var(u) and m.args[2] == Var(f)):
        return None
    t = m.args[1]
    if u in term_vars(t) or f in term_vars(t):
        return None
    return t


def match_mod2(phi: Formula) -> Optional[tuple]:
    """Extract (universe term, code term) from the two-argument Mod form."""
    if not isinstance(phi, Forall):
        return None
    f, b = phi.var, phi.body
    if not isinstance(b, Imp):
        return None
    g = b.left
    if not (isinstance(g, Atom) and g.rel == "VAin" and g.args[0] == Var(f)):
        return None
    u_term = g.args[1]
    m = b.right
    if not (isinstance(m, Atom) and m.rel == "Mod" and m.args[0] == u_term
            and m.args[2] == Var(f)):
        return None
    t = m.args[1]
    if f in term_vars(t) or f in term_vars(u_term):
        return None
    return u_term, t


def match_tr(phi: Formula) -> Optional[Term]:
    if not isinstance(phi, Forall):
        return None
    f, b = phi.var, phi.body
    if not (isinstance(b, Imp) and b.left == Atom("VA", (Var(f),))):
        return None
    s = b.right
    if not (isinstance(s, Atom) and s.rel == "Sat" and s.args[1] == Var(f)):
        return None
    t = s.args[0]
    return None if f in term_vars(t) else t


def code_formula(t: Optional[Term]) -> Optional[Formula]:
    """Formula denoted by a coding term, if its normal form is a quote."""
    if t is None:
        return None
    n = normalize_term(t)
    if isinstance(n, Quote) and isinstance(n.body, Formula):
        return n.body
    return None


def code_sentence(t: Optional[Term]) -> Optional[Formula]:
    phi = code_formula(t)
    if phi is not None and is_sentence(phi):
        return phi
    return None


def boxed(sigma: Formula) -> Formula:
    return trbox_formula(Quote(sigma))


def _same(a: Formula, b: Formula) -> bool:
    return expanded_key(a) == expanded_key(b)


def pr_atom(thy_name: str, sigma: Formula) -> Formula:
    return Atom(f"Pr_{thy_name}", (Quote(sigma),))


def con_sentence_of(thy_name: str) -> Formula:
    return Not(Atom(f"Pr_{thy_name}", (Quote(Bot()),)))


def multiverse_ax(thy_name: str) -> Formula:
    """Single sentence: every universe satisfies every coded axiom of T."""
    p = "x1"
    return Forall(p, Imp(Atom("SentLUM", (Var(p),)),
                         Imp(Atom(f"Ax_{thy_name}", (Var(p),)),
                             trbox_formula(Var(p)))))


def completeness_ax(thy_name: str) -> Formula:
    p = "x1"
    return Forall(p, Imp(Atom("SentLUM", (Var(p),)),
                         Imp(trbox_formula(Var(p)),
                             Atom(f"Pr_{thy_name}", (Var(p),)))))


def match_multiverse(phi: Formula) -> Optional[str]:
    """Theory name T if phi is the Multiverse axiom for T."""
    if not isinstance(phi, Forall):
        return None
    b = phi.body
    if not (isinstance(b, Imp) and isinstance(b.left, Atom)
            and b.left.rel == "SentLUM" and b.left.args == (Var(phi.var),)
            and isinstance(b.right, Imp)):
        return None
    ax = b.right.left
    if not (isinstance(ax, Atom) and ax.rel.startswith("Ax_")
            and ax.args == (Var(phi.var),)):
        return None
    name = ax.rel[3:]
    if not _same(phi, multiverse_ax(name)):
        return None
    return name


NON_TRIVIALITY = Exists("x1", Atom("Uni", (Var("x1"),)))


def _is_pr_atom(phi: Formula) -> Optional[tuple]:
    if isinstance(phi, Atom) and phi.rel.startswith("Pr_") \
            and len(phi.args) == 1:
        inner = code_sentence(phi.args[0])
        if inner is not None:
            return phi.rel[3:], inner
    return None


def is_sigma1(phi: Formula) -> bool:
    """The registered Sigma_1 class: provability atoms closed under and/or."""
    if _is_pr_atom(phi):
        return True
    if isinstance(phi, (And, Or)):
        return is_sigma1(phi.left) and is_sigma1(phi.right)
    return False


ARITH_FNS = {"S", "+", "*"}


def _arith_term(t: Term) -> bool:
    if isinstance(t, Var):
        return True
    if isinstance(t, Const):
        return t.name == "0"
    if isinstance(t, App):
        return t.fn in ARITH_FNS and all(_arith_term(a) for a in t.args)
    return False


def is_arith_formula(phi: Formula) -> bool:
    """Arithmetic: =-atoms over 0/S/+/* with N-bounded quantifiers."""
    if isinstance(phi, Atom):
        return phi.rel == "=" and all(_arith_term(a) for a in phi.args)
    if isinstance(phi, Not):
        return is_arith_formula(phi.body)
    if isinstance(phi, (And, Or, Imp, Iff)):
        return is_arith_formula(phi.left) and is_arith_formula(phi.right)
    if isinstance(phi, Forall):
        b = phi.body
        return isinstance(b, Imp) and b.left == Atom("NN", (Var(phi.var),)) \
            and is_arith_formula(b.right)
    if isinstance(phi, Exists):
        b = phi.body
        return isinstance(b, And) and b.left == Atom("NN", (Var(phi.var),)) \
            and is_arith_formula(b.right)
    if isinstance(phi, (Bot, Top)):
        return True
    return False


def abs_instance(alpha: Formula) -> Formula:
    """Universe-absoluteness of a closed alpha: Mod(U, code) <-> alpha."""
    u = "x1"
    return Forall(u, Imp(Atom("Uni", (Var(u),)),
                         Iff(mod2_formula(Var(u), Quote(alpha)), alpha)))


def match_abs_instance(phi: Formula) -> Optional[Formula]:
    if not isinstance(phi, Forall):
        return None
    u, b = phi.var, phi.body
    if not (isinstance(b, Imp) and b.left == Atom("Uni", (Var(u),))
            and isinstance(b.right, Iff)):
        return None
    m = match_mod2(b.right.left)
    if m is None or m[0] != Var(u):
        return None
    alpha = code_sentence(m[1])
    if alpha is None or not _same(alpha, b.right.right):
        return None
    if u in free_vars(alpha):
        return None
    return alpha


# ---------------------------------------------------------------------------
# Fixed axiom sentences
# ---------------------------------------------------------------------------

def _f(text: str) -> Formula:
    return parse_formula(text)


ZF_AXIOMS = {
    "Extensionality": _f("(all x1 (all x2 (imp (all x3 (iff (in x3 x1) (in x3 x2))) (= x1 x2))))"),
    "Pairing": _f("(all x1 (all x2 (ex x3 (all x4 (iff (in x4 x3) (or (= x4 x1) (= x4 x2)))))))"),
    "Union": _f("(all x1 (ex x2 (all x3 (iff (in x3 x2) (ex x4 (and (in x4 x1) (in x3 x4)))))))"),
    "Powerset": _f("(all x1 (ex x2 (all x3 (iff (in x3 x2) (all x4 (imp (in x4 x3) (in x4 x1)))))))"),
    "Infinity": _f("(ex x1 (and (ex x2 (and (in x2 x1) (all x3 (not (in x3 x2))))) "
                   "(all x2 (imp (in x2 x1) (ex x3 (and (in x3 x1) "
                   "(all x4 (iff (in x4 x3) (or (in x4 x2) (= x4 x2))))))))))"),
    "Foundation": _f("(all x1 (imp (ex x2 (in x2 x1)) "
                     "(ex x2 (and (in x2 x1) (all x3 (not (and (in x3 x1) (in x3 x2))))))))"),
}

# Compositional satisfaction axioms for the multiverse (internally
# quantified single sentences over coded formulas).
CM_AXIOMS = {
    "CM_eq": _f("(allin x1 Uni (all x2 (imp (VAin x2 x1) "
                "(iff (Mod x1 (quote (= x5 x6)) x2) "
                "(= (ap x2 (quote x5)) (ap x2 (quote x6)))))))"),
    "CM_neg": _f("(allin x1 Uni (all x3 (imp (FmlLUM x3) (all x2 (imp (VAin x2 x1) "
                 "(iff (Mod x1 (dneg x3) x2) (not (Mod x1 x3 x2))))))))"),
    "CM_and": _f("(allin x1 Uni (all x3 (imp (FmlLUM x3) (all x4 (imp (FmlLUM x4) "
                 "(all x2 (imp (VAin x2 x1) (iff (Mod x1 (dand x3 x4) x2) "
                 "(and (Mod x1 x3 x2) (Mod x1 x4 x2))))))))))"),
    "CM_all": _f("(allin x1 Uni (all x3 (imp (FmlLUM x3) (all x5 (imp (VarC x5) "
                 "(all x2 (imp (VAin x2 x1) (iff (Mod x1 (dall x5 x3) x2) "
                 "(all x6 (imp (and (VAin x6 x1) (VAat x6 x2 x5)) (Mod x1 x3 x6)))))))))))"),
}

CM_DERIVED = {
    "CM_or": _f("(allin x1 Uni (all x3 (imp (FmlLUM x3) (all x4 (imp (FmlLUM x4) "
                "(all x2 (imp (VAin x2 x1) (iff (Mod x1 (dor x3 x4) x2) "
                "(or (Mod x1 x3 x2) (Mod x1 x4 x2))))))))))"),
    "CM_imp": _f("(allin x1 Uni (all x3 (imp (FmlLUM x3) (all x4 (imp (FmlLUM x4) "
                 "(all x2 (imp (VAin x2 x1) (iff (Mod x1 (dimp x3 x4) x2) "
                 "(imp (Mod x1 x3 x2) (Mod x1 x4 x2))))))))))"),
    "CM_iff": _f("(allin x1 Uni (all x3 (imp (FmlLUM x3) (all x4 (imp (FmlLUM x4) "
                 "(all x2 (imp (VAin x2 x1) (iff (Mod x1 (diff x3 x4) x2) "
                 "(iff (Mod x1 x3 x2) (Mod x1 x4 x2))))))))))"),
    "CM_ex": _f("(allin x1 Uni (all x3 (imp (FmlLUM x3) (all x5 (imp (VarC x5) "
                "(all x2 (imp (VAin x2 x1) (iff (Mod x1 (dex x5 x3) x2) "
                "(ex x6 (and (and (VAin x6 x1) (VAat x6 x2 x5)) (Mod x1 x3 x6)))))))))))"),
    "CM_bot": _f("(allin x1 Uni (all x2 (imp (VAin x2 x1) "
                 "(iff (Mod x1 (quote bot) x2) bot))))"),
    "CM_top": _f("(allin x1 Uni (all x2 (imp (VAin x2 x1) "
                 "(iff (Mod x1 (quote top) x2) top))))"),
}

# Compositional truth over the Sat language.
CT_AXIOMS = {
    "CT_eq": _f("(all x3 (all x4 (iff (Sat (quote (= x1 x2)) "
                "(fasg2 (quote x1) (quote x2) x3 x4)) (= x3 x4))))"),
    "CT_in": _f("(all x3 (all x4 (iff (Sat (quote (in x1 x2)) "
                "(fasg2 (quote x1) (quote x2) x3 x4)) (in x3 x4))))"),
    "CT_neg": _f("(all x1 (imp (FmlLSat x1) (allin x2 VA "
                 "(iff (Sat (dneg x1) x2) (not (Sat x1 x2))))))"),
    "CT_and": _f("(all x1 (imp (FmlLSat x1) (all x3 (imp (FmlLSat x3) (allin x2 VA "
                 "(iff (Sat (dand x1 x3) x2) (and (Sat x1 x2) (Sat x3 x2))))))))"),
    "CT_all": _f("(all x1 (imp (FmlLSat x1) (all x5 (imp (VarC x5) (allin x2 VA "
                 "(iff (Sat (dall x5 x1) x2) (all x6 (imp (VAat x6 x2 x5) (Sat x1 x6)))))))))"),
}

ARITH_COMP = _f(
    "(allin x1 Uni (all x2 (imp (FmlLUM x2) (all x3 (imp (VarC x3) "
    "(iff (mod2 x1 (dalln x3 x2)) "
    "(all x4 (imp (NN x4) (Mod x1 x2 (fasg1 x3 (numin x1 x4)))))))))))")

SELF_PERCEPTION = {
    "Iso_self": Atom("Iso", (Const("self"),)),
    "Uni_self": Atom("Uni", (Const("self"),)),
}


def _wm_axiom(mode: str) -> Formula:
    # for every universe U there is a universe V with an element u whose
    # V-externalization is U and which V takes to be an omega-non-standard
    # (universe / ZFC-model / set), depending on the mode
    x = "x1"
    if mode == "WM":
        inner: Formula = And(Atom("OmegaNS", (Var(x),)), Atom("Uni", (Var(x),)))
    elif mode == "WM_strong":
        inner = And(Atom("OmegaNS", (Var(x),)), Atom("ModelsZFC", (Var(x),)))
    else:
        inner = Atom("OmegaNS", (Var(x),))
    asg = App("fasg1", (Quote(Var(x)), Var("x4")))
    if mode == "WM":
        sat: Formula = Atom("Mod", (Var("x3"), Quote(inner), asg))
    else:
        sat = Atom("Models", (Var("x3"), Quote(inner), asg))
    return Forall("x2", Imp(
        Atom("Uni", (Var("x2"),)),
        Exists("x3", And(Atom("Uni", (Var("x3"),)),
                         Exists("x4", And(Atom("in", (Var("x4"), Var("x3"))),
                                          And(Atom("ExtIs", (Var("x3"), Var("x4"), Var("x2"))),
                                              sat)))))))


WM_AXIOMS = {m: _wm_axiom(m) for m in ("WM", "WM_weak", "WM_strong")}


# ---------------------------------------------------------------------------
# Recognizer combinators
# ---------------------------------------------------------------------------
# A recognizer: fn(phi, thy, registry) -> Optional[label]; phi is macro-free.

def exact(table: dict) -> Callable:
    keys = {expanded_key(v): k for k, v in table.items()}

    def fn(phi, thy, reg):
        return keys.get(expanded_key(phi))
    return fn


def _strip_foralls(phi: Formula):
    vs = []
    while isinstance(phi, Forall):
        vs.append(phi.var)
        phi = phi.body
    return vs, phi


def separation(lang: LanguageTag, label: str) -> Callable:
    def fn(phi, thy, reg):
        _, core = _strip_foralls(phi)
        if not (isinstance(core, Exists) and isinstance(core.body, Forall)):
            return None
        b_, x_ = core.var, core.body.var
        it = core.body.body
        if not (isinstance(it, Iff) and it.left == Atom("in", (Var(x_), Var(b_)))
                and isinstance(it.right, And)):
            return None
        first = it.right.left
        cond = it.right.right
        if not (isinstance(first, Atom) and first.rel == "in"
                and first.args[0] == Var(x_) and isinstance(first.args[1], Var)
                and first.args[1].name not in (x_, b_)):
            return None
        if b_ in free_vars(cond):
            return None
        if not in_language(cond, lang):
            return None
        return label
    return fn


def replacement(lang: LanguageTag, label: str) -> Callable:
    def fn(phi, thy, reg):
        _, core = _strip_foralls(phi)
        if not isinstance(core, Imp):
            return None
        fnc, img = core.left, core.right
        # functionality premise: forall x in a exists unique y phi(x,y)
        if not (isinstance(fnc, Forall) and isinstance(fnc.body, Imp)):
            return None
        x_ = fnc.var
        ina = fnc.body.left
        if not (isinstance(ina, Atom) and ina.rel == "in"
                and ina.args[0] == Var(x_) and isinstance(ina.args[1], Var)):
            return None
        a_ = ina.args[1].name
        uniq = fnc.body.right
        if not (isinstance(uniq, Exists) and isinstance(uniq.body, And)):
            return None
        y_ = uniq.var
        cond = uniq.body.left
        if not in_language(cond, lang):
            return None
        # image: exists b forall x in a exists y in b phi
        if not (isinstance(img, Exists) and isinstance(img.body, Forall)):
            return None
        b_ = img.var
        inner = img.body.body
        if not (isinstance(inner, Imp)
                and inner.left == Atom("in", (Var(img.body.var), Var(a_)))):
            return None
        if b_ in free_vars(cond):
            return None
        return label
    return fn


def axiomhood_family(phi, thy, reg):
    """Ax_T applied to the code of a recognized axiom of T."""
    if not (isinstance(phi, Atom) and phi.rel.startswith("Ax_")
            and len(phi.args) == 1):
        return None
    name = phi.rel[3:]
    xi = code_sentence(phi.args[0])
    if xi is None or not reg.has(name):
        return None
    target = reg.get(name)
    try:
        if target.is_axiom(xi, reg) is not None:
            return f"axiomhood({name})"
    except LanguageError:
        return None
    return None


def hb_family(phi, thy, reg):
    """Hilbert-Bernays derivability conditions for registered Pr symbols."""
    if isinstance(phi, Imp):
        pa = _is_pr_atom(phi.left)
        if pa is not None:
            name, sig = pa
            if not reg.has(name):
                return None
            # D2: Pr(A -> B) -> (Pr(A) -> Pr(B))
            if isinstance(sig, Imp) and isinstance(phi.right, Imp):
                l = _is_pr_atom(phi.right.left)
                r = _is_pr_atom(phi.right.right)
                if l and r and l[0] == name and r[0] == name \
                        and _same(l[1], sig.left) and _same(r[1], sig.right):
                    return "HB_D2"
            # D3: Pr(A) -> Pr(Pr(A))
            r = _is_pr_atom(phi.right)
            if r and r[0] == name and isinstance(r[1], Atom) \
                    and r[1].rel == f"Pr_{name}":
                inner = code_sentence(r[1].args[0])
                if inner is not None and _same(inner, sig):
                    return "HB_D3"
    return None


def box_lemma_family(phi, thy, reg):
    """Box compositionality instances provable without Non-Triviality."""
    if isinstance(phi, Imp):
        ta = match_trbox(phi.left)
        # K: box(A->B) -> (box A -> box B)
        if ta is not None and isinstance(phi.right, Imp):
            ab = code_sentence(ta)
            tb = match_trbox(phi.right.left)
            tc = match_trbox(phi.right.right)
            if isinstance(ab, Imp) and tb is not None and tc is not None:
                sb, sc = code_sentence(tb), code_sentence(tc)
                if sb is not None and sc is not None \
                        and _same(ab.left, sb) and _same(ab.right, sc):
                    return "CMbox_imp"
        # box(A<->B) -> (box A <-> box B)
        if ta is not None and isinstance(phi.right, Iff):
            ab = code_sentence(ta)
            tb = match_trbox(phi.right.left)
            tc = match_trbox(phi.right.right)
            if isinstance(ab, Iff) and tb is not None and tc is not None:
                sb, sc = code_sentence(tb), code_sentence(tc)
                if sb is not None and sc is not None \
                        and _same(ab.left, sb) and _same(ab.right, sc):
                    return "CMbox_iff"
        # box_inst: box(all x phi) -> box(phi[t/x])
        if ta is not None:
            allf = code_sentence(ta)
            tb = match_trbox(phi.right)
            inst = code_sentence(tb)
            if isinstance(allf, Forall) and inst is not None:
                if _match_instantiation(allf, inst):
                    return "box_inst"
            # box_genv: box(phi) -> box(all x phi), x vacuous
            if allf is not None and isinstance(inst, Forall) \
                    and inst.var not in free_vars(inst.body) \
                    and _same(allf, inst.body):
                return "box_genv"
    if isinstance(phi, Iff):
        ta = match_trbox(phi.left)
        if ta is not None and isinstance(phi.right, And):
            ab = code_sentence(ta)
            tb = match_trbox(phi.right.left)
            tc = match_trbox(phi.right.right)
            if isinstance(ab, And) and tb is not None and tc is not None:
                sb, sc = code_sentence(tb), code_sentence(tc)
                if sb is not None and sc is not None \
                        and _same(ab.left, sb) and _same(ab.right, sc):
                    return "CMbox_and"
    # boxed tautology
    t = match_trbox(phi)
    if t is not None:
        sig = code_sentence(t)
        if sig is not None:
            try:
                if prop.is_tautology(sig):
                    return "CMbox_taut"
            except prop.PropError:
                return None
    return None


def _match_instantiation(allf: Forall, inst: Formula) -> bool:
    """Is inst = allf.body[t/x] for some closed term t (inferred)?"""
    cands: list = []

    def walk(pat, sub):
        if isinstance(pat, Var) and pat.name == allf.var:
            cands.append(sub)
            return isinstance(sub, Term)
        if type(pat) is not type(sub):
            return False
        if isinstance(pat, (Var, Const)):
            return pat == sub
        if isinstance(pat, App):
            return pat.fn == sub.fn and len(pat.args) == len(sub.args) \
                and all(walk(p, s) for p, s in zip(pat.args, sub.args))
        if isinstance(pat, Quote):
            return pat == sub
        if isinstance(pat, Atom):
            return pat.rel == sub.rel and len(pat.args) == len(sub.args) \
                and all(walk(p, s) for p, s in zip(pat.args, sub.args))
        if isinstance(pat, Not):
            return walk(pat.body, sub.body)
        if isinstance(pat, (And, Or, Imp, Iff)):
            return walk(pat.left, sub.left) and walk(pat.right, sub.right)
        if isinstance(pat, (Forall, Exists)):
            if pat.var == allf.var:
                return pat == sub
            return pat.var == sub.var and walk(pat.body, sub.body)
        return pat == sub

    if not walk(allf.body, inst):
        # bound-variable renamings: retry on alpha-normalized pair
        return False
    if not cands:
        return _same(allf.body, inst)
    t0 = cands[0]
    return all(c == t0 for c in cands) and not term_vars(t0)


def nontriv_box_family(phi, thy, reg):
    """Box lemmas needing Non-Triviality: bot, neg, D."""
    if isinstance(phi, Iff) and isinstance(phi.right, Bot):
        t = match_trbox(phi.left)
        if t is not None and code_sentence(t) == Bot():
            return "CMbox_bot"
    if isinstance(phi, Imp):
        if isinstance(phi.right, Bot):
            t = match_trbox(phi.left)
            if t is not None and code_sentence(t) == Bot():
                return "CMbox_bot"
        t = match_trbox(phi.left)
        if t is not None and isinstance(phi.right, Not):
            na = code_sentence(t)
            tb = match_trbox(phi.right.body)
            sb = code_sentence(tb)
            if isinstance(na, Not) and sb is not None and _same(na.body, sb):
                return "CMbox_neg"
        # D: box A -> dia A, dia expanded as not box(dneg ...)
        if t is not None and isinstance(phi.right, Not):
            inner = match_trbox(phi.right.body)
            if inner is not None:
                sa = code_sentence(t)
                si = code_sentence(inner)
                if sa is not None and isinstance(si, Not) \
                        and _same(si.body, sa):
                    return "D_CM"
    return None


def modal_schema_family(label: str) -> Callable:
    """T/4/Lob instance schemas over coded sentences."""
    def fn(phi, thy, reg):
        if not isinstance(phi, Imp):
            return None
        if label == "T_CM" or label == "MultiverseReflection":
            t = match_trbox(phi.left)
            sig = code_sentence(t)
            if sig is None or not _same(sig, phi.right):
                return None
            if label == "MultiverseReflection":
                if not in_language(sig, LANG_L):
                    return None
            return label
        if label == "Four_CM":
            t = match_trbox(phi.left)
            sig = code_sentence(t)
            t2 = match_trbox(phi.right)
            outer = code_sentence(t2)
            if sig is None or outer is None:
                return None
            if _same(outer, boxed(sig)):
                return label
            return None
        if label == "Lob_CM":
            t = match_trbox(phi.left)
            body = code_sentence(t)
            t2 = match_trbox(phi.right)
            sig = code_sentence(t2)
            if sig is None or not isinstance(body, Imp):
                return None
            if _same(body.left, boxed(sig)) and _same(body.right, sig):
                return label
            return None
        return None
    return fn


def sigma1_abs_family(phi, thy, reg):
    alpha = match_abs_instance(phi)
    if alpha is not None and is_sigma1(alpha):
        return "Sigma1_Absoluteness"
    return None


def arith_abs_family(phi, thy, reg):
    alpha = match_abs_instance(phi)
    if alpha is not None and is_arith_formula(alpha):
        return "Arithmetic_Absoluteness"
    return None


def multiverse_instance_family(phi, thy, reg):
    """boxed(xi) for xi an axiom of a theory the ambient multiverse covers."""
    t = match_trbox(phi)
    xi = code_sentence(t)
    if xi is None:
        return None
    for name in thy.multiverse_over:
        target = reg.get(name)
        try:
            if target.is_axiom(xi, reg) is not None:
                return f"Multiverse-instance({name})"
        except LanguageError:
            pass
    return None


def soundness_con_family(phi, thy, reg):
    """(NonTriv and Multiverse_T) -> Con_T   [Soundness Lemma]"""
    if not (isinstance(phi, Imp) and isinstance(phi.left, And)):
        return None
    l, r = phi.left.left, phi.left.right
    if not _same(l, NON_TRIVIALITY):
        return None
    name = match_multiverse(r)
    if name is None or not reg.has(name):
        return None
    if _same(phi.right, con_sentence_of(name)):
        return f"soundness_con({name})"
    return None


def gr_transfer_family(phi, thy, reg):
    """Multiverse_T -> (Pr_T(s) -> boxed(s))   [Soundness Lemma]"""
    if not (isinstance(phi, Imp) and isinstance(phi.right, Imp)):
        return None
    name = match_multiverse(phi.left)
    if name is None or not reg.has(name):
        return None
    pa = _is_pr_atom(phi.right.left)
    if pa is None or pa[0] != name:
        return None
    t = match_trbox(phi.right.right)
    sig = code_sentence(t)
    if sig is not None and _same(sig, pa[1]):
        return f"gr_transfer({name})"
    return None


def multiverse_step_family(phi, thy, reg):
    """(Multiverse_B and boxed(conj of T's extension)) -> Multiverse_T."""
    if not isinstance(phi, Imp):
        return None
    name = match_multiverse(phi.right)
    if name is None or not reg.has(name):
        return None
    target = reg.get(name)
    if target.ext_base is None:
        return None
    prem = phi.left
    if target.ext_axioms:
        if not isinstance(prem, And):
            return None
        base_name = match_multiverse(prem.left)
        t = match_trbox(prem.right)
        xi = code_sentence(t)
        if xi is None or not _same(xi, conj(target.ext_axioms)):
            return None
    else:
        base_name = match_multiverse(prem)
    if base_name is None or not reg.has(base_name):
        return None
    if not reg.get(base_name).includes(reg.get(target.ext_base), reg):
        return None
    return f"multiverse_step({name})"


def arith_reflection_transfer_family(phi, thy, reg):
    """(Sigma1-abs at Pr_T(s) and Multiverse_T) -> boxed(Pr_T(s) -> s)."""
    if not (isinstance(phi, Imp) and isinstance(phi.left, And)):
        return None
    alpha = match_abs_instance(phi.left.left)
    pa = _is_pr_atom(alpha) if alpha is not None else None
    if pa is None:
        return None
    name = match_multiverse(phi.left.right)
    if name is None or name != pa[0] or not reg.has(name):
        return None
    t = match_trbox(phi.right)
    body = code_sentence(t)
    if isinstance(body, Imp):
        ba = _is_pr_atom(body.left)
        if ba and ba[0] == name and _same(ba[1], pa[1]) \
                and _same(body.right, pa[1]):
            return f"arith_reflection_transfer({name})"
    return None


def _r_level(name: str) -> Optional[int]:
    if name == "ZF":
        return 0
    if name.startswith("R") and name[1:].isdigit():
        return int(name[1:])
    return None


def r_step_family(kind: str) -> Callable:
    """Multiverse_R^k -> Multiverse_R^(k+1), internalized induction step."""
    def fn(phi, thy, reg):
        if not isinstance(phi, Imp):
            return None
        a = match_multiverse(phi.left)
        b = match_multiverse(phi.right)
        if a is None or b is None:
            return None
        ka, kb = _r_level(a), _r_level(b)
        if ka is None or kb is None or kb != ka + 1:
            return None
        if not (reg.has(a) and reg.has(b)):
            return None
        if kind == "box" and "MultiverseReflection" not in thy.families:
            return None
        if kind == "box" and "NEC" not in thy.rules:
            return None
        if kind == "arith" and "Sigma1Abs" not in thy.families:
            return None
        return f"R-step-{kind}({ka})"
    return fn


def con_r_instances(phi, thy, reg):
    """Consistency / reflection instances admitted by the hierarchy theories."""
    for name, level, kind in thy.hierarchy:
        if kind == "con":
            for j in range(level):
                base = thy.hier_base if j == 0 else f"Con{j}"
                if _same(phi, con_sentence_of(base)):
                    return f"Con-instance({j + 1})"
        elif kind == "r":
            if isinstance(phi, Imp):
                pa = _is_pr_atom(phi.left)
                if pa is not None:
                    lv = _r_level(pa[0])
                    if lv is not None and lv < level \
                            and _same(pa[1], phi.right) \
                            and in_language(pa[1], LANG_L):
                        return f"R-instance({lv + 1})"
        elif kind == "gr":
            for j in range(level):
                base = thy.hier_base if j == 0 else f"GR{j}"
                if _same(phi, global_reflection_formula(base)):
                    return f"GR-instance({j + 1})"
    return None


def global_reflection_formula(thy_name: str) -> Formula:
    p = "x1"
    return Forall(p, Imp(Atom("SentLSat", (Var(p),)),
                         Imp(Atom(f"Pr_{thy_name}", (Var(p),)),
                             tr_formula(Var(p)))))


# --- CT biconditional machinery -------------------------------------------

def tarski_bicond(phi: Formula, v1: str = "x1", v2: str = "x2",
                  w1: str = "x3", w2: str = "x4") -> Formula:
    """forall w1 w2: Sat(code(phi), <v1,v2> -> <w1,w2>) <-> phi[w/v]."""
    asg = App("fasg2", (Quote(Var(v1)), Quote(Var(v2)), Var(w1), Var(w2)))
    dis = substitute_many(phi, {v1: Var(w1), v2: Var(w2)})
    return Forall(w1, Forall(w2, Iff(Atom("Sat", (Quote(phi), asg)), dis)))


def match_tarski_bicond(phi: Formula) -> Optional[tuple]:
    """-> (coded formula, v1, v2, w1, w2) if phi is a Tarski biconditional."""
    if not (isinstance(phi, Forall) and isinstance(phi.body, Forall)):
        return None
    w1, w2 = phi.var, phi.body.var
    it = phi.body.body
    if not (isinstance(it, Iff) and isinstance(it.left, Atom)
            and it.left.rel == "Sat"):
        return None
    code, asg = it.left.args
    if not (isinstance(asg, App) and asg.fn == "fasg2"):
        return None
    q1, q2, a1, a2 = asg.args
    if not (isinstance(q1, Quote) and isinstance(q1.body, Var)
            and isinstance(q2, Quote) and isinstance(q2.body, Var)
            and a1 == Var(w1) and a2 == Var(w2)):
        return None
    v1, v2 = q1.body.name, q2.body.name
    inner = code_formula(code)
    if inner is None or v1 == v2:
        return None
    expect = substitute_many(inner, {v1: Var(w1), v2: Var(w2)})
    if not _same(expect, it.right):
        return None
    if free_vars(inner) - {v1, v2}:
        return None
    return inner, v1, v2, w1, w2


def ct_atom_family(phi, thy, reg):
    m = match_tarski_bicond(phi)
    if m is None:
        return None
    inner, v1, v2 = m[0], m[1], m[2]
    if isinstance(inner, Atom) and len(inner.args) == 2 \
            and all(a in (Var(v1), Var(v2)) for a in inner.args):
        if inner.rel == "in":
            return "CT_in"
        if inner.rel == "=":
            return "CT_eq"
    return None


def ct_step_family(phi, thy, reg):
    """Induction-step implications between Tarski biconditionals."""
    if not isinstance(phi, Imp):
        return None
    if isinstance(phi.right, Imp):        # binary connective step
        a = match_tarski_bicond(phi.left)
        b = match_tarski_bicond(phi.right.left)
        c = match_tarski_bicond(phi.right.right)
        if a and b and c and a[1:] == c[1:] and b[1:] == c[1:]:
            tgt = c[0]
            if isinstance(tgt, (And, Or, Imp, Iff)) \
                    and _same(tgt.left, a[0]) and _same(tgt.right, b[0]):
                return {And: "CT_and-step", Or: "CT_or-step",
                        Imp: "CT_imp-step", Iff: "CT_iff-step"}[type(tgt)]
    a = match_tarski_bicond(phi.left)
    c = match_tarski_bicond(phi.right)
    if a and c and a[1:] == c[1:]:
        tgt = c[0]
        if isinstance(tgt, Not) and _same(tgt.body, a[0]):
            return "CT_neg-step"
        if isinstance(tgt, (Forall, Exists)) and tgt.var in (c[1], c[2]) \
                and _same(tgt.body, a[0]):
            return "CT_all-step" if isinstance(tgt, Forall) else "CT_ex-step"
    return None


# --- arithmetic absoluteness machinery -------------------------------------

def absf(phi: Formula, vs: tuple) -> Formula:
    """Parametric absoluteness of phi with free arithmetic variables vs."""
    u = "x7"
    ns = [f"x{8 + i}" for i in range(len(vs))]
    if len(vs) == 0:
        inner: Formula = Iff(mod2_formula(Var(u), Quote(phi)), phi)
    else:
        if len(vs) == 1:
            asg = App("fasg1", (Quote(Var(vs[0])),
                                App("numin", (Var(u), Var(ns[0])))))
        elif len(vs) == 2:
            asg = App("fasg2", (Quote(Var(vs[0])), Quote(Var(vs[1])),
                                App("numin", (Var(u), Var(ns[0]))),
                                App("numin", (Var(u), Var(ns[1])))))
        else:
            raise TheoryError("absoluteness supports at most 2 free variables")
        dis = substitute_many(phi, {v: Var(n) for v, n in zip(vs, ns)})
        inner = Iff(Atom("Mod", (Var(u), Quote(phi), asg)), dis)
        for n in reversed(ns):
            inner = Forall(n, Imp(Atom("NN", (Var(n),)), inner))
    return Forall(u, Imp(Atom("Uni", (Var(u),)), inner))


def match_absf(phi: Formula) -> Optional[tuple]:
    """-> (formula, free-variable order) for a parametric absoluteness shape."""
    if not (isinstance(phi, Forall) and isinstance(phi.body, Imp)
            and phi.body.left == Atom("Uni", (Var(phi.var),))):
        return None
    u = phi.var
    body = phi.body.right
    ns = []
    while isinstance(body, Forall) and isinstance(body.body, Imp) \
            and body.body.left == Atom("NN", (Var(body.var),)):
        ns.append(body.var)
        body = body.body.right
    if not isinstance(body, Iff):
        return None
    if len(ns) == 0:
        m = match_mod2(body.left)
        if m is None or m[0] != Var(u):
            return None
        inner = code_sentence(m[1])
        if inner is None or not _same(inner, body.right):
            return None
        return inner, ()
    if not (isinstance(body.left, Atom) and body.left.rel == "Mod"):
        return None
    ut, code, asg = body.left.args
    if ut != Var(u) or not isinstance(asg, App):
        return None
    inner = code_formula(code)
    if inner is None:
        return None
    if asg.fn == "fasg1" and len(ns) == 1:
        q, val = asg.args
        if not (isinstance(q, Quote) and isinstance(q.body, Var)
                and val == App("numin", (Var(u), Var(ns[0])))):
            return None
        vs = (q.body.name,)
    elif asg.fn == "fasg2" and len(ns) == 2:
        q1, q2, a1, a2 = asg.args
        if not (isinstance(q1, Quote) and isinstance(q1.body, Var)
                and isinstance(q2, Quote) and isinstance(q2.body, Var)
                and a1 == App("numin", (Var(u), Var(ns[0])))
                and a2 == App("numin", (Var(u), Var(ns[1])))):
            return None
        vs = (q1.body.name, q2.body.name)
    else:
        return None
    dis = substitute_many(inner, {v: Var(n) for v, n in zip(vs, ns)})
    if not _same(dis, body.right):
        return None
    if set(free_vars(inner)) != set(vs):
        return None
    return inner, vs


def abs_step_family(phi, thy, reg):
    m0 = match_absf(phi)
    if m0 is not None and isinstance(m0[0], Atom) \
            and is_arith_formula(m0[0]):
        return "abs_atom"
    if not isinstance(phi, Imp):
        return None
    if isinstance(phi.right, Imp):
        a = match_absf(phi.left)
        b = match_absf(phi.right.left)
        c = match_absf(phi.right.right)
        if a and b and c and isinstance(c[0], (And, Or, Imp)):
            if _same(c[0].left, a[0]) and _same(c[0].right, b[0]):
                return {And: "abs_and-step", Or: "abs_or-step",
                        Imp: "abs_imp-step"}[type(c[0])]
    a = match_absf(phi.left)
    c = match_absf(phi.right)
    if a and c and isinstance(c[0], Not) and _same(c[0].body, a[0]):
        return "abs_neg-step"
    # bounded-forall step: (ArithComp and Absf(phi; v:ws)) -> Absf(all v in N phi; ws)
    if isinstance(phi.left, And) and _same(phi.left.left, ARITH_COMP):
        a = match_absf(phi.left.right)
        c = match_absf(phi.right)
        if a and c and isinstance(c[0], Forall):
            tgt = c[0]
            if isinstance(tgt.body, Imp) \
                    and tgt.body.left == Atom("NN", (Var(tgt.var),)) \
                    and _same(tgt.body.right, a[0]) and tgt.var in a[1]:
                return "abs_forall-step"
    return None


# ---------------------------------------------------------------------------
# Theory descriptors and the registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProvabilitySymbol:
    theory_ref: str

    @property
    def symbol(self) -> str:
        return f"Pr_{self.theory_ref}"

    @property
    def con_sentence(self) -> Formula:
        return con_sentence_of(self.theory_ref)


@dataclass(frozen=True)
class TheoryDescriptor:
    name: str
    lang: LanguageTag
    recognizers: tuple                  # of callables
    rules: frozenset
    parent: Optional[str] = None
    components: frozenset = frozenset()
    families: frozenset = frozenset()   # axiom-family tags, for gating
    multiverse_over: tuple = ()         # theories whose axioms are box-valid
    ext_base: Optional[str] = None      # finite extension data
    ext_axioms: tuple = ()
    hierarchy: tuple = ()               # (name, level, kind) for con/r/gr
    hier_base: str = "ZF"

    def is_axiom(self, sigma: Formula, reg: "Registry") -> Optional[str]:
        if not is_sentence(sigma):
            raise TheoryError(f"not a sentence: {show(sigma)}")
        if not in_language(sigma, self.lang):
            raise LanguageError(
                f"sentence not in language {self.lang.name} of {self.name}")
        phi = expand_abbreviation(sigma)
        for fn in self.recognizers:
            label = fn(phi, self, reg)
            if label is not None:
                return label
        return None

    def includes(self, other: "TheoryDescriptor", reg: "Registry") -> bool:
        return other.components <= self.components

    @property
    def provability(self) -> ProvabilitySymbol:
        return ProvabilitySymbol(self.name)


class Registry:
    def __init__(self):
        self._by_name: dict = {}
        self._register_core()

    # -- public API ---------------------------------------------------------

    def has(self, name: str) -> bool:
        try:
            self.get(name)
            return True
        except TheoryError:
            return False

    def get(self, name: str) -> TheoryDescriptor:
        if name in self._by_name:
            return self._by_name[name]
        built = self._build_dynamic(name)
        if built is None:
            raise TheoryError(f"unknown theory {name!r}")
        return built

    def is_axiom(self, thy_name: str, sigma: Formula) -> Optional[str]:
        return self.get(thy_name).is_axiom(sigma, self)

    def names(self):
        return sorted(self._by_name)

    # -- construction -------------------------------------------------------

    def _add(self, d: TheoryDescriptor) -> TheoryDescriptor:
        self._by_name[d.name] = d
        return d

    def _register_core(self):
        base_bank = (axiomhood_family, hb_family)

        zf = self._add(TheoryDescriptor(
            name="ZF", lang=LANG_L,
            recognizers=(exact(ZF_AXIOMS),
                         separation(LANG_L, "Sep(L)"),
                         replacement(LANG_L, "Rep(L)")) + base_bank,
            rules=frozenset({"MP", "Gen", "PrIntro"}),
            components=frozenset({"ZF"}),
        ))

        zfum = self._add(TheoryDescriptor(
            name="ZFUM", lang=LANG_LUM, parent="ZF",
            recognizers=zf.recognizers + (separation(LANG_LUM, "Sep(LUM)"),
                                          replacement(LANG_LUM, "Rep(LUM)")),
            rules=zf.rules,
            components=zf.components | {"ZFUM"},
        ))

        cm_bank = (box_lemma_family, soundness_con_family, gr_transfer_family,
                   multiverse_step_family, arith_reflection_transfer_family,
                   abs_step_family)
        cmm = self._add(TheoryDescriptor(
            name="CM-", lang=LANG_LUM, parent="ZFUM",
            recognizers=zfum.recognizers + (exact(CM_AXIOMS),
                                            exact(CM_DERIVED)) + cm_bank,
            rules=zfum.rules,
            components=zfum.components | {"CM-"},
            families=frozenset({"CM"}),
        ))

        cm = self._add(TheoryDescriptor(
            name="CM", lang=LANG_LUM, parent="CM-",
            recognizers=cmm.recognizers + (
                exact({"Multiverse_ZF": multiverse_ax("ZFUM")}),
                multiverse_instance_family,
                r_step_family("box"), r_step_family("arith")),
            rules=cmm.rules,
            components=cmm.components | {"CM"},
            families=cmm.families | {"Multiverse_ZF"},
            multiverse_over=("ZFUM",),
        ))

        self._add(TheoryDescriptor(
            name="MS-", lang=LANG_LUM, parent="CM-",
            recognizers=cmm.recognizers,
            rules=cmm.rules | {"NEC", "CONEC"},
            components=cmm.components | {"MS-"},
            families=cmm.families,
        ))
        self._add(TheoryDescriptor(
            name="MS", lang=LANG_LUM, parent="CM",
            recognizers=cm.recognizers,
            rules=cm.rules | {"NEC", "CONEC"},
            components=cm.components | {"MS"},
            families=cm.families,
            multiverse_over=cm.multiverse_over,
        ))

        ctr = self._add(TheoryDescriptor(
            name="CTr", lang=LANG_LSAT, parent="ZF",
            recognizers=zf.recognizers + (exact(CT_AXIOMS), ct_atom_family,
                                          ct_step_family),
            rules=zf.rules,
            components=zf.components | {"CTr"},
            families=frozenset({"CT"}),
        ))
        self._add(TheoryDescriptor(
            name="CT", lang=LANG_LSAT, parent="CTr",
            recognizers=ctr.recognizers + (separation(LANG_LSAT, "Sep(LSat)"),
                                           replacement(LANG_LSAT, "Rep(LSat)")),
            rules=ctr.rules,
            components=ctr.components | {"CT"},
            families=ctr.families,
        ))

        self._register_compcm(cmm)

    def _register_compcm(self, cmm: TheoryDescriptor):
        # the two axioms referring to the theory itself, built as a fixed
        # point of the axiom-set predicate at load time
        z, hole = "x7", "x99"
        mult_t = Forall("x1", Imp(
            Atom("SentLUM", (Var("x1"),)),
            Imp(Atom("InDef", (Var(z), Var("x1"))),
                trbox_formula(Var("x1")))))
        comp_t = Forall("x1", Imp(
            Atom("SentLUM", (Var("x1"),)),
            Imp(trbox_formula(Var("x1")),
                Atom("PrOf", (Var(z), Var("x1"))))))
        code_m = App("dsub", (Quote(mult_t), Quote(Var(z)),
                              App("codeof", (Var(hole),))))
        code_c = App("dsub", (Quote(comp_t), Quote(Var(z)),
                              App("codeof", (Var(hole),))))
        body = Or(Atom("Ax_CM-", (Var("x1"),)),
                  Or(Atom("=", (Var("x1"), code_m)),
                     Atom("=", (Var("x1"), code_c))))
        body = Forall("x1", Iff(Atom("InDef", (Var(hole), Var("x1"))), body))
        # the hole occurs at term positions only; take the fixed point
        fp = fixed_point(body, hole)
        ax_pred_code = Quote(fp.formula)
        ax1 = substitute(mult_t, z, ax_pred_code)
        ax2 = substitute(comp_t, z, ax_pred_code)
        cmm_recs = cmm.recognizers
        self._add(TheoryDescriptor(
            name="CompCM", lang=LANG_LUM, parent="CM-",
            recognizers=cmm_recs + (exact({"Multiverse(CompCM)": ax1,
                                           "Completeness(CompCM)": ax2}),),
            rules=cmm.rules,
            components=cmm.components | {"CompCM"},
            families=cmm.families | {"CompCM"},
        ))

    # -- dynamic hierarchies and tag composition -----------------------------

    def _build_dynamic(self, name: str) -> Optional[TheoryDescriptor]:
        if "+" in name:
            return self._compose(name)
        for prefix, builder in (("Con", self._build_con), ("R", self._build_r),
                                ("GR", self._build_gr), ("SP", self._build_sp)):
            if name.startswith(prefix) and name[len(prefix):].isdigit():
                return builder(int(name[len(prefix):]))
        return None

    def _build_con(self, n: int) -> TheoryDescriptor:
        if n == 0:
            return self.get("ZF")
        parent = self.get(f"Con{n - 1}") if n > 1 else self.get("ZF")
        exts = tuple(con_sentence_of("ZF" if j == 0 else f"Con{j}")
                     for j in range(n))
        d = TheoryDescriptor(
            name=f"Con{n}", lang=LANG_L, parent=parent.name,
            recognizers=self.get("ZF").recognizers + (con_r_instances,),
            rules=parent.rules,
            components=parent.components | {f"Con{n}"},
            hierarchy=((f"Con{n}", n, "con"),),
            ext_base="ZF", ext_axioms=exts,
        )
        return self._add(d)

    def _build_r(self, n: int) -> TheoryDescriptor:
        if n == 0:
            return self.get("ZF")
        parent = self.get(f"R{n - 1}") if n > 1 else self.get("ZF")
        d = TheoryDescriptor(
            name=f"R{n}", lang=LANG_L, parent=parent.name,
            recognizers=self.get("ZF").recognizers + (con_r_instances,),
            rules=parent.rules,
            components=parent.components | {f"R{n}"},
            hierarchy=((f"R{n}", n, "r"),),
        )
        return self._add(d)

    def _build_gr(self, n: int) -> TheoryDescriptor:
        if n == 0:
            ctr = self.get("CTr")
            d = TheoryDescriptor(
                name="GR0", lang=LANG_LSAT, parent="CTr",
                recognizers=ctr.recognizers + (separation(LANG_LSAT,
                                                          "Sep(LSat)"),),
                rules=ctr.rules,
                components=ctr.components | {"GR0", "Sep(LSat)"},
            )
            return self._add(d)
        parent = self.get(f"GR{n - 1}")
        table = {f"GR-axiom({j + 1})":
                 global_reflection_formula("GR0" if j == 0 else f"GR{j}")
                 for j in range(n)}
        d = TheoryDescriptor(
            name=f"GR{n}", lang=LANG_LSAT, parent=parent.name,
            recognizers=parent.recognizers + (exact(table),),
            rules=parent.rules,
            components=parent.components | {f"GR{n}"},
        )
        return self._add(d)

    def _build_sp(self, n: int) -> TheoryDescriptor:
        gr = self.get(f"GR{n}")
        if n == 0:
            d = TheoryDescriptor(
                name="SP0", lang=LANG_LSAT_IS, parent="GR0",
                recognizers=gr.recognizers, rules=gr.rules,
                components=gr.components | {"SP0"},
            )
            return self._add(d)
        parent = self.get(f"SP{n - 1}")
        opaque = {
            "Iso_self": Atom("Iso", (Const("self"),)),
            "self_crsm": Atom("Crsm", (Const("self"),)),
            f"self_models_SP{n - 1}":
                Atom(f"ModelsTrSP{n - 1}", (Const("self"),)),
        }
        d = TheoryDescriptor(
            name=f"SP{n}", lang=LANG_LSAT_IS, parent=parent.name,
            recognizers=parent.recognizers + gr.recognizers + (exact(opaque),),
            rules=parent.rules,
            components=parent.components | gr.components | {f"SP{n}"},
        )
        return self._add(d)

    _TAGS = {
        "NEC": ("rule", "NEC"),
        "CONEC": ("rule", "CONEC"),
        "ReflectionRule": ("rule", "ReflectionRule"),
        "NonTriv": ("axioms", {"NonTriviality": NON_TRIVIALITY}),
        "T_CM": ("family", modal_schema_family("T_CM"), "T_CM"),
        "4_CM": ("family", modal_schema_family("Four_CM"), "Four_CM"),
        "Lob_CM": ("family", modal_schema_family("Lob_CM"), "Lob_CM"),
        "MR": ("family", modal_schema_family("MultiverseReflection"),
               "MultiverseReflection"),
        "S1Abs": ("family", sigma1_abs_family, "Sigma1Abs"),
        "ArithAbs": ("family", arith_abs_family, "ArithAbs"),
        "ArithComp": ("axioms",
                      {"Arithmetic_Compositionality": ARITH_COMP}),
        "SelfPerception": ("axioms", SELF_PERCEPTION),
        "WM": ("axioms", {"WM": WM_AXIOMS["WM"]}),
        "WMweak": ("axioms", {"WM_weak": WM_AXIOMS["WM_weak"]}),
        "WMstrong": ("axioms", {"WM_strong": WM_AXIOMS["WM_strong"]}),
    }

    def _compose(self, name: str) -> TheoryDescriptor:
        parts = name.split("+")
        base = self.get(parts[0])
        recognizers = list(base.recognizers)
        rules = set(base.rules)
        families = set(base.families)
        components = set(base.components)
        for tag in parts[1:]:
            if tag not in self._TAGS:
                raise TheoryError(f"unknown theory tag {tag!r} in {name!r}")
            spec = self._TAGS[tag]
            components.add(tag)
            if spec[0] == "rule":
                rules.add(spec[1])
            elif spec[0] == "axioms":
                recognizers.append(exact(spec[1]))
                families.add(tag)
            else:
                recognizers.append(spec[1])
                families.add(spec[2])
        nontriv_gated = "NonTriv" in parts[1:] or "NonTriviality" in families
        if nontriv_gated:
            recognizers.append(nontriv_box_family)
        d = TheoryDescriptor(
            name=name, lang=base.lang, parent=base.name,
            recognizers=tuple(recognizers),
            rules=frozenset(rules),
            components=frozenset(components),
            families=frozenset(families),
            multiverse_over=base.multiverse_over,
            ext_base=base.ext_base, ext_axioms=base.ext_axioms,
            hierarchy=base.hierarchy, hier_base=base.hier_base,
        )
        return self._add(d)

    # -- coverage -------------------------------------------------------------

    def coverage(self) -> dict:
        """Label classes the registry recognizes, for the totality check."""
        out = {
            "ZF-core": "Extensionality/Pairing/Union/Powerset/Infinity/Foundation",
            "Sep(L)": "separation schema over the base language",
            "Sep(LUM)": "separation schema over the Uni/Mod language",
            "Sep(LSat)": "separation schema over the Sat language",
            "Rep(L)": "replacement schema over the base language",
            "Rep(LUM)": "replacement schema over the Uni/Mod language",
            "Rep(LSat)": "replacement schema over the Sat language",
            "CM_eq": "compositional equality", "CM_neg": "compositional negation",
            "CM_and": "compositional conjunction", "CM_all": "compositional universal",
            "CM_or": "derived disjunction", "CM_imp": "derived implication",
            "CM_iff": "derived biconditional", "CM_ex": "derived existential",
            "CM_bot": "falsum clause", "CM_top": "verum clause",
            "CT_eq": "Tarski equality", "CT_in": "Tarski membership",
            "CT_neg": "Tarski negation", "CT_and": "Tarski conjunction",
            "CT_all": "Tarski universal",
            "Multiverse_ZF": "every universe satisfies ZF",
            "Multiverse(CompCM)": "self-referential multiverse axiom",
            "Completeness(CompCM)": "self-referential completeness axiom",
            "NonTriviality": "there is a universe",
            "MultiverseReflection": "box sigma -> sigma for base sentences",
            "Iso_self": "background universe isomorphic to an element",
            "Uni_self": "the isomorph is a universe",
            "self_crsm": "opaque recursive-saturation tag",
            "self_models": "opaque internal-theory tag",
            "K_CM": "via CMbox_imp", "D_CM": "box to diamond",
            "T_CM": "box sigma -> sigma, untyped",
            "Four_CM": "box sigma -> box box sigma",
            "Lob_CM": "Lob schema for box",
            "CMbox_imp": "box distributes over implication",
            "CMbox_iff": "box respects biconditionals",
            "CMbox_and": "box splits conjunction",
            "CMbox_neg": "boxed negation excludes box",
            "CMbox_bot": "boxed falsum is false",
            "CMbox_taut": "boxed propositional tautologies",
            "box_inst": "boxed universal instantiation",
            "box_genv": "boxed vacuous generalization",
            "HB_D2": "provability distributes over implication",
            "HB_D3": "provability of provability",
            "GR-axiom": "global reflection over the previous level",
            "Con-instance": "iterated consistency statements",
            "R-instance": "iterated reflection instances",
            "Sigma1_Absoluteness": "Sigma_1 arithmetic absoluteness",
            "Arithmetic_Absoluteness": "full arithmetic absoluteness",
            "Arithmetic_Compositionality": "Mod commutes with N-bounded forall",
            "abs_atom": "absoluteness of arithmetic atoms",
            "abs_neg-step": "absoluteness negation step",
            "abs_and-step": "absoluteness conjunction step",
            "abs_forall-step": "absoluteness bounded-forall step",
            "CT_neg-step": "Tarski biconditional negation step",
            "CT_and-step": "Tarski biconditional conjunction step",
            "CT_all-step": "Tarski biconditional universal step",
            "WM": "well-foundedness mirage, untyped",
            "WM_weak": "well-foundedness mirage, weak",
            "WM_strong": "well-foundedness mirage, strong",
            "Multiverse-instance": "boxed axiom of a covered theory",
            "axiomhood": "representability of recognized axiom sets",
            "soundness_con": "soundness-lemma consistency transfer",
            "gr_transfer": "soundness-lemma global reflection transfer",
            "multiverse_step": "finite multiverse extension step",
            "arith_reflection_transfer": "absoluteness reflection transfer",
            "R-step-box": "reflection multiverse induction step",
            "R-step-arith": "absoluteness multiverse induction step",
        }
        return out


REGISTRY = Registry()


def get_theory(name: str) -> TheoryDescriptor:
    return REGISTRY.get(name)


def is_axiom(thy_name: str, sigma: Formula) -> Optional[str]:
    return REGISTRY.is_axiom(thy_name, sigma)


def reflection_instance(sym: ProvabilitySymbol, phi: Formula) -> Formula:
    if not is_sentence(phi):
        raise TheoryError("reflection instances require a sentence")
    return Imp(Atom(sym.symbol, (Quote(phi),)), phi)


def global_reflection_axiom(sym: ProvabilitySymbol,
                            lang: LanguageTag = LANG_LSAT) -> Formula:
    if not lang.has_relation("Sat"):
        raise TheoryError(
            f"global reflection needs Sat in the target language, "
            f"got {lang.name}")
    return global_reflection_formula(sym.theory_ref)


def build_con_hierarchy(n: int) -> TheoryDescriptor:
    if n < 0:
        raise TheoryError("hierarchy level must be a natural number")
    return REGISTRY.get(f"Con{n}") if n else REGISTRY.get("ZF")


def build_r_hierarchy(n: int) -> TheoryDescriptor:
    return REGISTRY.get(f"R{n}") if n else REGISTRY.get("ZF")


def build_gr_hierarchy(n: int) -> TheoryDescriptor:
    return REGISTRY.get(f"GR{n}")


def build_sp_hierarchy(n: int) -> TheoryDescriptor:
    return REGISTRY.get(f"SP{n}")
