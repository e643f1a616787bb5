"""Propositional skeletons: tautology checking over sentence-atoms.

A formula's skeleton treats every maximal non-propositional subformula
(atoms and quantified formulas) as an opaque boolean variable, identified
up to alpha-equivalence of the macro-free form.
"""

from __future__ import annotations

from itertools import product

from .syntax import (
    And, Atom, Bot, Exists, Forall, Formula, Iff, Imp, MacroF, Not, Or, Top,
    expand_abbreviation, expanded_key,
)


class PropError(Exception):
    pass


MAX_ATOMS = 20


def skeleton(phi: Formula, table: dict):
    """Nested tuple skeleton; `table` maps alpha keys to variable indices."""
    phi = expand_abbreviation(phi) if isinstance(phi, MacroF) else phi
    if isinstance(phi, Bot):
        return False
    if isinstance(phi, Top):
        return True
    if isinstance(phi, Not):
        return ("not", skeleton(phi.body, table))
    if isinstance(phi, (And, Or, Imp, Iff)):
        tag = {And: "and", Or: "or", Imp: "imp", Iff: "iff"}[type(phi)]
        return (tag, skeleton(phi.left, table), skeleton(phi.right, table))
    if isinstance(phi, (Atom, Forall, Exists, MacroF)):
        k = expanded_key(phi)
        if k not in table:
            table[k] = len(table)
        return ("atom", table[k])
    raise PropError(f"not a formula: {phi!r}")


def _eval(sk, row) -> bool:
    if sk is True or sk is False:
        return sk
    tag = sk[0]
    if tag == "atom":
        return row[sk[1]]
    if tag == "not":
        return not _eval(sk[1], row)
    a = _eval(sk[1], row)
    b = _eval(sk[2], row)
    if tag == "and":
        return a and b
    if tag == "or":
        return a or b
    if tag == "imp":
        return (not a) or b
    return a == b


def is_tautology(phi: Formula) -> bool:
    table: dict = {}
    sk = skeleton(phi, table)
    n = len(table)
    if n > MAX_ATOMS:
        raise PropError(f"too many distinct atoms for truth table: {n}")
    return all(_eval(sk, row) for row in product((False, True), repeat=n))


def consequence(premises, conclusion) -> bool:
    """premises |= conclusion, propositionally."""
    table: dict = {}
    sks = [skeleton(p, table) for p in premises]
    sc = skeleton(conclusion, table)
    n = len(table)
    if n > MAX_ATOMS:
        raise PropError(f"too many distinct atoms for truth table: {n}")
    for row in product((False, True), repeat=n):
        if all(_eval(s, row) for s in sks) and not _eval(sc, row):
            return False
    return True
