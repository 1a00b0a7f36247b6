"""Simplification tactics.

Four solution-preserving problem rewrites: ``tactic_simplify`` (folding,
expansion, function application), ``tactic_gaussian_elim`` (equality
substitution), ``tactic_elim_term_ite`` (ite decomposition via fresh
variables) and ``tactic_qe`` (partial linear quantifier elimination),
plus ``simplify_level0`` which chains random tactics.  Every tactic
returns a MutationRecord that replays bit-exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .ast import (And, BinOp, BoolConst, Compare, Const, ConstraintIte,
                  Domain, FuncApp, Goal, Implies, MathMorphError, NamedConst,
                  Not, Or, Pow, Problem, Quantifier, TermIte, Var,
                  _FreshNames, children, conjuncts, free_variables, make_and,
                  negate, node_count, substitute, substitute_in_problem)
from .algebra import (add_e, div_e, fold_constants, fold_constraint, lin,
                      mul_e, scale_e, solve_for, sub_e)
from .funcs import REGISTRY, reduce_app


class TacticError(MathMorphError):
    pass


@dataclass
class MutationRecord:
    tactic: str
    site: tuple = ()
    parameters: dict = field(default_factory=dict)
    seed: Optional[int] = None

    @property
    def empty(self) -> bool:
        return not self.parameters and not self.site


# ---------------------------------------------------------------------------
# tactic_simplify
# ---------------------------------------------------------------------------

MAX_PASSES = 100
EXPAND_MAX_EXPONENT = 4


def _strip(e):
    """Drop source lexemes so structural comparison is purely on value."""
    from .printer import _strip_lexemes
    return _strip_lexemes(e)


def _flatten_sum(e, sign=1):
    """Flatten nested +/- into [(sign, term)]."""
    if isinstance(e, BinOp) and e.op == "+":
        return _flatten_sum(e.left, sign) + _flatten_sum(e.right, sign)
    if isinstance(e, BinOp) and e.op == "-":
        return _flatten_sum(e.left, sign) + _flatten_sum(e.right, -sign)
    return [(sign, e)]


def _rebuild_sum(terms):
    if not terms:
        return Const(Fraction(0))
    sign, first = terms[0]
    acc = first if sign > 0 else sub_e(Const(Fraction(0)), first)
    for sign, t in terms[1:]:
        acc = add_e(acc, t) if sign > 0 else sub_e(acc, t)
    return acc


def _cancel_terms(e):
    """y + x - x -> y: remove structurally equal terms of opposite sign."""
    terms = _flatten_sum(e)
    if len(terms) < 2:
        return e
    keys = [_strip(t) for _, t in terms]
    dead = [False] * len(terms)
    for i in range(len(terms)):
        if dead[i]:
            continue
        for j in range(i + 1, len(terms)):
            if dead[j]:
                continue
            if keys[i] == keys[j] and terms[i][0] == -terms[j][0]:
                dead[i] = dead[j] = True
                break
    if not any(dead):
        return e
    kept = [t for t, d in zip(terms, dead) if not d]
    return _rebuild_sum(kept)


def _multi_poly(e) -> Optional[Dict[tuple, Fraction]]:
    """Multivariate polynomial as {((var, power), ...): coeff}; None when
    the expression is not polynomial."""
    if isinstance(e, Const):
        return {(): e.value} if e.value else {}
    if isinstance(e, Var):
        return {((e.name, 1),): Fraction(1)}
    if isinstance(e, BinOp):
        a = _multi_poly(e.left)
        b = _multi_poly(e.right)
        if a is None or b is None:
            return None
        if e.op in ("+", "-"):
            out = dict(a)
            for m, c in b.items():
                out[m] = out.get(m, Fraction(0)) + (c if e.op == "+" else -c)
            return {m: c for m, c in out.items() if c}
        if e.op == "*":
            out = {}
            for m1, c1 in a.items():
                for m2, c2 in b.items():
                    powers = dict(m1)
                    for v, k in m2:
                        powers[v] = powers.get(v, 0) + k
                    key = tuple(sorted(powers.items()))
                    out[key] = out.get(key, Fraction(0)) + c1 * c2
            return {m: c for m, c in out.items() if c}
        return None
    if isinstance(e, Pow):
        if not (isinstance(e.exponent, Const)
                and e.exponent.value.denominator == 1
                and 0 <= e.exponent.value <= EXPAND_MAX_EXPONENT):
            return None
        base = _multi_poly(e.base)
        if base is None:
            return None
        acc = {(): Fraction(1)}
        for _ in range(int(e.exponent.value)):
            nxt = {}
            for m1, c1 in acc.items():
                for m2, c2 in base.items():
                    powers = dict(m1)
                    for v, k in m2:
                        powers[v] = powers.get(v, 0) + k
                    key = tuple(sorted(powers.items()))
                    nxt[key] = nxt.get(key, Fraction(0)) + c1 * c2
            acc = {m: c for m, c in nxt.items() if c}
        return acc
    return None


def _monomial_expr(monomial, coeff):
    factors = []
    for v, k in monomial:
        factors.append(Var(v) if k == 1
                       else Pow(Var(v), Const(Fraction(k))))
    if not factors:
        return Const(coeff)
    prod = factors[0]
    for f in factors[1:]:
        prod = mul_e(prod, f)
    return scale_e(coeff, prod)


def _poly_expr(poly):
    """Canonical sum: total degree descending, then lexicographic."""
    def degree(m):
        return sum(k for _, k in m)

    items = sorted(poly.items(), key=lambda it: (-degree(it[0]), it[0]))
    if not items:
        return Const(Fraction(0))
    terms = []
    for m, c in items:
        if c < 0:
            terms.append((-1, _monomial_expr(m, -c)))
        else:
            terms.append((1, _monomial_expr(m, c)))
    return _rebuild_sum(terms)


def _expand_pow(e: Pow):
    """(x+1)^2 -> x^2 + 2x + 1 for small integer exponents of sums."""
    if not (isinstance(e.exponent, Const)
            and e.exponent.value.denominator == 1
            and 2 <= e.exponent.value <= EXPAND_MAX_EXPONENT):
        return e
    if not (isinstance(e.base, BinOp) and e.base.op in ("+", "-")):
        return e
    poly = _multi_poly(e)
    if poly is None:
        return e
    return _poly_expr(poly)


class _SimplifyPass:
    def __init__(self, bindings, rng=None, site_prob=1.0):
        self.bindings = bindings
        self.rng = rng
        self.site_prob = site_prob

    def _fire(self) -> bool:
        if self.site_prob >= 1.0 or self.rng is None:
            return True
        return self.rng.random() < self.site_prob

    def expr(self, e):
        if isinstance(e, (Const, NamedConst, Var)):
            return e
        if isinstance(e, BinOp):
            out = BinOp(e.op, self.expr(e.left), self.expr(e.right))
            if self._fire():
                folded = fold_constants(out)
                if isinstance(folded, BinOp):
                    folded = _cancel_terms(folded)
                return folded
            return out
        if isinstance(e, Pow):
            out = Pow(self.expr(e.base), self.expr(e.exponent))
            if self._fire():
                expanded = _expand_pow(out)
                return fold_constants(expanded)
            return out
        if isinstance(e, FuncApp):
            args = tuple(self.expr(a) for a in e.args)
            if self._fire():
                args = tuple(self._apply_bindings(a) for a in args)
            out = FuncApp(e.name, args)
            if self._fire():
                out = reduce_app(out)
                out = fold_constants(out)
            return out
        if isinstance(e, TermIte):
            return TermIte(self.constraint(e.cond), self.expr(e.then),
                           self.expr(e.els))
        raise TypeError(f"not an expression: {e!r}")

    def _apply_bindings(self, e):
        for name, const in self.bindings.items():
            e = substitute(e, name, const)
        return e

    def constraint(self, c):
        if isinstance(c, BoolConst):
            return c
        if isinstance(c, Compare):
            return Compare(self.expr(c.lhs), c.rel, self.expr(c.rhs))
        if isinstance(c, And):
            return And(tuple(self.constraint(i) for i in c.items))
        if isinstance(c, Or):
            return Or(tuple(self.constraint(i) for i in c.items))
        if isinstance(c, Not):
            return Not(self.constraint(c.child))
        if isinstance(c, Implies):
            return Implies(self.constraint(c.antecedent),
                           self.constraint(c.consequent))
        if isinstance(c, ConstraintIte):
            return ConstraintIte(self.constraint(c.cond),
                                 self.constraint(c.then),
                                 self.constraint(c.els))
        if isinstance(c, Quantifier):
            return Quantifier(c.kind, c.bindings, self.constraint(c.body))
        raise TypeError(f"not a constraint: {c!r}")


def _constant_bindings(p: Problem) -> Dict[str, Const]:
    """var -> Const from defining equalities (= x c) anywhere in p."""
    out = {}
    for c in p.constraints:
        for atom in conjuncts(c):
            if not (isinstance(atom, Compare) and atom.rel == "="):
                continue
            for a, b in ((atom.lhs, atom.rhs), (atom.rhs, atom.lhs)):
                if isinstance(a, Var) and isinstance(b, Const):
                    out.setdefault(a.name, Const(b.value))
    return out


def tactic_simplify(p: Problem, rng=None,
                    site_prob: float = 1.0) -> Tuple[Problem, MutationRecord]:
    """Fold constants and variables, expand small integer powers of sums,
    apply interpreted-function reductions, and push known constant
    bindings into function arguments.  Runs to fixpoint unless a partial
    ``site_prob`` < 1 is given."""
    passes = 0
    current = p
    limit = MAX_PASSES if site_prob >= 1.0 else 1
    while passes < limit:
        bindings = _constant_bindings(current)
        walker = _SimplifyPass(bindings, rng, site_prob)
        new_constraints = tuple(walker.constraint(c)
                                for c in current.constraints)
        new_targets = tuple(walker.expr(t) for t in current.goal.targets)
        candidate = Problem(current.declarations, new_constraints,
                            Goal(current.goal.kind, new_targets),
                            current.recursive_defs)
        passes += 1
        if candidate == current:
            passes -= 1
            break
        current = candidate
    params = {"passes": passes} if passes else {}
    if site_prob < 1.0:
        params["site_prob"] = site_prob
    return current, MutationRecord("simplify", (), params)


# ---------------------------------------------------------------------------
# tactic_gaussian_elim
# ---------------------------------------------------------------------------

def _gaussian_candidates(p: Problem, allow_goal_targets: bool):
    goal_vars = set()
    for t in p.goal.targets:
        goal_vars |= free_variables(t)
    declared = {n for n, _ in p.declarations}
    out = []
    for i, c in enumerate(p.constraints):
        if not (isinstance(c, Compare) and c.rel == "="):
            continue
        vars_here = []
        for v in sorted(free_variables(c)):
            if v not in declared:
                continue
            if not allow_goal_targets and v in goal_vars:
                continue
            sol = solve_for(c.lhs, c.rhs, v)
            if sol is None or v in free_variables(sol):
                continue
            vars_here.append((v, sol))
        if vars_here:
            out.append((i, vars_here))
    return out


def tactic_gaussian_elim(p: Problem, rng,
                         allow_goal_retarget: bool = False
                         ) -> Tuple[Problem, MutationRecord]:
    """Pick a random equality solvable for a variable, substitute its
    solution everywhere and drop the variable.

    Goal-target variables are only eliminated with ``allow_goal_retarget``,
    in which case the goal is retargeted to the variables of the defining
    expression (the goal value changes accordingly)."""
    candidates = _gaussian_candidates(p, allow_goal_retarget)
    if not candidates:
        raise TacticError("no eliminable equality")
    idx, vars_here = candidates[rng.randrange(len(candidates))]
    v, sol = vars_here[rng.randrange(len(vars_here))]
    goal_vars = set()
    for t in p.goal.targets:
        goal_vars |= free_variables(t)
    remaining = tuple(c for j, c in enumerate(p.constraints) if j != idx)
    stripped = Problem(p.declarations, remaining, p.goal, p.recursive_defs)
    out = substitute_in_problem(stripped, v, sol, drop_declaration=True)
    retargeted = False
    if v in goal_vars:
        new_targets = tuple(Var(n) for n in sorted(free_variables(sol)))
        out = Problem(out.declarations, out.constraints,
                      Goal(out.goal.kind, new_targets), out.recursive_defs)
        retargeted = True
    out = Problem(out.declarations,
                  tuple(fold_constraint(c) for c in out.constraints),
                  out.goal, out.recursive_defs)
    from .printer import expr_to_sexpr
    record = MutationRecord("gaussian_elim", (idx,),
                            {"variable": v,
                             "definition": expr_to_sexpr(sol),
                             "retargeted": retargeted})
    return out, record


# ---------------------------------------------------------------------------
# tactic_elim_term_ite
# ---------------------------------------------------------------------------

def _find_ite(node, path=()):
    """Innermost-first TermIte search; returns (path, node) or None."""
    for i, ch in enumerate(children(node)):
        found = _find_ite(ch, path + (i,))
        if found is not None:
            return found
    if isinstance(node, TermIte):
        return path, node
    return None


def _replace_at(node, path, replacement):
    if not path:
        return replacement
    kids = list(children(node))
    kids[path[0]] = _replace_at(kids[path[0]], path[1:], replacement)
    return _rebuild(node, kids)


def _rebuild(node, kids):
    if isinstance(node, BinOp):
        return BinOp(node.op, *kids)
    if isinstance(node, Pow):
        return Pow(*kids)
    if isinstance(node, FuncApp):
        return FuncApp(node.name, tuple(kids))
    if isinstance(node, TermIte):
        return TermIte(*kids)
    if isinstance(node, Compare):
        return Compare(kids[0], node.rel, kids[1])
    if isinstance(node, And):
        return And(tuple(kids))
    if isinstance(node, Or):
        return Or(tuple(kids))
    if isinstance(node, Not):
        return Not(kids[0])
    if isinstance(node, Implies):
        return Implies(*kids)
    if isinstance(node, ConstraintIte):
        return ConstraintIte(*kids)
    if isinstance(node, Quantifier):
        return Quantifier(node.kind, node.bindings, kids[0])
    raise TypeError(f"cannot rebuild {node!r}")


def tactic_elim_term_ite(p: Problem) -> Tuple[Problem, MutationRecord]:
    """Replace every if-then-else term by a fresh variable constrained by
    an implication pair; innermost occurrences first."""
    fresh = _FreshNames([n for n, _ in p.declarations])
    current = p
    introduced = []
    while True:
        hit = None
        for i, c in enumerate(current.constraints):
            found = _find_ite(c)
            if found is not None:
                hit = (i, found[0], found[1])
                break
        if hit is None:
            break
        i, path, ite = hit
        k = fresh.fresh("k")
        rewritten = _replace_at(current.constraints[i], path, Var(k))
        side = (Implies(ite.cond, Compare(Var(k), "=", ite.then)),
                Implies(negate(ite.cond), Compare(Var(k), "=", ite.els)))
        constraints = (current.constraints[:i] + (rewritten,)
                       + current.constraints[i + 1:] + side)
        decls = current.declarations + ((k, Domain.REAL),)
        current = Problem(decls, constraints, current.goal,
                          current.recursive_defs)
        introduced.append(k)
    params = {"fresh": introduced} if introduced else {}
    return current, MutationRecord("elim_term_ite", (), params)


# ---------------------------------------------------------------------------
# tactic_qe
# ---------------------------------------------------------------------------

QE_INT_ENUM_CAP = 200


def _normalize_compare(c: Compare) -> Compare:
    """(x - 2 > 0) -> (x > 2) and similar single-step normalizations."""
    lhs, rhs = c.lhs, c.rhs
    if isinstance(rhs, Const) and rhs.value == 0 and isinstance(lhs, BinOp) \
            and lhs.op == "-" and isinstance(lhs.right, Const):
        return Compare(lhs.left, c.rel, lhs.right)
    if isinstance(rhs, Const) and rhs.value == 0 and isinstance(lhs, BinOp) \
            and lhs.op == "+" and isinstance(lhs.right, Const):
        return Compare(lhs.left, c.rel, Const(-lhs.right.value))
    return c


def _trivially_true(c) -> bool:
    if isinstance(c, BoolConst):
        return c.value
    if isinstance(c, Compare) and c.rel in ("=", "<=", ">="):
        return _strip(c.lhs) == _strip(c.rhs)
    if isinstance(c, And):
        return all(_trivially_true(i) for i in c.items)
    return False


def _qe_exists(q: Quantifier):
    """Eliminate one existential binding; None when not eligible."""
    (name, dom), *rest = q.bindings
    body = q.body if not rest else Quantifier("exists", tuple(rest), q.body)
    if rest:
        inner = _qe_exists(body)
        if inner is None:
            return None
        body = inner
    guards = []
    lb = dom.lower_bound
    if lb is not None:
        guards.append(Compare(Var(name), ">=", Const(Fraction(lb))))
    atoms = guards + conjuncts(body)
    if any(isinstance(a, (Quantifier, Or, Not, Implies, ConstraintIte))
           for a in atoms):
        return None
    # try defining-equality substitution first
    for a in atoms:
        if not (isinstance(a, Compare) and a.rel == "="):
            continue
        sol = solve_for(a.lhs, a.rhs, name)
        if sol is None or name in free_variables(sol):
            continue
        kept = [substitute(other, name, sol) for other in atoms if other is not a]
        kept = [_normalize_compare(fold_constraint(k)) for k in kept]
        kept = [k for k in kept if not _trivially_true(k)]
        return make_and(kept) if kept else BoolConst(True)
    if dom.is_integer:
        return _qe_int_enum(name, dom, atoms)
    return _qe_fm(name, atoms)


def _qe_fm(name, atoms):
    """Fourier-Motzkin projection of a real existential variable."""
    lowers, uppers, others = [], [], []
    for a in atoms:
        if not isinstance(a, Compare):
            return None
        if name not in free_variables(a):
            others.append(a)
            continue
        l = lin(a.lhs, name)
        r = lin(a.rhs, name)
        if l is None or r is None:
            return None
        coeff = l[0] - r[0]
        rest = fold_constants(sub_e(r[1], l[1]))   # a*name rel rest
        if coeff == 0 or a.rel in ("=", "!="):
            return None
        rel = a.rel
        if coeff < 0:
            rel = {">=": "<=", "<=": ">=", ">": "<", "<": ">"}[rel]
        bound = fold_constants(div_e(rest, Const(coeff)))
        if rel in ("<=", "<"):
            uppers.append((bound, rel == "<"))
        else:
            lowers.append((bound, rel == ">"))
    out = list(others)
    for lo, ls in lowers:
        for hi, hs in uppers:
            rel = "<" if (ls or hs) else "<="
            out.append(_normalize_compare(
                fold_constraint(Compare(lo, rel, hi))))
    out = [c for c in out if not _trivially_true(c)]
    return make_and(out) if out else BoolConst(True)


def _qe_int_enum(name, dom, atoms):
    """Existential integer variable via bounded enumeration."""
    lo = hi = None
    for a in atoms:
        if name not in free_variables(a):
            continue
        if not isinstance(a, Compare):
            return None
        l = lin(a.lhs, name)
        r = lin(a.rhs, name)
        if l is None or r is None:
            return None
        coeff = l[0] - r[0]
        rest = fold_constants(sub_e(r[1], l[1]))
        if not isinstance(rest, Const) or coeff == 0:
            return None
        import math
        bound = rest.value / coeff
        rel = a.rel
        if coeff < 0:
            rel = {">=": "<=", "<=": ">=", ">": "<", "<": ">", "=": "=",
                   "!=": "!="}[rel]
        if rel in ("<=", "<"):
            b = math.floor(bound) if rel == "<=" or bound != int(bound) \
                else int(bound) - 1
            hi = b if hi is None else min(hi, b)
        elif rel in (">=", ">"):
            b = math.ceil(bound) if rel == ">=" or bound != int(bound) \
                else int(bound) + 1
            lo = b if lo is None else max(lo, b)
        elif rel == "=":
            if bound.denominator != 1:
                return BoolConst(False)
            lo = max(lo, int(bound)) if lo is not None else int(bound)
            hi = min(hi, int(bound)) if hi is not None else int(bound)
        else:
            return None
    if lo is None or hi is None or hi - lo > QE_INT_ENUM_CAP:
        return None
    disjuncts = []
    for val in range(lo, hi + 1):
        kept = [fold_constraint(substitute(a, name, Const(Fraction(val))))
                for a in atoms]
        kept = [k for k in kept if not _trivially_true(k)]
        if any(isinstance(k, BoolConst) and not k.value for k in kept):
            continue
        disjuncts.append(make_and(kept) if kept else BoolConst(True))
    if not disjuncts:
        return BoolConst(False)
    if any(isinstance(d, BoolConst) and d.value for d in disjuncts):
        return BoolConst(True)
    return disjuncts[0] if len(disjuncts) == 1 else Or(tuple(disjuncts))


def tactic_qe(p: Problem) -> Tuple[Problem, MutationRecord]:
    """Eliminate top-level quantifiers where the bound variable occurs
    linearly; ineligible quantifiers are left in place and flagged."""
    new_constraints = []
    eliminated, flagged = [], []
    for i, c in enumerate(p.constraints):
        if not isinstance(c, Quantifier):
            new_constraints.append(c)
            continue
        result = None
        if c.kind == "exists":
            result = _qe_exists(c)
        else:
            # forall x. phi: valid iff exists x. not(phi) is unsat
            body = fold_constraint(c.body)
            if _trivially_true(body):
                result = BoolConst(True)
            else:
                neg = _qe_exists(Quantifier("exists", c.bindings,
                                            negate(body)))
                if isinstance(neg, BoolConst):
                    result = BoolConst(not neg.value)
        if result is None:
            flagged.append(i)
            new_constraints.append(c)
            continue
        eliminated.append(i)
        if not (isinstance(result, BoolConst) and result.value):
            new_constraints.append(result)
    params = {}
    if eliminated:
        params["eliminated"] = eliminated
    if flagged:
        params["flagged"] = flagged
    return (Problem(p.declarations, tuple(new_constraints), p.goal,
                    p.recursive_defs),
            MutationRecord("qe", (), params))


# ---------------------------------------------------------------------------
# level-0 driver
# ---------------------------------------------------------------------------

TACTIC_NAMES = ("simplify", "gaussian_elim", "elim_term_ite", "qe")
DEFAULT_ROUNDS = 2
MAX_RESAMPLES = 10


def simplify_level0(p: Problem, rng, rounds: int = DEFAULT_ROUNDS
                    ) -> Tuple[Problem, List[MutationRecord]]:
    """Apply ``rounds`` random applicable tactics; inapplicable draws are
    resampled up to 10 times, then the chain stops early."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    current = p
    records: List[MutationRecord] = []
    for _ in range(rounds):
        applied = False
        for _ in range(MAX_RESAMPLES):
            name = TACTIC_NAMES[rng.randrange(len(TACTIC_NAMES))]
            try:
                if name == "simplify":
                    prob = 0.5 + rng.random() * 0.5
                    out, rec = tactic_simplify(current, rng, site_prob=prob)
                elif name == "gaussian_elim":
                    out, rec = tactic_gaussian_elim(current, rng)
                elif name == "elim_term_ite":
                    out, rec = tactic_elim_term_ite(current)
                else:
                    out, rec = tactic_qe(current)
            except TacticError:
                continue
            if out == current:
                continue
            current = out
            records.append(rec)
            applied = True
            break
        if not applied:
            break
    return current, records
