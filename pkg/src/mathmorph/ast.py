"""Typed AST for the supported SMT-LIB fragment.

Expressions, constraints, goals and whole problems are immutable
dataclasses.  Rational constants are exact (`fractions.Fraction`), so no
transformation ever depends on floating-point rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Iterator, Optional, Union


class MathMorphError(Exception):
    """Base class for all package errors."""


class SortError(MathMorphError):
    """Raised when an operation would mix incompatible sorts."""


class ValidationError(MathMorphError):
    """Raised when a Problem violates a structural invariant."""


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------

class Domain(Enum):
    NAT = "N"        # nonnegative integers, Int + (>= v 0)
    POS = "N+"       # positive integers, Int + (>= v 1)
    INT = "Z"        # plain Int, no side constraint
    REAL = "R"
    COMPLEX = "C"    # parse-level only; solving returns unknown

    @property
    def smt_sort(self) -> str:
        if self in (Domain.NAT, Domain.POS, Domain.INT):
            return "Int"
        if self is Domain.REAL:
            return "Real"
        return "Complex"

    @property
    def is_integer(self) -> bool:
        return self in (Domain.NAT, Domain.POS, Domain.INT)

    @property
    def lower_bound(self) -> Optional[int]:
        """Side-constraint lower bound implied by the domain, if any."""
        if self is Domain.NAT:
            return 0
        if self is Domain.POS:
            return 1
        return None


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

BINARY_OPS = ("+", "-", "*", "/")


@dataclass(frozen=True)
class Const:
    """Exact rational constant.

    ``lexeme`` remembers the literal as it appeared in source (e.g. "50.0")
    so printing can reproduce the original text; it never takes part in
    structural equality.
    """
    value: Fraction
    lexeme: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class NamedConst:
    """A named mathematical constant: ``pi`` or ``e``."""
    name: str

    def __post_init__(self):
        if self.name not in ("pi", "e"):
            raise ValidationError(f"unknown named constant: {self.name}")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValidationError(f"unknown operator: {self.op}")


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    exponent: "Expression"


@dataclass(frozen=True)
class FuncApp:
    name: str
    args: tuple


@dataclass(frozen=True)
class TermIte:
    """Term-level if-then-else: condition is a Constraint, branches are
    Expressions."""
    cond: "Constraint"
    then: "Expression"
    els: "Expression"


Expression = Union[Const, NamedConst, Var, BinOp, Pow, FuncApp, TermIte]


# ---------------------------------------------------------------------------
# Constraints
# ---------------------------------------------------------------------------

RELATIONS = (">=", "<=", ">", "<", "=", "!=")

_NEGATED_REL = {">=": "<", "<=": ">", ">": "<=", "<": ">=", "=": "!=", "!=": "="}


@dataclass(frozen=True)
class Compare:
    lhs: Expression
    rel: str
    rhs: Expression

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise ValidationError(f"unknown relation: {self.rel}")


@dataclass(frozen=True)
class And:
    items: tuple

    def __post_init__(self):
        if len(self.items) < 2:
            raise ValidationError("And needs at least two children")


@dataclass(frozen=True)
class Or:
    items: tuple

    def __post_init__(self):
        if len(self.items) < 2:
            raise ValidationError("Or needs at least two children")


@dataclass(frozen=True)
class Not:
    child: "Constraint"


@dataclass(frozen=True)
class Implies:
    antecedent: "Constraint"
    consequent: "Constraint"


@dataclass(frozen=True)
class ConstraintIte:
    cond: "Constraint"
    then: "Constraint"
    els: "Constraint"


@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class Quantifier:
    kind: str                      # "forall" | "exists"
    bindings: tuple                # ((name, Domain), ...)
    body: "Constraint"

    def __post_init__(self):
        if self.kind not in ("forall", "exists"):
            raise ValidationError(f"unknown quantifier: {self.kind}")


Constraint = Union[Compare, And, Or, Not, Implies, ConstraintIte, BoolConst,
                   Quantifier]


def Forall(bindings, body) -> Quantifier:
    return Quantifier("forall", tuple(bindings), body)


def Exists(bindings, body) -> Quantifier:
    return Quantifier("exists", tuple(bindings), body)


# ---------------------------------------------------------------------------
# Goal / Problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Goal:
    kind: str                      # "minimize" | "maximize" | "solve"
    targets: tuple = ()            # Expressions whose values are requested

    def __post_init__(self):
        if self.kind not in ("minimize", "maximize", "solve"):
            raise ValidationError(f"unknown goal kind: {self.kind}")
        if self.kind in ("minimize", "maximize") and len(self.targets) != 1:
            raise ValidationError(f"{self.kind} goal needs exactly one target")


@dataclass(frozen=True)
class Problem:
    declarations: tuple            # ((name, Domain), ...) in source order
    constraints: tuple             # (Constraint, ...)
    goal: Goal = Goal("solve", ())
    recursive_defs: tuple = ()     # raw define-fun-rec texts, forwarded verbatim

    def domain_of(self, name: str) -> Domain:
        for n, d in self.declarations:
            if n == name:
                return d
        raise KeyError(name)

    def declared_names(self) -> tuple:
        return tuple(n for n, _ in self.declarations)

    def with_constraints(self, constraints) -> "Problem":
        return replace(self, constraints=tuple(constraints))


# ---------------------------------------------------------------------------
# Structural utilities
# ---------------------------------------------------------------------------

def children(node) -> Iterator:
    """Direct children of an AST node (expressions and constraints)."""
    if isinstance(node, (Const, NamedConst, Var, BoolConst)):
        return
    if isinstance(node, BinOp):
        yield node.left
        yield node.right
    elif isinstance(node, Pow):
        yield node.base
        yield node.exponent
    elif isinstance(node, FuncApp):
        yield from node.args
    elif isinstance(node, TermIte):
        yield node.cond
        yield node.then
        yield node.els
    elif isinstance(node, Compare):
        yield node.lhs
        yield node.rhs
    elif isinstance(node, (And, Or)):
        yield from node.items
    elif isinstance(node, Not):
        yield node.child
    elif isinstance(node, Implies):
        yield node.antecedent
        yield node.consequent
    elif isinstance(node, ConstraintIte):
        yield node.cond
        yield node.then
        yield node.els
    elif isinstance(node, Quantifier):
        yield node.body
    else:
        raise TypeError(f"not an AST node: {node!r}")


def node_count(node) -> int:
    """Number of AST nodes in the tree rooted at ``node``."""
    return 1 + sum(node_count(c) for c in children(node))


# Interpreted functions whose (index-slot, body-slot) argument pair binds
# the index variable within the body.
BINDER_SLOTS = {"summation": (0, 3), "derivative": (1, 0),
                "integral": (1, 0)}


def free_variables(node) -> set:
    """Names of free variables in an expression or constraint."""
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Quantifier):
        bound = {n for n, _ in node.bindings}
        return free_variables(node.body) - bound
    if isinstance(node, FuncApp) and node.name in BINDER_SLOTS:
        var_idx, body_idx = BINDER_SLOTS[node.name]
        idx = node.args[var_idx]
        out = set()
        for i, a in enumerate(node.args):
            if i == var_idx:
                continue
            fv = free_variables(a)
            if i == body_idx and isinstance(idx, Var):
                fv -= {idx.name}
            out |= fv
        return out
    out = set()
    for c in children(node):
        out |= free_variables(c)
    return out


def occurrences(node, name: str) -> int:
    """Number of free occurrences of ``name`` in ``node``."""
    if isinstance(node, Var):
        return 1 if node.name == name else 0
    if isinstance(node, Quantifier):
        if any(n == name for n, _ in node.bindings):
            return 0
        return occurrences(node.body, name)
    if isinstance(node, FuncApp) and node.name in BINDER_SLOTS:
        var_idx, body_idx = BINDER_SLOTS[node.name]
        idx = node.args[var_idx]
        total = 0
        for i, a in enumerate(node.args):
            if i == var_idx:
                continue
            if i == body_idx and isinstance(idx, Var) and idx.name == name:
                continue
            total += occurrences(a, name)
        return total
    return sum(occurrences(c, name) for c in children(node))


class _FreshNames:
    """Deterministic fresh-name supply: appends a numeric suffix."""

    def __init__(self, taken):
        self.taken = set(taken)

    def fresh(self, base: str) -> str:
        if base not in self.taken:
            self.taken.add(base)
            return base
        i = 1
        while f"{base}_{i}" in self.taken:
            i += 1
        name = f"{base}_{i}"
        self.taken.add(name)
        return name


def rename_var(node, old: str, new: str):
    """Rename free occurrences of ``old`` to ``new`` (no capture check)."""
    return substitute(node, old, Var(new))


def substitute(node, name: str, replacement: Expression):
    """Replace free occurrences of variable ``name`` with ``replacement``.

    Capture-avoiding: quantifier bindings that collide with the free
    variables of ``replacement`` are renamed first.
    """
    if isinstance(node, Var):
        return replacement if node.name == name else node
    if isinstance(node, (Const, NamedConst, BoolConst)):
        return node
    if isinstance(node, Quantifier):
        if any(n == name for n, _ in node.bindings):
            return node  # name is bound here, nothing free below
        repl_free = free_variables(replacement)
        bindings = list(node.bindings)
        body = node.body
        if any(n in repl_free for n, _ in bindings):
            supply = _FreshNames(free_variables(body) | repl_free | {name})
            renamed = []
            for n, d in bindings:
                if n in repl_free:
                    n2 = supply.fresh(n)
                    body = rename_var(body, n, n2)
                    renamed.append((n2, d))
                else:
                    renamed.append((n, d))
            bindings = renamed
        return Quantifier(node.kind, tuple(bindings),
                          substitute(body, name, replacement))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, name, replacement),
                     substitute(node.right, name, replacement))
    if isinstance(node, Pow):
        return Pow(substitute(node.base, name, replacement),
                   substitute(node.exponent, name, replacement))
    if isinstance(node, FuncApp):
        if node.name in BINDER_SLOTS:
            var_idx, body_idx = BINDER_SLOTS[node.name]
            idx = node.args[var_idx]
            if isinstance(idx, Var) and idx.name == name:
                # the index shadows ``name`` in the body slot only
                args = tuple(a if i in (var_idx, body_idx)
                             else substitute(a, name, replacement)
                             for i, a in enumerate(node.args))
                return FuncApp(node.name, args)
        return FuncApp(node.name, tuple(substitute(a, name, replacement)
                                        for a in node.args))
    if isinstance(node, TermIte):
        return TermIte(substitute(node.cond, name, replacement),
                       substitute(node.then, name, replacement),
                       substitute(node.els, name, replacement))
    if isinstance(node, Compare):
        return Compare(substitute(node.lhs, name, replacement), node.rel,
                       substitute(node.rhs, name, replacement))
    if isinstance(node, And):
        return And(tuple(substitute(i, name, replacement) for i in node.items))
    if isinstance(node, Or):
        return Or(tuple(substitute(i, name, replacement) for i in node.items))
    if isinstance(node, Not):
        return Not(substitute(node.child, name, replacement))
    if isinstance(node, Implies):
        return Implies(substitute(node.antecedent, name, replacement),
                       substitute(node.consequent, name, replacement))
    if isinstance(node, ConstraintIte):
        return ConstraintIte(substitute(node.cond, name, replacement),
                             substitute(node.then, name, replacement),
                             substitute(node.els, name, replacement))
    raise TypeError(f"not an AST node: {node!r}")


def substitute_in_problem(p: Problem, name: str, replacement: Expression,
                          drop_declaration: bool = False) -> Problem:
    constraints = tuple(substitute(c, name, replacement) for c in p.constraints)
    targets = tuple(substitute(t, name, replacement) for t in p.goal.targets)
    decls = p.declarations
    if drop_declaration:
        decls = tuple((n, d) for n, d in decls if n != name)
    return Problem(decls, constraints, Goal(p.goal.kind, targets),
                   p.recursive_defs)


def negate(c: Constraint) -> Constraint:
    """Logical negation, pushed through comparisons."""
    if isinstance(c, Compare):
        return Compare(c.lhs, _NEGATED_REL[c.rel], c.rhs)
    if isinstance(c, Not):
        return c.child
    if isinstance(c, BoolConst):
        return BoolConst(not c.value)
    return Not(c)


def conjuncts(c: Constraint) -> list:
    """Flatten nested conjunctions into a list."""
    if isinstance(c, And):
        out = []
        for i in c.items:
            out.extend(conjuncts(i))
        return out
    return [c]


def make_and(items) -> Constraint:
    items = list(items)
    if not items:
        return BoolConst(True)
    if len(items) == 1:
        return items[0]
    return And(tuple(items))


def contains_complex(p: Problem) -> bool:
    return any(d is Domain.COMPLEX for _, d in p.declarations)


def is_quantifier_free(p: Problem) -> bool:
    def qf(c) -> bool:
        if isinstance(c, Quantifier):
            return False
        return all(qf(ch) for ch in children(c)
                   if isinstance(ch, (Compare, And, Or, Not, Implies,
                                      ConstraintIte, BoolConst, Quantifier)))
    return all(qf(c) for c in p.constraints)


def validate(p: Problem, registry=None) -> None:
    """Check Problem invariants; raises ValidationError."""
    declared = set(p.declared_names())
    if len(declared) != len(p.declarations):
        raise ValidationError("duplicate declaration")
    for c in p.constraints:
        undeclared = free_variables(c) - declared
        if undeclared:
            raise ValidationError(
                f"undeclared variable(s): {', '.join(sorted(undeclared))}")
    for t in p.goal.targets:
        undeclared = free_variables(t) - declared
        if undeclared:
            raise ValidationError(
                f"undeclared variable(s) in goal: {', '.join(sorted(undeclared))}")
    if registry is not None:
        _check_arities(p, registry)


def _check_arities(p: Problem, registry) -> None:
    def walk(node):
        if isinstance(node, FuncApp):
            desc = registry.lookup(node.name)
            if desc.arity != len(node.args):
                raise ValidationError(
                    f"{node.name} expects {desc.arity} argument(s), "
                    f"got {len(node.args)}")
        for c in children(node):
            walk(c)
    for c in p.constraints:
        walk(c)
    for t in p.goal.targets:
        walk(t)
