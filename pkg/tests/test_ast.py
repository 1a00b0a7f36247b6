"""AST invariants: traversal, substitution, negation, validation."""

from fractions import Fraction

import pytest

from mathmorph.ast import (And, BinOp, Compare, Const, Domain, Exists,
                           Forall, Goal, Not, Or, Problem, ValidationError,
                           Var, conjuncts, free_variables, is_quantifier_free,
                           make_and, negate, node_count, rename_var,
                           substitute, validate)
from mathmorph.parser import parse
from mathmorph.printer import print_smtlib
from conftest import read_fixture


def test_node_count_counts_every_node():
    e = BinOp("+", Var("x"), BinOp("*", Const(Fraction(2)), Var("y")))
    assert node_count(e) == 5


def test_free_variables_skips_bound_names():
    q = Exists((("y", Domain.REAL),),
               Compare(Var("x"), "=", BinOp("+", Var("y"), Const(Fraction(2)))))
    assert free_variables(q) == {"x"}


def test_substitute_replaces_all_occurrences():
    e = BinOp("+", Var("x"), Var("x"))
    out = substitute(e, "x", Const(Fraction(3)))
    assert node_count(out) == 3
    assert free_variables(out) == set()


def test_substitute_respects_shadowing():
    q = Forall((("x", Domain.REAL),), Compare(Var("x"), ">", Var("y")))
    out = substitute(q, "x", Const(Fraction(1)))
    assert out == q


def test_rename_var_updates_free_occurrences():
    c = Compare(Var("a"), "=", BinOp("+", Var("a"), Var("b")))
    out = rename_var(c, "a", "d")
    assert free_variables(out) == {"d", "b"}


def test_summation_index_is_bound():
    p = parse("(declare-fun n () Int)"
              "(assert (= n (summation i 1 4 (^ i 2))))(check-sat)")
    assert free_variables(p.constraints[0]) == {"n"}
    # substitution must not touch the bound index
    out = substitute(p.constraints[0].rhs, "i", Const(Fraction(9)))
    assert out == p.constraints[0].rhs


def test_negate_flips_comparisons():
    c = Compare(Var("x"), "<", Const(Fraction(1)))
    assert negate(c) == Compare(Var("x"), ">=", Const(Fraction(1)))
    assert negate(negate(c)) == c


def test_negate_wraps_compound_constraints():
    c = And((Compare(Var("x"), "=", Const(Fraction(0))),
             Compare(Var("y"), "=", Const(Fraction(1)))))
    assert isinstance(negate(c), (Not, Or))


def test_and_requires_two_children():
    with pytest.raises(ValidationError):
        And((Compare(Var("x"), "=", Const(Fraction(0))),))


def test_conjuncts_and_make_and_round_trip():
    parts = [Compare(Var("x"), ">", Const(Fraction(0))),
             Compare(Var("y"), ">", Const(Fraction(0)))]
    assert conjuncts(make_and(parts)) == parts


def test_is_quantifier_free():
    p = parse("(declare-fun x () Real)"
              "(assert (exists ((y Real)) (> y x)))(check-sat)")
    assert not is_quantifier_free(p)
    q = parse("(declare-fun x () Real)(assert (> x 0))(check-sat)")
    assert is_quantifier_free(q)


def test_validate_rejects_undeclared_goal_target():
    p = parse("(declare-fun x () Real)(assert (> x 0))(check-sat)")
    with pytest.raises(ValidationError):
        bad = Problem(p.declarations, p.constraints,
                      Goal("get-value", (Var("ghost"),)), p.recursive_defs)
        validate(bad)


def test_validate_accepts_fixture_problems():
    for name in ("sara.smt2", "pages.smt2", "m1.smt2"):
        validate(parse(read_fixture(name)))


def test_problem_is_immutable():
    p = parse("(declare-fun x () Real)(assert (> x 0))(check-sat)")
    with pytest.raises(Exception):
        p.constraints = ()


def test_print_after_rename_stays_parseable():
    p = parse(read_fixture("sara.smt2"))
    renamed = Problem(
        tuple(("cash" if n == "rachel_budget" else n, d)
              for n, d in p.declarations),
        tuple(rename_var(c, "rachel_budget", "cash") for c in p.constraints),
        Goal(p.goal.kind, tuple(rename_var(t, "rachel_budget", "cash")
                                for t in p.goal.targets)),
        p.recursive_defs)
    parse(print_smtlib(renamed))
