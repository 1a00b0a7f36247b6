"""SMT-LIB 2 parser for the supported fragment.

Supported commands: set-logic (ignored), declare-fun/declare-const,
define-fun (expanded as a macro), define-fun-rec (kept verbatim), assert,
minimize, maximize, check-sat, get-value.  Comments start with ``;``.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from fractions import Fraction

from .ast import (And, BinOp, BoolConst, Compare, Const, ConstraintIte,
                  Domain, FuncApp, Goal, MathMorphError, NamedConst, Not, Or,
                  Implies, Pow, Problem, Quantifier, TermIte, Var, make_and)
from .funcs import REGISTRY


class ParseError(MathMorphError):
    def __init__(self, message, line=None, col=None):
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)
        self.line = line
        self.col = col


class UndeclaredVariableError(ParseError):
    pass


class ArityMismatchError(ParseError):
    pass


class UnsupportedCommandError(ParseError):
    pass


# ---------------------------------------------------------------------------
# Tokenizer / S-expression reader
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    col: int


def tokenize(text: str):
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch.isspace():
            col += 1
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield Atom(ch, line, col)
            col += 1
            i += 1
        else:
            start = i
            start_col = col
            while i < n and not text[i].isspace() and text[i] not in "();":
                i += 1
                col += 1
            yield Atom(text[start:i], line, start_col)


def read_sexprs(text: str):
    """Parse text into a list of nested lists of Atoms."""
    stack = [[]]
    opens = []
    for tok in tokenize(text):
        if tok.text == "(":
            stack.append([])
            opens.append(tok)
        elif tok.text == ")":
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", tok.line, tok.col)
            done = stack.pop()
            opens.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        tok = opens[-1]
        raise ParseError("unbalanced '('", tok.line, tok.col)
    return stack[0]


def sexpr_to_text(s) -> str:
    if isinstance(s, Atom):
        return s.text
    return "(" + " ".join(sexpr_to_text(x) for x in s) + ")"


# ---------------------------------------------------------------------------
# Numerals
# ---------------------------------------------------------------------------

def _parse_numeral(text: str):
    if text.lstrip("-").isdigit():
        return Fraction(int(text))
    try:
        return Fraction(Decimal(text))
    except InvalidOperation:
        return None


# ---------------------------------------------------------------------------
# Elaboration
# ---------------------------------------------------------------------------

_SORTS = {"Int": Domain.INT, "Real": Domain.REAL, "Complex": Domain.COMPLEX}

_BOOL_HEADS = {"and", "or", "not", "=>", "forall", "exists",
               "true", "false", ">=", "<=", ">", "<", "=", "distinct"}

SUPPORTED_COMMANDS = ("set-logic", "declare-fun", "declare-const",
                      "define-fun", "define-fun-rec", "assert", "minimize",
                      "maximize", "check-sat", "get-value")


class _Macro:
    def __init__(self, params, body_sexpr):
        self.params = params            # [name, ...]
        self.body = body_sexpr


class _ProblemBuilder:
    def __init__(self, registry=None):
        self.registry = registry or REGISTRY
        self.declarations = []          # [(name, Domain)]
        self.constraints = []
        self.macros = {}
        self.rec_defs = []
        self.rec_names = set()
        self.goal_kind = None
        self.goal_targets = []
        self.saw_check_sat = False
        self._rename_counter = 0

    # -- helpers ------------------------------------------------------------

    def declared(self, name):
        return any(n == name for n, _ in self.declarations)

    def _head(self, s):
        if not s or not isinstance(s[0], Atom):
            tok = s[0] if s else Atom("()", 0, 0)
            line = getattr(tok, "line", None)
            raise ParseError("expected a command name", line,
                             getattr(tok, "col", None))
        return s[0]

    # -- commands -----------------------------------------------------------

    def feed(self, s):
        if isinstance(s, Atom):
            raise ParseError(f"stray token {s.text!r}", s.line, s.col)
        head = self._head(s)
        cmd = head.text
        if cmd == "set-logic":
            return
        if cmd in ("declare-fun", "declare-const"):
            self._declare(s, cmd)
        elif cmd == "define-fun":
            self._define_fun(s)
        elif cmd == "define-fun-rec":
            self.rec_defs.append(sexpr_to_text(s))
            name = s[1].text if len(s) > 1 and isinstance(s[1], Atom) else None
            if name:
                self.rec_names.add(name)
        elif cmd == "assert":
            if len(s) != 2:
                raise ParseError("assert expects one argument",
                                 head.line, head.col)
            self.constraints.append(self.elab_bool(s[1], {}))
        elif cmd in ("minimize", "maximize"):
            if len(s) != 2:
                raise ParseError(f"{cmd} expects one argument",
                                 head.line, head.col)
            if self.goal_kind is not None:
                raise ParseError("multiple optimization goals",
                                 head.line, head.col)
            self.goal_kind = cmd
            self.goal_targets = [self.elab_term(s[1], {})]
        elif cmd == "check-sat":
            self.saw_check_sat = True
        elif cmd == "get-value":
            if len(s) != 2 or isinstance(s[1], Atom):
                raise ParseError("get-value expects a parenthesized list",
                                 head.line, head.col)
            if self.goal_kind in ("minimize", "maximize"):
                raise ParseError("get-value cannot follow an optimization "
                                 "goal", head.line, head.col)
            for t in s[1]:
                self.goal_targets.append(self.elab_term(t, {}))
        else:
            raise UnsupportedCommandError(f"unsupported command: {cmd}",
                                          head.line, head.col)

    def _declare(self, s, cmd):
        head = self._head(s)
        if cmd == "declare-fun":
            if len(s) != 4 or not isinstance(s[1], Atom) \
                    or isinstance(s[2], Atom) or not isinstance(s[3], Atom):
                raise ParseError("malformed declare-fun", head.line, head.col)
            if s[2]:
                raise UnsupportedCommandError(
                    "declare-fun with arguments is not supported",
                    head.line, head.col)
            name_tok, sort_tok = s[1], s[3]
        else:
            if len(s) != 3 or not isinstance(s[1], Atom) \
                    or not isinstance(s[2], Atom):
                raise ParseError("malformed declare-const", head.line, head.col)
            name_tok, sort_tok = s[1], s[2]
        if sort_tok.text not in _SORTS:
            raise ParseError(f"unsupported sort: {sort_tok.text}",
                             sort_tok.line, sort_tok.col)
        if self.declared(name_tok.text):
            raise ParseError(f"duplicate declaration: {name_tok.text}",
                             name_tok.line, name_tok.col)
        self.declarations.append((name_tok.text, _SORTS[sort_tok.text]))

    def _define_fun(self, s):
        head = self._head(s)
        if len(s) != 5 or not isinstance(s[1], Atom) or isinstance(s[2], Atom):
            raise ParseError("malformed define-fun", head.line, head.col)
        params = []
        for p in s[2]:
            if isinstance(p, Atom) or len(p) != 2:
                raise ParseError("malformed define-fun parameter",
                                 head.line, head.col)
            params.append(p[0].text)
        self.macros[s[1].text] = _Macro(params, s[4])

    # -- terms --------------------------------------------------------------

    def elab_term(self, s, bound):
        if isinstance(s, Atom):
            v = _parse_numeral(s.text)
            if v is not None:
                lex = s.text if "." in s.text else None
                return Const(v, lexeme=lex)
            name = s.text
            if name in bound:
                return Var(name)
            if self.declared(name):
                return Var(name)
            if name in self.macros and not self.macros[name].params:
                return self.elab_term(self.macros[name].body, bound)
            if name in ("pi", "e"):
                return NamedConst(name)
            raise UndeclaredVariableError(f"undeclared variable: {name}",
                                          s.line, s.col)
        if not s or not isinstance(s[0], Atom):
            raise ParseError("malformed term")
        head = s[0]
        op = head.text
        args = s[1:]
        if op in ("+", "*"):
            if len(args) < 2:
                raise ParseError(f"'{op}' expects at least two arguments",
                                 head.line, head.col)
            acc = self.elab_term(args[0], bound)
            for a in args[1:]:
                acc = BinOp(op, acc, self.elab_term(a, bound))
            return acc
        if op == "-":
            if len(args) == 1:
                inner = self.elab_term(args[0], bound)
                if isinstance(inner, Const):
                    return Const(-inner.value)
                return BinOp("-", Const(Fraction(0)), inner)
            if len(args) < 2:
                raise ParseError("'-' expects arguments", head.line, head.col)
            acc = self.elab_term(args[0], bound)
            for a in args[1:]:
                acc = BinOp("-", acc, self.elab_term(a, bound))
            return acc
        if op == "/":
            if len(args) < 2:
                raise ParseError("'/' expects at least two arguments",
                                 head.line, head.col)
            acc = self.elab_term(args[0], bound)
            for a in args[1:]:
                rhs = self.elab_term(a, bound)
                if isinstance(acc, Const) and isinstance(rhs, Const) \
                        and rhs.value != 0:
                    acc = Const(acc.value / rhs.value)
                else:
                    acc = BinOp("/", acc, rhs)
            return acc
        if op in ("^", "pow"):
            if len(args) != 2:
                raise ArityMismatchError("'^' expects two arguments",
                                         head.line, head.col)
            return Pow(self.elab_term(args[0], bound),
                       self.elab_term(args[1], bound))
        if op == "ite":
            if len(args) != 3:
                raise ArityMismatchError("ite expects three arguments",
                                         head.line, head.col)
            return TermIte(self.elab_bool(args[0], bound),
                           self.elab_term(args[1], bound),
                           self.elab_term(args[2], bound))
        if op in self.macros:
            macro = self.macros[op]
            if len(args) != len(macro.params):
                raise ArityMismatchError(
                    f"{op} expects {len(macro.params)} argument(s), "
                    f"got {len(args)}", head.line, head.col)
            expansion = self.elab_term(
                macro.body, {**bound, **{p: True for p in macro.params}})
            from .ast import substitute
            for p, a in zip(macro.params, args):
                expansion = substitute(expansion, p, self.elab_term(a, bound))
            return expansion
        if op in self.rec_names:
            return FuncApp(op, tuple(self.elab_term(a, bound) for a in args))
        if self.registry.known(op):
            desc = self.registry.lookup(op)
            if len(args) != desc.arity:
                raise ArityMismatchError(
                    f"{op} expects {desc.arity} argument(s), got {len(args)}",
                    head.line, head.col)
            return self._elab_interpreted(op, args, bound, head)
        raise UndeclaredVariableError(f"unknown function or variable: {op}",
                                      head.line, head.col)

    def _elab_interpreted(self, op, args, bound, head):
        # summation / derivative / integral bind one variable argument.
        binder_slots = {"summation": (0, 3), "derivative": (1, 0),
                        "integral": (1, 0)}
        if op in binder_slots:
            var_idx, body_idx = binder_slots[op]
            var_tok = args[var_idx]
            if not isinstance(var_tok, Atom):
                raise ParseError(f"{op} binder must be a symbol",
                                 head.line, head.col)
            inner = {**bound, var_tok.text: True}
            out = []
            for i, a in enumerate(args):
                if i == var_idx:
                    out.append(Var(var_tok.text))
                elif i == body_idx:
                    out.append(self.elab_term(a, inner))
                else:
                    out.append(self.elab_term(a, bound))
            return FuncApp(op, tuple(out))
        return FuncApp(op, tuple(self.elab_term(a, bound) for a in args))

    # -- boolean terms ------------------------------------------------------

    def elab_bool(self, s, bound):
        if isinstance(s, Atom):
            if s.text == "true":
                return BoolConst(True)
            if s.text == "false":
                return BoolConst(False)
            raise ParseError(f"expected a boolean term, got {s.text!r}",
                             s.line, s.col)
        if not s or not isinstance(s[0], Atom):
            raise ParseError("malformed boolean term")
        head = s[0]
        op = head.text
        args = s[1:]
        if op in ("and", "or"):
            items = [self.elab_bool(a, bound) for a in args]
            if not items:
                raise ParseError(f"'{op}' expects arguments",
                                 head.line, head.col)
            if len(items) == 1:
                return items[0]
            return And(tuple(items)) if op == "and" else Or(tuple(items))
        if op == "not":
            if len(args) != 1:
                raise ArityMismatchError("not expects one argument",
                                         head.line, head.col)
            return Not(self.elab_bool(args[0], bound))
        if op == "=>":
            if len(args) < 2:
                raise ArityMismatchError("=> expects two arguments",
                                         head.line, head.col)
            items = [self.elab_bool(a, bound) for a in args]
            acc = items[-1]
            for a in reversed(items[:-1]):
                acc = Implies(a, acc)
            return acc
        if op == "ite":
            if len(args) != 3:
                raise ArityMismatchError("ite expects three arguments",
                                         head.line, head.col)
            return ConstraintIte(self.elab_bool(args[0], bound),
                                 self.elab_bool(args[1], bound),
                                 self.elab_bool(args[2], bound))
        if op in ("forall", "exists"):
            return self._elab_quantifier(op, args, bound, head)
        if op in ("=", ">=", "<=", ">", "<", "distinct"):
            if len(args) < 2:
                raise ArityMismatchError(f"'{op}' expects two arguments",
                                         head.line, head.col)
            rel = "!=" if op == "distinct" else op
            terms = [self.elab_term(a, bound) for a in args]
            pairs = [Compare(a, rel, b) for a, b in zip(terms, terms[1:])]
            return make_and(pairs)
        raise ParseError(f"expected a boolean operator, got {op!r}",
                         head.line, head.col)

    def _elab_quantifier(self, kind, args, bound, head):
        if len(args) != 2 or isinstance(args[0], Atom):
            raise ParseError(f"malformed {kind}", head.line, head.col)
        bindings = []
        renames = {}
        inner = dict(bound)
        for b in args[0]:
            if isinstance(b, Atom) or len(b) != 2 \
                    or not isinstance(b[0], Atom) or not isinstance(b[1], Atom):
                raise ParseError(f"malformed {kind} binding",
                                 head.line, head.col)
            name, sort = b[0].text, b[1].text
            if sort not in _SORTS:
                raise ParseError(f"unsupported sort: {sort}",
                                 b[1].line, b[1].col)
            if self.declared(name):
                # bound names must not shadow problem declarations
                self._rename_counter += 1
                fresh = f"{name}_{self._rename_counter}"
                while self.declared(fresh) or fresh in inner:
                    self._rename_counter += 1
                    fresh = f"{name}_{self._rename_counter}"
                renames[name] = fresh
                name = fresh
            bindings.append((name, _SORTS[sort]))
            inner[name] = True
        body_s = args[1]
        if renames:
            body_s = _rename_sexpr(body_s, renames)
        body = self.elab_bool(body_s, inner)
        return Quantifier(kind, tuple(bindings), body)


def _rename_sexpr(s, renames):
    if isinstance(s, Atom):
        if s.text in renames:
            return Atom(renames[s.text], s.line, s.col)
        return s
    return [_rename_sexpr(x, renames) for x in s]


# ---------------------------------------------------------------------------
# Domain side-constraint absorption
# ---------------------------------------------------------------------------

def _absorb_side_constraints(declarations, constraints):
    """Fold ``(>= v 0)`` / ``(>= v 1)`` asserts on Int variables into the
    NAT / POS domains, so printing and re-parsing are stable."""
    decls = list(declarations)
    remaining = list(constraints)
    for i, (name, dom) in enumerate(decls):
        if dom is not Domain.INT:
            continue
        for j, c in enumerate(remaining):
            if (isinstance(c, Compare) and c.rel == ">="
                    and isinstance(c.lhs, Var) and c.lhs.name == name
                    and isinstance(c.rhs, Const)
                    and c.rhs.value in (0, 1)):
                decls[i] = (name, Domain.POS if c.rhs.value == 1
                            else Domain.NAT)
                del remaining[j]
                break
    return tuple(decls), tuple(remaining)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def parse(text: str, registry=None) -> Problem:
    """Parse SMT-LIB source into a Problem."""
    builder = _ProblemBuilder(registry)
    for s in read_sexprs(text):
        builder.feed(s)
    decls, constraints = _absorb_side_constraints(builder.declarations,
                                                  builder.constraints)
    kind = builder.goal_kind or "solve"
    goal = Goal(kind, tuple(builder.goal_targets))
    problem = Problem(decls, constraints, goal, tuple(builder.rec_defs))
    _validate_parsed(problem, builder)
    return problem


def _validate_parsed(problem, builder):
    from .ast import validate, ValidationError
    try:
        validate(problem)
    except ValidationError as exc:
        raise UndeclaredVariableError(str(exc)) from exc
