"""Syntax for the two input logics.

Fixpoint formulas extend the modal mu-calculus with per-agent knowledge
modalities (``Know``/``Possible``); coalition formulas have Next and
Until under a strategy quantifier.  Duals (And, Box, Nu, Possible,
false) are first-class AST nodes so negation normal form is closed.
Parsing alpha-renames binders apart and validates positivity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class FormulaError(Exception):
    """Base class for syntax and well-formedness failures."""


class ParseError(FormulaError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class PositivityError(FormulaError):
    def __init__(self, variable: str):
        super().__init__(
            f"variable {variable} occurs under an odd number of negations "
            "inside its binder"
        )
        self.variable = variable


class GuardednessError(FormulaError):
    def __init__(self, variables):
        self.variables = tuple(sorted(variables))
        super().__init__("unguarded fixpoint variables: " + ", ".join(self.variables))


# ---------------------------------------------------------------------------
# Fixpoint-logic AST


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class Var(Formula):
    name: str


@dataclass(frozen=True)
class Prop(Formula):
    name: str


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Diamond(Formula):
    sub: Formula


@dataclass(frozen=True)
class Box(Formula):
    sub: Formula


@dataclass(frozen=True)
class Know(Formula):
    agent: str
    sub: Formula


@dataclass(frozen=True)
class Possible(Formula):
    agent: str
    sub: Formula


@dataclass(frozen=True)
class Mu(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Nu(Formula):
    var: str
    body: Formula


# ---------------------------------------------------------------------------
# Coalition-logic AST


@dataclass(frozen=True)
class AtlFormula:
    pass


@dataclass(frozen=True)
class AtlProp(AtlFormula):
    name: str


@dataclass(frozen=True)
class AtlNot(AtlFormula):
    sub: AtlFormula


@dataclass(frozen=True)
class AtlOr(AtlFormula):
    left: AtlFormula
    right: AtlFormula


@dataclass(frozen=True)
class CoalitionNext(AtlFormula):
    coalition: tuple
    sub: AtlFormula


@dataclass(frozen=True)
class CoalitionUntil(AtlFormula):
    coalition: tuple
    left: AtlFormula
    right: AtlFormula


# ---------------------------------------------------------------------------
# Traversals


def children(f: Formula):
    if isinstance(f, (Var, Prop, TrueF, FalseF)):
        return ()
    if isinstance(f, (Not, Diamond, Box)):
        return (f.sub,)
    if isinstance(f, (Know, Possible)):
        return (f.sub,)
    if isinstance(f, (Or, And)):
        return (f.left, f.right)
    if isinstance(f, (Mu, Nu)):
        return (f.body,)
    raise TypeError(f"not a formula node: {f!r}")


def subformulas(f: Formula):
    """All subformula occurrences, preorder."""
    out = [f]
    for c in children(f):
        out.extend(subformulas(c))
    return out


def size(f: Formula) -> int:
    return len(subformulas(f))


def free_vars(f: Formula) -> frozenset:
    if isinstance(f, Var):
        return frozenset((f.name,))
    if isinstance(f, (Mu, Nu)):
        return free_vars(f.body) - {f.var}
    out = frozenset()
    for c in children(f):
        out |= free_vars(c)
    return out


def props_of(f: Formula) -> frozenset:
    if isinstance(f, Prop):
        return frozenset((f.name,))
    out = frozenset()
    for c in children(f):
        out |= props_of(c)
    return out


def agents_of(f: Formula) -> frozenset:
    out = frozenset()
    if isinstance(f, (Know, Possible)):
        out |= {f.agent}
    for c in children(f):
        out |= agents_of(c)
    return out


def binder_bodies(f: Formula) -> dict:
    """Map each bound variable to its binder's body (binders are distinct
    after parsing)."""
    out = {}
    for g in subformulas(f):
        if isinstance(g, (Mu, Nu)):
            out[g.var] = g.body
    return out


def alpha_eq(f: Formula, g: Formula) -> bool:
    """Structural equality up to renaming of bound variables."""

    def walk(a, b, env_ab, env_ba):
        if type(a) is not type(b):
            return False
        if isinstance(a, Var):
            return env_ab.get(a.name, a.name) == b.name and env_ba.get(b.name, b.name) == a.name
        if isinstance(a, Prop):
            return a.name == b.name
        if isinstance(a, (TrueF, FalseF)):
            return True
        if isinstance(a, (Know, Possible)):
            return a.agent == b.agent and walk(a.sub, b.sub, env_ab, env_ba)
        if isinstance(a, (Mu, Nu)):
            return walk(
                a.body,
                b.body,
                {**env_ab, a.var: b.var},
                {**env_ba, b.var: a.var},
            )
        return all(
            walk(x, y, env_ab, env_ba) for x, y in zip(children(a), children(b))
        )

    return walk(f, g, {}, {})


def substitute(f: Formula, var: str, replacement: Formula) -> Formula:
    """Replace free occurrences of ``var``.  Binders shadow."""
    if isinstance(f, Var):
        return replacement if f.name == var else f
    if isinstance(f, (Mu, Nu)) and f.var == var:
        return f
    if isinstance(f, Mu):
        return Mu(f.var, substitute(f.body, var, replacement))
    if isinstance(f, Nu):
        return Nu(f.var, substitute(f.body, var, replacement))
    if isinstance(f, Not):
        return Not(substitute(f.sub, var, replacement))
    if isinstance(f, Diamond):
        return Diamond(substitute(f.sub, var, replacement))
    if isinstance(f, Box):
        return Box(substitute(f.sub, var, replacement))
    if isinstance(f, Know):
        return Know(f.agent, substitute(f.sub, var, replacement))
    if isinstance(f, Possible):
        return Possible(f.agent, substitute(f.sub, var, replacement))
    if isinstance(f, Or):
        return Or(substitute(f.left, var, replacement), substitute(f.right, var, replacement))
    if isinstance(f, And):
        return And(substitute(f.left, var, replacement), substitute(f.right, var, replacement))
    return f


# ---------------------------------------------------------------------------
# Tokenizer (shared by both grammars)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<lcoal><<)
  | (?P<rcoal>>>)
  | (?P<dia><>)
  | (?P<box>\[\])
  | (?P<lpar>\()
  | (?P<rpar>\))
  | (?P<or>\|)
  | (?P<and>&)
  | (?P<not>~)
  | (?P<dot>\.)
  | (?P<comma>,)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_+]*)
    """,
    re.VERBOSE,
)

_MU_KEYWORDS = {"true", "false", "mu", "nu", "K", "P"}
_ATL_KEYWORDS = {"true", "false", "U", "F", "X"}


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        tokens.append((kind, m.group(), m.start()))
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind, what=None):
        tok = self.next()
        if tok[0] != kind:
            raise ParseError(f"expected {what or kind}, found {tok[1] or 'end of input'}", tok[2])
        return tok

    def ident(self, what="identifier"):
        kind, value, pos = self.next()
        if kind != "ident":
            raise ParseError(f"expected {what}, found {value or 'end of input'}", pos)
        return value

    # -- fixpoint grammar ---------------------------------------------------

    def mu_formula(self) -> Formula:
        return self.mu_or()

    def mu_or(self) -> Formula:
        f = self.mu_and()
        while self.peek()[0] == "or":
            self.next()
            f = Or(f, self.mu_and())
        return f

    def mu_and(self) -> Formula:
        f = self.mu_prefix()
        while self.peek()[0] == "and":
            self.next()
            f = And(f, self.mu_prefix())
        return f

    def mu_prefix(self) -> Formula:
        kind, value, pos = self.peek()
        if kind == "not":
            self.next()
            return Not(self.mu_prefix())
        if kind == "dia":
            self.next()
            return Diamond(self.mu_prefix())
        if kind == "box":
            self.next()
            return Box(self.mu_prefix())
        if kind == "ident" and value in ("mu", "nu"):
            self.next()
            var = self.ident("fixpoint variable")
            if not var[0].isupper():
                raise ParseError(f"fixpoint variable must start uppercase: {var}", pos)
            self.expect("dot", "'.'")
            body = self.mu_formula()
            return Mu(var, body) if value == "mu" else Nu(var, body)
        if kind == "ident" and value in ("K", "P"):
            self.next()
            agent = self.ident("agent name")
            sub = self.mu_prefix()
            return Know(agent, sub) if value == "K" else Possible(agent, sub)
        return self.mu_atom()

    def mu_atom(self) -> Formula:
        kind, value, pos = self.next()
        if kind == "lpar":
            f = self.mu_formula()
            self.expect("rpar", "')'")
            return f
        if kind == "ident":
            if value == "true":
                return TrueF()
            if value == "false":
                return FalseF()
            if value in _MU_KEYWORDS:
                raise ParseError(f"misplaced keyword {value}", pos)
            if value[0].isupper():
                return Var(value)
            return Prop(value)
        raise ParseError(f"expected a formula, found {value or 'end of input'}", pos)

    # -- coalition grammar --------------------------------------------------

    def atl_formula(self) -> AtlFormula:
        f = self.atl_and()
        while self.peek()[0] == "or":
            self.next()
            f = AtlOr(f, self.atl_and())
        return f

    def atl_and(self) -> AtlFormula:
        # no primitive conjunction in the coalition grammar; kept as a
        # derived form so `f & g` still parses
        f = self.atl_prefix()
        while self.peek()[0] == "and":
            self.next()
            g = self.atl_prefix()
            f = AtlNot(AtlOr(AtlNot(f), AtlNot(g)))
        return f

    def atl_prefix(self) -> AtlFormula:
        kind, value, pos = self.peek()
        if kind == "not":
            self.next()
            return AtlNot(self.atl_prefix())
        if kind == "lcoal":
            self.next()
            coalition = self.coalition_body()
            return self.coalition_operand(coalition)
        return self.atl_atom()

    def coalition_body(self):
        agents = []
        if self.peek()[0] == "ident":
            agents.append(self.ident())
            while self.peek()[0] == "comma":
                self.next()
                agents.append(self.ident())
        self.expect("rcoal", "'>>'")
        return tuple(sorted(set(agents)))

    def coalition_operand(self, coalition) -> AtlFormula:
        kind, value, pos = self.peek()
        if kind == "ident" and value == "X":
            self.next()
            return CoalitionNext(coalition, self.atl_prefix())
        if kind == "ident" and value == "F":
            self.next()
            sub = self.atl_prefix()
            return CoalitionUntil(coalition, _atl_true(sub), sub)
        left = self.atl_until_operand()
        self.expect_keyword("U")
        right = self.atl_until_operand()
        return CoalitionUntil(coalition, left, right)

    def atl_until_operand(self) -> AtlFormula:
        # an or-level formula that stops before a bare `U`
        f = self.atl_and()
        while self.peek()[0] == "or":
            self.next()
            f = AtlOr(f, self.atl_and())
        return f

    def expect_keyword(self, word):
        kind, value, pos = self.next()
        if kind != "ident" or value != word:
            raise ParseError(f"expected {word}, found {value or 'end of input'}", pos)

    def atl_atom(self) -> AtlFormula:
        kind, value, pos = self.next()
        if kind == "lpar":
            f = self.atl_formula()
            self.expect("rpar", "')'")
            return f
        if kind == "ident":
            if value == "true":
                return _atl_true(None)
            if value == "false":
                return AtlNot(_atl_true(None))
            if value in _ATL_KEYWORDS:
                raise ParseError(f"misplaced keyword {value}", pos)
            return AtlProp(value)
        raise ParseError(f"expected a formula, found {value or 'end of input'}", pos)


def _atl_true(context) -> AtlFormula:
    # the grammar has no primitive truth constant; use p | ~p over a
    # proposition of the operand when one exists
    name = "p"
    if context is not None:
        props = sorted(atl_props(context))
        if props:
            name = props[0]
    return AtlOr(AtlProp(name), AtlNot(AtlProp(name)))


def atl_props(f: AtlFormula) -> frozenset:
    if isinstance(f, AtlProp):
        return frozenset((f.name,))
    if isinstance(f, AtlNot):
        return atl_props(f.sub)
    if isinstance(f, AtlOr):
        return atl_props(f.left) | atl_props(f.right)
    if isinstance(f, CoalitionNext):
        return atl_props(f.sub)
    if isinstance(f, CoalitionUntil):
        return atl_props(f.left) | atl_props(f.right)
    return frozenset()


def atl_coalitions(f: AtlFormula) -> frozenset:
    out = frozenset()
    if isinstance(f, (CoalitionNext, CoalitionUntil)):
        out |= {f.coalition}
    subs = ()
    if isinstance(f, AtlNot):
        subs = (f.sub,)
    elif isinstance(f, AtlOr):
        subs = (f.left, f.right)
    elif isinstance(f, CoalitionNext):
        subs = (f.sub,)
    elif isinstance(f, CoalitionUntil):
        subs = (f.left, f.right)
    for s in subs:
        out |= atl_coalitions(s)
    return out


# ---------------------------------------------------------------------------
# Parse-time normalization


def _alpha_rename(f: Formula) -> Formula:
    used = set()

    def fresh(name):
        if name not in used:
            used.add(name)
            return name
        k = 2
        while f"{name}_{k}" in used:
            k += 1
        out = f"{name}_{k}"
        used.add(out)
        return out

    def walk(g, env):
        if isinstance(g, Var):
            return Var(env.get(g.name, g.name))
        if isinstance(g, Mu):
            nv = fresh(g.var)
            return Mu(nv, walk(g.body, {**env, g.var: nv}))
        if isinstance(g, Nu):
            nv = fresh(g.var)
            return Nu(nv, walk(g.body, {**env, g.var: nv}))
        if isinstance(g, Not):
            return Not(walk(g.sub, env))
        if isinstance(g, Diamond):
            return Diamond(walk(g.sub, env))
        if isinstance(g, Box):
            return Box(walk(g.sub, env))
        if isinstance(g, Know):
            return Know(g.agent, walk(g.sub, env))
        if isinstance(g, Possible):
            return Possible(g.agent, walk(g.sub, env))
        if isinstance(g, Or):
            return Or(walk(g.left, env), walk(g.right, env))
        if isinstance(g, And):
            return And(walk(g.left, env), walk(g.right, env))
        return g

    return walk(f, {})


def check_positivity(f: Formula) -> None:
    """Raise PositivityError unless each bound variable occurs under an
    even number of negations inside its binder."""

    def walk(g, parity, binder_parity):
        if isinstance(g, Var):
            if g.name in binder_parity and binder_parity[g.name] != parity:
                raise PositivityError(g.name)
            return
        if isinstance(g, Not):
            walk(g.sub, 1 - parity, binder_parity)
            return
        if isinstance(g, (Mu, Nu)):
            walk(g.body, parity, {**binder_parity, g.var: parity})
            return
        for c in children(g):
            walk(c, parity, binder_parity)

    walk(f, 0, {})


def parse_mu_formula(text: str) -> Formula:
    p = _Parser(text)
    f = p.mu_formula()
    p.expect("eof", "end of input")
    f = _alpha_rename(f)
    check_positivity(f)
    return f


def parse_atl_formula(text: str, declared_agents=None) -> AtlFormula:
    p = _Parser(text)
    f = p.atl_formula()
    p.expect("eof", "end of input")
    if declared_agents is not None:
        declared = set(declared_agents)
        for coalition in atl_coalitions(f):
            extra = set(coalition) - declared
            if extra:
                raise FormulaError(
                    "coalition mentions undeclared agents: " + ", ".join(sorted(extra))
                )
    return f


# ---------------------------------------------------------------------------
# Negation normal form


def to_negation_normal_form(f: Formula) -> Formula:
    """Push negations to propositions; fixpoint duals flip the bound
    variable, so positive occurrences stay positive."""
    if isinstance(f, Not):
        return _nnf_neg(f.sub)
    if isinstance(f, Or):
        return Or(to_negation_normal_form(f.left), to_negation_normal_form(f.right))
    if isinstance(f, And):
        return And(to_negation_normal_form(f.left), to_negation_normal_form(f.right))
    if isinstance(f, Diamond):
        return Diamond(to_negation_normal_form(f.sub))
    if isinstance(f, Box):
        return Box(to_negation_normal_form(f.sub))
    if isinstance(f, Know):
        return Know(f.agent, to_negation_normal_form(f.sub))
    if isinstance(f, Possible):
        return Possible(f.agent, to_negation_normal_form(f.sub))
    if isinstance(f, Mu):
        return Mu(f.var, to_negation_normal_form(f.body))
    if isinstance(f, Nu):
        return Nu(f.var, to_negation_normal_form(f.body))
    return f


def _nnf_neg(f: Formula) -> Formula:
    if isinstance(f, TrueF):
        return FalseF()
    if isinstance(f, FalseF):
        return TrueF()
    if isinstance(f, Prop):
        return Not(f)
    if isinstance(f, Var):
        # free variable; negation cannot be pushed further
        return Not(f)
    if isinstance(f, Not):
        return to_negation_normal_form(f.sub)
    if isinstance(f, Or):
        return And(_nnf_neg(f.left), _nnf_neg(f.right))
    if isinstance(f, And):
        return Or(_nnf_neg(f.left), _nnf_neg(f.right))
    if isinstance(f, Diamond):
        return Box(_nnf_neg(f.sub))
    if isinstance(f, Box):
        return Diamond(_nnf_neg(f.sub))
    if isinstance(f, Know):
        return Possible(f.agent, _nnf_neg(f.sub))
    if isinstance(f, Possible):
        return Know(f.agent, _nnf_neg(f.sub))
    if isinstance(f, Mu):
        return Nu(f.var, _nnf_neg(substitute(f.body, f.var, Not(Var(f.var)))))
    if isinstance(f, Nu):
        return Mu(f.var, _nnf_neg(substitute(f.body, f.var, Not(Var(f.var)))))
    raise TypeError(f"not a formula node: {f!r}")


nnf = to_negation_normal_form


# ---------------------------------------------------------------------------
# Colour assignment and guardedness


def assign_colors(f: Formula) -> dict:
    """Colour each fixpoint variable: mu odd, nu even, nondecreasing
    inward.  Input must be in NNF."""
    colors = {}

    def walk(g, outer):
        if isinstance(g, (Mu, Nu)):
            want_odd = isinstance(g, Mu)
            if outer is None:
                c = 1 if want_odd else 0
            elif (outer % 2 == 1) == want_odd:
                c = outer
            else:
                c = outer + 1
            colors[g.var] = c
            walk(g.body, c)
            return
        for sub in children(g):
            walk(sub, outer)

    walk(f, None)
    return colors


def check_guarded(f: Formula):
    """Offending variables: bound occurrences not beneath any modality
    inside their binder.  Empty list means guarded."""
    offending = set()

    def walk(g, naked):
        if isinstance(g, Var):
            if g.name in naked:
                offending.add(g.name)
            return
        if isinstance(g, (Diamond, Box, Know, Possible)):
            walk(g.sub, frozenset())
            return
        if isinstance(g, (Mu, Nu)):
            walk(g.body, naked | {g.var})
            return
        for c in children(g):
            walk(c, naked)

    walk(f, frozenset())
    return sorted(offending)


# ---------------------------------------------------------------------------
# Printing


def format_mu(f: Formula) -> str:
    # a binder's body extends as far right as possible, so binders in
    # operand position are parenthesized; at top level they stay bare
    if isinstance(f, Mu):
        return f"mu {f.var}. {format_mu(f.body)}"
    if isinstance(f, Nu):
        return f"nu {f.var}. {format_mu(f.body)}"
    return _fmt_mu_inner(f)


def _fmt_mu_inner(f: Formula) -> str:
    if isinstance(f, Var):
        return f.name
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Not):
        return "~" + _fmt_mu_inner(f.sub)
    if isinstance(f, Or):
        return f"({_fmt_mu_inner(f.left)} | {_fmt_mu_inner(f.right)})"
    if isinstance(f, And):
        return f"({_fmt_mu_inner(f.left)} & {_fmt_mu_inner(f.right)})"
    if isinstance(f, Diamond):
        return "<>" + _fmt_mu_inner(f.sub)
    if isinstance(f, Box):
        return "[]" + _fmt_mu_inner(f.sub)
    if isinstance(f, Know):
        return f"K {f.agent} {_fmt_mu_inner(f.sub)}"
    if isinstance(f, Possible):
        return f"P {f.agent} {_fmt_mu_inner(f.sub)}"
    if isinstance(f, (Mu, Nu)):
        kw = "mu" if isinstance(f, Mu) else "nu"
        return f"({kw} {f.var}. {_fmt_mu_inner(f.body)})"
    raise TypeError(f"not a formula node: {f!r}")


def format_atl(f: AtlFormula) -> str:
    # an Until's right operand extends as far right as possible, so
    # coalition forms in operand position are parenthesized
    if isinstance(f, CoalitionNext):
        return f"<<{','.join(f.coalition)}>> X {_fmt_atl_inner(f.sub)}"
    if isinstance(f, CoalitionUntil):
        return (
            f"<<{','.join(f.coalition)}>> {_fmt_atl_inner(f.left)}"
            f" U {_fmt_atl_inner(f.right)}"
        )
    return _fmt_atl_inner(f)


def _fmt_atl_inner(f: AtlFormula) -> str:
    if isinstance(f, AtlProp):
        return f.name
    if isinstance(f, AtlNot):
        return "~" + _fmt_atl_inner(f.sub)
    if isinstance(f, AtlOr):
        return f"({_fmt_atl_inner(f.left)} | {_fmt_atl_inner(f.right)})"
    if isinstance(f, (CoalitionNext, CoalitionUntil)):
        return "(" + format_atl(f) + ")"
    raise TypeError(f"not a formula node: {f!r}")
