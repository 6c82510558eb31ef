"""Translations between fixpoint formulas and jumping automata, and
direct fixpoint evaluation on quotient systems.

`eval_mu` implements the clause-by-clause semantics with Kleene
iteration; it is the oracle against which `formula_to_jta` (states from
the formula closure) and `jta_to_equations` (one fixpoint variable per
automaton state, ordered by colour) are validated.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from . import formulas as F
from .jta import BOX, DIA, BAnd, BAtom, BFalse, BOr, BTrue, Jta, band, bor, jbox, jdia
from .worlds import QuotientSystem, all_letters


class TranslateError(Exception):
    pass


class FlattenSizeError(TranslateError):
    def __init__(self, size, cap):
        super().__init__(f"flattened formula would exceed the size cap ({size} > {cap})")
        self.size = size
        self.cap = cap


FLATTEN_CAP_ENV = "JUMPMU_FLATTEN_CAP"
DEFAULT_FLATTEN_CAP = 20000


# ---------------------------------------------------------------------------
# Fixpoint evaluation


def eval_mu(f: F.Formula, q: QuotientSystem, valuation=None, stats=None):
    """Set of quotient states satisfying the formula.  Diamond/Box range
    over the child relation, knowledge modalities over the agent's jump
    relation; fixpoints iterate from the empty/full set.  `stats`, when
    given, records the maximum Kleene rounds used by any fixpoint."""
    env = {x: frozenset(s) for x, s in (valuation or {}).items()}
    missing = F.free_vars(f) - set(env)
    if missing:
        raise TranslateError("valuation misses free variables: " + ", ".join(sorted(missing)))
    full = frozenset(range(len(q)))
    free_cache = {}

    def free(g):
        if g not in free_cache:
            free_cache[g] = F.free_vars(g)
        return free_cache[g]

    cache = {}

    def ev(g, env):
        key = (g, tuple(sorted((x, env[x]) for x in free(g))))
        hit = cache.get(key)
        if hit is not None:
            return hit
        out = _ev(g, env)
        cache[key] = out
        return out

    def _ev(g, env):
        if isinstance(g, F.Var):
            return env[g.name]
        if isinstance(g, F.Prop):
            return frozenset(i for i in full if g.name in q.labels[i])
        if isinstance(g, F.TrueF):
            return full
        if isinstance(g, F.FalseF):
            return frozenset()
        if isinstance(g, F.Not):
            return full - ev(g.sub, env)
        if isinstance(g, F.Or):
            return ev(g.left, env) | ev(g.right, env)
        if isinstance(g, F.And):
            return ev(g.left, env) & ev(g.right, env)
        if isinstance(g, F.Diamond):
            s = ev(g.sub, env)
            return frozenset(i for i in full if any(c in s for c in q.children[i]))
        if isinstance(g, F.Box):
            s = ev(g.sub, env)
            return frozenset(i for i in full if all(c in s for c in q.children[i]))
        if isinstance(g, (F.Know, F.Possible)):
            if g.agent not in q.jumps:
                raise TranslateError(
                    f"agent {g.agent} has no relation in the quotient's profile"
                )
            jumps = q.jumps[g.agent]
            s = ev(g.sub, env)
            if isinstance(g, F.Know):
                return frozenset(i for i in full if all(t in s for t in jumps[i]))
            return frozenset(i for i in full if any(t in s for t in jumps[i]))
        if isinstance(g, (F.Mu, F.Nu)):
            current = frozenset() if isinstance(g, F.Mu) else full
            rounds = 0
            while True:
                rounds += 1
                nxt = ev(g.body, {**env, g.var: current})
                if nxt == current:
                    break
                current = nxt
            if stats is not None:
                stats["max_rounds"] = max(stats.get("max_rounds", 0), rounds)
            return current
        raise TypeError(f"not a formula node: {g!r}")

    return ev(f, env)


# ---------------------------------------------------------------------------
# Formulas to automata


def formula_to_jta(f: F.Formula, extra_props=()) -> Jta:
    """Closure construction: one automaton state per (modal argument,
    regeneration colour) pair.  The colour records the outermost fixpoint
    unfolded since the previous tree step, so the parity condition sees
    exactly the significant regenerations; bare closure states with a
    blanket colour would misjudge cycles that regenerate a variable
    inside a boolean context."""
    if F.free_vars(f):
        raise TranslateError("only sentences translate to automata")
    g = F.to_negation_normal_form(f)
    offending = F.check_guarded(g)
    if offending:
        raise F.GuardednessError(offending)
    colors = F.assign_colors(g)
    bodies = F.binder_bodies(g)
    top = max(colors.values()) + 1 if colors else 1
    ap = frozenset(F.props_of(g)) | frozenset(extra_props)
    letters = all_letters(ap)

    keys = [(g, top)]
    index = {(g, top): 0}

    def state_id(key):
        if key not in index:
            index[key] = len(keys)
            keys.append(key)
        return f"q{index[key]}"

    def expand(h, letter, trail):
        if isinstance(h, F.TrueF):
            return BTrue()
        if isinstance(h, F.FalseF):
            return BFalse()
        if isinstance(h, F.Prop):
            return BTrue() if h.name in letter else BFalse()
        if isinstance(h, F.Not):
            if not isinstance(h.sub, F.Prop):
                raise TranslateError("negation above a non-proposition; input not in NNF")
            return BFalse() if h.sub.name in letter else BTrue()
        if isinstance(h, F.Or):
            return bor(expand(h.left, letter, trail), expand(h.right, letter, trail))
        if isinstance(h, F.And):
            return band(expand(h.left, letter, trail), expand(h.right, letter, trail))
        if isinstance(h, F.Diamond):
            return BAtom(DIA, state_id((h.sub, trail)))
        if isinstance(h, F.Box):
            return BAtom(BOX, state_id((h.sub, trail)))
        if isinstance(h, F.Possible):
            return BAtom(jdia(h.agent), state_id((h.sub, trail)))
        if isinstance(h, F.Know):
            return BAtom(jbox(h.agent), state_id((h.sub, trail)))
        if isinstance(h, (F.Mu, F.Nu)):
            return expand(h.body, letter, min(trail, colors[h.var]))
        if isinstance(h, F.Var):
            return expand(bodies[h.name], letter, min(trail, colors[h.name]))
        raise TypeError(f"not a formula node: {h!r}")

    delta = {}
    i = 0
    while i < len(keys):
        formula, colour = keys[i]
        sid = f"q{i}"
        for letter in letters:
            delta[(sid, letter)] = expand(formula, letter, top)
        i += 1

    states = tuple(f"q{k}" for k in range(len(keys)))
    colour = {f"q{k}": keys[k][1] for k in range(len(keys))}
    info = {f"q{k}": f"{F.format_mu(keys[k][0])} / colour {keys[k][1]}" for k in range(len(keys))}
    return Jta(ap, states, "q0", colour, delta, state_info=info)


# ---------------------------------------------------------------------------
# Automata to equation systems


@dataclass(frozen=True)
class Equation:
    var: str
    kind: str  # "mu" | "nu"
    colour: int
    rhs: F.Formula


@dataclass(frozen=True)
class EquationSystem:
    equations: tuple  # outermost first
    entry: str

    def variables(self):
        return [e.var for e in self.equations]


def _tr_boolpos(b) -> F.Formula:
    if isinstance(b, BTrue):
        return F.TrueF()
    if isinstance(b, BFalse):
        return F.FalseF()
    if isinstance(b, BAtom):
        target = F.Var(_var_of(b.state))
        kind = b.direction.kind
        if kind == "dia":
            return F.Diamond(target)
        if kind == "box":
            return F.Box(target)
        if kind == "jdia":
            return F.Possible(b.direction.agent, target)
        return F.Know(b.direction.agent, target)
    if isinstance(b, BAnd):
        return F.And(_tr_boolpos(b.left), _tr_boolpos(b.right))
    if isinstance(b, BOr):
        return F.Or(_tr_boolpos(b.left), _tr_boolpos(b.right))
    raise TypeError(f"not a boolean position: {b!r}")


def _var_of(state) -> str:
    return f"X_{state}"


def _label_formula(letter, props) -> F.Formula:
    """Characteristic conjunction of a label set over the alphabet."""
    out = None
    for p in sorted(props):
        lit = F.Prop(p) if p in letter else F.Not(F.Prop(p))
        out = lit if out is None else F.And(out, lit)
    return out if out is not None else F.TrueF()


def _or_all(parts):
    out = None
    for p in parts:
        if isinstance(p, F.FalseF):
            continue
        out = p if out is None else F.Or(out, p)
    return out if out is not None else F.FalseF()


def _and2(a, b):
    if isinstance(a, F.TrueF):
        return b
    if isinstance(b, F.TrueF):
        return a
    if isinstance(a, F.FalseF) or isinstance(b, F.FalseF):
        return F.FalseF()
    return F.And(a, b)


def jta_to_equations(a: Jta, labels=None) -> EquationSystem:
    """One fixpoint variable per automaton state: mu when the state's
    colour is odd, nu when even, ordered ascending by colour (outermost
    first, ties by declaration order).  The label expansion ranges over
    `labels` when supplied (e.g. the label sets of a target structure)
    and over the whole alphabet otherwise."""
    letters = list(labels) if labels is not None else all_letters(a.props)
    for letter in letters:
        if not frozenset(letter) <= a.props:
            raise TranslateError("restriction labels must lie in the alphabet")

    equations = []
    for q in a.states:
        bodies = {}
        for letter in letters:
            key = a.delta[(q, frozenset(letter))]
            bodies.setdefault(key, []).append(frozenset(letter))
        if len(bodies) == 1:
            # the transition does not inspect the label; skip the expansion
            rhs = _tr_boolpos(next(iter(bodies)))
        else:
            parts = []
            for letter in letters:
                guard = _label_formula(frozenset(letter), a.props)
                parts.append(_and2(guard, _tr_boolpos(a.delta[(q, frozenset(letter))])))
            rhs = _or_all(parts)
        kind = "mu" if a.colour[q] % 2 == 1 else "nu"
        equations.append(Equation(_var_of(q), kind, a.colour[q], rhs))

    order = {q: i for i, q in enumerate(a.states)}
    equations.sort(key=lambda e: (e.colour, order[e.var[2:]]))
    return EquationSystem(tuple(equations), _var_of(a.initial))


def eval_equations(system: EquationSystem, q: QuotientSystem):
    """Nested Kleene iteration over the system, outermost block first.
    Adjacent equations of one kind form a simultaneous block, so the
    nesting depth is the number of kind alternations."""
    eqs = system.equations
    full = frozenset(range(len(q)))

    blocks = []
    for eq in eqs:
        if blocks and blocks[-1][0] == eq.kind:
            blocks[-1][1].append(eq)
        else:
            blocks.append((eq.kind, [eq]))

    def solve_from(bi, env):
        if bi == len(blocks):
            return env
        kind, block = blocks[bi]
        init = frozenset() if kind == "mu" else full
        vals = {eq.var: init for eq in block}
        while True:
            inner = solve_from(bi + 1, {**env, **vals})
            nxt = {eq.var: eval_mu(eq.rhs, q, valuation=inner) for eq in block}
            if all(nxt[v] == vals[v] for v in vals):
                return {**inner, **vals}
            vals = nxt

    env = solve_from(0, {})
    return env[system.entry]


def flatten(system: EquationSystem, max_size=None) -> F.Formula:
    """Eliminate equations innermost-first, closing each as a fixpoint
    formula and substituting it upward.  May blow up; a configurable cap
    aborts with the equational form intact."""
    if max_size is None:
        max_size = int(os.environ.get(FLATTEN_CAP_ENV, DEFAULT_FLATTEN_CAP))
    eqs = list(system.equations)
    closed = {}
    rhs = {e.var: e.rhs for e in eqs}
    for i in range(len(eqs) - 1, -1, -1):
        e = eqs[i]
        wrap = F.Mu if e.kind == "mu" else F.Nu
        closed_form = wrap(e.var, rhs[e.var])
        closed[e.var] = closed_form
        for outer in eqs[:i]:
            rhs[outer.var] = F.substitute(rhs[outer.var], e.var, closed_form)
            if F.size(rhs[outer.var]) > max_size:
                raise FlattenSizeError(F.size(rhs[outer.var]), max_size)

    # outer variables may still occur free in an inner closed form
    fully = {}
    for e in eqs:  # outermost first
        form = closed[e.var]
        for outer_var in fully:
            form = F.substitute(form, outer_var, fully[outer_var])
        if F.size(form) > max_size:
            raise FlattenSizeError(F.size(form), max_size)
        fully[e.var] = form
    return fully[system.entry]


def format_equations(system: EquationSystem) -> str:
    parts = []
    for e in system.equations:
        parts.append(f"{e.kind} {e.var} = {F.format_mu(e.rhs)}")
    return "let " + "; ".join(parts) + " in " + system.entry
