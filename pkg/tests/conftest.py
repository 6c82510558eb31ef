"""Shared random generators for the test suite.

Everything is seeded: the acceptance sweeps use plain `random.Random`
so their instance counts and runtimes stay reproducible.
"""

import itertools
import random

import pytest

from jumpmu import formulas as F
from jumpmu import worlds as W
from jumpmu.games import ParityGame


# ---------------------------------------------------------------------------
# Formulas


def random_guarded_formula(rng, budget, props, agents):
    """Guarded NNF sentence with at most `budget` connectives below each
    spine; bound variables are only emitted once a modality guards them."""

    counter = itertools.count()

    def gen(budget, bound):
        # bound: dict var -> guarded flag
        guarded = [x for x, ok in bound.items() if ok]
        leaves = ["prop", "nprop", "true", "false"] + (["var"] * 3 if guarded else [])
        if budget <= 1:
            kind = rng.choice(leaves)
        else:
            kinds = ["or", "and", "dia", "box", "mu", "nu", "prop", "nprop"]
            if agents:
                kinds += ["know", "possible"]
            if guarded:
                kinds += ["var", "var"]
            kind = rng.choice(kinds)
        if kind == "prop":
            return F.Prop(rng.choice(props))
        if kind == "nprop":
            return F.Not(F.Prop(rng.choice(props)))
        if kind == "true":
            return F.TrueF()
        if kind == "false":
            return F.FalseF()
        if kind == "var":
            return F.Var(rng.choice(guarded))
        if kind in ("or", "and"):
            split = rng.randint(1, budget - 1)
            left = gen(split, bound)
            right = gen(budget - 1 - split, bound)
            return F.Or(left, right) if kind == "or" else F.And(left, right)
        if kind in ("dia", "box"):
            sub = gen(budget - 1, {x: True for x in bound})
            return F.Diamond(sub) if kind == "dia" else F.Box(sub)
        if kind in ("know", "possible"):
            agent = rng.choice(agents)
            sub = gen(budget - 1, {x: True for x in bound})
            return F.Know(agent, sub) if kind == "know" else F.Possible(agent, sub)
        var = f"X{next(counter)}"
        body = gen(budget - 1, {**bound, var: False})
        return F.Mu(var, body) if kind == "mu" else F.Nu(var, body)

    return gen(budget, {})


def random_full_formula(rng, budget, props, agents):
    """Formula over the full grammar (negation anywhere), positivity
    respected by only negating closed subformulas or propositions."""
    f = random_guarded_formula(rng, budget, props, agents)
    # sprinkle a negation on top now and then; the result stays valid
    if rng.random() < 0.4:
        f = F.Not(f)
    return f


# ---------------------------------------------------------------------------
# Structures and profiles


def random_structure(rng, props=("p", "q"), max_depth=2, max_width=2):
    """Small leveled structure with loop-leaves closing every branch."""
    nodes = []
    counter = itertools.count()

    def label():
        return frozenset(p for p in props if rng.random() < 0.4)

    def build(depth):
        nid = f"n{next(counter)}"
        if depth >= max_depth or (depth > 0 and rng.random() < 0.35):
            nodes.append(W.StructNode(nid, depth, label(), (nid,), loop=True))
            return nid
        kids = tuple(build(depth + 1) for _ in range(rng.randint(1, max_width)))
        nodes.append(W.StructNode(nid, depth, label(), kids))
        return nid

    root = build(0)
    return W.LeveledStructure(nodes, root, props=frozenset(props))


def random_dfa(rng, props, max_states=2):
    n = rng.randint(1, max_states)
    states = tuple(f"s{i}" for i in range(n))
    letters = W.all_letters(frozenset(props))
    trans = {(q, a): rng.choice(states) for q in states for a in letters}
    accepting = frozenset(q for q in states if rng.random() < 0.5)
    return W.Dfa(states, "s0", accepting, frozenset(props), trans)


def random_backend(rng, structure, quotient_names):
    roll = rng.random()
    if roll < 0.4:
        return W.EqualLevel()
    if roll < 0.7:
        pairs = []
        for a in quotient_names:
            for b in quotient_names:
                if rng.random() < 0.3:
                    pairs.append((a, b))
        return W.Explicit(tuple(pairs))
    rel = W.RecognizableRelation(
        [(random_dfa(rng, structure.props), random_dfa(rng, structure.props))],
        structure.props,
    )
    return W.Recognizable(rel)


def random_profile(rng, structure, agents):
    probe = W.build_quotient(
        structure, W.RelationProfile({a: W.Explicit(()) for a in agents})
    )
    names = [probe.state_name(i) for i in range(len(probe))]
    return W.RelationProfile(
        {a: random_backend(rng, structure, names) for a in agents}
    )


def random_instance(rng, props=("p", "q"), agents=("a", "b"), max_quotient=8):
    """(structure, profile, quotient) with the quotient capped in size;
    regenerates until the cap holds."""
    while True:
        s = random_structure(rng, props=props)
        profile = random_profile(rng, s, agents)
        q = W.build_quotient(s, profile)
        if len(q) <= max_quotient:
            return s, profile, q


# ---------------------------------------------------------------------------
# Arenas


def random_arena(rng, agents=("a",), actions=("a0", "a1"), max_depth=2, deterministic=True):
    """Tree-arena over one proposition; when `deterministic`, children of
    a node carry pairwise distinct compound actions."""
    compounds = list(itertools.product(*(actions for _ in agents)))
    counter = itertools.count()
    nodes = []

    def label(compound):
        base = {W.action_prop(compound)}
        if rng.random() < 0.4:
            base.add("p")
        return frozenset(base)

    def build(depth, compound):
        nid = f"n{next(counter)}"
        lbl = label(compound) if compound else (
            frozenset({"p"}) if rng.random() < 0.3 else frozenset()
        )
        if depth >= max_depth or (depth > 0 and rng.random() < 0.3):
            nodes.append(W.StructNode(nid, depth, lbl, (nid,), loop=True))
            return nid
        if deterministic:
            picks = rng.sample(compounds, rng.randint(1, len(compounds)))
        else:
            picks = [rng.choice(compounds) for _ in range(rng.randint(1, 3))]
        kids = tuple(build(depth + 1, c) for c in picks)
        nodes.append(W.StructNode(nid, depth, lbl, kids))
        return nid

    root = build(0, None)
    return W.TreeArena(
        nodes, root, agents, {a: tuple(actions) for a in agents}, base_props=("p",)
    )


# ---------------------------------------------------------------------------
# Parity games


def random_game(rng, n=6, max_colour=3, max_degree=3, p_terminal=0.15):
    ids = [f"v{i}" for i in range(n)]
    owner = {v: rng.choice("EA") for v in ids}
    colour = {v: rng.randint(0, max_colour) for v in ids}
    moves = {}
    terminals = {}
    for v in ids:
        if rng.random() < p_terminal:
            moves[v] = ()
            if rng.random() < 0.7:
                terminals[v] = rng.choice("EA")
        else:
            degree = rng.randint(1, max_degree)
            moves[v] = tuple(rng.choice(ids) for _ in range(degree))
    return ParityGame(ids, owner, colour, moves, ids[0], terminals)


def duplicated_game(rng, g):
    """Copy of the game with positions split into bisimilar duplicates;
    the natural position-to-copies relation is a bisimulation."""
    copies = {v: [f"{v}c{k}" for k in range(rng.randint(1, 2))] for v in g.positions}
    positions = [c for v in g.positions for c in copies[v]]
    owner = {}
    colour = {}
    moves = {}
    terminals = {}
    for v in g.positions:
        for c in copies[v]:
            owner[c] = g.owner[v]
            colour[c] = g.colour[v]
            moves[c] = tuple(rng.choice(copies[u]) for u in g.moves[v])
            if v in g.terminals:
                terminals[c] = g.terminals[v]
    initial = copies[g.initial][0] if g.initial is not None else None
    return (
        ParityGame(positions, owner, colour, moves, initial, terminals),
        {(v, c) for v in g.positions for c in copies[v]},
    )


@pytest.fixture
def rng():
    return random.Random(20240817)
