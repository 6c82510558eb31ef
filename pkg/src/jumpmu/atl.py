"""Coalition-logic semantics on tree-arenas with uniform strategy
synthesis.

Strategies map quotient states to actions and must be uniform: states
related by the agent's relation get the same action, so the candidates
are assignments from uniformity classes (connected components of the
symmetric closure of the relation) to actions.  Outcomes follow the
coalition's choices down the child relation.

Blocked nodes (the arena offers no child stamped with the chosen
action) are handled per the `blocked` option: "fail" reads outcomes as
maximal paths, so dying before the goal falsifies an Until and a blocked
start falsifies a Next; "ignore" treats blocked nodes as having no
outcomes through them.  "fail" is the default: with "ignore" a coalition
could win any objective vacuously by blocking on purpose, which breaks
the action-incomplete arenas this package builds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

from . import formulas as F
from .worlds import QuotientSystem, TreeArena, build_quotient


class AtlError(Exception):
    pass


class SemanticsMode(str, Enum):
    DE_RE = "de-re"
    DE_DICTO = "de-dicto"
    UNIFORM_ONLY = "uniform-only"


@dataclass(frozen=True)
class Next:
    targets: frozenset


@dataclass(frozen=True)
class Until:
    safe: frozenset
    goal: frozenset


@dataclass
class Profile:
    coalition: tuple
    strategies: dict  # agent -> tuple of actions indexed by quotient state

    def action(self, agent, state):
        return self.strategies[agent][state]


@dataclass
class OutcomeGraph:
    start: int
    nodes: frozenset
    edges: dict  # state -> tuple of allowed successors
    blocked: frozenset


def uniformity_classes(q: QuotientSystem, agent):
    """Connected components of the symmetric closure of the agent's jump
    relation, sorted by minimal member."""
    parent = list(range(len(q)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    for s in range(len(q)):
        for t in q.jumps[agent][s]:
            union(s, t)
    groups = {}
    for s in range(len(q)):
        groups.setdefault(find(s), []).append(s)
    return [sorted(v) for _k, v in sorted(groups.items())]


def _state_compounds(q: QuotientSystem, arena: TreeArena):
    return tuple(arena.compound_of(q.labels[s]) for s in range(len(q)))


def _allowed_children(q, arena, profile, compounds=None):
    """Per-state allowed successors under the coalition's choices."""
    if compounds is None:
        compounds = _state_compounds(q, arena)
    agent_pos = {a: arena.agents.index(a) for a in profile.coalition}
    allowed = []
    for s in range(len(q)):
        out = []
        for t in q.children[s]:
            compound = compounds[t]
            if compound is None:
                continue  # only the root lacks an action stamp, never a child
            if all(
                profile.action(a, s) == compound[agent_pos[a]]
                for a in profile.coalition
            ):
                out.append(t)
        allowed.append(tuple(out))
    return allowed


def outcomes_from(q: QuotientSystem, arena: TreeArena, profile: Profile, start: int) -> OutcomeGraph:
    """Subgraph of child edges compatible with the coalition's choices,
    restricted to what is reachable from the start."""
    allowed = _allowed_children(q, arena, profile)
    seen = {start}
    stack = [start]
    edges = {}
    while stack:
        s = stack.pop()
        edges[s] = allowed[s]
        for t in allowed[s]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    blocked = frozenset(s for s in seen if not edges[s])
    return OutcomeGraph(start, frozenset(seen), edges, blocked)


def check_objective(graph: OutcomeGraph, objective, blocked="fail") -> bool:
    """All outcomes through the graph meet the objective.  For Until:
    the region reachable from the start while avoiding the goal must lie
    inside the safe set and contain no cycle; with blocked="fail" it must
    not contain a dead end either."""
    if blocked not in ("fail", "ignore"):
        raise AtlError(f"unknown blocked mode {blocked!r}")
    if isinstance(objective, Next):
        succs = graph.edges[graph.start]
        if blocked == "fail" and not succs:
            return False
        return all(t in objective.targets for t in succs)
    if not isinstance(objective, Until):
        raise AtlError(f"unknown objective {objective!r}")
    if graph.start in objective.goal:
        return True
    region = {graph.start}
    stack = [graph.start]
    while stack:
        s = stack.pop()
        for t in graph.edges[s]:
            if t in objective.goal or t in region:
                continue
            region.add(t)
            stack.append(t)
    if not region <= objective.safe:
        return False
    if blocked == "fail" and any(not graph.edges[s] for s in region):
        return False
    return not _has_cycle(region, graph.edges, objective.goal)


def _has_cycle(region, edges, goal):
    state = {}  # 1 active, 2 done
    for root in region:
        if state.get(root):
            continue
        stack = [(root, iter(edges[root]))]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for t in it:
                if t in goal or t not in region:
                    continue
                mark = state.get(t)
                if mark == 1:
                    return True
                if mark is None:
                    state[t] = 1
                    stack.append((t, iter(edges[t])))
                    advanced = True
                    break
            if not advanced:
                state[node] = 2
                stack.pop()
    return False


def _forall_set(q, allowed, objective, blocked) -> frozenset:
    """States from which every outcome meets the objective, computed for
    all states at once (least fixpoint for Until)."""
    n = len(q)
    if isinstance(objective, Next):
        out = set()
        for s in range(n):
            succs = allowed[s]
            if blocked == "fail" and not succs:
                continue
            if all(t in objective.targets for t in succs):
                out.add(s)
        return frozenset(out)
    sat = set(objective.goal)
    changed = True
    while changed:
        changed = False
        for s in range(n):
            if s in sat or s not in objective.safe:
                continue
            succs = allowed[s]
            if blocked == "fail" and not succs:
                continue
            if all(t in sat for t in succs):
                sat.add(s)
                changed = True
    return frozenset(sat)


def enumerate_profiles(q: QuotientSystem, arena: TreeArena, coalition):
    """Uniform profiles in deterministic order: agents sorted, classes by
    minimal member, actions in declaration order."""
    coalition = tuple(sorted(set(coalition)))
    for a in coalition:
        if a not in arena.agents:
            raise AtlError(f"coalition agent {a} is not declared by the arena")
        if a not in q.jumps:
            raise AtlError(f"coalition agent {a} has no relation in the profile")
    slots = []  # (agent, class states)
    for a in coalition:
        for cls in uniformity_classes(q, a):
            slots.append((a, cls))
    action_ranges = [arena.actions[a] for a, _cls in slots]
    for picks in itertools.product(*action_ranges):
        strategies = {a: [None] * len(q) for a in coalition}
        for (a, cls), act in zip(slots, picks):
            for s in cls:
                strategies[a][s] = act
        yield Profile(coalition, {a: tuple(v) for a, v in strategies.items()})


def _alternatives(q, coalition, state, include_self):
    alts = set()
    for a in coalition:
        alts.update(q.jumps[a][state])
    if include_self:
        alts.add(state)
    return alts


def synthesize_profile(
    q: QuotientSystem,
    arena: TreeArena,
    coalition,
    objective,
    frm: int,
    mode: SemanticsMode = SemanticsMode.DE_RE,
    blocked="fail",
    include_self=False,
    strict=False,
):
    """First uniform profile (in enumeration order) meeting the objective
    from every epistemically required start; None when there is none.
    Under de dicto the profile may vary per alternative, so the returned
    witness is the one for `frm` itself and existence is checked per
    alternative."""
    compounds = _state_compounds(q, arena)
    mode = SemanticsMode(mode)
    if mode == SemanticsMode.UNIFORM_ONLY:
        required = {frm}
    else:
        required = _alternatives(q, coalition, frm, include_self)
    if mode == SemanticsMode.DE_DICTO:
        witnesses = []
        for y in sorted(required):
            found = _first_profile(
                q, arena, coalition, objective, {y}, blocked, strict, compounds
            )
            if found is None:
                return None
            witnesses.append(found)
        return witnesses[0] if witnesses else _empty_or_first(q, arena, coalition)
    return _first_profile(q, arena, coalition, objective, required, blocked, strict, compounds)


def _empty_or_first(q, arena, coalition):
    return next(iter(enumerate_profiles(q, arena, coalition)))


def _first_profile(q, arena, coalition, objective, required, blocked, strict, compounds):
    for profile in enumerate_profiles(q, arena, coalition):
        allowed = _allowed_children(q, arena, profile, compounds)
        if strict and _reaches_blocked(q, allowed, required):
            continue
        sat = _forall_set(q, allowed, objective, blocked)
        if required <= sat:
            return profile
    return None


def _reaches_blocked(q, allowed, starts):
    seen = set(starts)
    stack = list(starts)
    while stack:
        s = stack.pop()
        if not allowed[s]:
            return True
        for t in allowed[s]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return False


def eval_atl_states(
    q: QuotientSystem,
    arena: TreeArena,
    f: F.AtlFormula,
    mode: SemanticsMode = SemanticsMode.DE_RE,
    blocked="fail",
    include_self=False,
) -> frozenset:
    """Clause-by-clause semantics on the quotient; returns the satisfying
    state set."""
    mode = SemanticsMode(mode)
    full = frozenset(range(len(q)))
    compounds = _state_compounds(q, arena)

    def ev(g):
        if isinstance(g, F.AtlProp):
            return frozenset(s for s in full if g.name in q.labels[s])
        if isinstance(g, F.AtlNot):
            return full - ev(g.sub)
        if isinstance(g, F.AtlOr):
            return ev(g.left) | ev(g.right)
        if isinstance(g, F.CoalitionNext):
            return coalition_set(Next(ev(g.sub)), g.coalition)
        if isinstance(g, F.CoalitionUntil):
            return coalition_set(Until(ev(g.left), ev(g.right)), g.coalition)
        raise TypeError(f"not a coalition formula node: {g!r}")

    def coalition_set(objective, coalition):
        sats = []
        win_any = set()
        for profile in enumerate_profiles(q, arena, coalition):
            allowed = _allowed_children(q, arena, profile, compounds)
            sat = _forall_set(q, allowed, objective, blocked)
            sats.append(sat)
            win_any |= sat
        if mode == SemanticsMode.UNIFORM_ONLY:
            return frozenset(win_any)
        out = set()
        for s in full:
            alts = _alternatives(q, coalition, s, include_self)
            if mode == SemanticsMode.DE_DICTO:
                if alts <= win_any:
                    out.add(s)
            else:
                if any(alts <= sat for sat in sats):
                    out.add(s)
        return frozenset(out)

    return ev(f)


def eval_atl(
    arena: TreeArena,
    profile,
    f: F.AtlFormula,
    mode: SemanticsMode = SemanticsMode.DE_RE,
    blocked="fail",
    include_self=False,
) -> frozenset:
    """Build the arena's quotient under the relation profile and evaluate
    there."""
    q = build_quotient(arena, profile)
    return eval_atl_states(q, arena, f, mode=mode, blocked=blocked, include_self=include_self)


def format_profile(q: QuotientSystem, profile: Profile) -> str:
    lines = []
    for a in profile.coalition:
        for cls in uniformity_classes(q, a):
            act = profile.strategies[a][cls[0]]
            if any(profile.strategies[a][s] != act for s in cls):
                raise AtlError("profile is not uniform")
            names = ", ".join(q.state_name(s) for s in cls)
            lines.append(f"agent {a}: class {{{names}}} -> {act}")
    return "\n".join(lines)


def profile_is_uniform(q: QuotientSystem, profile: Profile) -> bool:
    for a in profile.coalition:
        strat = profile.strategies[a]
        for s in range(len(q)):
            for t in q.jumps[a][s]:
                if strat[s] != strat[t]:
                    return False
    return True
