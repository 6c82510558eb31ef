"""Counterexample experiment: a falsifier for candidate automata against
the uniform-reachability coalition property.

Given a jumping automaton, build a family of 2^N single-agent
tree-arenas (N one more than the automaton's state count) that all
satisfy "the agent has a uniform strategy to reach p" under the
equal-level relation, each needing a different strategy.  If the
automaton accepts them all, extract Eve strategies from the acceptance
games, find two trees whose strategies visit the distinguished node
y_{2^N+1} in the same automaton states (pigeonhole), cut-and-paste those
trees into a new arena T_0 where only a non-uniform strategy reaches p,
and certify with explicit game bisimulations and a two-phase combined
strategy that the automaton accepts T_0 as well.  Any automaton is
therefore wrong somewhere: it rejects a model or accepts a non-model.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import formulas as F
from .atl import (
    Profile,
    SemanticsMode,
    Until,
    synthesize_profile,
    uniformity_classes,
)
from .games import EVE, FiniteMemoryStrategy, check_bisimulation, solve, verify_strategy
from .jta import BAtom, BTrue, DIA, Jta, build_acceptance_game, visit_map
from .translate import eval_mu
from .worlds import (
    EqualLevel,
    RelationProfile,
    StructNode,
    TreeArena,
    all_letters,
    build_quotient,
)


class ExperimentError(Exception):
    pass


ARENA_PROPS = ("p", "p_a0", "p_a1")


@dataclass(frozen=True)
class FamilySpec:
    """Shape parameters of the arena family: 2^n main branches plus two
    distinguished ones, binary blocks of height n, block codes w_k (the
    binary representation of k-1)."""

    n: int
    agents: tuple = ("a",)
    actions: tuple = ("a0", "a1")

    def __post_init__(self):
        if self.n < 1:
            raise ExperimentError("family parameter must be at least 1")

    @property
    def branches(self) -> int:
        return 2 ** self.n + 2

    def code(self, k: int) -> str:
        """Binary code of main branch k (1-based)."""
        if not 1 <= k <= 2 ** self.n:
            raise ExperimentError(f"no code for branch {k}")
        return format(k - 1, f"0{self.n}b")


def _block_words(n):
    out = [""]
    for _ in range(n):
        out = [w + c for w in out for c in "01"] + out
    # unique, ordered by length then value
    seen = sorted(set(out), key=lambda w: (len(w), w))
    return [w for w in seen if w]


def _family_nodes(spec: FamilySpec, p_nodes) -> list:
    """Skeleton shared by the whole family; `p_nodes` is the set of node
    ids carrying p."""
    n = spec.n
    nodes = []
    x_ids = [f"x{k}" for k in range(1, spec.branches + 1)]
    nodes.append(StructNode("eps", 0, frozenset(), tuple(x_ids)))
    for k in range(1, spec.branches + 1):
        label = {"p_a0"}
        if f"x{k}" in p_nodes:
            label.add("p")
        nodes.append(StructNode(f"x{k}", 1, frozenset(label), (f"y{k}",)))
        block = [("", f"y{k}", 2)]
        for w in _block_words(n):
            block.append((w, f"y{k}_{w}", 2 + len(w)))
        for w, nid, depth in block:
            if w == "":
                label = {"p_a0"}
            else:
                label = {"p_a0" if w[-1] == "0" else "p_a1"}
            if nid in p_nodes:
                label.add("p")
            if len(w) == n:
                nodes.append(StructNode(nid, depth, frozenset(label), (nid,), loop=True))
            else:
                mid = f"y{k}_" if w == "" else f"y{k}_{w}"
                kids = (mid + "0", mid + "1")
                nodes.append(StructNode(nid, depth, frozenset(label), kids))
    return nodes


def _make_arena(spec: FamilySpec, p_nodes) -> TreeArena:
    return TreeArena(
        _family_nodes(spec, frozenset(p_nodes)),
        "eps",
        spec.agents,
        {spec.agents[0]: spec.actions},
        base_props=("p",),
    )


def _p_nodes_for(spec: FamilySpec, i: int) -> frozenset:
    """Nodes carrying p in the i-th family member: the first 2^n branch
    tops, each main block at its own code, and both distinguished blocks
    at code w_i."""
    out = {f"x{k}" for k in range(1, 2 ** spec.n + 1)}
    for k in range(1, 2 ** spec.n + 1):
        out.add(f"y{k}_{spec.code(k)}")
    w_i = spec.code(i)
    out.add(f"y{2 ** spec.n + 1}_{w_i}")
    out.add(f"y{2 ** spec.n + 2}_{w_i}")
    return frozenset(out)


def build_family(spec: FamilySpec):
    """The arenas T_1 .. T_{2^n}, sharing one underlying tree."""
    return [_make_arena(spec, _p_nodes_for(spec, i)) for i in range(1, 2 ** spec.n + 1)]


def combine_t0(family, i: int, j: int) -> TreeArena:
    """T_i with the labels of the first distinguished block replaced by
    T_j's: p there moves from code w_i to code w_j."""
    if i == j:
        raise ExperimentError("combination requires two distinct trees")
    n_branches = len(family)
    spec = FamilySpec(n_branches.bit_length() - 1)
    if 2 ** spec.n != n_branches:
        raise ExperimentError("family size is not a power of two")
    if not (1 <= i <= n_branches and 1 <= j <= n_branches):
        raise ExperimentError("tree indices out of range")
    p_nodes = set(_p_nodes_for(spec, i))
    special = 2 ** spec.n + 1
    p_nodes.discard(f"y{special}_{spec.code(i)}")
    p_nodes.add(f"y{special}_{spec.code(j)}")
    return _make_arena(spec, frozenset(p_nodes))


def equal_level_profile() -> RelationProfile:
    return RelationProfile({"a": EqualLevel()})


def efp_automaton(states: int = 1) -> Jta:
    """Reachability automaton for p with the requested state count (one
    or two states, colour 1: any p-less cycle is losing)."""
    props = frozenset(ARENA_PROPS)
    if states == 1:
        delta = {}
        for letter in all_letters(props):
            delta[("q0", letter)] = BTrue() if "p" in letter else BAtom(DIA, "q0")
        return Jta(props, ("q0",), "q0", {"q0": 1}, delta)
    if states == 2:
        delta = {}
        for letter in all_letters(props):
            delta[("q0", letter)] = BTrue() if "p" in letter else BAtom(DIA, "q1")
            delta[("q1", letter)] = BTrue() if "p" in letter else BAtom(DIA, "q0")
        return Jta(props, ("q0", "q1"), "q0", {"q0": 1, "q1": 1}, delta)
    raise ExperimentError("only 1- and 2-state reachability automata are provided")


def coalition_reach_p() -> F.AtlFormula:
    return F.CoalitionUntil(
        ("a",), F.AtlOr(F.AtlProp("p"), F.AtlNot(F.AtlProp("p"))), F.AtlProp("p")
    )


# ---------------------------------------------------------------------------
# Report


@dataclass
class TreeResult:
    index: int
    atl_holds: bool
    witness_word: tuple | None
    accepted: bool
    visit_states: tuple


@dataclass
class ExperimentReport:
    n: int
    automaton_states: int
    trees: list = field(default_factory=list)
    collision: tuple | None = None
    t0_atl_holds: bool | None = None
    t0_reaches_p: bool | None = None
    t0_accepted: bool | None = None
    bisim_z_ok: bool | None = None
    bisim_z_prime_ok: bool | None = None
    exit_positions: int | None = None
    exits_all_winning: bool | None = None
    sigma0_verified: bool | None = None
    classification: str = "Inconclusive"
    failing_step: str | None = None

    def to_json_dict(self):
        return {
            "n": self.n,
            "automaton_states": self.automaton_states,
            "trees": [
                {
                    "index": t.index,
                    "atl_holds": t.atl_holds,
                    "witness_word": list(t.witness_word) if t.witness_word else None,
                    "accepted": t.accepted,
                    "visit_states": sorted(t.visit_states),
                }
                for t in self.trees
            ],
            "collision": list(self.collision) if self.collision else None,
            "t0": {
                "atl_holds": self.t0_atl_holds,
                "reaches_p": self.t0_reaches_p,
                "accepted": self.t0_accepted,
            },
            "bisimulations": {"z": self.bisim_z_ok, "z_prime": self.bisim_z_prime_ok},
            "combined_strategy": {
                "exit_positions": self.exit_positions,
                "exits_all_winning": self.exits_all_winning,
                "verified": self.sigma0_verified,
            },
            "classification": self.classification,
            "failing_step": self.failing_step,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Strategy word helpers


def strategy_word(q, profile: Profile, agent="a") -> tuple:
    """Per-level action word of a uniform strategy under the equal-level
    relation: one entry per exact level plus the saturated tail."""
    classes = uniformity_classes(q, agent)
    return tuple(profile.strategies[agent][cls[0]] for cls in classes)


def expected_witness_word(spec: FamilySpec, i: int) -> tuple:
    """a0 a0 w_i a0^omega, as a per-level word (tail entry last)."""
    w = ["a0", "a0"]
    w += ["a0" if c == "0" else "a1" for c in spec.code(i)]
    w.append("a0")  # saturated tail
    return tuple(w)


# ---------------------------------------------------------------------------
# Bisimulation relations of the cut-and-paste argument


def _node_block(node_id):
    """Block index and in-block word of a node, or None for the root and
    branch tops."""
    if not node_id.startswith("y"):
        return None
    head, _, w = node_id.partition("_")
    return int(head[1:]), w


def _family_pairs(qsys, game_left, game_right, special, into, out_of):
    """Cross-game pairs per the cut-and-paste bisimulation: identity on
    every block except `special`, block `special` mapped to block `into`,
    and block `out_of` mapped back to block `special`."""
    left_positions = set(game_left.positions)
    right_positions = set(game_right.positions)
    by_state = {}
    for pos in game_left.positions:
        by_state.setdefault(pos[0], []).append(pos)

    def partner_state(s, target_block):
        k, w = _node_block(qsys.node[s])
        node = f"y{target_block}" if w == "" else f"y{target_block}_{w}"
        name = f"{node}@{qsys.level[s]}"
        return qsys.state_index(name)

    pairs = set()
    for s in range(len(qsys)):
        blk = _node_block(qsys.node[s])
        if blk is None:
            continue
        k, _w = blk
        partners = []
        if k != special:
            partners.append(s)
        if k == special:
            partners.append(partner_state(s, into))
        if k == out_of:
            partners.append(partner_state(s, special))
        for s2 in partners:
            for pos in by_state.get(s, ()):
                cand = (s2, pos[1], pos[2])
                if cand in right_positions:
                    pairs.add((pos, cand))
    return pairs


# ---------------------------------------------------------------------------
# The experiment


def run_experiment(
    a: Jta,
    atl_mode: SemanticsMode = SemanticsMode.DE_RE,
    max_n: int = 6,
    workers: int | None = None,
) -> ExperimentReport:
    extra = a.props - frozenset(ARENA_PROPS)
    if extra:
        raise ExperimentError(
            "automaton alphabet mismatch: unexpected propositions "
            + ", ".join(sorted(extra))
        )
    bad_agents = a.agents - {"a"}
    if bad_agents:
        raise ExperimentError(
            "automaton alphabet mismatch: jumps on undeclared agents "
            + ", ".join(sorted(bad_agents))
        )
    n = len(a.states) + 1
    if n > max_n:
        raise ExperimentError(
            f"family parameter {n} exceeds the cap {max_n}; "
            "raise max_n for larger automata"
        )

    spec = FamilySpec(n)
    report = ExperimentReport(n=n, automaton_states=len(a.states))
    profile = equal_level_profile()
    family = build_family(spec)
    special1 = 2 ** n + 1
    special2 = 2 ** n + 2
    reach_p = F.parse_mu_formula("mu X. (p | <> X)")

    def examine(idx_tree):
        idx, tree = idx_tree
        q = build_quotient(tree, profile)
        p_states = frozenset(s for s in range(len(q)) if "p" in q.labels[s])
        full = frozenset(range(len(q)))
        witness = synthesize_profile(
            q, tree, ("a",), Until(full, p_states), q.root, mode=atl_mode
        )
        game = build_acceptance_game(a, q)
        result = solve(game)
        accepted = game.initial in result.eve_region
        visits = frozenset()
        if accepted:
            y_state = q.state_index(f"y{special1}@2")
            visits = visit_map(game, result.eve_strategy).get(y_state, frozenset())
        word = strategy_word(q, witness) if witness is not None else None
        return idx, q, game, result, accepted, witness, word, visits

    if workers is None:
        workers = min(8, len(family))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        examined = list(pool.map(examine, enumerate(family, start=1)))

    games = {}
    quotients = {}
    solves = {}
    for idx, q, game, result, accepted, witness, word, visits in examined:
        games[idx] = game
        quotients[idx] = q
        solves[idx] = result
        report.trees.append(
            TreeResult(
                index=idx,
                atl_holds=witness is not None,
                witness_word=word,
                accepted=accepted,
                visit_states=tuple(sorted(visits)),
            )
        )

    not_model = [t.index for t in report.trees if not t.atl_holds]
    if not_model:
        report.classification = "Inconclusive"
        report.failing_step = (
            f"tree {not_model[0]} unexpectedly falsifies the coalition property"
        )
        return report
    rejected = [t.index for t in report.trees if not t.accepted]
    if rejected:
        report.classification = f"RejectsAModel({rejected[0]})"
        return report

    # pigeonhole collision on the visit sets at the distinguished node;
    # lexicographically least pair, independent of solve scheduling
    visits = {t.index: t.visit_states for t in report.trees}
    collision = None
    for i_cand in sorted(visits):
        for j_cand in sorted(visits):
            if i_cand < j_cand and visits[i_cand] == visits[j_cand]:
                collision = (i_cand, j_cand)
                break
        if collision:
            break
    if collision is None:
        report.classification = "Inconclusive"
        report.failing_step = "no visit-set collision found (pigeonhole violated)"
        return report
    i, j = collision
    report.collision = (i, j)

    t0 = combine_t0(family, i, j)
    q0 = build_quotient(t0, profile)
    p_states = frozenset(s for s in range(len(q0)) if "p" in q0.labels[s])
    full = frozenset(range(len(q0)))
    t0_witness = synthesize_profile(
        q0, t0, ("a",), Until(full, p_states), q0.root, mode=atl_mode
    )
    report.t0_atl_holds = t0_witness is not None
    report.t0_reaches_p = q0.root in eval_mu(reach_p, q0)

    game0 = build_acceptance_game(a, q0)
    result0 = solve(game0)
    report.t0_accepted = game0.initial in result0.eve_region

    z = _family_pairs(q0, game0, games[i], special=special1, into=j, out_of=i)
    z_report = check_bisimulation(game0, games[i], z)
    report.bisim_z_ok = z_report.ok
    z_prime = _family_pairs(q0, game0, games[j], special=special2, into=i, out_of=j)
    z_prime_report = check_bisimulation(game0, games[j], z_prime)
    report.bisim_z_prime_ok = z_prime_report.ok

    sigma0, exits, all_winning = _assemble_sigma0(
        q0, game0, result0, solves[i].eve_strategy
    )
    report.exit_positions = len(exits)
    report.exits_all_winning = all_winning
    report.sigma0_verified = (
        verify_strategy(game0, sigma0, game0.initial) if all_winning else False
    )

    if report.t0_accepted:
        report.classification = "AcceptsANonModel(T_0)"
    else:
        report.classification = "Inconclusive"
        report.failing_step = "automaton rejects the combined tree"
    if report.t0_atl_holds:
        report.classification = "Inconclusive"
        report.failing_step = "combined tree unexpectedly satisfies the coalition property"
    return report


def _assemble_sigma0(q0, game0, result0, sigma_i):
    """Two-phase strategy: follow the i-th tree's winning strategy while
    the play stays over the top two levels, commit to the solver's
    strategy at the first exit."""

    def in_start(pos):
        return q0.level[pos[0]] in (0, 1)

    exits = set()
    seen = {game0.initial}
    stack = [game0.initial]
    while stack:
        pos = stack.pop()
        if not in_start(pos):
            exits.add(pos)
            continue
        if game0.terminal_winner(pos) is not None:
            continue
        if game0.owner[pos] == EVE:
            pick = sigma_i.get(pos)
            if pick is None or pick not in game0.moves[pos]:
                return None, exits, False
            succs = (pick,)
        else:
            succs = game0.moves[pos]
        for u in succs:
            if u not in seen:
                seen.add(u)
                stack.append(u)

    all_winning = all(pos in result0.eve_region for pos in exits)
    sigma0_map = result0.eve_strategy

    def choice(mem, pos):
        return sigma_i.get(pos) if mem == "start" else sigma0_map.get(pos)

    def update(mem, _src, dst):
        if mem == "committed" or not in_start(dst):
            return "committed"
        return "start"

    strategy = FiniteMemoryStrategy(("start", "committed"), "start", choice, update)
    return strategy, exits, all_winning


# ---------------------------------------------------------------------------
# Renderings


def render_tree_text(arena: TreeArena, name: str) -> str:
    """Compact text rendering: branch tops and the p-code of each block."""
    spec_n = max(len(nid.partition("_")[2]) for nid in arena.nodes if nid.startswith("y"))
    branches = sum(1 for nid in arena.nodes if nid.startswith("x"))
    lines = [f"{name}  (binary blocks of height {spec_n})"]
    root_label = sorted(arena.nodes["eps"].label)
    lines.append(f"  eps {set(root_label) if root_label else '{}'}  -> x1..x{branches} via a0")
    tops = [k for k in range(1, branches + 1) if "p" in arena.nodes[f"x{k}"].label]
    lines.append(f"  p at branch tops: {', '.join('x%d' % k for k in tops)}")
    for k in range(1, branches + 1):
        codes = sorted(
            nid.partition("_")[2]
            for nid in arena.nodes
            if nid.startswith(f"y{k}_") and "p" in arena.nodes[nid].label
        )
        where = " ".join(codes) if codes else "-"
        lines.append(f"  block y{k}: p at {where}")
    return "\n".join(lines)


def render_figure(family, i: int, j: int, t0: TreeArena) -> str:
    parts = [
        render_tree_text(family[i - 1], f"T_{i}"),
        render_tree_text(family[j - 1], f"T_{j}"),
        render_tree_text(t0, "T_0"),
    ]
    return "\n\n".join(parts) + "\n"
