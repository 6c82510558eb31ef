"""Parity games: solving, strategy verification, and game bisimulation.

Min-parity convention throughout: a play is winning for Eve iff the
least colour seen infinitely often is even.  Positions may be declared
terminals with a winner; an undeclared move-less position is lost by its
owner.  The solver is Zielonka's attractor recursion, with strategy ties
broken by smallest successor index so extracted witnesses are
reproducible.
"""

from __future__ import annotations

import itertools
import re
import sys
from dataclasses import dataclass

EVE = "E"
ADAM = "A"


class GameError(Exception):
    pass


def opponent(player):
    return ADAM if player == EVE else EVE


class ParityGame:
    def __init__(self, positions, owner, colour, moves, initial, terminals=None):
        self.positions = tuple(positions)
        self.owner = dict(owner)
        self.colour = dict(colour)
        self.moves = {v: tuple(moves.get(v, ())) for v in self.positions}
        self.initial = initial
        self.terminals = dict(terminals or {})
        self.index = {v: i for i, v in enumerate(self.positions)}
        self.validate()

    def validate(self):
        for v in self.positions:
            if self.owner.get(v) not in (EVE, ADAM):
                raise GameError(f"position {v!r} has no owner")
            if v not in self.colour:
                raise GameError(f"position {v!r} has no colour")
            for u in self.moves[v]:
                if u not in self.index:
                    raise GameError(f"move {v!r} -> {u!r} leaves the position set")
        for v, w in self.terminals.items():
            if v not in self.index:
                raise GameError(f"terminal {v!r} is not a position")
            if self.moves[v]:
                raise GameError(f"terminal {v!r} has moves")
            if w not in (EVE, ADAM):
                raise GameError(f"terminal {v!r} has winner {w!r}")
        if self.initial is not None and self.initial not in self.index:
            raise GameError(f"initial position {self.initial!r} unknown")

    def terminal_winner(self, v):
        """Winner of a move-less position; None if the position has moves."""
        if self.moves[v]:
            return None
        if v in self.terminals:
            return self.terminals[v]
        return opponent(self.owner[v])


@dataclass
class SolveResult:
    eve_region: frozenset
    adam_region: frozenset
    eve_strategy: dict
    adam_strategy: dict

    def winner(self, v):
        return EVE if v in self.eve_region else ADAM

    def region(self, player):
        return self.eve_region if player == EVE else self.adam_region

    def strategy(self, player):
        return self.eve_strategy if player == EVE else self.adam_strategy


def solve(g: ParityGame) -> SolveResult:
    """Zielonka's recursion.  Terminals are folded into self-loops whose
    colour encodes the declared winner, then stripped from the output."""
    moves = {}
    colour = {}
    sinks = set()
    for v in g.positions:
        w = g.terminal_winner(v)
        if w is None:
            moves[v] = g.moves[v]
            colour[v] = g.colour[v]
        else:
            sinks.add(v)
            moves[v] = (v,)
            colour[v] = 0 if w == EVE else 1

    order = g.index
    owner = g.owner

    def attract(region, target, player):
        attr = set(target)
        strat = {}
        frontier = True
        while frontier:
            frontier = False
            for v in sorted(region - attr, key=order.get):
                succs = [u for u in moves[v] if u in region]
                if owner[v] == player:
                    pick = next((u for u in succs if u in attr), None)
                    if pick is not None:
                        attr.add(v)
                        strat[v] = pick
                        frontier = True
                else:
                    if succs and all(u in attr for u in succs):
                        attr.add(v)
                        frontier = True
        return attr, strat

    def rec(region):
        if not region:
            return {EVE: set(), ADAM: set()}, {EVE: {}, ADAM: {}}
        c = min(colour[v] for v in region)
        player = EVE if c % 2 == 0 else ADAM
        opp = opponent(player)
        target = {v for v in region if colour[v] == c}
        attr, attr_strat = attract(region, target, player)
        sub_regions, sub_strats = rec(region - attr)
        if not sub_regions[opp]:
            win = {player: set(region), opp: set()}
            strat = {player: dict(sub_strats[player]), opp: {}}
            strat[player].update(attr_strat)
            for v in sorted(target, key=order.get):
                if owner[v] == player and v not in strat[player]:
                    inside = [u for u in moves[v] if u in region]
                    strat[player][v] = inside[0]
            return win, strat
        opp_attr, opp_strat = attract(region, sub_regions[opp], opp)
        final_regions, final_strats = rec(region - opp_attr)
        win = {
            player: set(final_regions[player]),
            opp: set(final_regions[opp]) | opp_attr,
        }
        strat = {player: dict(final_strats[player]), opp: dict(final_strats[opp])}
        strat[opp].update(opp_strat)
        strat[opp].update(sub_strats[opp])
        return win, strat

    # only ever raise the limit: games may be solved from several threads,
    # and restoring could yank it from under a deeper concurrent solve
    need = 2 * len(g.positions) + 200
    if need > sys.getrecursionlimit():
        sys.setrecursionlimit(need)
    win, strat = rec(set(g.positions))

    eve_strategy = {
        v: u for v, u in strat[EVE].items() if v not in sinks and owner[v] == EVE
    }
    adam_strategy = {
        v: u for v, u in strat[ADAM].items() if v not in sinks and owner[v] == ADAM
    }
    return SolveResult(
        frozenset(win[EVE]), frozenset(win[ADAM]), eve_strategy, adam_strategy
    )


# ---------------------------------------------------------------------------
# Strategies


@dataclass
class FiniteMemoryStrategy:
    """Two-phase and other small-memory strategies: a choice per
    (memory, position) and a memory update observed on every move."""

    memories: tuple
    initial_memory: object
    choice: object  # callable (mem, pos) -> pos, or dict
    update: object  # callable (mem, src, dst) -> mem

    def choose(self, mem, pos):
        if callable(self.choice):
            return self.choice(mem, pos)
        return self.choice.get((mem, pos))

    def advance(self, mem, src, dst):
        return self.update(mem, src, dst)


def _strategy_graph(g: ParityGame, strategy, player):
    """Product of the game with the strategy: nodes (mem, pos); the
    strategy restricts the given player's moves.  Positional strategies
    use a single dummy memory."""
    fms = strategy if isinstance(strategy, FiniteMemoryStrategy) else None

    def succ(node):
        mem, pos = node
        if g.terminal_winner(pos) is not None:
            return [], None
        if g.owner[pos] == player:
            if fms is None:
                pick = strategy.get(pos)
            else:
                pick = fms.choose(mem, pos)
            if pick is None:
                return None, f"strategy undefined at reachable position {pos!r}"
            if pick not in g.moves[pos]:
                return None, f"strategy at {pos!r} proposes an illegal move to {pick!r}"
            picks = [pick]
        else:
            picks = list(g.moves[pos])
        if fms is None:
            return [(mem, u) for u in picks], None
        return [(fms.advance(mem, pos, u), u) for u in picks], None

    return succ


def verify_strategy(g: ParityGame, strategy, frm, player=EVE, explain=False):
    """True iff every play from `frm` that follows the strategy is won by
    the given player: all reachable cycles have the player's parity as
    their minimal colour, and all reachable terminals are wins."""
    if frm not in g.index:
        raise GameError(f"unknown position {frm!r}")
    init_mem = (
        strategy.initial_memory if isinstance(strategy, FiniteMemoryStrategy) else None
    )
    start = (init_mem, frm)
    succ_fun = _strategy_graph(g, strategy, player)

    nodes = {start}
    edges = {}
    stack = [start]
    while stack:
        node = stack.pop()
        succs, problem = succ_fun(node)
        if problem is not None:
            return (False, problem) if explain else False
        edges[node] = succs
        for s in succs:
            if s not in nodes:
                nodes.add(s)
                stack.append(s)

    good_parity = 0 if player == EVE else 1
    for node in nodes:
        mem, pos = node
        w = g.terminal_winner(pos)
        if w is not None and w != player:
            reason = f"reachable terminal {pos!r} is won by the opponent"
            return (False, reason) if explain else False

    # a bad cycle has odd (resp. even) minimal colour; check per colour c of
    # the bad parity whether the subgraph of colours >= c has a cycle
    # through a colour-c node
    colours = sorted({g.colour[pos] for _, pos in nodes})
    for c in colours:
        if c % 2 == good_parity:
            continue
        sub = {n for n in nodes if g.colour[n[1]] >= c}
        for scc in _sccs(sub, edges):
            if len(scc) == 1:
                n = next(iter(scc))
                nontrivial = n in edges.get(n, ())
            else:
                nontrivial = True
            if nontrivial and any(g.colour[n[1]] == c for n in scc):
                reason = f"reachable cycle with minimal colour {c}"
                return (False, reason) if explain else False
    return (True, None) if explain else True


def _sccs(nodes, edges):
    """Tarjan's algorithm, iterative, restricted to the given node set."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    out = []
    counter = [0]

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter([u for u in edges.get(root, ()) if u in nodes]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for u in it:
                if u not in index:
                    index[u] = low[u] = counter[0]
                    counter[0] += 1
                    stack.append(u)
                    on_stack.add(u)
                    work.append((u, iter([x for x in edges.get(u, ()) if x in nodes])))
                    advanced = True
                    break
                if u in on_stack:
                    low[node] = min(low[node], index[u])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == node:
                        break
                out.append(comp)
    return out


# ---------------------------------------------------------------------------
# Bisimulation


@dataclass
class BisimReport:
    ok: bool
    violations: list  # (pair, clause, detail)

    @property
    def first(self):
        return self.violations[0] if self.violations else None


def check_bisimulation(g1: ParityGame, g2: ParityGame, pairs) -> BisimReport:
    """Colour Harmony, Zig, and Zag for every pair; the report carries
    the witnesses of every violated clause."""
    pairset = set(pairs)
    violations = []
    for v, v2 in pairset:
        if v not in g1.index or v2 not in g2.index:
            violations.append(((v, v2), "domain", "pair references unknown positions"))
            continue
        if g1.colour[v] != g2.colour[v2]:
            violations.append(
                (
                    (v, v2),
                    "colour harmony",
                    f"{g1.colour[v]} != {g2.colour[v2]}",
                )
            )
        for u in g1.moves[v]:
            if not any((u, u2) in pairset for u2 in g2.moves[v2]):
                violations.append(((v, v2), "zig", f"move to {u!r} has no match"))
                break
        for u2 in g2.moves[v2]:
            if not any((u, u2) in pairset for u in g1.moves[v]):
                violations.append(((v, v2), "zag", f"move to {u2!r} has no match"))
                break
    return BisimReport(not violations, violations)


@dataclass
class RelationalSystem:
    """A labelled multi-relation structure for partition refinement:
    states, a base classification, and named successor functions."""

    states: tuple
    base_key: object  # callable state -> hashable
    relations: dict  # name -> callable state -> iterable of states
    initial: object = None


def _game_as_system(g: ParityGame) -> RelationalSystem:
    def base(v):
        # owner and declared winner refine the paper's colour harmony:
        # without them related positions need not share a winner
        return (g.colour[v], g.owner[v], g.terminal_winner(v))

    return RelationalSystem(
        states=g.positions,
        base_key=base,
        relations={"move": lambda v: g.moves[v]},
        initial=g.initial,
    )


def _quotient_as_system(q) -> RelationalSystem:
    maps = q.relation_maps()
    states = tuple(range(len(q)))
    return RelationalSystem(
        states=states,
        base_key=lambda s: q.labels[s],
        relations={name: (lambda s, m=m: m[s]) for name, m in maps.items()},
        initial=q.root,
    )


def as_relational_system(x) -> RelationalSystem:
    if isinstance(x, RelationalSystem):
        return x
    if isinstance(x, ParityGame):
        return _game_as_system(x)
    if hasattr(x, "relation_maps"):
        return _quotient_as_system(x)
    raise TypeError(f"cannot view {type(x).__name__} as a relational system")


def max_bisimulation(a, b):
    """Largest bisimulation between the two structures, by partition
    refinement on their disjoint union.  Returns a frozenset of cross
    pairs (state of a, state of b)."""
    sa, sb = as_relational_system(a), as_relational_system(b)
    if set(sa.relations) != set(sb.relations):
        raise GameError(
            "structures expose different relation names: "
            f"{sorted(sa.relations)} vs {sorted(sb.relations)}"
        )
    rel_names = sorted(sa.relations)
    states = [("L", s) for s in sa.states] + [("R", t) for t in sb.states]

    def successors(tagged, name):
        tag, s = tagged
        sys_ = sa if tag == "L" else sb
        return [(tag, u) for u in sys_.relations[name](s)]

    def base(tagged):
        tag, s = tagged
        return (sa if tag == "L" else sb).base_key(s)

    block = {}
    canon = {}
    for st in states:
        key = base(st)
        if key not in canon:
            canon[key] = len(canon)
        block[st] = canon[key]

    while True:
        sigs = {}
        new_block = {}
        for st in states:
            sig = (
                block[st],
                tuple(
                    frozenset(block[u] for u in successors(st, name))
                    for name in rel_names
                ),
            )
            if sig not in sigs:
                sigs[sig] = len(sigs)
            new_block[st] = sigs[sig]
        refined = len(set(new_block.values())) > len(set(block.values()))
        block = new_block
        if not refined:
            break

    return frozenset(
        (s, t)
        for s in sa.states
        for t in sb.states
        if block[("L", s)] == block[("R", t)]
    )


# ---------------------------------------------------------------------------
# Brute-force oracle


def brute_force_winner(g: ParityGame, frm, cap=10):
    """Winner at `frm` by enumerating the positional strategies of both
    players and deciding each forced play by its cycle's minimal colour.
    Sound by positional determinacy; intended as an oracle for `solve`."""
    if len(g.positions) > cap:
        raise GameError(f"brute force cap exceeded: {len(g.positions)} > {cap}")

    def choice_positions(player):
        return [
            v
            for v in g.positions
            if g.owner[v] == player and g.terminal_winner(v) is None
        ]

    eve_sites = choice_positions(EVE)
    adam_sites = choice_positions(ADAM)

    def play_winner(eve_map, adam_map):
        seen = {}
        trail = []
        v = frm
        while True:
            w = g.terminal_winner(v)
            if w is not None:
                return w
            if v in seen:
                cycle = trail[seen[v]:]
                least = min(g.colour[u] for u in cycle)
                return EVE if least % 2 == 0 else ADAM
            seen[v] = len(trail)
            trail.append(v)
            v = eve_map[v] if g.owner[v] == EVE else adam_map[v]

    for eve_choices in itertools.product(*(g.moves[v] for v in eve_sites)):
        eve_map = dict(zip(eve_sites, eve_choices))
        if all(
            play_winner(eve_map, dict(zip(adam_sites, adam_choices))) == EVE
            for adam_choices in itertools.product(*(g.moves[v] for v in adam_sites))
        ):
            return EVE
    return ADAM


# ---------------------------------------------------------------------------
# Text format


def format_game(g: ParityGame) -> str:
    lines = []
    for v in g.positions:
        line = f"pos {v} owner {g.owner[v]} color {g.colour[v]}"
        if g.moves[v]:
            line += " moves " + ",".join(str(u) for u in g.moves[v])
        lines.append(line)
    for v, w in sorted(g.terminals.items(), key=lambda kv: str(kv[0])):
        lines.append(f"terminal {v} winner {w}")
    if g.initial is not None:
        lines.append(f"initial {g.initial}")
    return "\n".join(lines) + "\n"


def parse_game(text: str) -> ParityGame:
    positions = []
    owner = {}
    colour = {}
    moves = {}
    terminals = {}
    initial = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        if line.startswith("pos "):
            m = re.match(
                r"pos\s+(\S+)\s+owner\s+([EA])\s+color\s+(\d+)(?:\s+moves\s+(\S+))?$",
                line,
            )
            if not m:
                raise GameError(f"{where}: cannot parse position line: {line!r}")
            v = m.group(1)
            positions.append(v)
            owner[v] = m.group(2)
            colour[v] = int(m.group(3))
            moves[v] = tuple(m.group(4).split(",")) if m.group(4) else ()
        elif line.startswith("terminal "):
            m = re.match(r"terminal\s+(\S+)\s+winner\s+([EA])$", line)
            if not m:
                raise GameError(f"{where}: cannot parse terminal line: {line!r}")
            terminals[m.group(1)] = m.group(2)
        elif line.startswith("initial "):
            initial = line[len("initial "):].strip()
        else:
            raise GameError(f"{where}: unrecognized line: {line!r}")
    return ParityGame(positions, owner, colour, moves, initial, terminals)
