"""Jumping tree automata and their acceptance games over quotient
systems.

A jumping automaton reads labelled trees with an alternating parity
automaton's machinery plus per-agent jump directions that move along the
relation profile instead of down the tree.  Acceptance is a two-player
parity game between Eve (the proponent) and Adam: disjunctions, child
and jump diamonds belong to Eve, the duals to Adam; `true`/`false`
positions are terminals won by Eve and Adam respectively; a position's
colour is its automaton state's colour.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .games import ADAM, EVE, ParityGame, solve
from .worlds import QuotientSystem, all_letters, build_quotient


class JtaError(Exception):
    pass


# ---------------------------------------------------------------------------
# Directions and positive boolean formulas


@dataclass(frozen=True)
class Dir:
    kind: str  # dia | box | jdia | jbox
    agent: str | None = None

    def __post_init__(self):
        if self.kind in ("dia", "box") and self.agent is not None:
            raise JtaError("child directions carry no agent")
        if self.kind in ("jdia", "jbox") and self.agent is None:
            raise JtaError("jump directions need an agent")

    def __str__(self):
        return self.kind if self.agent is None else f"{self.kind} {self.agent}"


DIA = Dir("dia")
BOX = Dir("box")


def jdia(agent):
    return Dir("jdia", agent)


def jbox(agent):
    return Dir("jbox", agent)


@dataclass(frozen=True)
class BoolPos:
    pass


@dataclass(frozen=True)
class BTrue(BoolPos):
    pass


@dataclass(frozen=True)
class BFalse(BoolPos):
    pass


@dataclass(frozen=True)
class BAtom(BoolPos):
    direction: Dir
    state: str


@dataclass(frozen=True)
class BAnd(BoolPos):
    left: BoolPos
    right: BoolPos


@dataclass(frozen=True)
class BOr(BoolPos):
    left: BoolPos
    right: BoolPos


def bor(left: BoolPos, right: BoolPos) -> BoolPos:
    if isinstance(left, BTrue) or isinstance(right, BTrue):
        return BTrue()
    if isinstance(left, BFalse):
        return right
    if isinstance(right, BFalse):
        return left
    return BOr(left, right)


def band(left: BoolPos, right: BoolPos) -> BoolPos:
    if isinstance(left, BFalse) or isinstance(right, BFalse):
        return BFalse()
    if isinstance(left, BTrue):
        return right
    if isinstance(right, BTrue):
        return left
    return BAnd(left, right)


def boolpos_size(b: BoolPos) -> int:
    if isinstance(b, (BAnd, BOr)):
        return 1 + boolpos_size(b.left) + boolpos_size(b.right)
    return 1


def boolpos_atoms(b: BoolPos):
    if isinstance(b, BAtom):
        yield b
    elif isinstance(b, (BAnd, BOr)):
        yield from boolpos_atoms(b.left)
        yield from boolpos_atoms(b.right)


def format_boolpos(b: BoolPos) -> str:
    if isinstance(b, BTrue):
        return "true"
    if isinstance(b, BFalse):
        return "false"
    if isinstance(b, BAtom):
        return f"({b.direction}, {b.state})"
    if isinstance(b, BAnd):
        return f"{_fmt_tight(b.left)} & {_fmt_tight(b.right)}"
    if isinstance(b, BOr):
        left = format_boolpos(b.left)
        right = format_boolpos(b.right)
        return f"{left} | {right}"
    raise TypeError(f"not a boolean position: {b!r}")


def _fmt_tight(b: BoolPos) -> str:
    # conjunction binds tighter than disjunction
    if isinstance(b, BOr):
        return "(" + format_boolpos(b) + ")"
    return format_boolpos(b)


# ---------------------------------------------------------------------------
# Automata


class Jta:
    def __init__(self, props, states, initial, colour, delta, state_info=None):
        self.props = frozenset(props)
        self.states = tuple(states)
        self.initial = initial
        self.colour = dict(colour)
        self.delta = dict(delta)
        self.state_info = dict(state_info or {})
        self.validate()

    @property
    def agents(self):
        out = set()
        for b in self.delta.values():
            for atom in boolpos_atoms(b):
                if atom.direction.agent is not None:
                    out.add(atom.direction.agent)
        return frozenset(out)

    def size(self) -> int:
        """Size of the transition function: total size of its formulas."""
        return sum(boolpos_size(b) for b in self.delta.values())

    def validate(self):
        if self.initial not in self.states:
            raise JtaError(f"unknown initial state {self.initial}")
        for q in self.states:
            if q not in self.colour:
                raise JtaError(f"state {q} has no colour")
            for letter in all_letters(self.props):
                if (q, letter) not in self.delta:
                    raise JtaError(
                        f"transition function undefined at ({q}, {set(letter) or '{}'})"
                    )
        for (q, letter), b in self.delta.items():
            if q not in self.states:
                raise JtaError(f"transition from unknown state {q}")
            if not letter <= self.props:
                raise JtaError(f"transition letter {set(letter)} outside the alphabet")
            for atom in boolpos_atoms(b):
                if atom.state not in self.states:
                    raise JtaError(f"transition targets unknown state {atom.state}")


# ---------------------------------------------------------------------------
# Acceptance games


def _position_owner(b: BoolPos) -> str:
    if isinstance(b, BOr):
        return EVE
    if isinstance(b, BAtom) and b.direction.kind in ("dia", "jdia"):
        return EVE
    return ADAM


def build_acceptance_game(a: Jta, q: QuotientSystem) -> ParityGame:
    """Parity game whose positions are (quotient state, automaton state,
    boolean formula), restricted to those reachable from the root."""
    missing = a.agents - set(q.agents)
    if missing:
        raise JtaError(
            "automaton jumps on agents absent from the profile: "
            + ", ".join(sorted(missing))
        )

    def dlt(state, label):
        return a.delta[(state, label & a.props)]

    initial = (q.root, a.initial, dlt(a.initial, q.labels[q.root]))
    positions = [initial]
    index = {initial: 0}
    owner = {}
    colour = {}
    moves = {}
    terminals = {}

    def intern(pos):
        if pos not in index:
            index[pos] = len(positions)
            positions.append(pos)
        return pos

    i = 0
    while i < len(positions):
        pos = positions[i]
        x, s, b = pos
        colour[pos] = a.colour[s]
        owner[pos] = _position_owner(b)
        if isinstance(b, BTrue):
            terminals[pos] = EVE
            moves[pos] = ()
        elif isinstance(b, BFalse):
            terminals[pos] = ADAM
            moves[pos] = ()
        elif isinstance(b, (BAnd, BOr)):
            moves[pos] = (intern((x, s, b.left)), intern((x, s, b.right)))
        elif isinstance(b, BAtom):
            if b.direction.kind in ("dia", "box"):
                targets = q.children[x]
            else:
                targets = q.jumps[b.direction.agent][x]
            moves[pos] = tuple(
                intern((y, b.state, dlt(b.state, q.labels[y]))) for y in targets
            )
        else:
            raise TypeError(f"not a boolean position: {b!r}")
        i += 1

    return ParityGame(positions, owner, colour, moves, initial, terminals)


def accepts(a: Jta, s, profile) -> bool:
    """True iff Eve wins the acceptance game on the structure's quotient."""
    q = build_quotient(s, profile)
    return accepts_quotient(a, q)


def accepts_quotient(a: Jta, q: QuotientSystem) -> bool:
    game = build_acceptance_game(a, q)
    return game.initial in solve(game).eve_region


def strategy_reachable(game: ParityGame, strategy, frm=None):
    """Positions reachable from `frm` when Eve's moves follow the
    positional strategy and Adam moves freely."""
    start = game.initial if frm is None else frm
    seen = {start}
    stack = [start]
    while stack:
        pos = stack.pop()
        if game.terminal_winner(pos) is not None:
            continue
        if game.owner[pos] == EVE:
            pick = strategy.get(pos)
            if pick is None:
                raise JtaError(f"strategy undefined at reachable Eve position {pos!r}")
            succs = (pick,)
        else:
            succs = game.moves[pos]
        for u in succs:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen


def visit_map(game: ParityGame, strategy, frm=None):
    """Automaton states in which the strategy's plays visit each quotient
    state."""
    out = {}
    for x, s, _b in strategy_reachable(game, strategy, frm):
        out.setdefault(x, set()).add(s)
    return {x: frozenset(v) for x, v in out.items()}


def visit_set(game: ParityGame, strategy, node) -> frozenset:
    """States in which the strategy visits the given quotient state."""
    return visit_map(game, strategy).get(node, frozenset())


# ---------------------------------------------------------------------------
# Text format


def format_jta(a: Jta) -> str:
    lines = ["props " + ",".join(sorted(a.props))]
    for s in a.states:
        lines.append(f"state {s} color {a.colour[s]}")
    lines.append(f"initial {a.initial}")
    for s in a.states:
        for letter in all_letters(a.props):
            body = format_boolpos(a.delta[(s, letter)])
            lines.append("on " + s + " {" + ",".join(sorted(letter)) + "} := " + body)
    return "\n".join(lines) + "\n"


_ATOM_RE = re.compile(r"\(\s*(dia|box|jdia\s+\S+|jbox\s+\S+)\s*,\s*(\S+?)\s*\)")


class _BoolPosParser:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def error(self, message):
        raise JtaError(f"{message} in transition body {self.text!r} at {self.pos}")

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def parse(self) -> BoolPos:
        b = self.parse_or()
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("trailing input")
        return b

    def parse_or(self) -> BoolPos:
        b = self.parse_and()
        while True:
            self.skip_ws()
            if self.pos < len(self.text) and self.text[self.pos] == "|":
                self.pos += 1
                b = BOr(b, self.parse_and())
            else:
                return b

    def parse_and(self) -> BoolPos:
        b = self.parse_atom()
        while True:
            self.skip_ws()
            if self.pos < len(self.text) and self.text[self.pos] == "&":
                self.pos += 1
                b = BAnd(b, self.parse_atom())
            else:
                return b

    def parse_atom(self) -> BoolPos:
        self.skip_ws()
        if self.text.startswith("true", self.pos):
            self.pos += 4
            return BTrue()
        if self.text.startswith("false", self.pos):
            self.pos += 5
            return BFalse()
        if self.pos < len(self.text) and self.text[self.pos] == "(":
            m = _ATOM_RE.match(self.text, self.pos)
            if m:
                self.pos = m.end()
                head = m.group(1).split()
                direction = Dir(head[0], head[1] if len(head) > 1 else None)
                return BAtom(direction, m.group(2))
            # parenthesized subformula
            self.pos += 1
            b = self.parse_or()
            self.skip_ws()
            if self.pos >= len(self.text) or self.text[self.pos] != ")":
                self.error("expected ')'")
            self.pos += 1
            return b
        self.error("expected an atom")


def parse_boolpos(text: str) -> BoolPos:
    return _BoolPosParser(text).parse()


def parse_jta(text: str) -> Jta:
    from .worlds import _parse_label_set

    props = None
    states = []
    colour = {}
    initial = None
    delta = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        if line.startswith("props"):
            body = line[len("props"):].lstrip(": ").strip()
            props = frozenset(p.strip() for p in body.split(",") if p.strip())
        elif line.startswith("state "):
            m = re.match(r"state\s+(\S+)\s+color\s+(\d+)$", line)
            if not m:
                raise JtaError(f"{where}: cannot parse state line: {line!r}")
            states.append(m.group(1))
            colour[m.group(1)] = int(m.group(2))
        elif line.startswith("initial "):
            initial = line[len("initial "):].strip()
        elif line.startswith("on "):
            m = re.match(r"on\s+(\S+)\s+(\{[^}]*\})\s*:=\s*(.*)$", line)
            if not m:
                raise JtaError(f"{where}: cannot parse transition line: {line!r}")
            letter = _parse_label_set(m.group(2), where)
            delta[(m.group(1), letter)] = parse_boolpos(m.group(3))
        else:
            raise JtaError(f"{where}: unrecognized line: {line!r}")
    if props is None:
        props = frozenset().union(*(letter for (_q, letter) in delta)) if delta else frozenset()
    if initial is None:
        raise JtaError("automaton file declares no initial state")
    return Jta(props, states, initial, colour, delta)
