"""Finite representations of infinite labelled trees and tree-arenas,
relation backends for agent indistinguishability, and the finite
multi-modal quotient on which all evaluation happens.

A LeveledStructure is a depth-stratified finite graph whose leaves carry
self-loops; unfolding it yields an infinite tree.  Node words (the label
sequence from the root down, root label included) drive the relation
backends: equal-level relates words of equal length, recognizable
relations are finite unions of products of regular word languages, and
explicit relations list quotient-state pairs directly.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

INF = "inf"  # saturation level for everything at or beyond the max depth


class WorldError(Exception):
    pass


# ---------------------------------------------------------------------------
# Structures


@dataclass(frozen=True)
class StructNode:
    id: str
    depth: int
    label: frozenset
    children: tuple
    loop: bool = False


class LeveledStructure:
    def __init__(self, nodes, root, props=None):
        self.nodes = {n.id: n for n in nodes}
        self.root = root
        inferred = frozenset().union(*(n.label for n in nodes)) if nodes else frozenset()
        self.props = frozenset(props) if props is not None else inferred

    def max_depth(self) -> int:
        return max(n.depth for n in self.nodes.values())

    def validate(self):
        """Invariant diagnostics; empty list means valid."""
        out = []
        if self.root not in self.nodes:
            return [f"root {self.root} is not a node"]
        root = self.nodes[self.root]
        if root.depth != 0:
            out.append(f"root clause: node {self.root} has depth {root.depth}, expected 0")
        incoming = {}
        for n in self.nodes.values():
            for c in n.children:
                if c not in self.nodes:
                    out.append(f"edge clause: node {n.id} lists unknown child {c}")
                    continue
                if not (n.loop and c == n.id):
                    incoming.setdefault(c, []).append(n.id)
                    if self.nodes[c].depth != n.depth + 1:
                        out.append(
                            f"level clause: edge {n.id} -> {c} goes from depth "
                            f"{n.depth} to {self.nodes[c].depth}"
                        )
        if self.root in incoming:
            out.append(
                f"root clause: node {self.root} has incoming edge from "
                f"{incoming[self.root][0]}"
            )
        for n in self.nodes.values():
            if not n.children:
                out.append(f"totality clause: node {n.id} has no successor")
            if n.loop and n.children != (n.id,):
                out.append(f"loop clause: loop-leaf {n.id} must have exactly a self-edge")
            if not n.loop and n.id in n.children:
                out.append(f"loop clause: node {n.id} has a self-edge but is not a loop-leaf")
            extra = n.label - self.props
            if extra:
                out.append(
                    f"label clause: node {n.id} uses undeclared propositions "
                    + ", ".join(sorted(extra))
                )
        return out


def action_prop(compound) -> str:
    """Proposition name stamped on a node reached by a compound action."""
    return "p_" + "+".join(compound)


class TreeArena(LeveledStructure):
    def __init__(self, nodes, root, agents, actions, base_props=None):
        self.agents = tuple(agents)
        self.actions = {a: tuple(actions[a]) for a in self.agents}
        self.compounds = tuple(itertools.product(*(self.actions[a] for a in self.agents)))
        self.action_props = frozenset(action_prop(c) for c in self.compounds)
        if base_props is None:
            labels = frozenset().union(*(n.label for n in nodes)) if nodes else frozenset()
            base_props = labels - self.action_props
        self.base_props = frozenset(base_props)
        super().__init__(nodes, root, props=self.base_props | self.action_props)
        self._compound_by_prop = {action_prop(c): c for c in self.compounds}

    def compound_of(self, label):
        """The unique compound action stamped on a label, or None."""
        hits = [self._compound_by_prop[p] for p in label if p in self._compound_by_prop]
        if len(hits) > 1:
            raise WorldError("label carries more than one action proposition")
        return hits[0] if hits else None

    def validate(self):
        out = super().validate()
        root_label = self.nodes[self.root].label if self.root in self.nodes else frozenset()
        if root_label & self.action_props:
            out.append("root clause: root label contains an action proposition")
        for n in self.nodes.values():
            if n.id == self.root:
                continue
            stamps = n.label & self.action_props
            if len(stamps) != 1:
                out.append(
                    f"singleton clause: node {n.id} carries {len(stamps)} action "
                    "propositions, expected exactly 1"
                )
        return out


def validate(s: LeveledStructure):
    return s.validate()


def _path_id(path):
    return "/".join(path) if path else "/"


def unfold_prefix(s: LeveledStructure, depth: int) -> LeveledStructure:
    """Depth-bounded unfolding as an explicit tree.  Frontier nodes that
    are copies of loop-leaves become loop-leaves of the result, so for
    depth >= max_depth the result is itself a valid structure."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    nodes = []

    def rec(node_id, path, d):
        node = s.nodes[node_id]
        pid = _path_id(path)
        if d == depth:
            nodes.append(
                StructNode(pid, d, node.label, (pid,) if node.loop else (), loop=node.loop)
            )
            return
        kids = []
        for idx, c in enumerate(node.children):
            cpath = path + (f"{idx}:{c}",)
            kids.append(_path_id(cpath))
            rec(c, cpath, d + 1)
        nodes.append(StructNode(pid, d, node.label, tuple(kids)))

    rec(s.root, (), 0)
    return LeveledStructure(nodes, "/", props=s.props)


# ---------------------------------------------------------------------------
# Word automata and recognizable relations


@dataclass
class Dfa:
    states: tuple
    initial: str
    accepting: frozenset
    props: frozenset
    trans: dict  # (state, frozenset letter) -> state

    def validate(self):
        out = []
        for q in self.states:
            for a in all_letters(self.props):
                if (q, a) not in self.trans:
                    out.append(f"missing transition from {q} on {set(a) or '{}'}")
        if self.initial not in self.states:
            out.append(f"unknown initial state {self.initial}")
        for q in self.accepting:
            if q not in self.states:
                out.append(f"unknown accepting state {q}")
        return out

    def step(self, q, letter):
        return self.trans[(q, letter)]

    def run(self, word):
        q = self.initial
        for letter in word:
            q = self.step(q, letter)
        return q

    def accepts_word(self, word) -> bool:
        return self.run(word) in self.accepting


def all_letters(props):
    props = sorted(props)
    out = []
    for k in range(len(props) + 1):
        for combo in itertools.combinations(props, k):
            out.append(frozenset(combo))
    return out


def sigma_star_dfa(props) -> Dfa:
    trans = {("s", a): "s" for a in all_letters(props)}
    return Dfa(("s",), "s", frozenset(("s",)), frozenset(props), trans)


@dataclass
class RecognizableRelation:
    pairs: list  # list of (Dfa, Dfa)
    props: frozenset

    def validate(self):
        out = []
        for k, (left, right) in enumerate(self.pairs):
            if left.props != self.props or right.props != self.props:
                out.append(f"pair {k}: component alphabet differs from the relation's")
            out.extend(f"pair {k} left: {m}" for m in left.validate())
            out.extend(f"pair {k} right: {m}" for m in right.validate())
        return out


def relate(rel: RecognizableRelation, w, w2) -> bool:
    """Membership of the word pair: true iff some component product
    accepts it."""
    for letter in list(w) + list(w2):
        if not letter <= rel.props:
            raise WorldError("word letter outside the relation alphabet")
    return any(
        left.accepts_word(w) and right.accepts_word(w2) for left, right in rel.pairs
    )


_HASH = "#"


def separated_language_dfa(rel: RecognizableRelation):
    """Complete DFA (as a table) for the words `w # w'` with w related to
    w', over the label alphabet extended by the separator.  Built by
    union/concatenation NFA plus subset construction; returns
    (state count, transitions, accepting indices, letters)."""
    letters = all_letters(rel.props) + [_HASH]
    initials = frozenset(("L", k, left.initial) for k, (left, _) in enumerate(rel.pairs))

    def nfa_step(state_set, letter):
        out = set()
        for tag, k, q in state_set:
            left, right = rel.pairs[k]
            if letter == _HASH:
                if tag == "L" and q in left.accepting:
                    out.add(("R", k, right.initial))
            else:
                dfa = left if tag == "L" else right
                out.add((tag, k, dfa.step(q, letter)))
        return frozenset(out)

    def accepting(state_set):
        return any(tag == "R" and q in rel.pairs[k][1].accepting for tag, k, q in state_set)

    states = [initials]
    index = {initials: 0}
    trans = {}
    acc = set()
    i = 0
    while i < len(states):
        cur = states[i]
        if accepting(cur):
            acc.add(i)
        for letter in letters:
            nxt = nfa_step(cur, letter)
            if nxt not in index:
                index[nxt] = len(states)
                states.append(nxt)
            trans[(i, letter)] = index[nxt]
        i += 1
    return len(states), trans, frozenset(acc), letters


def hopcroft_class_count(n_states, trans, accepting, letters) -> int:
    """Number of classes of the coarsest congruence refining the
    accepting/rejecting split (Hopcroft's worklist algorithm).  All
    states are assumed reachable; the automaton must be complete."""
    preimage = {a: {} for a in letters}
    for (q, a), r in trans.items():
        preimage[a].setdefault(r, set()).add(q)
    all_states = frozenset(range(n_states))
    partition = {frozenset(accepting), all_states - accepting} - {frozenset()}
    work = set(partition)
    while work:
        splitter = work.pop()
        for a in letters:
            pre = set()
            for r in splitter:
                pre |= preimage[a].get(r, set())
            if not pre:
                continue
            next_partition = set()
            for block in partition:
                inter = frozenset(block & pre)
                diff = frozenset(block - pre)
                if inter and diff:
                    next_partition |= {inter, diff}
                    if block in work:
                        work.discard(block)
                        work |= {inter, diff}
                    else:
                        work.add(inter if len(inter) <= len(diff) else diff)
                else:
                    next_partition.add(block)
            partition = next_partition
    return len(partition)


def rel_size(rel: RecognizableRelation) -> int:
    """States of the minimal complete word automaton for the separated
    pair language of the relation."""
    n, trans, acc, letters = separated_language_dfa(rel)
    return hopcroft_class_count(n, trans, acc, letters)


# ---------------------------------------------------------------------------
# Relation profiles


@dataclass(frozen=True)
class EqualLevel:
    """Synchronous blindfold: words related iff equal length."""


@dataclass(frozen=True)
class Explicit:
    """Pairs of quotient-state names `node@level`, related directly.  The
    DFA-vector suffix other agents' recognizable backends may add to the
    canonical state key is ignored here: a pair relates every vector
    variant of its endpoints."""

    pairs: tuple


@dataclass(frozen=True)
class Recognizable:
    relation: RecognizableRelation


class RelationProfile:
    def __init__(self, backends):
        self.backends = dict(backends)

    @property
    def agents(self):
        return sorted(self.backends)

    def backend(self, agent):
        try:
            return self.backends[agent]
        except KeyError:
            raise WorldError(f"no relation backend declared for agent {agent}") from None


# ---------------------------------------------------------------------------
# Quotient system


class QuotientSystem:
    """Finite multi-modal system bisimilar to the structure's unfolding
    equipped with the profile's relations.  States are canonically keyed
    by (node, clamped level, DFA-state vector); indices follow discovery
    order, so identical inputs give identical systems."""

    def __init__(self, keys, labels, children, jumps, root, agents):
        self.keys = keys
        self.labels = labels
        self.children = children
        self.jumps = jumps
        self.root = root
        self.agents = agents
        self.level = tuple(k[1] for k in keys)
        self.node = tuple(k[0] for k in keys)
        self.vector = tuple(k[2] for k in keys)
        self._name_index = None

    def __len__(self):
        return len(self.keys)

    def state_name(self, i) -> str:
        node, level, vec = self.keys[i]
        name = f"{node}@{level}"
        if vec:
            name += "@" + ",".join(vec)
        return name

    def state_index(self, name: str) -> int:
        if self._name_index is None:
            self._name_index = {self.state_name(i): i for i in range(len(self.keys))}
        try:
            return self._name_index[name]
        except KeyError:
            raise WorldError(f"unknown quotient state {name}") from None

    def states_of_node(self, node_id):
        return [i for i in range(len(self.keys)) if self.node[i] == node_id]

    def relation_maps(self):
        """Named successor maps for bisimulation checking."""
        rels = {"child": self.children}
        for a in self.agents:
            rels[f"jump:{a}"] = self.jumps[a]
        return rels


def build_quotient(s: LeveledStructure, profile: RelationProfile) -> QuotientSystem:
    problems = s.validate()
    if problems:
        raise WorldError("invalid structure: " + "; ".join(problems))
    depth_cap = s.max_depth()

    def clamp(level):
        return level if level < depth_cap else INF

    # canonical DFA registry across all recognizable backends
    dfas = []
    slots = {}  # (agent, pair index, side) -> vector slot
    for agent in sorted(profile.backends):
        backend = profile.backends[agent]
        if isinstance(backend, Recognizable):
            rel = backend.relation
            if rel.props != s.props:
                raise WorldError(
                    f"agent {agent}: relation alphabet {sorted(rel.props)} differs "
                    f"from the structure's {sorted(s.props)}"
                )
            bad = rel.validate()
            if bad:
                raise WorldError(f"agent {agent}: invalid relation: " + "; ".join(bad))
            for k, (left, right) in enumerate(rel.pairs):
                slots[(agent, k, "L")] = len(dfas)
                dfas.append(left)
                slots[(agent, k, "R")] = len(dfas)
                dfas.append(right)

    def vec_step(vec, label):
        return tuple(d.step(q, label) for d, q in zip(dfas, vec))

    root_label = s.nodes[s.root].label
    init_vec = tuple(d.step(d.initial, root_label) for d in dfas)
    root_key = (s.root, clamp(0), init_vec)
    keys = [root_key]
    index = {root_key: 0}
    children = {}
    i = 0
    while i < len(keys):
        node_id, level, vec = keys[i]
        node = s.nodes[node_id]
        next_level = INF if level == INF else clamp(level + 1)
        kids = []
        for c in node.children:
            ckey = (c, next_level, vec_step(vec, s.nodes[c].label))
            if ckey not in index:
                index[ckey] = len(keys)
                keys.append(ckey)
            kids.append(index[ckey])
        children[i] = tuple(kids)
        i += 1

    n = len(keys)
    labels = tuple(s.nodes[k[0]].label for k in keys)
    level = [k[1] for k in keys]
    vector = [k[2] for k in keys]

    by_level = {}
    for idx in range(n):
        by_level.setdefault(level[idx], []).append(idx)

    jumps = {}
    for agent in sorted(profile.backends):
        backend = profile.backends[agent]
        if isinstance(backend, EqualLevel):
            jumps[agent] = tuple(tuple(by_level[level[idx]]) for idx in range(n))
        elif isinstance(backend, Recognizable):
            rel = backend.relation
            target_cache = {}
            per_state = []
            for idx in range(n):
                out = set()
                for k in range(len(rel.pairs)):
                    lslot = slots[(agent, k, "L")]
                    if vector[idx][lslot] in rel.pairs[k][0].accepting:
                        if k not in target_cache:
                            rslot = slots[(agent, k, "R")]
                            acc = rel.pairs[k][1].accepting
                            target_cache[k] = [
                                j for j in range(n) if vector[j][rslot] in acc
                            ]
                        out.update(target_cache[k])
                per_state.append(tuple(sorted(out)))
            jumps[agent] = tuple(per_state)
        elif isinstance(backend, Explicit):
            name_of = {}
            for idx in range(n):
                name_of.setdefault(f"{keys[idx][0]}@{keys[idx][1]}", []).append(idx)
            per_state = [set() for _ in range(n)]
            dangling = [
                (a, b) for a, b in backend.pairs if a not in name_of or b not in name_of
            ]
            if dangling:
                raise WorldError(
                    f"agent {agent}: explicit pairs reference unknown states: "
                    + "; ".join(f"{a} ~ {b}" for a, b in dangling)
                )
            for a, b in backend.pairs:
                for src in name_of[a]:
                    per_state[src].update(name_of[b])
            jumps[agent] = tuple(tuple(sorted(x)) for x in per_state)
        else:
            raise WorldError(f"unknown backend for agent {agent}: {backend!r}")

    return QuotientSystem(
        keys=tuple(keys),
        labels=labels,
        children=tuple(children[i] for i in range(n)),
        jumps=jumps,
        root=0,
        agents=tuple(sorted(profile.backends)),
    )


def identity_profile(s: LeveledStructure, agents) -> RelationProfile:
    """Explicit profile relating every quotient state only to itself
    (perfect information)."""
    empty = RelationProfile({a: Explicit(()) for a in agents})
    q = build_quotient(s, empty)
    pairs = tuple((q.state_name(i), q.state_name(i)) for i in range(len(q)))
    return RelationProfile({a: Explicit(pairs) for a in agents})


def unfolding_system(s: LeveledStructure, profile: RelationProfile, depth: int):
    """The depth-bounded unfolding annotated with the profile's relations,
    as a relational system for bisimulation cross-checks.  Frontier nodes
    self-loop, which is consistent whenever depth >= max_depth."""
    prefix = unfold_prefix(s, depth)
    depth_cap = s.max_depth()

    source = {}
    words = {}

    def walk(node_id, path, word, d):
        pid = _path_id(path)
        word = word + (s.nodes[node_id].label,)
        source[pid] = node_id
        words[pid] = word
        if d == depth:
            return
        for idx, c in enumerate(s.nodes[node_id].children):
            walk(c, path + (f"{idx}:{c}",), word, d + 1)

    walk(s.root, (), (), 0)

    states = sorted(prefix.nodes)
    depth_of = {pid: prefix.nodes[pid].depth for pid in states}
    by_depth = {}
    for pid in states:
        by_depth.setdefault(depth_of[pid], []).append(pid)

    relations = {"child": {pid: tuple(prefix.nodes[pid].children) for pid in states}}
    for agent in sorted(profile.backends):
        backend = profile.backends[agent]
        if isinstance(backend, EqualLevel):
            relations[f"jump:{agent}"] = {
                pid: tuple(by_depth[depth_of[pid]]) for pid in states
            }
        elif isinstance(backend, Recognizable):
            rel = backend.relation
            left_hits = {
                pid: [
                    k
                    for k, (left, _) in enumerate(rel.pairs)
                    if left.accepts_word(words[pid])
                ]
                for pid in states
            }
            right_members = {
                k: [pid for pid in states if rel.pairs[k][1].accepts_word(words[pid])]
                for k in range(len(rel.pairs))
            }
            relations[f"jump:{agent}"] = {
                pid: tuple(
                    sorted(
                        set(
                            itertools.chain.from_iterable(
                                right_members[k] for k in left_hits[pid]
                            )
                        )
                    )
                )
                for pid in states
            }
        elif isinstance(backend, Explicit):
            # explicit backends carry no automata, so the canonical key of
            # a path is node@clamped-level
            def key_of(pid):
                lvl = depth_of[pid] if depth_of[pid] < depth_cap else INF
                return f"{source[pid]}@{lvl}"

            pairset = set(backend.pairs)
            relations[f"jump:{agent}"] = {
                pid: tuple(o for o in states if (key_of(pid), key_of(o)) in pairset)
                for pid in states
            }
        else:
            raise WorldError(f"unknown backend for agent {agent}: {backend!r}")

    labels = {pid: prefix.nodes[pid].label for pid in states}
    from .games import RelationalSystem

    return RelationalSystem(
        states=tuple(states),
        base_key=lambda st: labels[st],
        relations={
            name: (lambda st, m=mapping: m[st]) for name, mapping in relations.items()
        },
        initial="/",
    )


# ---------------------------------------------------------------------------
# Text formats


def format_structure(s: LeveledStructure) -> str:
    lines = []
    if isinstance(s, TreeArena):
        lines.append("agents: " + ",".join(s.agents))
        for a in s.agents:
            lines.append(f"actions {a}: " + ",".join(s.actions[a]))
    order = sorted(s.nodes.values(), key=lambda n: (n.depth, n.id))
    for n in order:
        label = "{" + ",".join(sorted(n.label)) + "}"
        if n.loop:
            lines.append(f"node {n.id} depth {n.depth} label {label}")
            lines.append(f"loop {n.id}")
        else:
            lines.append(
                f"node {n.id} depth {n.depth} label {label} children "
                + ",".join(n.children)
            )
    return "\n".join(lines) + "\n"


def _parse_label_set(text, where):
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise WorldError(f"{where}: expected a label set in braces, got {text!r}")
    inner = text[1:-1].strip()
    if not inner:
        return frozenset()
    return frozenset(p.strip() for p in inner.split(","))


def parse_structure(text: str) -> LeveledStructure:
    agents = []
    actions = {}
    declared_props = None
    raw_nodes = {}
    loops = set()
    order = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        if line.startswith("agents:"):
            body = line[len("agents:"):].strip()
            agents = [a.strip() for a in body.split(",") if a.strip()]
        elif line.startswith("actions "):
            head, _, body = line.partition(":")
            agent = head[len("actions "):].strip()
            actions[agent] = tuple(a.strip() for a in body.split(",") if a.strip())
        elif line.startswith("props:"):
            body = line[len("props:"):].strip()
            declared_props = frozenset(p.strip() for p in body.split(",") if p.strip())
        elif line.startswith("node "):
            m = re.match(
                r"node\s+(\S+)\s+depth\s+(\d+)\s+label\s+(\{[^}]*\})(?:\s+children\s+(\S+))?$",
                line,
            )
            if not m:
                raise WorldError(f"{where}: cannot parse node line: {line!r}")
            nid, d, label, kids = m.group(1), int(m.group(2)), m.group(3), m.group(4)
            kid_ids = tuple(k.strip() for k in kids.split(",")) if kids else ()
            raw_nodes[nid] = (d, _parse_label_set(label, where), kid_ids)
            order.append(nid)
        elif line.startswith("loop "):
            loops.add(line[len("loop "):].strip())
        else:
            raise WorldError(f"{where}: unrecognized line: {line!r}")
    if not raw_nodes:
        raise WorldError("structure file declares no nodes")
    nodes = []
    roots = [nid for nid in order if raw_nodes[nid][0] == 0]
    for nid in order:
        d, label, kids = raw_nodes[nid]
        if nid in loops:
            kids = (nid,)
        nodes.append(StructNode(nid, d, label, kids, loop=nid in loops))
    if len(roots) != 1:
        raise WorldError(f"expected exactly one depth-0 node, found {len(roots)}")
    if agents:
        missing = [a for a in agents if a not in actions]
        if missing:
            raise WorldError("agents without action sets: " + ", ".join(missing))
        return TreeArena(nodes, roots[0], agents, actions)
    return LeveledStructure(nodes, roots[0], props=declared_props)


def format_dfa(d: Dfa, indent="") -> str:
    lines = [indent + "states " + ",".join(d.states)]
    lines.append(indent + "initial " + d.initial)
    lines.append(indent + "accepting " + ",".join(sorted(d.accepting)))
    for (q, a), r in sorted(d.trans.items(), key=lambda kv: (kv[0][0], sorted(kv[0][1]))):
        lines.append(indent + "on {" + ",".join(sorted(a)) + "} " + f"{q} -> {r}")
    return "\n".join(lines)


class _DfaBuilder:
    def __init__(self):
        self.states = None
        self.initial = None
        self.accepting = frozenset()
        self.trans = {}

    def feed(self, line, where):
        if line.startswith("states"):
            self.states = tuple(
                x.strip() for x in line[len("states"):].split(",") if x.strip()
            )
        elif line.startswith("initial"):
            self.initial = line[len("initial"):].strip()
        elif line.startswith("accepting"):
            self.accepting = frozenset(
                x.strip() for x in line[len("accepting"):].split(",") if x.strip()
            )
        elif line.startswith("on "):
            m = re.match(r"on\s+(\{[^}]*\})\s+(\S+)\s+->\s+(\S+)$", line)
            if not m:
                raise WorldError(f"{where}: cannot parse transition: {line!r}")
            letter = _parse_label_set(m.group(1), where)
            self.trans[(m.group(2), letter)] = m.group(3)
        else:
            raise WorldError(f"{where}: unrecognized DFA line: {line!r}")

    def build(self, props) -> Dfa:
        if self.states is None or self.initial is None:
            raise WorldError("DFA block missing states or initial")
        d = Dfa(self.states, self.initial, self.accepting, frozenset(props), self.trans)
        bad = d.validate()
        if bad:
            raise WorldError("invalid DFA: " + "; ".join(bad))
        return d


def parse_relation(text: str):
    """Relation file: `props` line, optional `agent <id>` headers, then
    `pair` blocks with `left`/`right` DFA sections.  Returns a dict
    agent -> relation (key None when no agent headers appear)."""
    props = frozenset()
    per_agent = {}
    agent = None
    pairs = None
    side = None
    builders = {}

    def close_pair(where):
        nonlocal builders
        if builders:
            if "left" not in builders or "right" not in builders:
                raise WorldError(f"{where}: pair block missing a left or right DFA")
            pairs.append((builders["left"].build(props), builders["right"].build(props)))
            builders = {}

    def open_agent(name):
        nonlocal agent, pairs
        agent = name
        pairs = per_agent.setdefault(agent, [])

    open_agent(None)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        if line.startswith("props"):
            body = line[len("props"):].lstrip(": ").strip()
            props = frozenset(p.strip() for p in body.split(",") if p.strip())
        elif line.startswith("agent "):
            close_pair(where)
            open_agent(line[len("agent "):].strip())
        elif line == "pair":
            close_pair(where)
            side = None
        elif line in ("left", "right"):
            side = line
            builders[side] = _DfaBuilder()
        elif side is not None:
            builders[side].feed(line, where)
        else:
            raise WorldError(f"{where}: unrecognized relation line: {line!r}")
    close_pair("end of file")
    out = {}
    for a, prs in per_agent.items():
        if prs or a is not None:
            out[a] = RecognizableRelation(prs, props)
    if not out:
        out[None] = RecognizableRelation([], props)
    return out


def format_relation(relations) -> str:
    lines = []
    items = sorted(relations.items(), key=lambda kv: (kv[0] is not None, kv[0] or ""))
    first = True
    for agent, rel in items:
        if first:
            lines.append("props " + ",".join(sorted(rel.props)))
            first = False
        if agent is not None:
            lines.append(f"agent {agent}")
        for left, right in rel.pairs:
            lines.append("pair")
            lines.append("left")
            lines.append(format_dfa(left, indent="  "))
            lines.append("right")
            lines.append(format_dfa(right, indent="  "))
    return "\n".join(lines) + "\n"


def parse_explicit_pairs(text: str):
    """Explicit profile file: `pair <agent> <state> <state>` lines plus
    `identity <agent>` shortcuts (resolved against the quotient at build
    time)."""
    pairs = {}
    identity = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "pair" and len(parts) == 4:
            pairs.setdefault(parts[1], []).append((parts[2], parts[3]))
        elif parts[0] == "identity" and len(parts) == 2:
            identity.add(parts[1])
        else:
            raise WorldError(f"line {lineno}: unrecognized explicit-pairs line: {line!r}")
    return pairs, identity
