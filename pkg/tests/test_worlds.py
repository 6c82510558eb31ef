import itertools
import random

import pytest

from jumpmu import worlds as W
from jumpmu.games import max_bisimulation

from conftest import random_dfa, random_instance, random_structure


def chain_structure():
    nodes = [
        W.StructNode("c0", 0, frozenset(), ("c1",)),
        W.StructNode("c1", 1, frozenset(), ("c2",)),
        W.StructNode("c2", 2, frozenset({"p"}), ("c2",), loop=True),
    ]
    return W.LeveledStructure(nodes, "c0")


def leaf_pair_structure():
    nodes = [
        W.StructNode("r", 0, frozenset(), ("a", "b")),
        W.StructNode("a", 1, frozenset({"p"}), ("a",), loop=True),
        W.StructNode("b", 1, frozenset(), ("b",), loop=True),
    ]
    return W.LeveledStructure(nodes, "r")


# ---------------------------------------------------------------------------
# Validation


def test_validate_ok():
    assert chain_structure().validate() == []


def test_validate_flags_bad_depth():
    nodes = [
        W.StructNode("r", 0, frozenset(), ("m",)),
        W.StructNode("m", 2, frozenset(), ("m",), loop=True),
    ]
    problems = W.LeveledStructure(nodes, "r").validate()
    assert any("level clause" in p for p in problems)


def test_validate_flags_missing_successor():
    nodes = [
        W.StructNode("r", 0, frozenset(), ("m",)),
        W.StructNode("m", 1, frozenset(), ()),
    ]
    problems = W.LeveledStructure(nodes, "r").validate()
    assert any("totality clause" in p for p in problems)


def test_arena_root_action_flagged():
    nodes = [
        W.StructNode("r", 0, frozenset({"p_a0"}), ("m",)),
        W.StructNode("m", 1, frozenset({"p_a0"}), ("m",), loop=True),
    ]
    arena = W.TreeArena(nodes, "r", ("a",), {"a": ("a0", "a1")})
    assert any("root clause" in p for p in arena.validate())


def test_arena_singleton_action_flagged():
    nodes = [
        W.StructNode("r", 0, frozenset(), ("m",)),
        W.StructNode("m", 1, frozenset({"p_a0", "p_a1"}), ("m",), loop=True),
    ]
    arena = W.TreeArena(nodes, "r", ("a",), {"a": ("a0", "a1")})
    assert any("singleton clause" in p for p in arena.validate())


def test_family_tree_validates():
    from jumpmu.experiment import FamilySpec, build_family

    for tree in build_family(FamilySpec(1)):
        assert tree.validate() == []


# ---------------------------------------------------------------------------
# Unfolding


def test_unfold_self_loop_gives_chain():
    nodes = [W.StructNode("r", 0, frozenset({"p"}), ("r",), loop=True)]
    s = W.LeveledStructure(nodes, "r")
    u = W.unfold_prefix(s, 2)
    assert len(u.nodes) == 3
    assert all(n.label == frozenset({"p"}) for n in u.nodes.values())
    assert u.validate() == []


def test_unfold_at_max_depth_is_tree_part():
    s = chain_structure()
    u = W.unfold_prefix(s, s.max_depth())
    assert len(u.nodes) == len(s.nodes)
    assert u.validate() == []


def test_unfold_family_tree_counts():
    from jumpmu.experiment import FamilySpec, build_family

    t1 = build_family(FamilySpec(1))[0]
    u = W.unfold_prefix(t1, 3)
    # root, branch tops, block roots, block leaves
    expected = 1 + (2 ** 1 + 2) + (2 ** 1 + 2) + (2 ** 1 + 2) * 2
    assert len(u.nodes) == expected == 17


# ---------------------------------------------------------------------------
# Quotients


def test_quotient_equal_level_saturation():
    q = W.build_quotient(leaf_pair_structure(), W.RelationProfile({"a": W.EqualLevel()}))
    assert len(q) == 3
    names = {q.state_name(i) for i in range(len(q))}
    assert names == {"r@0", "a@inf", "b@inf"}
    a_state = q.state_index("a@inf")
    b_state = q.state_index("b@inf")
    assert set(q.jumps["a"][a_state]) == {a_state, b_state}
    assert set(q.jumps["a"][b_state]) == {a_state, b_state}


def test_quotient_total_relation_backend():
    s = chain_structure()
    star = W.sigma_star_dfa(s.props)
    rel = W.RecognizableRelation([(star, star)], s.props)
    q = W.build_quotient(s, W.RelationProfile({"a": W.Recognizable(rel)}))
    everyone = set(range(len(q)))
    for i in everyone:
        assert set(q.jumps["a"][i]) == everyone


def test_quotient_family_levels_match_node_counts():
    from jumpmu.experiment import FamilySpec, build_family

    t1 = build_family(FamilySpec(1))[0]
    q = W.build_quotient(t1, W.RelationProfile({"a": W.EqualLevel()}))
    by_level = {}
    for i in range(len(q)):
        by_level.setdefault(q.level[i], set()).add(i)
    # per level: 1 root, 4 branch tops, 4 block roots, 8 leaves saturated
    assert {lvl: len(states) for lvl, states in by_level.items()} == {
        0: 1,
        1: 4,
        2: 4,
        W.INF: 8,
    }
    for lvl, states in by_level.items():
        for i in states:
            assert set(q.jumps["a"][i]) == states


def test_quotient_deterministic():
    rng = random.Random(7)
    for _ in range(20):
        s, profile, q1 = random_instance(rng)
        q2 = W.build_quotient(s, profile)
        assert q1.keys == q2.keys
        assert q1.children == q2.children
        assert q1.jumps == q2.jumps


def test_quotient_child_relation_total(rng):
    for _ in range(20):
        _s, _profile, q = random_instance(rng)
        assert all(q.children[i] for i in range(len(q)))


def test_equal_level_exact_below_saturation(rng):
    for _ in range(20):
        s = random_structure(rng)
        q = W.build_quotient(s, W.RelationProfile({"a": W.EqualLevel()}))
        for i in range(len(q)):
            for j in range(len(q)):
                related = j in q.jumps["a"][i]
                assert related == (q.level[i] == q.level[j])


def test_explicit_dangling_pairs_rejected():
    s = chain_structure()
    profile = W.RelationProfile({"a": W.Explicit((("c0@0", "nowhere@3"),))})
    with pytest.raises(W.WorldError, match="unknown states"):
        W.build_quotient(s, profile)


def test_quotient_bisimilar_to_unfolding(rng):
    for _ in range(12):
        s, profile, q = random_instance(rng, max_quotient=10)
        depth = s.max_depth() + 3
        unf = W.unfolding_system(s, profile, depth)
        pairs = max_bisimulation(q, unf)
        assert (q.root, "/") in pairs


# ---------------------------------------------------------------------------
# Recognizable relations


def ends_with_dfa(props, want_p):
    """Words whose last letter contains p (or not, per want_p)."""
    props = frozenset(props)
    trans = {}
    for q in ("s0", "s1"):
        for letter in W.all_letters(props):
            trans[(q, letter)] = "s1" if ("p" in letter) == want_p else "s0"
    # empty word not accepted either way
    return W.Dfa(("s0", "s1"), "s0", frozenset(("s1",)), props, trans)


def test_relate_empty_relation_is_false():
    rel = W.RecognizableRelation([], frozenset({"p"}))
    assert not W.relate(rel, [frozenset()], [frozenset({"p"})])


def test_relate_total_relation_is_true():
    star = W.sigma_star_dfa(frozenset({"p"}))
    rel = W.RecognizableRelation([(star, star)], frozenset({"p"}))
    assert W.relate(rel, [], [frozenset({"p"}), frozenset()])


def test_relate_directional_pair():
    props = frozenset({"p"})
    rel = W.RecognizableRelation(
        [(ends_with_dfa(props, True), ends_with_dfa(props, False))], props
    )
    w_ends_p = [frozenset({"p"}), frozenset({"p"})]
    w_ends_empty = [frozenset({"p"}), frozenset()]
    assert W.relate(rel, w_ends_p, w_ends_empty)
    assert not W.relate(rel, w_ends_empty, w_ends_p)


def test_relate_agrees_with_dfa_membership(rng):
    props = frozenset({"p"})
    letters = W.all_letters(props)
    for _ in range(5):
        rel = W.RecognizableRelation(
            [(random_dfa(rng, props), random_dfa(rng, props)) for _ in range(2)], props
        )
        for _ in range(200):
            w1 = [rng.choice(letters) for _ in range(rng.randint(0, 6))]
            w2 = [rng.choice(letters) for _ in range(rng.randint(0, 6))]
            expected = any(
                left.accepts_word(w1) and right.accepts_word(w2)
                for left, right in rel.pairs
            )
            assert W.relate(rel, w1, w2) == expected


# ---------------------------------------------------------------------------
# Minimal automaton size


def table_filling_classes(n, trans, acc, letters):
    """Independent minimizer: naive Myhill-Nerode table filling."""
    distinct = set()
    for p, q in itertools.combinations(range(n), 2):
        if (p in acc) != (q in acc):
            distinct.add((p, q))
    changed = True
    while changed:
        changed = False
        for p, q in itertools.combinations(range(n), 2):
            if (p, q) in distinct:
                continue
            for a in letters:
                r, s = trans[(p, a)], trans[(q, a)]
                key = (min(r, s), max(r, s))
                if r != s and key in distinct:
                    distinct.add((p, q))
                    changed = True
                    break
    # count classes
    rep = {}
    classes = 0
    for p in range(n):
        for q in range(p):
            if (q, p) not in distinct:
                rep[p] = rep[q]
                break
        else:
            rep[p] = classes
            classes += 1
    return classes


def oracle_rel_size(rel):
    n, trans, acc, letters = W.separated_language_dfa(rel)
    return table_filling_classes(n, trans, acc, letters)


def test_rel_size_empty_relation():
    assert W.rel_size(W.RecognizableRelation([], frozenset())) == 1


def test_rel_size_total_over_one_letter_alphabet():
    star = W.sigma_star_dfa(frozenset())
    rel = W.RecognizableRelation([(star, star)], frozenset())
    expected = oracle_rel_size(rel)
    assert W.rel_size(rel) == expected == 3


def single_word_dfa(props, word):
    """Accepts exactly the given word."""
    props = frozenset(props)
    states = tuple(f"w{i}" for i in range(len(word) + 1)) + ("dead",)
    trans = {}
    for i in range(len(word) + 1):
        for letter in W.all_letters(props):
            if i < len(word) and letter == word[i]:
                trans[(f"w{i}", letter)] = f"w{i + 1}"
            else:
                trans[(f"w{i}", letter)] = "dead"
    for letter in W.all_letters(props):
        trans[("dead", letter)] = "dead"
    return W.Dfa(states, "w0", frozenset((f"w{len(word)}",)), props, trans)


def test_rel_size_disjoint_single_word_products():
    props = frozenset({"p"})
    p, e = frozenset({"p"}), frozenset()
    rel = W.RecognizableRelation(
        [
            (single_word_dfa(props, [p]), single_word_dfa(props, [e])),
            (single_word_dfa(props, [e, e]), single_word_dfa(props, [p, p])),
        ],
        props,
    )
    assert W.rel_size(rel) == oracle_rel_size(rel)


def test_rel_size_random_agreement(rng):
    props = frozenset({"p"})
    for _ in range(30):
        rel = W.RecognizableRelation(
            [
                (random_dfa(rng, props, 3), random_dfa(rng, props, 3))
                for _ in range(rng.randint(0, 2))
            ],
            props,
        )
        assert W.rel_size(rel) == oracle_rel_size(rel)


# ---------------------------------------------------------------------------
# Text formats


def test_structure_round_trip():
    from jumpmu.experiment import FamilySpec, build_family

    t1 = build_family(FamilySpec(1))[0]
    text = W.format_structure(t1)
    back = W.parse_structure(text)
    assert isinstance(back, W.TreeArena)
    assert back.agents == t1.agents
    assert set(back.nodes) == set(t1.nodes)
    for nid, node in t1.nodes.items():
        other = back.nodes[nid]
        assert (node.depth, node.label, node.children, node.loop) == (
            other.depth,
            other.label,
            other.children,
            other.loop,
        )


def test_plain_structure_round_trip(rng):
    s = random_structure(rng)
    back = W.parse_structure(W.format_structure(s))
    assert set(back.nodes) == set(s.nodes)
    assert back.root == s.root


def test_relation_round_trip(rng):
    props = frozenset({"p"})
    rel = W.RecognizableRelation([(random_dfa(rng, props), random_dfa(rng, props))], props)
    text = W.format_relation({None: rel})
    back = W.parse_relation(text)[None]
    assert len(back.pairs) == 1
    assert W.rel_size(back) == W.rel_size(rel)
