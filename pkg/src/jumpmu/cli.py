"""Command-line front end.

Exit status contract: 0 for a true verdict or a produced report, 2 for a
false verdict (for scripting), 1 for parse and validation errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import atl, experiment, formulas, games, jta, translate, worlds


class CliError(Exception):
    pass


VERDICT_FALSE = 2


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}") from None


def _load_structure(path):
    s = worlds.parse_structure(_read(path))
    problems = s.validate()
    if problems:
        raise CliError(f"invalid structure {path}: " + "; ".join(problems))
    return s


def _profile_for(spec: str, structure, agents):
    """Backend selector: `eqlevel`, `rel:<file>` or `explicit:<file>`,
    applied to every declared agent."""
    if spec == "eqlevel":
        return worlds.RelationProfile({a: worlds.EqualLevel() for a in agents})
    kind, _, path = spec.partition(":")
    if kind == "rel" and path:
        relations = worlds.parse_relation(_read(path))
        backends = {}
        for a in agents:
            rel = relations.get(a, relations.get(None))
            if rel is None:
                raise CliError(f"relation file {path} covers no relation for agent {a}")
            backends[a] = worlds.Recognizable(rel)
        return worlds.RelationProfile(backends)
    if kind == "explicit" and path:
        pairs, identity = worlds.parse_explicit_pairs(_read(path))
        backends = {}
        for a in agents:
            if a in identity:
                probe = worlds.build_quotient(
                    structure,
                    worlds.RelationProfile({b: worlds.Explicit(()) for b in agents}),
                )
                backends[a] = worlds.Explicit(
                    tuple((probe.state_name(i), probe.state_name(i)) for i in range(len(probe)))
                )
            else:
                backends[a] = worlds.Explicit(tuple(pairs.get(a, ())))
        return worlds.RelationProfile(backends)
    raise CliError(
        f"unknown profile {spec!r}: expected eqlevel, rel:<file> or explicit:<file>"
    )


def _emit(payload, as_json):
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in payload.get("lines", []):
            print(line)


def cmd_check_mu(args) -> int:
    s = _load_structure(args.structure)
    f = formulas.parse_mu_formula(args.formula)
    agents = sorted(formulas.agents_of(f) | set(getattr(s, "agents", ())))
    profile = _profile_for(args.profile, s, agents)
    q = worlds.build_quotient(s, profile)
    sat = translate.eval_mu(f, q)
    names = sorted(q.state_name(i) for i in sat)
    verdict = q.root in sat
    payload = {
        "formula": formulas.format_mu(f),
        "satisfying": names,
        "root": q.state_name(q.root),
        "verdict": verdict,
        "lines": [
            "satisfying states: " + (", ".join(names) if names else "(none)"),
            f"root {q.state_name(q.root)}: {'satisfied' if verdict else 'not satisfied'}",
        ],
    }
    _emit(payload, args.json)
    return 0 if verdict else VERDICT_FALSE


def cmd_check_atl(args) -> int:
    s = _load_structure(args.structure)
    if not isinstance(s, worlds.TreeArena):
        raise CliError("coalition checking needs a tree-arena (agents/actions declared)")
    f = formulas.parse_atl_formula(args.formula, declared_agents=s.agents)
    profile = _profile_for(args.profile, s, list(s.agents))
    q = worlds.build_quotient(s, profile)
    sat = atl.eval_atl_states(
        q,
        s,
        f,
        mode=atl.SemanticsMode(args.mode),
        blocked=args.blocked,
        include_self=args.include_self,
    )
    names = sorted(q.state_name(i) for i in sat)
    verdict = q.root in sat
    payload = {
        "formula": formulas.format_atl(f),
        "mode": args.mode,
        "satisfying": names,
        "root": q.state_name(q.root),
        "verdict": verdict,
        "lines": [
            "satisfying states: " + (", ".join(names) if names else "(none)"),
            f"root {q.state_name(q.root)}: {'satisfied' if verdict else 'not satisfied'}",
        ],
    }
    _emit(payload, args.json)
    return 0 if verdict else VERDICT_FALSE


def cmd_translate(args) -> int:
    if args.to_jta is not None:
        f = formulas.parse_mu_formula(args.to_jta)
        a = translate.formula_to_jta(f)
        print(jta.format_jta(a), end="")
        return 0
    a = jta.parse_jta(_read(args.to_mu))
    system = translate.jta_to_equations(a)
    print(translate.format_equations(system))
    if args.flatten:
        try:
            flat = translate.flatten(system)
        except translate.FlattenSizeError as e:
            print(f"flattening aborted: {e}; equational form kept", file=sys.stderr)
            return 0
        print(formulas.format_mu(flat))
    return 0


def cmd_accept(args) -> int:
    a = jta.parse_jta(_read(args.jta))
    s = _load_structure(args.structure)
    agents = sorted(a.agents | set(getattr(s, "agents", ())))
    profile = _profile_for(args.profile, s, agents)
    q = worlds.build_quotient(s, profile)
    game = jta.build_acceptance_game(a, q)
    result = games.solve(game)
    accepted = game.initial in result.eve_region
    winner = "Eve" if accepted else "Adam"
    strategy = result.eve_strategy if accepted else result.adam_strategy
    lines = [f"winner at the initial position: {winner}"]
    for pos, dst in sorted(strategy.items(), key=lambda kv: str(kv[0])):
        lines.append(f"  {_pos_str(q, pos)} -> {_pos_str(q, dst)}")
    payload = {
        "accepted": accepted,
        "winner": winner,
        "strategy_size": len(strategy),
        "lines": lines,
    }
    _emit(payload, args.json)
    return 0 if accepted else VERDICT_FALSE


def _pos_str(q, pos) -> str:
    x, state, b = pos
    return f"({q.state_name(x)}, {state}, {jta.format_boolpos(b)})"


def cmd_solve(args) -> int:
    g = games.parse_game(_read(args.game))
    result = games.solve(g)
    lines = ["Eve region: " + ", ".join(sorted(str(v) for v in result.eve_region))]
    lines.append("Adam region: " + ", ".join(sorted(str(v) for v in result.adam_region)))
    for player, strat in (("Eve", result.eve_strategy), ("Adam", result.adam_strategy)):
        for v, u in sorted(strat.items(), key=lambda kv: str(kv[0])):
            lines.append(f"{player}: {v} -> {u}")
    payload = {
        "eve_region": sorted(str(v) for v in result.eve_region),
        "adam_region": sorted(str(v) for v in result.adam_region),
        "eve_strategy": {str(v): str(u) for v, u in result.eve_strategy.items()},
        "adam_strategy": {str(v): str(u) for v, u in result.adam_strategy.items()},
        "lines": lines,
    }
    _emit(payload, args.json)
    return 0


def cmd_bisim(args) -> int:
    g1 = games.parse_game(_read(args.game1))
    g2 = games.parse_game(_read(args.game2))
    if args.pairs is not None:
        pairs = _parse_pairs(_read(args.pairs))
        report = games.check_bisimulation(g1, g2, pairs)
        if report.ok:
            print("ok: all pairs satisfy colour harmony, zig and zag")
            return 0
        pair, clause, detail = report.first
        print(f"violation: pair {pair} fails {clause}: {detail}")
        return VERDICT_FALSE
    pairs = games.max_bisimulation(g1, g2)
    for v, u in sorted((str(v), str(u)) for v, u in pairs):
        print(f"{v} {u}")
    related = (
        g1.initial is not None
        and g2.initial is not None
        and (g1.initial, g2.initial) in pairs
    )
    print(f"initial positions related: {'yes' if related else 'no'}")
    return 0 if related else VERDICT_FALSE


def _parse_pairs(text):
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 3 and parts[0] == "pair":
            parts = parts[1:]
        if len(parts) != 2:
            raise CliError(f"line {lineno}: expected two position names")
        pairs.append((parts[0], parts[1]))
    return pairs


def cmd_counterexample(args) -> int:
    if (args.jta is None) == (args.from_formula is None):
        raise CliError("exactly one of --jta and --from-formula is required")
    if args.jta is not None:
        a = jta.parse_jta(_read(args.jta))
    else:
        f = formulas.parse_mu_formula(args.from_formula)
        a = translate.formula_to_jta(f, extra_props=experiment.ARENA_PROPS)
    report = experiment.run_experiment(
        a, atl_mode=atl.SemanticsMode(args.mode), max_n=args.max_n
    )
    if args.emit_trees:
        out = Path(args.emit_trees)
        out.mkdir(parents=True, exist_ok=True)
        spec = experiment.FamilySpec(report.n)
        family = experiment.build_family(spec)
        for idx, tree in enumerate(family, start=1):
            (out / f"T_{idx}.tree").write_text(worlds.format_structure(tree))
        if report.collision:
            i, j = report.collision
            t0 = experiment.combine_t0(family, i, j)
            (out / "T_0.tree").write_text(worlds.format_structure(t0))
    if args.emit_figure:
        if report.collision is None:
            print("no collision pair; figure not rendered", file=sys.stderr)
        else:
            spec = experiment.FamilySpec(report.n)
            family = experiment.build_family(spec)
            i, j = report.collision
            t0 = experiment.combine_t0(family, i, j)
            print(experiment.render_figure(family, i, j, t0))
    if args.json:
        print(report.to_json())
    else:
        for line in _report_lines(report):
            print(line)
    return 0


def _report_lines(report):
    lines = [
        f"family parameter: {report.n} (automaton states: {report.automaton_states})",
    ]
    for t in report.trees:
        word = " ".join(t.witness_word) if t.witness_word else "-"
        lines.append(
            f"T_{t.index}: coalition property {'holds' if t.atl_holds else 'FAILS'}"
            f" (witness {word}); automaton {'accepts' if t.accepted else 'REJECTS'};"
            f" visit set {{{', '.join(t.visit_states)}}}"
        )
    if report.collision:
        i, j = report.collision
        lines.append(f"collision: trees {i} and {j} share the visit set")
    if report.t0_accepted is not None:
        lines.append(
            f"T_0: reaches p {report.t0_reaches_p}; coalition property "
            f"{report.t0_atl_holds}; accepted {report.t0_accepted}"
        )
        lines.append(
            f"bisimulations: Z {'ok' if report.bisim_z_ok else 'FAIL'}, "
            f"Z' {'ok' if report.bisim_z_prime_ok else 'FAIL'}"
        )
        lines.append(
            f"combined strategy: {report.exit_positions} exit positions, "
            f"all winning: {report.exits_all_winning}, "
            f"verified: {report.sigma0_verified}"
        )
    lines.append(f"classification: {report.classification}")
    if report.failing_step:
        lines.append(f"failing step: {report.failing_step}")
    return lines


def cmd_relsize(args) -> int:
    relations = worlds.parse_relation(_read(args.relation))
    for agent, rel in sorted(relations.items(), key=lambda kv: (kv[0] is not None, kv[0] or "")):
        size = worlds.rel_size(rel)
        if agent is None:
            print(size)
        else:
            print(f"{agent}: {size}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumpmu",
        description=(
            "Model checking for the epistemic mu-calculus and imperfect-"
            "information coalition logic via jumping tree automata"
        ),
    )
    parser.add_argument("--timings", action="store_true", help="print elapsed time to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-mu", help="evaluate a fixpoint formula on a structure")
    p.add_argument("structure")
    p.add_argument("profile", help="eqlevel | rel:<file> | explicit:<file>")
    p.add_argument("formula")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_check_mu)

    p = sub.add_parser("check-atl", help="evaluate a coalition formula on a tree-arena")
    p.add_argument("structure")
    p.add_argument("profile")
    p.add_argument("formula")
    p.add_argument("--mode", default="de-re", choices=["de-re", "de-dicto", "uniform-only"])
    p.add_argument("--blocked", default="fail", choices=["fail", "ignore"])
    p.add_argument("--include-self", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_check_atl)

    p = sub.add_parser("translate", help="formula to automaton, or automaton to equations")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--to-jta", metavar="FORMULA")
    group.add_argument("--to-mu", metavar="JTA_FILE")
    p.add_argument("--flatten", action="store_true", help="also print a single formula")
    p.set_defaults(fn=cmd_translate)

    p = sub.add_parser("accept", help="does the automaton accept the structure?")
    p.add_argument("jta")
    p.add_argument("structure")
    p.add_argument("profile")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_accept)

    p = sub.add_parser("solve", help="solve a parity game")
    p.add_argument("game")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("bisim", help="check or compute a game bisimulation")
    p.add_argument("game1")
    p.add_argument("game2")
    p.add_argument("pairs", nargs="?", default=None)
    p.set_defaults(fn=cmd_bisim)

    p = sub.add_parser("counterexample", help="run the falsifier experiment")
    p.add_argument("--jta", default=None)
    p.add_argument("--from-formula", default=None)
    p.add_argument("--mode", default="de-re", choices=["de-re", "de-dicto", "uniform-only"])
    p.add_argument("--max-n", type=int, default=6)
    p.add_argument("--emit-trees", metavar="DIR", default=None)
    p.add_argument("--emit-figure", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_counterexample)

    p = sub.add_parser("relsize", help="minimal-automaton size of a recognizable relation")
    p.add_argument("relation")
    p.set_defaults(fn=cmd_relsize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.monotonic()
    try:
        code = args.fn(args)
    except (
        CliError,
        formulas.FormulaError,
        worlds.WorldError,
        games.GameError,
        jta.JtaError,
        translate.TranslateError,
        atl.AtlError,
        experiment.ExperimentError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if args.timings:
        print(f"elapsed: {time.monotonic() - start:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
