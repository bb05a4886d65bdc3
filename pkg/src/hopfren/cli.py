"""Command line front end: ``hopfren check|enumerate|coproduct|antipode|verify|renorm``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, is_dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Sequence

from . import __version__
from .combinatorics import IllDefinedError, ResourceCapError, enumerate_shapes, set_cache_dir, set_max_graphs
from .graph import GradingKind, GraphError, decode_key, dump_graph, omega, symmetry_factor
from .hopf import HopfElement, antipode, coproduct, monomial_grading, parse_element
from .renorm import SCHEMES, PoleOverflowError, Renormalizer, criteria_sweep, toy_character
from .suites import FAIL, SUITES, Params, default_loops, run_suite
from .theory import (
    CorollaClass,
    TheoryError,
    TheorySpec,
    classify_corolla,
    cograph_divergence_criterion,
    corolla_weight,
    grading_compatibility,
    renormalizable_weight,
    resolve_theory,
)

SCHEMA = "hopfren.report/1"
EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3


class InputError(Exception):
    pass


def _jsonable(x: Any) -> Any:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, Enum):
        return x.value
    if is_dataclass(x):
        return asdict(x)
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    return str(x)


def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable)


def _report(command: str, theory: TheorySpec | None, params: dict, verdict: str, body: dict,
            timings: dict | None) -> dict:
    doc = {
        "schema": SCHEMA,
        "version": __version__,
        "command": command,
        "parameters": params,
        "verdict": verdict,
        **body,
    }
    if theory is not None:
        doc["theory"] = {"name": theory.name, "sha256": theory.digest()}
    if timings is not None:
        doc["timings"] = {k: round(v, 3) for k, v in timings.items()}
    return doc


def _emit(args: argparse.Namespace, doc: dict, text: str) -> None:
    if args.format == "json":
        sys.stdout.write(_dumps(doc) + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _theory(ref: str) -> TheorySpec:
    try:
        return resolve_theory(ref)
    except OSError as exc:
        raise InputError(f"cannot read {ref}: {exc}") from None


def _timings(args: argparse.Namespace, t: dict) -> dict | None:
    return None if args.no_timings else t


# check


def _overall_class(classes: list[CorollaClass]) -> str:
    if CorollaClass.NON_RENORMALIZABLE in classes:
        return "non-renormalizable"
    if all(c is CorollaClass.RENORMALIZABLE for c in classes):
        return "all-renormalizable"
    return "super-renormalizable"


def _compat_label(coupling: bool, loop: bool) -> str:
    parts = [f"coupling-{'compatible' if coupling else 'incompatible'}",
             f"loop-{'compatible' if loop else 'incompatible'}"]
    return f"{'compatible' if coupling and loop else 'incompatible'} ({', '.join(parts)})"


def cmd_check(args: argparse.Namespace) -> int:
    theory = _theory(args.theory)
    rows = []
    for v in theory.vertices:
        cls = classify_corolla(theory, v.name)
        rows.append({"vertex": v.name, "valence": v.valence, "weight": str(corolla_weight(theory, v.name)),
                     "renormalizable_weight": str(renormalizable_weight(theory, v.name)), "class": cls.value})
    classes = [classify_corolla(theory, v.name) for v in theory.vertices]
    grades = grading_compatibility(theory)
    crit = cograph_divergence_criterion(theory)
    if crit.certified:
        cograph = "criterion-certified cograph-divergent"
    elif crit.criterion_applies:
        cograph = "criterion not satisfied"
    else:
        cograph = "criterion does not apply"
    body = {
        "valid": True,
        "corollas": rows,
        "classification": _overall_class(classes),
        "grading": {"coupling_compatible": grades.coupling_grading_compatible,
                    "loop_compatible": grades.loop_grading_compatible,
                    "label": _compat_label(grades.coupling_grading_compatible, grades.loop_grading_compatible),
                    "witnesses": list(grades.witnesses)},
        "cograph_divergence": {"criterion_applies": crit.criterion_applies, "certified": crit.certified,
                               "label": cograph},
    }
    lines = [f"theory {theory.name}: valid (dimension {theory.dimension})",
             f"{'vertex':<10} {'valence':>7} {'weight':>8} {'bound':>8}  class"]
    lines += [f"{r['vertex']:<10} {r['valence']:>7} {r['weight']:>8} {r['renormalizable_weight']:>8}  {r['class']}"
              for r in rows]
    lines += [f"classification: {body['classification']}",
              f"gradings: {body['grading']['label']}",
              f"cograph divergence: {cograph}"]
    _emit(args, _report("check", theory, {}, "pass", body, None), "\n".join(lines))
    return EXIT_PASS


# enumerate


def _amplitude(theory: TheorySpec, spec: str):
    try:
        return theory.amplitude(spec.split(",") if "," in spec else spec)
    except (KeyError, ValueError) as exc:
        raise InputError(f"residue: {exc}") from None


def cmd_enumerate(args: argparse.Namespace) -> int:
    theory = _theory(args.theory)
    amp = _amplitude(theory, args.residue)
    if args.loops_pos < 0:
        raise InputError("loops: must be >= 0")
    graphs = enumerate_shapes(theory, amp, args.loops_pos)
    rows = [{"key": g.key, "sym": symmetry_factor(g), "omega": omega(g)} for g in graphs]
    if args.dump:
        for r, g in zip(rows, graphs):
            r["interchange"] = dump_graph(g)
    lines = [f"# {amp.label} loops={args.loops_pos} graphs={len(rows)}", "# sym omega key"]
    for r, g in zip(rows, graphs):
        lines.append(f"{r['sym']} {r['omega']} {r['key']}")
        if args.dump:
            lines.append(dump_graph(g).rstrip("\n"))
    params = {"residue": amp.label, "loops": args.loops_pos}
    _emit(args, _report("enumerate", theory, params, "pass", {"graphs": rows}, None), "\n".join(lines))
    return EXIT_PASS


# coproduct and antipode


def _element(theory: TheorySpec, text: str) -> HopfElement:
    try:
        if " * " in text:
            return parse_element(theory, text.replace(";;", "\n"))
        return HopfElement.from_graph(decode_key(theory, text))
    except (GraphError, ValueError, KeyError) as exc:
        raise InputError(f"element: {exc}") from None


def cmd_coproduct(args: argparse.Namespace) -> int:
    theory = _theory(args.theory)
    t = coproduct(_element(theory, args.element))
    text = t.to_text()
    _emit(args, _report("coproduct", theory, {"element": args.element}, "pass", {"coproduct": text}, None),
          text or "0")
    return EXIT_PASS


def cmd_antipode(args: argparse.Namespace) -> int:
    theory = _theory(args.theory)
    x = antipode(_element(theory, args.element))
    text = x.to_text()
    _emit(args, _report("antipode", theory, {"element": args.element}, "pass", {"antipode": text}, None),
          text or "0")
    return EXIT_PASS


# verify


def _suite_names(name: str) -> list[str]:
    if name == "all":
        return list(SUITES)
    if name not in SUITES:
        raise InputError(f"suite: unknown suite {name!r} (choose from {', '.join(SUITES)}, all)")
    return [name]


def cmd_verify(args: argparse.Namespace) -> int:
    theory = _theory(args.theory)
    names = _suite_names(args.suite)
    loops = args.loops if args.loops is not None else default_loops(theory)
    if loops < 1:
        raise InputError("--loops: must be >= 1")
    p = Params(loops=loops, cmax=args.cmax, seed=args.seed)
    suites, timings, lines, failed = {}, {}, [], False
    for name in names:
        res = run_suite(name, theory, p)
        timings[name] = res.seconds
        suites[name] = {"verdict": "pass" if res.ok else "fail",
                        "checks": {c.name: c.to_json() for c in res.checks}}
        failed |= not res.ok
        for c in res.checks:
            lines.append(f"{name:<22} {c.name:<38} {c.status}")
            if c.status == FAIL and c.witnesses:
                lines.append(f"    first witness: {c.witnesses[0]}")
    verdict = "fail" if failed else "pass"
    lines.append(f"verdict: {verdict}")
    params = {"suite": args.suite, "loops": loops, "cmax": args.cmax, "seed": args.seed}
    _emit(args, _report("verify", theory, params, verdict, {"suites": suites}, _timings(args, timings)),
          "\n".join(lines))
    return EXIT_FAIL if failed else EXIT_PASS


# renorm


def _renormalizer(args: argparse.Namespace, theory: TheorySpec, cap: int) -> Renormalizer:
    kw: dict[str, Any] = {}
    if args.character in ("seeded", "qgs_symmetric"):
        kw["seed"] = args.seed
    if args.character == "qgs_symmetric":
        kw["cap"] = cap
    else:
        kw["pole_cap"] = cap
    try:
        phi = toy_character(theory, args.character, **kw)
    except ValueError as exc:
        raise InputError(f"--character: {exc}") from None
    return Renormalizer(phi, SCHEMES[args.scheme]())


def _element_loops(x: HopfElement) -> int:
    return max((monomial_grading(x.theory, m, GradingKind.LOOP)[0] for m, _ in x), default=0)


def cmd_renorm(args: argparse.Namespace) -> int:
    theory = _theory(args.theory)
    if args.what == "criteria":
        return _renorm_criteria(args, theory)
    x = _element(theory, args.element)
    ren = _renormalizer(args, theory, max(_element_loops(x), 1))
    params = {"element": args.element, "character": args.character, "scheme": args.scheme, "seed": args.seed}
    if args.what == "counterterm":
        s = ren.counterterm(x)
        body = {"counterterm": s.to_json()}
        text = s.to_text()
        verdict = "pass" if s.is_polar() or not s else "fail"
    else:
        s, value = ren.renormalized(x, check=False)
        body = {"renormalized": s.to_json(), "pole_free": s.is_pole_free(),
                "value_at_zero": str(s[0]) if s.is_pole_free() else None}
        text = s.to_text()
        verdict = "pass" if s.is_pole_free() else "fail"
    _emit(args, _report(f"renorm {args.what}", theory, params, verdict, body, None), text)
    return EXIT_PASS if verdict == "pass" else EXIT_FAIL


def _renorm_criteria(args: argparse.Namespace, theory: TheorySpec) -> int:
    if not theory.qgs_relations:
        raise InputError("qgs: theory declares no gauge relations")
    cap = args.loops if args.loops is not None else 2
    ren = _renormalizer(args, theory, cap)
    rows, lines, failed = [], [], False
    for renv in (False, True):
        label = "renormalized" if renv else "counterterm"
        for rel, C, rep in criteria_sweep(ren.phi, ren.scheme, theory, args.cmax, cap, renormalized_values=renv):
            row = {"values": label, "relation": asdict(rel), "coupling": list(C), **rep.to_json()}
            rows.append(row)
            failed |= not rep.implication_ok
            lines.append(f"{label:<13} C={list(C)} well_defined={rep.well_defined} "
                         f"conditions={rep.conditions_hold} implication={'pass' if rep.implication_ok else 'fail'}")
    verdict = "fail" if failed else "pass"
    lines.append(f"verdict: {verdict}")
    params = {"character": args.character, "scheme": args.scheme, "seed": args.seed, "cap": cap, "cmax": args.cmax}
    _emit(args, _report("renorm criteria", theory, params, verdict, {"criteria": rows}, None), "\n".join(lines))
    return EXIT_FAIL if failed else EXIT_PASS


# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--loops", type=int, default=None, help="loop cap (default depends on the theory)")
    common.add_argument("--cmax", type=int, default=3, help="largest total coupling degree")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--cache", default=None, help="enumeration cache directory (env HOPFREN_CACHE)")
    common.add_argument("--max-graphs", type=int, default=None, help="abort with exit 3 beyond this many graphs")
    common.add_argument("--seed", type=int, default=0, help="seed for the seeded characters")
    common.add_argument("--no-timings", action="store_true", help="omit the timings block from JSON reports")

    parser = argparse.ArgumentParser(prog="hopfren", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hopfren {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="validate a theory and classify its corollas")
    p.add_argument("theory")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("enumerate", parents=[common], help="list 1PI graphs of a residue at a loop order")
    p.add_argument("theory")
    p.add_argument("residue", help="residue name, or comma-separated leg list")
    p.add_argument("loops_pos", metavar="loops", type=int)
    p.add_argument("--dump", action="store_true", help="include the interchange text of each graph")
    p.set_defaults(func=cmd_enumerate)

    for name, func in (("coproduct", cmd_coproduct), ("antipode", cmd_antipode)):
        p = sub.add_parser(name, parents=[common], help=f"print the {name} of a graph key or element")
        p.add_argument("theory")
        p.add_argument("element", help="graph key, or element text with ';;' between terms")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("theory")
    p.add_argument("suite", help=f"one of {', '.join(SUITES)}, or all")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("renorm", parents=[common], help="counterterms, renormalized values, QGS criteria")
    p.add_argument("what", choices=("counterterm", "renormalized", "criteria"))
    p.add_argument("theory")
    p.add_argument("element", nargs="?", help="graph key or element (not used by criteria)")
    p.add_argument("--scheme", choices=sorted(SCHEMES), default="MS")
    p.add_argument("--character", choices=("standard", "seeded", "qgs_symmetric"), default="standard")
    p.set_defaults(func=cmd_renorm)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    cache = args.cache or os.environ.get("HOPFREN_CACHE")
    set_cache_dir(cache)
    set_max_graphs(args.max_graphs)
    if args.command == "renorm" and args.what != "criteria" and not args.element:
        print("error: element: required for counterterm and renormalized", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except TheoryError as exc:
        print(f"error: invalid theory: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceCapError as exc:
        print(f"error: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except PoleOverflowError as exc:
        print(f"error: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except IllDefinedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    finally:
        set_max_graphs(None)
        set_cache_dir(None)


if __name__ == "__main__":
    sys.exit(main())
