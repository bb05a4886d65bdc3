"""Verification suites shared by the command line and the acceptance tests."""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .combinatorics import IllDefinedError, cograph_scan, enumerate_shapes, generator_corpus, verify_lemma12
from .graph import residue_grading, sdd, ssdd_split
from .hopf import HopfElement, verify_hopf_axioms
from .qgs import QgsContext, verify_coupling_factorization, verify_hopf_ideal
from .renorm import (
    LaurentSeries,
    MinimalSubtraction,
    OnShellToy,
    Renormalizer,
    criteria_sweep,
    qgs_symmetric_character,
    rota_baxter_defect,
    seeded_character,
    standard_character,
)
from .series import verify_coproduct_identity, verify_insertable_set_identity, verify_insertion_identity
from .theory import TheorySpec, cograph_divergence_criterion

PASS, FAIL, SKIP = "pass", "fail", "skip"


@dataclass
class Check:
    name: str
    status: str
    detail: dict = field(default_factory=dict)
    witnesses: list[str] = field(default_factory=list)

    @classmethod
    def of(cls, name: str, ok: bool, detail: dict | None = None, witnesses=()) -> "Check":
        return cls(name, PASS if ok else FAIL, detail or {}, [str(w) for w in witnesses][:10])

    def to_json(self) -> dict:
        return {"status": self.status, "detail": self.detail, "witnesses": self.witnesses}


@dataclass
class SuiteResult:
    suite: str
    checks: list[Check]
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return all(c.status != FAIL for c in self.checks)


@dataclass(frozen=True)
class Params:
    loops: int
    cmax: int = 3
    seed: int = 0
    characters: int = 20


def default_loops(theory: TheorySpec) -> int:
    # the gravity toy and the gauge toy grow too fast beyond two loops
    return 2 if theory.max_valence >= 5 or len(theory.vertices) > 1 else 3


def _keys(theory: TheorySpec, loops: int) -> list[str]:
    return [g.key for g in generator_corpus(theory, loops)]


# suites


def suite_sdd(theory: TheorySpec, p: Params) -> list[Check]:
    graphs = generator_corpus(theory, p.loops)
    bad_triple, bad_sign = [], []
    for g in graphs:
        s = sdd(g)
        if len(set(s)) != 1:
            bad_triple.append(f"{g.key}: {tuple(s)}")
        non, ren, sup = ssdd_split(g)
        if non < 0 or ren != 0 or sup > 0:
            bad_sign.append(f"{g.key}: non={non} ren={ren} super={sup}")
    return [Check.of("triple_agreement", not bad_triple, {"graphs": len(graphs)}, bad_triple),
            Check.of("ssdd_sign_pattern", not bad_sign, {"graphs": len(graphs)}, bad_sign)]


def suite_hopf_axioms(theory: TheorySpec, p: Params) -> list[Check]:
    keys = _keys(theory, p.loops)
    try:
        results = verify_hopf_axioms(theory, keys)
    except IllDefinedError as exc:
        return [Check("hopf_axioms", SKIP, {"reason": f"coproduct ill-defined: {exc}"})]
    return [Check.of(name, r.ok, {"generators": len(keys)}, r.witnesses) for name, r in results.items()]


def suite_lemma12(theory: TheorySpec, p: Params) -> list[Check]:
    graphs = generator_corpus(theory, p.loops)
    failures, pairs = [], 0
    try:
        for g in graphs:
            r = verify_lemma12(g)
            pairs += 1
            failures.extend(f"{g.key}: {w[1].keys} {w[2]}" for w in r.witnesses)
    except IllDefinedError as exc:
        return [Check("lemma12", SKIP, {"reason": f"coproduct ill-defined: {exc}"})]
    return [Check.of("symmetry_insertion_identity", not failures, {"graphs": pairs}, failures)]


def _residue_names(theory: TheorySpec) -> list[str]:
    return [e.name for e in theory.edges] + [v.name for v in theory.vertices]


def suite_insertion(theory: TheorySpec, p: Params) -> list[Check]:
    checks = []
    for cap in range(1, min(p.loops, 2) + 1):
        names = _residue_names(theory)
        bad, n = [], 0
        for r in names:
            for loops in range(0, 2):
                for g in enumerate_shapes(theory, r, loops):
                    n += 1
                    if not verify_insertion_identity(g, cap):
                        bad.append(g.key)
        checks.append(Check.of(f"graph_insertions_cap{cap}", not bad, {"graphs": n}, bad))
        bad, n = [], 0
        seen = set()
        for g in generator_corpus(theory, min(p.loops, 2)):
            amp = theory.classify_legs(g.leg_slots())
            key = (amp.legs, residue_grading(g))
            if key in seen:
                continue
            seen.add(key)
            n += 1
            if not verify_insertable_set_identity(theory, amp, residue_grading(g), cap):
                bad.append(f"{amp.label} {residue_grading(g)}")
        checks.append(Check.of(f"insertable_sets_cap{cap}", not bad, {"pairs": n}, bad))
    return checks


def _barred_allowed(theory: TheorySpec, loops: int) -> tuple[bool, str]:
    crit = cograph_divergence_criterion(theory)
    if crit.certified:
        return True, "criterion"
    if cograph_scan(theory, generator_corpus(theory, loops)).ok:
        return True, "scan"
    return False, "not cograph-divergent"


def suite_coproduct_identities(theory: TheorySpec, p: Params) -> list[Check]:
    barred_ok, how = _barred_allowed(theory, p.loops)
    checks = [Check("cograph_divergent", PASS if barred_ok else SKIP, {"certified_by": how})]
    jobs: list[tuple[str, str, object]] = [("green", r, None) for r in _residue_names(theory)]
    jobs += [("charge", v.name, None) for v in theory.vertices]
    jobs += [("charge_power", v.name, m) for v in theory.vertices for m in (2, -1, Fraction(1, 2))]
    try:
        for cap in range(1, min(p.loops, 2) + 1):
            bad: dict[str, list[str]] = {"plain": [], "restricted": [], "barred": []}
            for kind, target, m in jobs:
                for rep in verify_coproduct_identity(kind, theory, target, m, cap):
                    if rep.variant == "barred" and not barred_ok:
                        continue
                    if not rep.ok:
                        bad[rep.variant].append(f"{kind} {target} m={m}: {rep.mismatch}")
            for variant, fails in bad.items():
                if variant == "barred" and not barred_ok:
                    checks.append(Check(f"{variant}_cap{cap}", SKIP, {"reason": how}))
                else:
                    checks.append(Check.of(f"{variant}_cap{cap}", not fails, {"identities": len(jobs)}, fails))
    except IllDefinedError as exc:
        return [Check("coproduct_identities", SKIP, {"reason": f"coproduct ill-defined: {exc}"})]
    return checks


def suite_qgs_ideal(theory: TheorySpec, p: Params) -> list[Check]:
    if not theory.qgs_relations:
        return [Check("qgs_ideal", SKIP, {"reason": "no relations"})]
    cap = min(p.loops, 2)
    rep = verify_hopf_ideal(theory, None, p.cmax, cap)
    ranks = [{"relation": s["relation"], "coupling": s["coupling"], "rank": s["rank"]} for s in rep.slices]
    # factorization runs over every coupling grading present at the loop cap
    fact = verify_coupling_factorization(QgsContext.of(theory, None, cap))
    return [Check.of("hopf_ideal", rep.ok, {"slices": ranks}, rep.witnesses),
            Check.of("coupling_factorization", fact.ok, {"cap": cap}, fact.witnesses)]


def _series_pairs(n: int, seed: int, pole_cap: int) -> list[tuple[LaurentSeries, LaurentSeries]]:
    rng = random.Random(seed)

    def one() -> LaurentSeries:
        return LaurentSeries({k: Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for k in range(-pole_cap // 2, 2)},
                             pole_cap, 4, exact=True)

    return [(one(), one()) for _ in range(n)]


def suite_birkhoff(theory: TheorySpec, p: Params) -> list[Check]:
    keys = _keys(theory, p.loops)
    # products of two generators need twice the pole budget
    phi = standard_character(theory, pole_cap=2 * p.loops)
    ren = Renormalizer(phi, MinimalSubtraction())
    try:
        poles = [k for k in keys if not ren.renormalized(HopfElement(theory, {(k,): 1}), check=False)[0].is_pole_free()]
        polar = [k for k in keys if not ren.counterterm_key(k).is_polar()]
        mult = []
        pairs = 0
        for a, b in itertools.combinations_with_replacement(keys, 2):
            pairs += 1
            m = tuple(sorted((a, b)))
            if ren.counterterm_recursive(m) != ren.counterterm_key(a) * ren.counterterm_key(b):
                mult.append(f"{a} * {b}")
    except IllDefinedError as exc:
        return [Check("birkhoff", SKIP, {"reason": f"coproduct ill-defined: {exc}"})]
    rb = []
    for scheme in (MinimalSubtraction(), OnShellToy()):
        for i, (f, g) in enumerate(_series_pairs(200, p.seed, 4)):
            if rota_baxter_defect(scheme, f, g):
                rb.append(f"{scheme.name} pair {i}")
    return [Check.of("renormalized_pole_free", not poles, {"generators": len(keys)}, poles),
            Check.of("counterterm_polar", not polar, {"generators": len(keys)}, polar),
            Check.of("counterterm_multiplicative", not mult, {"pairs": pairs}, mult),
            Check.of("rota_baxter", not rb, {"pairs": 200}, rb)]


def character_family(theory: TheorySpec, cap: int, count: int, seed: int) -> list:
    fam = [qgs_symmetric_character(theory, cap=cap, seed=seed + i) for i in range(count)]
    fam.append(standard_character(theory, pole_cap=cap))
    fam += [seeded_character(theory, seed + 1000 + i, pole_cap=cap) for i in range(3)]
    return fam


def suite_qgs_renorm(theory: TheorySpec, p: Params) -> list[Check]:
    if not theory.qgs_relations:
        return [Check("qgs_renorm", SKIP, {"reason": "no relations"})]
    cap = min(p.loops, 2)
    checks = []
    for renv in (False, True):
        label = "renormalized" if renv else "counterterm"
        symmetric_bad, implication_bad, premises = [], [], 0
        for phi in character_family(theory, cap, p.characters, p.seed):
            for scheme in (MinimalSubtraction(), OnShellToy()):
                for rel, C, rep in criteria_sweep(phi, scheme, theory, p.cmax, cap, renormalized_values=renv):
                    tag = f"{phi.name} {scheme.name} C={C}"
                    if phi.name.startswith("qgs_symmetric") and not rep.well_defined:
                        symmetric_bad.append(tag)
                    if rep.conditions_hold:
                        premises += 1
                    if not rep.implication_ok:
                        implication_bad.append(tag)
        checks.append(Check.of(f"{label}_symmetric_well_defined", not symmetric_bad,
                               {"characters": p.characters}, symmetric_bad))
        checks.append(Check.of(f"{label}_implication", not implication_bad,
                               {"premises_holding": premises}, implication_bad))
    return checks


def suite_cograph(theory: TheorySpec, p: Params) -> list[Check]:
    crit = cograph_divergence_criterion(theory)
    scan = cograph_scan(theory, generator_corpus(theory, p.loops))
    detail = {"criterion_applies": crit.criterion_applies, "certified": crit.certified,
              "scan_ok": scan.ok, "convergent_cographs": len(scan.witnesses)}
    if crit.certified:
        return [Check.of("criterion_agrees_with_scan", scan.ok, detail, scan.witnesses)]
    detail["outcome"] = "witness found" if scan.witnesses else "absent by exhaustion"
    return [Check("scan", PASS, detail, [str(w) for w in scan.witnesses][:10])]


SUITES: dict[str, Callable[[TheorySpec, Params], list[Check]]] = {
    "sdd": suite_sdd,
    "hopf-axioms": suite_hopf_axioms,
    "lemma12": suite_lemma12,
    "insertion": suite_insertion,
    "coproduct-identities": suite_coproduct_identities,
    "qgs-ideal": suite_qgs_ideal,
    "birkhoff": suite_birkhoff,
    "qgs-renorm": suite_qgs_renorm,
    "cograph": suite_cograph,
}


def run_suite(name: str, theory: TheorySpec, p: Params) -> SuiteResult:
    t = time.perf_counter()
    checks = SUITES[name](theory, p)
    return SuiteResult(name, checks, time.perf_counter() - t)
