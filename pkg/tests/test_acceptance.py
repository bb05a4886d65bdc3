"""Acceptance criteria, each checked at its stated scale and tolerance.

Every test records one pass/fail line; the lines are printed at the end of the session.
"""

import json
import os
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

from acceptance_log import record
from hopfren.combinatorics import enumerate_shapes
from hopfren.graph import residue_grading
from hopfren.renorm import LaurentSeries, MinimalSubtraction, Renormalizer, standard_character
from hopfren.series import realizing_graphs, verify_insertable_set_identity, verify_insertion_identity
from hopfren.suites import (
    PASS,
    Params,
    suite_birkhoff,
    suite_coproduct_identities,
    suite_cograph,
    suite_lemma12,
    suite_qgs_ideal,
    suite_qgs_renorm,
)
from hopfren.theory import cograph_divergence_criterion

JOBS = Path(__file__).with_name("acceptance_jobs.py")
NESTED = "V=v3,v3,v3,v3;X=2:s,3:s;E=0-1:s,0-1:s,0-2:s,1-3:s,2-3:s"


def _cold_job(name: str) -> dict:
    env = {k: v for k, v in os.environ.items() if k != "HOPFREN_CACHE"}
    proc = subprocess.run([sys.executable, str(JOBS), name], capture_output=True, text=True, env=env,
                          cwd=JOBS.parent)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout)


def _failed(checks) -> list:
    return [c for c in checks if c.status != PASS]


def test_c01_sdd_triple_agreement():
    out = _cold_job("sdd")
    graphs = sum(c["detail"]["graphs"] for c in out["checks"] if c["check"] == "triple_agreement")
    bad = [c for c in out["checks"] if c["status"] != PASS]
    ok = not bad and graphs >= 1000 and out["seconds"] < 60
    record(1, "SDD triple agreement and sign pattern", ok, f"{graphs} graphs, {out['seconds']:.1f} s")
    assert not bad, bad
    assert graphs >= 1000
    assert out["seconds"] < 60


def test_c02_hopf_axioms():
    out = _cold_job("hopf")
    bad = [c for c in out["checks"] if c["status"] != PASS]
    names = {c["check"] for c in out["checks"]}
    ok = not bad and {"coassociativity", "counit", "antipode", "involution"} <= names and out["seconds"] < 120
    record(2, "Hopf axioms on phi3_d6 <= 3 loops and toyym_1edge <= 2 loops", ok, f"{out['seconds']:.1f} s")
    assert not bad, bad
    assert {"coassociativity", "counit", "antipode", "involution"} <= names
    assert out["seconds"] < 120


def test_c03_symmetry_insertion_identity(phi3_6):
    checks = suite_lemma12(phi3_6, Params(3))
    bad = _failed(checks)
    record(3, "symmetry factor / insertion identity on phi3_d6 <= 3 loops", not bad,
           f"{checks[0].detail.get('graphs')} graphs")
    assert not bad, [c.witnesses for c in bad]


def _insertion_failures(theory, residues, cap):
    bad, n = [], 0
    for r in residues:
        for loops in range(0, cap + 1):
            for g in enumerate_shapes(theory, r, loops):
                n += 1
                if not verify_insertion_identity(g, cap):
                    bad.append(f"graph {g.key} cap {cap}")
        gradings = {tuple(residue_grading(g)) for loops in range(1, 3) for g in enumerate_shapes(theory, r, loops)}
        for rvec in sorted(gradings):
            n += 1
            assert realizing_graphs(theory, r, rvec)
            if not verify_insertable_set_identity(theory, r, rvec, cap):
                bad.append(f"set {r} {rvec} cap {cap}")
    return bad, n


def test_c04_insertion_enumeration_matches_products(phi3_6, ym):
    bad, n = [], 0
    for theory in (phi3_6, ym):
        names = [e.name for e in theory.edges] + [v.name for v in theory.vertices]
        b, k = _insertion_failures(theory, names, 1)
        bad += b
        n += k
    b, k = _insertion_failures(phi3_6, ["s", "v3"], 2)
    bad += b
    n += k
    record(4, "insertion enumeration equals Green's-function products", not bad, f"{n} identities")
    assert not bad, bad


def test_c05_coproduct_identities(phi3_6, ym):
    bad, n = [], 0
    for theory in (phi3_6, ym):
        assert cograph_divergence_criterion(theory).certified
        checks = suite_coproduct_identities(theory, Params(2))
        assert {c.name for c in checks} >= {f"{v}_cap{k}" for v in ("plain", "restricted", "barred") for k in (1, 2)}
        bad += _failed(checks)
        n += len(checks)
    record(5, "coproduct identities at caps 1-2 with barred variants", not bad, f"{n} checks")
    assert not bad, [(c.name, c.witnesses) for c in bad]


def test_c06_qgs_ideal(ym):
    checks = suite_qgs_ideal(ym, Params(2, cmax=3))
    bad = _failed(checks)
    slices = len(checks[0].detail["slices"])
    record(6, "QGS Hopf ideal and coupling factorization on toyym_1edge", not bad, f"{slices} slices")
    assert not bad, [(c.name, c.witnesses) for c in bad]


def test_c07_birkhoff(phi3_6):
    checks = suite_birkhoff(phi3_6, Params(3))
    ren = Renormalizer(standard_character(phi3_6, pole_cap=3), MinimalSubtraction())
    anchor = ren.counterterm_key(NESTED)
    want = LaurentSeries({-2: Fraction(-1, 4), -1: Fraction(1, 2)}, 3)
    bad = _failed(checks)
    ok = not bad and anchor == want
    record(7, "Birkhoff decomposition with MS on phi3_d6 <= 3 loops", ok,
           f"{checks[2].detail['pairs']} monomial pairs, S(N2) = {anchor.to_text().replace(chr(10), ' + ')}")
    assert not bad, [(c.name, c.witnesses) for c in bad]
    assert anchor == want


def test_c08_qgs_renormalization(ym):
    checks = suite_qgs_renorm(ym, Params(2, cmax=3, characters=20))
    bad = _failed(checks)
    record(8, "qgs_symmetric well-definedness and implication over 20 seeded characters", not bad,
           f"{len(checks)} checks")
    assert not bad, [(c.name, c.witnesses) for c in bad]


def test_c09_cograph_ground_truth(grav, phi3_4):
    assert cograph_divergence_criterion(grav).certified
    g = suite_cograph(grav, Params(2))
    assert not cograph_divergence_criterion(phi3_4).certified
    p = suite_cograph(phi3_4, Params(3))
    outcome = p[0].detail["outcome"]
    ok = g[0].name == "criterion_agrees_with_scan" and g[0].status == PASS and p[0].status == PASS
    record(9, "cograph divergence: scan versus criterion", ok, f"toygrav agrees, phi3_d4 {outcome} at 3 loops")
    assert ok
    assert outcome in ("witness found", "absent by exhaustion")


def test_c10_verify_all_fixtures():
    out = _cold_job("verify-all")
    bad = [r for r in out["runs"] if r["exit"] not in (0, 1) or r["verdict"] is None]
    ok = not bad and out["seconds"] < 600
    verdicts = ", ".join(f"{r['theory']} {r['verdict']}" for r in out["runs"])
    record(10, "verify all suites on all fixtures", ok, f"{out['seconds']:.1f} s; {verdicts}")
    assert not bad, bad
    assert out["seconds"] < 600
