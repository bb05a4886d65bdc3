import json

import pytest
import sympy

from hopfren.hopf import HopfElement, antipode, coproduct, monomial_grading, product
from hopfren.graph import GradingKind
from hopfren.qgs import (
    QgsContext,
    QgsPreconditionError,
    graded_ideal_basis,
    ideal_generators,
    reduce_mod_ideal,
    theta_multiindex,
    verify_coupling_factorization,
    verify_hopf_ideal,
)
from hopfren.theory import QgsRelation, load_theory

REL = QgsRelation("v3", 2, "v4", 1)


@pytest.fixture(scope="module")
def ctx(ym):
    return QgsContext.of(ym, None, 2)


def _span_rank(theory, ctx, C):
    """Rank of all products generator(c) * monomial(C - c), by sympy."""
    gens = ctx.generators_below(C)
    keys = sorted({k for _, g in gens for m in g.terms for k in m})
    mons = {(): True}
    # monomials over ``keys`` of every coupling up to C
    frontier = [()]
    while frontier:
        nxt = []
        for m in frontier:
            for k in keys:
                if m and k < m[-1]:
                    continue
                mm = m + (k,)
                g = monomial_grading(theory, mm, GradingKind.COUPLING)
                if all(a <= b for a, b in zip(g, C)) and mm not in mons:
                    mons[mm] = True
                    nxt.append(mm)
        frontier = nxt
    rows = []
    for c, g in gens:
        rest = tuple(a - b for a, b in zip(C, c))
        for m in mons:
            if monomial_grading(theory, m, GradingKind.COUPLING) == rest:
                rows.append((g * HopfElement(theory, {m: 1})).terms)
    cols = sorted({m for r in rows for m in r})
    if not rows:
        return 0
    return sympy.Matrix([[r.get(m, 0) for m in cols] for r in rows]).rank()


def test_theta(ym):
    assert theta_multiindex(ym, (2, 1)) == (4,)
    assert theta_multiindex(ym, (0, 0)) == (0,)
    with pytest.raises(ValueError):
        theta_multiindex(ym, (1,))


def test_generator_has_pure_coupling(ym):
    for C in ((2,), (4,)):
        gen = ideal_generators(ym, REL, C, 2)
        assert gen
        assert {monomial_grading(ym, m, GradingKind.COUPLING) for m, _ in gen} == {C}


def test_odd_coupling_slices_are_empty(ym):
    # every ym graph has coupling grading twice its loop number
    assert not ideal_generators(ym, REL, (1,), 2)
    assert not ideal_generators(ym, REL, (3,), 2)


@pytest.mark.parametrize("C", [(2,), (3,), (4,)])
def test_rank_matches_sympy(ym, ctx, C):
    assert graded_ideal_basis(ym, [REL], C, 2).rank == _span_rank(ym, ctx, C)


def test_membership(ym, ctx):
    gen = ctx.generator(REL, (2,))
    assert ctx.is_member(gen)
    assert ctx.is_member(gen * 3)
    key = next(k for m, _ in gen for k in m)
    assert ctx.is_member(product(gen, HopfElement(ym, {(key,): 1})))
    assert not ctx.is_member(HopfElement(ym, {(key,): 1}))
    assert not ctx.is_member(HopfElement.unit(ym))
    x = HopfElement(ym, {(key,): 1}) + gen
    r = reduce_mod_ideal(x, ctx)
    assert reduce_mod_ideal(r, ctx) == r
    assert ctx.is_member(x - r)


def test_hopf_ideal_conditions(ym):
    rep = verify_hopf_ideal(ym, None, (2,), 2)
    assert rep.ok, rep.witnesses
    assert all(s["coproduct"] and s["counit"] and s["antipode"] for s in rep.slices)


def test_antipode_and_coproduct_of_generator(ym, ctx):
    gen = ctx.generator(REL, (2,))
    assert ctx.is_member(antipode(gen))
    assert coproduct(gen)


def test_factorization(ctx):
    assert verify_coupling_factorization(ctx, C_max=(4,)).ok


def test_factorization_needs_the_relation(ym):
    # without the quotient, the residue gradings (2, 0) and (0, 1) over g^2 give different
    # left classes; this first shows at total coupling g^4
    bare = QgsContext.of(ym, [], 2)
    assert verify_coupling_factorization(bare, C_max=(3,)).ok
    res = verify_coupling_factorization(bare, C_max=(4,))
    assert not res.ok
    assert any("different classes" in w for w in res.witnesses)


def test_preconditions(ym, phi3_6):
    with pytest.raises(QgsPreconditionError):
        QgsContext.of(ym, [QgsRelation("v3", 1, "v4", 1)], 2)
    doc = {"dimension": 4, "edges": [{"name": "a", "weight": -2}],
           "vertices": [{"name": "v3", "weight": 1, "legs": ["a"] * 3, "coupling": {"g": 1}},
                        {"name": "v4", "weight": 1, "legs": ["a"] * 4, "coupling": {"g": 2}}],
           "couplings": ["g"]}
    shifted = load_theory(json.dumps(doc))
    with pytest.raises(QgsPreconditionError):
        QgsContext.of(shifted, [REL], 2)
    assert QgsContext.of(phi3_6, [], 2).relations == ()
