import json
from fractions import Fraction

import pytest

from hopfren.theory import (
    CorollaClass,
    QgsRelation,
    TheoryError,
    amplitude_set,
    check_relation,
    classify_corolla,
    cograph_divergence_criterion,
    corolla_weight,
    fixture_names,
    grading_compatibility,
    load_theory,
    resolve_theory,
    with_relations,
)

QED = {
    "dimension": 4,
    "edges": [{"name": "f", "weight": -1, "oriented": True}, {"name": "p", "weight": -2}],
    "vertices": [{"name": "y", "weight": 0, "legs": ["f:in", "f:out", "p"], "coupling": {"e": 1}}],
    "couplings": ["e"],
}


def _doc(**over):
    doc = json.loads(json.dumps(QED))
    doc.update(over)
    return doc


def test_fixtures_ship():
    assert fixture_names() == ["phi3_d4", "phi3_d6", "phi4_d4", "toygrav", "toyym_1edge"]


def test_oriented_theory_loads():
    t = load_theory(json.dumps(QED), name="qed")
    assert t.name == "qed"
    assert t.edge("f").oriented and not t.edge("p").oriented
    assert t.vertex("y").valence == 3
    assert corolla_weight(t, "y") == Fraction(-2)
    assert classify_corolla(t, "y") is CorollaClass.RENORMALIZABLE


@pytest.mark.parametrize("doc, path", [
    (_doc(dimension="4"), "dimension"),
    (_doc(edges=[{"name": "f", "weight": 1.5}]), "edges[0].weight"),
    (_doc(extra=1), "<root>"),
    (_doc(vertices=[{"name": "y", "weight": 0, "legs": ["f", "f", "p"], "coupling": {"e": 1}}]),
     "vertices[0].legs[0]"),
    (_doc(vertices=[{"name": "y", "weight": 0, "legs": ["q:in"], "coupling": {"e": 1}}]), "vertices[0].legs[0]"),
    (_doc(vertices=[{"name": "y", "weight": 0, "legs": ["f:in", "f:out", "p"], "coupling": {"z": 1}}]),
     "vertices[0].coupling"),
    (_doc(edges=[{"name": "f", "weight": -1, "oriented": True}, {"name": "f", "weight": -2}]), "edges[1].name"),
    (_doc(qgs=[{"v": "y", "m": 1, "w": "y", "n": 1}]), "qgs[0]"),
])
def test_invalid_documents_name_the_field(doc, path):
    with pytest.raises(TheoryError) as err:
        load_theory(json.dumps(doc))
    assert err.value.path == path


def test_parse_error_is_a_theory_error():
    with pytest.raises(TheoryError, match="parse error"):
        load_theory("{not json")


def test_unknown_reference():
    with pytest.raises(TheoryError):
        resolve_theory("no_such_theory")


@pytest.mark.parametrize("name, classes", [
    ("phi3_d6", {"v3": CorollaClass.RENORMALIZABLE}),
    ("phi3_d4", {"v3": CorollaClass.SUPER_RENORMALIZABLE}),
    ("phi4_d4", {"v4": CorollaClass.RENORMALIZABLE}),
    ("toyym_1edge", {"v3": CorollaClass.RENORMALIZABLE, "v4": CorollaClass.RENORMALIZABLE}),
    ("toygrav", {"h3": CorollaClass.NON_RENORMALIZABLE, "h4": CorollaClass.NON_RENORMALIZABLE,
                 "h5": CorollaClass.NON_RENORMALIZABLE}),
])
def test_corolla_classes(name, classes):
    t = resolve_theory(name)
    assert {v.name: classify_corolla(t, v.name) for v in t.vertices} == classes


def test_corolla_weights(phi3_6, grav):
    assert corolla_weight(phi3_6, "v3") == -3
    assert [corolla_weight(grav, v.name) for v in grav.vertices] == [-1, -2, -3]


def test_grading_compatibility(ym, grav, phi3_6):
    for t in (ym, grav, phi3_6):
        rep = grading_compatibility(t)
        assert rep.coupling_grading_compatible and rep.loop_grading_compatible


def test_coupling_incompatible_pair():
    # v4 weight shifted: theta(v3)^2 = theta(v4) but 2 * w(v3) != w(v4)
    doc = {"dimension": 4, "edges": [{"name": "a", "weight": -2}],
           "vertices": [{"name": "v3", "weight": 1, "legs": ["a"] * 3, "coupling": {"g": 1}},
                        {"name": "v4", "weight": 1, "legs": ["a"] * 4, "coupling": {"g": 2}}],
           "couplings": ["g"]}
    rep = grading_compatibility(load_theory(json.dumps(doc)))
    assert not rep.coupling_grading_compatible
    assert not rep.loop_grading_compatible
    assert any(w["check"] == "coupling" for w in rep.witnesses)


def test_cograph_criterion(phi3_6, phi3_4, grav, ym):
    assert cograph_divergence_criterion(grav).certified
    assert cograph_divergence_criterion(phi3_6).certified
    assert cograph_divergence_criterion(ym).certified
    crit = cograph_divergence_criterion(phi3_4)
    assert not crit.criterion_applies and not crit.certified


def test_relations(ym):
    assert ym.qgs_relations == (QgsRelation("v3", 2, "v4", 1),)
    with pytest.raises(ValueError):
        check_relation(ym, QgsRelation("v3", 1, "v4", 1))
    with pytest.raises(ValueError):
        check_relation(ym, QgsRelation("v3", 0, "v4", 1))
    assert with_relations(ym, []).qgs_relations == ()


def test_digest_is_stable(phi3_6):
    assert phi3_6.digest() == resolve_theory("phi3_d6").digest()
    assert phi3_6.digest() != resolve_theory("phi3_d4").digest()


def test_amplitude_set_phi3_d6(phi3_6):
    assert {a.label for a in amplitude_set(phi3_6, 1)} == {"s", "v3"}
    # the leg window grows with the cap, admitting the one-loop box
    assert {a.label for a in amplitude_set(phi3_6, 2)} == {"s", "v3", "Q[s,s,s,s]"}
