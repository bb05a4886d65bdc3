"""Theory declarations: residues, weights, couplings and power-counting classification.

A theory is loaded from a small JSON document and is immutable afterwards.
Half-edge slots are written as ``(edge_name, polarity)`` pairs, where the
polarity is 0 for unoriented edges and +1/-1 for the outgoing/incoming end of
an oriented edge.  In JSON an oriented slot is written ``"name:out"`` or
``"name:in"``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from importlib import resources
from math import gcd
from pathlib import Path
from typing import Any, Iterable, Sequence

import jsonschema

Slot = tuple[str, int]

_IDENT = r"^[A-Za-z_][A-Za-z0-9_]*$"
_LEG = r"^[A-Za-z_][A-Za-z0-9_]*(:(in|out))?$"

THEORY_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dimension", "edges", "vertices", "couplings"],
    "properties": {
        "name": {"type": "string", "pattern": _IDENT},
        "dimension": {"type": "integer", "minimum": 1},
        "tadpoles": {"type": "boolean"},
        "edges": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "weight"],
                "properties": {
                    "name": {"type": "string", "pattern": _IDENT},
                    "weight": {"type": "integer"},
                    "oriented": {"type": "boolean"},
                },
            },
        },
        "vertices": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "weight", "legs", "coupling"],
                "properties": {
                    "name": {"type": "string", "pattern": _IDENT},
                    "weight": {"type": "integer"},
                    "legs": {"type": "array", "minItems": 1, "items": {"type": "string", "pattern": _LEG}},
                    "coupling": {
                        "type": "object",
                        "additionalProperties": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
        "couplings": {"type": "array", "items": {"type": "string", "pattern": _IDENT}},
        "qgs": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["v", "m", "w", "n"],
                "properties": {
                    "v": {"type": "string"},
                    "m": {"type": "integer", "minimum": 1},
                    "w": {"type": "string"},
                    "n": {"type": "integer", "minimum": 1},
                },
            },
        },
    },
}


class TheoryError(ValueError):
    """Invalid theory input; ``path`` names the offending field when known."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class EdgeResidue:
    name: str
    weight: int
    oriented: bool = False

    def slots(self) -> tuple[Slot, Slot]:
        """The two slot types an internal edge of this residue occupies."""
        if self.oriented:
            return (self.name, -1), (self.name, 1)
        return (self.name, 0), (self.name, 0)


@dataclass(frozen=True)
class VertexResidue:
    name: str
    weight: int
    legs: tuple[Slot, ...]
    coupling: tuple[tuple[str, int], ...]

    @property
    def valence(self) -> int:
        return len(self.legs)


@dataclass(frozen=True)
class QgsRelation:
    """A quantum gauge symmetry ``{v, m; w, n}`` with theta(v)^m = theta(w)^n."""

    v: str
    m: int
    w: str
    n: int


class CorollaClass(Enum):
    RENORMALIZABLE = "Renormalizable"
    SUPER_RENORMALIZABLE = "SuperRenormalizable"
    NON_RENORMALIZABLE = "NonRenormalizable"


class AmplitudeKind(Enum):
    VERTEX = "vertex"
    EDGE = "edge"
    QUANTUM = "quantum"


@dataclass(frozen=True, order=True)
class Amplitude:
    """An external-leg structure, flagged by whether it is a residue of the theory."""

    legs: tuple[Slot, ...]
    kind: AmplitudeKind = field(compare=False)
    name: str | None = field(default=None, compare=False)

    @property
    def in_residues(self) -> bool:
        return self.kind is not AmplitudeKind.QUANTUM

    @property
    def label(self) -> str:
        if self.name is not None:
            return self.name
        return "Q[" + ",".join(slot_str(s) for s in self.legs) + "]"

    def __str__(self) -> str:
        return self.label


def slot_str(slot: Slot) -> str:
    name, pol = slot
    return name if pol == 0 else f"{name}:{'out' if pol > 0 else 'in'}"


def parse_slot(text: str) -> Slot:
    if ":" in text:
        name, tag = text.split(":", 1)
        if tag not in ("in", "out"):
            raise TheoryError(f"bad slot polarity {tag!r}")
        return name, (1 if tag == "out" else -1)
    return text, 0


@dataclass(frozen=True, eq=True)
class TheorySpec:
    name: str
    dimension: int
    edges: tuple[EdgeResidue, ...]
    vertices: tuple[VertexResidue, ...]
    couplings: tuple[str, ...]
    qgs_relations: tuple[QgsRelation, ...] = ()
    tadpoles: bool = True
    _edge_by_name: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _vertex_by_name: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_edge_by_name", {e.name: e for e in self.edges})
        object.__setattr__(self, "_vertex_by_name", {v.name: (i, v) for i, v in enumerate(self.vertices)})
        object.__setattr__(self, "_hash", hash(self.digest()))

    def __hash__(self) -> int:
        return self._hash

    # lookups

    def edge(self, name: str) -> EdgeResidue:
        try:
            return self._edge_by_name[name]
        except KeyError:
            raise KeyError(f"unknown edge residue {name!r}") from None

    def vertex(self, name: str) -> VertexResidue:
        try:
            return self._vertex_by_name[name][1]
        except KeyError:
            raise KeyError(f"unknown vertex residue {name!r}") from None

    def vertex_index(self, name: str) -> int:
        try:
            return self._vertex_by_name[name][0]
        except KeyError:
            raise KeyError(f"unknown vertex residue {name!r}") from None

    def is_vertex(self, name: str) -> bool:
        return name in self._vertex_by_name

    def is_edge(self, name: str) -> bool:
        return name in self._edge_by_name

    def theta(self, vertex: str) -> tuple[int, ...]:
        """Coupling exponent vector of a vertex residue, in declared coupling order."""
        exps = dict(self.vertex(vertex).coupling)
        return tuple(exps.get(c, 0) for c in self.couplings)

    def slot_types(self) -> list[Slot]:
        out: list[Slot] = []
        for e in self.edges:
            out.extend([(e.name, -1), (e.name, 1)] if e.oriented else [(e.name, 0)])
        return out

    @property
    def max_valence(self) -> int:
        return max((v.valence for v in self.vertices), default=0)

    # amplitudes

    def classify_legs(self, legs: Iterable[Slot]) -> Amplitude:
        """Match a leg multiset against edge residues, then vertex residues.

        A two-leg structure that is both an edge residue and a two-valent
        vertex residue is reported as the edge residue.
        """
        legs = tuple(sorted(legs))
        if len(legs) == 2:
            for e in self.edges:
                if tuple(sorted(e.slots())) == legs:
                    return Amplitude(legs, AmplitudeKind.EDGE, e.name)
        for v in self.vertices:
            if v.legs == legs:
                return Amplitude(legs, AmplitudeKind.VERTEX, v.name)
        return Amplitude(legs, AmplitudeKind.QUANTUM, None)

    def amplitude(self, spec: "str | Amplitude | Sequence[str] | Sequence[Slot]") -> Amplitude:
        """Resolve a residue name, a leg list, or an Amplitude."""
        if isinstance(spec, Amplitude):
            return spec
        if isinstance(spec, str):
            if self.is_edge(spec):
                return self.classify_legs(self.edge(spec).slots())
            if self.is_vertex(spec):
                return self.classify_legs(self.vertex(spec).legs)
            if spec.startswith("Q[") and spec.endswith("]"):
                return self.amplitude(spec[2:-1].split(","))
            raise KeyError(f"unknown amplitude {spec!r}")
        slots = [parse_slot(s) if isinstance(s, str) else tuple(s) for s in spec]
        for name, _ in slots:
            self.edge(name)
        return self.classify_legs(slots)

    # serialization

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "dimension": self.dimension,
            "tadpoles": self.tadpoles,
            "edges": [{"name": e.name, "weight": e.weight, "oriented": e.oriented} for e in self.edges],
            "vertices": [
                {
                    "name": v.name,
                    "weight": v.weight,
                    "legs": [slot_str(s) for s in v.legs],
                    "coupling": dict(v.coupling),
                }
                for v in self.vertices
            ],
            "couplings": list(self.couplings),
            "qgs": [{"v": r.v, "m": r.m, "w": r.w, "n": r.n} for r in self.qgs_relations],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def _schema_path(err: jsonschema.ValidationError) -> str:
    out = ""
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def load_theory(source: str, name: str = "theory") -> TheorySpec:
    """Parse and validate a theory document."""
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise TheoryError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        jsonschema.validate(doc, THEORY_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise TheoryError(exc.message, _schema_path(exc)) from None
    return _build(doc, doc.get("name", name))


def load_theory_file(path: str | Path) -> TheorySpec:
    path = Path(path)
    return load_theory(path.read_text(encoding="utf-8"), name=path.stem)


def fixture_names() -> list[str]:
    root = resources.files("hopfren") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_fixture(name: str) -> TheorySpec:
    root = resources.files("hopfren") / "fixtures"
    return load_theory((root / f"{name}.json").read_text(encoding="utf-8"), name=name)


def resolve_theory(ref: str | Path) -> TheorySpec:
    """Load a theory from a file path or, failing that, a bundled fixture name."""
    path = Path(ref)
    if path.is_file():
        return load_theory_file(path)
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    if stem in fixture_names():
        return load_fixture(stem)
    raise TheoryError(f"no such theory file or fixture: {ref}")


def _build(doc: dict[str, Any], name: str) -> TheorySpec:
    edges = []
    seen: set[str] = set()
    for i, e in enumerate(doc["edges"]):
        if e["name"] in seen:
            raise TheoryError(f"duplicate residue name {e['name']!r}", f"edges[{i}].name")
        seen.add(e["name"])
        edges.append(EdgeResidue(e["name"], e["weight"], e.get("oriented", False)))
    by_edge = {e.name: e for e in edges}
    couplings = tuple(doc["couplings"])
    if len(set(couplings)) != len(couplings):
        raise TheoryError("duplicate coupling name", "couplings")

    vertices = []
    used: set[str] = set()
    for i, v in enumerate(doc["vertices"]):
        where = f"vertices[{i}]"
        if v["name"] in seen:
            raise TheoryError(f"duplicate residue name {v['name']!r}", f"{where}.name")
        seen.add(v["name"])
        legs = []
        for j, text in enumerate(v["legs"]):
            slot = parse_slot(text)
            edge = by_edge.get(slot[0])
            if edge is None:
                raise TheoryError(f"leg names undeclared edge residue {slot[0]!r}", f"{where}.legs[{j}]")
            if edge.oriented and slot[1] == 0:
                raise TheoryError(f"oriented edge {edge.name!r} needs an ':in' or ':out' leg", f"{where}.legs[{j}]")
            if not edge.oriented and slot[1] != 0:
                raise TheoryError(f"unoriented edge {edge.name!r} takes no polarity", f"{where}.legs[{j}]")
            legs.append(slot)
        for c in v["coupling"]:
            if c not in couplings:
                raise TheoryError(f"undeclared coupling {c!r}", f"{where}.coupling")
        coupling = tuple(sorted((c, k) for c, k in v["coupling"].items() if k))
        if not coupling:
            raise TheoryError("coupling monomial must be non-trivial", f"{where}.coupling")
        used.update(c for c, _ in coupling)
        vertices.append(VertexResidue(v["name"], v["weight"], tuple(sorted(legs)), coupling))
    for c in couplings:
        if c not in used:
            raise TheoryError(f"coupling {c!r} is not used by any vertex", "couplings")

    theory = TheorySpec(name, doc["dimension"], tuple(edges), tuple(vertices), couplings, (), doc.get("tadpoles", True))
    relations = []
    for i, r in enumerate(doc.get("qgs", [])):
        rel = QgsRelation(r["v"], r["m"], r["w"], r["n"])
        try:
            check_relation(theory, rel)
        except ValueError as exc:
            raise TheoryError(str(exc), f"qgs[{i}]") from None
        relations.append(rel)
    return TheorySpec(name, theory.dimension, theory.edges, theory.vertices, couplings, tuple(relations), theory.tadpoles)


def check_relation(theory: TheorySpec, rel: QgsRelation) -> None:
    """Raise ValueError unless ``rel`` is a well-formed relation for ``theory``."""
    for v in (rel.v, rel.w):
        if not theory.is_vertex(v):
            raise ValueError(f"relation names unknown vertex residue {v!r}")
    if rel.m < 1 or rel.n < 1:
        raise ValueError("relation exponents must be positive")
    if rel.v == rel.w and rel.m == rel.n:
        raise ValueError("relation is trivial (v = w and m = n)")
    a = [rel.m * x for x in theory.theta(rel.v)]
    b = [rel.n * x for x in theory.theta(rel.w)]
    if a != b:
        raise ValueError(f"theta({rel.v})^{rel.m} != theta({rel.w})^{rel.n}")


def with_relations(theory: TheorySpec, relations: Iterable[QgsRelation]) -> TheorySpec:
    relations = tuple(relations)
    for rel in relations:
        check_relation(theory, rel)
    return TheorySpec(theory.name, theory.dimension, theory.edges, theory.vertices, theory.couplings, relations, theory.tadpoles)


def union(name: str, *theories: TheorySpec) -> TheorySpec:
    """Disjoint union of theories sharing a dimension (names must not clash)."""
    dims = {t.dimension for t in theories}
    if len(dims) != 1:
        raise TheoryError("theories have different dimensions")
    doc = {"dimension": dims.pop(), "edges": [], "vertices": [], "couplings": [], "qgs": []}
    for t in theories:
        d = t.to_dict()
        doc["edges"] += d["edges"]
        doc["vertices"] += d["vertices"]
        doc["couplings"] += [c for c in d["couplings"] if c not in doc["couplings"]]
        doc["qgs"] += d["qgs"]
    return _build(doc, name)


# power counting on corollas


def corolla_weight(theory: TheorySpec, v: str) -> Fraction:
    """Vertex weight plus half the weights of its attached legs."""
    vert = theory.vertex(v)
    return vert.weight + Fraction(sum(theory.edge(e).weight for e, _ in vert.legs), 2)


def renormalizable_weight(theory: TheorySpec, v: str) -> Fraction:
    return theory.dimension * (1 - Fraction(theory.vertex(v).valence, 2))


def classify_corolla(theory: TheorySpec, v: str) -> CorollaClass:
    w = corolla_weight(theory, v)
    bound = renormalizable_weight(theory, v)
    if w == bound:
        return CorollaClass.RENORMALIZABLE
    return CorollaClass.NON_RENORMALIZABLE if w > bound else CorollaClass.SUPER_RENORMALIZABLE


@dataclass(frozen=True)
class GradingReport:
    coupling_grading_compatible: bool
    loop_grading_compatible: bool
    witnesses: tuple[dict, ...] = ()


def _min_powers(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, int] | None:
    """Smallest positive (m, n) with m*a = n*b, or None."""
    k = next(i for i, x in enumerate(a) if x)
    if not b[k]:
        return None
    g = gcd(a[k], b[k])
    m, n = b[k] // g, a[k] // g
    if [m * x for x in a] != [n * y for y in b]:
        return None
    return m, n


def grading_compatibility(theory: TheorySpec) -> GradingReport:
    witnesses: list[dict] = []
    coupling_ok = True
    names = [v.name for v in theory.vertices]
    for i, v in enumerate(names):
        for w in names[i + 1:]:
            powers = _min_powers(theory.theta(v), theory.theta(w))
            if powers is None:
                continue
            m, n = powers
            lhs, rhs = m * corolla_weight(theory, v), n * corolla_weight(theory, w)
            if lhs != rhs:
                coupling_ok = False
                witnesses.append({"check": "coupling", "v": v, "m": m, "w": w, "n": n,
                                  "lhs": str(lhs), "rhs": str(rhs)})
    loop_ok = True
    ratios: dict[str, Fraction] = {}
    for v in theory.vertices:
        if v.valence == 2:
            witnesses.append({"check": "loop", "v": v.name, "reason": "two-valent vertex, review manually"})
            continue
        ratios[v.name] = corolla_weight(theory, v.name) / (v.valence - 2)
    first = next(iter(ratios.values()), None)
    for name, q in ratios.items():
        if q != first:
            loop_ok = False
            witnesses.append({"check": "loop", "v": name, "ratio": str(q), "expected": str(first)})
    return GradingReport(coupling_ok, loop_ok, tuple(witnesses))


@dataclass(frozen=True)
class CographCriterion:
    criterion_applies: bool
    certified: bool


def cograph_divergence_criterion(theory: TheorySpec) -> CographCriterion:
    """Sufficient criterion: no super-renormalizable corollas and all vertex weights >= 0."""
    classes = [classify_corolla(theory, v.name) for v in theory.vertices]
    applies = CorollaClass.SUPER_RENORMALIZABLE not in classes
    certified = applies and all(v.weight >= 0 for v in theory.vertices)
    return CographCriterion(applies, certified)


def default_max_legs(theory: TheorySpec, loop_cap: int) -> int:
    return theory.max_valence + loop_cap - 1


def candidate_amplitudes(theory: TheorySpec, max_legs: int, min_legs: int = 2) -> list[Amplitude]:
    from itertools import combinations_with_replacement

    types = theory.slot_types()
    out = []
    for k in range(min_legs, max_legs + 1):
        for legs in combinations_with_replacement(types, k):
            out.append(theory.classify_legs(legs))
    return out


def amplitude_set(theory: TheorySpec, loop_cap: int, max_legs: int | None = None) -> list[Amplitude]:
    """External-leg structures realized by 1PI graphs with at most ``loop_cap`` loops.

    Structures with more than ``max_legs`` legs are not searched (default:
    largest valence plus ``loop_cap - 1``); one- and zero-leg structures are
    skipped since they never occur as subgraphs of 1PI graphs.
    """
    from .combinatorics import enumerate_shapes

    if loop_cap < 1:
        raise ValueError("loop_cap must be >= 1")
    if max_legs is None:
        max_legs = default_max_legs(theory, loop_cap)
    out = []
    for amp in candidate_amplitudes(theory, max_legs):
        if amp.kind is AmplitudeKind.VERTEX or any(
            enumerate_shapes(theory, amp, loops) for loops in range(1, loop_cap + 1)
        ):
            out.append(amp)
    return out
