"""Colored Feynman multigraphs with external-leg stubs.

Vertices are numbered ``0..n-1`` and carry a vertex-residue name.  Internal
edges are ``(a, b, edge)`` triples; unoriented edges are stored with
``a <= b`` and oriented ones as ``(source, target, edge)``.  External legs
are ``(vertex, edge, polarity, port)`` where ``port`` is an optional integer
tag that pins the leg under isomorphism.
"""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

from .theory import (
    Amplitude,
    AmplitudeKind,
    CorollaClass,
    Slot,
    TheorySpec,
    classify_corolla,
    corolla_weight,
    parse_slot,
    slot_str,
)

Edge = tuple[int, int, str]
Leg = tuple[int, str, int, "int | None"]


class GraphError(ValueError):
    pass


class FeynmanGraph:
    """Immutable colored multigraph whose vertex slots are filled exactly once."""

    def __init__(
        self,
        theory: TheorySpec,
        vertices: Sequence[str],
        edges: Iterable[Edge] = (),
        legs: Iterable[Leg] = (),
        validate: bool = True,
    ):
        self.theory = theory
        self.vertices = tuple(vertices)
        norm = []
        for a, b, e in edges:
            if not theory.edge(e).oriented and a > b:
                a, b = b, a
            norm.append((a, b, e))
        self.edges = tuple(sorted(norm))
        self.legs = tuple(sorted(legs, key=_leg_sort_key))
        if validate:
            self._validate()

    def _validate(self) -> None:
        n = len(self.vertices)
        filled: list[Counter] = [Counter() for _ in range(n)]
        for a, b, e in self.edges:
            if not (0 <= a < n and 0 <= b < n):
                raise GraphError(f"edge {(a, b, e)} references a missing vertex")
            sa, sb = self.theory.edge(e).slots()
            # oriented edges leave the source through an outgoing slot
            filled[a][sb if self.theory.edge(e).oriented else sa] += 1
            filled[b][sa] += 1
        for v, e, pol, _ in self.legs:
            if not 0 <= v < n:
                raise GraphError(f"leg at missing vertex {v}")
            filled[v][(e, pol)] += 1
        for v, name in enumerate(self.vertices):
            want = Counter(self.theory.vertex(name).legs)
            if filled[v] != want:
                raise GraphError(f"vertex {v} ({name}) slots {dict(filled[v])} do not match residue {dict(want)}")

    # basic structure

    def __repr__(self) -> str:
        return f"FeynmanGraph({self.key})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FeynmanGraph) and self.theory == other.theory and self.labeled_key == other.labeled_key

    def __hash__(self) -> int:
        return hash(self.labeled_key)

    @property
    def is_empty(self) -> bool:
        return not self.vertices

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def has_ports(self) -> bool:
        return any(port is not None for *_, port in self.legs)

    def slot_attachments(self) -> list[list[tuple]]:
        """Per vertex, the attachments filling its slots.

        Entries are ``("e", edge_index, end)`` with end 0 for the first stored
        endpoint, or ``("x", leg_index)``; each carries its slot type last.
        """
        out: list[list[tuple]] = [[] for _ in self.vertices]
        for i, (a, b, e) in enumerate(self.edges):
            edge = self.theory.edge(e)
            if edge.oriented:
                out[a].append(("e", i, 0, (e, 1)))
                out[b].append(("e", i, 1, (e, -1)))
            else:
                out[a].append(("e", i, 0, (e, 0)))
                out[b].append(("e", i, 1, (e, 0)))
        for i, (v, e, pol, _) in enumerate(self.legs):
            out[v].append(("x", i, (e, pol)))
        return out

    def leg_slots(self) -> tuple[Slot, ...]:
        return tuple(sorted((e, pol) for _, e, pol, _ in self.legs))

    def without_ports(self) -> "FeynmanGraph":
        return FeynmanGraph(self.theory, self.vertices, self.edges,
                            [(v, e, p, None) for v, e, p, _ in self.legs], validate=False)

    def with_ports(self, ports: Sequence[int] | None = None) -> "FeynmanGraph":
        """Assign ports to the legs in stored order (default ``0..E-1``)."""
        ports = range(len(self.legs)) if ports is None else ports
        return FeynmanGraph(self.theory, self.vertices, self.edges,
                            [(v, e, p, q) for (v, e, p, _), q in zip(self.legs, ports)], validate=False)

    @cached_property
    def components(self) -> tuple["FeynmanGraph", ...]:
        return tuple(_split_components(self))

    @property
    def is_connected(self) -> bool:
        return len(self.vertices) > 0 and len(self.components) == 1

    # canonical data

    @cached_property
    def _canon(self) -> tuple[tuple, int]:
        return _canonical_search(self, use_ports=True)

    @cached_property
    def _canon_free(self) -> tuple[tuple, int]:
        return _canonical_search(self, use_ports=False)

    @cached_property
    def labeled_key(self) -> str:
        """Canonical form honouring port tags."""
        return _encode(self._canon[0], self.theory, ports=True)

    @cached_property
    def key(self) -> str:
        """Canonical form of the unlabeled shape (ports ignored)."""
        return _encode(self._canon_free[0], self.theory, ports=False)


def _leg_sort_key(leg: Leg) -> tuple:
    v, e, pol, port = leg
    return (v, e, pol, -1 if port is None else port)


def _split_components(g: FeynmanGraph) -> list[FeynmanGraph]:
    n = len(g.vertices)
    if n == 0:
        return []
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, _ in g.edges:
        parent[find(a)] = find(b)
    groups: dict[int, list[int]] = defaultdict(list)
    for v in range(n):
        groups[find(v)].append(v)
    if len(groups) == 1:
        return [g]
    out = []
    for members in sorted(groups.values()):
        index = {v: i for i, v in enumerate(members)}
        out.append(FeynmanGraph(
            g.theory,
            [g.vertices[v] for v in members],
            [(index[a], index[b], e) for a, b, e in g.edges if a in index],
            [(index[v], e, p, q) for v, e, p, q in g.legs if v in index],
            validate=False,
        ))
    return out


# canonical labeling


def _refine(colors: list[int], nbrs: list[list[tuple[int, tuple]]]) -> list[int]:
    n_cells = len(set(colors))
    while True:
        sigs = [(colors[v], tuple(sorted((colors[u], d) for u, d in nbrs[v]))) for v in range(len(colors))]
        ranking = {s: i for i, s in enumerate(sorted(set(sigs)))}
        colors = [ranking[s] for s in sigs]
        if len(ranking) == n_cells:
            return colors
        n_cells = len(ranking)


def _canonical_search(g: FeynmanGraph, use_ports: bool) -> tuple[tuple, int]:
    """Minimum encoding over the individualization-refinement tree and the number of leaves attaining it.

    The leaf count is the number of vertex permutations preserving residues,
    leg descriptors and edge multisets.
    """
    n = len(g.vertices)
    theory = g.theory
    legs_at: list[list] = [[] for _ in range(n)]
    for v, e, pol, port in g.legs:
        legs_at[v].append((e, pol, (-1 if port is None else port) if use_ports else -1))
    loops_at: list[list] = [[] for _ in range(n)]
    between: dict[tuple[int, int], list] = defaultdict(list)
    for a, b, e in g.edges:
        oriented = theory.edge(e).oriented
        if a == b:
            loops_at[a].append(e)
            continue
        between[(a, b)].append((e, 1 if oriented else 0))
        between[(b, a)].append((e, -1 if oriented else 0))
    nbrs: list[list[tuple[int, tuple]]] = [[] for _ in range(n)]
    for (a, b), ds in between.items():
        nbrs[a].append((b, tuple(sorted(ds))))
    init = [(g.vertices[v], tuple(sorted(legs_at[v])), tuple(sorted(loops_at[v]))) for v in range(n)]
    ranking = {s: i for i, s in enumerate(sorted(set(init)))}
    colors = _refine([ranking[s] for s in init], nbrs)

    best: list = [None, 0]

    def leaf(colors: list[int]) -> None:
        code = (
            tuple(g.vertices[v] for v in sorted(range(n), key=colors.__getitem__)),
            tuple(sorted((colors[v], e, pol, (-1 if port is None else port) if use_ports else -1)
                         for v, e, pol, port in g.legs)),
            tuple(sorted(_edge_code(colors[a], colors[b], e, theory) for a, b, e in g.edges)),
        )
        if best[0] is None or code < best[0]:
            best[0], best[1] = code, 1
        elif code == best[0]:
            best[1] += 1

    def search(colors: list[int]) -> None:
        counts = Counter(colors)
        if len(counts) == n:
            leaf(colors)
            return
        target = min(c for c, k in counts.items() if k > 1)
        for v in range(n):
            if colors[v] == target:
                split = [2 * c + (1 if c == target and u != v else 0) for u, c in enumerate(colors)]
                search(_refine(split, nbrs))

    if n == 0:
        return ((), (), ()), 1
    search(colors)
    return best[0], best[1]


def _edge_code(a: int, b: int, e: str, theory: TheorySpec) -> tuple:
    if not theory.edge(e).oriented and a > b:
        a, b = b, a
    return (a, b, e)


def _encode(code: tuple, theory: TheorySpec, ports: bool) -> str:
    names, legs, edges = code
    arrows = {0: "", 1: ">", -1: "<"}
    leg_txt = ",".join(f"{v}:{e}{arrows[pol]}" + (f"@{port}" if ports and port >= 0 else "") for v, e, pol, port in legs)
    edge_txt = ",".join(f"{a}{'>' if theory.edge(e).oriented else '-'}{b}:{e}" for a, b, e in edges)
    return f"V={','.join(names)};X={leg_txt};E={edge_txt}"


def canonical_form(g: FeynmanGraph, ports: bool = True) -> str:
    return g.labeled_key if ports else g.key


def canonicalize(g: FeynmanGraph) -> bytes:
    """Byte-string canonical form; port tags distinguish legs when present."""
    return g.labeled_key.encode("ascii")


_KEY_RE = re.compile(r"^V=(?P<v>[^;]*);X=(?P<x>[^;]*);E=(?P<e>[^;]*)$")
_LEG_RE = re.compile(r"^(\d+):([A-Za-z_][A-Za-z0-9_]*)([<>]?)(?:@(\d+))?$")
_EDGE_RE = re.compile(r"^(\d+)[->](\d+):([A-Za-z_][A-Za-z0-9_]*)$")


def decode_key(theory: TheorySpec, key: str) -> FeynmanGraph:
    m = _KEY_RE.match(key)
    if not m:
        raise GraphError(f"malformed graph key {key!r}")
    names = [s for s in m["v"].split(",") if s]
    legs = []
    for item in filter(None, m["x"].split(",")):
        lm = _LEG_RE.match(item)
        if not lm:
            raise GraphError(f"malformed leg {item!r}")
        pol = {"": 0, ">": 1, "<": -1}[lm[3]]
        legs.append((int(lm[1]), lm[2], pol, int(lm[4]) if lm[4] else None))
    edges = []
    for item in filter(None, m["e"].split(",")):
        em = _EDGE_RE.match(item)
        if not em:
            raise GraphError(f"malformed edge {item!r}")
        edges.append((int(em[1]), int(em[2]), em[3]))
    return FeynmanGraph(theory, names, edges, legs)


def relabel(g: FeynmanGraph, perm: Sequence[int]) -> FeynmanGraph:
    """Move vertex ``v`` to position ``perm[v]``."""
    names = [""] * len(perm)
    for v, p in enumerate(perm):
        names[p] = g.vertices[v]
    return FeynmanGraph(
        g.theory,
        names,
        [(perm[a], perm[b], e) for a, b, e in g.edges],
        [(perm[v], e, pol, port) for v, e, pol, port in g.legs],
    )


def corolla(theory: TheorySpec, vertex: str) -> FeynmanGraph:
    legs = theory.vertex(vertex).legs
    return FeynmanGraph(theory, [vertex], [], [(0, e, pol, i) for i, (e, pol) in enumerate(legs)])


def empty_graph(theory: TheorySpec) -> FeynmanGraph:
    return FeynmanGraph(theory, [], [], [])


# invariants


def residue(g: FeynmanGraph) -> Amplitude:
    if not g.is_connected:
        raise GraphError("residue is defined for connected graphs only")
    return g.theory.classify_legs(g.leg_slots())


def loop_number(g: FeynmanGraph) -> int:
    return len(g.edges) - len(g.vertices) + len(g.components)


def is_one_pi(g: FeynmanGraph) -> bool:
    if not g.is_connected:
        return False
    # bridge search; parallel edges are distinct so a multi-edge is never a bridge
    adj: list[list[tuple[int, int]]] = [[] for _ in g.vertices]
    for i, (a, b, _) in enumerate(g.edges):
        if a != b:
            adj[a].append((b, i))
            adj[b].append((a, i))
    if not adj:
        return True
    disc = [-1] * len(adj)
    low = [0] * len(adj)
    disc[0] = low[0] = 0
    clock = 1
    stack = [(0, -1, iter(adj[0]))]
    while stack:
        v, via, it = stack[-1]
        for u, i in it:
            if i == via:
                continue
            if disc[u] < 0:
                disc[u] = low[u] = clock
                clock += 1
                stack.append((u, i, iter(adj[u])))
                break
            low[v] = min(low[v], disc[u])
        else:
            stack.pop()
            if stack:
                p = stack[-1][0]
                low[p] = min(low[p], low[v])
                if low[v] > disc[p]:
                    return False
    return True


class GradingKind(Enum):
    LOOP = "loop"
    RESIDUE = "residue"
    COUPLING = "coupling"


@dataclass(frozen=True)
class GradingVector:
    kind: GradingKind
    coords: tuple[int, ...]

    def __add__(self, other: "GradingVector") -> "GradingVector":
        if self.kind is not other.kind:
            raise ValueError("grading kinds differ")
        return GradingVector(self.kind, tuple(a + b for a, b in zip(self.coords, other.coords)))


def residue_grading(g: FeynmanGraph) -> tuple[int, ...]:
    theory = g.theory
    r = [0] * len(theory.vertices)
    for name in g.vertices:
        r[theory.vertex_index(name)] += 1
    for comp in g.components:
        amp = residue(comp)
        if amp.kind is AmplitudeKind.VERTEX:
            r[theory.vertex_index(amp.name)] -= 1
    return tuple(r)


def theta_of(theory: TheorySpec, rvec: Sequence[int]) -> tuple[int, ...]:
    out = [0] * len(theory.couplings)
    for i, k in enumerate(rvec):
        if k:
            for j, x in enumerate(theory.theta(theory.vertices[i].name)):
                out[j] += k * x
    return tuple(out)


def gradings(g: FeynmanGraph) -> tuple[GradingVector, GradingVector, GradingVector]:
    r = residue_grading(g)
    return (
        GradingVector(GradingKind.LOOP, (loop_number(g),)),
        GradingVector(GradingKind.RESIDUE, r),
        GradingVector(GradingKind.COUPLING, theta_of(g.theory, r)),
    )


# symmetry factors


def _edge_symmetry(g: FeynmanGraph) -> int:
    out = 1
    for (a, b, e), k in Counter(g.edges).items():
        out *= math.factorial(k)
        if a == b and not g.theory.edge(e).oriented:
            out *= 2 ** k
    return out


def _pinned(g: FeynmanGraph) -> FeynmanGraph:
    ports = [p for *_, p in g.legs]
    return g if None not in ports and len(set(ports)) == len(ports) else g.with_ports()


def _connected_symmetry(g: FeynmanGraph) -> int:
    return _pinned(g)._canon[1] * _edge_symmetry(g)


def symmetry_factor(g: FeynmanGraph) -> int:
    """Automorphisms fixing every external leg; products pick up k! per k identical components."""
    return monomial_symmetry(g.components)


def monomial_symmetry(graphs: Iterable[FeynmanGraph]) -> int:
    """Symmetry factor of a product of connected graphs."""
    graphs = list(graphs)
    out = 1
    for c in graphs:
        out *= _connected_symmetry(c)
    for k in Counter(c.key for c in graphs).values():
        out *= math.factorial(k)
    return out


def free_automorphisms(g: FeynmanGraph) -> int:
    """Automorphisms of a connected graph that may permute its external legs."""
    legs = Counter((v, e, pol) for v, e, pol, _ in g.legs)
    out = g.without_ports()._canon_free[1] * _edge_symmetry(g)
    for k in legs.values():
        out *= math.factorial(k)
    return out


def leg_type_factorial(g: FeynmanGraph) -> int:
    out = 1
    for k in Counter(g.leg_slots()).values():
        out *= math.factorial(k)
    return out


def labelings(g: FeynmanGraph) -> int:
    """Number of pairwise non-isomorphic port assignments of a connected shape."""
    return leg_type_factorial(g) * _connected_symmetry(g) // free_automorphisms(g)


def leg_image_order(g: FeynmanGraph) -> int:
    """Order of the permutation group the automorphisms induce on the legs."""
    return free_automorphisms(g) // _connected_symmetry(g)


def green_weight(g: FeynmanGraph) -> Fraction:
    """Sum of 1/Sym over all port assignments of a connected shape."""
    return Fraction(leg_type_factorial(g), free_automorphisms(g))


# power counting


class Sdd(NamedTuple):
    by_definition: int
    by_corollas: int
    by_residue_grading: int


def sigma_coefficients(theory: TheorySpec) -> tuple[Fraction, ...]:
    d = theory.dimension
    return tuple(d * (Fraction(v.valence, 2) - 1) + corolla_weight(theory, v.name) for v in theory.vertices)


def sigma(theory: TheorySpec, rvec: Sequence[int]) -> Fraction:
    return sum((c * k for c, k in zip(sigma_coefficients(theory), rvec)), Fraction(0))


def rho(theory: TheorySpec, amp: Amplitude) -> Fraction:
    if amp.kind is AmplitudeKind.VERTEX:
        return Fraction(theory.vertex(amp.name).weight)
    d = theory.dimension
    return d * (1 - Fraction(len(amp.legs), 2)) - Fraction(sum(theory.edge(e).weight for e, _ in amp.legs), 2)


def omega(g: FeynmanGraph) -> int:
    """Superficial degree of divergence (direct definition)."""
    theory = g.theory
    return (theory.dimension * loop_number(g)
            + sum(theory.vertex(v).weight for v in g.vertices)
            + sum(theory.edge(e).weight for _, _, e in g.edges))


def _as_int(q: Fraction) -> int:
    if q.denominator != 1:
        raise ArithmeticError(f"non-integral degree {q}")
    return int(q)


def sdd(g: FeynmanGraph) -> Sdd:
    if g.is_empty:
        return Sdd(0, 0, 0)
    theory = g.theory
    d = theory.dimension
    loops = loop_number(g)
    corollas = (d * loops + sum(corolla_weight(theory, v) for v in g.vertices)
                - Fraction(sum(theory.edge(e).weight for _, e, _, _ in g.legs), 2))
    if not g.is_connected:
        raise GraphError("the corolla and residue-grading formulas need a connected graph")
    graded = rho(theory, residue(g)) + sigma(theory, residue_grading(g))
    return Sdd(omega(g), _as_int(corollas), _as_int(graded))


def ssdd_split(g: FeynmanGraph) -> tuple[Fraction, Fraction, Fraction]:
    """Contributions to sigma(resgrd) from non-, strictly, and super-renormalizable corollas."""
    theory = g.theory
    parts = {c: Fraction(0) for c in CorollaClass}
    for v, c, k in zip(theory.vertices, sigma_coefficients(theory), residue_grading(g)):
        parts[classify_corolla(theory, v.name)] += c * k
    return (parts[CorollaClass.NON_RENORMALIZABLE], parts[CorollaClass.RENORMALIZABLE],
            parts[CorollaClass.SUPER_RENORMALIZABLE])


# interchange format


def dump_graph(g: FeynmanGraph) -> str:
    lines = [f"theory={g.theory.name}"]
    lines += [f"v {i} {name}" for i, name in enumerate(g.vertices)]
    lines += [f"e {a} {b} {e}" for a, b, e in g.edges]
    for v, e, pol, port in g.legs:
        lines.append(f"x {v} {slot_str((e, pol))}" + ("" if port is None else f" {port}"))
    return "\n".join(lines) + "\n"


def parse_graph(text: str, theory: TheorySpec) -> FeynmanGraph:
    names: dict[int, str] = {}
    edges, legs = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("theory="):
            if line[7:] != theory.name:
                raise GraphError(f"line {lineno}: graph belongs to theory {line[7:]!r}")
            continue
        parts = line.split()
        try:
            if parts[0] == "v" and len(parts) == 3:
                names[int(parts[1])] = parts[2]
            elif parts[0] == "e" and len(parts) == 4:
                edges.append((int(parts[1]), int(parts[2]), parts[3]))
            elif parts[0] == "x" and len(parts) in (3, 4):
                e, pol = parse_slot(parts[2])
                legs.append((int(parts[1]), e, pol, int(parts[3]) if len(parts) == 4 else None))
            else:
                raise ValueError(line)
        except (ValueError, IndexError):
            raise GraphError(f"line {lineno}: cannot parse {raw!r}") from None
    if sorted(names) != list(range(len(names))):
        raise GraphError("vertex ids must be 0..n-1")
    return FeynmanGraph(theory, [names[i] for i in range(len(names))], edges, legs)
