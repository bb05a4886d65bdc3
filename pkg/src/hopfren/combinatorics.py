"""Graph enumeration, divergent subgraphs, contraction and insertion counting.

Shapes (unlabeled graphs) are generated by saturating the half-edges of a
multiset of vertices one vertex at a time.  Labeled graphs carry port tags
``0..E-1`` on their legs, where port ``i`` has the slot type
``amplitude.legs[i]``.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

from .graph import (
    FeynmanGraph,
    GraphError,
    decode_key,
    is_one_pi,
    labelings,
    monomial_symmetry,
    omega,
    residue,
    residue_grading,
    symmetry_factor,
)
from .theory import Amplitude, AmplitudeKind, Slot, TheorySpec

DEFAULT_MAX_GRAPHS = 10**6


class ResourceCapError(RuntimeError):
    def __init__(self, message: str, limit: int):
        super().__init__(message)
        self.limit = limit


class IllDefinedError(ValueError):
    """A divergent subgraph has a residue outside the theory's residue set."""

    def __init__(self, graph: FeynmanGraph, amplitude: Amplitude):
        super().__init__(f"divergent subgraph with amplitude {amplitude.label} inside {graph.key}")
        self.graph = graph
        self.amplitude = amplitude


class CheckResult(NamedTuple):
    ok: bool
    witnesses: list


# enumeration

_cache_dir: Path | None = None


_max_graphs = DEFAULT_MAX_GRAPHS


def set_max_graphs(limit: int | None) -> None:
    """Process-wide default for the per-call graph limit (None restores the default)."""
    global _max_graphs
    _max_graphs = DEFAULT_MAX_GRAPHS if limit is None else limit


def set_cache_dir(path: str | Path | None) -> None:
    """Store enumeration results as JSON under ``path`` (None disables)."""
    global _cache_dir
    _cache_dir = None if path is None else Path(path)


def _active_cache_dir() -> Path | None:
    if _cache_dir is not None:
        return _cache_dir
    env = os.environ.get("HOPFREN_CACHE")
    return Path(env) if env else None


def enumerate_shapes(
    theory: TheorySpec,
    amp: "Amplitude | str",
    loops: int,
    max_bivalent: int | None = None,
    max_graphs: int | None = None,
) -> tuple[FeynmanGraph, ...]:
    """All connected 1PI shapes with the given external legs and loop number, sorted by key.

    Two-valent vertices are limited to ``max_bivalent`` per graph (default
    ``loops``), since they can otherwise be inserted without bound.
    """
    amp = theory.amplitude(amp)
    if loops < 0:
        raise ValueError("loops must be >= 0")
    if max_bivalent is None:
        max_bivalent = loops
    if max_graphs is None:
        max_graphs = _max_graphs
    return _shapes(theory, amp.legs, loops, max_bivalent, max_graphs)


@lru_cache(maxsize=None)
def _shapes(theory: TheorySpec, legs: tuple[Slot, ...], loops: int, max_bivalent: int,
            max_graphs: int) -> tuple[FeynmanGraph, ...]:
    amp = theory.classify_legs(legs)
    if loops == 0:
        if amp.kind is AmplitudeKind.VERTEX:
            return (FeynmanGraph(theory, [amp.name], [], [(0, e, p, None) for e, p in legs]),)
        return ()
    cache = _active_cache_dir()
    path = None
    if cache is not None:
        tag = "_".join(f"{e}{p:+d}" for e, p in legs)
        path = cache / f"{theory.digest()[:16]}-{tag}-L{loops}-b{max_bivalent}.json"
        if path.exists():
            keys = json.loads(path.read_text())
            if len(keys) > max_graphs:
                raise ResourceCapError(
                    f"more than {max_graphs} graphs for {amp.label} at {loops} loops", max_graphs)
            return tuple(decode_key(theory, k) for k in keys)
    found: dict[str, FeynmanGraph] = {}
    rejected: set[str] = set()
    for g in _generate(theory, legs, loops, max_bivalent):
        if not theory.tadpoles and any(a == b for a, b, _ in g.edges):
            continue
        key = g.key
        if key in found or key in rejected:
            continue
        if not is_one_pi(g):
            rejected.add(key)
            continue
        found[key] = g
        if len(found) > max_graphs:
            raise ResourceCapError(
                f"more than {max_graphs} graphs for {amp.label} at {loops} loops", max_graphs)
    out = tuple(found[k] for k in sorted(found))
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps([g.key for g in out]))
    return out


def _vertex_counts(theory: TheorySpec, target: int, max_bivalent: int) -> Iterator[dict[str, int]]:
    types = [v for v in theory.vertices if v.valence >= 2]
    acc: dict[str, int] = {}

    def rec(i: int, remaining: int, biv: int) -> Iterator[dict[str, int]]:
        if i == len(types):
            if remaining == 0:
                yield dict(acc)
            return
        w = types[i].valence - 2
        hi = max_bivalent - biv if w == 0 else remaining // w
        for c in range(hi + 1):
            acc[types[i].name] = c
            yield from rec(i + 1, remaining - c * w, biv + (c if w == 0 else 0))
        del acc[types[i].name]

    yield from rec(0, target, 0)


def _generate(theory: TheorySpec, legs: tuple[Slot, ...], loops: int, max_bivalent: int) -> Iterator[FeynmanGraph]:
    leg_count = Counter(legs)
    leg_types = sorted(leg_count)
    target = 2 * loops - 2 + len(legs)
    for counts in _vertex_counts(theory, target, max_bivalent):
        names = [v.name for v in theory.vertices for _ in range(counts.get(v.name, 0))]
        if not names:
            continue
        slots = Counter()
        for n in names:
            slots.update(theory.vertex(n).legs)
        if not _balanced(theory, slots, leg_count):
            continue
        for vectors in _distribute_legs(theory, names, leg_types, leg_count):
            yield from _fill(theory, names, leg_types, vectors)


def _balanced(theory: TheorySpec, slots: Counter, legs: Counter) -> bool:
    for e in theory.edges:
        if e.oriented:
            out = slots[(e.name, 1)] - legs[(e.name, 1)]
            inn = slots[(e.name, -1)] - legs[(e.name, -1)]
            if out < 0 or inn < 0 or out != inn:
                return False
        else:
            free = slots[(e.name, 0)] - legs[(e.name, 0)]
            if free < 0 or free % 2:
                return False
    return all(slots[t] >= k for t, k in legs.items())


def _distribute_legs(theory: TheorySpec, names: list[str], leg_types: list[Slot],
                     leg_count: Counter) -> Iterator[list[tuple[int, ...]]]:
    """Leg-type vectors per vertex, non-increasing within each run of equal residues."""
    n = len(names)
    caps = [tuple(Counter(theory.vertex(v).legs)[t] for t in leg_types) for v in names]
    valence = [theory.vertex(v).valence for v in names]
    total = tuple(leg_count[t] for t in leg_types)
    suffix = [tuple(0 for _ in leg_types)] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = tuple(a + b for a, b in zip(suffix[i + 1], caps[i]))
    out: list[tuple[int, ...]] = []

    def rec(i: int, remaining: tuple[int, ...]) -> Iterator[list[tuple[int, ...]]]:
        if i == n:
            if not any(remaining):
                yield list(out)
            return
        if any(r > s for r, s in zip(remaining, suffix[i])):
            return
        ranges = [range(min(c, r) + 1) for c, r in zip(caps[i], remaining)]
        for x in itertools.product(*ranges):
            if i > 0 and names[i - 1] == names[i] and x > out[-1]:
                continue
            if n > 1 and valence[i] - sum(x) < 2:
                continue
            out.append(x)
            yield from rec(i + 1, tuple(r - k for r, k in zip(remaining, x)))
            out.pop()

    yield from rec(0, total)


def _fill(theory: TheorySpec, names: list[str], leg_types: list[Slot],
          vectors: list[tuple[int, ...]]) -> Iterator[FeynmanGraph]:
    n = len(names)
    rem: list[Counter] = []
    for name, vec in zip(names, vectors):
        c = Counter(theory.vertex(name).legs)
        for t, k in zip(leg_types, vec):
            c[t] -= k
        rem.append(c)
    cls = [(name, vec) for name, vec in zip(names, vectors)]
    # (slot used at i, slot used at j, edge name, direction of i -> j)
    desc: list[tuple[Slot, Slot, str, int]] = []
    for e in theory.edges:
        if e.oriented:
            desc.append(((e.name, 1), (e.name, -1), e.name, 1))
            desc.append(((e.name, -1), (e.name, 1), e.name, -1))
        else:
            desc.append(((e.name, 0), (e.name, 0), e.name, 0))
    touched = [False] * n
    edges: list[tuple[int, int, str]] = []
    legs = [(v, e, p, None) for v, vec in enumerate(vectors) for (e, p), k in zip(leg_types, vec) for _ in range(k)]

    def doomed() -> bool:
        """True when the partial graph can no longer complete to a connected 1PI graph.

        That happens once a component has no open slots while others remain, or
        a bridge has only completed vertices on one side.
        """
        is_open = [any(c.values()) for c in rem]
        adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for idx, (a, b, _) in enumerate(edges):
            if a != b:
                adj[a].append((b, idx))
                adj[b].append((a, idx))
        disc = [-1] * n
        low = [0] * n
        sub = [0] * n
        clock = 0
        comps = 0
        closed = False
        for r in range(n):
            if disc[r] >= 0:
                continue
            comps += 1
            disc[r] = low[r] = clock
            clock += 1
            sub[r] = is_open[r]
            cut: list[int] = []
            stack = [(r, -1, iter(adj[r]))]
            while stack:
                v, via, it = stack[-1]
                for u, idx in it:
                    if idx == via:
                        continue
                    if disc[u] < 0:
                        disc[u] = low[u] = clock
                        clock += 1
                        sub[u] = is_open[u]
                        stack.append((u, idx, iter(adj[u])))
                        break
                    low[v] = min(low[v], disc[u])
                else:
                    stack.pop()
                    if stack:
                        p = stack[-1][0]
                        low[p] = min(low[p], low[v])
                        sub[p] += sub[v]
                        if low[v] > disc[p]:
                            cut.append(sub[v])
            if any(k == 0 or k == sub[r] for k in cut):
                return True
            closed = closed or sub[r] == 0
        return closed and comps > 1

    def self_loop_choices(i: int) -> Iterator[tuple[dict[str, int], list[int]]]:
        per_edge = []
        for e in theory.edges:
            if e.oriented:
                per_edge.append(range(min(rem[i][(e.name, 1)], rem[i][(e.name, -1)]) + 1))
            else:
                per_edge.append(range(rem[i][(e.name, 0)] // 2 + 1))
        for choice in itertools.product(*per_edge):
            loops = {e.name: s for e, s in zip(theory.edges, choice)}
            need = []
            for slot_i, _, ename, direction in desc:
                used = loops[ename] if direction else 2 * loops[ename]
                need.append(rem[i][slot_i] - used)
            yield loops, need

    def bundles(i: int, need: list[int]) -> Iterator[list[tuple[int, tuple[int, ...]]]]:
        caps_after = [[0] * len(desc) for _ in range(n + 1)]
        for j in range(n - 1, i, -1):
            caps_after[j] = [caps_after[j + 1][d] + rem[j][desc[d][1]] for d in range(len(desc))]
        chosen: list[tuple[int, tuple[int, ...]]] = []
        prev: dict[int, tuple[int, ...]] = {}

        def rec(j: int, left: list[int]) -> Iterator[list[tuple[int, tuple[int, ...]]]]:
            if j == n:
                if not any(left):
                    yield list(chosen)
                return
            if any(l > c for l, c in zip(left, caps_after[j])):
                return
            ranges = [range(min(left[d], rem[j][desc[d][1]]) + 1) for d in range(len(desc))]
            sym = j - 1 > i and cls[j] == cls[j - 1] and not touched[j] and not touched[j - 1]
            for b in itertools.product(*ranges):
                if sym and b > prev[j - 1]:
                    continue
                prev[j] = b
                if any(b):
                    chosen.append((j, b))
                yield from rec(j + 1, [l - k for l, k in zip(left, b)])
                if any(b):
                    chosen.pop()

        yield from rec(i + 1, need)

    def rec(i: int) -> Iterator[FeynmanGraph]:
        if i == n:
            yield FeynmanGraph(theory, names, edges, legs, validate=False)
            return
        saved_i = Counter(rem[i])
        saved_touched = list(touched)
        base = len(edges)
        for loops, need in self_loop_choices(i):
            for bundle in bundles(i, need):
                undo: list[tuple[int, Slot, int]] = []
                for e in theory.edges:
                    edges.extend([(i, i, e.name)] * loops[e.name])
                for j, b in bundle:
                    touched[j] = True
                    for d, k in enumerate(b):
                        if not k:
                            continue
                        used_j = desc[d][1]
                        rem[j][used_j] -= k
                        undo.append((j, used_j, k))
                        ename, direction = desc[d][2], desc[d][3]
                        edges.extend([(j, i, ename) if direction < 0 else (i, j, ename)] * k)
                for key in list(rem[i]):
                    rem[i][key] = 0
                touched[i] = True
                if not doomed():
                    yield from rec(i + 1)
                del edges[base:]
                for j, slot, k in undo:
                    rem[j][slot] += k
                rem[i] = Counter(saved_i)
                touched[:] = saved_touched

    yield from rec(0)


def port_labelings(shape: FeynmanGraph) -> list[FeynmanGraph]:
    """Pairwise non-isomorphic port assignments of a connected shape.

    Port ``i`` is given to a leg whose slot type is the ``i``-th smallest.
    """
    order = sorted(range(len(shape.legs)), key=lambda i: (shape.legs[i][1], shape.legs[i][2]))
    types = [(shape.legs[i][1], shape.legs[i][2]) for i in order]
    groups: dict[Slot, list[int]] = {}
    for pos, t in enumerate(types):
        groups.setdefault(t, []).append(pos)
    seen: dict[str, FeynmanGraph] = {}
    keys = sorted(groups)
    for perms in itertools.product(*(itertools.permutations(groups[t]) for t in keys)):
        ports = [0] * len(order)
        for t, perm in zip(keys, perms):
            for pos, port in zip(groups[t], perm):
                ports[order[pos]] = port
        g = FeynmanGraph(shape.theory, shape.vertices, shape.edges,
                         [(v, e, p, q) for (v, e, p, _), q in zip(shape.legs, ports)], validate=False)
        seen.setdefault(g.labeled_key, g)
    return [seen[k] for k in sorted(seen)]


def enumerate_1pi(
    theory: TheorySpec,
    residue: "Amplitude | str",
    loops: int,
    max_bivalent: int | None = None,
    max_graphs: int | None = None,
) -> list[FeynmanGraph]:
    """All 1PI graphs with pinned external legs; at loop 0 the corolla of a vertex residue."""
    if max_graphs is None:
        max_graphs = _max_graphs
    out = []
    for shape in enumerate_shapes(theory, residue, loops, max_bivalent, max_graphs):
        out.extend(port_labelings(shape))
    if len(out) > max_graphs:
        raise ResourceCapError(f"more than {max_graphs} labeled graphs", max_graphs)
    return out


def generator_corpus(theory: TheorySpec, cap: int, max_legs: int | None = None) -> list[FeynmanGraph]:
    """Every 1PI shape of every amplitude with 1 to ``cap`` loops."""
    from .theory import amplitude_set

    out = []
    for amp in amplitude_set(theory, cap, max_legs):
        for loops in range(1, cap + 1):
            out.extend(enumerate_shapes(theory, amp, loops))
    return out


# subgraphs


@dataclass(frozen=True)
class SubgraphSelection:
    """Vertex-disjoint divergent 1PI subgraphs of ``parent``, each given by its internal edges."""

    parent: FeynmanGraph
    components: tuple[frozenset[int], ...]

    @property
    def is_empty(self) -> bool:
        return not self.components

    @property
    def is_full(self) -> bool:
        return len(self.components) == 1 and len(self.components[0]) == len(self.parent.edges)

    @cached_property
    def graphs(self) -> tuple[FeynmanGraph, ...]:
        return tuple(subgraph(self.parent, c) for c in self.components)

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(sorted(g.key for g in self.graphs))


def _vertices_of(g: FeynmanGraph, edges: Iterable[int]) -> frozenset[int]:
    out = set()
    for i in edges:
        a, b, _ = g.edges[i]
        out.update((a, b))
    return frozenset(out)


def subgraph(g: FeynmanGraph, edges: Iterable[int]) -> FeynmanGraph:
    """The subgraph spanned by internal edges, with every other half-edge at its vertices as a leg."""
    edges = frozenset(edges)
    verts = sorted(_vertices_of(g, edges))
    index = {v: i for i, v in enumerate(verts)}
    atts = g.slot_attachments()
    legs = []
    for v in verts:
        for att in atts[v]:
            if att[0] == "e" and att[1] in edges:
                continue
            e, pol = att[-1]
            legs.append((index[v], e, pol, None))
    return FeynmanGraph(
        g.theory,
        [g.vertices[v] for v in verts],
        [(index[g.edges[i][0]], index[g.edges[i][1]], g.edges[i][2]) for i in sorted(edges)],
        legs,
        validate=False,
    )


def connected_edge_sets(g: FeynmanGraph) -> list[frozenset[int]]:
    """Every non-empty edge subset spanning a connected subgraph."""
    incident: dict[int, list[int]] = {}
    for i, (a, b, _) in enumerate(g.edges):
        incident.setdefault(a, []).append(i)
        incident.setdefault(b, []).append(i)
    seen: set[int] = set()
    stack = [1 << i for i in range(len(g.edges))]
    seen.update(stack)
    while stack:
        mask = stack.pop()
        verts = _vertices_of(g, _bits(mask))
        for v in verts:
            for i in incident[v]:
                m = mask | (1 << i)
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
    return sorted((frozenset(_bits(m)) for m in seen), key=lambda s: (len(s), sorted(s)))


def _bits(mask: int) -> list[int]:
    out, i = [], 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


class _Scan(NamedTuple):
    accepted: tuple[frozenset[int], ...]
    offending: tuple[tuple[frozenset[int], Amplitude], ...]


def _scan(g: FeynmanGraph) -> _Scan:
    # graph equality is up to isomorphism, while edge indices depend on the labeling
    return _scan_labeled((g.theory, g.vertices, g.edges, g.legs), g)


@lru_cache(maxsize=200_000)
def _scan_labeled(labeling: tuple, g: FeynmanGraph) -> _Scan:
    accepted, offending = [], []
    for edges in connected_edge_sets(g):
        if len(edges) - len(_vertices_of(g, edges)) + 1 < 1:
            continue
        h = subgraph(g, edges)
        if omega(h) < 0 or not is_one_pi(h):
            continue
        amp = residue(h)
        if amp.in_residues:
            accepted.append(edges)
        elif len(edges) < len(g.edges):
            offending.append((edges, amp))
    return _Scan(tuple(accepted), tuple(offending))


def offending_subgraphs(g: FeynmanGraph) -> list[tuple[frozenset[int], Amplitude]]:
    """Proper divergent 1PI subgraphs whose residue is not a residue of the theory."""
    return [item for c in g.components for item in _scan(c).offending] if not g.is_connected \
        else list(_scan(g).offending)


def divergent_subgraphs(g: FeynmanGraph) -> list[SubgraphSelection]:
    """All products of vertex-disjoint divergent 1PI subgraphs with residues in the theory, empty one first."""
    if g.is_empty:
        return [SubgraphSelection(g, ())]
    if not g.is_connected:
        raise GraphError("divergent_subgraphs expects a connected graph")
    cands = list(_scan(g).accepted)
    verts = [_vertices_of(g, c) for c in cands]
    out: list[SubgraphSelection] = []
    chosen: list[int] = []

    def rec(start: int, used: frozenset[int]) -> None:
        out.append(SubgraphSelection(g, tuple(sorted((cands[i] for i in chosen), key=sorted))))
        for i in range(start, len(cands)):
            if verts[i] & used:
                continue
            chosen.append(i)
            rec(i + 1, used | verts[i])
            chosen.pop()

    rec(0, frozenset())
    return out


def contract(g: FeynmanGraph, sel: "SubgraphSelection | Sequence[Iterable[int]]") -> FeynmanGraph | None:
    """Shrink each component to a vertex or, for propagator residues, to an edge; the full graph gives None (the unit)."""
    comps = sel.components if isinstance(sel, SubgraphSelection) else tuple(frozenset(c) for c in sel)
    if not comps:
        return g
    if len(comps) == 1 and len(comps[0]) == len(g.edges) and g.is_connected:
        return None
    theory = g.theory
    comp_of: dict[int, int] = {}
    amps = []
    for ci, c in enumerate(comps):
        amp = residue(subgraph(g, c))
        if not amp.in_residues:
            raise IllDefinedError(g, amp)
        amps.append(amp)
        for v in _vertices_of(g, c):
            if v in comp_of:
                raise GraphError("subgraph components share a vertex")
            comp_of[v] = ci
    inside = set().union(*comps)
    names: list[str] = []
    vid: dict[int, int] = {}
    comp_vid: dict[int, int] = {}
    for v in range(len(g.vertices)):
        ci = comp_of.get(v)
        if ci is None:
            vid[v] = len(names)
            names.append(g.vertices[v])
        elif amps[ci].kind is AmplitudeKind.VERTEX:
            if ci not in comp_vid:
                comp_vid[ci] = len(names)
                names.append(amps[ci].name)
            vid[v] = comp_vid[ci]
    atts = g.slot_attachments()
    partner: dict[tuple, tuple] = {}
    for ci, c in enumerate(comps):
        if amps[ci].kind is not AmplitudeKind.EDGE:
            continue
        ends = [att[:-1] for v in _vertices_of(g, c) for att in atts[v] if not (att[0] == "e" and att[1] in c)]
        assert len(ends) == 2
        partner[ends[0]], partner[ends[1]] = ends[1], ends[0]

    def end_slot(i: int, end: int) -> Slot:
        a, b, e = g.edges[i]
        if theory.edge(e).oriented:
            return (e, 1 if end == 0 else -1)
        return (e, 0)

    new_edges, new_legs = [], []
    visited: set[int] = set()

    def walk(i: int, end: int) -> tuple:
        while True:
            v = g.edges[i][end]
            if v in vid:
                return ("v", vid[v], end_slot(i, end))
            nxt = partner[("e", i, end)]
            if nxt[0] == "x":
                return ("x", nxt[1])
            i2, end2 = nxt[1], nxt[2]
            if i2 in visited:
                raise GraphError("contraction closes a vacuum loop")
            visited.add(i2)
            i, end = i2, 1 - end2

    for i, (a, b, e) in enumerate(g.edges):
        if i in inside or i in visited:
            continue
        visited.add(i)
        left, right = walk(i, 0), walk(i, 1)
        if left[0] == "v" and right[0] == "v":
            if left[2][1] == -1:
                left, right = right, left
            new_edges.append((left[1], right[1], e))
        elif left[0] == "x" and right[0] == "x":
            raise GraphError("contraction leaves a bare propagator")
        else:
            vert, leg = (left, right) if left[0] == "v" else (right, left)
            port = g.legs[leg[1]][3]
            new_legs.append((vert[1], vert[2][0], vert[2][1], port))
    for j, (v, e, pol, port) in enumerate(g.legs):
        if v in vid:
            new_legs.append((vid[v], e, pol, port))
    return FeynmanGraph(theory, names, new_edges, new_legs)


# insertion


@dataclass(frozen=True)
class InsertionCount:
    ins: int
    insaut: int
    insrr: int
    isoemb: int


def _as_graphs(gamma, theory: TheorySpec) -> list[FeynmanGraph]:
    if gamma is None:
        return []
    if isinstance(gamma, FeynmanGraph):
        return list(gamma.components)
    out = []
    for item in gamma:
        if isinstance(item, str):
            item = decode_key(theory, item)
        out.extend(item.components)
    return out


def _sorted_attachments(g: FeynmanGraph, x: int) -> list[tuple]:
    return sorted(g.slot_attachments()[x], key=lambda att: att[-1])


def _vertex_placements(target: FeynmanGraph, comps: list[tuple[int, FeynmanGraph, Amplitude]]) -> Iterator[dict[int, int]]:
    """Injective maps from vertex components to target vertices of the same residue."""
    chosen: dict[int, int] = {}
    used: set[int] = set()

    def rec(k: int) -> Iterator[dict[int, int]]:
        if k == len(comps):
            yield dict(chosen)
            return
        idx, _, amp = comps[k]
        for x, name in enumerate(target.vertices):
            if name == amp.name and x not in used:
                used.add(x)
                chosen[idx] = x
                yield from rec(k + 1)
                used.discard(x)
                del chosen[idx]

    yield from rec(0)


def _edge_placements(target: FeynmanGraph, comps: list[tuple[int, FeynmanGraph, Amplitude]]) -> Iterator[dict[int, list[int]]]:
    """Ordered sequences of propagator components on the target edges of matching type."""
    by_type: dict[str, list[int]] = {}
    for idx, _, amp in comps:
        by_type.setdefault(amp.name, []).append(idx)
    per_type = []
    for ename, idxs in sorted(by_type.items()):
        slots = [i for i, (_, _, e) in enumerate(target.edges) if e == ename]
        options = []
        if slots:
            for perm in itertools.permutations(idxs):
                for cuts in itertools.combinations_with_replacement(range(len(perm) + 1), len(slots) - 1):
                    bounds = (0,) + cuts + (len(perm),)
                    options.append({s: list(perm[bounds[k]:bounds[k + 1]]) for k, s in enumerate(slots)})
        per_type.append(options)
    for combo in itertools.product(*per_type):
        merged: dict[int, list[int]] = {}
        for part in combo:
            merged.update({s: seq for s, seq in part.items() if seq})
        yield merged


def _insert(target: FeynmanGraph, vertex_fill: dict[int, FeynmanGraph],
            edge_fill: dict[int, list[FeynmanGraph]]) -> FeynmanGraph | None:
    """Glue labeled components into target; port ``k`` of a vertex component meets the
    ``k``-th attachment (by slot type), port 0 of a propagator faces the first endpoint."""
    theory = target.theory
    names: list[str] = []
    edges: list[tuple[int, int, str]] = []
    vid: dict[int, int] = {}
    for x, name in enumerate(target.vertices):
        if x not in vertex_fill:
            vid[x] = len(names)
            names.append(name)
    endpoint: dict[tuple, int] = {}

    def paste(h: FeynmanGraph) -> int:
        off = len(names)
        names.extend(h.vertices)
        edges.extend((a + off, b + off, e) for a, b, e in h.edges)
        return off

    for x in sorted(vertex_fill):
        h = vertex_fill[x]
        off = paste(h)
        by_port = {port: v for v, _, _, port in h.legs}
        for k, att in enumerate(_sorted_attachments(target, x)):
            endpoint[att[:-1]] = off + by_port[k]
    for i, (a, b, e) in enumerate(target.edges):
        u = endpoint.get(("e", i, 0), vid.get(a))
        w = endpoint.get(("e", i, 1), vid.get(b))
        oriented = theory.edge(e).oriented
        for h in edge_fill.get(i, ()):
            off = paste(h)
            by_port = {port: (v, pol) for v, _, pol, port in h.legs}
            (v0, p0), (v1, p1) = by_port[0], by_port[1]
            if oriented and (p0, p1) != (-1, 1):
                return None
            edges.append((u, off + v0, e))
            u = off + v1
        edges.append((u, w, e))
    legs = []
    for j, (v, e, pol, port) in enumerate(target.legs):
        legs.append((endpoint.get(("x", j), vid.get(v)), e, pol, port))
    return FeynmanGraph(theory, names, edges, legs)


def _rising(m: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= m + i
    return out


def residue_data(theory: TheorySpec, amp: Amplitude, rvec: Sequence[int]) -> tuple[Counter, dict[str, int]]:
    """Vertex counts per residue and internal edge counts per type of any graph with this residue and grading."""
    counts = Counter({v.name: k for v, k in zip(theory.vertices, rvec)})
    if amp.kind is AmplitudeKind.VERTEX:
        counts[amp.name] += 1
    slots: Counter = Counter()
    for name, k in counts.items():
        for s in theory.vertex(name).legs:
            slots[s] += k
    legs = Counter(amp.legs)
    edges = {}
    for e in theory.edges:
        if e.oriented:
            edges[e.name] = slots[(e.name, 1)] - legs[(e.name, 1)]
        else:
            edges[e.name] = (slots[(e.name, 0)] - legs[(e.name, 0)]) // 2
    return counts, edges


def insrr_count(theory: TheorySpec, amp: Amplitude, rvec: Sequence[int], kinds: Sequence[Amplitude], labs: int) -> int:
    """Insertion count from residue data: ordered vertex choices times rising factorials per edge type."""
    if any(not a.in_residues for a in kinds):
        return 0
    counts, edges = residue_data(theory, amp, rvec)
    out = labs
    for name, k in Counter(a.name for a in kinds if a.kind is AmplitudeKind.VERTEX).items():
        out *= math.perm(counts[name], k) if counts[name] >= k else 0
    for name, k in Counter(a.name for a in kinds if a.kind is AmplitudeKind.EDGE).items():
        out *= _rising(max(edges[name], 0), k)
    return out


def _isoemb(gamma_keys: list[str], target: FeynmanGraph | None, result: FeynmanGraph | None) -> int:
    """Selections in ``result`` with the shapes of ``gamma`` whose quotient is isomorphic to ``target``."""
    if not gamma_keys:
        return 1
    if result is None:
        return 0
    want = Counter(gamma_keys)
    quotient = None if target is None else target.labeled_key
    count = 0
    for sel in divergent_subgraphs(result):
        if Counter(sel.keys) != want:
            continue
        c = contract(result, sel)
        if (None if c is None else c.labeled_key) == quotient:
            count += 1
    return count


def insertion_counts(gamma, target: FeynmanGraph | None, result: FeynmanGraph | None = None) -> InsertionCount:
    """Insertion factors of a product of 1PI graphs into ``target``.

    Components are treated as distinguishable and several propagator
    components on one edge are placed in order.  ``ins`` counts distinct
    gluings, ``insaut`` those isomorphic (with ports) to ``result``, ``insrr``
    evaluates the same count from the residue and residue grading of
    ``target`` alone, and ``isoemb`` counts selections of divergent subgraphs
    of ``result`` with the shapes of ``gamma`` whose quotient is ``target``.
    """
    theory = (target or result).theory if (target or result) is not None else None
    comps = _as_graphs(gamma, theory) if theory is not None else _as_graphs(gamma, None)
    if not comps:
        same = result is None or target is None or result.labeled_key == target.labeled_key
        return InsertionCount(1, 1 if same else 0, 1, 1)
    keys = [c.key for c in comps]
    iso = _isoemb(keys, target, result)
    if target is None:
        single = 1 if len(comps) == 1 else 0
        aut = single if result is None or (single and comps[0].key == result.key) else 0
        return InsertionCount(single, aut, single, iso)
    amps = [residue(c) for c in comps]
    if any(not a.in_residues for a in amps):
        return InsertionCount(0, 0, 0, iso)
    labs = math.prod(labelings(c) for c in comps)
    vcomps = [(k, c, a) for k, (c, a) in enumerate(zip(comps, amps)) if a.kind is AmplitudeKind.VERTEX]
    ecomps = [(k, c, a) for k, (c, a) in enumerate(zip(comps, amps)) if a.kind is AmplitudeKind.EDGE]
    vplaces = list(_vertex_placements(target, vcomps))
    eplaces = list(_edge_placements(target, ecomps)) if ecomps else [{}]
    ins = len(vplaces) * len(eplaces) * labs
    insrr = insrr_count(target.theory, residue(target), residue_grading(target), amps, labs)
    insaut = 0
    if result is not None and ins:
        want = result.labeled_key
        reps = [port_labelings(c.without_ports()) for c in comps]
        for vp in vplaces:
            for ep in eplaces:
                for choice in itertools.product(*reps):
                    vertex_fill = {x: choice[k] for k, x in vp.items()}
                    edge_fill = {i: [choice[k] for k in seq] for i, seq in ep.items()}
                    g = _insert(target, vertex_fill, edge_fill)
                    if g is not None and g.labeled_key == want:
                        insaut += 1
    return InsertionCount(ins, insaut, insrr, iso)


def verify_lemma12(g: FeynmanGraph) -> CheckResult:
    """Check 1/Sym(g) = insaut/isoemb / (Sym(gamma) Sym(g/gamma)) for every divergent selection."""
    if g.is_connected and not g.has_ports:
        g = g.with_ports()
    lhs = Fraction(1, symmetry_factor(g))
    failures = []
    for sel in divergent_subgraphs(g):
        cograph = contract(g, sel)
        counts = insertion_counts(list(sel.graphs), cograph, g)
        sym_gamma = monomial_symmetry(sel.graphs)
        sym_co = 1 if cograph is None else symmetry_factor(cograph)
        if counts.isoemb == 0:
            failures.append((g, sel, "no embedding"))
            continue
        rhs = Fraction(counts.insaut, counts.isoemb) / (sym_gamma * sym_co)
        if rhs != lhs:
            failures.append((g, sel, f"{lhs} != {rhs}"))
    return CheckResult(not failures, failures)


def cograph_scan(theory: TheorySpec, graphs: Iterable[FeynmanGraph]) -> CheckResult:
    """Contract every proper divergent selection of every divergent graph and collect convergent cographs.

    Works on contractions directly, so it also runs where the coproduct is
    ill-defined; offending subgraphs are skipped.
    """
    witnesses = []
    for g in graphs:
        if omega(g) < 0:
            continue
        for sel in divergent_subgraphs(g):
            if sel.is_empty or sel.is_full:
                continue
            co = contract(g, sel)
            if co is not None and omega(co) < 0:
                witnesses.append((g.key, sel.keys, co.key, omega(co)))
    return CheckResult(not witnesses, witnesses)
