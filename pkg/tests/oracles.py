"""Brute-force reference implementations, independent of the package internals.

Graphs are plain tuples ``(names, edges, legs)``: vertex residue names, a list
of unordered vertex pairs, and the number of external legs per vertex.  Only
theories with a single unoriented edge type are supported, which covers every
bundled fixture.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from fractions import Fraction

import networkx as nx

from hopfren.graph import FeynmanGraph


def edge_type(theory) -> str:
    assert len(theory.edges) == 1 and not theory.edges[0].oriented
    return theory.edges[0].name


def from_graph(g: FeynmanGraph) -> tuple:
    legs = [0] * len(g.vertices)
    for v, *_ in g.legs:
        legs[v] += 1
    return tuple(g.vertices), [(a, b) for a, b, _ in g.edges], tuple(legs)


def to_graph(theory, og: tuple) -> FeynmanGraph:
    e = edge_type(theory)
    names, edges, legs = og
    return FeynmanGraph(theory, names, [(a, b, e) for a, b in edges],
                        [(v, e, 0, None) for v, k in enumerate(legs) for _ in range(k)])


# connectivity


def _connected(n: int, edges) -> bool:
    if n == 0:
        return True
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    return len({find(v) for v in range(n)}) == 1


def is_1pi(n: int, edges) -> bool:
    if not _connected(n, edges):
        return False
    return all(_connected(n, edges[:i] + edges[i + 1:]) for i in range(len(edges)))


def loops(og: tuple) -> int:
    names, edges, _ = og
    return len(edges) - len(names) + 1


# automorphisms


def automorphisms(og: tuple) -> int:
    """Half-edge automorphisms fixing every external leg, by trying all vertex permutations."""
    names, edges, legs = og
    n = len(names)
    mult = Counter(tuple(sorted(e)) for e in edges)
    # vertices carrying legs are fixed, so only the others move
    free = [v for v in range(n) if not legs[v]]
    count = 0
    for image in itertools.permutations(free):
        perm = list(range(n))
        for v, w in zip(free, image):
            perm[v] = w
        if any(names[perm[v]] != names[v] for v in free):
            continue
        if all(mult.get(tuple(sorted((perm[a], perm[b]))), 0) == k for (a, b), k in mult.items()):
            count += 1
    for (a, b), k in mult.items():
        count *= math.factorial(k) * (2 ** k if a == b else 1)
    return count


# isomorphism classes


def _nx(og: tuple) -> nx.Graph:
    names, edges, legs = og
    h = nx.Graph()
    for v, (name, k) in enumerate(zip(names, legs)):
        h.add_node(v, tag=(name, k, sum(1 for a, b in edges if a == b == v)))
    for (a, b), k in Counter(tuple(sorted(e)) for e in edges if e[0] != e[1]).items():
        h.add_edge(a, b, mult=k)
    return h


def isomorphic(x: tuple, y: tuple) -> bool:
    return nx.is_isomorphic(_nx(x), _nx(y), node_match=lambda p, q: p["tag"] == q["tag"],
                            edge_match=lambda p, q: p["mult"] == q["mult"])


def _invariant(og: tuple) -> tuple:
    names, edges, legs = og
    deg = Counter()
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    return tuple(sorted((names[v], legs[v], deg[v]) for v in range(len(names)))), \
        tuple(sorted(Counter(tuple(sorted(e)) for e in edges).values()))


def iso_classes(graphs) -> list[tuple]:
    buckets: dict[tuple, list[tuple]] = defaultdict(list)
    for og in graphs:
        bucket = buckets[_invariant(og)]
        if not any(isomorphic(og, other) for other in bucket):
            bucket.append(og)
    return [og for b in buckets.values() for og in b]


# enumeration by Wick pairing


def _matchings(items: list[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i in range(len(rest)):
        for m in _matchings(rest[:i] + rest[i + 1:]):
            yield [(first, rest[i])] + m


def _leg_splits(types: list[tuple[str, int]], n_legs: int):
    """Leg counts per vertex, non-increasing within each run of equal vertex types."""
    def rec(i, left, prev):
        if i == len(types):
            if left == 0:
                yield ()
            return
        name, val = types[i]
        cap = min(val, left)
        if i and types[i - 1][0] == name:
            cap = min(cap, prev)
        for k in range(cap, -1, -1):
            for rest in rec(i + 1, left - k, k):
                yield (k,) + rest

    yield from rec(0, n_legs, None)


def brute_shapes(theory, n_legs: int, n_loops: int) -> list[tuple]:
    """Isomorphism classes of connected 1PI graphs with ``n_legs`` legs and ``n_loops`` loops."""
    verts = [(v.name, v.valence) for v in theory.vertices]
    assert all(val > 2 for _, val in verts)
    found = []
    # sum (val - 2) n_v = 2 (L - 1) + E
    target = 2 * (n_loops - 1) + n_legs
    bounds = [target // (val - 2) for _, val in verts]
    for counts in itertools.product(*(range(b + 1) for b in bounds)):
        if sum((val - 2) * k for (_, val), k in zip(verts, counts)) != target or not any(counts):
            continue
        types = [t for t, k in zip(verts, counts) for _ in range(k)]
        names = tuple(name for name, _ in types)
        for legs in _leg_splits(types, n_legs):
            half = [v for v, (_, val) in enumerate(types) for _ in range(val - legs[v])]
            for m in _matchings(list(range(len(half)))):
                edges = [(half[i], half[j]) for i, j in m]
                if is_1pi(len(names), edges):
                    found.append((names, edges, legs))
    return iso_classes(found)


# subgraphs and contraction


def _subgraph_legs(og: tuple, sub: frozenset[int]) -> dict[int, int]:
    """External half-edges of the subgraph spanned by edge indices ``sub``, per vertex."""
    names, edges, legs = og
    verts = {x for i in sub for x in edges[i]}
    out = {v: legs[v] for v in verts}
    for i, (a, b) in enumerate(edges):
        if i in sub:
            continue
        if a in verts:
            out[a] += 1
        if b in verts:
            out[b] += 1
    return out


def _sub_omega(theory, og: tuple, sub: frozenset[int]) -> int:
    names, edges, _ = og
    verts = {x for i in sub for x in edges[i]}
    w_e = theory.edges[0].weight
    return (theory.dimension * (len(sub) - len(verts) + 1) + sum(theory.vertex(names[v]).weight for v in verts)
            + w_e * len(sub))


def _residue_of(theory, og: tuple, sub: frozenset[int]) -> str | None:
    n_legs = sum(_subgraph_legs(og, sub).values())
    if n_legs == 2:
        return "edge"
    for v in theory.vertices:
        if v.valence == n_legs:
            return v.name
    return None


def divergent_edge_sets(theory, og: tuple) -> list[frozenset[int]]:
    """Every edge subset spanning a connected 1PI divergent subgraph with a residue of the theory."""
    names, edges, _ = og
    out = []
    for r in range(1, len(edges) + 1):
        for sub in itertools.combinations(range(len(edges)), r):
            sub = frozenset(sub)
            verts = sorted({x for i in sub for x in edges[i]})
            index = {v: k for k, v in enumerate(verts)}
            local = [(index[edges[i][0]], index[edges[i][1]]) for i in sorted(sub)]
            if len(local) - len(verts) + 1 < 1 or not is_1pi(len(verts), local):
                continue
            if _sub_omega(theory, og, sub) < 0 or _residue_of(theory, og, sub) is None:
                continue
            out.append(sub)
    return out


def restrict(og: tuple, sub: frozenset[int]) -> tuple:
    """The subgraph spanned by ``sub`` as a graph of its own."""
    names, edges, _ = og
    verts = sorted({x for i in sub for x in edges[i]})
    index = {v: k for k, v in enumerate(verts)}
    ext = _subgraph_legs(og, sub)
    return (tuple(names[v] for v in verts), [(index[edges[i][0]], index[edges[i][1]]) for i in sorted(sub)],
            tuple(ext[v] for v in verts))


def contract(theory, og: tuple, parts: list[frozenset[int]]) -> tuple | None:
    """Shrink vertex-disjoint subgraphs to vertices, or propagator subgraphs to edges; None for the whole graph."""
    names, edges, legs = og
    if len(parts) == 1 and len(parts[0]) == len(edges):
        return None
    comp = {x: ci for ci, sub in enumerate(parts) for i in sub for x in edges[i]}
    inside = set().union(*parts) if parts else set()
    res = [_residue_of(theory, og, sub) for sub in parts]
    # nodes: ("v", new id) for surviving or shrunk vertices, ("p", ci) for propagator parts, ("x", k) for legs
    new_names, node_of = [], {}
    for v, name in enumerate(names):
        if v not in comp:
            node_of[v] = ("v", len(new_names))
            new_names.append(name)
    for ci, r in enumerate(res):
        node = ("p", ci)
        if r != "edge":
            node = ("v", len(new_names))
            new_names.append(r)
        for v, c in comp.items():
            if c == ci:
                node_of[v] = node
    links = [[node_of[a], node_of[b]] for i, (a, b) in enumerate(edges) if i not in inside]
    for v, k in enumerate(legs):
        for j in range(k):
            links.append([node_of[v], ("x", (v, j))])
    # splice each propagator node out of the chain it sits on
    for ci, r in enumerate(res):
        if r != "edge":
            continue
        node = ("p", ci)
        at = [(i, side) for i, link in enumerate(links) for side in (0, 1) if link[side] == node]
        assert len(at) == 2, "propagator parts have two outside ends"
        (i, si), (j, sj) = at
        assert i != j, "vacuum component"
        links[i][si] = links[j][1 - sj]
        del links[j]
    out_legs = [0] * len(new_names)
    out_edges = []
    for a, b in links:
        if a[0] == "x":
            a, b = b, a
        assert a[0] == "v"
        if b[0] == "x":
            out_legs[a[1]] += 1
        else:
            out_edges.append((a[1], b[1]))
    return tuple(new_names), out_edges, tuple(out_legs)


def coproduct_counts(theory, og: tuple) -> Counter:
    """Delta(G) as a Counter over (sorted subgraph keys, quotient key); always includes G (x) 1."""
    subs = divergent_edge_sets(theory, og)
    verts = [frozenset(x for i in s for x in og[1][i]) for s in subs]
    out: Counter = Counter()
    full = frozenset(range(len(og[1])))
    for r in range(0, len(subs) + 1):
        for pick in itertools.combinations(range(len(subs)), r):
            vs = [verts[i] for i in pick]
            if any(vs[i] & vs[j] for i in range(len(vs)) for j in range(i + 1, len(vs))):
                continue
            parts = [subs[i] for i in pick]
            if parts == [full]:
                continue
            left = tuple(sorted(to_graph(theory, restrict(og, p)).key for p in parts))
            right = contract(theory, og, parts)
            out[(left, () if right is None else (to_graph(theory, right).key,))] += 1
    out[((to_graph(theory, og).key,), ())] += 1
    return out


# forest formula


class Laurent(dict):
    """Exact Laurent polynomial {power: coefficient}."""

    def __add__(self, other):
        out = Laurent(self)
        for k, c in other.items():
            out[k] = out.get(k, 0) + c
        return Laurent({k: c for k, c in out.items() if c})

    def __mul__(self, other):
        out: dict = {}
        for a, x in self.items():
            for b, y in other.items():
                out[a + b] = out.get(a + b, 0) + x * y
        return Laurent({k: c for k, c in out.items() if c})

    def neg_pole(self):
        return Laurent({k: -c for k, c in self.items() if k < 0})


def standard_value(og: tuple) -> Laurent:
    lam = loops(og)
    return Laurent({-lam: Fraction(1, automorphisms(og))}) + Laurent({0: Fraction(lam)})


def _value_with_forest(theory, og: tuple, forest: list[frozenset[int]]) -> Laurent:
    """Phi of og with every maximal forest element replaced by its renormalized counterterm part."""
    tops = [s for s in forest if not any(s < t for t in forest)]
    out = standard_value(contract(theory, og, tops)) if tops else standard_value(og)
    for top in tops:
        below = [s for s in forest if s < top]
        sub = restrict(og, top)
        # restrict keeps edges in sorted order
        relabel = {old: new for new, old in enumerate(sorted(top))}
        inner = [frozenset(relabel[i] for i in s) for s in below]
        out = out * _value_with_forest(theory, sub, inner).neg_pole()
    return out


def forest_counterterm(theory, og: tuple) -> Laurent:
    """Minimal-subtraction counterterm of a 1PI graph by Zimmermann's forest formula."""
    full = frozenset(range(len(og[1])))
    subs = [s for s in divergent_edge_sets(theory, og) if s != full]
    verts = {s: frozenset(x for i in s for x in og[1][i]) for s in subs}

    def compatible(a, b):
        return a < b or b < a or not (verts[a] & verts[b])

    total = Laurent()
    for r in range(0, len(subs) + 1):
        for pick in itertools.combinations(subs, r):
            if all(compatible(a, b) for a, b in itertools.combinations(pick, 2)):
                total = total + _value_with_forest(theory, og, list(pick))
    return total.neg_pole()
