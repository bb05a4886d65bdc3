"""Quantum gauge symmetry ideals, their graded slices and the quotient comodule map.

Ideal membership is decided slice by slice with exact sparse row reduction.
A slice is fixed by a coupling grading and the loop cap.  Only graphs from a
declared support take part.  Killing every other graph is an algebra map that
fixes the generators, so restricting to the support loses nothing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .combinatorics import CheckResult
from .graph import GradingKind, theta_of
from .hopf import (
    HopfElement,
    Monomial,
    TensorElement,
    antipode,
    coproduct,
    counit,
    monomial_grading,
    restrict,
    tensor,
)
from .series import charge_power, green_function
from .theory import QgsRelation, TheorySpec, check_relation, grading_compatibility

__all__ = [
    "QgsContext",
    "QgsPreconditionError",
    "QgsRelation",
    "GradedIdealBasis",
    "IdealReport",
    "comodule_map",
    "graded_ideal_basis",
    "ideal_generators",
    "reduce_mod_ideal",
    "theta_multiindex",
    "verify_coupling_factorization",
    "verify_hopf_ideal",
]


class QgsPreconditionError(ValueError):
    """A relation or theory violates the hypotheses of the ideal construction."""


def theta_multiindex(theory: TheorySpec, rvec: Sequence[int]) -> tuple[int, ...]:
    """Coupling grading of a residue grading (linear in ``rvec``)."""
    if len(rvec) != len(theory.vertices):
        raise ValueError("residue multi-index has the wrong length")
    return theta_of(theory, rvec)


def _check_preconditions(theory: TheorySpec, relations: Iterable[QgsRelation]) -> tuple[QgsRelation, ...]:
    relations = tuple(relations)
    for rel in relations:
        try:
            check_relation(theory, rel)
        except ValueError as exc:
            raise QgsPreconditionError(str(exc)) from exc
    if relations and not grading_compatibility(theory).coupling_grading_compatible:
        raise QgsPreconditionError(f"{theory.name}: coupling grading is not superficially compatible")
    return relations


def _coupling(theory: TheorySpec, m: Monomial) -> tuple[int, ...]:
    return monomial_grading(theory, m, GradingKind.COUPLING)


def _slice(x: HopfElement, c: Sequence[int]) -> HopfElement:
    return restrict(x, GradingKind.COUPLING, tuple(c))


def ideal_generators(theory: TheorySpec, rel: QgsRelation, C: Sequence[int], cap: int) -> HopfElement:
    """Barred charge powers of both sides of ``rel`` restricted to coupling ``C``, subtracted."""
    _check_preconditions(theory, [rel])
    left = charge_power(theory, (rel.v, rel.m), cap).bar().element
    right = charge_power(theory, (rel.w, rel.n), cap).bar().element
    return _slice(left, C) - _slice(right, C)


# exact sparse row reduction


class _Echelon:
    """Reduced row echelon form over sorted monomial columns; pivots are the smallest keys."""

    def __init__(self) -> None:
        self.rows: dict[Monomial, dict[Monomial, Fraction]] = {}

    def reduce(self, vec: dict[Monomial, Fraction]) -> dict[Monomial, Fraction]:
        out = dict(vec)
        for p in [p for p in out if p in self.rows]:
            c = out.get(p)
            if not c:
                continue
            for m, a in self.rows[p].items():
                out[m] = out.get(m, Fraction(0)) - c * a
        return {m: c for m, c in out.items() if c}

    def add(self, vec: dict[Monomial, Fraction]) -> bool:
        vec = self.reduce(vec)
        if not vec:
            return False
        p = min(vec)
        inv = 1 / vec[p]
        vec = {m: c * inv for m, c in vec.items()}
        for q, row in self.rows.items():
            c = row.get(p)
            if c:
                for m, a in vec.items():
                    row[m] = row.get(m, Fraction(0)) - c * a
                self.rows[q] = {m: v for m, v in row.items() if v}
        self.rows[p] = vec
        return True


@dataclass(frozen=True)
class GradedIdealBasis:
    coupling: tuple[int, ...]
    cap: int
    rows: tuple[HopfElement, ...]

    @property
    def rank(self) -> int:
        return len(self.rows)


def _monomials_with_coupling(theory: TheorySpec, keys: Sequence[str], target: tuple[int, ...]) -> list[Monomial]:
    grads = [_coupling(theory, (k,)) for k in keys]
    for k, g in zip(keys, grads):
        if not any(g) or min(g) < 0:
            raise QgsPreconditionError(f"graph {k} has coupling grading {g}; slices would be infinite")
    out: list[Monomial] = []

    def walk(start: int, rest: tuple[int, ...], acc: tuple[str, ...]) -> None:
        if not any(rest):
            out.append(acc)
            return
        for i in range(start, len(keys)):
            nxt = tuple(a - b for a, b in zip(rest, grads[i]))
            if min(nxt) >= 0:
                walk(i, nxt, acc + (keys[i],))

    walk(0, target, ())
    return out


def _lower(C: tuple[int, ...]) -> Iterable[tuple[int, ...]]:
    return itertools.product(*(range(c + 1) for c in C))


@dataclass
class QgsContext:
    """Generators and cached ideal slices for a theory, its relations and a loop cap."""

    theory: TheorySpec
    relations: tuple[QgsRelation, ...]
    cap: int
    _gens: dict = field(default_factory=dict, repr=False)
    _bases: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.relations = _check_preconditions(self.theory, self.relations)

    @classmethod
    def of(cls, theory: TheorySpec, relations: Iterable[QgsRelation] | None = None, cap: int = 2) -> "QgsContext":
        return cls(theory, tuple(theory.qgs_relations if relations is None else relations), cap)

    def generator(self, rel: QgsRelation, C: tuple[int, ...]) -> HopfElement:
        key = (rel, C)
        if key not in self._gens:
            self._gens[key] = ideal_generators(self.theory, rel, C, self.cap)
        return self._gens[key]

    def generators_below(self, C: tuple[int, ...]) -> list[tuple[tuple[int, ...], HopfElement]]:
        out = []
        for c in _lower(C):
            if any(c):
                for rel in self.relations:
                    g = self.generator(rel, c)
                    if g:
                        out.append((c, g))
        return out

    def basis(self, C: Sequence[int], support: Iterable[str] = ()) -> tuple[GradedIdealBasis, _Echelon]:
        C = tuple(C)
        gens = self.generators_below(C)
        keys = set(support)
        for _, g in gens:
            for m in g.terms:
                keys.update(m)
        cache_key = (C, frozenset(keys))
        if cache_key not in self._bases:
            ech = _Echelon()
            ordered = sorted(keys)
            for c, g in gens:
                rest = tuple(a - b for a, b in zip(C, c))
                for mono in _monomials_with_coupling(self.theory, ordered, rest):
                    ech.add((g * HopfElement(self.theory, {mono: 1})).terms)
            rows = tuple(HopfElement(self.theory, ech.rows[p]) for p in sorted(ech.rows))
            self._bases[cache_key] = (GradedIdealBasis(C, self.cap, rows), ech)
        return self._bases[cache_key]

    def reduce(self, x: HopfElement, support: Iterable[str] | None = None) -> HopfElement:
        keys = set(support) if support is not None else set()
        for m in x.terms:
            keys.update(m)
        by_c: dict[tuple[int, ...], dict] = {}
        for m, c in x.terms.items():
            by_c.setdefault(_coupling(self.theory, m), {})[m] = c
        out: dict[Monomial, Fraction] = {}
        for C, part in by_c.items():
            if not any(C) or not self.relations:
                out.update(part)
                continue
            _, ech = self.basis(C, keys)
            out.update(ech.reduce(part))
        return HopfElement(self.theory, out)

    def is_member(self, x: HopfElement) -> bool:
        return not self.reduce(x)


def graded_ideal_basis(theory: TheorySpec, relations: Iterable[QgsRelation], C: Sequence[int], cap: int,
                       support: Iterable[str] = ()) -> GradedIdealBasis:
    """Echelon basis of the ideal slice at coupling ``C``, loops up to ``cap``."""
    return QgsContext(theory, tuple(relations), cap).basis(C, support)[0]


def reduce_mod_ideal(x: HopfElement, ctx: QgsContext) -> HopfElement:
    """Normal form of ``x`` modulo the ideal; zero exactly on ideal members."""
    return ctx.reduce(x)


def _tensor_support(t: TensorElement) -> set[str]:
    keys: set[str] = set()
    for (l, r), _ in t:
        keys.update(l)
        keys.update(r)
    return keys


def _reduce_left(t: TensorElement, ctx: QgsContext, support: set[str], right_too: bool = False) -> TensorElement:
    by_right: dict[Monomial, dict] = {}
    for (l, r), c in t:
        by_right.setdefault(r, {})[l] = c
    out = TensorElement(ctx.theory)
    for r, left in by_right.items():
        red = ctx.reduce(HopfElement(ctx.theory, left), support)
        out = out + tensor(red, HopfElement(ctx.theory, {r: 1}))
    if right_too:
        flipped = TensorElement(ctx.theory, {(r, l): c for (l, r), c in out})
        flipped = _reduce_left(flipped, ctx, support)
        out = TensorElement(ctx.theory, {(r, l): c for (l, r), c in flipped})
    return out


def comodule_map(x: HopfElement, ctx: QgsContext) -> TensorElement:
    """Coproduct followed by the normal form on left tensor factors."""
    t = coproduct(x)
    return _reduce_left(t, ctx, _tensor_support(t))


def _gradings_up_to(theory: TheorySpec, C_max) -> list[tuple[int, ...]]:
    q = len(theory.couplings)
    if isinstance(C_max, int):
        return [c for c in itertools.product(range(C_max + 1), repeat=q) if 0 < sum(c) <= C_max]
    return [c for c in _lower(tuple(C_max)) if any(c)]


@dataclass(frozen=True)
class IdealReport:
    ok: bool
    slices: tuple[dict, ...]
    witnesses: tuple[str, ...] = ()


def verify_hopf_ideal(theory: TheorySpec, relations: Iterable[QgsRelation] | None, C_max, cap: int) -> IdealReport:
    """Check the three Hopf ideal conditions on every generator slice up to ``C_max``.

    The coproduct condition holds iff the tensor vanishes after reducing both
    factors, because reduction is a projection whose kernel is the ideal slice.
    """
    ctx = QgsContext.of(theory, relations, cap)
    slices, witnesses = [], []
    for C in _gradings_up_to(theory, C_max):
        for rel in ctx.relations:
            gen = ctx.generator(rel, C)
            t = coproduct(gen)
            support = _tensor_support(t)
            rest = _reduce_left(t, ctx, support, right_too=True)
            co_ok = not rest
            eps_ok = counit(gen) == 0
            s_ok = ctx.is_member(antipode(gen))
            label = f"{{{rel.v},{rel.m};{rel.w},{rel.n}}} C={C}"
            slices.append({"relation": [rel.v, rel.m, rel.w, rel.n], "coupling": list(C),
                           "rank": ctx.basis(C, support)[0].rank, "generator_terms": len(gen),
                           "coproduct": co_ok, "counit": eps_ok, "antipode": s_ok})
            if not co_ok:
                witnesses.append(f"{label} coproduct residue: {rest.to_text().strip()}")
            if not eps_ok:
                witnesses.append(f"{label} counit {counit(gen)}")
            if not s_ok:
                witnesses.append(f"{label} antipode residue: {ctx.reduce(antipode(gen)).to_text().strip()}")
    return IdealReport(not witnesses, tuple(slices), tuple(witnesses))


def verify_coupling_factorization(ctx: QgsContext, residues: Iterable[str] | None = None, C_max=None) -> CheckResult:
    """Comodule images of coupling-restricted Green's functions factor over coupling gradings.

    Checks the plain and barred restricted forms, and that every residue grading
    over the same coupling grading gives the same class on the left.
    """
    theory, cap = ctx.theory, ctx.cap
    names = list(residues) if residues is not None else [e.name for e in theory.edges] + [v.name for v in theory.vertices]
    witnesses: list[str] = []
    for r in names:
        X = green_function(theory, r, cap)
        Xb = X.bar()
        lefts: dict[tuple[int, ...], list] = {}
        for m in X.element.terms:
            rvec = monomial_grading(theory, m, GradingKind.RESIDUE)
            lefts.setdefault(theta_of(theory, rvec), [])
            if rvec not in lefts[theta_of(theory, rvec)]:
                lefts[theta_of(theory, rvec)].append(rvec)
        grades = sorted(lefts) if C_max is None else [c for c in [(0,) * len(theory.couplings)] + _gradings_up_to(theory, C_max)]
        for C in grades:
            for barred, series in ((False, X), (True, Xb)):
                part = _slice(series.element, C)
                if barred and not part:
                    continue
                lhs = coproduct(part)
                rhs = TensorElement(theory)
                for c, rvecs in lefts.items():
                    rest = tuple(a - b for a, b in zip(C, c))
                    if min(rest) < 0:
                        continue
                    right = _slice(series.element, c)
                    if not right:
                        continue
                    loops = _coupling_loops(theory, right)
                    reps = [_slice((Xb * charge_power(theory, rv, cap).bar()).truncate(cap - loops).element, rest)
                            for rv in rvecs]
                    for other in reps[1:]:
                        if not ctx.is_member(reps[0] - other):
                            witnesses.append(f"{r} C={C} c={c}: residue gradings {rvecs} give different classes")
                    rhs = rhs + tensor(reps[0], right)
                diff = lhs - rhs
                red = _reduce_left(diff, ctx, _tensor_support(diff))
                if red:
                    kind = "barred" if barred else "plain"
                    witnesses.append(f"{r} C={C} {kind}: {red.to_text().strip()}")
    return CheckResult(not witnesses, witnesses)


def _coupling_loops(theory: TheorySpec, x: HopfElement) -> int:
    return max(monomial_grading(theory, m, GradingKind.LOOP)[0] for m in x.terms)
