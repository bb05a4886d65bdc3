"""Loop-truncated combinatorial Green's functions, charges and charge powers.

A :class:`TruncatedSeries` is exact on every loop order up to its cap.
Coproduct identities are checked by comparing both sides as exact tensors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .combinatorics import enumerate_shapes, insertion_counts, insrr_count
from .graph import FeynmanGraph, GradingKind, green_weight, labelings, monomial_symmetry, residue, residue_grading
from .hopf import (
    HopfElement,
    Monomial,
    TensorElement,
    coproduct,
    divergent_projection,
    is_divergent,
    monomial_grading,
    restrict,
    tensor,
)
from .theory import Amplitude, AmplitudeKind, TheorySpec


class TruncationError(ValueError):
    pass


def _loops(theory: TheorySpec, m: Monomial) -> int:
    return monomial_grading(theory, m, GradingKind.LOOP)[0]


@dataclass(frozen=True)
class TruncatedSeries:
    cap: int
    element: HopfElement

    def __post_init__(self) -> None:
        if self.cap < 0:
            raise TruncationError("cap must be >= 0")
        th = self.element.theory
        object.__setattr__(self, "element", HopfElement(
            th, {m: c for m, c in self.element.terms.items() if _loops(th, m) <= self.cap}))

    @property
    def theory(self) -> TheorySpec:
        return self.element.theory

    @classmethod
    def one(cls, theory: TheorySpec, cap: int) -> "TruncatedSeries":
        return cls(cap, HopfElement.unit(theory))

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return TruncatedSeries(min(self.cap, other.cap), self.element + other.element)

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return TruncatedSeries(min(self.cap, other.cap), self.element - other.element)

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries(self.cap, -self.element)

    def __mul__(self, other) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            return TruncatedSeries(min(self.cap, other.cap), _truncated_product(self.element, other.element,
                                                                             min(self.cap, other.cap)))
        return TruncatedSeries(self.cap, self.element * other)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        cap = min(self.cap, other.cap)
        return self.truncate(cap).element == other.truncate(cap).element

    def __hash__(self) -> int:
        return hash((self.cap, self.element))

    def truncate(self, cap: int) -> "TruncatedSeries":
        if cap > self.cap:
            raise TruncationError(f"series known to loop {self.cap}, asked for {cap}")
        return TruncatedSeries(cap, self.element)

    def loop_slice(self, loops: int) -> HopfElement:
        if loops > self.cap:
            raise TruncationError(f"loop {loops} exceeds cap {self.cap}")
        return restrict(self.element, GradingKind.LOOP, loops)

    def restrict(self, kind: GradingKind, value) -> HopfElement:
        """Restriction to a grading; residue and coupling slices must lie within the cap."""
        out = restrict(self.element, kind, value)
        return out

    def constant(self) -> Fraction:
        return self.element.coefficient(())

    def power(self, m) -> "TruncatedSeries":
        """Binomial series sum_n binom(m, n) (G - 1)^n; needs constant term 1."""
        m = Fraction(m)
        if self.constant() != 1:
            raise TruncationError("powers need a series with unit coefficient exactly 1")
        if any(m_ and _loops(self.theory, m_) == 0 for m_ in self.element.terms):
            raise TruncationError("rational powers need all non-unit terms at positive loop order")
        x = self - TruncatedSeries.one(self.theory, self.cap)
        out = TruncatedSeries.one(self.theory, self.cap)
        term = TruncatedSeries.one(self.theory, self.cap)
        coef = Fraction(1)
        for n in range(1, self.cap + 1):
            coef = coef * (m - n + 1) / n
            term = term * x
            if not term.element:
                break
            out = out + term * coef
        return out

    def inverse(self) -> "TruncatedSeries":
        return self.power(-1)

    def sqrt(self) -> "TruncatedSeries":
        return self.power(Fraction(1, 2))

    def bar(self) -> "TruncatedSeries":
        return TruncatedSeries(self.cap, divergent_projection(self.element))


def _truncated_product(a: HopfElement, b: HopfElement, cap: int) -> HopfElement:
    theory = a.theory
    la = {m: _loops(theory, m) for m in a.terms}
    lb = {m: _loops(theory, m) for m in b.terms}
    acc: dict[Monomial, Fraction] = {}
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            if la[ma] + lb[mb] > cap:
                continue
            key = tuple(sorted(ma + mb))
            acc[key] = acc.get(key, Fraction(0)) + ca * cb
    return HopfElement(theory, acc)


# series


@lru_cache(maxsize=None)
def _green(theory: TheorySpec, legs: tuple, cap: int) -> TruncatedSeries:
    amp = theory.classify_legs(legs)
    terms: dict[Monomial, Fraction] = {}
    sign = -1 if amp.kind is AmplitudeKind.EDGE else 1
    if amp.in_residues:
        terms[()] = Fraction(1)
    for loops in range(1, cap + 1):
        for g in enumerate_shapes(theory, amp, loops):
            terms[(g.key,)] = sign * green_weight(g)
    return TruncatedSeries(cap, HopfElement(theory, terms))


def green_function(theory: TheorySpec, r: "Amplitude | str", cap: int) -> TruncatedSeries:
    """1 + sum, 1 - sum, or the bare sum over 1PI graphs of amplitude ``r`` (vertex, edge, other), each over Sym."""
    amp = theory.amplitude(r)
    return _green(theory, amp.legs, cap)


def _edge_names(theory: TheorySpec, legs: Iterable) -> list[str]:
    return [e for e, _ in legs]


@lru_cache(maxsize=None)
def _charge(theory: TheorySpec, v: str, cap: int) -> TruncatedSeries:
    out = green_function(theory, v, cap)
    for e in _edge_names(theory, theory.vertex(v).legs):
        out = out * green_function(theory, e, cap).power(Fraction(-1, 2))
    return out


def charge(theory: TheorySpec, v: str, cap: int) -> TruncatedSeries:
    """Vertex function divided by the square roots of the propagators on its legs."""
    if not theory.is_vertex(v):
        raise KeyError(f"unknown vertex residue {v!r}")
    return _charge(theory, v, cap)


def _rvec_key(theory: TheorySpec, multi) -> tuple[Fraction, ...]:
    if isinstance(multi, tuple) and len(multi) == 2 and isinstance(multi[0], str):
        v, m = multi
        out = [Fraction(0)] * len(theory.vertices)
        out[theory.vertex_index(v)] = Fraction(m)
        return tuple(out)
    if isinstance(multi, dict):
        out = [Fraction(0)] * len(theory.vertices)
        for v, m in multi.items():
            out[theory.vertex_index(v)] = Fraction(m)
        return tuple(out)
    out = tuple(Fraction(x) for x in multi)
    if len(out) != len(theory.vertices):
        raise ValueError("residue multi-index has the wrong length")
    return out


@lru_cache(maxsize=None)
def _charge_power(theory: TheorySpec, exps: tuple[Fraction, ...], cap: int) -> TruncatedSeries:
    out = TruncatedSeries.one(theory, cap)
    for v, k in zip(theory.vertices, exps):
        if k:
            out = out * charge(theory, v.name, cap).power(k)
    return out


def charge_power(theory: TheorySpec, multi, cap: int) -> TruncatedSeries:
    """Product of charge powers for a residue multi-index, a ``{vertex: exponent}`` map or a ``(vertex, m)`` pair."""
    return _charge_power(theory, _rvec_key(theory, multi), cap)


def barred_charge_power(theory: TheorySpec, multi, cap: int) -> TruncatedSeries:
    return charge_power(theory, multi, cap).bar()


# insertion identities


def _divergent_pool(theory: TheorySpec, names: Iterable[str], cap: int) -> list[FeynmanGraph]:
    pool = []
    for name in sorted(set(names)):
        for loops in range(1, cap + 1):
            pool.extend(g for g in enumerate_shapes(theory, name, loops) if is_divergent(theory, g.key))
    return pool


def _monomials(pool: list[FeynmanGraph], cap: int) -> Iterable[list[FeynmanGraph]]:
    from .graph import loop_number

    loops = [loop_number(g) for g in pool]
    for k in range(1, cap + 1):
        for combo in itertools.combinations_with_replacement(range(len(pool)), k):
            if sum(loops[i] for i in combo) <= cap:
                yield [pool[i] for i in combo]


def insertion_series(g: FeynmanGraph, cap: int) -> TruncatedSeries:
    """Sum over insertable products gamma of ins(gamma|g)/Sym(gamma) gamma, by direct insertion enumeration."""
    theory = g.theory
    names = list(g.vertices) + [e for _, _, e in g.edges]
    terms: dict[Monomial, Fraction] = {(): Fraction(1)}
    for comps in _monomials(_divergent_pool(theory, names, cap), cap):
        ins = insertion_counts(comps, g).ins
        if ins:
            m = tuple(sorted(c.key for c in comps))
            terms[m] = terms.get(m, Fraction(0)) + Fraction(ins, monomial_symmetry(comps))
    return TruncatedSeries(cap, HopfElement(theory, terms))


def verify_insertion_identity(g: FeynmanGraph, cap: int) -> bool:
    """Insertion enumeration against the product of barred vertex functions over barred propagators."""
    theory = g.theory
    rhs = TruncatedSeries.one(theory, cap)
    for v in g.vertices:
        rhs = rhs * green_function(theory, v, cap).bar()
    for _, _, e in g.edges:
        rhs = rhs * green_function(theory, e, cap).bar().inverse()
    return insertion_series(g, cap) == rhs


def insertable_set_series(theory: TheorySpec, r: "Amplitude | str", rvec: Sequence[int], cap: int) -> TruncatedSeries:
    """Sum over insertable products of insrr/Sym, counted from residue data only."""
    from .combinatorics import residue_data

    amp = theory.amplitude(r)
    counts, edges = residue_data(theory, amp, rvec)
    names = [n for n, k in counts.items() if k > 0] + [e for e, k in edges.items() if k > 0]
    terms: dict[Monomial, Fraction] = {(): Fraction(1)}
    for comps in _monomials(_divergent_pool(theory, names, cap), cap):
        kinds = [residue(c) for c in comps]
        labs = 1
        for c in comps:
            labs *= labelings(c)
        n = insrr_count(theory, amp, rvec, kinds, labs)
        if n:
            m = tuple(sorted(c.key for c in comps))
            terms[m] = terms.get(m, Fraction(0)) + Fraction(n, monomial_symmetry(comps))
    return TruncatedSeries(cap, HopfElement(theory, terms))


def realizing_graphs(theory: TheorySpec, r: "Amplitude | str", rvec: Sequence[int]) -> list[FeynmanGraph]:
    """1PI shapes with residue ``r`` and residue grading ``rvec``; the loop order follows from both."""
    amp = theory.amplitude(r)
    twice = sum((v.valence - 2) * k for v, k in zip(theory.vertices, rvec))
    if not amp.in_residues:
        twice += 2 - len(amp.legs)
    if twice % 2 or twice < 0:
        return []
    want = tuple(rvec)
    return [g for g in enumerate_shapes(theory, amp, twice // 2) if tuple(residue_grading(g)) == want]


def verify_insertable_set_identity(theory: TheorySpec, r: "Amplitude | str", rvec: Sequence[int], cap: int) -> bool:
    """Residue-data insertion counts against the barred Green's function times barred charges.

    Vacuously true when no graph has residue ``r`` and grading ``rvec``.
    """
    amp = theory.amplitude(r)
    if not realizing_graphs(theory, amp, rvec):
        return True
    q = barred_charge_power(theory, tuple(rvec), cap)
    if amp.in_residues:
        rhs = green_function(theory, amp, cap).bar() * q
    else:
        rhs = q
        for e in _edge_names(theory, amp.legs):
            rhs = rhs * green_function(theory, e, cap).bar().sqrt()
    return insertable_set_series(theory, amp, rvec, cap) == rhs


# coproduct identities


@dataclass(frozen=True)
class IdentityReport:
    ok: bool
    variant: str
    mismatch: str = ""


def _residue_slices(x: HopfElement) -> dict[tuple[int, ...], HopfElement]:
    out: dict[tuple[int, ...], dict] = {}
    for m, c in x.terms.items():
        out.setdefault(monomial_grading(x.theory, m, GradingKind.RESIDUE), {})[m] = c
    return {k: HopfElement(x.theory, v) for k, v in out.items()}


def _first_mismatch(a: TensorElement, b: TensorElement) -> str:
    diff = a - b
    for (l, r), c in diff:
        return TensorElement(a.theory, {(l, r): c}).to_text().strip()
    return ""


def _sub(a, b) -> tuple[int, ...]:
    return tuple(x - y for x, y in zip(a, b))


def _loop_of_rvec(theory: TheorySpec, rvec: Sequence[int], x: HopfElement) -> int:
    for m in x.terms:
        return _loops(theory, m)
    return 0


def _series_for(kind: str, theory: TheorySpec, target, param, cap: int) -> tuple[TruncatedSeries, TruncatedSeries]:
    """The series whose coproduct is tested and the left prefactor (barred)."""
    if kind == "green":
        s = green_function(theory, target, cap)
        amp = theory.amplitude(target)
        if not amp.in_residues:
            raise ValueError("the Green's function identity needs a residue of the theory")
        return s, s.bar()
    if kind == "charge":
        s = charge(theory, target, cap)
        return s, s.bar()
    if kind == "charge_power":
        s = charge_power(theory, (target, Fraction(param)), cap)
        return s, s.bar()
    raise ValueError(f"unknown identity kind {kind!r}")


def verify_coproduct_identity(kind: str, theory: TheorySpec, target: str, param=None, cap: int = 1) -> list[IdentityReport]:
    """Check the plain, restricted and barred coproduct identities of a Green's function, charge or charge power.

    ``kind`` is ``"green"``, ``"charge"`` or ``"charge_power"`` (``param`` is the
    exponent).  The sums run over the residue gradings present up to ``cap``.
    """
    series, prefactor = _series_for(kind, theory, target, param, cap)
    slices = _residue_slices(series.element)
    bar_slices = _residue_slices(series.bar().element)
    lhs = coproduct(series.element)
    rhs = TensorElement(theory)
    left_by_rvec: dict[tuple[int, ...], TruncatedSeries] = {}
    for rvec, right in slices.items():
        loops = _loop_of_rvec(theory, rvec, right)
        left = (prefactor * barred_charge_power(theory, rvec, cap)).truncate(cap - loops)
        left_by_rvec[rvec] = left
        rhs = rhs + tensor(left.element, right)
    reports = [IdentityReport(lhs == rhs, "plain", _first_mismatch(lhs, rhs))]
    ok_r, ok_b, mism_r, mism_b = True, True, "", ""
    for R, part in sorted(slices.items()):
        l_r = coproduct(part)
        r_r = TensorElement(theory)
        for rvec, right in slices.items():
            r_r = r_r + tensor(restrict(left_by_rvec[rvec].element, GradingKind.RESIDUE, _sub(R, rvec)), right)
        if l_r != r_r and ok_r:
            ok_r, mism_r = False, f"R={R}: " + _first_mismatch(l_r, r_r)
        if R in bar_slices:
            l_b = coproduct(bar_slices[R])
            r_b = TensorElement(theory)
            for rvec, right in bar_slices.items():
                r_b = r_b + tensor(restrict(left_by_rvec[rvec].element, GradingKind.RESIDUE, _sub(R, rvec)), right)
            if l_b != r_b and ok_b:
                ok_b, mism_b = False, f"R={R}: " + _first_mismatch(l_b, r_b)
    reports.append(IdentityReport(ok_r, "restricted", mism_r))
    reports.append(IdentityReport(ok_b, "barred", mism_b))
    return reports
