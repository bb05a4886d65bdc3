"""The renormalization Hopf algebra on 1PI graph shapes.

Elements are exact rational combinations of monomials; a monomial is a
sorted tuple of shape keys and the empty tuple is the unit.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .combinatorics import CheckResult, IllDefinedError, contract, divergent_subgraphs, offending_subgraphs
from .graph import FeynmanGraph, GradingKind, GradingVector, decode_key, gradings, omega
from .theory import TheorySpec

Monomial = tuple[str, ...]

UNIT: Monomial = ()


def _merge(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    return tuple(sorted(a + b))


def _coef(c) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


@lru_cache(maxsize=None)
def graph_of(theory: TheorySpec, key: str) -> FeynmanGraph:
    return decode_key(theory, key)


class HopfElement:
    __slots__ = ("theory", "terms")

    def __init__(self, theory: TheorySpec, terms: Mapping[Monomial, Fraction] | Iterable = ()):
        self.theory = theory
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Monomial, Fraction] = defaultdict(Fraction)
        for m, c in items:
            acc[tuple(sorted(m))] += _coef(c)
        self.terms = {m: c for m, c in acc.items() if c}

    # constructors

    @classmethod
    def unit(cls, theory: TheorySpec) -> "HopfElement":
        return cls(theory, {UNIT: Fraction(1)})

    @classmethod
    def zero(cls, theory: TheorySpec) -> "HopfElement":
        return cls(theory, {})

    @classmethod
    def from_graph(cls, g: FeynmanGraph | None, coef=1, theory: TheorySpec | None = None) -> "HopfElement":
        """The monomial of the components of ``g``; None and the empty graph give the unit."""
        if g is None:
            return cls(theory, {UNIT: _coef(coef)})
        return cls(g.theory, {tuple(sorted(c.key for c in g.components)): _coef(coef)})

    @classmethod
    def monomial(cls, theory: TheorySpec, keys: Sequence[str], coef=1) -> "HopfElement":
        return cls(theory, {tuple(keys): _coef(coef)})

    # arithmetic

    def _check(self, other: "HopfElement") -> None:
        if self.theory != other.theory:
            raise ValueError("elements belong to different theories")

    def __add__(self, other: "HopfElement") -> "HopfElement":
        self._check(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, Fraction(0)) + c
        return HopfElement(self.theory, out)

    def __sub__(self, other: "HopfElement") -> "HopfElement":
        return self + (-other)

    def __neg__(self) -> "HopfElement":
        return HopfElement(self.theory, {m: -c for m, c in self.terms.items()})

    def __mul__(self, other) -> "HopfElement":
        if isinstance(other, HopfElement):
            return product(self, other)
        c = _coef(other)
        return HopfElement(self.theory, {m: c * v for m, v in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if isinstance(other, HopfElement):
            return self.theory == other.theory and self.terms == other.terms
        if other == 0:
            return not self.terms
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __iter__(self) -> Iterator[tuple[Monomial, Fraction]]:
        return iter(sorted(self.terms.items()))

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"HopfElement({len(self.terms)} terms)"

    def coefficient(self, m: Sequence[str]) -> Fraction:
        return self.terms.get(tuple(sorted(m)), Fraction(0))

    def to_text(self) -> str:
        return "".join(f"{c} * {_mono_text(m)}\n" for m, c in self)


def _mono_text(m: Monomial) -> str:
    return "[" + ", ".join(m) + "]"


def _parse_mono(text: str) -> Monomial:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ValueError(f"malformed monomial {text!r}")
    inner = text[1:-1].strip()
    return tuple(inner.split(", ")) if inner else UNIT


def parse_element(theory: TheorySpec, text: str) -> HopfElement:
    terms = []
    for line in text.splitlines():
        if line.strip():
            coef, mono = line.split(" * ", 1)
            terms.append((_parse_mono(mono), Fraction(coef)))
    return HopfElement(theory, terms)


class TensorElement:
    __slots__ = ("theory", "terms")

    def __init__(self, theory: TheorySpec, terms: Mapping[tuple[Monomial, Monomial], Fraction] | Iterable = ()):
        self.theory = theory
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[tuple[Monomial, Monomial], Fraction] = defaultdict(Fraction)
        for (a, b), c in items:
            acc[(tuple(sorted(a)), tuple(sorted(b)))] += _coef(c)
        self.terms = {k: c for k, c in acc.items() if c}

    def __add__(self, other: "TensorElement") -> "TensorElement":
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, Fraction(0)) + c
        return TensorElement(self.theory, out)

    def __sub__(self, other: "TensorElement") -> "TensorElement":
        return self + TensorElement(self.theory, {k: -c for k, c in other.terms.items()})

    def __mul__(self, other) -> "TensorElement":
        if isinstance(other, TensorElement):
            acc: dict = defaultdict(Fraction)
            for (a1, b1), c1 in self.terms.items():
                for (a2, b2), c2 in other.terms.items():
                    acc[(_merge(a1, a2), _merge(b1, b2))] += c1 * c2
            return TensorElement(self.theory, acc)
        c = _coef(other)
        return TensorElement(self.theory, {k: c * v for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if isinstance(other, TensorElement):
            return self.terms == other.terms
        if other == 0:
            return not self.terms
        return NotImplemented

    def __iter__(self) -> Iterator[tuple[tuple[Monomial, Monomial], Fraction]]:
        return iter(sorted(self.terms.items()))

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"TensorElement({len(self.terms)} terms)"

    def coefficient(self, left: Sequence[str], right: Sequence[str]) -> Fraction:
        return self.terms.get((tuple(sorted(left)), tuple(sorted(right))), Fraction(0))

    def map(self, f: Callable[[HopfElement], HopfElement] | None, g: Callable[[HopfElement], HopfElement] | None) -> "TensorElement":
        """Apply linear maps to the two factors (None keeps a factor)."""
        acc: dict = defaultdict(Fraction)
        for (a, b), c in self.terms.items():
            fa = HopfElement(self.theory, {a: 1}) if f is None else f(HopfElement(self.theory, {a: 1}))
            gb = HopfElement(self.theory, {b: 1}) if g is None else g(HopfElement(self.theory, {b: 1}))
            for ma, ca in fa.terms.items():
                for mb, cb in gb.terms.items():
                    acc[(ma, mb)] += c * ca * cb
        return TensorElement(self.theory, acc)

    def to_text(self) -> str:
        return "".join(f"{c} * {_mono_text(a)} (x) {_mono_text(b)}\n" for (a, b), c in self)


def parse_tensor(theory: TheorySpec, text: str) -> TensorElement:
    terms = []
    for line in text.splitlines():
        if line.strip():
            coef, rest = line.split(" * ", 1)
            a, b = rest.split(" (x) ")
            terms.append(((_parse_mono(a), _parse_mono(b)), Fraction(coef)))
    return TensorElement(theory, terms)


def tensor(a: HopfElement, b: HopfElement) -> TensorElement:
    a._check(b)
    return TensorElement(a.theory, {(ma, mb): ca * cb for ma, ca in a.terms.items() for mb, cb in b.terms.items()})


# algebra


def product(a: HopfElement, b: HopfElement) -> HopfElement:
    a._check(b)
    acc: dict[Monomial, Fraction] = defaultdict(Fraction)
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            acc[_merge(ma, mb)] += ca * cb
    return HopfElement(a.theory, acc)


def counit(x: HopfElement) -> Fraction:
    return x.terms.get(UNIT, Fraction(0))


@lru_cache(maxsize=None)
def _generator_coproduct(theory: TheorySpec, key: str) -> tuple[tuple[Monomial, Monomial, Fraction], ...]:
    g = graph_of(theory, key)
    bad = offending_subgraphs(g)
    if bad:
        raise IllDefinedError(g, bad[0][1])
    terms: dict[tuple[Monomial, Monomial], Fraction] = defaultdict(Fraction)
    terms[((key,), UNIT)] += 1
    for sel in divergent_subgraphs(g):
        if sel.is_full:
            continue
        q = contract(g, sel)
        terms[(sel.keys, (q.key,))] += 1
    return tuple((a, b, c) for (a, b), c in sorted(terms.items()))


def coproduct_generator(theory: TheorySpec, key: str) -> TensorElement:
    """Sum over divergent selections of subgraph (x) quotient, with graph (x) unit always present."""
    return TensorElement(theory, {(a, b): c for a, b, c in _generator_coproduct(theory, key)})


def _monomial_coproduct(theory: TheorySpec, m: Monomial) -> TensorElement:
    out = TensorElement(theory, {(UNIT, UNIT): 1})
    for key in m:
        out = out * coproduct_generator(theory, key)
    return out


def coproduct(x: HopfElement) -> TensorElement:
    acc: dict = defaultdict(Fraction)
    for m, c in x.terms.items():
        for k, v in _monomial_coproduct(x.theory, m).terms.items():
            acc[k] += c * v
    return TensorElement(x.theory, acc)


def reduced_coproduct(x: HopfElement) -> TensorElement:
    """Coproduct minus the unit-side terms."""
    t = coproduct(x)
    return TensorElement(x.theory, {(a, b): c for (a, b), c in t.terms.items() if a and b})


@lru_cache(maxsize=None)
def _antipode_generator(theory: TheorySpec, key: str) -> tuple[tuple[Monomial, Fraction], ...]:
    acc: dict[Monomial, Fraction] = defaultdict(Fraction)
    acc[(key,)] -= 1
    for a, b, c in _generator_coproduct(theory, key):
        if not a or not b:
            continue
        sa = antipode(HopfElement(theory, {a: 1}))
        for m, v in sa.terms.items():
            acc[_merge(m, b)] -= c * v
    return tuple((m, v) for m, v in sorted(acc.items()) if v)


def antipode(x: HopfElement) -> HopfElement:
    """Recursive antipode, memoized per generator and extended multiplicatively."""
    out = HopfElement.zero(x.theory)
    for m, c in x.terms.items():
        term = HopfElement.unit(x.theory) * c
        for key in m:
            term = product(term, HopfElement(x.theory, dict(_antipode_generator(x.theory, key))))
        out = out + term
    return out


# projections and gradings


@lru_cache(maxsize=None)
def _omega(theory: TheorySpec, key: str) -> int:
    return omega(graph_of(theory, key))


def is_divergent(theory: TheorySpec, key: str) -> bool:
    return _omega(theory, key) >= 0


def divergent_projection(x: HopfElement) -> HopfElement:
    """Keep the summands all of whose components are superficially divergent."""
    return HopfElement(x.theory, {m: c for m, c in x.terms.items() if all(is_divergent(x.theory, k) for k in m)})


def augmentation_projection(x: HopfElement) -> HopfElement:
    return HopfElement(x.theory, {m: c for m, c in x.terms.items() if m})


@lru_cache(maxsize=None)
def _gradings(theory: TheorySpec, key: str) -> tuple[GradingVector, GradingVector, GradingVector]:
    return gradings(graph_of(theory, key))


_KIND_INDEX = {GradingKind.LOOP: 0, GradingKind.RESIDUE: 1, GradingKind.COUPLING: 2}


def grading_length(theory: TheorySpec, kind: GradingKind) -> int:
    return {GradingKind.LOOP: 1, GradingKind.RESIDUE: len(theory.vertices),
            GradingKind.COUPLING: len(theory.couplings)}[kind]


def monomial_grading(theory: TheorySpec, m: Monomial, kind: GradingKind) -> tuple[int, ...]:
    out = [0] * grading_length(theory, kind)
    for key in m:
        for i, v in enumerate(_gradings(theory, key)[_KIND_INDEX[kind]].coords):
            out[i] += v
    return tuple(out)


def restrict(x: HopfElement, kind: GradingKind, value: "GradingVector | Sequence[int] | int") -> HopfElement:
    """Keep the summands of total grading ``value``."""
    if isinstance(value, GradingVector):
        if value.kind is not kind:
            raise ValueError("grading kind mismatch")
        value = value.coords
    elif isinstance(value, int):
        value = (value,)
    value = tuple(value)
    if len(value) != grading_length(x.theory, kind):
        raise ValueError(f"grading vector must have length {grading_length(x.theory, kind)}")
    return HopfElement(x.theory, {m: c for m, c in x.terms.items() if monomial_grading(x.theory, m, kind) == value})


# maps


def identity(x: HopfElement) -> HopfElement:
    return x


def unit_counit(x: HopfElement) -> HopfElement:
    return HopfElement.unit(x.theory) * counit(x)


def convolution(f: Callable[[HopfElement], object], g: Callable[[HopfElement], object], x: HopfElement):
    """(f * g)(x) = m (f (x) g) coproduct(x) for maps into a common commutative algebra."""
    total = None
    for (a, b), c in coproduct(x):
        fa = f(HopfElement(x.theory, {a: 1}))
        gb = g(HopfElement(x.theory, {b: 1}))
        try:
            term = fa * gb * c
        except TypeError as exc:
            raise TypeError("convolution factors live in different algebras") from exc
        total = term if total is None else total + term
    if total is None:
        return HopfElement.zero(x.theory)
    return total


# axiom checks


def _triple(t: TensorElement, left: bool) -> dict[tuple[Monomial, Monomial, Monomial], Fraction]:
    acc: dict = defaultdict(Fraction)
    for (a, b), c in t.terms.items():
        side = coproduct(HopfElement(t.theory, {a if left else b: 1}))
        for (x, y), v in side.terms.items():
            acc[(x, y, b) if left else (a, x, y)] += c * v
    return {k: v for k, v in acc.items() if v}


def check_coassociativity(x: HopfElement) -> bool:
    t = coproduct(x)
    return _triple(t, True) == _triple(t, False)


def check_counit(x: HopfElement) -> bool:
    t = coproduct(x)
    left = HopfElement(x.theory, [(b, c) for (a, b), c in t.terms.items() if not a])
    right = HopfElement(x.theory, [(a, c) for (a, b), c in t.terms.items() if not b])
    return left == x and right == x


def check_antipode(x: HopfElement) -> bool:
    want = unit_counit(x)
    return convolution(antipode, identity, x) == want and convolution(identity, antipode, x) == want


def check_involution(x: HopfElement) -> bool:
    return antipode(antipode(x)) == x


def check_grading_compatibility(theory: TheorySpec, key: str) -> bool:
    for kind in GradingKind:
        total = monomial_grading(theory, (key,), kind)
        for (a, b), _ in coproduct_generator(theory, key):
            ga, gb = monomial_grading(theory, a, kind), monomial_grading(theory, b, kind)
            if tuple(p + q for p, q in zip(ga, gb)) != total:
                return False
    return True


def check_divergent_cographs(theory: TheorySpec, key: str) -> bool:
    """All right factors of the coproduct of a divergent generator are divergent."""
    if not is_divergent(theory, key):
        return True
    return all(all(is_divergent(theory, k) for k in b) for (a, b), _ in coproduct_generator(theory, key))


def verify_hopf_axioms(theory: TheorySpec, keys: Iterable[str]) -> dict[str, CheckResult]:
    """Coassociativity, counit, antipode, involution and grading checks on generators."""
    checks: dict[str, Callable[[str], bool]] = {
        "coassociativity": lambda k: check_coassociativity(HopfElement(theory, {(k,): 1})),
        "counit": lambda k: check_counit(HopfElement(theory, {(k,): 1})),
        "antipode": lambda k: check_antipode(HopfElement(theory, {(k,): 1})),
        "involution": lambda k: check_involution(HopfElement(theory, {(k,): 1})),
        "gradings": lambda k: check_grading_compatibility(theory, k),
    }
    keys = list(keys)
    out = {}
    for name, fn in checks.items():
        bad = [k for k in keys if not fn(k)]
        out[name] = CheckResult(not bad, bad)
    return out
