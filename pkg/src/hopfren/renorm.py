"""Toy Birkhoff renormalization: characters into truncated Laurent series in a regulator.

Counterterms follow the twisted-antipode recursion over the coproduct, and
renormalized values are the convolution of counterterm and character.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .graph import GradingKind, loop_number, symmetry_factor
from .hopf import (
    UNIT,
    HopfElement,
    Monomial,
    _generator_coproduct,
    coproduct,
    graph_of,
    monomial_grading,
    restrict,
)
from .qgs import QgsContext, _gradings_up_to, _lower
from .series import charge_power, green_function
from .theory import QgsRelation, TheorySpec

DEFAULT_ORDER_CAP = 2


class PoleOverflowError(ArithmeticError):
    pass


class ResidualPoleError(ArithmeticError):
    pass


# Laurent series


@dataclass(frozen=True)
class LaurentSeries:
    """Exact coefficients of eps^k for -pole_cap <= k <= order_cap.

    ``exact`` means every coefficient above ``order_cap`` is known to vanish;
    otherwise they are unknown and products lose precision accordingly.
    """

    coeffs: Mapping[int, Fraction]
    pole_cap: int
    order_cap: int = DEFAULT_ORDER_CAP
    exact: bool = True

    def __post_init__(self) -> None:
        clean = {}
        exact = self.exact
        for k, c in self.coeffs.items():
            c = Fraction(c)
            if not c:
                continue
            if k < -self.pole_cap:
                raise PoleOverflowError(f"eps^{k} exceeds pole cap {self.pole_cap}")
            if k > self.order_cap:
                exact = False
                continue
            clean[k] = c
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))
        object.__setattr__(self, "exact", exact)

    @classmethod
    def const(cls, c, pole_cap: int = 0, order_cap: int = DEFAULT_ORDER_CAP) -> "LaurentSeries":
        return cls({0: Fraction(c)}, pole_cap, order_cap)

    @classmethod
    def monomial(cls, c, k: int, pole_cap: int, order_cap: int = DEFAULT_ORDER_CAP) -> "LaurentSeries":
        return cls({k: Fraction(c)}, pole_cap, order_cap)

    def __getitem__(self, k: int) -> Fraction:
        if k > self.order_cap and not self.exact:
            raise IndexError(f"coefficient of eps^{k} is beyond the known order {self.order_cap}")
        return self.coeffs.get(k, Fraction(0))

    def _window(self, other: "LaurentSeries") -> tuple[int, int]:
        return max(self.pole_cap, other.pole_cap), min(self.order_cap, other.order_cap)

    def _known(self) -> float:
        return float("inf") if self.exact else self.order_cap

    def __add__(self, other) -> "LaurentSeries":
        if not isinstance(other, LaurentSeries):
            other = LaurentSeries.const(other, self.pole_cap, self.order_cap)
        p, o = self._window(other)
        known = min(self._known(), other._known())
        top = o if known > o else int(known)
        acc: dict[int, Fraction] = {}
        dropped = False
        for src in (self.coeffs, other.coeffs):
            for k, c in src.items():
                if k > top:
                    dropped = True
                    continue
                acc[k] = acc.get(k, Fraction(0)) + c
        return LaurentSeries(acc, p, top, known == float("inf") and not dropped)

    __radd__ = __add__

    def __neg__(self) -> "LaurentSeries":
        return LaurentSeries({k: -c for k, c in self.coeffs.items()}, self.pole_cap, self.order_cap, self.exact)

    def __sub__(self, other) -> "LaurentSeries":
        return self + (-other if isinstance(other, LaurentSeries) else -Fraction(other))

    def __rsub__(self, other) -> "LaurentSeries":
        return (-self) + other

    def __mul__(self, other) -> "LaurentSeries":
        if not isinstance(other, LaurentSeries):
            c = Fraction(other)
            return LaurentSeries({k: c * v for k, v in self.coeffs.items()}, self.pole_cap, self.order_cap, self.exact)
        p, o = self._window(other)
        low_a = min(self.coeffs, default=0)
        low_b = min(other.coeffs, default=0)
        known = min(self._known() + low_b, other._known() + low_a)
        top = o if known > o else int(known)
        acc: dict[int, Fraction] = {}
        dropped = False
        for i, a in self.coeffs.items():
            for j, b in other.coeffs.items():
                if i + j > top:
                    dropped = True
                    continue
                acc[i + j] = acc.get(i + j, Fraction(0)) + a * b
        return LaurentSeries(acc, p, top, known == float("inf") and not dropped)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = LaurentSeries.const(other, self.pole_cap, self.order_cap)
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        o = min(self.order_cap, other.order_cap)
        return {k: c for k, c in self.coeffs.items() if k <= o} == {k: c for k, c in other.coeffs.items() if k <= o}

    def __hash__(self) -> int:
        return hash(tuple(self.coeffs.items()))

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def pole_part(self) -> "LaurentSeries":
        return LaurentSeries({k: c for k, c in self.coeffs.items() if k < 0}, self.pole_cap, self.order_cap)

    def is_pole_free(self) -> bool:
        return all(k >= 0 for k in self.coeffs)

    def is_polar(self) -> bool:
        return all(k < 0 for k in self.coeffs)

    def value_at_zero(self) -> Fraction:
        if not self.is_pole_free():
            raise ResidualPoleError(f"series has poles: {self.to_text()}")
        return self[0]

    def to_text(self) -> str:
        if not self.coeffs:
            return "0"
        return "\n".join(f"{c} * eps^{k}" for k, c in self.coeffs.items())

    def to_json(self) -> dict:
        return {"pole_cap": self.pole_cap, "order_cap": self.order_cap, "exact": self.exact,
                "coefficients": {str(k): str(c) for k, c in self.coeffs.items()}}

    def __repr__(self) -> str:
        return "LaurentSeries(" + " + ".join(f"{c}*eps^{k}" for k, c in self.coeffs.items()) + ")"


# schemes


class Scheme:
    name = "scheme"

    def __call__(self, x: LaurentSeries) -> LaurentSeries:
        raise NotImplementedError


class MinimalSubtraction(Scheme):
    """Keeps exactly the strictly negative powers."""

    name = "MS"

    def __call__(self, x: LaurentSeries) -> LaurentSeries:
        if not x.exact and x.order_cap < -1:
            raise PoleOverflowError("pole part is not fully known")
        return x.pole_part()


class OnShellToy(Scheme):
    """Pole part plus the constant term, so renormalized values vanish at eps = 0."""

    name = "OnShellToy"

    def __call__(self, x: LaurentSeries) -> LaurentSeries:
        if not x.exact and x.order_cap < 0:
            raise PoleOverflowError("constant term is not known")
        return LaurentSeries({k: c for k, c in x.coeffs.items() if k <= 0}, x.pole_cap, x.order_cap)


SCHEMES: dict[str, Callable[[], Scheme]] = {"MS": MinimalSubtraction, "OnShellToy": OnShellToy}


def apply_scheme(s: Scheme, x: LaurentSeries) -> LaurentSeries:
    return s(x)


def rota_baxter_defect(s: Scheme, f: LaurentSeries, g: LaurentSeries) -> LaurentSeries:
    """R(f)R(g) + R(fg) - R(R(f)g + fR(g)); zero for a weight -1 Rota-Baxter map."""
    return s(f) * s(g) + s(f * g) - s(s(f) * g + f * s(g))


# characters


@dataclass
class Character:
    """Algebra morphism fixed by its values on generators."""

    theory: TheorySpec
    generator_value: Callable[[str], LaurentSeries]
    pole_cap: int
    order_cap: int = DEFAULT_ORDER_CAP
    name: str = "character"
    _memo: dict = field(default_factory=dict, repr=False)

    def one(self) -> LaurentSeries:
        return LaurentSeries.const(1, self.pole_cap, self.order_cap)

    def zero(self) -> LaurentSeries:
        return LaurentSeries({}, self.pole_cap, self.order_cap)

    def of_key(self, key: str) -> LaurentSeries:
        if key not in self._memo:
            self._memo[key] = self.generator_value(key)
        return self._memo[key]

    def of_monomial(self, m: Monomial) -> LaurentSeries:
        out = self.one()
        for k in m:
            out = out * self.of_key(k)
        return out

    def __call__(self, x: HopfElement) -> LaurentSeries:
        out = self.zero()
        for m, c in x.terms.items():
            out = out + self.of_monomial(m) * c
        return out


def _standard_value(theory: TheorySpec, pole_cap: int, order_cap: int) -> Callable[[str], LaurentSeries]:
    def value(key: str) -> LaurentSeries:
        g = graph_of(theory, key)
        lam = loop_number(g)
        return LaurentSeries({-lam: Fraction(1, symmetry_factor(g))}, pole_cap, order_cap) + lam

    return value


def _seeded_value(theory: TheorySpec, seed, pole_cap: int, order_cap: int) -> Callable[[str], LaurentSeries]:
    def value(key: str) -> LaurentSeries:
        rng = random.Random(f"{seed}:{key}")
        lam = loop_number(graph_of(theory, key))
        coeffs = {k: Fraction(rng.randint(-6, 6), rng.randint(1, 4)) for k in range(-lam, 1)}
        coeffs[-lam] = coeffs[-lam] or Fraction(1)
        return LaurentSeries(coeffs, pole_cap, order_cap)

    return value


def standard_character(theory: TheorySpec, pole_cap: int = 3, order_cap: int = DEFAULT_ORDER_CAP) -> Character:
    """eps^(-loops)/Sym + loops on every generator."""
    return Character(theory, _standard_value(theory, pole_cap, order_cap), pole_cap, order_cap, "standard")


def seeded_character(theory: TheorySpec, seed, pole_cap: int = 3, order_cap: int = DEFAULT_ORDER_CAP) -> Character:
    """Deterministic pseudo-random Laurent polynomials with poles up to the loop number."""
    return Character(theory, _seeded_value(theory, seed, pole_cap, order_cap), pole_cap, order_cap, f"seeded:{seed}")


def qgs_symmetric_character(theory: TheorySpec, relations: Iterable[QgsRelation] | None = None, cap: int = 2,
                            seed=0, base: Character | None = None, pole_cap: int | None = None,
                            order_cap: int = DEFAULT_ORDER_CAP) -> Character:
    """A character vanishing on every ideal generator up to ``cap`` loops.

    Graphs keep the values of ``base`` (seeded by default) except one pivot
    graph per independent generator.  Each generator is linear in graphs of
    its own coupling grading, so the pivot value is solved slice by slice,
    lowest grading first.  The ideal is generated by these elements, hence
    the character factors through the quotient within the cap.
    """
    pole_cap = cap if pole_cap is None else pole_cap
    ctx = QgsContext.of(theory, relations, cap)
    base = base or seeded_character(theory, seed, pole_cap, order_cap)
    fixed: dict[str, LaurentSeries] = {}
    pivots: set[str] = set()
    grades: dict[tuple[int, ...], list[HopfElement]] = {}
    top = [0] * len(theory.couplings)
    for rel in ctx.relations:
        for side in ((rel.v, rel.m), (rel.w, rel.n)):
            for m in charge_power(theory, side, cap).element.terms:
                top = [max(a, b) for a, b in zip(top, monomial_grading(theory, m, GradingKind.COUPLING))]
    for C in sorted(c for c in _lower(tuple(top)) if any(c)):
        gens = [g for rel in ctx.relations if (g := ctx.generator(rel, C))]
        if gens:
            grades[C] = gens

    def current(key: str) -> LaurentSeries:
        return fixed[key] if key in fixed else base.of_key(key)

    def evaluate(x: HopfElement) -> LaurentSeries:
        out = LaurentSeries({}, pole_cap, order_cap)
        for m, c in x.terms.items():
            v = LaurentSeries.const(1, pole_cap, order_cap)
            for k in m:
                v = v * current(k)
            out = out + v * c
        return out

    for C in sorted(grades, key=lambda c: (sum(c), c)):
        for gen in grades[C]:
            linear = {m[0]: c for m, c in gen.terms.items() if len(m) == 1 and m[0] not in pivots}
            if not linear:
                if evaluate(gen):
                    raise ValueError(f"generator at coupling {C} has no free linear term")
                continue
            pivot = max(linear)
            rest = HopfElement(theory, {m: c for m, c in gen.terms.items() if m != (pivot,)})
            fixed[pivot] = -evaluate(rest) * (1 / linear[pivot])
            pivots.add(pivot)

    def value(key: str) -> LaurentSeries:
        return current(key)

    return Character(theory, value, pole_cap, order_cap, f"qgs_symmetric:{seed}")


def toy_character(theory: TheorySpec, profile: str = "standard", **kw) -> Character:
    if profile == "standard":
        return standard_character(theory, **kw)
    if profile == "qgs_symmetric":
        return qgs_symmetric_character(theory, **kw)
    if profile == "seeded":
        return seeded_character(theory, **kw)
    raise ValueError(f"unknown character profile {profile!r}")


# Birkhoff recursion


class Renormalizer:
    """Counterterm and renormalized values for one character and scheme, memoized per generator."""

    def __init__(self, phi: Character, scheme: Scheme):
        self.phi = phi
        self.scheme = scheme
        self._ct: dict[str, LaurentSeries] = {}

    def counterterm_key(self, key: str) -> LaurentSeries:
        if key not in self._ct:
            th = self.phi.theory
            acc = self.phi.of_key(key)
            for left, right, c in _generator_coproduct(th, key):
                if left == UNIT or right == UNIT:
                    continue
                acc = acc + self.counterterm_monomial(left) * self.phi.of_monomial(right) * c
            self._ct[key] = -self.scheme(acc)
        return self._ct[key]

    def counterterm_monomial(self, m: Monomial) -> LaurentSeries:
        out = self.phi.one()
        for k in m:
            out = out * self.counterterm_key(k)
        return out

    def counterterm_recursive(self, m: Monomial) -> LaurentSeries:
        """Twisted-antipode recursion on a whole monomial, for testing multiplicativity."""
        if m == UNIT:
            return self.phi.one()
        acc = self.phi.of_monomial(m)
        for (left, right), c in coproduct(HopfElement(self.phi.theory, {m: 1})):
            if left == UNIT or right == UNIT:
                continue
            acc = acc + self.counterterm_monomial(left) * self.phi.of_monomial(right) * c
        return -self.scheme(acc)

    def counterterm(self, x: HopfElement) -> LaurentSeries:
        out = self.phi.zero()
        for m, c in x.terms.items():
            out = out + self.counterterm_monomial(m) * c
        return out

    def convolution(self, x: HopfElement) -> LaurentSeries:
        out = self.phi.zero()
        for (left, right), c in coproduct(x):
            out = out + self.counterterm_monomial(left) * self.phi.of_monomial(right) * c
        return out

    def renormalized(self, x: HopfElement, check: bool = True) -> tuple[LaurentSeries, Fraction | None]:
        s = self.convolution(x)
        if s.is_pole_free():
            return s, s[0]
        if check:
            raise ResidualPoleError(f"renormalized value keeps poles: {s.to_text()}")
        return s, None


def counterterm(phi: Character, s: Scheme, x: HopfElement) -> LaurentSeries:
    return Renormalizer(phi, s).counterterm(x)


def renormalized(phi: Character, s: Scheme, x: HopfElement) -> tuple[LaurentSeries, Fraction | None]:
    return Renormalizer(phi, s).renormalized(x)


def z_factor(phi: Character, s: Scheme, theory: TheorySpec, r, cap: int) -> LaurentSeries:
    """Counterterm of the truncated Green's function of ``r``."""
    return Renormalizer(phi, s).counterterm(green_function(theory, r, cap).element)


# criteria for quantum gauge symmetries


@dataclass(frozen=True)
class SliceConditions:
    coupling: tuple[int, ...]
    cond1: bool
    cond2: bool
    cond3: bool

    @property
    def any(self) -> bool:
        return self.cond1 or self.cond2 or self.cond3


@dataclass(frozen=True)
class CriteriaReport:
    well_defined: bool
    slices: tuple[SliceConditions, ...]
    lhs: LaurentSeries
    rhs: LaurentSeries

    @property
    def conditions_hold(self) -> bool:
        return all(s.any for s in self.slices)

    @property
    def implication_ok(self) -> bool:
        return self.well_defined or not self.conditions_hold

    def to_json(self) -> dict:
        return {"well_defined": self.well_defined, "conditions_hold": self.conditions_hold,
                "implication_ok": self.implication_ok,
                "slices": [{"c": list(s.coupling), "cond1": s.cond1, "cond2": s.cond2, "cond3": s.cond3}
                           for s in self.slices],
                "lhs": self.lhs.to_json(), "rhs": self.rhs.to_json()}


def _slice_conditions(ren: Renormalizer, ctx: QgsContext, rel: QgsRelation, C: tuple[int, ...], cap: int,
                      third: Callable[[HopfElement], bool]) -> list[SliceConditions]:
    theory = ctx.theory
    qv = charge_power(theory, (rel.v, rel.m), cap).bar()
    qw = charge_power(theory, (rel.w, rel.n), cap).bar()
    out = []
    for c in _lower(C):
        a = restrict(qv.element, GradingKind.COUPLING, c)
        b = restrict(qw.element, GradingKind.COUPLING, c)
        rest = tuple(x - y for x, y in zip(C, c))
        cond2 = not a and not b
        reps = []
        for side, part in ((qv, a), (qw, b)):
            for m in part.terms:
                rvec = monomial_grading(theory, m, GradingKind.RESIDUE)
                left = (side * charge_power(theory, rvec, cap).bar()).element
                reps.append(restrict(left, GradingKind.COUPLING, rest))
        cond1 = bool(reps) and all(ctx.is_member(x) for x in reps)
        if not any(c):
            cond1 = not restrict(qv.element, GradingKind.COUPLING, C) and not restrict(qw.element, GradingKind.COUPLING, C)
        out.append(SliceConditions(c, cond1, cond2, third(a - b)))
    return out


def check_counterterm_criteria(phi: Character, s: Scheme, theory: TheorySpec, rel: QgsRelation, C: Sequence[int],
                               cap: int, ctx: QgsContext | None = None) -> CriteriaReport:
    """Counterterm equality on both sides of ``rel`` at coupling ``C`` with the per-slice conditions."""
    ctx = ctx or QgsContext.of(theory, [rel], cap)
    ren = Renormalizer(phi, s)
    C = tuple(C)
    lhs = ren.counterterm(restrict(charge_power(theory, (rel.v, rel.m), cap).bar().element, GradingKind.COUPLING, C))
    rhs = ren.counterterm(restrict(charge_power(theory, (rel.w, rel.n), cap).bar().element, GradingKind.COUPLING, C))

    def third(diff: HopfElement) -> bool:
        aug = HopfElement(theory, {m: c for m, c in diff.terms.items() if m != UNIT})
        return not s(phi(aug))

    return CriteriaReport(lhs == rhs, tuple(_slice_conditions(ren, ctx, rel, C, cap, third)), lhs, rhs)


def check_renormalized_criteria(phi: Character, s: Scheme, theory: TheorySpec, rel: QgsRelation, C: Sequence[int],
                                cap: int, ctx: QgsContext | None = None) -> CriteriaReport:
    """Renormalized equality on both sides of ``rel``; the third condition uses the bare character."""
    ctx = ctx or QgsContext.of(theory, [rel], cap)
    ren = Renormalizer(phi, s)
    C = tuple(C)
    lhs = ren.convolution(restrict(charge_power(theory, (rel.v, rel.m), cap).bar().element, GradingKind.COUPLING, C))
    rhs = ren.convolution(restrict(charge_power(theory, (rel.w, rel.n), cap).bar().element, GradingKind.COUPLING, C))

    def third(diff: HopfElement) -> bool:
        return not phi(diff)

    ok = lhs.pole_part() == rhs.pole_part() and lhs[0] == rhs[0]
    return CriteriaReport(ok, tuple(_slice_conditions(ren, ctx, rel, C, cap, third)), lhs, rhs)


def criteria_sweep(phi: Character, s: Scheme, theory: TheorySpec, C_max, cap: int,
                   relations: Iterable[QgsRelation] | None = None, renormalized_values: bool = False) -> list[tuple]:
    """Reports for every relation and nonzero coupling grading up to ``C_max``."""
    rels = tuple(theory.qgs_relations if relations is None else relations)
    ctx = QgsContext.of(theory, rels, cap)
    check = check_renormalized_criteria if renormalized_values else check_counterterm_criteria
    return [(rel, C, check(phi, s, theory, rel, C, cap, ctx)) for rel in rels for C in _gradings_up_to(theory, C_max)]
