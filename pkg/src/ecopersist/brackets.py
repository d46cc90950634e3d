"""Exact Lie-bracket algebra and Hormander rank checks for vector fields.

Fields are polynomial or rational (single shared denominator) vectors on R^n
with Fraction coefficients; brackets, determinants, coordinate-power
factorizations and rank computations are all exact.  The bracket convention is

    [Y, Z] = DZ . Y - DY . Z,

with Jacobians computed symbolically.  Rational fields are stored as
``num / den**power`` with the numerator a polynomial vector; the bracket of
two fields over the same denominator stays in that form with the power
increased by one, so the whole bracket family of a model lives over a single
denominator polynomial and determinants can be compared after clearing it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .poly import Poly, poly_matrix_det

__all__ = [
    "PolyVectorField",
    "RationalVectorField",
    "RationalDet",
    "BracketFamily",
    "HormanderResult",
    "lie_bracket",
    "det_polynomial",
    "factor_out_coordinate_power",
    "coefficient_of",
    "hormander_check",
    "exact_rank",
]


@dataclass(frozen=True)
class PolyVectorField:
    """Polynomial vector field on R^n; one component polynomial per variable."""

    components: tuple[Poly, ...]
    label: str = field(default="X", compare=False)

    def __post_init__(self):
        n = len(self.components)
        if n == 0 or any(p.nvars != n for p in self.components):
            raise ValueError("need n components in n variables")

    @property
    def nvars(self) -> int:
        return len(self.components)

    def evaluate(self, point: Sequence) -> tuple[Fraction, ...]:
        return tuple(p.evaluate(point) for p in self.components)

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.components)

    def __str__(self) -> str:
        body = ", ".join(str(p) for p in self.components)
        return f"{self.label} = ({body})"


@dataclass(frozen=True)
class RationalVectorField:
    """Vector field ``num / den**power`` with polynomial numerator components."""

    num: tuple[Poly, ...]
    den: Poly
    power: int
    label: str = field(default="X", compare=False)

    def __post_init__(self):
        n = len(self.num)
        if n == 0 or any(p.nvars != n for p in self.num):
            raise ValueError("need n components in n variables")
        if self.den.nvars != n:
            raise ValueError("denominator variable count mismatch")
        if self.den.is_zero():
            raise ZeroDivisionError("zero denominator")
        if self.power < 0:
            raise ValueError("negative denominator power")

    @property
    def nvars(self) -> int:
        return len(self.num)

    def reduce(self) -> "RationalVectorField":
        """Cancel the denominator out of the numerator as far as possible."""
        num, power = list(self.num), self.power
        while power > 0:
            quotients = [p.try_divide(self.den) for p in num]
            if any(q is None for q in quotients):
                break
            num = quotients
            power -= 1
        return RationalVectorField(tuple(num), self.den, power, self.label)

    def evaluate(self, point: Sequence) -> tuple[Fraction, ...]:
        d = self.den.evaluate(point)
        if d == 0:
            raise ZeroDivisionError(f"denominator vanishes at {point}")
        scale = Fraction(1) / d**self.power
        return tuple(p.evaluate(point) * scale for p in self.num)

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.num)

    def same_denominator(self, other: "RationalVectorField") -> bool:
        return self.den == other.den


def as_rational(f, den: Poly | None = None) -> RationalVectorField:
    """View a field as rational; polynomial fields get power zero."""
    if isinstance(f, RationalVectorField):
        return f
    if isinstance(f, PolyVectorField):
        d = den if den is not None else Poly.constant(f.nvars, 1)
        return RationalVectorField(f.components, d, 0, f.label)
    raise TypeError(f"not a vector field: {f!r}")


def _poly_bracket(y: PolyVectorField, z: PolyVectorField, label: str) -> PolyVectorField:
    n = y.nvars
    comps = []
    for i in range(n):
        acc = Poly.zero(n)
        for k in range(n):
            acc = acc + z.components[i].diff(k) * y.components[k]
            acc = acc - y.components[i].diff(k) * z.components[k]
        comps.append(acc)
    return PolyVectorField(tuple(comps), label)


def lie_bracket(y, z, label: str | None = None):
    """Lie bracket [y, z] = Dz.y - Dy.z, exactly.

    Two polynomial fields give a polynomial field.  Rational fields must share
    their denominator ``d``; with ``y = u/d**p`` and ``z = v/d**q`` the result
    is ``(d*(Dv.u - Du.v) + p*(grad d . v)*u - q*(grad d . u)*v) / d**(p+q+1)``.
    """
    name = label if label is not None else f"[{getattr(y, 'label', 'Y')},{getattr(z, 'label', 'Z')}]"
    if isinstance(y, PolyVectorField) and isinstance(z, PolyVectorField):
        return _poly_bracket(y, z, name)
    # promote to a common rational representation
    if isinstance(y, RationalVectorField):
        den = y.den
    elif isinstance(z, RationalVectorField):
        den = z.den
    else:  # pragma: no cover - handled by the polynomial branch
        raise TypeError("unsupported field types")
    ry, rz = as_rational(y, den), as_rational(z, den)
    if not ry.same_denominator(rz):
        raise ValueError("rational fields must share a denominator to be bracketed")
    n = ry.nvars
    u, v, d, p, q = ry.num, rz.num, den, ry.power, rz.power
    grad_d = [d.diff(k) for k in range(n)]
    grad_d_dot_u = sum((grad_d[k] * u[k] for k in range(n)), Poly.zero(n))
    grad_d_dot_v = sum((grad_d[k] * v[k] for k in range(n)), Poly.zero(n))
    comps = []
    for i in range(n):
        core = Poly.zero(n)
        for k in range(n):
            core = core + v[i].diff(k) * u[k] - u[i].diff(k) * v[k]
        num_i = d * core + p * grad_d_dot_v * u[i] - q * grad_d_dot_u * v[i]
        comps.append(num_i)
    return RationalVectorField(tuple(comps), d, p + q + 1, name)


@dataclass(frozen=True)
class RationalDet:
    """Determinant of rational fields as ``num / den**power``."""

    num: Poly
    den: Poly
    power: int

    def reduce(self) -> "RationalDet":
        num, power = self.num, self.power
        while power > 0:
            q = num.try_divide(self.den)
            if q is None:
                break
            num, power = q, power - 1
        return RationalDet(num, self.den, power)

    def equals_rational(self, other: "RationalDet") -> bool:
        """Equality as rational functions, by cross multiplication."""
        if self.den != other.den:
            raise ValueError("determinants live over different denominators")
        return self.num * self.den**other.power == other.num * self.den**self.power


def det_polynomial(fields: Sequence) -> Poly | RationalDet:
    """Exact determinant of the matrix whose columns are the given fields.

    Returns a :class:`Poly` when every field is polynomial, otherwise a
    :class:`RationalDet` over the shared denominator.
    """
    n = len(fields)
    if n == 0:
        raise ValueError("no fields given")
    if any(f.nvars != n for f in fields):
        raise ValueError("need n fields on R^n")
    if all(isinstance(f, PolyVectorField) for f in fields):
        rows = [[f.components[i] for f in fields] for i in range(n)]
        return poly_matrix_det(rows)
    den = next(f.den for f in fields if isinstance(f, RationalVectorField))
    rats = [as_rational(f, den) for f in fields]
    if any(not r.same_denominator(rats[0]) for r in rats):
        raise ValueError("rational fields must share a denominator")
    rows = [[r.num[i] for r in rats] for i in range(n)]
    return RationalDet(poly_matrix_det(rows), den, sum(r.power for r in rats))


def factor_out_coordinate_power(p: Poly) -> tuple[int, Poly]:
    """Largest k with ``(x1*...*xn)**k`` dividing p, and the exact quotient."""
    if p.is_zero():
        return 0, p
    k = min(min(e) for e in p.terms)
    if k == 0:
        return 0, p
    return k, p.divide_by_monomial((k,) * p.nvars)


def coefficient_of(p: Poly, exps: Sequence[int]) -> Fraction:
    """Coefficient of the monomial with the given exponent tuple."""
    return p.coefficient(exps)


def exact_rank(vectors: Sequence[Sequence[Fraction]]) -> int:
    """Rank of a list of rational vectors via fraction-exact elimination."""
    basis: list[list[Fraction]] = []
    for vec in vectors:
        basis = _try_extend_basis(basis, [Fraction(x) for x in vec])[0]
    return len(basis)


def _try_extend_basis(
    basis: list[list[Fraction]], vec: list[Fraction]
) -> tuple[list[list[Fraction]], bool]:
    """Reduce ``vec`` against ``basis`` rows; append if independent."""
    v = list(vec)
    for row in basis:
        pivot = next(i for i, x in enumerate(row) if x != 0)
        if v[pivot] != 0:
            factor = v[pivot] / row[pivot]
            v = [a - factor * b for a, b in zip(v, row)]
    if any(x != 0 for x in v):
        return basis + [v], True
    return basis, False


@dataclass
class BracketFamily:
    """Iterated Lie-bracket closure of a generator set, built breadth first.

    Growth is deterministic: generators in the given order, then at each depth
    all ordered pairs of existing members in index order.  A candidate bracket
    joins the family only if it is not identically zero, is not a duplicate of
    an existing member, and its value at ``point`` adds a new direction to a
    tracked span (exact linear-independence pruning).  Two spans are tracked:
    the family span over every member's value, and a target span that starts
    from ``seed_vectors`` (when given) and absorbs every accepted bracket;
    growth stops as soon as the target span is full.  The second span is what
    lets a strong Hormander check, whose evaluation set excludes the bare
    drift, drive the growth instead of the family span.
    """

    generators: list
    point: tuple
    max_depth: int = 3
    seed_vectors: list | None = None
    members: list = field(default_factory=list)
    depth_reached: int = 0
    _values: list = field(default_factory=list, repr=False)
    _bracket_values: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.max_depth > 6:
            raise ValueError("max_depth above 6 is not supported")
        seen: set = set()
        family_basis: list[list[Fraction]] = []
        target_basis: list[list[Fraction]] = []
        n_generators = 0
        for g in self.generators:
            g = g.reduce() if isinstance(g, RationalVectorField) else g
            sig = self._signature(g)
            if g.is_zero() or sig in seen:
                continue
            seen.add(sig)
            self.members.append(g)
            n_generators += 1
            val = list(g.evaluate(self.point))
            self._values.append(val)
            family_basis, _ = _try_extend_basis(family_basis, val)
        if self.seed_vectors is None:
            target_basis = [row[:] for row in family_basis]
        else:
            for vec in self.seed_vectors:
                target_basis, _ = _try_extend_basis(target_basis, list(vec))
        n = self.members[0].nvars if self.members else 0
        depth = 0
        frontier_start = 0
        while depth < self.max_depth and len(target_basis) < n:
            depth += 1
            prev_len = len(self.members)
            if frontier_start > prev_len:
                break
            grew_any = False
            for i, j in itertools.product(range(prev_len), repeat=2):
                if i == j:
                    continue
                # at least one operand from the newest generation, to avoid
                # recomputing brackets already tried at earlier depths
                if depth > 1 and i < frontier_start and j < frontier_start:
                    continue
                br = lie_bracket(self.members[i], self.members[j])
                if isinstance(br, RationalVectorField):
                    br = br.reduce()
                sig = self._signature(br)
                if br.is_zero() or sig in seen:
                    continue
                val = list(br.evaluate(self.point))
                target_basis, grew_target = _try_extend_basis(target_basis, val)
                family_basis, grew_family = _try_extend_basis(family_basis, val)
                if not (grew_target or grew_family):
                    continue
                seen.add(sig)
                self.members.append(br)
                self._values.append(val)
                self._bracket_values.append((br.label, val))
                grew_any = True
                if len(target_basis) >= n:
                    break
            frontier_start = prev_len
            self.depth_reached = depth
            if not grew_any:
                break

    @staticmethod
    def _signature(f) -> tuple:
        if isinstance(f, RationalVectorField):
            return ("rat", f.num, f.den, f.power)
        return ("poly", f.components)

    def evaluated(self) -> list[tuple[str, list[Fraction]]]:
        return [(m.label, v) for m, v in zip(self.members, self._values)]

    def bracket_values(self) -> list[tuple[str, list[Fraction]]]:
        """Values of the bracket members only (generators excluded)."""
        return list(self._bracket_values)


@dataclass(frozen=True)
class HormanderResult:
    satisfied: bool
    rank: int
    dim: int
    witnesses: tuple[str, ...]
    family_size: int
    depth_reached: int
    mode: str
    point: tuple

    def as_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "rank": self.rank,
            "dim": self.dim,
            "witnesses": list(self.witnesses),
            "family_size": self.family_size,
            "depth_reached": self.depth_reached,
            "mode": self.mode,
            "point": [str(Fraction(p)) for p in self.point],
        }


def hormander_check(
    fields: Sequence,
    point: Sequence,
    mode: str = "strong",
    system: str = "sde",
    max_depth: int = 3,
) -> HormanderResult:
    """Weak or strong Hormander bracket-spanning check at an exact point.

    ``system="sde"`` expects ``fields = [drift, diffusion_1, ..., diffusion_m]``
    in Stratonovich form.  The weak condition asks that the iterated bracket
    family of all the fields spans R^n at the point.  The strong condition
    removes the bare drift: it asks that the diffusion fields together with
    all brackets of family members span.

    ``system="pdmp"`` expects the per-environment fields ``[G_1, ..., G_m]``.
    The weak condition brackets the fields themselves; the strong condition
    evaluates the pairwise differences ``G_i - G_j`` plus all brackets.
    """
    if mode not in ("weak", "strong"):
        raise ValueError(f"unknown mode {mode!r}")
    if system not in ("sde", "pdmp"):
        raise ValueError(f"unknown system {system!r}")
    point = tuple(Fraction(p) for p in point)
    n = fields[0].nvars

    generator_evals = [(f.label, list(f.evaluate(point))) for f in fields]
    if mode == "weak":
        head = generator_evals
    elif system == "sde":
        head = generator_evals[1:]
    else:
        head = []
        for i in range(len(fields)):
            for j in range(i + 1, len(fields)):
                fi, fj = fields[i], fields[j]
                li, lj = fi.label, fj.label
                if isinstance(fi, RationalVectorField) or isinstance(fj, RationalVectorField):
                    den = fi.den if isinstance(fi, RationalVectorField) else fj.den
                    ri, rj = as_rational(fi, den), as_rational(fj, den)
                    top = max(ri.power, rj.power)
                    num = tuple(
                        a * den ** (top - ri.power) - b * den ** (top - rj.power)
                        for a, b in zip(ri.num, rj.num)
                    )
                    diff = RationalVectorField(num, den, top, f"{li}-{lj}")
                else:
                    num = tuple(a - b for a, b in zip(fi.components, fj.components))
                    diff = PolyVectorField(num, f"{li}-{lj}")
                if not diff.is_zero():
                    head.append((diff.label, list(diff.evaluate(point))))

    family = BracketFamily(
        list(fields),
        point,
        max_depth=max_depth,
        seed_vectors=[vec for _, vec in head],
    )
    candidates = head + family.bracket_values()

    basis: list[list[Fraction]] = []
    witnesses: list[str] = []
    rank = 0
    for lab, vec in candidates:
        basis, grew = _try_extend_basis(basis, vec)
        if grew:
            witnesses.append(lab)
            rank += 1
            if rank == n:
                break
    return HormanderResult(
        satisfied=rank == n,
        rank=rank,
        dim=n,
        witnesses=tuple(witnesses),
        family_size=len(family.members),
        depth_reached=family.depth_reached,
        mode=f"{system}-{mode}",
        point=point,
    )
