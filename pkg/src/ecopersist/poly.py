"""Sparse multivariate polynomials with exact rational coefficients.

Everything in the bracket-algebra layer needs exact arithmetic: Lie brackets,
determinants and coordinate-power factorizations must hold as polynomial
identities, not up to floating-point error.  Coefficients are
:class:`fractions.Fraction`, monomials are exponent tuples, and the canonical
term order is graded lexicographic (total degree first, then lexicographic on
the exponent tuple), which fixes both the printed form and the leading term
used by the division algorithm.

Variables are always named ``x1 .. xn``; the text format is a signed sum of
``coeff * x1^a x2^b`` terms, e.g. ``"2 * x1^2 x3 - 1/3 * x2 + 4"``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

__all__ = ["Poly", "parse_poly", "PolyParseError"]

Exponents = tuple[int, ...]


class PolyParseError(ValueError):
    """Raised when polynomial text does not match the monomial-list syntax."""


def _grlex_key(exps: Exponents) -> tuple:
    return (sum(exps), exps)


@dataclass(frozen=True)
class Poly:
    """Immutable sparse polynomial in ``nvars`` variables over the rationals."""

    nvars: int
    terms: Mapping[Exponents, Fraction]

    # -- construction -------------------------------------------------------

    @staticmethod
    def _normalized(nvars: int, raw: dict[Exponents, Fraction]) -> "Poly":
        clean = {e: c for e, c in raw.items() if c != 0}
        return Poly(nvars, clean)

    @classmethod
    def zero(cls, nvars: int) -> "Poly":
        return cls(nvars, {})

    @classmethod
    def constant(cls, nvars: int, value) -> "Poly":
        c = Fraction(value)
        return cls(nvars, {} if c == 0 else {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Poly":
        if not 0 <= index < nvars:
            raise ValueError(f"variable index {index} out of range for {nvars} variables")
        exps = tuple(1 if i == index else 0 for i in range(nvars))
        return cls(nvars, {exps: Fraction(1)})

    @classmethod
    def monomial(cls, nvars: int, exps: Sequence[int], coeff=1) -> "Poly":
        exps = tuple(int(e) for e in exps)
        if len(exps) != nvars or any(e < 0 for e in exps):
            raise ValueError("bad exponent tuple")
        c = Fraction(coeff)
        return cls(nvars, {} if c == 0 else {exps: c})

    # -- basic queries -------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def total_degree(self) -> int:
        """Degree of the polynomial; -1 for the zero polynomial."""
        return max((sum(e) for e in self.terms), default=-1)

    def coefficient(self, exps: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(int(e) for e in exps), Fraction(0))

    def leading_term(self) -> tuple[Exponents, Fraction]:
        """Largest term in graded-lex order; raises on the zero polynomial."""
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        e = max(self.terms, key=_grlex_key)
        return e, self.terms[e]

    def __bool__(self) -> bool:
        return bool(self.terms)

    # -- ring operations -----------------------------------------------------

    def _check_compatible(self, other: "Poly") -> None:
        if self.nvars != other.nvars:
            raise ValueError("polynomials live in different variable counts")

    def __add__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.constant(self.nvars, other)
        self._check_compatible(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, Fraction(0)) + c
        return Poly._normalized(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.constant(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other) -> "Poly":
        return Poly.constant(self.nvars, other) - self

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            c = Fraction(other)
            if c == 0:
                return Poly.zero(self.nvars)
            return Poly(self.nvars, {e: cc * c for e, cc in self.terms.items()})
        self._check_compatible(other)
        out: dict[Exponents, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        return Poly._normalized(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        result = Poly.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self.nvars == other.nvars and dict(self.terms) == dict(other.terms)
        return self == Poly.constant(self.nvars, other)

    def __hash__(self) -> int:
        return hash((self.nvars, frozenset(self.terms.items())))

    # -- calculus and evaluation ----------------------------------------------

    def diff(self, index: int) -> "Poly":
        """Partial derivative with respect to variable ``index`` (0-based)."""
        out: dict[Exponents, Fraction] = {}
        for e, c in self.terms.items():
            k = e[index]
            if k == 0:
                continue
            de = tuple(v - 1 if i == index else v for i, v in enumerate(e))
            out[de] = out.get(de, Fraction(0)) + c * k
        return Poly._normalized(self.nvars, out)

    def evaluate(self, point: Sequence) -> Fraction:
        """Exact evaluation at a rational point."""
        if len(point) != self.nvars:
            raise ValueError("point dimension mismatch")
        pt = [Fraction(p) for p in point]
        total = Fraction(0)
        for e, c in self.terms.items():
            term = c
            for p, k in zip(pt, e):
                if k:
                    term *= p**k
            total += term
        return total

    def evaluate_float(self, point: Sequence[float]) -> float:
        total = 0.0
        for e, c in self.terms.items():
            term = float(c)
            for p, k in zip(point, e):
                if k:
                    term *= float(p) ** k
            total += term
        return total

    # -- divisibility ----------------------------------------------------------

    def divide_by_monomial(self, exps: Sequence[int]) -> "Poly":
        exps = tuple(int(e) for e in exps)
        out: dict[Exponents, Fraction] = {}
        for e, c in self.terms.items():
            if any(a < b for a, b in zip(e, exps)):
                raise ValueError("polynomial is not divisible by that monomial")
            out[tuple(a - b for a, b in zip(e, exps))] = c
        return Poly(self.nvars, out)

    def divmod_single(self, divisor: "Poly") -> tuple["Poly", "Poly"]:
        """Division with remainder by a single divisor.

        A one-element set is a Groebner basis of the principal ideal it
        generates, so the remainder is zero exactly when ``divisor`` divides
        ``self``; that makes this an exact-divisibility test as well.
        """
        self._check_compatible(divisor)
        if divisor.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        lt_e, lt_c = divisor.leading_term()
        quotient: dict[Exponents, Fraction] = {}
        remainder: dict[Exponents, Fraction] = {}
        work = dict(self.terms)
        while work:
            e = max(work, key=_grlex_key)
            c = work.pop(e)
            if c == 0:
                continue
            if all(a >= b for a, b in zip(e, lt_e)):
                qe = tuple(a - b for a, b in zip(e, lt_e))
                qc = c / lt_c
                quotient[qe] = quotient.get(qe, Fraction(0)) + qc
                for de, dc in divisor.terms.items():
                    if de == lt_e:
                        # popping ``c`` above already cancelled this term
                        continue
                    te = tuple(a + b for a, b in zip(qe, de))
                    work[te] = work.get(te, Fraction(0)) - qc * dc
                    if work[te] == 0:
                        del work[te]
            else:
                remainder[e] = remainder.get(e, Fraction(0)) + c
        return (
            Poly._normalized(self.nvars, quotient),
            Poly._normalized(self.nvars, remainder),
        )

    def try_divide(self, divisor: "Poly") -> "Poly | None":
        q, r = self.divmod_single(divisor)
        return q if r.is_zero() else None

    # -- text form ---------------------------------------------------------------

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for e in sorted(self.terms, key=_grlex_key, reverse=True):
            c = self.terms[e]
            vars_txt = " ".join(
                f"x{i + 1}" if k == 1 else f"x{i + 1}^{k}"
                for i, k in enumerate(e)
                if k > 0
            )
            mag = abs(c)
            body = f"{mag} * {vars_txt}" if vars_txt else f"{mag}"
            if not pieces:
                pieces.append(body if c > 0 else f"-{body}")
            else:
                pieces.append(f"+ {body}" if c > 0 else f"- {body}")
        return " ".join(pieces)

    def __repr__(self) -> str:
        return f"Poly({self.nvars}, {str(self)!r})"


_COEFF_RE = re.compile(r"^[+-]?\d+(/\d+)?$")
_VAR_RE = re.compile(r"^x(\d+)(?:\^(\d+))?$")


def _parse_term(term: str, nvars: int) -> tuple[Exponents, Fraction]:
    parts = [p for chunk in term.split("*") for p in chunk.split()]
    if not parts:
        raise PolyParseError("empty term")
    coeff = Fraction(1)
    exps = [0] * nvars
    seen_coeff = False
    for part in parts:
        if _COEFF_RE.match(part):
            if seen_coeff:
                raise PolyParseError(f"two coefficients in term {term!r}")
            coeff = Fraction(part)
            seen_coeff = True
            continue
        m = _VAR_RE.match(part)
        if not m:
            raise PolyParseError(f"cannot parse {part!r} in term {term!r}")
        idx = int(m.group(1)) - 1
        if not 0 <= idx < nvars:
            raise PolyParseError(f"variable x{idx + 1} out of range (nvars={nvars})")
        exps[idx] += int(m.group(2) or 1)
    return tuple(exps), coeff


def parse_poly(text: str, nvars: int) -> Poly:
    """Parse the monomial-list syntax; inverse of ``str(poly)``.

    Terms are separated by ``+`` or ``-``; each term is an optional rational
    coefficient, an optional ``*``, and whitespace- or ``*``-separated powers
    like ``x1^2 x3``.  ``"0"`` parses to the zero polynomial.
    """
    text = text.strip()
    if not text:
        raise PolyParseError("empty polynomial text")
    # Split into signed terms; a leading sign is optional.
    chunks: list[tuple[int, str]] = []
    sign, buf = 1, []
    i = 0
    if text[0] in "+-":
        sign = -1 if text[0] == "-" else 1
        i = 1
    while i < len(text):
        ch = text[i]
        if ch in "+-" and (i == 0 or text[i - 1] != "^"):
            # '/' never precedes a sign in valid input; '^' guards exponents.
            chunks.append((sign, "".join(buf)))
            sign = -1 if ch == "-" else 1
            buf = []
        else:
            buf.append(ch)
        i += 1
    chunks.append((sign, "".join(buf)))

    total = Poly.zero(nvars)
    for sgn, chunk in chunks:
        chunk = chunk.strip()
        if not chunk:
            raise PolyParseError(f"dangling sign in {text!r}")
        if chunk == "0":
            continue
        exps, coeff = _parse_term(chunk, nvars)
        total = total + Poly.monomial(nvars, exps, sgn * coeff)
    return total


def poly_matrix_det(rows: Sequence[Sequence[Poly]]) -> Poly:
    """Determinant of a square polynomial matrix by cofactor expansion."""
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError("matrix is not square")
    if n == 0:
        raise ValueError("empty matrix")
    nvars = rows[0][0].nvars
    if n == 1:
        return rows[0][0]
    det = Poly.zero(nvars)
    for j in range(n):
        entry = rows[0][j]
        if entry.is_zero():
            continue
        minor = [[rows[i][k] for k in range(n) if k != j] for i in range(1, n)]
        cofactor = entry * poly_matrix_det(minor)
        det = det + (cofactor if j % 2 == 0 else -cofactor)
    return det
