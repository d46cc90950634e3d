import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecopersist.brackets import (
    BracketFamily,
    PolyVectorField,
    RationalDet,
    RationalVectorField,
    det_polynomial,
    exact_rank,
    factor_out_coordinate_power,
    hormander_check,
    lie_bracket,
)
from ecopersist.poly import Poly, parse_poly


def pvf(*component_texts, label="X"):
    n = len(component_texts)
    return PolyVectorField(tuple(parse_poly(t, n) for t in component_texts), label)


coeffs = st.fractions(min_value=-3, max_value=3, max_denominator=3).filter(
    lambda c: c != 0
)


@st.composite
def sparse_fields(draw, nvars=3, max_terms=2, max_exp=2):
    comps = []
    for _ in range(nvars):
        q = Poly.zero(nvars)
        for _ in range(draw(st.integers(0, max_terms))):
            exps = tuple(draw(st.integers(0, max_exp)) for _ in range(nvars))
            q = q + Poly.monomial(nvars, exps, draw(coeffs))
        comps.append(q)
    return PolyVectorField(tuple(comps))


@given(sparse_fields(), sparse_fields())
@settings(max_examples=60, deadline=None)
def test_antisymmetry(y, z):
    yz = lie_bracket(y, z)
    zy = lie_bracket(z, y)
    for a, b in zip(yz.components, zy.components):
        assert a == -b


@given(sparse_fields(), sparse_fields(), sparse_fields(), coeffs, coeffs)
@settings(max_examples=40, deadline=None)
def test_bilinearity(y, w, z, a, b):
    combo = PolyVectorField(
        tuple(a * cy + b * cw for cy, cw in zip(y.components, w.components))
    )
    lhs = lie_bracket(combo, z)
    ya = lie_bracket(y, z)
    wb = lie_bracket(w, z)
    for c_lhs, c_y, c_w in zip(lhs.components, ya.components, wb.components):
        assert c_lhs == a * c_y + b * c_w


@given(sparse_fields(max_terms=1), sparse_fields(max_terms=1), sparse_fields(max_terms=1))
@settings(max_examples=30, deadline=None)
def test_jacobi_identity(x, y, z):
    total = [Poly.zero(3)] * 3
    for a, b, c in ((x, y, z), (y, z, x), (z, x, y)):
        inner = lie_bracket(b, c)
        outer = lie_bracket(a, inner)
        total = [t + comp for t, comp in zip(total, outer.components)]
    assert all(t.is_zero() for t in total)


def test_linear_fields_bracket_is_matrix_commutator():
    # For Y = Ax and Z = Bx the bracket DZ.Y - DY.Z equals (BA - AB)x.
    rng = random.Random(4)
    n = 3
    for _ in range(20):
        A = [[Fraction(rng.randint(-3, 3)) for _ in range(n)] for _ in range(n)]
        B = [[Fraction(rng.randint(-3, 3)) for _ in range(n)] for _ in range(n)]

        def linear(M):
            return PolyVectorField(
                tuple(
                    sum(
                        (Poly.variable(n, j) * M[i][j] for j in range(n)),
                        Poly.zero(n),
                    )
                    for i in range(n)
                )
            )

        C = [
            [
                sum(B[i][k] * A[k][j] - A[i][k] * B[k][j] for k in range(n))
                for j in range(n)
            ]
            for i in range(n)
        ]
        assert lie_bracket(linear(A), linear(B)) == linear(C)


def test_rational_bracket_agrees_with_cleared_polynomial_bracket():
    # u/d with u = d * w reduces to w, and brackets must agree as rational maps.
    n = 2
    d = parse_poly("x1 + 1", n)
    w = pvf("x1^2", "x1 x2")
    z = pvf("x2", "1 - x1")
    y_rat = RationalVectorField(tuple(c * d for c in w.components), d, 1, "Y")
    br_rat = lie_bracket(y_rat, RationalVectorField(z.components, d, 0, "Z")).reduce()
    br_poly = lie_bracket(w, z)
    rng = random.Random(11)
    for _ in range(12):
        pt = (Fraction(rng.randint(-9, 9), 10), Fraction(rng.randint(-9, 9), 10))
        if d.evaluate(pt) == 0:
            continue
        assert br_rat.evaluate(pt) == br_poly.evaluate(pt)


def test_rational_reduce_cancels_common_denominator():
    n = 2
    d = parse_poly("x1 + 1", n)
    num = (parse_poly("x1^2 + x1", n), parse_poly("x2 x1 + x2", n))
    f = RationalVectorField(num, d, 2, "F")
    g = f.reduce()
    assert g.power == 1
    assert g.num == (parse_poly("x1", n), parse_poly("x2", n))


def test_det_polynomial_diagonal_and_factoring():
    fields = [
        pvf("x1", "0", "0"),
        pvf("0", "x2", "0"),
        pvf("0", "0", "x3"),
    ]
    det = det_polynomial(fields)
    assert det == parse_poly("x1 x2 x3", 3)
    power, reduced = factor_out_coordinate_power(det)
    assert power == 1 and reduced == Poly.constant(3, 1)

    squared = det * det * parse_poly("x1 + x2", 3)
    power, reduced = factor_out_coordinate_power(squared)
    assert power == 2 and reduced == parse_poly("x1 + x2", 3)


def test_det_of_rational_fields_reduces():
    n = 2
    d = parse_poly("x1 + 1", n)
    f = RationalVectorField((d * Poly.variable(n, 0), Poly.zero(n)), d, 1, "F")
    g = pvf("0", "x2", label="G")
    det = det_polynomial([f, g])
    assert isinstance(det, RationalDet)
    reduced = det.reduce()
    assert reduced.power == 0
    assert reduced.num == parse_poly("x1 x2", n)


def test_hormander_heisenberg_like_system():
    fields = [pvf("1", "0", "0", label="G1"), pvf("0", "1", "x1", label="G2")]
    res = hormander_check(fields, (0, 0, 0), mode="weak", system="pdmp")
    assert res.satisfied and res.rank == 3
    assert "[G1,G2]" in res.witnesses or "[G2,G1]" in res.witnesses


def test_hormander_strong_excludes_bare_drift():
    # constant drift and constant noise commute, so the drift direction is
    # visible to the weak check but unreachable by brackets in the strong one
    drift = pvf("1", "0", label="S0")
    diffusion = pvf("0", "1", label="S1")
    res = hormander_check([drift, diffusion], (0, 1), mode="strong", system="sde")
    assert not res.satisfied and res.rank == 1
    weak = hormander_check([drift, diffusion], (0, 1), mode="weak", system="sde")
    assert weak.satisfied


def test_hormander_strong_admits_brackets_with_drift():
    # dx1 = x2 dt, dx2 = dB: noise enters x1 only through [S0, S1]
    drift = pvf("x2", "0", label="S0")
    diffusion = pvf("0", "1", label="S1")
    res = hormander_check([drift, diffusion], (3, -2), mode="strong", system="sde")
    assert res.satisfied and res.rank == 2
    assert any("S0" in w and "S1" in w for w in res.witnesses)


def test_hormander_degenerate_shared_invariant_face():
    # every field tangent to {x1 = 0}: no bracket can leave the face
    fields = [
        pvf("x1", "1", "0", label="G1"),
        pvf("x1 x2", "0", "1", label="G2"),
    ]
    res = hormander_check(fields, (0, 2, 3), mode="weak", system="pdmp", max_depth=4)
    assert not res.satisfied
    assert res.rank == 2


def test_hormander_deterministic_witnesses():
    fields = [pvf("1", "0", "0", label="G1"), pvf("0", "1", "x1", label="G2")]
    runs = [
        hormander_check(fields, (0, 0, 0), mode="weak", system="pdmp")
        for _ in range(3)
    ]
    assert len({r.witnesses for r in runs}) == 1


def test_bracket_family_depth_guard():
    fields = [pvf("1", "0", "0", label="G1")]
    with pytest.raises(ValueError):
        BracketFamily(fields, (Fraction(0), Fraction(0), Fraction(0)), max_depth=7)


def test_exact_rank():
    assert exact_rank([[1, 0], [0, 1]]) == 2
    assert exact_rank([[1, 2], [2, 4]]) == 1
    assert (
        exact_rank(
            [
                [Fraction(1, 3), Fraction(1)],
                [Fraction(2, 3), Fraction(2)],
                [Fraction(0), Fraction(1)],
            ]
        )
        == 2
    )
