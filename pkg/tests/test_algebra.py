from decimal import Decimal, getcontext
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from palmlab.algebra import (
    ONE,
    SQRT2,
    ZERO,
    FiniteAbelianGroup,
    GMeasure,
    Scalar,
    as_scalar,
    cyclic,
    parse_group,
    scalar_sum,
)

getcontext().prec = 80
ROOT2 = Decimal(2).sqrt()

fractions = st.fractions(min_value=-50, max_value=50, max_denominator=40)
scalars = st.builds(lambda a, b: Scalar(str(a), str(b)), fractions, fractions)


def as_decimal(x: Scalar) -> Decimal:
    a, b = Fraction(str(x.a)), Fraction(str(x.b))
    return Decimal(a.numerator) / a.denominator + Decimal(b.numerator) / b.denominator * ROOT2


# -- scalars ---------------------------------------------------------------------


def test_canonical_text_examples():
    assert str(Scalar.parse("3/8")) == "3/8"
    assert str(Scalar("-1/16", "1/16")) == "-1/16+1/16*r2"
    assert str(SQRT2) == "1*r2"
    assert Scalar.parse("r2") == SQRT2
    assert str(-SQRT2 * 3) == "-3*r2"
    assert str(ZERO) == "0"


def test_floats_rejected():
    with pytest.raises(TypeError):
        ONE + 0.5
    with pytest.raises(TypeError):
        as_scalar(0.25)


def test_sqrt2_squares_to_two():
    assert SQRT2 * SQRT2 == 2


@given(scalars)
def test_text_round_trip(x):
    assert Scalar.parse(str(x)) == x


@given(scalars, scalars)
def test_arithmetic_matches_high_precision_decimal(x, y):
    tol = Decimal("1e-60")
    assert abs(as_decimal(x + y) - (as_decimal(x) + as_decimal(y))) < tol
    assert abs(as_decimal(x * y) - as_decimal(x) * as_decimal(y)) < tol
    if y:
        assert abs(as_decimal(x / y) - as_decimal(x) / as_decimal(y)) < Decimal("1e-50")


@given(scalars)
def test_sign_matches_decimal(x):
    d = as_decimal(x)
    assert x.sign() == (d > 0) - (d < 0)


@given(scalars, scalars)
def test_order_is_total_and_consistent(x, y):
    assert (x < y) + (x == y) + (x > y) == 1
    assert (x < y) == (as_decimal(x) < as_decimal(y))


@given(scalars, scalars, scalars)
def test_field_laws(x, y, z):
    assert (x + y) * z == x * z + y * z
    assert (x * y) * z == x * (y * z)
    if x:
        assert x * (ONE / x) == ONE


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        ONE / ZERO


def test_scalar_sum_and_abs():
    assert scalar_sum([Scalar("1/3")] * 3) == ONE
    assert abs(ONE - SQRT2) == SQRT2 - 1


# -- groups ------------------------------------------------------------------------


def test_group_enumeration_is_lexicographic():
    G = FiniteAbelianGroup((2, 3))
    assert G.order == 6
    assert [G.element(i) for i in range(6)] == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]
    assert G.add(G.index((1, 2)), G.index((1, 2))) == G.index((0, 1))


@pytest.mark.parametrize("text", ["z4", "z2,z3", "Z_2 x Z_2", "z12"])
def test_group_axioms(text):
    G = parse_group(text)
    for s in G:
        assert G.add(s, 0) == s
        assert G.add(s, G.neg(s)) == 0
        for t in G:
            assert G.add(s, t) == G.add(t, s)
            assert G.sub(G.add(s, t), t) == s


def test_subsets_count():
    assert len(list(cyclic(4).subsets())) == 15


# -- measures on the group -------------------------------------------------------


def test_measure_shift_convention():
    G = cyclic(5)
    mu = GMeasure.dirac(G, 3)
    # (theta_s mu){b} = mu{b + s}: the atom at 3 moves to 3 - s
    assert mu.shift(1).support() == {2}
    assert mu.shift(1).shift(G.neg(1)) == mu


def test_measure_rejects_negative_mass():
    with pytest.raises(ValueError):
        GMeasure(cyclic(2), [ONE, -ONE])


@given(st.lists(fractions.map(abs), min_size=6, max_size=6), st.integers(0, 5), st.integers(0, 5))
def test_shift_is_an_action(ms, s, t):
    G = FiniteAbelianGroup((2, 3))
    mu = GMeasure(G, [Scalar(str(m)) for m in ms])
    assert mu.shift(s).shift(t) == mu.shift(G.add(s, t))
    assert mu.shift(s).total() == mu.total()
