import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from palmlab.algebra import ONE, ZERO, GMeasure, Scalar, cyclic
from palmlab.errors import CapExceeded
from palmlab.fleet import random_model
from palmlab.space import (
    FlowSpace,
    OmegaMeasure,
    RandomMeasure,
    conditional_on_invariant,
    is_invariant_rm,
    is_stationary,
    lift,
    make_exactly_k_field,
    make_mark_field,
    product_space,
)

HALF, THIRD = Scalar("1/2"), Scalar("1/3")


def z2_field(law=(HALF, HALF)):
    return make_mark_field(cyclic(2), (0, 1), law)


def test_z2_outcome_order_and_orbits():
    space, _, _ = z2_field()
    assert space.outcomes == ("00", "10", "01", "11")
    assert sorted(map(sorted, space.orbits())) == [[0], [1, 2], [3]]


def test_z3_orbits():
    space, _, _ = make_mark_field(cyclic(3), (0, 1), (HALF, HALF))
    sizes = sorted(len(o) for o in space.orbits())
    assert sizes == [1, 1, 3, 3]


def test_trivial_flow_gives_singleton_orbits():
    space = FlowSpace(cyclic(3), ["a", "b"], [[0, 1]] * 3)
    assert sorted(map(tuple, space.orbits())) == [(0,), (1,)]


def test_flow_validation_rejects_non_action():
    with pytest.raises(ValueError):
        FlowSpace(cyclic(2), ["a", "b"], [[0, 1], [0, 0]])


def test_stationarity_witness():
    space, _, _ = z2_field()
    P = OmegaMeasure(space, [0, 1, 2, 0])
    v = is_stationary(P)
    assert not v
    assert v.witness["s"] == 1 and space.outcomes[v.witness["outcome"]] == "10"


def test_bernoulli_third_weights():
    space, P, xi = z2_field((Scalar("2/3"), THIRD))
    assert P.weights == tuple(Scalar(x) for x in ("4/9", "2/9", "2/9", "1/9"))
    assert is_stationary(P) and is_invariant_rm(xi)


def test_example_space_weights():
    space, P, xi = make_mark_field(cyclic(3), (0, 1), (HALF, HALF))
    assert space.size == 8 and set(P.weights) == {Scalar("1/8")}


def test_degenerate_single_outcome():
    space, P, xi = make_mark_field(cyclic(1), (1,), (ONE,))
    assert space.size == 1 and P.weights == (ONE,) and xi[0] == GMeasure.dirac(space.group, 0)


def test_cap_rejected():
    with pytest.raises(CapExceeded):
        make_mark_field(cyclic(4), (0, 1), (HALF, HALF), cap=15)


def test_constant_dirac_is_not_covariant():
    space, _, _ = z2_field()
    xi = RandomMeasure.constant(space, GMeasure.dirac(space.group, 0))
    assert not is_invariant_rm(xi)
    assert is_invariant_rm(RandomMeasure.haar(space))


def test_conditional_expectation_orbit_averages():
    space, P, xi = z2_field()
    f = [xi[w][0] for w in range(space.size)]
    assert conditional_on_invariant(P, f) == (ZERO, HALF, HALF, ONE)


def test_product_space():
    _, a, xi_a = z2_field()
    b = z2_field((Scalar("2/3"), THIRD))[1]
    Q = product_space(a, b)
    assert Q.space.size == 16 and is_stationary(Q)
    assert Q.weights[Q.space.components.index((3, 3))] == Scalar("1/4") * Scalar("1/9")
    xi = lift(xi_a, Q.space, 0)
    assert is_invariant_rm(xi)
    trivial = make_mark_field(cyclic(2), (1,), (ONE,))[1]
    assert product_space(a, trivial).weights == a.weights


def test_exactly_k_field():
    space, P, xi = make_exactly_k_field(cyclic(4), 2)
    assert space.size == 6 and P.total() == ONE and is_stationary(P)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_generator_properties(seed):
    space, P, xi = random_model(np.random.default_rng(seed))
    assert is_stationary(P) and is_invariant_rm(xi)
    for orbit in space.orbits():
        assert space.group.order % len(orbit) == 0
        for s in space.group:
            assert {space.flow[s][w] for w in orbit} == set(orbit)
    f = [Scalar(w % 3) for w in range(space.size)]
    once = conditional_on_invariant(P, f)
    assert conditional_on_invariant(P, once) == once
    assert sum((P.weights[w] * once[w] for w in range(space.size)), ZERO) == sum(
        (P.weights[w] * f[w] for w in range(space.size)), ZERO
    )
