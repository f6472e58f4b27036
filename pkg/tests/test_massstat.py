import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from palmlab.algebra import ONE, ZERO, GMeasure, Scalar, cyclic, scalar_sum
from palmlab.errors import PreconditionError
from palmlab.fleet import perturb, random_base, random_model
from palmlab.massstat import (
    _is_fixed,
    check_6_4,
    check_theorem_7_2,
    exact_tv_gap,
    example_6_5,
    example_7_1,
    is_mass_stationary,
    kernel_T_C,
    kernel_T_CD,
    preserving_base,
    uniform_on,
    window_table,
)
from palmlab.palm import check_mecke, is_palm_oracle, palm_measure
from palmlab.space import OmegaMeasure, RandomMeasure, make_mark_field
from palmlab.transport import (
    AllocationRule,
    TransportKernel,
    inverse_kernel,
    is_balancing,
    is_balancing_alloc,
    is_invariant_kernel,
    push,
    shift_by_alloc,
    transport_image,
)

HALF = Scalar("1/2")


@pytest.fixture(scope="module")
def coin3():
    return make_mark_field(cyclic(3), (0, 1), (HALF, HALF))


def lhs_by_definition(Q, xi, C, target, g):
    """Left side of the window identity at ``1{target} x 1{g}``, summed
    directly from the kernel table of ``T_C``."""
    space, G = Q.space, Q.space.group
    T = kernel_T_C(xi, C)
    return scalar_sum(
        Q.weights[w] * T[w, G.neg(r)][s] / len(C)
        for w in space
        for r in C
        for s in G
        if space.flow[s][w] == target and G.add(s, r) == g
    )


# -- the window kernel -----------------------------------------------------------------


def test_window_kernel_examples(coin3):
    space, P, xi = coin3
    G = space.group
    T = kernel_T_C(xi, (0, 1))
    w = space.index("110")
    assert T[w, 0] == GMeasure(G, [HALF, HALF, ZERO])
    full = kernel_T_C(xi, tuple(G))
    for w in space:
        if not xi[w].is_zero():
            assert all(full[w, t] == xi[w].scale(ONE / xi[w].total()) for t in G)
    empty = space.index("000")
    assert T[empty, 2] == GMeasure.dirac(G, 2)
    assert is_invariant_kernel(T) and is_invariant_kernel(kernel_T_C(xi, (0, 1), "uniform"))
    with pytest.raises(PreconditionError):
        kernel_T_C(xi, ())


def test_weighted_window_kernels(coin3):
    space, P, xi = coin3
    G = space.group
    assert push(xi, kernel_T_CD(xi, (0, 1), tuple(G))) == xi
    assert push(xi, kernel_T_CD(xi, (0, 1), ())) == xi.scale(ZERO)
    assert check_6_4(xi, (0, 1), (0,))
    assert is_balancing(kernel_T_CD(xi, (0, 1), (0,)), xi, xi.scale(HALF))


def test_uniform_on_window():
    G = cyclic(6)
    lam = uniform_on(G, (0, 2, 3))
    assert lam.total() == ONE
    D = {0, 1, 2}
    assert lam.mass_of(D) + lam.mass_of(set(G) - D) == ONE


def test_palm_of_coin_is_mass_stationary(coin3):
    space, P, xi = coin3
    r = is_mass_stationary(palm_measure(P, xi).measure, xi)
    assert r.holds and r.sets_checked == 7


def test_uniform_on_nonempty_is_not(coin3):
    space, P, xi = coin3
    Q = OmegaMeasure(space, [ZERO if xi[w].is_zero() else ONE / 7 for w in space])
    r = is_mass_stationary(Q, xi)
    assert not r.holds
    w = r.witness
    assert w["lhs"] != w["rhs"]
    assert w["lhs"] == lhs_by_definition(Q, xi, w["C"], w["outcome"], w["element"])


def test_trivial_group():
    space, P, xi = make_mark_field(cyclic(1), (1,), (ONE,))
    assert is_mass_stationary(P, xi)


def test_charged_empty_rejected(coin3):
    space, P, xi = coin3
    with pytest.raises(PreconditionError):
        is_mass_stationary(P, xi)


def test_window_table_matches_definition(coin3):
    space, P, xi = coin3
    Q = perturb(palm_measure(P, xi).measure, xi, np.random.default_rng(2))
    for C in ((0,), (0, 2), (0, 1, 2)):
        lhs, _ = window_table(Q, xi, C)
        for target in space:
            for g in space.group:
                assert lhs[target][g] / len(C) == lhs_by_definition(Q, xi, C, target, g)


# -- worked examples --------------------------------------------------------------------------


def test_example_6_5_numbers():
    assert example_6_5() == (Scalar("3/8"), HALF)


def test_example_6_5_variants(coin3):
    space, P, xi = coin3
    Q = palm_measure(P, xi).normalized
    assert example_6_5(A=range(space.size)) == (ONE, ONE)
    # C = G by brute force: the kernel picks a point of the configuration uniformly
    A = {w for w in space if xi[w][1] == ONE}
    want = scalar_sum(
        Q.weights[w] * scalar_sum(ONE for s in space.group if xi[w][s] and space.flow[s][w] in A) / xi[w].total()
        for w in space
        if Q.weights[w]
    )
    assert example_6_5(C=(0, 1, 2)) == (want, HALF)


def _allocation_oracle(space, xi, xi1, Q):
    """Every map ``pi: Omega -> G`` checked through the transport module."""
    G = space.group
    count, all_first, all_inv = 0, True, True
    for pi in itertools.product(range(G.order), repeat=space.size):
        tau = AllocationRule.from_pi(space, pi)
        if not is_balancing_alloc(tau, xi, xi):
            continue
        count += 1
        all_first &= bool(is_balancing_alloc(tau, xi1, xi1))
        all_inv &= Q.image(shift_by_alloc(tau)) == Q
    return count, all_first, all_inv


def test_example_7_1_z2_against_brute_force():
    r = example_7_1(cyclic(2), HALF)
    assert r.outcomes == 16 and r.exhaustive
    assert r.all_first_preserving and r.all_invariant
    assert not r.mass_stationary.holds and r.mass_stationary.witness is not None
    space = r.Q.space
    # first species: the rational part of xi
    xi1 = RandomMeasure(space, [GMeasure(space.group, [Scalar(m.a) for m in r.xi[w].masses]) for w in space])
    count, all_first, all_inv = _allocation_oracle(space, r.xi, xi1, r.Q)
    assert count == r.rules_total
    assert all_first and all_inv


def test_example_7_1_z3_and_degenerate():
    r = example_7_1(cyclic(3), HALF)
    assert r.outcomes == 64 and r.all_first_preserving and r.all_invariant
    assert not r.mass_stationary.holds
    assert example_7_1(cyclic(2), HALF, p_second=ZERO).mass_stationary.holds


def test_example_7_1_witness_is_irrational_mismatch():
    r = example_7_1(cyclic(2), HALF)
    w = r.mass_stationary.witness
    assert w["lhs"] != w["rhs"]
    assert w["lhs"] == lhs_by_definition(r.Q, r.xi, w["C"], w["outcome"], w["element"])


# -- Theorem 6.3 / 7.2 properties ---------------------------------------------------------------


def _charged(seed, max_order=6):
    rng = np.random.default_rng(seed)
    space, P, xi = random_model(rng, max_order=max_order)
    return rng, space, P, xi


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mass_stationarity_matches_mecke(seed):
    rng, space, P, xi = _charged(seed)
    palm = palm_measure(P, xi).measure
    assert is_mass_stationary(palm, xi)
    Q = perturb(palm, xi, rng)
    ms = is_mass_stationary(Q, xi)
    assert bool(ms) == bool(check_mecke(Q, xi)) == is_palm_oracle(Q, xi)
    # fallback insensitivity
    assert bool(is_mass_stationary(Q, xi, fallback="uniform")) == bool(ms)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exact_gap_vanishes_iff_mass_stationary(seed):
    rng, space, P, xi = _charged(seed, max_order=5)
    Q = perturb(palm_measure(P, xi).measure, xi, rng)
    if not Q.total():
        return
    gaps = [exact_tv_gap(Q, xi, C) for C in ((0,), tuple(space.group))]
    if is_mass_stationary(Q, xi):
        assert all(g == ZERO for g in gaps)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_preserving_base_matches_composed_kernel(seed):
    rng, space, P, xi = _charged(seed, max_order=5)
    T = TransportKernel.from_base(space, random_base(space, rng))
    Ts = inverse_kernel(T, xi, push(xi, T), verify=False)
    composite = T.compose(Ts)
    assert is_balancing(composite, xi, xi)
    fast = preserving_base(xi, T.base())
    for w in space:
        if not xi[w].is_zero():
            assert list(composite[w, 0].masses) == fast[w]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_theorem_7_2_agreement(seed):
    rng, space, P, xi = _charged(seed, max_order=5)
    palm = palm_measure(P, xi).measure
    for Q in (palm, perturb(palm, xi, rng)):
        r = check_theorem_7_2(Q, xi, fleet_size=10, seed=seed % 1000)
        assert r.agree


def test_theorem_7_2_haar_stationary():
    space, P, _ = make_mark_field(cyclic(2), (0, 1), (HALF, HALF))
    lam = RandomMeasure.haar(space)
    r = check_theorem_7_2(P, lam)
    assert r.mass_stationary.holds and r.kernel_invariance.holds
    Q = OmegaMeasure(space, [HALF, ZERO, HALF, ZERO])
    r = check_theorem_7_2(Q, lam)
    assert not r.mass_stationary.holds and not r.kernel_invariance.holds


def test_window_family_invariance_by_transport_image(coin3):
    space, P, xi = coin3
    Q = palm_measure(P, xi).measure
    for C in ((0,), (0, 1), (0, 1, 2)):
        for d in C:
            T = kernel_T_CD(xi, C, (d,)).scale(len(C))
            assert transport_image(Q, T) == Q
            base = {w: list(T[w, 0].masses) for w in space if Q.weights[w]}
            assert _is_fixed(Q, base)
