import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from palmlab.algebra import ONE, ZERO, GMeasure, Scalar, cyclic
from palmlab.errors import PreconditionError
from palmlab.fleet import corrupt_base, random_base, random_model
from palmlab.massstat import kernel_T_C, kernel_T_CD
from palmlab.space import (
    OmegaMeasure,
    RandomMeasure,
    configuration_space,
    make_exactly_k_field,
    make_mark_field,
)
from palmlab.torus import exact_allocation_rule
from palmlab.transport import (
    AllocationRule,
    TransportKernel,
    check_corollary_3_9,
    check_corollary_4_7,
    check_example_4_8,
    check_example_4_9,
    check_exchange,
    check_mass_transport_principle,
    check_neveu,
    check_prop_4_5,
    check_relation,
    check_theorem_4_1,
    dual_relation,
    from_kappa,
    inverse_kernel,
    is_balancing,
    is_invariant_kernel,
    push,
    relation,
)

HALF = Scalar("1/2")


def shift_kernel(space, k):
    return TransportKernel.from_base(space, [GMeasure.dirac(space.group, k)] * space.size)


@pytest.fixture(scope="module")
def coin3():
    return make_mark_field(cyclic(3), (0, 1), (HALF, HALF))


@pytest.fixture(scope="module")
def one_point3():
    return make_exactly_k_field(cyclic(3), 1)


# -- invariance -------------------------------------------------------------------


def test_stay_put_and_based_kernels_are_invariant(coin3):
    space, _, _ = coin3
    assert is_invariant_kernel(TransportKernel.stay_put(space))
    rng = np.random.default_rng(1)
    assert is_invariant_kernel(TransportKernel.from_base(space, random_base(space, rng)))


def test_constant_dirac_kernel_is_not_invariant(coin3):
    space, _, _ = coin3
    G = space.group
    T = TransportKernel(space, [[GMeasure.dirac(G, 0)] * G.order] * space.size)
    v = is_invariant_kernel(T)
    assert not v and v.witness["t"] != 0


def test_from_kappa_examples(one_point3):
    space, _, _ = one_point3
    G = space.group
    lam = RandomMeasure.haar(space)
    T = from_kappa(lambda w, s, t: 1, lam)
    assert all(T[w, s] == GMeasure.haar(G) for w in space for s in G)
    T = from_kappa(lambda w, s, t: int(t == s), lam)
    assert T == TransportKernel.stay_put(space)
    T = from_kappa(lambda w, s, t: int(G.sub(t, s) == 1), lam)
    assert T == shift_kernel(space, 1) and is_invariant_kernel(T)
    with pytest.raises(PreconditionError):
        from_kappa(lambda w, s, t: int(t == 0), lam)


# -- balancing and inverse -----------------------------------------------------------


def test_stay_put_preserves(coin3):
    space, P, xi = coin3
    T = TransportKernel.stay_put(space)
    assert push(xi, T) == xi and is_balancing(T, xi, xi, P)


def test_shift_moves_single_points(one_point3):
    space, P, xi = one_point3
    G = space.group
    eta = RandomMeasure(space, [xi[w].shift(G.neg(1)) for w in space])
    T = shift_kernel(space, 1)
    assert is_balancing(T, xi, eta, P)
    assert all(eta[w].support() == {G.add(next(iter(xi[w].support())), 1)} for w in space)


def test_window_kernel_is_not_preserving(coin3):
    space, P, xi = coin3
    T = kernel_T_C(xi, (0, 1))
    assert T.markovian
    v = is_balancing(T, xi, xi, P)
    assert not v and "outcome" in v.witness


def test_inverse_of_shift_under_haar(one_point3):
    space, P, _ = one_point3
    lam = RandomMeasure.haar(space)
    Ts = inverse_kernel(shift_kernel(space, 1), lam, lam, P)
    assert Ts == shift_kernel(space, 2)
    stay = TransportKernel.stay_put(space)
    assert inverse_kernel(stay, lam, lam, P) == stay


def test_inverse_of_window_kernel(coin3):
    space, P, xi = coin3
    T = kernel_T_CD(xi, (0, 1), (0,))
    eta = xi.scale(HALF)
    Ts = inverse_kernel(T, xi, eta, P)
    assert check_relation(T, Ts, xi, eta, P)
    assert is_invariant_kernel(Ts)


def test_inverse_requires_balancing(coin3):
    space, P, xi = coin3
    with pytest.raises(PreconditionError):
        inverse_kernel(kernel_T_C(xi, (0, 1)), xi, xi, P)


# -- exchange formulas ------------------------------------------------------------------


def test_identity_exchange(coin3):
    space, P, xi = coin3
    T = TransportKernel.stay_put(space)
    assert check_exchange(T, T, xi, xi, P)


def test_exchange_with_whole_measures_is_neveu(coin3):
    space, P, xi = coin3
    G = space.group
    eta = RandomMeasure.haar(space).scale(HALF)
    T = TransportKernel(space, [[eta[w]] * G.order for w in space])
    Ts = TransportKernel(space, [[xi[w]] * G.order for w in space])
    assert check_exchange(T, Ts, xi, eta, P)
    assert check_neveu(xi, eta, P)


def test_neveu_examples(coin3):
    space, P, xi = coin3
    assert check_neveu(xi, xi, P)
    assert check_neveu(xi, xi, P, h=lambda w, s: 1)
    assert check_neveu(xi, RandomMeasure.haar(space), P)


def test_mass_transport_examples(one_point3, coin3):
    space, P, xi = coin3
    G = space.group
    assert check_mass_transport_principle(lambda w, s, t: 1, xi, xi, P, [0], [0])
    assert check_mass_transport_principle(lambda w, s, t: int(G.sub(t, s) == 1), xi, xi, P, [0], [1])
    with pytest.raises(PreconditionError):
        check_mass_transport_principle(lambda w, s, t: 1, xi, xi, P, [0], [0, 1])


# -- Palm invariance --------------------------------------------------------------------


def test_theorem_4_1_identity_and_corruption(coin3):
    space, P, xi = coin3
    chk = check_theorem_4_1(TransportKernel.stay_put(space), xi, xi, P)
    assert chk.balancing and chk.palm_identity
    rng = np.random.default_rng(3)
    base = [GMeasure.dirac(space.group, 0)] * space.size
    bad = TransportKernel.from_base(space, corrupt_base(base, P, xi, rng))
    chk = check_theorem_4_1(bad, xi, xi, P)
    assert not chk.balancing and not chk.palm_identity and chk.agree


def test_prop_4_5_single_point_collector(one_point3):
    space, P, xi = one_point3
    G = space.group
    p = [next(iter(xi[w].support())) for w in space]
    tau = AllocationRule(space, [[p[w]] * G.order for w in space])
    lam = RandomMeasure.haar(space)
    eta = RandomMeasure(space, [GMeasure.dirac(G, p[w], G.order) for w in space])
    chk = check_prop_4_5(tau, lam, eta, P)
    assert chk.balancing and chk.palm_identity


def test_prop_4_5_next_point_map():
    G = cyclic(5)
    configs = [c for c in itertools.product((0, 1), repeat=5) if any(c)]
    space, xi = configuration_space(G, configs, (0, 1))
    P = OmegaMeasure(space, [ONE] * space.size)
    table = []
    for c in space.configs:
        row = []
        for s in G:
            if c[s]:
                row.append(next(G.add(s, k % 5) for k in range(1, 6) if c[G.add(s, k % 5)]))
            else:
                row.append(s)
        table.append(row)
    tau = AllocationRule(space, table)
    assert tau.is_covariant()
    chk = check_prop_4_5(tau, xi, xi, P)
    assert chk.balancing and chk.palm_identity
    # and it agrees with Theorem 4.1 for the transport form of tau
    chk41 = check_theorem_4_1(tau.kernel(), xi, xi, P)
    assert bool(chk41.palm_identity) == bool(chk.palm_identity)


def test_corollary_4_7_two_orbit_space():
    space, P, xi = make_mark_field(cyclic(2), (0, 1), (HALF, HALF))
    # keep the orbits {10, 01} and {11}
    P = OmegaMeasure(space, [ZERO, Scalar("1/4"), Scalar("1/4"), HALF])
    G = space.group
    lam = RandomMeasure.haar(space)
    # orbit-wise: on {11} stay, on {10,01} spread each point over both sites
    base = [GMeasure.dirac(G, 0)] * space.size
    base[1] = GMeasure(G, [HALF, HALF])
    base[2] = GMeasure(G, [HALF, HALF])
    T = TransportKernel.from_base(space, base)
    chk = check_corollary_4_7(T, xi, lam, P)
    assert chk.balancing and chk.palm_identity
    chk = check_corollary_4_7(TransportKernel.stay_put(space), xi, lam, P)
    assert not chk.balancing and not chk.palm_identity


def test_example_4_8_haar_source(coin3):
    space, P, xi = coin3
    P = OmegaMeasure(space, [ZERO] + [Scalar("1/7")] * 7)
    from palmlab.existence import construct_balancing_kernel
    from palmlab.transport import haar_scaled

    res = construct_balancing_kernel(P, haar_scaled(P, xi), xi)
    chk = check_example_4_8(res.kernel, xi, P)
    assert chk.balancing and chk.palm_identity


@pytest.mark.parametrize("group,k", [("z4", 2), ("z6", 3), ("z2,z2", 2)])
def test_example_4_9_quota_allocation(group, k):
    from palmlab.algebra import parse_group

    space, P, xi = make_exactly_k_field(parse_group(group), k)
    chk = check_example_4_9(exact_allocation_rule(space), xi, P)
    assert chk.balancing and chk.palm_identity


def test_example_4_9_without_quota_fails():
    space, P, xi = make_exactly_k_field(cyclic(4), 2)
    G = space.group
    # everyone goes to the first point at or after the site: quotas are uneven
    table = [[next(G.add(s, k) for k in range(4) if c[G.add(s, k)]) for s in G] for c in space.configs]
    chk = check_example_4_9(AllocationRule(space, table), xi, P)
    assert not chk.balancing and not chk.palm_identity


# -- properties on random instances ----------------------------------------------------------


def _instance(seed, markovian=None):
    rng = np.random.default_rng(seed)
    space, P, xi = random_model(rng, max_order=6)
    if markovian is None:
        markovian = bool(rng.integers(2))
    T = TransportKernel.from_base(space, random_base(space, rng, markovian=markovian))
    eta = push(xi, T)
    return rng, space, P, xi, eta, T


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_relation_symmetry(seed):
    rng, space, P, xi, eta, T = _instance(seed)
    Ts = inverse_kernel(T, xi, eta, P)
    for w in space:
        if P.weights[w]:
            assert relation(T, xi, w) == dual_relation(Ts, eta, w)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_double_inverse(seed):
    # T* balances eta back onto xi only when T is Markovian
    rng, space, P, xi, eta, T = _instance(seed, markovian=True)
    Ts = inverse_kernel(T, xi, eta, P)
    Tss = inverse_kernel(Ts, eta, xi, P)
    G = space.group
    for w in space:
        if not P.weights[w]:
            continue
        for s in G:
            if xi[w][s]:
                for t in G:
                    if eta[w][t]:
                        assert Tss[w, s][t] == T[w, s][t]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exchange_and_corollary_3_9(seed):
    rng, space, P, xi, eta, T = _instance(seed)
    Ts = inverse_kernel(T, xi, eta, P)
    assert check_exchange(T, Ts, xi, eta, P)
    f = [Scalar(int(x)) for x in rng.integers(0, 3, size=space.size)]
    g = [Scalar(int(x)) for x in rng.integers(0, 3, size=space.size)]
    assert check_corollary_3_9(T, Ts, xi, eta, P, f, g)
    assert check_neveu(xi, eta, P)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_theorem_4_1_agreement_and_prop_4_5(seed):
    rng, space, P, xi, eta, T = _instance(seed)
    chk = check_theorem_4_1(T, xi, eta, P)
    assert chk.balancing and chk.palm_identity
    bad = TransportKernel.from_base(space, corrupt_base(T.base(), P, xi, rng))
    assert check_theorem_4_1(bad, xi, eta, P).agree
    G = space.group
    pi = [int(x) for x in rng.integers(0, G.order, size=space.size)]
    tau = AllocationRule.from_pi(space, pi)
    assert tau.is_covariant()
    eta_tau = push(xi, tau.kernel())
    for target in (xi, eta_tau):
        a = check_prop_4_5(tau, xi, target, P)
        b = check_theorem_4_1(tau.kernel(), xi, target, P)
        assert bool(a.balancing) == bool(b.balancing)
        assert bool(a.palm_identity) == bool(b.palm_identity)
        assert a.agree


def test_mass_transport_on_random_kappa():
    rng = np.random.default_rng(5)
    for _ in range(10):
        space, P, xi = random_model(rng, max_order=5)
        G = space.group
        vals = rng.integers(0, 3, size=(space.size, G.order)).tolist()
        # invariant kappa(w, s, t) = h(theta_s w, t - s)
        kappa = lambda w, s, t, vals=vals, space=space, G=G: vals[space.flow[s][w]][G.sub(t, s)]
        B = [0]
        B2 = [int(rng.integers(G.order))]
        assert check_mass_transport_principle(kappa, xi, xi, P, B, B2)
