"""Invariant weighted transport-kernels and allocation rules.

A kernel assigns a measure ``T(w, s, .)`` on the group to every outcome ``w``
and location ``s``. Balancing, inverse kernels, the exchange formulas and
the Palm-invariance theorems are all decided exactly, outcome by outcome or
over a complete indicator basis.
"""

from __future__ import annotations

from dataclasses import dataclass

from .algebra import ONE, ZERO, GMeasure, Scalar, as_scalar, scalar_sum
from .errors import InternalDefect, PreconditionError
from .palm import (
    _require_positive_intensity,
    intensity_normalized,
    modified_palm,
    palm_measure,
    sample_intensity,
)
from .space import FlowSpace, OmegaMeasure, RandomMeasure, require_stationary
from .verdict import HOLDS, Verdict, fails


class TransportKernel:
    """Table ``kernel[w][s]`` of measures on the group."""

    __slots__ = ("kernel", "space")

    def __init__(self, space: FlowSpace, kernel):
        self.space = space
        self.kernel = tuple(tuple(row) for row in kernel)
        if len(self.kernel) != space.size or any(len(row) != space.group.order for row in self.kernel):
            raise ValueError("kernel table must be |Omega| x |G|")

    def __getitem__(self, key) -> GMeasure:
        w, s = key
        return self.kernel[w][s]

    def __eq__(self, other):
        if not isinstance(other, TransportKernel):
            return NotImplemented
        return self.space is other.space and self.kernel == other.kernel

    def __hash__(self):
        return hash(self.kernel)

    def __repr__(self):
        return f"TransportKernel({self.space!r})"

    @property
    def markovian(self) -> bool:
        return all(mu.total() == ONE for row in self.kernel for mu in row)

    @property
    def bound(self) -> Scalar:
        """``sup_{w, s} T(w, s, G)``."""
        return max((mu.total() for row in self.kernel for mu in row), default=ZERO)

    @classmethod
    def stay_put(cls, space):
        G = space.group
        deltas = tuple(GMeasure.dirac(G, s) for s in G)
        return cls(space, (deltas,) * space.size)

    @classmethod
    def from_base(cls, space, base):
        """Extend ``base[w]`` (the kernel at location 0) by invariance:
        ``T(w, s, B) = base(theta_s w, B - s)``."""
        G = space.group
        base = tuple(base)
        return cls(
            space,
            ((base[space.flow[s][w]].shift(G.neg(s)) for s in G) for w in range(space.size)),
        )

    def base(self):
        """The measures ``T(w, 0, .)``."""
        return tuple(row[0] for row in self.kernel)

    def scale(self, c) -> TransportKernel:
        return TransportKernel(self.space, ((mu.scale(c) for mu in row) for row in self.kernel))

    def __add__(self, other):
        return TransportKernel(
            self.space, ((a + b for a, b in zip(r1, r2)) for r1, r2 in zip(self.kernel, other.kernel))
        )

    def compose(self, other: TransportKernel) -> TransportKernel:
        """First transport by ``self``, then by ``other``."""
        G = self.space.group
        rows = []
        for w in range(self.space.size):
            row = []
            for s in G:
                acc = [ZERO] * G.order
                for t, m in self.kernel[w][s].atoms():
                    for u, m2 in other.kernel[w][t].atoms():
                        acc[u] = acc[u] + m * m2
                row.append(GMeasure(G, acc, check=False))
            rows.append(row)
        return TransportKernel(self.space, rows)


class AllocationRule:
    """Deterministic kernel: ``table[w][s]`` is the location ``s`` is sent to."""

    __slots__ = ("space", "table")

    def __init__(self, space: FlowSpace, table):
        self.space = space
        self.table = tuple(tuple(row) for row in table)

    @classmethod
    def from_pi(cls, space, pi):
        """Covariant rule ``tau(w, s) = pi(theta_s w) + s``."""
        G = space.group
        return cls(space, ((G.add(pi[space.flow[s][w]], s) for s in G) for w in range(space.size)))

    def __getitem__(self, key) -> int:
        w, s = key
        return self.table[w][s]

    @property
    def pi(self):
        return tuple(row[0] for row in self.table)

    def is_covariant(self) -> Verdict:
        """``tau(theta_t w, s - t) = tau(w, s) - t``."""
        space, G = self.space, self.space.group
        for w in range(space.size):
            for s in G:
                for t in G:
                    if self.table[space.flow[t][w]][G.sub(s, t)] != G.sub(self.table[w][s], t):
                        return fails(outcome=w, s=s, t=t)
        return HOLDS

    def kernel(self) -> TransportKernel:
        G = self.space.group
        deltas = [GMeasure.dirac(G, s) for s in G]
        return TransportKernel(self.space, ((deltas[t] for t in row) for row in self.table))


# -- invariance ------------------------------------------------------------


def is_invariant_kernel(T: TransportKernel) -> Verdict:
    """``T(theta_t w, s - t, {b - t}) = T(w, s, {b})`` for all w, s, t, b."""
    space, G = T.space, T.space.group
    for w in range(space.size):
        for s in G:
            mu = T.kernel[w][s].masses
            for t in G:
                nu = T.kernel[space.flow[t][w]][G.sub(s, t)].masses
                for b in G:
                    if nu[G.sub(b, t)] != mu[b]:
                        return fails(outcome=w, s=s, t=t, b=b)
    return HOLDS


def _kappa_fn(kappa):
    if callable(kappa):
        return lambda w, s, t: as_scalar(kappa(w, s, t))
    return lambda w, s, t: as_scalar(kappa[w][s][t])


def is_invariant_kappa(kappa, space: FlowSpace) -> Verdict:
    """``kappa(theta_r w, s - r, t - r) = kappa(w, s, t)``."""
    k = _kappa_fn(kappa)
    G = space.group
    for w in range(space.size):
        for s in G:
            for t in G:
                v = k(w, s, t)
                for r in G:
                    if k(space.flow[r][w], G.sub(s, r), G.sub(t, r)) != v:
                        return fails(outcome=w, s=s, t=t, r=r)
    return HOLDS


def from_kappa(kappa, eta: RandomMeasure) -> TransportKernel:
    """``T(w, s, {t}) = kappa(w, s, t) eta(w){t}`` for an invariant ``kappa``."""
    space = eta.space
    v = is_invariant_kappa(kappa, space)
    if not v:
        raise PreconditionError("kappa is not invariant", v.witness)
    k = _kappa_fn(kappa)
    G = space.group
    rows = []
    for w in range(space.size):
        e = eta[w].masses
        rows.append([GMeasure(G, [k(w, s, t) * e[t] for t in G]) for s in G])
    return TransportKernel(space, rows)


# -- balancing --------------------------------------------------------------


def push(xi: RandomMeasure, T: TransportKernel) -> RandomMeasure:
    """``w -> sum_s xi(w){s} T(w, s, .)``."""
    G = xi.space.group
    out = []
    for w in range(xi.space.size):
        acc = [ZERO] * G.order
        for s, m in xi[w].atoms():
            for t, k in T.kernel[w][s].atoms():
                acc[t] = acc[t] + m * k
        out.append(GMeasure(G, acc, check=False))
    return RandomMeasure(xi.space, out)


def _non_null(P, space):
    if P is None:
        return range(space.size)
    return [w for w, x in enumerate(P.weights) if x]


def is_balancing(T: TransportKernel, xi: RandomMeasure, eta: RandomMeasure, P: OmegaMeasure | None = None) -> Verdict:
    """``push(xi, T) = eta`` on every ``P``-non-null outcome (all if ``P`` is None)."""
    pushed = push(xi, T)
    for w in _non_null(P, xi.space):
        a, b = pushed[w].masses, eta[w].masses
        if a != b:
            t = next(i for i in range(len(a)) if a[i] != b[i])
            return fails(outcome=w, b=t, lhs=a[t], rhs=b[t])
    return HOLDS


def relation(T: TransportKernel, xi: RandomMeasure, w: int) -> dict:
    """The measure ``T(w, s, dt) xi(w, ds)`` on pairs ``(s, t)``."""
    out = {}
    for s, m in xi[w].atoms():
        for t, k in T.kernel[w][s].atoms():
            out[(s, t)] = m * k
    return out


def dual_relation(Tstar: TransportKernel, eta: RandomMeasure, w: int) -> dict:
    """The measure ``T*(w, t, ds) eta(w, dt)`` on pairs ``(s, t)``."""
    out = {}
    for t, m in eta[w].atoms():
        for s, k in Tstar.kernel[w][t].atoms():
            out[(s, t)] = m * k
    return out


def check_relation(T, Tstar, xi, eta, P=None) -> Verdict:
    """The two pair measures agree on every ``P``-non-null outcome."""
    for w in _non_null(P, xi.space):
        r1, r2 = relation(T, xi, w), dual_relation(Tstar, eta, w)
        if r1 != r2:
            s, t = min(k for k in set(r1) | set(r2) if r1.get(k, ZERO) != r2.get(k, ZERO))
            return fails(outcome=w, s=s, t=t, lhs=r1.get((s, t), ZERO), rhs=r2.get((s, t), ZERO))
    return HOLDS


def inverse_kernel(T, xi, eta, P=None, verify: bool = True) -> TransportKernel:
    """Invariant Markovian kernel ``T*`` with the same pair measure as ``T``.

    ``T*(w, t, {s}) = T(w, s, {t}) xi(w){s} / eta(w){t}`` where ``eta(w){t} > 0``
    and ``w`` is balanced; ``delta_t`` elsewhere.
    """
    v = is_balancing(T, xi, eta, P)
    if not v:
        raise PreconditionError("kernel is not balancing", v.witness)
    space, G = xi.space, xi.space.group
    pushed = push(xi, T)
    deltas = [GMeasure.dirac(G, t) for t in G]
    rows = []
    for w in range(space.size):
        e = eta[w].masses
        if pushed[w] != eta[w]:
            rows.append(deltas)
            continue
        acc = [[ZERO] * G.order for _ in G]
        for s, m in xi[w].atoms():
            for t, k in T.kernel[w][s].atoms():
                acc[t][s] = m * k / e[t]
        rows.append([GMeasure(G, acc[t], check=False) if e[t] else deltas[t] for t in G])
    Tstar = TransportKernel(space, rows)
    if verify:
        if not check_relation(T, Tstar, xi, eta, P):
            raise InternalDefect("inverse kernel violates the pair-measure identity")
        if is_invariant_kernel(T) and not is_invariant_kernel(Tstar):
            raise InternalDefect("inverse of an invariant kernel is not invariant")
    return Tstar


# -- exchange formulas --------------------------------------------------------


def _basis_compare(lhs, rhs) -> Verdict:
    for w, (r1, r2) in enumerate(zip(lhs, rhs)):
        for s, (a, b) in enumerate(zip(r1, r2)):
            if a != b:
                return fails(outcome=w, s=s, lhs=a, rhs=b)
    return HOLDS


def _h_fn(h):
    if callable(h):
        return lambda w, s: as_scalar(h(w, s))
    return lambda w, s: as_scalar(h[w][s])


def check_exchange(T, Tstar, xi, eta, P, h=None) -> Verdict:
    """Generalised exchange formula.

    ``E_{P_xi}[sum_t h(theta_t, -t) T(0, {t})] = E_{P_eta}[sum_t h(theta_0, t) T*(0, {t})]``,
    for the given ``h`` or, by default, for every indicator ``h = 1{(w, g)}``.
    """
    rel = check_relation(T, Tstar, xi, eta, P)
    if not rel:
        raise PreconditionError("T and T* do not share the pair measure", rel.witness)
    space, G = P.space, P.space.group
    p_xi = palm_measure(P, xi).measure
    p_eta = palm_measure(P, eta).measure
    if h is not None:
        hf = _h_fn(h)
        lhs = scalar_sum(
            q * k * hf(space.flow[t][w], G.neg(t))
            for w, q in enumerate(p_xi.weights) if q
            for t, k in T.kernel[w][0].atoms()
        )
        rhs = scalar_sum(
            q * k * hf(w, t) for w, q in enumerate(p_eta.weights) if q for t, k in Tstar.kernel[w][0].atoms()
        )
        return HOLDS if lhs == rhs else fails(lhs=lhs, rhs=rhs)
    lhs = [[ZERO] * G.order for _ in range(space.size)]
    for w, q in enumerate(p_xi.weights):
        if q:
            for t, k in T.kernel[w][0].atoms():
                row = lhs[space.flow[t][w]]
                row[G.neg(t)] = row[G.neg(t)] + q * k
    rhs = [[q * Tstar.kernel[w][0][t] for t in G] for w, q in enumerate(p_eta.weights)]
    return _basis_compare(lhs, rhs)


def check_corollary_3_9(T, Tstar, xi, eta, P, f, g) -> Verdict:
    """``E_{P_xi}[g sum_t f(theta_t) T(0, {t})] = E_{P_eta}[f sum_s g(theta_s) T*(0, {s})]``."""
    space = P.space
    ff = lambda w: as_scalar(f(w) if callable(f) else f[w])
    gf = lambda w: as_scalar(g(w) if callable(g) else g[w])
    return check_exchange(T, Tstar, xi, eta, P, h=lambda w, s: ff(w) * gf(space.flow[s][w]))


def check_neveu(xi, eta, P, h=None) -> Verdict:
    """Neveu's exchange formula.

    ``E_{P_xi}[sum_t h(theta_t, -t) eta{t}] = E_{P_eta}[sum_t h(theta_0, t) xi{t}]``.
    """
    space, G = P.space, P.space.group
    p_xi = palm_measure(P, xi).measure
    p_eta = palm_measure(P, eta).measure
    if h is not None:
        hf = _h_fn(h)
        lhs = scalar_sum(
            q * m * hf(space.flow[t][w], G.neg(t))
            for w, q in enumerate(p_xi.weights) if q
            for t, m in eta[w].atoms()
        )
        rhs = scalar_sum(q * m * hf(w, t) for w, q in enumerate(p_eta.weights) if q for t, m in xi[w].atoms())
        return HOLDS if lhs == rhs else fails(lhs=lhs, rhs=rhs)
    lhs = [[ZERO] * G.order for _ in range(space.size)]
    for w, q in enumerate(p_xi.weights):
        if q:
            for t, m in eta[w].atoms():
                row = lhs[space.flow[t][w]]
                row[G.neg(t)] = row[G.neg(t)] + q * m
    rhs = [[q * xi[w][t] for t in G] for w, q in enumerate(p_eta.weights)]
    return _basis_compare(lhs, rhs)


def check_mass_transport_principle(kappa, xi, eta, P, B, B2) -> Verdict:
    """Mass-transport principle for an invariant ``kappa`` and ``|B| = |B2|``:

    ``E_P[sum_{s, t in B} kappa(s, t) eta{s} xi{t}] = E_P[sum_{s in B2, t} kappa(s, t) eta{s} xi{t}]``.
    """
    B, B2 = frozenset(B), frozenset(B2)
    if len(B) != len(B2):
        raise PreconditionError("windows must have equal Haar measure")
    v = is_invariant_kappa(kappa, P.space)
    if not v:
        raise PreconditionError("kappa is not invariant", v.witness)
    require_stationary(P)
    k = _kappa_fn(kappa)
    lhs = rhs = ZERO
    for w, p in enumerate(P.weights):
        if not p:
            continue
        for s, e in eta[w].atoms():
            for t, x in xi[w].atoms():
                if t in B:
                    lhs = lhs + p * k(w, s, t) * e * x
                if s in B2:
                    rhs = rhs + p * k(w, s, t) * e * x
    return HOLDS if lhs == rhs else fails(lhs=lhs, rhs=rhs)


# -- Palm invariance -----------------------------------------------------------


@dataclass(frozen=True)
class TheoremCheck:
    """A direct verdict and the equivalent Palm-level verdict."""

    balancing: Verdict
    palm_identity: Verdict

    @property
    def agree(self) -> bool:
        return bool(self.balancing) == bool(self.palm_identity)


def transport_image(Q: OmegaMeasure, T: TransportKernel) -> OmegaMeasure:
    """``A -> E_Q[sum_t 1_A(theta_t) T(0, {t})]``."""
    space = Q.space
    out = [ZERO] * space.size
    for w, q in enumerate(Q.weights):
        if q:
            for t, k in T.kernel[w][0].atoms():
                v = space.flow[t][w]
                out[v] = out[v] + q * k
    return OmegaMeasure(space, out, check=False)


def _measure_compare(a: OmegaMeasure, b: OmegaMeasure) -> Verdict:
    for w, (x, y) in enumerate(zip(a.weights, b.weights)):
        if x != y:
            return fails(outcome=w, lhs=x, rhs=y)
    return HOLDS


def check_theorem_4_1(T, xi, eta, P) -> TheoremCheck:
    """Balancing vs ``E_{P_xi}[sum_t f(theta_t) T(0, {t})] = E_{P_eta}[f]`` for all f."""
    require_stationary(P)
    balancing = is_balancing(T, xi, eta, P)
    lhs = transport_image(palm_measure(P, xi, validate=False).measure, T)
    rhs = palm_measure(P, eta, validate=False).measure
    return TheoremCheck(balancing, _measure_compare(lhs, rhs))


def shift_by_alloc(tau: AllocationRule) -> tuple:
    """``theta_tau(w) = theta_{tau(w, 0)}(w)`` as an outcome table."""
    flow = tau.space.flow
    return tuple(flow[tau.table[w][0]][w] for w in range(tau.space.size))


def is_balancing_alloc(tau: AllocationRule, xi, eta, P=None) -> Verdict:
    """``sum_s 1{tau(s) in .} xi{s} = eta`` on ``P``-non-null outcomes."""
    G = xi.space.group
    for w in _non_null(P, xi.space):
        acc = [ZERO] * G.order
        for s, m in xi[w].atoms():
            t = tau.table[w][s]
            acc[t] = acc[t] + m
        e = eta[w].masses
        for t in G:
            if acc[t] != e[t]:
                return fails(outcome=w, b=t, lhs=acc[t], rhs=e[t])
    return HOLDS


def check_prop_4_5(tau: AllocationRule, xi, eta, P) -> TheoremCheck:
    """Balancing of ``tau`` vs ``P_xi(theta_tau in .) = P_eta``."""
    v = tau.is_covariant()
    if not v:
        raise PreconditionError("allocation rule is not covariant", v.witness)
    require_stationary(P)
    lhs = palm_measure(P, xi, validate=False).measure.image(shift_by_alloc(tau))
    rhs = palm_measure(P, eta, validate=False).measure
    return TheoremCheck(is_balancing_alloc(tau, xi, eta, P), _measure_compare(lhs, rhs))


def check_corollary_4_7(T, xi, eta, P) -> TheoremCheck:
    """Balancing of the intensity-normalised measures vs modified Palm invariance."""
    require_stationary(P)
    xi_hat, eta_hat = sample_intensity(P, xi), sample_intensity(P, eta)
    _require_positive_intensity(P, xi_hat, "xi")
    _require_positive_intensity(P, eta_hat, "eta")
    xi_n = intensity_normalized(P, xi, xi_hat)
    eta_n = intensity_normalized(P, eta, eta_hat)
    lhs = transport_image(modified_palm(P, xi), T)
    rhs = modified_palm(P, eta)
    return TheoremCheck(is_balancing(T, xi_n, eta_n, P), _measure_compare(lhs, rhs))


def haar_scaled(P, eta) -> RandomMeasure:
    """``eta_hat * lambda``: Haar measure scaled by the sample intensity of eta."""
    G = P.space.group
    eta_hat = sample_intensity(P, eta)
    return RandomMeasure(P.space, (GMeasure(G, (h,) * G.order, check=False) for h in eta_hat))


def check_example_4_8(T, eta, P) -> TheoremCheck:
    """``(eta_hat lambda, eta)``-balancing vs ``E_P[sum_t 1_A(theta_t) T(0, {t})] = P*_eta(A)``."""
    require_stationary(P)
    eta_hat = sample_intensity(P, eta)
    _require_positive_intensity(P, eta_hat, "eta")
    xi = haar_scaled(P, eta)
    lhs = transport_image(P, T)
    return TheoremCheck(is_balancing(T, xi, eta, P), _measure_compare(lhs, modified_palm(P, eta)))


def check_example_4_9(tau: AllocationRule, eta, P) -> TheoremCheck:
    """Quota property ``|{s : tau(s) = t}| = 1/eta_hat`` on supp eta vs
    ``P(theta_tau in .) = P*_eta``."""
    v = tau.is_covariant()
    if not v:
        raise PreconditionError("allocation rule is not covariant", v.witness)
    require_stationary(P)
    eta_hat = sample_intensity(P, eta)
    _require_positive_intensity(P, eta_hat, "eta")
    quota = HOLDS
    G = P.space.group
    for w in _non_null(P, P.space):
        counts = [0] * G.order
        for s in G:
            counts[tau.table[w][s]] += 1
        supp = eta[w].support()
        target = ONE / eta_hat[w]
        for t in G:
            want = target if t in supp else ZERO
            if Scalar(counts[t]) != want:
                quota = fails(outcome=w, b=t, lhs=Scalar(counts[t]), rhs=want)
                break
        if not quota:
            break
    lhs = P.image(shift_by_alloc(tau))
    return TheoremCheck(quota, _measure_compare(lhs, modified_palm(P, eta)))
