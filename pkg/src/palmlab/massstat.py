"""Mass-stationarity and the randomized-window kernels.

``T_C`` picks a location uniformly in the mass of ``xi`` inside the window
``C + t``. A measure ``Q`` is mass-stationary when moving the origin by
``T_C(-U)`` with ``U`` uniform on ``C`` leaves the joint law of the shifted
outcome and ``U + V`` unchanged, for every window ``C``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import config
from .algebra import (
    ONE,
    SQRT2,
    ZERO,
    FiniteAbelianGroup,
    GMeasure,
    Scalar,
    as_scalar,
    rational,
    scalar_sum,
)
from .errors import CapExceeded, InternalDefect, PreconditionError
from .fleet import random_base
from .palm import palm_measure
from .space import (
    OmegaMeasure,
    RandomMeasure,
    lift,
    make_mark_field,
    product_space,
    require_invariant,
)
from .transport import AllocationRule, TransportKernel, push, shift_by_alloc
from .verdict import HOLDS, Verdict, fails

FALLBACKS = ("stay", "uniform")


def _window(group, C) -> tuple:
    C = tuple(sorted(set(C)))
    if not C:
        raise PreconditionError("window C must be nonempty")
    if not all(0 <= c < group.order for c in C):
        raise ValueError(f"window {C} is not a subset of the group")
    return C


def uniform_on(group: FiniteAbelianGroup, C) -> GMeasure:
    """The uniform distribution on ``C``."""
    C = _window(group, C)
    w = ONE / Scalar(len(C))
    masses = [ZERO] * group.order
    for c in C:
        masses[c] = w
    return GMeasure(group, masses, check=False)


def _t_c(xi: RandomMeasure, C, w: int, t: int, fallback: str) -> GMeasure:
    G = xi.space.group
    mu = xi[w].masses
    window = [G.add(c, t) for c in C]
    mass = scalar_sum(mu[b] for b in window)
    if mass:
        out = [ZERO] * G.order
        for b in window:
            if mu[b]:
                out[b] = mu[b] / mass
        return GMeasure(G, out, check=False)
    if fallback == "stay":
        return GMeasure.dirac(G, t)
    return GMeasure.haar(G).scale(ONE / Scalar(G.order))


def kernel_T_C(xi: RandomMeasure, C, fallback: str = "stay") -> TransportKernel:
    """Uniform pick in the ``xi``-mass of ``C + t``.

    Where ``C + t`` carries no mass the kernel stays put (``fallback="stay"``)
    or picks uniformly on the whole group (``"uniform"``); both are invariant.
    """
    if fallback not in FALLBACKS:
        raise ValueError(f"fallback must be one of {FALLBACKS}")
    G = xi.space.group
    C = _window(G, C)
    return TransportKernel(
        xi.space, ((_t_c(xi, C, w, t, fallback) for t in G) for w in range(xi.space.size))
    )


def _tcd_base(xi, C, D, w, fallback) -> GMeasure:
    """``T_{C,D}(w, 0, .) = |C|^-1 sum_{r in C} 1_D(. + r) T_C(w, -r, .)``."""
    G = xi.space.group
    inv = ONE / Scalar(len(C))
    acc = [ZERO] * G.order
    for r in C:
        for s, m in _t_c(xi, C, w, G.neg(r), fallback).atoms():
            if G.add(s, r) in D:
                acc[s] = acc[s] + inv * m
    return GMeasure(G, acc, check=False)


def kernel_T_CD(xi: RandomMeasure, C, D, fallback: str = "stay") -> TransportKernel:
    """Weighted kernel sending ``xi`` to ``lambda_C(D) xi``."""
    G = xi.space.group
    C = _window(G, C)
    D = frozenset(D)
    return TransportKernel.from_base(xi.space, (_tcd_base(xi, C, D, w, fallback) for w in range(xi.space.size)))


def check_6_4(xi: RandomMeasure, C, D, fallback: str = "stay") -> Verdict:
    """``sum_t xi{t} T_{C,D}(t, .) = lambda_C(D) xi`` on every outcome."""
    G = xi.space.group
    C = _window(G, C)
    factor = uniform_on(G, C).mass_of(frozenset(D))
    pushed = push(xi, kernel_T_CD(xi, C, D, fallback))
    for w in range(xi.space.size):
        want = xi[w].scale(factor)
        if pushed[w] != want:
            b = next(b for b in G if pushed[w][b] != want[b])
            return fails(outcome=w, b=b, lhs=pushed[w][b], rhs=want[b])
    return HOLDS


# -- mass-stationarity ---------------------------------------------------------


@dataclass(frozen=True)
class MassStatReport:
    holds: bool
    witness: dict | None = None
    sets_checked: int = 0
    details: dict = field(default_factory=dict, compare=False)

    def __bool__(self):
        return self.holds


def default_windows(group: FiniteAbelianGroup) -> list:
    """All nonempty subsets up to the configured order, else singletons
    and the initial intervals of the enumeration order."""
    if group.order <= config.all_windows_max_order:
        return [tuple(sorted(C)) for C in group.subsets() if C]
    singles = [(g,) for g in group]
    intervals = [tuple(range(k)) for k in range(2, group.order + 1)]
    return singles + intervals


def _require_charged(Q, xi):
    for w, q in enumerate(Q.weights):
        if q and xi[w].is_zero():
            raise PreconditionError("Q charges an outcome with xi(G) = 0", witness={"outcome": w})


def window_table(Q: OmegaMeasure, xi: RandomMeasure, C, fallback: str = "stay"):
    """Both sides of the window identity for one ``C``, times ``|C|``.

    ``lhs[w'][g'] = |C| E_Q[sum_{r in C} sum_s 1{theta_s = w', s + r = g'} T_C(-r, {s})] / |C|``
    and ``rhs[w'][g'] = Q{w'} 1{g' in C}``.
    """
    space, G = Q.space, Q.space.group
    C = _window(G, C)
    lhs = [[ZERO] * G.order for _ in range(space.size)]
    for w, q in enumerate(Q.weights):
        if not q:
            continue
        for r in C:
            for s, m in _t_c(xi, C, w, G.neg(r), fallback).atoms():
                row = lhs[space.flow[s][w]]
                g = G.add(s, r)
                row[g] = row[g] + q * m
    rhs = [[q if g in C else ZERO for g in G] for q in Q.weights]
    return lhs, rhs


def is_mass_stationary(Q: OmegaMeasure, xi: RandomMeasure, Cs=None, fallback: str = "stay") -> MassStatReport:
    """Exact window identity over the indicator basis ``1{w'} x 1{g'}``.

    Windows are tried in the given order (default :func:`default_windows`)
    and the first failing ``(C, outcome, element)`` is reported with the
    two side values.
    """
    _require_charged(Q, xi)
    G = Q.space.group
    windows = default_windows(G) if Cs is None else [_window(G, C) for C in Cs]
    for n, C in enumerate(windows, 1):
        lhs, rhs = window_table(Q, xi, C, fallback)
        k = Scalar(len(C))
        for w, (r1, r2) in enumerate(zip(lhs, rhs)):
            for g in G:
                if r1[g] != r2[g]:
                    return MassStatReport(
                        False,
                        {"C": tuple(C), "outcome": w, "element": g, "lhs": r1[g] / k, "rhs": r2[g] / k},
                        n,
                    )
    return MassStatReport(True, None, len(windows))


def exact_tv_gap(Q: OmegaMeasure, xi: RandomMeasure, C, statistic=None, fallback: str = "stay") -> Scalar:
    """Total variation between the laws of ``(stat(theta_V), U + V)`` and
    ``(stat(theta_0), U)`` under the normalised ``Q``."""
    lhs, rhs = window_table(Q, xi, C, fallback)
    norm = Q.total() * Scalar(len(_window(Q.space.group, C)))
    acc = {}
    for w in range(Q.space.size):
        key = w if statistic is None else statistic(w)
        for g in Q.space.group:
            d = lhs[w][g] - rhs[w][g]
            if d:
                acc[(key, g)] = acc.get((key, g), ZERO) + d
    return scalar_sum(abs(v) for v in acc.values()) / (norm * 2)


# -- preserving-kernel battery ---------------------------------------------------


def _is_fixed(Q: OmegaMeasure, base: dict) -> bool:
    """``Q`` is invariant under the kernel whose location-0 measure at each
    charged outcome ``w`` is the mass list ``base[w]``."""
    space = Q.space
    out = [ZERO] * space.size
    for w, row in base.items():
        q = Q.weights[w]
        for t, k in enumerate(row):
            if k:
                v = space.flow[t][w]
                out[v] = out[v] + q * k
    return tuple(out) == Q.weights


def preserving_base(xi: RandomMeasure, base, outcomes=None) -> dict:
    """Location-0 mass lists of ``T`` followed by its inverse kernel.

    ``T`` is the invariant Markovian extension of ``base``; the composite
    kernel sends ``xi`` to itself on every outcome. Only ``outcomes``
    (default: all) are computed.
    """
    space, G = xi.space, xi.space.group
    flow = space.flow
    out = {}
    for w in range(space.size) if outcomes is None else outcomes:
        mu = xi[w].masses
        # T(w, s, {t}) = base[theta_s w]{t - s}
        eta = [ZERO] * G.order
        for s in G:
            if mu[s]:
                for d, k in base[flow[s][w]].atoms():
                    t = G.add(d, s)
                    eta[t] = eta[t] + mu[s] * k
        acc = [ZERO] * G.order
        for t, k in base[w].atoms():
            if not eta[t]:
                acc[t] = acc[t] + k
                continue
            for u in G:
                if mu[u]:
                    m = base[flow[u][w]][G.sub(t, u)]
                    if m:
                        acc[u] = acc[u] + k * m * mu[u] / eta[t]
        out[w] = acc
    return out


def normalized_window_family(xi: RandomMeasure, C, outcomes) -> dict:
    """``{d: {w: masses}}`` for the kernels ``T_{C,{d}} / lambda_C({d})``, ``d in C``,
    at location 0 and the given outcomes."""
    G = xi.space.group
    C = _window(G, C)
    fam = {d: {w: [ZERO] * G.order for w in outcomes} for d in C}
    for w in outcomes:
        for r in C:
            for s, m in _t_c(xi, C, w, G.neg(r), "stay").atoms():
                d = G.add(s, r)
                if d in fam:
                    row = fam[d][w]
                    row[s] = row[s] + m
    return fam


@dataclass(frozen=True)
class Theorem72Report:
    mass_stationary: MassStatReport
    kernel_invariance: Verdict
    kernels_checked: int

    @property
    def agree(self) -> bool:
        return bool(self.mass_stationary) == bool(self.kernel_invariance)


def check_theorem_7_2(Q, xi, fleet_size: int = 50, seed: int = 0, Cs=None) -> Theorem72Report:
    """Mass-stationarity against invariance under preserving kernels.

    The battery holds every normalised ``T_{C,{d}}`` (``d in C``, which spans
    all ``T_{C,D}`` by additivity in ``D``) and ``fleet_size`` random
    preserving kernels: half of the form ``T`` then ``T*``, half convex
    mixtures of the ``T_{C,{d}}``. Only outcomes charged by ``Q`` matter
    for invariance of ``Q``, so kernels are evaluated there alone.
    """
    require_invariant(xi, "xi")
    ms = is_mass_stationary(Q, xi, Cs)
    space, G = Q.space, Q.space.group
    charged = [w for w, q in enumerate(Q.weights) if q]
    windows = default_windows(G) if Cs is None else [_window(G, C) for C in Cs]
    checked = 0
    verdict = HOLDS
    family = {}
    for C in windows:
        for d, base in normalized_window_family(xi, C, charged).items():
            family[(C, d)] = base
            checked += 1
            if verdict and not _is_fixed(Q, base):
                verdict = fails(C=C, D=(d,))
    rng = np.random.default_rng(seed)
    keys = list(family)
    for n in range(fleet_size):
        if n % 2 == 0:
            base = preserving_base(xi, random_base(space, rng), charged)
        else:
            picks = [keys[int(i)] for i in rng.choice(len(keys), size=min(3, len(keys)), replace=False)]
            weights = [int(x) for x in rng.integers(1, 5, size=len(picks))]
            tot = Scalar(sum(weights))
            base = {w: [ZERO] * G.order for w in charged}
            for key, wt in zip(picks, weights):
                c = Scalar(wt) / tot
                for w in charged:
                    row, add = base[w], family[key][w]
                    for t in G:
                        if add[t]:
                            row[t] = row[t] + c * add[t]
        checked += 1
        if verdict and not _is_fixed(Q, base):
            verdict = fails(kernel=n)
    return Theorem72Report(ms, verdict, checked)


# -- worked examples -----------------------------------------------------------------


def example_6_5(C=(0, 1), A=None):
    """Single-window transport on ``Z_3`` with fair coin marks.

    ``Q`` is the normalised Palm measure of the configuration measure and
    ``A`` defaults to the event that site 1 carries a point. Returns
    ``(E_Q[sum_s 1_A(theta_s) T_C(0, {s})], Q(A))``.
    """
    from .algebra import cyclic

    half = Scalar(rational("1/2"))
    space, P, xi = make_mark_field(cyclic(3), (0, 1), (half, half))
    Q = palm_measure(P, xi).normalized
    if A is None:
        A = frozenset(w for w in range(space.size) if xi[w][1] == ONE)
    A = frozenset(A)
    T = kernel_T_C(xi, C)
    lhs = scalar_sum(
        q * m for w, q in enumerate(Q.weights) if q for s, m in T[w, 0].atoms() if space.flow[s][w] in A
    )
    return lhs, Q.measure_of(A)


@dataclass
class Example71Report:
    group: FiniteAbelianGroup
    p: Scalar
    p_second: Scalar
    outcomes: int
    rules_total: int
    exhaustive: bool
    orbit_rule_counts: dict
    all_first_preserving: bool
    all_invariant: bool
    failures: list
    mass_stationary: MassStatReport
    Q: OmegaMeasure = field(repr=False)
    xi: RandomMeasure = field(repr=False)


def _palm_by_adjoining(space, law):
    """Bernoulli law conditioned to have a point at 0: ``1{c_0 = 1} prod_{b != 0} law(c_b)``."""
    out = []
    for c in space.configs:
        if c[0] != 1:
            out.append(ZERO)
            continue
        p = ONE
        for m in c[1:]:
            p = p * law[m]
        out.append(p)
    return OmegaMeasure(space, out, check=False)


def _orbit_rules(space, xi, orbit, limit, rng):
    """Preserving maps ``pi`` on the charged points of ``orbit``.

    A covariant rule is ``tau(w, s) = pi(theta_s w) + s``; preservation at one
    representative implies it on the whole orbit. Points carrying no mass at
    0 never move mass and are left at ``pi = 0``.
    """
    G = space.group
    w0 = orbit[0]
    mu = xi[w0].masses
    charged = [v for v in orbit if xi[v][0]]
    fibres = {v: [s for s in G if space.flow[s][w0] == v] for v in charged}
    acc = [ZERO] * G.order
    pi = {v: 0 for v in orbit}
    found = []
    order = list(G)

    def dfs(i):
        if limit is not None and len(found) >= limit:
            return
        if i == len(charged):
            if all(acc[t] == mu[t] for t in G):
                found.append(dict(pi))
            return
        v = charged[i]
        choices = order if rng is None else [int(x) for x in rng.permutation(G.order)]
        for g in choices:
            moves = [(G.add(g, s), mu[s]) for s in fibres[v]]
            for t, m in moves:
                acc[t] = acc[t] + m
            if all(acc[t] <= mu[t] for t, _ in moves):
                pi[v] = g
                dfs(i + 1)
            for t, m in moves:
                acc[t] = acc[t] - m
        pi[v] = 0

    dfs(0)
    return found, len(orbit) - len(charged)


def example_7_1(group: FiniteAbelianGroup, p, p_second=None, exhaustive_max_order: int = 4,
                sample_limit: int = 64, seed: int = 0) -> Example71Report:
    """Irrational atom ratio: preserving allocations exist but ``Q`` is not
    mass-stationary.

    ``Q`` is (Bernoulli(p) field with a point at 0) times (independent
    Bernoulli(p_second) field) and ``xi = xi_1 + sqrt(2) xi_2``.
    """
    p = as_scalar(p)
    p2 = p if p_second is None else as_scalar(p_second)
    if not (ZERO < p < ONE):
        raise PreconditionError("need 0 < p < 1")
    if not (ZERO <= p2 < ONE):
        raise PreconditionError("need 0 <= p_second < 1")
    law1 = (ONE - p, p)
    first = make_mark_field(group, (0, 1), law1)
    second = make_mark_field(group, (0, 1), (ONE - p2, p2))
    if first.space.size * second.space.size > config.exact_cap:
        raise CapExceeded("product space exceeds the exact-mode cap")
    Q1 = palm_measure(first.P, first.xi).normalized
    if Q1 != _palm_by_adjoining(first.space, law1):
        raise InternalDefect("Palm law differs from the adjoined-point construction")
    Q = product_space(Q1, second.P)
    space = Q.space
    xi1 = lift(first.xi, space, 0)
    xi = xi1 + lift(second.xi, space, 1).scale(SQRT2)

    exhaustive = group.order <= exhaustive_max_order
    rng = None if exhaustive else np.random.default_rng(seed)
    limit = None if exhaustive else sample_limit
    counts, failures = {}, []
    total = 1
    all_first = all_inv = True
    for k, orbit in enumerate(space.orbits()):
        rules, free = _orbit_rules(space, xi, orbit, limit, rng)
        counts[k] = len(rules)
        total *= len(rules) * group.order ** free
        qmass = [Q.weights[v] for v in orbit]
        for pi in rules:
            full = [0] * space.size
            for v, g in pi.items():
                full[v] = g
            tau = AllocationRule.from_pi(space, full)
            w0 = orbit[0]
            # first-species preservation at the representative
            acc = [ZERO] * group.order
            for s, m in xi1[w0].atoms():
                t = tau[w0, s]
                acc[t] = acc[t] + m
            first_ok = tuple(acc) == xi1[w0].masses
            image = [ZERO] * space.size
            moved = shift_by_alloc(tau)
            for v, q in zip(orbit, qmass):
                if q:
                    image[moved[v]] = image[moved[v]] + q
            inv_ok = all(image[v] == q for v, q in zip(orbit, qmass))
            all_first &= first_ok
            all_inv &= inv_ok
            if not (first_ok and inv_ok) and len(failures) < 10:
                failures.append({"orbit": k, "pi": pi, "first_preserving": first_ok, "invariant": inv_ok})
    ms = is_mass_stationary(Q, xi)
    return Example71Report(group, p, p2, space.size, total, exhaustive, counts, all_first, all_inv,
                           failures, ms, Q, xi)


__all__ = [
    "Example71Report",
    "MassStatReport",
    "Theorem72Report",
    "check_6_4",
    "check_theorem_7_2",
    "default_windows",
    "exact_tv_gap",
    "example_6_5",
    "example_7_1",
    "is_mass_stationary",
    "kernel_T_C",
    "kernel_T_CD",
    "normalized_window_family",
    "preserving_base",
    "uniform_on",
    "window_table",
]
