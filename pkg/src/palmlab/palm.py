"""Palm measures and the identities that characterise them.

Everything is exact: a Palm measure is a weight table over the outcomes and
each checker compares full tables over a complete indicator basis, so a
``True`` verdict covers every nonnegative test function.
"""

from __future__ import annotations

from dataclasses import dataclass

from .algebra import ONE, ZERO, Scalar, as_scalar, scalar_sum
from .errors import InternalDefect, PreconditionError
from .space import (
    OmegaMeasure,
    RandomMeasure,
    conditional_on_invariant,
    is_stationary,
    require_invariant,
    require_stationary,
)
from .verdict import HOLDS, Verdict, fails


@dataclass(frozen=True)
class PalmResult:
    measure: OmegaMeasure
    intensity: Scalar
    normalized: OmegaMeasure | None


def palm_measure(P: OmegaMeasure, xi: RandomMeasure, B=None, validate: bool = True) -> PalmResult:
    """Palm measure of ``xi`` with respect to the stationary measure ``P``.

    ``P_xi{w'} = |B|^-1 sum_w sum_{s in B} P{w} xi(w){s} 1{theta_s w = w'}``.
    ``B`` defaults to ``{0}``; the result does not depend on it.
    """
    space = P.space
    B = frozenset((0,)) if B is None else frozenset(B)
    if not B:
        raise PreconditionError("window B must be nonempty")
    if validate:
        require_stationary(P)
        require_invariant(xi, "xi")
    flow = space.flow
    out = [ZERO] * space.size
    for w, p in enumerate(P.weights):
        if not p:
            continue
        mu = xi[w].masses
        for s in B:
            m = mu[s]
            if m:
                v = flow[s][w]
                out[v] = out[v] + p * m
    if len(B) != 1:
        k = Scalar(len(B))
        out = [x / k for x in out]
    measure = OmegaMeasure(space, out, check=False)
    intensity = measure.total()
    normalized = measure.scale(ONE / intensity) if intensity else None
    return PalmResult(measure, intensity, normalized)


def check_campbell(P: OmegaMeasure, xi: RandomMeasure, f=None) -> Verdict:
    """Refined Campbell theorem.

    ``E_P[sum_s f(theta_s w, s) xi(w){s}] = E_{P_xi}[sum_s f(w, s)]``.
    Without ``f`` the identity is checked for every indicator
    ``f = 1{(w*, s*)}``; with ``f`` (a callable ``(w, s) -> value``) just for it.
    """
    space = P.space
    G = space.group
    palm = palm_measure(P, xi).measure
    if f is not None:
        lhs = ZERO
        for w, p in enumerate(P.weights):
            if p:
                for s, m in xi[w].atoms():
                    lhs = lhs + p * m * as_scalar(f(space.flow[s][w], s))
        rhs = ZERO
        for w, q in enumerate(palm.weights):
            if q:
                rhs = rhs + q * scalar_sum(as_scalar(f(w, s)) for s in G)
        return HOLDS if lhs == rhs else fails(lhs=lhs, rhs=rhs)
    lhs = [[ZERO] * G.order for _ in range(space.size)]
    for w, p in enumerate(P.weights):
        if p:
            for s, m in xi[w].atoms():
                row = lhs[space.flow[s][w]]
                row[s] = row[s] + p * m
    for target in range(space.size):
        for s in G:
            if lhs[target][s] != palm.weights[target]:
                return fails(outcome=target, s=s, lhs=lhs[target][s], rhs=palm.weights[target])
    return HOLDS


def h_tilde(mu, s: int) -> Scalar:
    """Weight function with ``sum_s h(mu, s) mu{s} = 1`` for nonzero ``mu``."""
    sq = scalar_sum(m * m for _, m in mu.atoms())
    return mu[s] / sq


def inversion(Q: OmegaMeasure, xi: RandomMeasure) -> OmegaMeasure:
    """Recover the stationary measure on ``{xi(G) > 0}`` from its Palm measure.

    ``P{w*} = sum_w Q{w} sum_s h(xi(theta_-s w), s) 1{theta_-s w = w*}`` with
    ``h(mu, s) = mu{s} / sum_t mu{t}^2``.
    """
    space = Q.space
    G = space.group
    flow = space.flow
    for w, q in enumerate(Q.weights):
        if q and xi[w].is_zero():
            raise PreconditionError("Q charges an outcome with xi(G) = 0", witness={"outcome": w})
    sq = [scalar_sum(m * m for _, m in xi[w].atoms()) for w in range(space.size)]
    out = [ZERO] * space.size
    for w, q in enumerate(Q.weights):
        if not q:
            continue
        for s in G:
            v = flow[G.neg(s)][w]
            m = xi[v][s]
            if m:
                out[v] = out[v] + q * m / sq[v]
    return OmegaMeasure(space, out, check=False)


def check_mecke(Q: OmegaMeasure, xi: RandomMeasure) -> Verdict:
    """Mecke's characterisation of Palm measures.

    Checks ``E_Q[sum_s g(theta_s, -s) xi{s}] = E_Q[sum_s g(theta_0, s) xi{s}]``
    for every indicator ``g = 1{(w', s')}``, i.e.
    ``sum_w Q{w} xi(w){-s'} 1{theta_-s' w = w'} = Q{w'} xi(w'){s'}``.
    The witness is the first failing ``(outcome, s)`` pair.
    """
    space = Q.space
    G = space.group
    for w, q in enumerate(Q.weights):
        if q and xi[w].is_zero():
            raise PreconditionError("Q charges an outcome with xi(G) = 0", witness={"outcome": w})
    # lhs[w'][s'] accumulated by pushing each charged outcome forward
    lhs = [[ZERO] * G.order for _ in range(space.size)]
    for w, q in enumerate(Q.weights):
        if not q:
            continue
        for t, m in xi[w].atoms():
            # t = -s', target theta_t w
            v = space.flow[t][w]
            row = lhs[v]
            sp = G.neg(t)
            row[sp] = row[sp] + q * m
    for v in range(space.size):
        q = Q.weights[v]
        mu = xi[v].masses
        row = lhs[v]
        for s in G:
            rhs = q * mu[s] if q else ZERO
            if row[s] != rhs:
                return fails(outcome=v, s=s, lhs=row[s], rhs=rhs)
    return HOLDS


def sample_intensity(P: OmegaMeasure, xi: RandomMeasure, B=None) -> tuple:
    """``E_P[xi(B) | invariant field]`` for a singleton window ``B``."""
    B = frozenset((0,)) if B is None else frozenset(B)
    if len(B) != 1:
        raise PreconditionError("sample intensity needs a window of Haar measure 1")
    (b,) = B
    return conditional_on_invariant(P, [xi[w][b] for w in range(P.space.size)])


def intensity_normalized(P: OmegaMeasure, xi: RandomMeasure, xi_hat=None) -> RandomMeasure:
    """``xi' = xi / xi_hat`` where ``0 < xi_hat``, the null measure elsewhere."""
    if xi_hat is None:
        xi_hat = sample_intensity(P, xi)
    return xi.scale_by(ONE / h if h else ZERO for h in xi_hat)


def _require_positive_intensity(P, xi_hat, name):
    for orbit in P.space.orbits():
        if scalar_sum(P.weights[w] for w in orbit) and not xi_hat[orbit[0]]:
            raise PreconditionError(
                f"{name} has zero sample intensity on a non-null orbit",
                witness={"orbit": P.space.orbits().orbit_of(orbit[0])},
            )


def modified_palm(P: OmegaMeasure, xi: RandomMeasure, check: bool = True) -> OmegaMeasure:
    """Modified Palm measure ``A -> E_{P_xi}[xi_hat^-1 1_A]``.

    With ``check`` the result is compared against the Palm measure of the
    intensity-normalised measure ``xi_hat^-1 xi`` and a mismatch raises.
    """
    xi_hat = sample_intensity(P, xi)
    _require_positive_intensity(P, xi_hat, "xi")
    palm = palm_measure(P, xi).measure
    out = [q / xi_hat[w] if q else ZERO for w, q in enumerate(palm.weights)]
    result = OmegaMeasure(P.space, out, check=False)
    if check:
        other = palm_measure(P, intensity_normalized(P, xi, xi_hat), validate=False).measure
        if other != result:
            raise InternalDefect("modified Palm measure disagrees with the Palm measure of xi/xi_hat")
    return result


def is_palm_oracle(Q: OmegaMeasure, xi: RandomMeasure) -> bool:
    """Independent decision of whether ``Q`` is a Palm measure of ``xi``.

    Builds the candidate stationary measure by the inversion formula and
    checks that it is stationary and reproduces ``Q``. Used to cross-check
    the Mecke and mass-stationarity checkers.
    """
    P = inversion(Q, xi)
    if not is_stationary(P):
        return False
    return palm_measure(P, xi, validate=False).measure == Q


__all__ = [
    "PalmResult",
    "check_campbell",
    "check_mecke",
    "h_tilde",
    "intensity_normalized",
    "inversion",
    "is_palm_oracle",
    "modified_palm",
    "palm_measure",
    "sample_intensity",
]
