"""Deciding and constructing balancing invariant kernels.

A balancing invariant kernel between ``xi`` and ``eta`` exists exactly when
their sample intensities agree on every non-null orbit. When they do, an
explicit kernel is built orbit by orbit: from each outcome, pick a target
outcome of the same orbit with the orbit-conditioned Palm law of ``eta`` and
move by a uniformly chosen shift that realises it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .algebra import ONE, ZERO, GMeasure, Scalar, scalar_sum
from .errors import InternalDefect, PreconditionError
from .palm import palm_measure, sample_intensity
from .space import OmegaMeasure, RandomMeasure, require_invariant, require_stationary
from .transport import TransportKernel, check_theorem_4_1, is_invariant_kernel
from .verdict import HOLDS, Verdict, fails


@dataclass(frozen=True)
class ExistenceVerdict:
    exists: bool
    witness_orbit: tuple | None = None
    kernel: TransportKernel | None = None

    def __bool__(self):
        return self.exists


def _require_positive_intensity(P: OmegaMeasure, xi: RandomMeasure, name: str):
    if not palm_measure(P, xi, validate=False).intensity:
        raise PreconditionError(f"{name} has zero intensity")


def check_condition_5_1(P: OmegaMeasure, xi: RandomMeasure, eta: RandomMeasure) -> Verdict:
    """Sample intensities of ``xi`` and ``eta`` agree on every non-null orbit.

    The witness names the first failing orbit (as its tuple of outcomes)
    with both intensities.
    """
    require_stationary(P)
    require_invariant(xi, "xi")
    require_invariant(eta, "eta")
    _require_positive_intensity(P, xi, "xi")
    _require_positive_intensity(P, eta, "eta")
    xi_hat, eta_hat = sample_intensity(P, xi), sample_intensity(P, eta)
    for orbit in P.space.orbits():
        if not scalar_sum(P.weights[w] for w in orbit):
            continue
        a, b = xi_hat[orbit[0]], eta_hat[orbit[0]]
        if a != b:
            return fails(orbit=orbit, lhs=a, rhs=b)
    return HOLDS


def construct_balancing_kernel(P: OmegaMeasure, xi: RandomMeasure, eta: RandomMeasure) -> ExistenceVerdict:
    """Build a Markovian invariant kernel balancing ``xi`` onto ``eta``.

    Returns ``exists=False`` with the failing orbit when the intensities
    disagree somewhere. The kernel is verified against both the balancing
    definition and the Palm identity before it is returned.
    """
    cond = check_condition_5_1(P, xi, eta)
    if not cond:
        return ExistenceVerdict(False, witness_orbit=cond.witness["orbit"])
    space, G = P.space, P.space.group
    p_eta = palm_measure(P, eta, validate=False).measure
    base = [GMeasure.dirac(G, 0)] * space.size
    for orbit in space.orbits():
        if not scalar_sum(P.weights[w] for w in orbit):
            continue
        mass = scalar_sum(p_eta.weights[w] for w in orbit)
        if not mass:
            # both intensities vanish here: nothing to move
            continue
        target = {v: p_eta.weights[v] / mass for v in orbit if p_eta.weights[v]}
        for w in orbit:
            fibres = {}
            for s in G:
                fibres.setdefault(space.flow[s][w], []).append(s)
            acc = [ZERO] * G.order
            for v, q in target.items():
                share = q / Scalar(len(fibres[v]))
                for s in fibres[v]:
                    acc[s] = acc[s] + share
            base[w] = GMeasure(G, acc, check=False)
    T = TransportKernel.from_base(space, base)
    if not is_invariant_kernel(T):
        raise InternalDefect("constructed kernel is not invariant")
    check = check_theorem_4_1(T, xi, eta, P)
    if not (check.balancing and check.palm_identity):
        raise InternalDefect("constructed kernel is not balancing")
    if not all(mu.total() == ONE for mu in base):
        raise InternalDefect("constructed kernel is not Markovian")
    return ExistenceVerdict(True, kernel=T)


def orbit_average(P: OmegaMeasure, xi: RandomMeasure, orbit) -> Scalar:
    """Direct ``sum_{w in O} P{w} xi(w){0} / P(O)``, independent of the
    conditional-expectation helper; used to re-verify witnesses."""
    mass = scalar_sum(P.weights[w] for w in orbit)
    return scalar_sum(P.weights[w] * xi[w][0] for w in orbit) / mass
