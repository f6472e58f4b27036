"""Seeded generators of random exact instances for property testing.

All randomness comes from a ``numpy.random.Generator``; all produced
numbers are exact scalars.
"""

from __future__ import annotations

import numpy as np

from .algebra import (
    ONE,
    ZERO,
    FiniteAbelianGroup,
    GMeasure,
    Scalar,
    rational,
    scalar_sum,
)
from .space import Model, OmegaMeasure, configuration_space, make_mark_field

GROUPS = (
    (1,), (2,), (3,), (4,), (5,), (6,), (7,), (8,), (9,), (10,), (11,), (12,),
    (2, 2), (2, 3), (2, 4), (3, 3), (2, 2, 2), (2, 6), (3, 4), (2, 2, 3),
)

MARK_VALUES = ("1", "2", "1/2", "3")


def frac(n, d) -> Scalar:
    return Scalar(rational(f"{int(n)}/{int(d)}"))


def pick_group(rng, max_order: int = 12) -> FiniteAbelianGroup:
    choices = [m for m in GROUPS if np.prod(m) <= max_order]
    return FiniteAbelianGroup(choices[int(rng.integers(len(choices)))])


def random_model(rng, max_order: int = 8, max_seeds: int = 4, null_orbits: bool = True) -> Model:
    """Stationary measure on a random shift-closed configuration space.

    Orbit weights are independent small rationals, some possibly zero, so
    the measure is typically non-ergodic. The empty configuration may occur.
    """
    G = pick_group(rng, max_order)
    marks = ("0",) + tuple(rng.choice(MARK_VALUES, size=int(rng.integers(1, 3)), replace=False))
    seeds = []
    for _ in range(int(rng.integers(1, max_seeds + 1))):
        density = rng.random()
        seeds.append(tuple(int(rng.integers(1, len(marks))) if rng.random() < density else 0 for _ in G))
    space, xi = configuration_space(G, seeds, marks)
    weights = [ZERO] * space.size
    for orbit in space.orbits():
        num = int(rng.integers(0 if null_orbits else 1, 5))
        for w in orbit:
            weights[w] = frac(num, 7)
    if not any(weights):
        for w in next(iter(space.orbits())):
            weights[w] = ONE
    return Model(space, OmegaMeasure(space, weights, check=False), xi)


def random_mark_model(rng, max_order: int = 6) -> Model:
    """Full i.i.d. mark field with a random rational law."""
    G = pick_group(rng, max_order)
    values = ("0",) + tuple(rng.choice(MARK_VALUES, size=int(rng.integers(1, 3)), replace=False))
    nums = [int(x) for x in rng.integers(1, 5, size=len(values))]
    law = [frac(x, sum(nums)) for x in nums]
    return make_mark_field(G, values, law)


def fleet(seed: int, count: int, max_order: int = 8) -> list:
    """Mixed fleet of configuration and mark-field models."""
    rng = np.random.default_rng(seed)
    out = []
    for n in range(count):
        if n % 4 == 3:
            out.append(random_mark_model(rng, min(max_order, 5)))
        else:
            out.append(random_model(rng, max_order))
    return out


def perturb(Q: OmegaMeasure, xi, rng) -> OmegaMeasure:
    """Random multiplicative jitter of ``Q`` on outcomes with ``xi != 0``,
    renormalised to the original total. Outcomes with ``xi = 0`` stay at 0."""
    charged = [w for w in range(Q.space.size) if not xi[w].is_zero()]
    weights = list(Q.weights)
    for w in charged:
        if rng.random() < 0.5:
            weights[w] = weights[w] * frac(int(rng.integers(1, 5)), 2) if weights[w] else frac(int(rng.integers(0, 3)), 9)
    if tuple(weights) == Q.weights and charged:
        w = charged[int(rng.integers(len(charged)))]
        weights[w] = weights[w] * 2 if weights[w] else frac(1, 5)
    total = scalar_sum(weights)
    if total and Q.total():
        weights = [x * Q.total() / total for x in weights]
    return OmegaMeasure(Q.space, weights, check=False)


def random_probability(rng, G, support_max: int = 3, den: int = 6) -> GMeasure:
    k = int(rng.integers(1, min(support_max, G.order) + 1))
    pts = rng.choice(G.order, size=k, replace=False)
    nums = [int(x) for x in rng.integers(1, den + 1, size=k)]
    masses = [ZERO] * G.order
    for p, n in zip(pts, nums):
        masses[int(p)] = frac(n, sum(nums))
    return GMeasure(G, masses, check=False)


def random_base(space, rng, markovian: bool = True, **kw) -> list:
    """Location-0 measures for an invariant kernel; weighted ones are
    scaled by a random factor in ``{1/2, 1, 3/2, 2}``."""
    G = space.group
    out = []
    for _ in range(space.size):
        mu = random_probability(rng, G, **kw)
        if not markovian:
            mu = mu.scale(frac(int(rng.integers(1, 5)), 2))
        out.append(mu)
    return out


def corrupt_base(base, P, xi, rng) -> list:
    """Change the kernel at one outcome that carries both ``P``-weight and
    ``xi``-mass at 0, so that the push-forward changes on a non-null orbit.

    Half the time the mass at one atom is doubled (always visible); otherwise
    one atom's mass is moved to another element.
    """
    G = P.space.group
    cands = [w for w in range(P.space.size) if P.weights[w] and xi[w][0]]
    if not cands:
        return list(base)
    w = cands[int(rng.integers(len(cands)))]
    masses = list(base[w].masses)
    atoms = [s for s, m in enumerate(masses) if m]
    a = atoms[int(rng.integers(len(atoms)))]
    if rng.random() < 0.5 or G.order == 1:
        masses[a] = masses[a] * 2
    else:
        b = int(rng.integers(G.order - 1))
        b = b if b < a else b + 1
        masses[b] = masses[b] + masses[a]
        masses[a] = ZERO
    out = list(base)
    out[w] = GMeasure(G, masses, check=False)
    return out


__all__ = [
    "GROUPS",
    "corrupt_base",
    "fleet",
    "frac",
    "perturb",
    "pick_group",
    "random_base",
    "random_mark_model",
    "random_model",
    "random_probability",
]
