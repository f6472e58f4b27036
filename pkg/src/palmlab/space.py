"""Finite sample spaces with a flow, measures on them, and random measures.

A :class:`FlowSpace` is a finite outcome set together with a table
``flow[s][w]`` realising the maps ``theta_s``. Configuration spaces use the
convention ``(theta_s w)_b = w_{b+s}``, so the configuration measure is
flow-covariant: ``xi(theta_s w) = theta_s xi(w)``.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

from . import config
from .algebra import (
    ONE,
    ZERO,
    FiniteAbelianGroup,
    GMeasure,
    Scalar,
    as_scalar,
    scalar_sum,
)
from .errors import CapExceeded, PreconditionError
from .verdict import HOLDS, Verdict, fails


class FlowSpace:
    """Finite outcome set with a measurable flow of a finite Abelian group."""

    def __init__(self, group: FiniteAbelianGroup, outcomes, flow, validate: bool = True):
        self.group = group
        self.outcomes = tuple(str(o) for o in outcomes)
        self.size = len(self.outcomes)
        self.flow = tuple(tuple(row) for row in flow)
        self._label_index = {o: i for i, o in enumerate(self.outcomes)}
        self._orbits = None
        self.configs = None
        self.components = None
        self.factors = None
        if validate:
            self._validate()

    def _validate(self):
        G, n = self.group, self.size
        if len(self._label_index) != n:
            raise ValueError("outcome labels must be distinct")
        if len(self.flow) != G.order or any(len(row) != n for row in self.flow):
            raise ValueError(f"flow table must be {G.order} x {n}")
        for row in self.flow:
            for w in row:
                if not 0 <= w < n:
                    raise ValueError(f"flow value {w} out of range")
        if self.flow[0] != tuple(range(n)):
            raise ValueError("theta_0 is not the identity")
        for s in G:
            fs = self.flow[s]
            for t in G:
                ft, fst = self.flow[t], self.flow[G.add(s, t)]
                for w in range(n):
                    if fs[ft[w]] != fst[w]:
                        raise ValueError(
                            f"flow violates theta_s o theta_t = theta_(s+t) at "
                            f"s={G.format_element(s)}, t={G.format_element(t)}, w={self.outcomes[w]}"
                        )

    def __len__(self):
        return self.size

    def __iter__(self):
        return iter(range(self.size))

    def __repr__(self):
        return f"FlowSpace({self.group!r}, {self.size} outcomes)"

    def index(self, outcome) -> int:
        if isinstance(outcome, int):
            return outcome
        return self._label_index[outcome]

    def shift(self, s: int, w: int) -> int:
        return self.flow[s][w]

    def orbits(self) -> OrbitDecomposition:
        if self._orbits is None:
            self._orbits = _compute_orbits(self)
        return self._orbits


class OrbitDecomposition(NamedTuple):
    """Partition of the outcomes into flow orbits (atoms of the invariant field)."""

    orbits: tuple
    membership: tuple

    def __len__(self):
        return len(self.orbits)

    def __iter__(self):
        return iter(self.orbits)

    def orbit_of(self, w: int) -> int:
        return self.membership[w]


def _compute_orbits(space: FlowSpace) -> OrbitDecomposition:
    membership = [-1] * space.size
    orbits = []
    for w in range(space.size):
        if membership[w] >= 0:
            continue
        orbit = tuple(sorted({row[w] for row in space.flow}))
        for v in orbit:
            membership[v] = len(orbits)
        orbits.append(orbit)
    return OrbitDecomposition(tuple(orbits), tuple(membership))


def orbits(space: FlowSpace) -> OrbitDecomposition:
    return space.orbits()


class OmegaMeasure:
    """Nonnegative weights on the outcomes of a flow space."""

    __slots__ = ("space", "weights")

    def __init__(self, space: FlowSpace, weights, check: bool = True):
        self.space = space
        if check:
            weights = tuple(as_scalar(x) for x in weights)
            if len(weights) != space.size:
                raise ValueError(f"expected {space.size} weights, got {len(weights)}")
            for x in weights:
                if x.sign() < 0:
                    raise ValueError(f"negative weight {x}")
        self.weights = tuple(weights)

    def __getitem__(self, w: int) -> Scalar:
        return self.weights[w]

    def __eq__(self, other):
        if not isinstance(other, OmegaMeasure):
            return NotImplemented
        return self.space is other.space and self.weights == other.weights

    def __hash__(self):
        return hash(self.weights)

    def __repr__(self):
        body = ", ".join(f"{self.space.outcomes[w]}: {x}" for w, x in enumerate(self.weights) if x)
        return f"OmegaMeasure({{{body}}})"

    def total(self) -> Scalar:
        return scalar_sum(self.weights)

    def support(self) -> frozenset:
        return frozenset(w for w, x in enumerate(self.weights) if x)

    def measure_of(self, A) -> Scalar:
        return scalar_sum(self.weights[w] for w in A)

    def expectation(self, f) -> Scalar:
        vals = _table(self.space, f)
        return scalar_sum(x * v for x, v in zip(self.weights, vals) if x)

    def scale(self, c) -> OmegaMeasure:
        c = as_scalar(c)
        return OmegaMeasure(self.space, tuple(x * c for x in self.weights))

    def normalized(self) -> OmegaMeasure:
        t = self.total()
        if not t:
            raise PreconditionError("cannot normalize the zero measure")
        return OmegaMeasure(self.space, tuple(x / t for x in self.weights), check=False)

    def restricted(self, A) -> OmegaMeasure:
        A = frozenset(A)
        return OmegaMeasure(
            self.space, tuple(x if w in A else ZERO for w, x in enumerate(self.weights)), check=False
        )

    def conditioned(self, A) -> OmegaMeasure:
        return self.restricted(A).normalized()

    def image(self, mapping) -> OmegaMeasure:
        """Image measure under an outcome map given as a table."""
        out = [ZERO] * self.space.size
        for w, x in enumerate(self.weights):
            if x:
                out[mapping[w]] = out[mapping[w]] + x
        return OmegaMeasure(self.space, out, check=False)


def _table(space, f):
    if callable(f):
        return tuple(as_scalar(f(w)) for w in range(space.size))
    vals = tuple(as_scalar(v) for v in f)
    if len(vals) != space.size:
        raise ValueError("function table has wrong length")
    return vals


class RandomMeasure:
    """A measure on the group for every outcome."""

    __slots__ = ("per_outcome", "space")

    def __init__(self, space: FlowSpace, per_outcome):
        self.space = space
        self.per_outcome = tuple(per_outcome)
        if len(self.per_outcome) != space.size:
            raise ValueError(f"expected {space.size} measures, got {len(self.per_outcome)}")
        for mu in self.per_outcome:
            if mu.group != space.group:
                raise ValueError("random measure lives on a different group")

    @classmethod
    def haar(cls, space):
        lam = GMeasure.haar(space.group)
        return cls(space, (lam,) * space.size)

    @classmethod
    def constant(cls, space, mu: GMeasure):
        return cls(space, (mu,) * space.size)

    @classmethod
    def from_tables(cls, space, tables):
        return cls(space, (GMeasure(space.group, row) for row in tables))

    def __getitem__(self, w: int) -> GMeasure:
        return self.per_outcome[w]

    def __eq__(self, other):
        if not isinstance(other, RandomMeasure):
            return NotImplemented
        return self.space is other.space and self.per_outcome == other.per_outcome

    def __hash__(self):
        return hash(self.per_outcome)

    def __add__(self, other):
        return RandomMeasure(self.space, (a + b for a, b in zip(self.per_outcome, other.per_outcome)))

    def scale(self, c) -> RandomMeasure:
        return RandomMeasure(self.space, (mu.scale(c) for mu in self.per_outcome))

    def scale_by(self, factors) -> RandomMeasure:
        """Outcome-wise scaling ``w -> factors[w] * xi(w)``."""
        return RandomMeasure(self.space, (mu.scale(c) for mu, c in zip(self.per_outcome, factors)))

    def total_mass(self, w: int) -> Scalar:
        return self.per_outcome[w].total()

    def nonzero_outcomes(self) -> frozenset:
        return frozenset(w for w, mu in enumerate(self.per_outcome) if not mu.is_zero())


class Model(NamedTuple):
    space: FlowSpace
    P: OmegaMeasure
    xi: RandomMeasure


# -- checkers ---------------------------------------------------------------


def is_stationary(P: OmegaMeasure) -> Verdict:
    """``P o theta_s = P`` for every s; witness is the first ``(s, outcome)``."""
    flow, wts = P.space.flow, P.weights
    for s in P.space.group:
        row = flow[s]
        for w in range(P.space.size):
            if wts[row[w]] != wts[w]:
                return fails(s=s, outcome=w)
    return HOLDS


def is_invariant_rm(xi: RandomMeasure) -> Verdict:
    """Flow covariance ``xi(theta_s w, B - s) = xi(w, B)`` on singletons."""
    space = xi.space
    G = space.group
    for w in range(space.size):
        mu = xi[w].masses
        for s in G:
            nu = xi[space.flow[s][w]].masses
            for b in G:
                if nu[G.sub(b, s)] != mu[b]:
                    return fails(outcome=w, s=s, b=b)
    return HOLDS


def require_stationary(P: OmegaMeasure):
    v = is_stationary(P)
    if not v:
        raise PreconditionError("measure is not stationary", v.witness)


def require_invariant(xi: RandomMeasure, name: str = "random measure"):
    v = is_invariant_rm(xi)
    if not v:
        raise PreconditionError(f"{name} is not flow-covariant", v.witness)


def conditional_on_invariant(P: OmegaMeasure, f) -> tuple:
    """Conditional expectation of ``f`` given the invariant field.

    Orbit-wise ``P``-weighted average; 0 on ``P``-null orbits.
    """
    vals = _table(P.space, f)
    out = [ZERO] * P.space.size
    for orbit in P.space.orbits():
        mass = scalar_sum(P.weights[w] for w in orbit)
        if not mass:
            continue
        avg = scalar_sum(P.weights[w] * vals[w] for w in orbit) / mass
        for w in orbit:
            out[w] = avg
    return tuple(out)


# -- generators -------------------------------------------------------------


def _config_label(values, cfg):
    txt = [str(values[m]) for m in cfg]
    return "".join(txt) if all(len(t) == 1 for t in txt) else ",".join(txt)


def configuration_space(group: FiniteAbelianGroup, configs, mark_values, cap=None):
    """Flow space on a shift-closed set of mark configurations.

    ``configs`` are tuples of mark indices (one per group element); their
    orbits are added automatically. Outcomes are ordered by the mixed-radix
    index with the first coordinate varying fastest. Returns
    ``(space, xi)`` where ``xi(w) = sum_s value(w_s) delta_s``.
    """
    cap = config.exact_cap if cap is None else cap
    values = tuple(as_scalar(v) for v in mark_values)
    M, N = len(values), group.order
    add = group._add
    seen = set()
    stack = [tuple(c) for c in configs]
    while stack:
        c = stack.pop()
        if c in seen:
            continue
        if len(c) != N or any(not 0 <= m < M for m in c):
            raise ValueError(f"bad configuration {c}")
        seen.add(c)
        if len(seen) > cap:
            raise CapExceeded(f"more than {cap} outcomes", witness=len(seen))
        for s in group:
            sc = tuple(c[add[b][s]] for b in range(N))
            if sc not in seen:
                stack.append(sc)
    ordered = sorted(seen, key=lambda c: c[::-1])
    index = {c: i for i, c in enumerate(ordered)}
    flow = [[index[tuple(c[add[b][s]] for b in range(N))] for c in ordered] for s in group]
    space = FlowSpace(group, (_config_label(mark_values, c) for c in ordered), flow, validate=False)
    space.configs = tuple(ordered)
    xi = RandomMeasure(
        space, (GMeasure(group, tuple(values[m] for m in c), check=False) for c in ordered)
    )
    return space, xi


def make_mark_field(group: FiniteAbelianGroup, mark_values, mark_law, cap=None) -> Model:
    """I.i.d. marks on every site under the coordinate-shift flow.

    ``mark_values`` are the masses placed at a site carrying each mark and
    ``mark_law`` the (exact) probability of each mark.
    """
    cap = config.exact_cap if cap is None else cap
    values = tuple(as_scalar(v) for v in mark_values)
    if isinstance(mark_law, dict):
        law = tuple(as_scalar(mark_law[v]) for v in mark_values)
    else:
        law = tuple(as_scalar(p) for p in mark_law)
    if len(law) != len(values):
        raise ValueError("mark_law must give one probability per mark value")
    if any(p.sign() < 0 for p in law) or scalar_sum(law) != ONE:
        raise ValueError("mark_law must be a probability vector")
    M, N = len(values), group.order
    if M ** N > cap:
        raise CapExceeded(f"{M}^{N} outcomes exceed the exact-mode cap {cap}", witness=M ** N)
    configs = [c[::-1] for c in itertools.product(range(M), repeat=N)]
    space, xi = configuration_space(group, configs, mark_values, cap=cap)
    weights = []
    for c in space.configs:
        p = ONE
        for m in c:
            p = p * law[m]
        weights.append(p)
    return Model(space, OmegaMeasure(space, weights, check=False), xi)


def make_exactly_k_field(group: FiniteAbelianGroup, k: int, cap=None) -> Model:
    """Uniform law on configurations with exactly ``k`` unit points."""
    N = group.order
    if not 0 <= k <= N:
        raise ValueError(f"k={k} outside 0..{N}")
    configs = [tuple(1 if b in pts else 0 for b in range(N)) for pts in itertools.combinations(range(N), k)]
    space, xi = configuration_space(group, configs, (0, 1), cap=cap)
    p = ONE / len(configs)
    return Model(space, OmegaMeasure(space, (p,) * space.size, check=False), xi)


def product_space(first: OmegaMeasure, second: OmegaMeasure) -> OmegaMeasure:
    """Product of two flow spaces under the diagonal flow, with product weights.

    The returned measure's space has ``components[w] = (i, j)``.
    """
    A, B = first.space, second.space
    if A.group != B.group:
        raise ValueError("factors must share the group")
    pairs = [(i, j) for i in range(A.size) for j in range(B.size)]
    index = {p: n for n, p in enumerate(pairs)}
    flow = [[index[(A.flow[s][i], B.flow[s][j])] for i, j in pairs] for s in A.group]
    labels = (f"{A.outcomes[i]}|{B.outcomes[j]}" for i, j in pairs)
    space = FlowSpace(A.group, labels, flow, validate=False)
    space.components = tuple(pairs)
    space.factors = (A, B)
    return OmegaMeasure(space, (first.weights[i] * second.weights[j] for i, j in pairs))


def lift(xi: RandomMeasure, product: FlowSpace, factor: int) -> RandomMeasure:
    """Lift a random measure on one factor to a product space."""
    if product.components is None:
        raise ValueError("not a product space")
    if product.factors[factor] is not xi.space:
        raise ValueError("random measure does not live on that factor")
    return RandomMeasure(product, (xi[pair[factor]] for pair in product.components))
