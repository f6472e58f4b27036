"""Finite Abelian groups, exact scalars in Q(sqrt 2), and measures on a group.

Group elements are handled as integer indices into the lexicographic
enumeration of coordinate tuples ``(x_1, ..., x_k)``, ``0 <= x_i < m_i``.
Subsets of the group are frozensets of such indices. Haar measure is the
counting measure.
"""

from __future__ import annotations

import itertools
import re
from fractions import Fraction
from numbers import Rational

try:
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _Q = Fraction

_QTYPE = type(_Q(0))


def rational(x):
    """Coerce an exact rational (int, Fraction, mpq or "p/q" text) to mpq."""
    if type(x) is _QTYPE:
        return x
    if isinstance(x, bool):
        return _Q(int(x))
    if isinstance(x, (int, Rational, _QTYPE)):
        return _Q(x)
    if isinstance(x, str):
        return _Q(Fraction(x.strip()))
    raise TypeError(f"not an exact rational: {x!r}")


def _fmt_rational(q):
    q = rational(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


class Scalar:
    """Exact element ``a + b*sqrt(2)`` of the ordered field Q(sqrt 2).

    Instances are immutable. Floats are rejected on construction so that
    exact code paths cannot silently pick up rounding.
    """

    __slots__ = ("a", "b")

    def __init__(self, a=0, b=0):
        if isinstance(a, Scalar):
            if b:
                raise TypeError("cannot combine a Scalar with a second component")
            self.a, self.b = a.a, a.b
            return
        self.a = rational(a)
        self.b = rational(b)

    # construction -----------------------------------------------------

    @staticmethod
    def parse(text: str) -> Scalar:
        """Parse the canonical text form, e.g. ``"3/8"`` or ``"1/2-3*r2"``."""
        s = text.replace(" ", "")
        if not s:
            raise ValueError("empty scalar text")
        if not s.endswith("r2"):
            return Scalar(s)
        body = s[:-2]
        body = body.removesuffix("*")
        cut = max(body.rfind("+"), body.rfind("-"))
        if cut > 0:
            a_txt, b_txt = body[:cut], body[cut:]
        else:
            a_txt, b_txt = "0", body
        if b_txt in ("", "+"):
            b_txt = "1"
        elif b_txt == "-":
            b_txt = "-1"
        return Scalar(a_txt, b_txt)

    # predicates ------------------------------------------------------

    @property
    def is_rational(self) -> bool:
        return not self.b

    def sign(self) -> int:
        a, b = self.a, self.b
        sa = (a > 0) - (a < 0)
        if not b:
            return sa
        sb = (b > 0) - (b < 0)
        if not a or sa == sb:
            return sb
        # opposite signs; a^2 != 2 b^2 because sqrt 2 is irrational
        return sa if a * a > 2 * b * b else sb

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    # arithmetic ------------------------------------------------------

    def __add__(self, other):
        if type(other) is not Scalar:
            other = _coerce(other)
            if other is None:
                return NotImplemented
        if not self.b and not other.b:
            return _mk(self.a + other.a, self.b)
        return _mk(self.a + other.a, self.b + other.b)

    __radd__ = __add__

    def __sub__(self, other):
        if type(other) is not Scalar:
            other = _coerce(other)
            if other is None:
                return NotImplemented
        return _mk(self.a - other.a, self.b - other.b)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        if type(other) is not Scalar:
            other = _coerce(other)
            if other is None:
                return NotImplemented
        a, b, c, d = self.a, self.b, other.a, other.b
        if not b and not d:
            return _mk(a * c, b)
        return _mk(a * c + 2 * b * d, a * d + b * c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if type(other) is not Scalar:
            other = _coerce(other)
            if other is None:
                return NotImplemented
        c, d = other.a, other.b
        if not d:
            if not c:
                raise ZeroDivisionError("Scalar division by zero")
            return _mk(self.a / c, self.b / c)
        n = c * c - 2 * d * d
        a, b = self.a, self.b
        return _mk((a * c - 2 * b * d) / n, (b * c - a * d) / n)

    def __rtruediv__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return other / self

    def __neg__(self):
        return _mk(-self.a, -self.b)

    def __pos__(self):
        return self

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __pow__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return ONE / (self ** -k)
        out = ONE
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conjugate(self) -> Scalar:
        return _mk(self.a, -self.b)

    # comparison ------------------------------------------------------

    def __eq__(self, other):
        if type(other) is not Scalar:
            other = _coerce(other)
            if other is None:
                return NotImplemented
        return self.a == other.a and self.b == other.b

    def __hash__(self):
        if not self.b:
            return hash(self.a)
        return hash((self.a, self.b))

    def _cmp(self, other):
        if type(other) is not Scalar:
            other = _coerce(other)
            if other is None:
                return None
        return (self - other).sign()

    def __lt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c >= 0

    # conversion ------------------------------------------------------

    def __float__(self):
        return float(self.a) + float(self.b) * 2 ** 0.5

    def __str__(self):
        if not self.b:
            return _fmt_rational(self.a)
        b_txt = _fmt_rational(abs(self.b)) + "*r2"
        if not self.a:
            return ("-" if self.b < 0 else "") + b_txt
        return _fmt_rational(self.a) + ("-" if self.b < 0 else "+") + b_txt

    def __repr__(self):
        return f"Scalar('{self}')"

    def __reduce__(self):
        return (Scalar.parse, (str(self),))


def _mk(a, b):
    s = object.__new__(Scalar)
    s.a = a
    s.b = b
    return s


def _coerce(x):
    if type(x) is Scalar:
        return x
    if isinstance(x, float):
        raise TypeError("floating-point values are not allowed in exact arithmetic")
    if isinstance(x, (int, Rational, _QTYPE)):
        return _mk(rational(x), _Q(0))
    return None


def as_scalar(x) -> Scalar:
    """Coerce ints, rationals, Scalars and canonical text to a Scalar."""
    if type(x) is Scalar:
        return x
    if isinstance(x, str):
        return Scalar.parse(x)
    s = _coerce(x)
    if s is None:
        raise TypeError(f"cannot convert {x!r} to Scalar")
    return s


ZERO = Scalar(0)
ONE = Scalar(1)
SQRT2 = Scalar(0, 1)


def scalar_sum(values) -> Scalar:
    total = ZERO
    for v in values:
        total = total + v
    return total


class FiniteAbelianGroup:
    """Direct product of cyclic groups Z_{m_1} x ... x Z_{m_k}.

    Elements are indices into the lexicographic enumeration of coordinate
    tuples; index 0 is the neutral element.
    """

    def __init__(self, moduli):
        moduli = tuple(int(m) for m in moduli)
        if not moduli:
            moduli = (1,)
        if any(m < 1 for m in moduli):
            raise ValueError(f"moduli must be >= 1, got {moduli}")
        self.moduli = moduli
        self.elements = tuple(itertools.product(*(range(m) for m in moduli)))
        self.order = len(self.elements)
        self._index = {e: i for i, e in enumerate(self.elements)}
        idx = self._index
        self._add = tuple(
            tuple(idx[tuple((x + y) % m for x, y, m in zip(e, f, moduli))] for f in self.elements)
            for e in self.elements
        )
        self._neg = tuple(idx[tuple((-x) % m for x, m in zip(e, moduli))] for e in self.elements)

    zero = 0

    def __len__(self):
        return self.order

    def __iter__(self):
        return iter(range(self.order))

    def __eq__(self, other):
        return isinstance(other, FiniteAbelianGroup) and other.moduli == self.moduli

    def __hash__(self):
        return hash(self.moduli)

    def __repr__(self):
        return "x".join(f"Z{m}" for m in self.moduli)

    def add(self, s: int, t: int) -> int:
        return self._add[s][t]

    def neg(self, s: int) -> int:
        return self._neg[s]

    def sub(self, s: int, t: int) -> int:
        return self._add[s][self._neg[t]]

    def shift_set(self, B, s: int) -> frozenset:
        """The translate ``B + s``."""
        row = self._add
        return frozenset(row[b][s] for b in B)

    def index(self, element) -> int:
        if isinstance(element, int):
            if not 0 <= element < self.order:
                raise ValueError(f"element index {element} out of range")
            return element
        return self._index[tuple(int(x) % m for x, m in zip(element, self.moduli))]

    def element(self, i: int) -> tuple:
        return self.elements[i]

    def format_element(self, i: int) -> str:
        return "(" + ",".join(str(x) for x in self.elements[i]) + ")"

    def parse_element(self, text: str) -> int:
        coords = [int(x) for x in re.findall(r"-?\d+", text)]
        if len(coords) != len(self.moduli):
            raise ValueError(f"element {text!r} does not match group {self!r}")
        return self.index(tuple(coords))

    def subset(self, items) -> frozenset:
        return frozenset(self.index(x) for x in items)

    def subsets(self, nonempty: bool = True):
        """All subsets in lexicographic order of their sorted index tuples."""
        if not nonempty:
            yield frozenset()
        for t in _lex_tuples(self.order, 0):
            yield frozenset(t)

    def haar(self, B) -> int:
        """Counting (Haar) measure of a subset."""
        return len(B)


def _lex_tuples(n, start):
    for i in range(start, n):
        yield (i,)
        for rest in _lex_tuples(n, i + 1):
            yield (i,) + rest


def cyclic(n: int) -> FiniteAbelianGroup:
    return FiniteAbelianGroup((n,))


def parse_group(text: str) -> FiniteAbelianGroup:
    """Parse ``"z3"``, ``"Z2xZ4"`` or ``"2,4"`` into a group."""
    parts = re.findall(r"\d+", text)
    if not parts:
        raise ValueError(f"cannot parse group {text!r}")
    return FiniteAbelianGroup(int(p) for p in parts)


def subset_to_bits(B) -> int:
    return sum(1 << b for b in B)


def bits_to_subset(bits: int) -> frozenset:
    return frozenset(i for i in range(bits.bit_length()) if bits >> i & 1)


class GMeasure:
    """A finite measure on a finite Abelian group, stored as a mass table."""

    __slots__ = ("_atoms", "group", "masses")

    def __init__(self, group: FiniteAbelianGroup, masses, check: bool = True):
        self.group = group
        if check:
            masses = tuple(as_scalar(m) for m in masses)
            if len(masses) != group.order:
                raise ValueError(f"expected {group.order} masses, got {len(masses)}")
            for m in masses:
                if m.sign() < 0:
                    raise ValueError(f"negative mass {m}")
        self.masses = tuple(masses)
        self._atoms = None

    @classmethod
    def zero(cls, group):
        return cls(group, (ZERO,) * group.order, check=False)

    @classmethod
    def dirac(cls, group, s: int, mass=ONE):
        m = [ZERO] * group.order
        m[s] = as_scalar(mass)
        return cls(group, m)

    @classmethod
    def haar(cls, group):
        return cls(group, (ONE,) * group.order, check=False)

    @classmethod
    def from_dict(cls, group, masses: dict):
        m = [ZERO] * group.order
        for s, v in masses.items():
            m[group.index(s)] = as_scalar(v)
        return cls(group, m)

    def __getitem__(self, s: int) -> Scalar:
        return self.masses[s]

    def atoms(self):
        """Tuple of ``(element, mass)`` pairs with nonzero mass."""
        if self._atoms is None:
            self._atoms = tuple((s, m) for s, m in enumerate(self.masses) if m)
        return self._atoms

    def total(self) -> Scalar:
        return scalar_sum(m for _, m in self.atoms())

    def mass_of(self, B) -> Scalar:
        return scalar_sum(self.masses[b] for b in B)

    def support(self) -> frozenset:
        return frozenset(s for s, _ in self.atoms())

    def is_zero(self) -> bool:
        return not self.atoms()

    def shift(self, s: int) -> GMeasure:
        """``theta_s mu``: the measure ``B -> mu(B + s)``."""
        row = self.group._add
        m = self.masses
        return GMeasure(self.group, tuple(m[row[b][s]] for b in range(self.group.order)), check=False)

    def restrict(self, B) -> GMeasure:
        B = frozenset(B)
        return GMeasure(
            self.group, tuple(m if s in B else ZERO for s, m in enumerate(self.masses)), check=False
        )

    def scale(self, c) -> GMeasure:
        c = as_scalar(c)
        if c.sign() < 0:
            raise ValueError(f"cannot scale a measure by negative {c}")
        return GMeasure(self.group, tuple(m * c for m in self.masses), check=False)

    def __add__(self, other: GMeasure) -> GMeasure:
        if other.group != self.group:
            raise ValueError("measures live on different groups")
        return GMeasure(self.group, tuple(x + y for x, y in zip(self.masses, other.masses)), check=False)

    def __eq__(self, other):
        if not isinstance(other, GMeasure):
            return NotImplemented
        return self.group == other.group and self.masses == other.masses

    def __hash__(self):
        return hash((self.group, self.masses))

    def __repr__(self):
        body = " + ".join(f"{m}*d{self.group.format_element(s)}" for s, m in self.atoms())
        return f"GMeasure({body or '0'})"


def shift_measure(mu: GMeasure, s: int) -> GMeasure:
    return mu.shift(s)


def restrict(mu: GMeasure, B) -> GMeasure:
    return mu.restrict(B)


def add(mu: GMeasure, nu: GMeasure) -> GMeasure:
    return mu + nu


def scale(mu: GMeasure, c) -> GMeasure:
    return mu.scale(c)


def total(mu: GMeasure) -> Scalar:
    return mu.total()


def support(mu: GMeasure) -> frozenset:
    return mu.support()
