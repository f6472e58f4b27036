from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Verdict:
    """Outcome of an exact checker.

    ``witness`` is a small dict naming the first failing item (indices for
    outcomes/elements, Scalars for side values) and is ``None`` when the
    property holds. Truthiness follows ``holds``.
    """

    holds: bool
    witness: dict | None = None
    details: dict = field(default_factory=dict, compare=False)

    def __bool__(self):
        return self.holds


HOLDS = Verdict(True)


def fails(**witness) -> Verdict:
    return Verdict(False, witness)
