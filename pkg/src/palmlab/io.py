"""JSON documents for spaces, kernels, run configurations and reports.

Scalars are written in their canonical text form so every document
round-trips exactly. Unknown fields are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .algebra import FiniteAbelianGroup, GMeasure, Scalar
from .errors import ConfigError
from .space import FlowSpace, OmegaMeasure, RandomMeasure
from .transport import TransportKernel
from .verdict import Verdict

SPACE_SCHEMA = "palmlab-space-v1"
KERNEL_SCHEMA = "palmlab-kernel-v1"
CONFIG_SCHEMA = "palmlab-config-v1"
REPORT_SCHEMA = "palmlab-report-v1"


def _keys(doc, where, required=(), optional=()):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ConfigError(f"{where}: missing field(s) {missing}")
    extra = sorted(set(doc) - set(required) - set(optional))
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {extra}")


def _scalar(x, where) -> Scalar:
    if isinstance(x, bool) or not isinstance(x, (str, int)):
        raise ConfigError(f"{where}: scalars are canonical strings or integers, got {x!r}")
    try:
        return Scalar.parse(x) if isinstance(x, str) else Scalar(x)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: bad scalar {x!r}") from exc


def jsonable(obj):
    """Plain-JSON form of witnesses and reports."""
    if isinstance(obj, Scalar):
        return str(obj)
    if isinstance(obj, Verdict):
        return {"holds": obj.holds, "witness": jsonable(obj.witness)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (frozenset, set)):
        return sorted(jsonable(x) for x in obj)
    if isinstance(obj, (list, tuple)):
        return [jsonable(x) for x in obj]
    if isinstance(obj, (OmegaMeasure,)):
        return [str(x) for x in obj.weights]
    if hasattr(obj, "item"):  # numpy scalar
        return obj.item()
    return obj


# -- spaces ------------------------------------------------------------------------


def space_to_json(space: FlowSpace, measures: dict | None = None, random_measures: dict | None = None) -> dict:
    doc = {
        "schema": SPACE_SCHEMA,
        "group": list(space.group.moduli),
        "outcomes": list(space.outcomes),
        "flow": [list(row) for row in space.flow],
    }
    if measures:
        doc["measures"] = {k: [str(x) for x in m.weights] for k, m in measures.items()}
    if random_measures:
        doc["random_measures"] = {
            k: [[str(x) for x in rm[w].masses] for w in range(space.size)] for k, rm in random_measures.items()
        }
    return doc


def space_from_json(doc: dict):
    """Returns ``(space, measures, random_measures)``; the flow is validated."""
    _keys(doc, "space", ("schema", "group", "outcomes", "flow"), ("measures", "random_measures"))
    if doc["schema"] != SPACE_SCHEMA:
        raise ConfigError(f"space: schema must be {SPACE_SCHEMA!r}")
    try:
        G = FiniteAbelianGroup(doc["group"])
        space = FlowSpace(G, doc["outcomes"], doc["flow"])
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError(f"space: {exc}") from exc
    measures = {}
    for name, ws in doc.get("measures", {}).items():
        if not isinstance(ws, list) or len(ws) != space.size:
            raise ConfigError(f"measure {name}: expected {space.size} weights")
        try:
            measures[name] = OmegaMeasure(space, [_scalar(x, f"measure {name}") for x in ws])
        except ValueError as exc:
            raise ConfigError(f"measure {name}: {exc}") from exc
    rms = {}
    for name, rows in doc.get("random_measures", {}).items():
        if not isinstance(rows, list) or len(rows) != space.size:
            raise ConfigError(f"random measure {name}: expected {space.size} rows")
        try:
            rms[name] = RandomMeasure(
                space, [GMeasure(G, [_scalar(x, f"random measure {name}") for x in row]) for row in rows]
            )
        except ValueError as exc:
            raise ConfigError(f"random measure {name}: {exc}") from exc
    return space, measures, rms


# -- kernels -----------------------------------------------------------------------


def kernel_to_json(T: TransportKernel) -> dict:
    entries = [
        [w, s, t, str(m)]
        for w, row in enumerate(T.kernel)
        for s, mu in enumerate(row)
        for t, m in mu.atoms()
    ]
    return {"schema": KERNEL_SCHEMA, "group": list(T.space.group.moduli), "outcomes": T.space.size,
            "entries": entries}


def kernel_from_json(doc: dict, space: FlowSpace) -> TransportKernel:
    _keys(doc, "kernel", ("schema", "group", "outcomes", "entries"))
    if doc["schema"] != KERNEL_SCHEMA:
        raise ConfigError(f"kernel: schema must be {KERNEL_SCHEMA!r}")
    G = space.group
    if list(doc["group"]) != list(G.moduli) or doc["outcomes"] != space.size:
        raise ConfigError("kernel: group or outcome count does not match the space")
    tables = [[[Scalar(0)] * G.order for _ in G] for _ in range(space.size)]
    for e in doc["entries"]:
        if not (isinstance(e, list) and len(e) == 4):
            raise ConfigError(f"kernel: bad entry {e!r}")
        w, s, t, m = e
        if not all(isinstance(i, int) for i in (w, s, t)) or not (0 <= w < space.size and 0 <= s < G.order
                                                                  and 0 <= t < G.order):
            raise ConfigError(f"kernel: bad entry {e!r}")
        tables[w][s][t] = _scalar(m, "kernel entry")
    try:
        return TransportKernel(space, [[GMeasure(G, row) for row in rows] for rows in tables])
    except ValueError as exc:
        raise ConfigError(f"kernel: {exc}") from exc


# -- run configuration ---------------------------------------------------------------

GENERATORS = ("mark_field", "exactly_k", "inline")


@dataclass
class RunConfig:
    """A space (generator or inline), the measures to use, and a suite."""

    space: dict
    suite: list = field(default_factory=list)
    output: str | None = None
    exact_cap: int | None = None
    seed: int = 0
    Q: object = "palm"
    eta: object = "xi"

    def to_json(self) -> dict:
        doc = {"schema": CONFIG_SCHEMA, "space": self.space, "suite": list(self.suite), "seed": self.seed,
               "Q": self.Q, "eta": self.eta}
        if self.output is not None:
            doc["output"] = self.output
        if self.exact_cap is not None:
            doc["exact_cap"] = self.exact_cap
        return doc


def _check_space_spec(spec):
    if not isinstance(spec, dict) or "generator" not in spec:
        raise ConfigError("config.space: expected an object with a 'generator' field")
    gen = spec["generator"]
    if gen == "mark_field":
        _keys(spec, "config.space", ("generator", "group", "mark_values", "mark_law"))
    elif gen == "exactly_k":
        _keys(spec, "config.space", ("generator", "group", "k"))
    elif gen == "inline":
        _keys(spec, "config.space", ("generator", "document"))
    else:
        raise ConfigError(f"config.space: unknown generator {gen!r}; expected one of {GENERATORS}")


def load_config(doc: dict, registered=None) -> RunConfig:
    _keys(doc, "config", ("schema", "space"), ("suite", "output", "exact_cap", "seed", "Q", "eta"))
    if doc["schema"] != CONFIG_SCHEMA:
        raise ConfigError(f"config: schema must be {CONFIG_SCHEMA!r}")
    _check_space_spec(doc["space"])
    suite = doc.get("suite", [])
    if not isinstance(suite, list) or not all(isinstance(x, str) for x in suite):
        raise ConfigError("config.suite: expected a list of checker names")
    if registered is not None:
        unknown = [x for x in suite if x not in registered]
        if unknown:
            raise ConfigError(f"config.suite: unknown checker(s) {unknown}")
    seed = doc.get("seed", 0)
    cap = doc.get("exact_cap")
    if not isinstance(seed, int) or (cap is not None and not isinstance(cap, int)):
        raise ConfigError("config: seed and exact_cap must be integers")
    Q = doc.get("Q", "palm")
    if not (Q == "palm" or isinstance(Q, list) or (isinstance(Q, dict) and set(Q) == {"perturb"})):
        raise ConfigError("config.Q: expected 'palm', a weight list or {'perturb': seed}")
    eta = doc.get("eta", "xi")
    if not (eta in ("xi", "haar") or isinstance(eta, list)):
        raise ConfigError("config.eta: expected 'xi', 'haar' or a table")
    return RunConfig(doc["space"], suite, doc.get("output"), cap, seed, Q, eta)


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def dumps(doc) -> str:
    return json.dumps(jsonable(doc), indent=2, sort_keys=False)
