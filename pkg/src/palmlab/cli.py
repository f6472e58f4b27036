"""Command-line entry point: ``palmlab <subcommand>``.

Exit codes: 0 everything holds, 2 invalid configuration or input,
3 a checker failed, 4 internal defect.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import config as settings
from .algebra import GMeasure, Scalar, as_scalar, parse_group
from .errors import ConfigError, InternalDefect, PalmLabError, PreconditionError
from .existence import construct_balancing_kernel
from .fleet import perturb
from .io import (
    REPORT_SCHEMA,
    RunConfig,
    dumps,
    jsonable,
    kernel_from_json,
    kernel_to_json,
    load_config,
    read_json,
    space_from_json,
)
from .massstat import check_theorem_7_2, example_6_5, example_7_1, is_mass_stationary
from .palm import check_campbell, check_mecke, inversion, palm_measure
from .space import (
    OmegaMeasure,
    RandomMeasure,
    is_invariant_rm,
    is_stationary,
    make_exactly_k_field,
    make_mark_field,
)
from .torus import (
    TorusConfig,
    check_quota,
    export_csv,
    find_blocking_pair,
    fmt,
    stable_marriage_allocate,
    verify_6_3_empirical,
    verify_shift_coupling,
)
from .transport import check_exchange, check_neveu, check_theorem_4_1, inverse_kernel
from .verdict import Verdict

log = logging.getLogger("palmlab")

EXIT_OK, EXIT_CONFIG, EXIT_FAIL, EXIT_DEFECT = 0, 2, 3, 4


# -- model construction ------------------------------------------------------------


class Model:
    """Everything a suite needs: space, stationary ``P``, candidate ``Q``, ``xi``, ``eta``."""

    def __init__(self, space, P, Q, xi, eta):
        self.space, self.P, self.Q, self.xi, self.eta = space, P, Q, xi, eta


def build_model(cfg: RunConfig) -> Model:
    spec = cfg.space
    cap = cfg.exact_cap
    q_spec, eta_spec = cfg.Q, cfg.eta
    try:
        if spec["generator"] == "mark_field":
            G = parse_group(str(spec["group"]))
            law = [as_scalar(x) for x in spec["mark_law"]]
            space, P, xi = make_mark_field(G, spec["mark_values"], law, cap=cap)
        elif spec["generator"] == "exactly_k":
            space, P, xi = make_exactly_k_field(parse_group(str(spec["group"])), int(spec["k"]), cap=cap)
        else:
            space, measures, rms = space_from_json(spec["document"])
            if "xi" not in rms:
                raise ConfigError("inline space needs a random measure named 'xi'")
            P, xi = measures.get("P"), rms["xi"]
            # named measures in the document stand in for the defaults
            if "eta" in rms and eta_spec == "xi":
                eta_spec = rms["eta"]
            if "Q" in measures and q_spec == "palm":
                q_spec = measures["Q"]
    except (ValueError, TypeError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"config.space: {exc}") from exc
    if isinstance(q_spec, OmegaMeasure):
        Q = q_spec
    elif q_spec == "palm":
        if P is None:
            raise ConfigError("Q = 'palm' needs a stationary measure P")
        Q = palm_measure(P, xi).measure
    elif isinstance(q_spec, list):
        if len(q_spec) != space.size:
            raise ConfigError(f"config.Q: expected {space.size} weights")
        Q = OmegaMeasure(space, [as_scalar(x) for x in q_spec])
    else:
        if P is None:
            raise ConfigError("Q perturbation needs a stationary measure P")
        Q = perturb(palm_measure(P, xi).measure, xi, np.random.default_rng(int(q_spec["perturb"])))
    if isinstance(eta_spec, RandomMeasure):
        eta = eta_spec
    elif eta_spec == "xi":
        eta = xi
    elif eta_spec == "haar":
        eta = RandomMeasure.haar(space)
    else:
        eta = RandomMeasure(space, [GMeasure(space.group, [as_scalar(x) for x in row]) for row in eta_spec])
    model = Model(space, P, Q, xi, eta)
    model.seed = cfg.seed
    return model


# -- checkers --------------------------------------------------------------------------


def _need_P(m):
    if m.P is None:
        raise PreconditionError("this checker needs a stationary measure P")
    return m.P


def _palm_windows(m):
    P = _need_P(m)
    G = m.space.group
    ref = palm_measure(P, m.xi).measure
    windows = G.subsets() if G.order <= 12 else ([g] for g in G)
    for B in windows:
        if palm_measure(P, m.xi, B, validate=False).measure != ref:
            return Verdict(False, {"B": sorted(B)})
    return Verdict(True)


def _inversion(m):
    P = _need_P(m)
    rec = inversion(m.Q, m.xi)
    for w in range(m.space.size):
        if not m.xi[w].is_zero() and rec.weights[w] != P.weights[w]:
            return Verdict(False, {"outcome": w, "lhs": rec.weights[w], "rhs": P.weights[w]})
    return Verdict(True)


def _kernel_for(m):
    res = construct_balancing_kernel(_need_P(m), m.xi, m.eta)
    if not res.exists:
        raise PreconditionError("no balancing kernel exists", {"orbit": res.witness_orbit})
    return res.kernel


def _theorem_4_1(m):
    T = _kernel_for(m)
    chk = check_theorem_4_1(T, m.xi, m.eta, m.P)
    return Verdict(chk.agree, None, {"balancing": chk.balancing.holds, "palm_identity": chk.palm_identity.holds})


def _exchange(m):
    T = _kernel_for(m)
    Ts = inverse_kernel(T, m.xi, m.eta, m.P)
    return check_exchange(T, Ts, m.xi, m.eta, m.P)


def _existence(m):
    res = construct_balancing_kernel(_need_P(m), m.xi, m.eta)
    return Verdict(res.exists, None if res.exists else {"orbit": res.witness_orbit})


def _mass_stationary(m):
    r = is_mass_stationary(m.Q, m.xi)
    return Verdict(r.holds, r.witness, {"sets_checked": r.sets_checked})


def _theorem_7_2(m):
    r = check_theorem_7_2(m.Q, m.xi, seed=getattr(m, "seed", 0))
    return Verdict(r.agree, None, {"mass_stationary": r.mass_stationary.holds,
                                   "kernel_invariance": r.kernel_invariance.holds,
                                   "kernels_checked": r.kernels_checked})


def _example_6_5(m):
    lhs, rhs = example_6_5()
    ok = lhs == Scalar.parse("3/8") and rhs == Scalar.parse("1/2")
    return Verdict(ok, None if ok else {"lhs": lhs, "rhs": rhs}, {"lhs": lhs, "rhs": rhs})


CHECKERS = {
    "stationary": lambda m: is_stationary(_need_P(m)),
    "invariant": lambda m: is_invariant_rm(m.xi),
    "palm_windows": _palm_windows,
    "campbell": lambda m: check_campbell(_need_P(m), m.xi),
    "mecke": lambda m: check_mecke(m.Q, m.xi),
    "inversion": _inversion,
    "mass_stationary": _mass_stationary,
    "theorem_7_2": _theorem_7_2,
    "existence": _existence,
    "theorem_4_1": _theorem_4_1,
    "exchange": _exchange,
    "neveu": lambda m: check_neveu(m.xi, m.eta, _need_P(m)),
    "example_6_5": _example_6_5,
}


def run_suite(cfg: RunConfig):
    """Run the configured checkers in order; returns ``(report, exit code)``."""
    saved = settings.exact_cap
    if cfg.exact_cap is not None:
        settings.exact_cap = cfg.exact_cap
    try:
        return _run_checkers(cfg)
    finally:
        settings.exact_cap = saved


def _run_checkers(cfg: RunConfig):
    results = []
    code = EXIT_OK
    model = build_model(cfg) if cfg.suite else None
    for name in cfg.suite:
        start = time.perf_counter()
        entry = {"name": name}
        try:
            v = CHECKERS[name](model)
            entry.update(holds=v.holds, witness=v.witness, details=v.details)
            if not v.holds:
                code = max(code, EXIT_FAIL)
        except InternalDefect as exc:
            entry.update(holds=False, error=f"internal defect: {exc}")
            code = EXIT_DEFECT
        except PreconditionError as exc:
            entry.update(holds=False, error=str(exc), witness=exc.witness)
            code = max(code, EXIT_CONFIG) if code != EXIT_FAIL else code
        entry["seconds"] = round(time.perf_counter() - start, 6)
        results.append(entry)
    report = {"schema": REPORT_SCHEMA, "results": results, "all_hold": all(r["holds"] for r in results)}
    return report, code


# -- repro -------------------------------------------------------------------------------


def repro_example65():
    lhs, rhs = example_6_5()
    ok = lhs == Scalar.parse("3/8") and rhs == Scalar.parse("1/2")
    verdict = "MATCHES-PAPER" if ok else "MISMATCH"
    table = f"example65  lhs={lhs}  rhs={rhs}  expected=(3/8, 1/2)  verdict={verdict}"
    return {"lhs": lhs, "rhs": rhs, "verdict": verdict}, table, EXIT_OK if ok else EXIT_FAIL


def repro_example71(group="z2", p="1/2"):
    r = example_7_1(parse_group(group), Scalar.parse(p))
    ms = "NOT-MASS-STATIONARY" if not r.mass_stationary.holds else "MASS-STATIONARY"
    inv = "PASS" if (r.all_invariant and r.all_first_preserving) else "FAIL"
    lines = [
        f"example71  group={r.group!r}  p={r.p}  outcomes={r.outcomes}",
        f"  preserving allocation rules: {r.rules_total} ({'exhaustive' if r.exhaustive else 'sampled'})",
        f"  all first-species preserving: {r.all_first_preserving}",
        f"  invariance of Q under every rule: {inv}",
        f"  verdict: {ms}  witness={jsonable(r.mass_stationary.witness)}",
    ]
    rep = {"group": repr(r.group), "p": r.p, "outcomes": r.outcomes, "rules_total": r.rules_total,
           "exhaustive": r.exhaustive, "all_first_preserving": r.all_first_preserving,
           "invariance": inv, "verdict": ms, "witness": r.mass_stationary.witness}
    ok = inv == "PASS" and not r.mass_stationary.holds
    return rep, "\n".join(lines), EXIT_OK if ok else EXIT_FAIL


def repro_coupling(seed=0, counts=(1000, 10000, 100000)):
    rows, lines = [], ["coupling  Z_16^2  k=16", "  replicates        tv   control_tv  quota"]
    for R in counts:
        cfg = TorusConfig(16, 2, k=16, seed=seed, replicates=R)
        r = verify_shift_coupling(cfg)
        rows.append(r.to_dict())
        lines.append(f"  {R:>10}  {fmt(r.tv):>12}  {fmt(r.control_tv):>12}  {r.quota_exact}")
    return {"rows": rows}, "\n".join(lines), EXIT_OK


# -- argument parsing ---------------------------------------------------------------------


def _common(p, suppress=True):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="palmlab-config-v1 JSON file")
    p.add_argument("--out", default=d, help="write the JSON report here")
    p.add_argument("--seed", type=int, default=d)
    p.add_argument("--threads", type=int, default=d, help="Monte Carlo workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="palmlab", description="Exact Palm calculus on finite groups.")
    _common(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run the suite named in --config")
    _common(p)

    p = sub.add_parser("repro", help="reproduce a worked example")
    _common(p)
    p.add_argument("name", choices=("example65", "example71", "coupling"))
    p.add_argument("--group", default="z2")
    p.add_argument("--p", default="1/2")

    p = sub.add_parser("torus", help="Monte Carlo on a discrete torus")
    _common(p)
    p.add_argument("action", choices=("allocate", "coupling", "massstat-mc"))
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--d", type=int, default=2)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--k", type=int)
    g.add_argument("--q", type=float)
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--radii", default="1,2,3")
    p.add_argument("--window", default="0,1", help="window C for massstat-mc (site indices)")
    p.add_argument("--csv", help="allocation CSV output (allocate)")
    p.add_argument("--no-palm", action="store_true", help="negative control for massstat-mc")

    p = sub.add_parser("massstat", help="mass-stationarity checks")
    _common(p)
    p.add_argument("action", choices=("check", "example65", "example71"))
    p.add_argument("--group", default="z2")
    p.add_argument("--p", default="1/2")

    for name, text in (("palm", "Palm measure of xi"), ("transport", "balancing, inverse kernel, exchange"),
                       ("exists", "existence of a balancing kernel")):
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "transport":
            p.add_argument("--kernel", help="palmlab-kernel-v1 JSON file (default: constructed)")
    return parser


def _load(args) -> RunConfig:
    if not getattr(args, "config", None):
        raise ConfigError("--config is required for this subcommand")
    cfg = load_config(read_json(args.config), CHECKERS)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _emit(args, report, text=None):
    if text is not None:
        print(text)
    doc = dumps(report)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(doc + "\n")
    elif text is None:
        print(doc)


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "check":
        cfg = _load(args)
        report, code = run_suite(cfg)
        if cfg.output and not getattr(args, "out", None):
            args.out = cfg.output
        _emit(args, report)
        return code
    if cmd == "repro" or (cmd == "massstat" and args.action in ("example65", "example71")):
        name = args.name if cmd == "repro" else args.action
        if name == "example65":
            rep, text, code = repro_example65()
        elif name == "example71":
            rep, text, code = repro_example71(args.group, args.p)
        else:
            rep, text, code = repro_coupling(args.seed or 0)
        _emit(args, rep, text)
        return code
    if cmd == "torus":
        return _torus(args)
    cfg = _load(args)
    m = build_model(cfg)
    if cmd == "massstat":
        r = is_mass_stationary(m.Q, m.xi)
        _emit(args, {"holds": r.holds, "witness": r.witness, "sets_checked": r.sets_checked})
        return EXIT_OK if r.holds else EXIT_FAIL
    if cmd == "palm":
        res = palm_measure(_need_P(m), m.xi)
        _emit(args, {"intensity": res.intensity, "palm": res.measure,
                     "normalized": res.normalized if res.normalized is not None else None,
                     "outcomes": list(m.space.outcomes)})
        return EXIT_OK
    if cmd == "exists":
        res = construct_balancing_kernel(_need_P(m), m.xi, m.eta)
        rep = {"exists": res.exists, "witness_orbit": res.witness_orbit,
               "kernel": kernel_to_json(res.kernel) if res.kernel is not None else None}
        _emit(args, rep)
        return EXIT_OK if res.exists else EXIT_FAIL
    # transport
    T = kernel_from_json(read_json(args.kernel), m.space) if getattr(args, "kernel", None) else _kernel_for(m)
    chk = check_theorem_4_1(T, m.xi, m.eta, _need_P(m))
    rep = {"balancing": chk.balancing, "palm_identity": chk.palm_identity, "agree": chk.agree}
    if chk.balancing:
        Ts = inverse_kernel(T, m.xi, m.eta, m.P)
        rep["exchange"] = check_exchange(T, Ts, m.xi, m.eta, m.P)
        rep["inverse_kernel"] = kernel_to_json(Ts)
    rep["neveu"] = check_neveu(m.xi, m.eta, m.P)
    _emit(args, rep)
    ok = chk.agree and chk.balancing and rep["neveu"] and rep.get("exchange", True)
    return EXIT_OK if ok else EXIT_FAIL


def _torus(args) -> int:
    radii = tuple(int(x) for x in args.radii.split(","))
    if args.k is None and args.q is None:
        raise ConfigError("one of --k and --q is required")
    cfg = TorusConfig(args.n, args.d, k=args.k, q=args.q, seed=args.seed or 0,
                      replicates=args.replicates, radii=radii)
    if args.action == "allocate":
        rng = np.random.default_rng(cfg.seed)
        pts = rng.choice(cfg.sites, size=cfg.k, replace=False)
        alloc = stable_marriage_allocate(cfg, pts)
        quota = check_quota(alloc)
        blocking = find_blocking_pair(cfg, alloc) if cfg.sites <= 4096 else None
        if args.csv:
            export_csv(cfg, alloc, args.csv)
        _emit(args, {"points": alloc.points.tolist(), "quota": alloc.quota, "quota_exact": quota,
                     "stable": blocking is None, "blocking_pair": blocking})
        return EXIT_OK if quota and blocking is None else EXIT_FAIL
    if args.action == "coupling":
        r = verify_shift_coupling(cfg)
        _emit(args, r.to_dict())
        return EXIT_OK if r.quota_exact else EXIT_FAIL
    C = [int(x) for x in args.window.split(",")]
    r = verify_6_3_empirical(cfg, C, palm=not args.no_palm)
    _emit(args, r.to_dict())
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "threads", None):
        os.environ["PALMLAB_THREADS"] = str(args.threads)
    try:
        return _dispatch(args)
    except InternalDefect as exc:
        print(f"internal defect: {exc}", file=sys.stderr)
        return EXIT_DEFECT
    except (ConfigError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PalmLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
