"""Monte Carlo harness on discrete tori ``Z_n^d``.

Sites are indexed lexicographically by their coordinates (last coordinate
fastest), matching :class:`~palmlab.algebra.FiniteAbelianGroup`. Distances
use the L1 torus metric. Everything here is floating point and seeded;
reports carry decimals with 12 significant digits.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import config
from .errors import PreconditionError

log = logging.getLogger(__name__)

try:
    import numba

    _njit = numba.njit(cache=True, nogil=True)
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

    def _njit(f):
        return f


CHUNK = 4096


def fmt(x: float) -> str:
    return format(float(x), ".12g")


@dataclass(frozen=True)
class TorusConfig:
    """Torus side ``n``, dimension ``d`` and a point law.

    Exactly one of ``k`` (exactly ``k`` uniform sites) and ``q``
    (independent Bernoulli(q) sites) is set.
    """

    n: int
    d: int = 1
    k: int | None = None
    q: float | None = None
    seed: int = 0
    replicates: int = 1000
    radii: tuple = (1, 2, 3)

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise PreconditionError("need n >= 1 and d >= 1")
        if (self.k is None) == (self.q is None):
            raise PreconditionError("set exactly one of k and q")
        if self.k is not None and not 1 <= self.k <= self.sites:
            raise PreconditionError(f"k must lie in 1..{self.sites}")
        if self.q is not None and not 0.0 < self.q <= 1.0:
            raise PreconditionError("q must lie in (0, 1]")
        object.__setattr__(self, "radii", tuple(int(r) for r in self.radii))

    @property
    def sites(self) -> int:
        return self.n ** self.d

    @property
    def quota(self) -> int:
        if self.k is None or self.sites % self.k:
            raise PreconditionError(f"k={self.k} does not divide N={self.sites}")
        return self.sites // self.k


# -- geometry ------------------------------------------------------------------------


def coordinates(n: int, d: int) -> np.ndarray:
    """``(N, d)`` coordinates of every site in index order."""
    grids = np.indices((n,) * d).reshape(d, -1).T
    return np.ascontiguousarray(grids, dtype=np.int64)


def shift_table(n: int, d: int) -> np.ndarray:
    """``S[s, b]`` = index of site ``b + s``."""
    xy = coordinates(n, d)
    w = n ** np.arange(d - 1, -1, -1)
    summed = (xy[:, None, :] + xy[None, :, :]) % n
    return np.ascontiguousarray(summed @ w)


def box_masks(n: int, d: int, radii) -> np.ndarray:
    """``(len(radii), N)`` indicator of the L-infinity boxes around 0."""
    xy = coordinates(n, d)
    wrapped = np.minimum(xy, n - xy).max(axis=1)
    return np.stack([wrapped <= r for r in radii]).astype(np.int64)


@_njit
def _key(a, b, n, d, N):
    """Preference key of ``b`` as seen from ``a``: distance first, then the
    displacement ``b - a`` in lexicographic order."""
    dist = 0
    disp = 0
    ia = a
    ib = b
    scale = 1
    for _ in range(d):
        ca = ia % n
        cb = ib % n
        ia //= n
        ib //= n
        delta = (cb - ca) % n
        dist += min(delta, n - delta)
        disp += delta * scale
        scale *= n
    return dist * N + disp


def key_table(n: int, d: int) -> np.ndarray:
    """``K[a, b]``: preference key of site ``b`` as seen from site ``a``."""
    return _key_table(n, d)


@_njit
def _key_table(n, d):
    N = n ** d
    K = np.empty((N, N), dtype=np.int64)
    for a in range(N):
        for b in range(N):
            K[a, b] = _key(a, b, n, d, N)
    return K


@_njit
def _deferred_acceptance(points, K, quota):
    """Site-proposing deferred acceptance; returns ``site -> point index``."""
    N = K.shape[0]
    k = points.shape[0]
    prefs = np.empty((N, k), dtype=np.int64)
    keys = np.empty(k, dtype=np.int64)
    for i in range(N):
        # insertion sort of the k points by the site's key
        for j in range(k):
            kj = K[i, points[j]]
            m = j
            while m > 0 and keys[m - 1] > kj:
                keys[m] = keys[m - 1]
                prefs[i, m] = prefs[i, m - 1]
                m -= 1
            keys[m] = kj
            prefs[i, m] = j
    held = np.full((k, quota), -1, dtype=np.int64)
    held_key = np.zeros((k, quota), dtype=np.int64)
    worst = np.zeros(k, dtype=np.int64)
    count = np.zeros(k, dtype=np.int64)
    nxt = np.zeros(N, dtype=np.int64)
    match = np.full(N, -1, dtype=np.int64)
    stack = np.arange(N - 1, -1, -1)
    top = N
    while top > 0:
        i = stack[top - 1]
        j = prefs[i, nxt[i]]
        nxt[i] += 1
        kk = K[points[j], i]
        if count[j] < quota:
            held[j, count[j]] = i
            held_key[j, count[j]] = kk
            if kk > held_key[j, worst[j]]:
                worst[j] = count[j]
            count[j] += 1
            match[i] = j
            top -= 1
            continue
        w = worst[j]
        if kk < held_key[j, w]:
            out = held[j, w]
            held[j, w] = i
            held_key[j, w] = kk
            match[i] = j
            match[out] = -1
            stack[top - 1] = out
            m = 0
            for r in range(1, quota):
                if held_key[j, r] > held_key[j, m]:
                    m = r
            worst[j] = m
    return match


@_njit
def _batch_centres(conf, origin, K, quota):
    """Allocated point of ``origin[i]`` in every row, and whether every
    allocation met the quota exactly."""
    size, N = conf.shape
    centres = np.empty(size, dtype=np.int64)
    exact = True
    for i in range(size):
        k = 0
        for b in range(N):
            k += conf[i, b]
        pts = np.empty(k, dtype=np.int64)
        m = 0
        for b in range(N):
            if conf[i, b]:
                pts[m] = b
                m += 1
        match = _deferred_acceptance(pts, K, quota)
        counts = np.zeros(k, dtype=np.int64)
        for b in range(N):
            if match[b] >= 0:
                counts[match[b]] += 1
        for j in range(k):
            if counts[j] != quota:
                exact = False
        centres[i] = pts[match[origin[i]]]
    return centres, exact


@dataclass(frozen=True)
class AllocationMap:
    points: np.ndarray
    site_to_point: np.ndarray
    quota: int

    def targets(self) -> np.ndarray:
        """Site index each site is allocated to."""
        return self.points[self.site_to_point]


def stable_marriage_allocate(cfg: TorusConfig, point_set) -> AllocationMap:
    """Quota stable marriage: every point receives exactly ``N/k`` sites."""
    points = np.array(sorted({int(p) for p in point_set}), dtype=np.int64)
    N = cfg.sites
    if len(points) == 0 or N % len(points):
        raise PreconditionError(f"{len(points)} points do not divide N={N}")
    quota = N // len(points)
    match = _deferred_acceptance(points, key_table(cfg.n, cfg.d), quota)
    return AllocationMap(points, match, quota)


def check_quota(alloc: AllocationMap) -> bool:
    counts = np.bincount(alloc.site_to_point, minlength=len(alloc.points))
    return bool((alloc.site_to_point >= 0).all() and (counts == alloc.quota).all())


def find_blocking_pair(cfg: TorusConfig, alloc: AllocationMap):
    """First ``(site, point)`` pair that would both rather be matched to
    each other, or ``None`` when the allocation is stable."""
    n, d, N = cfg.n, cfg.d, cfg.sites
    pts = alloc.points
    key = _key.py_func if numba is not None else _key
    worst = {}
    for j, p in enumerate(pts):
        mine = np.flatnonzero(alloc.site_to_point == j)
        worst[j] = max(key(p, i, n, d, N) for i in mine)
    for i in range(N):
        cur = key(i, pts[alloc.site_to_point[i]], n, d, N)
        for j, p in enumerate(pts):
            if key(i, p, n, d, N) < cur and key(p, i, n, d, N) < worst[j]:
                return i, int(p)
    return None


def exact_allocation_rule(space):
    """Stable-marriage allocation on every outcome of an exact configuration
    space over ``Z_n^d``, as an :class:`~palmlab.transport.AllocationRule`.

    Points are the sites with a nonzero mark. Ties break through the
    displacement order, which is shift-equivariant, so the rule is covariant.
    """
    from .transport import AllocationRule

    moduli = space.group.moduli
    if len(set(moduli)) != 1 or space.configs is None:
        raise PreconditionError("need a configuration space over Z_n^d")
    cfg = TorusConfig(moduli[0], len(moduli), k=1)
    table = []
    for c in space.configs:
        alloc = stable_marriage_allocate(cfg, [b for b, m in enumerate(c) if m])
        table.append([int(t) for t in alloc.targets()])
    return AllocationRule(space, table)


def export_csv(cfg: TorusConfig, alloc: AllocationMap, path) -> None:
    xy = coordinates(cfg.n, cfg.d)
    head = [f"site_x{i}" for i in range(cfg.d)] + [f"point_x{i}" for i in range(cfg.d)]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(head)
        for s, t in enumerate(alloc.targets()):
            out.writerow(list(xy[s]) + list(xy[t]))


# -- sampling ---------------------------------------------------------------------------


def _sample_configs(cfg: TorusConfig, rng, size) -> np.ndarray:
    N = cfg.sites
    if cfg.k is not None:
        order = rng.random((size, N)).argsort(axis=1)[:, : cfg.k]
        conf = np.zeros((size, N), dtype=np.int64)
        np.put_along_axis(conf, order, 1, axis=1)
        return conf
    return (rng.random((size, N)) < cfg.q).astype(np.int64)


def _recentre(conf, S, centres) -> np.ndarray:
    """Row ``i`` becomes ``b -> conf[i, b + centres[i]]``."""
    return np.take_along_axis(conf, S[centres], axis=1)


def _uniform_point(conf, rng) -> np.ndarray:
    """A uniformly chosen occupied site per row."""
    counts = conf.sum(axis=1)
    pick = (rng.random(len(conf)) * counts).astype(np.int64)
    cum = np.cumsum(conf, axis=1)
    return (cum <= pick[:, None]).sum(axis=1)


def _encode(stats, extra=None) -> np.ndarray:
    cols = [stats[:, i] for i in range(stats.shape[1])]
    if extra is not None:
        cols.append(extra)
    code = np.zeros(len(stats), dtype=np.int64)
    for c in cols:
        code = code * 4099 + c
    return code


def tv_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Total variation between the empirical laws of two code arrays."""
    keys = np.union1d(a, b)
    pa = np.bincount(np.searchsorted(keys, a), minlength=len(keys)) / len(a)
    pb = np.bincount(np.searchsorted(keys, b), minlength=len(keys)) / len(b)
    return 0.5 * float(np.abs(pa - pb).sum())


def _chunks(cfg: TorusConfig, replicates):
    seqs = np.random.SeedSequence(cfg.seed).spawn((replicates + CHUNK - 1) // CHUNK)
    sizes = [min(CHUNK, replicates - i * CHUNK) for i in range(len(seqs))]
    return list(zip(seqs, sizes))


def _run_chunks(task, chunks):
    workers = config.threads()
    if workers == 1:
        return [task(c) for c in chunks]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(task, chunks))


@dataclass
class CouplingReport:
    tv: float
    replicates: int
    control_tv: float | None
    quota_exact: bool
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tv"] = fmt(self.tv)
        d["control_tv"] = None if self.control_tv is None else fmt(self.control_tv)
        return d


def verify_shift_coupling(cfg: TorusConfig, replicates: int | None = None, control: bool = True) -> CouplingReport:
    """Compare the view from ``tau(U)`` under a uniform origin ``U`` with the
    view from a uniformly chosen point (exactly-``k`` law).

    The negative control views the configuration from a uniform site.
    """
    if cfg.k is None:
        raise PreconditionError("shift-coupling needs an exactly-k point law")
    quota = cfg.quota
    R = cfg.replicates if replicates is None else replicates
    S = shift_table(cfg.n, cfg.d)
    K = key_table(cfg.n, cfg.d)
    masks = box_masks(cfg.n, cfg.d, cfg.radii)

    def task(chunk):
        seq, size = chunk
        rng = np.random.default_rng(seq)
        conf = _sample_configs(cfg, rng, size)
        origin = rng.integers(0, cfg.sites, size=size)
        centres, exact = _batch_centres(conf, origin, K, quota)
        lhs = _encode(_recentre(conf, S, centres) @ masks.T)
        other = _sample_configs(cfg, rng, size)
        rhs = _encode(_recentre(other, S, _uniform_point(other, rng)) @ masks.T)
        ctl = _encode(_recentre(other, S, rng.integers(0, cfg.sites, size=size)) @ masks.T)
        return lhs, rhs, ctl, exact

    parts = _run_chunks(task, _chunks(cfg, R))
    lhs = np.concatenate([p[0] for p in parts])
    rhs = np.concatenate([p[1] for p in parts])
    ctl = np.concatenate([p[2] for p in parts])
    tv = tv_distance(lhs, rhs)
    ctv = tv_distance(ctl, rhs) if control else None
    log.info("shift coupling: R=%d tv=%s control=%s", R, fmt(tv), ctv)
    return CouplingReport(tv, R, ctv, all(p[3] for p in parts), asdict(cfg))


def _sample_palm(cfg: TorusConfig, rng, size) -> np.ndarray:
    """Configurations seen from a typical point."""
    conf = _sample_configs(cfg, rng, size)
    if cfg.q is not None:
        conf[:, 0] = 1
        return conf
    S = shift_table(cfg.n, cfg.d)
    return _recentre(conf, S, _uniform_point(conf, rng))


def verify_6_3_empirical(cfg: TorusConfig, C, replicates: int | None = None, palm: bool = True,
                         statistic: str = "boxes") -> CouplingReport:
    """Empirical window identity: ``(stat(theta_V), U + V)`` vs ``(stat(theta_0), U)``.

    ``U`` is uniform on ``C`` and ``V`` uniform among the points in ``C - U``
    (``V = -U``, staying put, when there are none). With ``palm=False`` the configuration
    is drawn from the stationary law instead of the Palm law, which is the
    negative control. ``statistic`` is ``"boxes"`` (box counts) or
    ``"config"`` (the full configuration, small tori only).
    """
    C = np.array(sorted({int(c) for c in C}), dtype=np.int64)
    if len(C) == 0:
        raise PreconditionError("window C must be nonempty")
    R = cfg.replicates if replicates is None else replicates
    S = shift_table(cfg.n, cfg.d)
    N = cfg.sites
    neg = S.argmin(axis=1)  # neg[s] solves s + x = 0
    masks = box_masks(cfg.n, cfg.d, cfg.radii)
    weights = 2 ** np.arange(N, dtype=np.int64)

    def stat(conf):
        if statistic == "config":
            return (conf @ weights)[:, None]
        return conf @ masks.T

    def task(chunk):
        seq, size = chunk
        rng = np.random.default_rng(seq)
        conf = _sample_palm(cfg, rng, size) if palm else _sample_configs(cfg, rng, size)
        u = C[rng.integers(0, len(C), size=size)]
        # sites of C - u, then the occupied ones among them
        window = S[neg[u]][:, C]
        occupied = np.take_along_axis(conf, window, axis=1)
        counts = occupied.sum(axis=1)
        pick = (rng.random(size) * counts).astype(np.int64)
        cum = np.cumsum(occupied, axis=1)
        col = (cum <= pick[:, None]).sum(axis=1)
        v = np.where(counts > 0, window[np.arange(size), np.minimum(col, len(C) - 1)], neg[u])
        lhs = _encode(stat(_recentre(conf, S, v)), S[v, u])
        rhs = _encode(stat(conf), u)
        return lhs, rhs

    parts = _run_chunks(task, _chunks(cfg, R))
    lhs = np.concatenate([p[0] for p in parts])
    rhs = np.concatenate([p[1] for p in parts])
    return CouplingReport(tv_distance(lhs, rhs), R, None, True, asdict(cfg))


__all__ = [
    "AllocationMap",
    "TorusConfig",
    "box_masks",
    "check_quota",
    "coordinates",
    "exact_allocation_rule",
    "export_csv",
    "find_blocking_pair",
    "fmt",
    "shift_table",
    "stable_marriage_allocate",
    "tv_distance",
    "verify_6_3_empirical",
    "verify_shift_coupling",
]
