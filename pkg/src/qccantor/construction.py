"""Multi-level Cantor construction on the source and target sides.

Each level N carries a packing layer (radii R_{N,j}, multiplicities m_{N,j},
centres) and one parameter sigma_{N,j} per group.  A source block of a path
has radius prod(sigma^K R) and a target block prod(sigma R); the block centres
compose the similarities z -> z_q + scale * z level by level.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import logsumexp

from . import gauge as gmod
from .errors import (BracketError, BuildError, ConsistencyError, DomainError, FormatError,
                     ResourceError)
from .gauge import GaugeSpec, conjugate_dimension, eps_exponent
from .packing import SHRINK, PackingLayer, group_sum, pack_equal, pack_schedule, shrink_to

TREE_VERSION = "qc-cantor-tree/1"
PATH_CAP = 10_000_000
DEFAULT_SIGMA_MAX = 0.1
SIDES = ("source", "target")


def default_eps_schedule(depth: int) -> tuple[float, ...]:
    return tuple(2.0 ** (-n - 3) for n in range(1, depth + 1))


def _check_side(side: str) -> str:
    if side not in SIDES:
        raise DomainError(f"side must be 'source' or 'target', got {side!r}")
    return side


@dataclass(frozen=True, eq=False)
class LevelSpec:
    layer: PackingLayer
    sigmas: np.ndarray

    def __post_init__(self):
        self.sigmas.setflags(write=False)

    @property
    def eps(self) -> float:
        return self.layer.eps

    @property
    def radii(self) -> np.ndarray:
        return self.layer.radii

    @property
    def counts(self) -> np.ndarray:
        return self.layer.counts

    def log_scale(self, side: str, K: float) -> np.ndarray:
        """Per-group log of the child block scale: K log sigma + log R or log sigma + log R."""
        ls = np.log(self.sigmas)
        lr = np.log(self.layer.radii)
        return (K * ls + lr) if _check_side(side) == "source" else (ls + lr)


@dataclass(frozen=True)
class BlockFrame:
    center: complex
    log_radius: float
    side: str
    path: tuple[tuple[int, int], ...] = ()

    @property
    def radius(self) -> float:
        return math.exp(self.log_radius)

    @property
    def generation(self) -> int:
        return len(self.path)


@dataclass(frozen=True, eq=False)
class ConstructionTree:
    K: float
    gauge: GaugeSpec
    levels: tuple[LevelSpec, ...]
    eps_schedule: tuple[float, ...]
    sigma_max: float = DEFAULT_SIGMA_MAX
    retries: tuple[int, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def d(self) -> float:
        return self.gauge.d

    @property
    def d_prime(self) -> float:
        return conjugate_dimension(self.K, self.gauge.d)

    @property
    def is_power(self) -> bool:
        return self.gauge.is_power

    def exponent(self, side: str) -> float:
        return self.d if _check_side(side) == "source" else self.d_prime

    def side_gauge(self, side: str):
        """The natural gauge of a side: h^(S) on the source, t^{d'} or h^(T) on the target."""
        if _check_side(side) == "source":
            return self.gauge
        if self.is_power:
            return gmod.target_gauge(self.gauge, self.K)
        return ts_correspondence(self)

    def eps_product(self, N: int | None = None) -> float:
        N = self.depth if N is None else N
        return math.prod(1.0 - lv.eps for lv in self.levels[:N])

    def level_scales(self, N: int, side: str) -> np.ndarray:
        """log child scale per group at level N (1-based)."""
        return self.levels[N - 1].log_scale(side, self.K)

    def disk_scales(self, N: int, side: str) -> np.ndarray:
        lv = self.levels[N - 1]
        return np.repeat(lv.log_scale(side, self.K), lv.counts)

    def flat_index(self, N: int, j: int, i: int) -> int:
        lv = self.levels[N - 1]
        if not (0 <= j < lv.layer.n_groups and 0 <= i < int(lv.counts[j])):
            raise IndexError(f"no disk ({j}, {i}) at level {N}")
        return int(lv.layer.offsets[j]) + i

    def group_of(self, N: int, flat: int) -> tuple[int, int]:
        off = self.levels[N - 1].layer.offsets
        j = int(np.searchsorted(off, flat, side="right") - 1)
        return j, int(flat - off[j])

    def _cache(self, key, make):
        store = self.__dict__.setdefault("_memo", {})
        if key not in store:
            store[key] = make()
        return store[key]

    def tilde_index(self, N: int):
        return self.levels[N - 1].layer.disk_index()

    # level arrays used by the map and by measure (cached per tree)
    def level_arrays(self, N: int, side: str):
        """(centres, tilde radii R, child log scales, child scales) for every disk of level N."""
        def make():
            lv = self.levels[N - 1]
            ls = self.disk_scales(N, side)
            return lv.layer.centers, lv.layer.disk_radii, ls, np.exp(ls)
        return self._cache(("arrays", N, side), make)

    def to_json(self) -> dict:
        return {
            "version": TREE_VERSION,
            "K": self.K,
            "gauge": self.gauge.descriptor(),
            "sigma_max": self.sigma_max,
            "eps_schedule": list(self.eps_schedule),
            "levels": [
                {"eps": lv.eps,
                 "groups": [{"radius": float(r), "sigma": float(s),
                             "centers": [[float(z.real), float(z.imag)] for z in lv.layer.group_centers(j)]}
                            for j, (r, s) in enumerate(zip(lv.radii, lv.sigmas))]}
                for lv in self.levels],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ConstructionTree":
        if data.get("version") != TREE_VERSION:
            raise FormatError(f"unsupported tree version {data.get('version')!r}")
        try:
            levels = []
            for lv in data["levels"]:
                groups = [(g["radius"], [complex(x, y) for x, y in g["centers"]]) for g in lv["groups"]]
                layer = PackingLayer.from_groups(groups, eps=lv["eps"])
                sig = np.array([float(g["sigma"]) for g in lv["groups"]])
                levels.append(LevelSpec(layer=layer, sigmas=sig))
            return cls(K=float(data["K"]), gauge=GaugeSpec.from_descriptor(data["gauge"]),
                       levels=tuple(levels), eps_schedule=tuple(float(e) for e in data["eps_schedule"]),
                       sigma_max=float(data.get("sigma_max", DEFAULT_SIGMA_MAX)))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed tree document: {exc}") from None

    def prefix(self, N: int) -> "ConstructionTree":
        """The same construction truncated after level N."""
        return ConstructionTree(K=self.K, gauge=self.gauge, levels=self.levels[:N],
                                eps_schedule=self.eps_schedule[:N], sigma_max=self.sigma_max)


def save_tree(tree: ConstructionTree, path) -> None:
    from ._util import atomic_write_json

    atomic_write_json(path, tree.to_json())


def load_tree(path) -> ConstructionTree:
    from ._util import read_json

    return ConstructionTree.from_json(read_json(path))


# ---------------------------------------------------------------------------
# Parameter choice


def solve_sigma_power(R, d: float, K: float):
    """sigma with sigma^{dK} = R^{2-d}, i.e. sigma = R^{(2-d)/(dK)}."""
    R = np.asarray(R, dtype=float)
    if np.any((R <= 0) | (R >= 1)):
        raise DomainError("radii must lie in (0, 1)")
    out = np.exp((2.0 - d) / (d * K) * np.log(R))
    return float(out) if out.ndim == 0 else out


def power_identity_logs(sigma, R, K: float, d: float):
    """Both sides, as logs, of (sigma^K R)^d = (sigma R)^{d'} (sigma^{dK} / R^{2-d})^b.

    Here b = d(K-1)/(2+(K-1)d).  The two sides are assembled independently, so
    their agreement checks the exponent algebra behind the choice of sigma.
    """
    ls = np.log(np.asarray(sigma, dtype=float))
    lR = np.log(np.asarray(R, dtype=float))
    denom = 2.0 + (K - 1.0) * d
    lhs = d * (K * ls + lR)
    rhs = (2.0 * K * d / denom) * (ls + lR) + (d * (K - 1.0) / denom) * (d * K * ls - (2.0 - d) * lR)
    if np.ndim(lhs) == 0:
        return float(lhs), float(rhs)
    return lhs, rhs


def solve_sigma_general(log_s_prev: float, log_Rprod_prev: float, R_new, g: GaugeSpec, K: float):
    """sigma from h(s_prev * sigma^K * R_new) = (Rprod_prev * R_new)^2.

    Raises BracketError when R_new is too large for a solution with sigma < 1.
    """
    scalar = np.ndim(R_new) == 0
    R_new = np.atleast_1d(np.asarray(R_new, dtype=float))
    log_R = np.log(R_new)
    target = 2.0 * (log_Rprod_prev + log_R)
    hi = log_s_prev + log_R
    if np.any(hi >= g.log_cutoff):
        raise BracketError("candidate source radius is outside the gauge domain; R_new too large")
    f_hi = np.asarray(g.eval_log(hi))
    if np.any(f_hi <= target):
        raise BracketError("no solution with sigma < 1; R_new too large")
    lo = hi - 1.0
    for _ in range(64):
        bad = np.asarray(g.eval_log(lo)) >= target
        if not bad.any():
            break
        lo = np.where(bad, hi - 2.0 * (hi - lo), lo)
    else:
        raise BracketError("could not bracket the source radius from below")
    log_s = np.array([gmod.invert(g, float(t), (float(a), float(b)))
                      for t, a, b in zip(target, lo, hi)])
    sigma = np.exp((log_s - log_s_prev - log_R) / K)
    if np.any(sigma >= 1.0):
        raise BracketError("solution has sigma >= 1; R_new too large")
    return float(sigma[0]) if scalar else sigma


@functools.lru_cache(maxsize=16)
def _schedule_cached(targets: tuple[float, ...], delta: float, ceiling: float) -> tuple[PackingLayer, ...]:
    return tuple(pack_schedule(list(targets), delta, ceiling))


def _power_ceiling(d: float, K: float, sigma_max: float) -> float:
    """Largest radius whose power-gauge sigma stays within sigma_max."""
    return math.exp(d * K / (2.0 - d) * math.log(sigma_max))


def build(K: float, g: GaugeSpec, depth: int, eps_schedule: Sequence[float] | None = None,
          sigma_max: float = DEFAULT_SIGMA_MAX, R_start: float | None = None, *,
          max_retries: int = 40, seed: int = 0, exact: bool = True) -> ConstructionTree:
    """Assemble a depth-``depth`` construction.

    For every level a layer is packed under a radius ceiling and sigma is
    solved per group; when a sigma exceeds ``sigma_max`` or the ordering rule
    for general gauges fails, the ceiling is halved and the level re-packed.
    With ``exact`` each layer is rescaled so its deficit equals the schedule.
    General gauges use single-radius layers on every level but the last, so
    that each level-N group sees one source prefix and its sigma is well defined.
    """
    if K < 1:
        raise DomainError("K must be >= 1")
    if depth < 1:
        raise DomainError("depth must be >= 1")
    eps = tuple(float(e) for e in (eps_schedule or default_eps_schedule(depth)))
    if len(eps) < depth:
        raise DomainError(f"eps schedule has {len(eps)} entries, depth is {depth}")
    eps = eps[:depth]
    if math.prod(1 - e for e in eps) < 0.5:
        raise DomainError("the eps schedule must keep prod(1 - eps_n) >= 1/2")
    if not 0 < sigma_max < 1:
        raise DomainError("sigma_max must lie in (0, 1)")
    cap = min(0.5, g.t_cutoff)
    if R_start is None:
        R_start = 0.49 * cap if not g.is_power else min(0.49, _power_ceiling(g.d, K, sigma_max))
    if not 0 < R_start < cap:
        raise DomainError(f"R_start must lie in (0, {cap})")
    if g.is_power:
        return _build_power(K, g, depth, eps, sigma_max, R_start, max_retries, exact)
    return _build_general(K, g, depth, eps, sigma_max, R_start, max_retries, exact)


def _build_power(K, g, depth, eps, sigma_max, R_start, max_retries, exact):
    # 12 significant digits: ceilings that differ by rounding noise share one cached packing
    ceiling = float(f"{R_start:.12g}")
    retries = 0
    # sigma is increasing in R and every radius is at most ceiling * (1 - SHRINK),
    # so the ceiling test is decided before packing
    while solve_sigma_power(ceiling * (1 - SHRINK), g.d, K) > sigma_max:
        ceiling *= 0.5
        retries += 1
        if retries > max_retries:
            raise BuildError(f"level 1 group 0: sigma stays above {sigma_max} after {max_retries} halvings")
    layers = _schedule_cached(eps, 2.0 * ceiling, ceiling)
    levels = []
    for n, (layer, e) in enumerate(zip(layers, eps), 1):
        if exact:
            layer = shrink_to(layer, e)
        sig = np.atleast_1d(solve_sigma_power(layer.radii, g.d, K))
        bad = np.nonzero(sig > sigma_max)[0]
        if bad.size:
            raise BuildError(f"level {n} group {int(bad[0])}: sigma {sig[bad[0]]:.4g} above {sigma_max}")
        levels.append(LevelSpec(layer=layer, sigmas=sig))
    return ConstructionTree(K=K, gauge=g, levels=tuple(levels), eps_schedule=eps,
                            sigma_max=sigma_max, retries=(retries,) * depth)


def _build_general(K, g, depth, eps, sigma_max, R_start, max_retries, exact):
    levels = []
    retries = []
    log_s_prev = 0.0
    log_P_prev = 0.0
    min_R = math.inf
    min_sigma = math.inf
    t_prev = [0.0]  # log t-products formed so far (single prefix before the last level)
    ceiling = R_start
    for n in range(1, depth + 1):
        if n > 1:
            ceiling = min(ceiling, min_R * (1 - 1e-9))
        last = n == depth
        reason = ""
        for attempt in range(max_retries + 1):
            if last:
                layer = pack_schedule([eps[n - 1]], min(0.999, 2.0 * ceiling), ceiling)[0]
            else:
                layer = pack_equal(eps[n - 1], min(0.999, 2.0 * ceiling), ceiling)
            if exact:
                layer = shrink_to(layer, eps[n - 1])
            try:
                sig = np.atleast_1d(solve_sigma_general(log_s_prev, log_P_prev, layer.radii, g, K))
            except BracketError as exc:
                reason = f"group 0: {exc}"
                ceiling *= 0.5
                continue
            problem = _ordering_problem(layer.radii, sig, min_R, min_sigma, sigma_max)
            if problem is None:
                break
            reason = problem
            ceiling *= 0.5
        else:
            raise BuildError(f"level {n} {reason} after {max_retries} halvings of the radius ceiling")
        retries.append(attempt)
        levels.append(LevelSpec(layer=layer, sigmas=sig))
        lv = levels[-1]
        if not last:
            log_s_prev += float(K * math.log(sig[0]) + math.log(layer.radii[0]))
            log_P_prev += float(math.log(layer.radii[0]))
        min_R = min(min_R, float(layer.radii.min()))
        min_sigma = min(min_sigma, float(sig.min()))
        ceiling = float(layer.radii.min())
    tree = ConstructionTree(K=K, gauge=g, levels=tuple(levels), eps_schedule=eps,
                            sigma_max=sigma_max, retries=tuple(retries))
    return tree


def _ordering_problem(R, sig, min_R, min_sigma, sigma_max):
    if np.any(sig > sigma_max):
        j = int(np.argmax(sig > sigma_max))
        return f"group {j}: sigma {sig[j]:.4g} above {sigma_max}"
    if np.any(R >= min_R):
        return f"group {int(np.argmax(R >= min_R))}: radius not below earlier radii"
    if np.any(sig >= min_sigma):
        return f"group {int(np.argmax(sig >= min_sigma))}: sigma not below earlier sigmas"
    if R.size > 1:
        if np.any(np.diff(R) >= 0):
            return "radii not strictly decreasing within the level"
        if np.any(np.diff(sig) >= 0):
            j = int(np.argmax(np.diff(sig) >= 0)) + 1
            return f"group {j}: sigma not below earlier groups of the level"
        if np.any(np.diff(np.log(sig) + np.log(R)) >= 0):
            return "target scales not strictly decreasing within the level"
    return None


# ---------------------------------------------------------------------------
# Frames, radii, sums


def _validate_path(tree: ConstructionTree, path) -> list[int]:
    if len(path) > tree.depth:
        raise IndexError(f"path of length {len(path)} exceeds depth {tree.depth}")
    return [tree.flat_index(k, int(j), int(i)) for k, (j, i) in enumerate(path, 1)]


def source_radius(tree: ConstructionTree, path) -> float:
    """log radius of the source block of ``path``."""
    _validate_path(tree, path)
    return math.fsum(float(tree.level_scales(k, "source")[j]) for k, (j, _) in enumerate(path, 1))


def target_radius(tree: ConstructionTree, path) -> float:
    _validate_path(tree, path)
    return math.fsum(float(tree.level_scales(k, "target")[j]) for k, (j, _) in enumerate(path, 1))


def block_frame(tree: ConstructionTree, path, side: str) -> BlockFrame:
    _check_side(side)
    flats = _validate_path(tree, path)
    c = 0j
    lr = 0.0
    for k, (flat, (j, _)) in enumerate(zip(flats, path), 1):
        c = c + math.exp(lr) * complex(tree.levels[k - 1].layer.centers[flat])
        lr += float(tree.level_scales(k, side)[j])
    return BlockFrame(center=c, log_radius=lr, side=side, path=tuple((int(j), int(i)) for j, i in path))


def enumerate_blocks(tree: ConstructionTree, N: int, side: str, top=None) -> Iterator[BlockFrame]:
    """Every generation-N block once, in lexicographic path order.

    ``top`` restricts the first path entry to the given level-1 flat indices
    (an int, a range or any iterable) for partitioned iteration.
    """
    _check_side(side)
    if not 0 <= N <= tree.depth:
        raise DomainError(f"generation {N} outside 0..{tree.depth}")
    if N == 0:
        yield BlockFrame(center=0j, log_radius=0.0, side=side, path=())
        return
    per_level = []
    for k in range(1, N + 1):
        lv = tree.levels[k - 1]
        per_level.append((lv.layer.centers, tree.disk_scales(k, side), lv.layer.group_index,
                          lv.layer.offsets))
    first = range(tree.levels[0].layer.n_disks)
    if top is not None:
        first = [top] if isinstance(top, (int, np.integer)) else list(top)

    def rec(k, c, lr, path):
        centers, scales, gidx, off = per_level[k]
        rng = first if k == 0 else range(centers.size)
        for f in rng:
            j = int(gidx[f])
            nc = c + math.exp(lr) * complex(centers[f])
            nl = lr + float(scales[f])
            np_ = path + ((j, int(f - off[j])),)
            if k + 1 == N:
                yield BlockFrame(center=nc, log_radius=nl, side=side, path=np_)
            else:
                yield from rec(k + 1, nc, nl, np_)

    yield from rec(0, 0j, 0.0, ())


def count_blocks(tree: ConstructionTree, N: int) -> int:
    return math.prod(tree.levels[k].layer.n_disks for k in range(N))


def group_paths(tree: ConstructionTree, N: int, cap: int = PATH_CAP):
    """Arrays over all group paths of length N: log weight (sum log m), log s, log t, log Rprod."""
    n_paths = math.prod(tree.levels[k].layer.n_groups for k in range(N))
    if n_paths > cap:
        raise ResourceError(f"{n_paths} group paths exceed the cap {cap}; use a smaller depth")
    lw = np.zeros(1)
    ls = np.zeros(1)
    lt = np.zeros(1)
    lp = np.zeros(1)
    for k in range(1, N + 1):
        lv = tree.levels[k - 1]
        lm = np.log(lv.counts.astype(float))
        src = tree.level_scales(k, "source")
        tgt = tree.level_scales(k, "target")
        lr = np.log(lv.radii)
        lw = (lw[:, None] + lm[None, :]).ravel()
        ls = (ls[:, None] + src[None, :]).ravel()
        lt = (lt[:, None] + tgt[None, :]).ravel()
        lp = (lp[:, None] + lr[None, :]).ravel()
    return lw, ls, lt, lp


def generation_sum(tree: ConstructionTree, N: int, side: str, gauge=None) -> float:
    """log of the sum over generation-N blocks of gauge(block radius).

    Power gauges factorize level by level; other gauges are summed over group
    paths.  With no gauge the natural gauge of the side is used.  Generation 0
    is the unit disk; for non-power gauges it returns the exact-relation
    value (R-product)^2 = 1, since the gauges are only defined below t0.
    """
    _check_side(side)
    if not 0 <= N <= tree.depth:
        raise DomainError(f"generation {N} outside 0..{tree.depth}")
    gauge = tree.side_gauge(side) if gauge is None else gauge
    if getattr(gauge, "is_power", False):
        total = gauge.log_scale
        for k in range(1, N + 1):
            lv = tree.levels[k - 1]
            total += float(logsumexp(np.log(lv.counts.astype(float)) + gauge.d * tree.level_scales(k, side)))
        return total
    if N == 0:
        return 0.0
    lw, ls, lt, _ = group_paths(tree, N)
    radii = ls if side == "source" else lt
    return float(logsumexp(lw + np.asarray(gauge.eval_log(radii))))


def level_identity(tree: ConstructionTree, N: int) -> dict:
    """The three per-level sums sum m R^2, sum m (sigma^K R)^d, sum m (sigma R)^{d'}."""
    lv = tree.levels[N - 1]
    m = lv.counts.astype(float)
    area = group_sum(lv.radii, lv.counts)
    src = math.fsum((m * np.exp(tree.d * tree.level_scales(N, "source"))).tolist())
    tgt = math.fsum((m * np.exp(tree.d_prime * tree.level_scales(N, "target"))).tolist())
    ref = 1.0 - lv.eps
    return {"area": area, "source": src, "target": tgt, "one_minus_eps": ref,
            "residual": max(abs(v - ref) / ref for v in (area, src, tgt))}


# ---------------------------------------------------------------------------
# The correspondence t -> s for general gauges


@dataclass(frozen=True, eq=False)
class TsCorrespondence:
    """Monotone map t -> s on the target radii T, extended between them.

    Between consecutive points of T the map is linear in (log t, log s); past
    the ends it keeps the ratio log s / log t of the nearest point.  Results are
    clipped into the open band t^K < s < t.  ``eval_log`` is the target gauge
    h^(T)(t) = t^{d'} eps^a(s(t)).
    """

    K: float
    source: GaugeSpec
    log_t: np.ndarray
    log_s: np.ndarray
    log_R2: np.ndarray

    @property
    def d(self) -> float:
        return conjugate_dimension(self.K, self.source.d)

    @property
    def is_power(self) -> bool:
        return False

    @property
    def a(self) -> float:
        return eps_exponent(self.K, self.source.d)

    def log_s_of(self, log_t):
        x = np.asarray(log_t, dtype=float)
        lt, ls = self.log_t, self.log_s
        y = np.interp(x, lt, ls)
        y = np.where(x < lt[0], x * (ls[0] / lt[0]), y)
        y = np.where(x > lt[-1], x * (ls[-1] / lt[-1]), y)
        margin = 1e-12 * np.abs(x)
        y = np.clip(y, self.K * x + margin, x - margin)
        on = np.searchsorted(lt, x)
        onc = np.clip(on, 0, lt.size - 1)
        exact = lt[onc] == x
        y = np.where(exact, ls[onc], y)
        return float(y) if np.ndim(log_t) == 0 else y

    def eval_log(self, log_t):
        x = np.asarray(log_t, dtype=float)
        s = np.asarray(self.log_s_of(x))
        le = np.asarray(self.source.log_eps(s))
        out = self.d * x + self.a * le
        return float(out) if np.ndim(log_t) == 0 else out

    def increasing_on_T(self) -> bool:
        v = np.asarray(self.eval_log(self.log_t))
        return bool(np.all(np.diff(v) > 0))


def ts_correspondence(tree: ConstructionTree) -> TsCorrespondence:
    def make():
        lts, lss, lps = [], [], []
        for N in range(1, tree.depth + 1):
            _, ls, lt, lp = group_paths(tree, N)
            lts.append(lt)
            lss.append(ls)
            lps.append(2 * lp)
        lt = np.concatenate(lts)
        ls = np.concatenate(lss)
        lp = np.concatenate(lps)
        order = np.argsort(lt, kind="stable")
        lt, ls, lp = lt[order], ls[order], lp[order]
        dup = np.diff(lt) == 0
        if dup.any():
            if np.any(np.abs(np.diff(ls)[dup]) > 1e-12 * np.abs(ls[1:][dup])):
                raise ConsistencyError("two paths share a target radius but not a source radius")
            keep = np.concatenate([[True], ~dup])
            lt, ls, lp = lt[keep], ls[keep], lp[keep]
        return TsCorrespondence(K=tree.K, source=tree.gauge, log_t=lt, log_s=ls, log_R2=lp)
    return tree._cache("ts", make)


def general_relation_residual(tree: ConstructionTree) -> float:
    """Max over all paths of |log(t^{d'} eps^a(s)) - log Rprod^2| (log domain)."""
    worst = 0.0
    a = eps_exponent(tree.K, tree.d)
    for N in range(1, tree.depth + 1):
        _, ls, lt, lp = group_paths(tree, N)
        lhs = tree.d_prime * lt + a * np.asarray(tree.gauge.log_eps(ls))
        worst = max(worst, float(np.max(np.abs(lhs - 2 * lp) / np.maximum(1.0, np.abs(2 * lp)))))
    return worst


def source_relation_residual(tree: ConstructionTree) -> float:
    """Max over all paths of |log h(s) - log Rprod^2|, relative in the log domain."""
    worst = 0.0
    for N in range(1, tree.depth + 1):
        _, ls, _, lp = group_paths(tree, N)
        lhs = np.asarray(tree.gauge.eval_log(ls))
        worst = max(worst, float(np.max(np.abs(lhs - 2 * lp) / np.maximum(1.0, np.abs(2 * lp)))))
    return worst


def trapping_holds(tree: ConstructionTree) -> bool:
    for N in range(1, tree.depth + 1):
        _, ls, lt, _ = group_paths(tree, N)
        if not (np.all(tree.K * lt < ls) and np.all(ls < lt)):
            return False
    return True


def lebesgue_generation(tree: ConstructionTree, delta0: float, side: str = "target") -> int | None:
    """Least N whose generation-N block radii are all <= delta0 (None if depth is too shallow)."""
    lr = 0.0
    for N in range(1, tree.depth + 1):
        lr += float(tree.level_scales(N, side).max())
        if lr <= math.log(delta0):
            return N
    return None


def check_tree(tree: ConstructionTree) -> dict:
    """The structural invariants of a built tree."""
    out = {"eps_product": tree.eps_product(), "eps_product_ok": tree.eps_product() >= 0.5}
    sig_ok = all(bool(np.all(lv.sigmas <= tree.sigma_max)) for lv in tree.levels)
    out["sigma_bound_ok"] = sig_ok
    if tree.is_power:
        res = []
        for lv in tree.levels:
            want = (2.0 - tree.d) * np.log(lv.radii)
            got = tree.d * tree.K * np.log(lv.sigmas)
            res.append(float(np.max(np.abs(got - want) / np.maximum(1, np.abs(want)))))
        out["sigma_relation_residual"] = max(res)
        out["level_identity_residual"] = max(level_identity(tree, N)["residual"]
                                             for N in range(1, tree.depth + 1))
    else:
        out["sigma_relation_residual"] = source_relation_residual(tree)
        out["target_relation_residual"] = general_relation_residual(tree)
        out["trapping"] = trapping_holds(tree)
        out["h_target_increasing_on_T"] = ts_correspondence(tree).increasing_on_T()
    return out
