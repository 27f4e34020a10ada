"""Hausdorff-content upper bounds and packing-based lower-bound certificates.

Upper bounds sum gauge(2r) over the generation-N blocks.  Lower bounds come
from the packing condition: for every probe disk B and every admissible
family (pairwise disjoint blocks inside B), the gauge-sum of the family is at
most C1 * gauge(r(B)).  C1 is measured on seeded probes, recorded on the tree,
and then used to turn the generation sum into a certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from ._util import ordered_map
from .construction import (BlockFrame, ConstructionTree, _check_side, generation_sum, group_paths)
from .errors import DomainError, StateError
from .rng import SplitMix64


def _resolve(tree: ConstructionTree, side: str, gauge):
    _check_side(side)
    return tree.side_gauge(side) if gauge is None else gauge


def _glog(gauge, log_r):
    return np.asarray(gauge.eval_log(np.asarray(log_r, dtype=float)), dtype=float)


def _gauge_key(gauge) -> str:
    if hasattr(gauge, "short_name"):
        return gauge.short_name()
    return type(gauge).__name__


def _exact_lse(v: np.ndarray) -> float:
    """log sum exp with a compensated sum (the identities are checked at 1e-12)."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        return -math.inf
    m = float(v.max())
    return m + math.log(math.fsum(np.exp(v - m).tolist()))


def upper_content(tree: ConstructionTree, N: int, side: str, gauge=None) -> float:
    """log of sum over generation-N blocks of gauge(2 r), i.e. the diameter form of the content bound."""
    g = _resolve(tree, side, gauge)
    if not 0 <= N <= tree.depth:
        raise DomainError(f"N must lie in 0..{tree.depth}")
    if getattr(g, "is_power", False):
        return g.d * math.log(2.0) + generation_sum(tree, N, side, g)
    if N == 0:
        return float(_glog(g, math.log(2.0)))
    lw, ls, lt, _ = group_paths(tree, N)
    lr = ls if side == "source" else lt
    return float(logsumexp(lw + _glog(g, lr + math.log(2.0))))


# ---------------------------------------------------------------------------
# Families


@dataclass(frozen=True)
class Probe:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("probe radius must be positive")


@dataclass
class AdmissibleFamily:
    """Disjoint blocks inside a probe, stored as arrays (one row per block)."""

    probe: Probe
    side: str
    generations: np.ndarray
    log_radii: np.ndarray
    centers: np.ndarray
    paths: list          # flat-index tuples
    met_siblings: int = 0
    reduction_violations: int = 0
    area_violations: int = 0
    reduction_margin: float = math.inf

    def __len__(self) -> int:
        return int(self.generations.size)

    def blocks(self, tree: ConstructionTree) -> list[BlockFrame]:
        out = []
        for c, lr, p in zip(self.centers, self.log_radii, self.paths):
            path = tuple(tree.group_of(k, f) for k, f in enumerate(p, 1))
            out.append(BlockFrame(center=complex(c), log_radius=float(lr), side=self.side, path=path))
        return out

    def is_admissible(self, rtol: float = 1e-12) -> bool:
        """Containment in the probe and pairwise disjointness.

        Distinct blocks of the construction are disjoint unless one path is a
        prefix of the other, so disjointness reduces to a prefix test.
        """
        r = np.exp(self.log_radii)
        inside = np.abs(self.centers - self.probe.center) + r <= self.probe.radius * (1 + rtol)
        if not np.all(inside):
            return False
        ps = sorted(self.paths)
        for a, b in zip(ps, ps[1:]):
            if b[:len(a)] == a:
                return False
        return True


def _level_kdtree(tree: ConstructionTree, k: int) -> cKDTree:
    def make():
        c = tree.levels[k - 1].layer.centers
        return cKDTree(np.column_stack([c.real, c.imag]))
    return tree._cache(("kd", k), make)


def _level_sigma(tree: ConstructionTree, k: int) -> np.ndarray:
    def make():
        lv = tree.levels[k - 1]
        return np.repeat(lv.sigmas, lv.counts)
    return tree._cache(("sig", k), make)


def _descend(tree: ConstructionTree, side: str, probe: Probe, max_gen: int,
             rng: SplitMix64 | None = None, defer: float = 0.0, cap: int = 200_000) -> AdmissibleFamily:
    """Maximal admissible family of blocks of generations 1..max_gen inside probe.

    With a generator and defer > 0 each contained block is, with that
    probability, replaced by its children (while the family stays under cap).
    Along the way, every crossing block whose children meet the probe at least
    twice is tested for the probe-size reduction and the 4B area bound.
    """
    pc, rho = complex(probe.center), float(probe.radius)
    gens: list[np.ndarray] = []
    lrs: list[np.ndarray] = []
    cents: list[np.ndarray] = []
    paths: list = []
    total = 0
    stats = {"met": 0, "red": 0, "area": 0, "margin": math.inf}
    coin = 0

    def add(k, lr, c, flats):
        nonlocal total
        gens.append(np.full(np.size(lr), k))
        lrs.append(np.atleast_1d(lr))
        cents.append(np.atleast_1d(c))
        paths.extend(flats)
        total += np.size(lr)

    # entries: (generation, centre, log scale, flat path, fully contained?)
    # the unit disk itself is never a member: descend into generation 1 directly
    stack = [(0, 0j, 0.0, (), False)] if abs(pc) < rho + 1.0 else []
    while stack:
        k, C, lS, flats, contained = stack.pop()
        if contained:
            do_defer = False
            if rng is not None and defer > 0 and k < max_gen:
                coin += 1
                nxt = tree.levels[k].layer.n_disks
                do_defer = bool(rng.spawn(coin).uniform(1)[0] < defer) and total + len(stack) + nxt <= cap
            if not do_defer:
                add(k, lS, C, [flats])
                continue
            centers, _, ls, _ = tree.level_arrays(k + 1, side)
            S = math.exp(lS)
            for f in range(centers.size):
                stack.append((k + 1, C + S * complex(centers[f]), lS + float(ls[f]), flats + (f,), True))
            continue
        if k == max_gen:
            continue
        centers, R, ls, b = tree.level_arrays(k + 1, side)
        S = math.exp(lS)
        p = (pc - C) / S
        rl = rho / S
        bmax = float(b.max())
        if rl > 2.0 + abs(p):
            cand = np.arange(centers.size)
        else:
            cand = np.asarray(_level_kdtree(tree, k + 1).query_ball_point([p.real, p.imag], rl + bmax),
                              dtype=np.int64)
        if cand.size == 0:
            continue
        dist = np.abs(centers[cand] - p)
        bc = b[cand]
        meet = dist < rl + bc
        inside = dist + bc <= rl
        met = cand[meet]
        if met.size >= 2:
            stats["met"] += 1
            sig = _level_sigma(tree, k + 1)[met]
            shrink = sig ** tree.K if side == "source" else sig
            need = float(np.max((1.0 - shrink) * R[met]))
            stats["margin"] = min(stats["margin"], 2 * rl / need)
            if 2 * rl < need * (1 - 1e-12):
                stats["red"] += 1
            far = np.abs(centers[met] - p) + R[met]
            if np.any(far > 4 * rl * (1 + 1e-12)) or float(np.sum(R[met] ** 2)) > 16 * rl * rl:
                stats["area"] += 1
        cross = cand[meet & ~inside]
        for f in cross:
            stack.append((k + 1, C + S * complex(centers[f]), lS + float(ls[f]), flats + (int(f),), False))
        got = cand[inside]
        if got.size:
            if rng is not None and defer > 0 and k + 1 < max_gen:
                for f in got:
                    stack.append((k + 1, C + S * complex(centers[f]), lS + float(ls[f]), flats + (int(f),), True))
            else:
                add(k + 1, lS + ls[got], C + S * centers[got], [flats + (int(f),) for f in got])
    if gens:
        g = np.concatenate(gens)
        lr = np.concatenate(lrs).astype(float)
        c = np.concatenate(cents).astype(complex)
    else:
        g, lr, c = np.zeros(0, dtype=int), np.zeros(0), np.zeros(0, dtype=complex)
    return AdmissibleFamily(probe=probe, side=side, generations=g, log_radii=lr, centers=c, paths=paths,
                            met_siblings=stats["met"], reduction_violations=stats["red"],
                            area_violations=stats["area"], reduction_margin=stats["margin"])


def random_admissible_family(tree: ConstructionTree, probe: Probe, max_gen: int, seed: int = 0,
                             side: str = "target", defer: float = 0.0, cap: int = 200_000) -> AdmissibleFamily:
    """A maximal family inside probe; with defer > 0 some blocks are replaced by their children."""
    _check_side(side)
    if not 1 <= max_gen <= tree.depth:
        raise DomainError(f"max_gen must lie in 1..{tree.depth}")
    rng = SplitMix64(seed) if defer > 0 else None
    return _descend(tree, side, probe, max_gen, rng=rng, defer=defer, cap=cap)


def packing_check(tree: ConstructionTree, probe: Probe, family: AdmissibleFamily, gauge=None) -> dict:
    g = _resolve(tree, family.side, gauge)
    if len(family) == 0:
        return {"log_sum": -math.inf, "ratio": 0.0, "blocks": 0}
    ls = _exact_lse(_glog(g, family.log_radii))
    ratio = math.exp(ls - float(_glog(g, math.log(probe.radius))))
    return {"log_sum": ls, "ratio": ratio, "blocks": len(family)}


def children_sum_check(tree: ConstructionTree, path, side: str, gauge=None) -> float:
    """Relative residual of sum over children gauge(r) against gauge(r(parent)) (1 - eps_N)."""
    g = _resolve(tree, side, gauge)
    path = tuple(path)
    N = len(path) + 1
    if N > tree.depth:
        raise IndexError(f"path of length {len(path)} has no children in a depth-{tree.depth} tree")
    for k, (j, i) in enumerate(path, 1):
        tree.flat_index(k, int(j), int(i))
    lp = math.fsum(float(tree.level_scales(k, side)[j]) for k, (j, _) in enumerate(path, 1))
    lv = tree.levels[N - 1]
    child = lp + tree.level_scales(N, side)
    terms = np.log(lv.counts.astype(float)) + _glog(g, child)
    lhs = _exact_lse(terms)
    rhs = float(_glog(g, lp)) + math.log1p(-lv.eps) if path or getattr(g, "is_power", False) \
        else math.log1p(-lv.eps)
    return abs(math.expm1(lhs - rhs))


def descendant_log_sum(tree: ConstructionTree, family: AdmissibleFamily, M: int, gauge=None) -> float:
    """log of sum of gauge(r) over all generation-M descendants of the family blocks.

    Recomputed from layer data (block radii times level scales), not from eps.
    """
    g = _resolve(tree, family.side, gauge)
    if len(family) == 0:
        return -math.inf
    if np.any(family.generations > M) or M > tree.depth:
        raise DomainError("M must be at least every block generation and at most depth")
    parts = []
    for gen in np.unique(family.generations):
        lr = family.log_radii[family.generations == gen]
        if getattr(g, "is_power", False):
            extra = 0.0
            for k in range(int(gen) + 1, M + 1):
                lv = tree.levels[k - 1]
                extra += _exact_lse(np.log(lv.counts.astype(float)) + g.d * tree.level_scales(k, family.side))
            parts.append(_exact_lse(_glog(g, lr)) + extra)
        else:
            lw = np.zeros(1)
            ll = np.zeros(1)
            for k in range(int(gen) + 1, M + 1):
                lv = tree.levels[k - 1]
                lw = (lw[:, None] + np.log(lv.counts.astype(float))[None, :]).ravel()
                ll = (ll[:, None] + tree.level_scales(k, family.side)[None, :]).ravel()
            parts.append(_exact_lse((lw[None, :] + _glog(g, lr[:, None] + ll[None, :])).ravel()))
    return _exact_lse(np.array(parts))


def descendant_factor(tree: ConstructionTree, family: AdmissibleFamily, M: int, gauge=None) -> dict:
    """Factor by which replacing the family by its generation-M descendants changes the sum."""
    g = _resolve(tree, family.side, gauge)
    if len(family) == 0:
        return {"factor": 1.0, "lower": tree.eps_product(), "ok": True}
    before = _exact_lse(_glog(g, family.log_radii))
    after = descendant_log_sum(tree, family, M, g)
    f = math.exp(after - before)
    lo = tree.eps_product()
    return {"factor": f, "lower": lo, "ok": bool(lo * (1 - 1e-12) <= f <= 1 + 1e-12)}


# ---------------------------------------------------------------------------
# Packing survey and certificates


@dataclass
class PackingSurvey:
    side: str
    gauge: str
    depths: tuple
    probes: int
    seed: int
    max_ratio: dict                    # depth -> max ratio
    normalized_max: dict               # depth -> max ratio / prod_{n<=depth}(1 - eps_n)
    all_finite: bool
    multi_sibling: int
    reduction_violations: int
    area_violations: int
    reduction_margin: float
    ratios: dict = field(repr=False, default_factory=dict)

    @property
    def constant(self) -> float:
        """The recorded packing constant C1 (never below 1: a block is its own family)."""
        return max(1.0, max(self.max_ratio.values(), default=1.0))

    def stable(self, rel: float = 0.05) -> bool:
        ds = sorted(self.normalized_max)
        if len(ds) < 2:
            return True
        a, b = self.normalized_max[ds[-2]], self.normalized_max[ds[-1]]
        return abs(b - a) <= rel * max(a, 1e-300)

    def to_json(self) -> dict:
        return {"side": self.side, "gauge": self.gauge, "depths": list(self.depths), "probes": self.probes,
                "seed": self.seed, "max_ratio": {str(k): v for k, v in self.max_ratio.items()},
                "normalized_max": {str(k): v for k, v in self.normalized_max.items()},
                "constant": self.constant, "all_finite": self.all_finite,
                "multi_sibling": self.multi_sibling, "reduction_violations": self.reduction_violations,
                "area_violations": self.area_violations, "reduction_margin": self.reduction_margin}


def sample_probes(tree: ConstructionTree, n: int, seed: int, side: str = "target", gauge=None) -> list[Probe]:
    """Uniform centres in 1.2 D and log-uniform radii from the smallest block radius up to 1.

    Non-power gauges live below t0, so their radii stop at t0 / 2.
    """
    g = _resolve(tree, side, gauge)
    lo = sum(float(tree.level_scales(k, side).min()) for k in range(1, tree.depth + 1))
    hi = 0.0 if getattr(g, "is_power", False) else math.log(0.5 * tree.gauge.t_cutoff)
    rng = SplitMix64(seed)
    c = rng.spawn(1).disk(n, 1.2)
    r = np.exp(rng.spawn(2).uniform(n, lo, hi))
    return [Probe(complex(ci), float(ri)) for ci, ri in zip(c, r)]


def survey_packing(tree: ConstructionTree, side: str = "target", gauge=None, probes: int = 1000,
                   seed: int = 0, depths: Sequence[int] | None = None, record: bool = True) -> PackingSurvey:
    """Packing ratios of maximal families over seeded probes, one pass per depth.

    The same probes serve every depth, so the maxima are directly comparable.
    With record=True the resulting constant is stored on the tree for
    lower_bound_certificate.
    """
    g = _resolve(tree, side, gauge)
    depths = tuple(range(1, tree.depth + 1)) if depths is None else tuple(depths)
    ps = sample_probes(tree, probes, seed, side, g)

    def one(p: Probe):
        out = []
        for n in depths:
            fam = _descend(tree, side, p, n)
            chk = packing_check(tree, p, fam, g)
            out.append((chk["ratio"], fam.met_siblings, fam.reduction_violations, fam.area_violations,
                        fam.reduction_margin))
        return out

    rows = ordered_map(one, ps)
    ratios = {n: np.array([r[i][0] for r in rows]) for i, n in enumerate(depths)}
    flat = [x for r in rows for x in r]
    max_ratio = {n: float(v.max()) for n, v in ratios.items()}
    norm = {n: max_ratio[n] / tree.eps_product(n) for n in depths}
    survey = PackingSurvey(
        side=side, gauge=_gauge_key(g), depths=depths, probes=probes, seed=seed,
        max_ratio=max_ratio, normalized_max=norm,
        all_finite=bool(all(np.all(np.isfinite(v)) for v in ratios.values())),
        multi_sibling=int(sum(x[1] > 0 for x in flat)),
        reduction_violations=int(sum(x[2] for x in flat)),
        area_violations=int(sum(x[3] for x in flat)),
        reduction_margin=float(min(x[4] for x in flat)) if flat else math.inf,
        ratios=ratios)
    if record:
        tree.__dict__.setdefault("_memo", {})[("packing", side, _gauge_key(g))] = survey
    return survey


def recorded_survey(tree: ConstructionTree, side: str, gauge=None) -> PackingSurvey:
    g = _resolve(tree, side, gauge)
    store = tree.__dict__.get("_memo", {})
    s = store.get(("packing", side, _gauge_key(g)))
    if s is None:
        raise StateError("packing constant not measured for this tree, side and gauge; run survey_packing first")
    return s


def lower_bound_certificate(tree: ConstructionTree, N: int, side: str, gauge=None,
                            survey: PackingSurvey | None = None) -> float:
    """log of (sum over generation-N blocks of gauge(r)) / C1.

    A set of diameter delta lies in a disk of radius delta, hence
    gauge(delta) >= sum gauge(r) / C1 over the blocks that disk contains.
    """
    g = _resolve(tree, side, gauge)
    if not 0 <= N <= tree.depth:
        raise DomainError(f"N must lie in 0..{tree.depth}")
    s = recorded_survey(tree, side, g) if survey is None else survey
    if N == 0:
        base = float(_glog(g, 0.0)) if getattr(g, "is_power", False) else 0.0
    else:
        base = generation_sum(tree, N, side, g)
    return base - math.log(s.constant)


def measure_report(tree: ConstructionTree, N: int, side: str, gauge=None) -> dict:
    g = _resolve(tree, side, gauge)
    s = recorded_survey(tree, side, g)
    up = upper_content(tree, N, side, g)
    lo = lower_bound_certificate(tree, N, side, g, s)
    return {"side": side, "gauge": _gauge_key(g), "N": N, "upper_log": up, "lower_log": lo,
            "sandwich": bool(lo <= up), "packing_ratio_max": s.constant, "probes": s.probes}
