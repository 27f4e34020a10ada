"""Disjoint disk packings of the unit disk with a prescribed area deficit.

The packer works on a sequence of square meshes.  Round r uses squares of
side delta_r = delta_0 / 2^r whose origin is shifted by half a square
relative to the previous round, so the corners of old squares become the
centres of new ones.  In every square that still meets uncovered area we
place the largest disk (found by sampling and pattern search) that fits in
the free part of the square; squares whose inscribed disk is already free
simply get that disk.  Radii other than exact inscribed ones are rounded
down to a geometric ladder so that each round contributes few distinct radii
(the groups of the layer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, FormatError, ProgressError, ResourceError

SHRINK = 1e-6
MAX_ROUNDS = 60
LADDER = 128  # rungs per octave for non-inscribed radii
MIN_FRACTION = 0.25  # smallest accepted radius, relative to half the square side
MAX_CELLS = 6_000_000


@dataclass(frozen=True)
class RoundRecord:
    side: float
    placed: int
    coverage: float


@dataclass(frozen=True, eq=False)
class PackingLayer:
    """Disks grouped by radius; group j occupies ``centers[offsets[j]:offsets[j+1]]``."""

    radii: np.ndarray
    counts: np.ndarray
    centers: np.ndarray
    eps: float
    rounds: tuple[RoundRecord, ...] = ()
    radius_bound: float = 1.0

    def __post_init__(self):
        for name in ("radii", "counts", "centers"):
            getattr(self, name).setflags(write=False)

    @classmethod
    def from_groups(cls, groups: Iterable[tuple[float, Sequence[complex]]], *,
                    rounds: tuple[RoundRecord, ...] = (), radius_bound: float = 1.0,
                    eps: float | None = None) -> "PackingLayer":
        groups = [(float(r), np.asarray(c, dtype=complex).ravel()) for r, c in groups]
        groups = [g for g in groups if g[1].size > 0]
        if not groups:
            raise DomainError("a layer needs at least one disk")
        radii = np.array([g[0] for g in groups])
        counts = np.array([g[1].size for g in groups], dtype=np.int64)
        centers = np.concatenate([g[1] for g in groups])
        cov = group_sum(radii, counts)
        return cls(radii=radii, counts=counts, centers=centers,
                   eps=1.0 - cov if eps is None else float(eps),
                   rounds=rounds, radius_bound=radius_bound)

    @property
    def coverage(self) -> float:
        return group_sum(self.radii, self.counts)

    @property
    def n_groups(self) -> int:
        return int(self.radii.size)

    @property
    def n_disks(self) -> int:
        return int(self.centers.size)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)])

    @property
    def group_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_groups), self.counts)

    @property
    def disk_radii(self) -> np.ndarray:
        return np.repeat(self.radii, self.counts)

    def group_centers(self, j: int) -> np.ndarray:
        off = self.offsets
        return self.centers[off[j]:off[j + 1]]

    def groups(self) -> list[tuple[float, np.ndarray]]:
        return [(float(self.radii[j]), self.group_centers(j)) for j in range(self.n_groups)]

    def scaled(self, factor: float) -> "PackingLayer":
        """All centres and radii multiplied by ``factor`` about the origin."""
        return PackingLayer(radii=self.radii * factor, counts=self.counts.copy(),
                            centers=self.centers * factor,
                            eps=1.0 - group_sum(self.radii * factor, self.counts),
                            rounds=self.rounds, radius_bound=self.radius_bound)

    def disk_index(self) -> "DiskIndex":
        idx = self.__dict__.get("_index")
        if idx is None:
            idx = DiskIndex(self.centers, self.disk_radii)
            object.__setattr__(self, "_index", idx)
        return idx

    def to_json(self) -> dict:
        return {"groups": [{"radius": float(r), "centers": [[float(z.real), float(z.imag)] for z in c]}
                           for r, c in self.groups()],
                "eps": float(self.eps)}

    @classmethod
    def from_json(cls, data: dict) -> "PackingLayer":
        try:
            groups = [(g["radius"], [complex(x, y) for x, y in g["centers"]]) for g in data["groups"]]
            eps = data.get("eps")
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed layer document: {exc}") from None
        return cls.from_groups(groups, eps=eps)


def group_sum(radii: np.ndarray, counts: np.ndarray) -> float:
    """Sum of m_j R_j^2 with compensated summation."""
    return math.fsum((np.asarray(counts, float) * np.asarray(radii, float) ** 2).tolist())


# ---------------------------------------------------------------------------
# Point location


class DiskIndex:
    """Locate the disk (from a disjoint family) containing each query point.

    Disks are split into octave classes of radius; inside one class a k-nearest
    query with a distance bound finds every candidate, and saturated queries
    fall back to a ball query.
    """

    K_QUERY = 8

    def __init__(self, centers: np.ndarray, radii: np.ndarray):
        centers = np.asarray(centers, dtype=complex)
        radii = np.asarray(radii, dtype=float)
        self.centers = centers
        self.radii = radii
        rmax = radii.max()
        cls = np.floor(np.log2(rmax / radii)).astype(int)
        self.classes = []
        for c in np.unique(cls):
            ids = np.nonzero(cls == c)[0]
            pts = np.column_stack([centers[ids].real, centers[ids].imag])
            self.classes.append((ids, cKDTree(pts), float(radii[ids].max())))

    def _candidates(self, ids, tree, bound, pts):
        k = min(self.K_QUERY, ids.size)
        dist, loc = tree.query(pts, k=k, distance_upper_bound=bound)
        if k == 1:
            dist, loc = dist[:, None], loc[:, None]
        sat = np.isfinite(dist[:, -1]) & (k < ids.size)
        return dist, loc, sat

    def locate(self, w: np.ndarray) -> np.ndarray:
        """Index of the disk with |w - z| < R, or -1."""
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        out = np.full(w.shape, -1, dtype=np.int64)
        if w.size == 0:
            return out
        pts = np.column_stack([w.real, w.imag])
        for ids, tree, rhi in self.classes:
            todo = np.nonzero(out < 0)[0]
            if todo.size == 0:
                break
            dist, loc, sat = self._candidates(ids, tree, rhi, pts[todo])
            valid = np.isfinite(dist)
            gl = np.where(valid, ids[np.minimum(loc, ids.size - 1)], 0)
            inside = valid & (dist < self.radii[gl])
            hit = inside.any(axis=1)
            first = np.argmax(inside, axis=1)
            out[todo[hit]] = gl[hit, first[hit]]
            for row in np.nonzero(sat & ~hit)[0]:
                p = pts[todo[row]]
                cand = ids[tree.query_ball_point(p, rhi)]
                dd = np.abs(self.centers[cand] - w[todo[row]])
                ok = np.nonzero(dd < self.radii[cand])[0]
                if ok.size:
                    out[todo[row]] = cand[ok[0]]
        return out

    def boundary_distance(self, w: np.ndarray, cap: float) -> np.ndarray:
        """min(cap, distance from w to the nearest disk boundary circle)."""
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        out = np.full(w.shape, float(cap))
        pts = np.column_stack([w.real, w.imag])
        for ids, tree, rhi in self.classes:
            bound = rhi + cap
            k = min(self.K_QUERY, ids.size)
            dist, loc = tree.query(pts, k=k, distance_upper_bound=bound)
            if k == 1:
                dist, loc = dist[:, None], loc[:, None]
            valid = np.isfinite(dist)
            gl = np.where(valid, ids[np.minimum(loc, ids.size - 1)], 0)
            gap = np.where(valid, np.abs(dist - self.radii[gl]), np.inf)
            out = np.minimum(out, gap.min(axis=1))
            sat = np.isfinite(dist[:, -1]) & (k < ids.size)
            for row in np.nonzero(sat)[0]:
                cand = ids[tree.query_ball_point(pts[row], bound)]
                if cand.size:
                    g = np.abs(np.abs(self.centers[cand] - w[row]) - self.radii[cand])
                    out[row] = min(out[row], g.min())
        return out


# ---------------------------------------------------------------------------
# Verification


def verify_layer(layer: PackingLayer, delta_bound: float | None = None) -> dict:
    """Check containment, pairwise disjoint closures, coverage arithmetic and radius bound."""
    z = layer.centers
    r = layer.disk_radii
    report = {"n_disks": layer.n_disks, "n_groups": layer.n_groups}
    slack = 1.0 - (np.abs(z) + r)
    bad = np.nonzero(slack <= 0)[0]
    report["containment"] = {"pass": bad.size == 0,
                             "first_violation": int(bad[0]) if bad.size else None,
                             "min_slack": float(slack.min())}
    pair = _first_overlap(z, r)
    report["disjoint"] = {"pass": pair is None, "first_violation": pair}
    cov = layer.coverage
    rel = abs(cov - (1.0 - layer.eps)) / cov
    report["coverage"] = {"pass": rel <= 1e-12, "coverage": cov, "eps": layer.eps, "residual": rel}
    bound = layer.radius_bound if delta_bound is None else delta_bound
    report["radius_bound"] = {"pass": bool(np.all(layer.radii <= bound)), "bound": bound,
                              "max_radius": float(layer.radii.max())}
    report["pass"] = all(report[k]["pass"] for k in ("containment", "disjoint", "coverage", "radius_bound"))
    return report


def _first_overlap(z: np.ndarray, r: np.ndarray):
    """First pair (by index) with |z_a - z_b| <= r_a + r_b, or None."""
    if z.size < 2:
        return None
    if z.size <= 2000:
        dz = np.abs(z[:, None] - z[None, :])
        rr = r[:, None] + r[None, :]
        hit = np.triu(dz <= rr, 1)
        if hit.any():
            a, b = np.argwhere(hit)[0]
            return [int(a), int(b)]
        return None
    rmax = r.max()
    cls = np.floor(np.log2(rmax / r)).astype(int)
    groups = []
    for c in np.unique(cls):
        ids = np.nonzero(cls == c)[0]
        groups.append((ids, cKDTree(np.column_stack([z[ids].real, z[ids].imag])), r[ids].max()))
    worst = None
    for ia, (ida, ta, ra) in enumerate(groups):
        for ib in range(ia, len(groups)):
            idb, tb, rb = groups[ib]
            pairs = ta.sparse_distance_matrix(tb, ra + rb, output_type="ndarray")
            if pairs.size == 0:
                continue
            a = ida[pairs["i"]]
            b = idb[pairs["j"]]
            keep = a != b
            a, b, dist = a[keep], b[keep], pairs["v"][keep]
            hit = dist <= r[a] + r[b]
            if hit.any():
                lo = np.minimum(a[hit], b[hit])
                hi = np.maximum(a[hit], b[hit])
                order = np.lexsort((hi, lo))
                cand = [int(lo[order[0]]), int(hi[order[0]])]
                if worst is None or cand < worst:
                    worst = cand
    return worst


# ---------------------------------------------------------------------------
# The packer


class _Placed:
    """Disks placed so far, one KD-tree per round."""

    def __init__(self):
        self.rounds: list[tuple[np.ndarray, np.ndarray, np.ndarray, int, cKDTree, float]] = []
        self.total = 0

    def add(self, x, y, r, codes):
        if x.size == 0:
            return
        tree = cKDTree(np.column_stack([x, y]))
        self.rounds.append((x, y, r, codes, tree, float(r.max())))
        self.total += x.size

    def local_lists(self, px, py, reach):
        """Per-cell arrays of every disk whose clearance could matter within ``reach``.

        Returns (cx, cy, cr) padded with far-away dummies, plus the clearance
        of the cell centre against all placed disks.
        """
        n = px.size
        pts = np.column_stack([px, py])
        cols_v, cols_x, cols_y, cols_r = [], [], [], []
        for x, y, r, _, tree, rmax in self.rounds:
            d, l = _knn_complete(tree, pts, x.size, reach + rmax, lambda dd: dd - rmax < reach)
            valid = np.isfinite(d)
            li = np.minimum(l, x.size - 1)
            cols_v.append(np.where(valid, d - r[li], np.inf))
            cols_x.append(np.where(valid, x[li], 1e9))
            cols_y.append(np.where(valid, y[li], 1e9))
            cols_r.append(np.where(valid, r[li], 0.0))
        if not cols_v:
            z = np.zeros((n, 1))
            return z + 1e9, z + 1e9, z, np.full(n, np.inf)
        V = np.concatenate(cols_v, axis=1)
        relevant = V < reach
        width = max(1, int(relevant.sum(axis=1).max()))
        order = np.argsort(V, axis=1, kind="stable")[:, :width]
        keep = np.take_along_axis(V, order, axis=1) < reach
        pick = lambda cols, fill: np.where(keep, np.take_along_axis(np.concatenate(cols, axis=1), order, axis=1), fill)
        return pick(cols_x, 1e9), pick(cols_y, 1e9), pick(cols_r, 0.0), V.min(axis=1)


def _knn_complete(tree, pts, size, bound, still_relevant, k0=8):
    """k-nearest query that widens k for rows where the k-th neighbour may not be the last relevant one."""
    k = min(k0, size)
    dist, loc = tree.query(pts, k=k, distance_upper_bound=bound)
    if k == 1:
        dist, loc = dist[:, None], loc[:, None]
    rows = np.nonzero(np.isfinite(dist[:, -1]) & still_relevant(dist[:, -1]))[0] if k < size else []
    while len(rows):
        k = min(2 * k, size)
        d2, l2 = tree.query(pts[rows], k=k, distance_upper_bound=bound)
        wide_d = np.full((pts.shape[0], k), np.inf)
        wide_l = np.full((pts.shape[0], k), size)
        wide_d[:, :dist.shape[1]] = dist
        wide_l[:, :loc.shape[1]] = loc
        wide_d[rows], wide_l[rows] = d2, l2
        dist, loc = wide_d, wide_l
        if k >= size:
            break
        sub = np.isfinite(d2[:, -1]) & still_relevant(d2[:, -1])
        rows = rows[sub]
    return dist, loc


def _clearance(qx, qy, X, Y, R):
    """Clearance of sample points (n, s) against per-cell disk lists (n, L)."""
    d = np.hypot(qx[:, :, None] - X[:, None, :], qy[:, :, None] - Y[:, None, :]) - R[:, None, :]
    return np.minimum(d.min(axis=2), 1.0 - np.hypot(qx, qy))


def _best_in_cells(px, py, side, X, Y, R, samples=3, iters=5):
    """Largest free disk centred in each square, by grid sampling plus pattern search."""
    half = 0.5 * side
    g = ((np.arange(samples) + 0.5) / samples - 0.5) * side
    ox, oy = np.meshgrid(g, g)
    ox, oy = ox.ravel(), oy.ravel()
    qx = px[:, None] + ox[None, :]
    qy = py[:, None] + oy[None, :]

    def score(qx, qy):
        edge = half - np.maximum(np.abs(qx - px[:, None]), np.abs(qy - py[:, None]))
        return np.minimum(_clearance(qx, qy, X, Y, R), edge)

    f = score(qx, qy)
    j = np.argmax(f, axis=1)
    rows = np.arange(px.size)
    bx, by, bf = qx[rows, j], qy[rows, j], f[rows, j]
    step = side / samples * 0.5
    dirs = np.array([(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)], float)
    for _ in range(iters):
        cx = bx[:, None] + step * dirs[None, :, 0]
        cy = by[:, None] + step * dirs[None, :, 1]
        cf = score(cx, cy)
        j = np.argmax(cf, axis=1)
        better = cf[rows, j] > bf
        bx = np.where(better, cx[rows, j], bx)
        by = np.where(better, cy[rows, j], by)
        bf = np.where(better, cf[rows, j], bf)
        step *= 0.5
    return bx, by, bf


def _mesh_cells(origin: float, side: float) -> np.ndarray:
    """Integer coordinates of all squares of the mesh meeting [-1, 1]^2."""
    lo = int(math.floor((-1.0 - origin) / side))
    hi = int(math.ceil((1.0 - origin) / side))
    ii = np.arange(lo, hi)
    gx, gy = np.meshgrid(ii, ii)
    return np.column_stack([gx.ravel(), gy.ravel()])


def _children(cells: np.ndarray) -> np.ndarray:
    """Squares of the next (half-offset, half-size) mesh overlapping the given squares."""
    shifts = np.array([-1, 0, 1])
    sx, sy = np.meshgrid(shifts, shifts)
    kids = (2 * cells[:, None, :] + np.column_stack([sx.ravel(), sy.ravel()])[None, :, :]).reshape(-1, 2)
    return np.unique(kids, axis=0)


def _freeze_layer(placed: _Placed, rounds, side0: float, bound: float) -> PackingLayer:
    xs = np.concatenate([p[0] for p in placed.rounds])
    ys = np.concatenate([p[1] for p in placed.rounds])
    rs = np.concatenate([p[2] for p in placed.rounds])
    codes = np.concatenate([p[3] for p in placed.rounds])
    keys, inv = np.unique(codes, return_inverse=True)
    # groups sorted by decreasing radius, members in placement order
    group_r = np.array([rs[inv == k][0] for k in range(keys.size)])
    order = np.argsort(-group_r, kind="stable")
    groups = []
    for k in order:
        sel = inv == k
        groups.append((group_r[k], xs[sel] + 1j * ys[sel]))
    return PackingLayer.from_groups(groups, rounds=tuple(rounds), radius_bound=bound)


def pack_schedule(targets: Sequence[float], delta_max: float, radius_ceiling: float,
                  seed: int = 0, *, max_rounds: int = MAX_ROUNDS) -> list[PackingLayer]:
    """Run the mesh packer once and snapshot a layer for each area-deficit target.

    A snapshot is taken at the end of the first round whose coverage reaches
    1 - target; because rounds are deterministic, the layer for a larger
    target is a prefix (in rounds) of the layer for a smaller one.
    """
    del seed  # deterministic algorithm; kept for interface stability
    targets = [float(e) for e in targets]
    for e in targets:
        if not 0 < e < 1:
            raise DomainError(f"target eps must lie in (0, 1), got {e}")
    if not 0 < delta_max < 1 or not 0 < radius_ceiling <= delta_max:
        raise DomainError("need 0 < radius_ceiling <= delta_max < 1")
    side = min(delta_max, 2.0 * radius_ceiling)
    origin = -1.0
    order = np.argsort(-np.asarray(targets), kind="stable")  # largest eps first
    need = [1.0 - targets[i] for i in order]
    result: list[PackingLayer | None] = [None] * len(targets)
    placed = _Placed()
    rounds: list[RoundRecord] = []
    cells = _mesh_cells(origin, side)
    coverage = 0.0
    sq_total = 0.0
    pending = 0
    side0 = side
    for rnd in range(max_rounds):
        if cells.shape[0] > MAX_CELLS:
            raise ResourceError(f"mesh round {rnd} needs {cells.shape[0]} squares; "
                                f"achieved coverage {coverage:.6f}")
        half = 0.5 * side
        hd = half * math.sqrt(2.0)
        px = origin + (cells[:, 0] + 0.5) * side
        py = origin + (cells[:, 1] + 0.5) * side
        X, Y, R, c_disks = placed.local_lists(px, py, hd + half)
        c0 = np.minimum(c_disks, 1.0 - np.hypot(px, py))
        alive = c0 > -hd
        cells, px, py, c0 = cells[alive], px[alive], py[alive], c0[alive]
        X, Y, R = X[alive], Y[alive], R[alive]
        free = c0 >= half
        nx = [px[free]]
        ny = [py[free]]
        nr = [np.full(int(free.sum()), half * (1.0 - SHRINK))]
        nc = [np.full(int(free.sum()), -(rnd + 1), dtype=np.int64)]
        part = ~free & (c0 > -hd)
        if part.any():
            bx, by, bf = _best_in_cells(px[part], py[part], side, X[part], Y[part], R[part])
            ok = bf >= MIN_FRACTION * half
            if ok.any():
                rung = np.ceil(np.log2(half / (bf[ok] * (1.0 - SHRINK))) * LADDER - 1e-9).astype(np.int64)
                rung = np.maximum(rung, 1)
                code = rnd * LADDER + rung
                radius = 0.5 * side0 * np.exp2(-code / LADDER)
                nx.append(bx[ok])
                ny.append(by[ok])
                nr.append(radius)
                nc.append(code)
        x = np.concatenate(nx)
        y = np.concatenate(ny)
        r = np.concatenate(nr)
        codes = np.concatenate(nc)
        if x.size == 0 and rnd == 0:
            raise ProgressError("radius ceiling too small: the first mesh places no disk")
        placed.add(x, y, r, codes)
        sq_total += math.fsum((r * r).tolist())
        coverage = sq_total
        rounds.append(RoundRecord(side=side, placed=int(x.size), coverage=coverage))
        while pending < len(need) and coverage >= need[pending]:
            result[order[pending]] = _freeze_layer(placed, rounds, side0, radius_ceiling)
            pending += 1
        if pending == len(need):
            return result
        # next mesh: half size, shifted by half a (new) square
        cells = _children(cells)
        side *= 0.5
        origin += 0.5 * side
        if cells.shape[0] == 0:
            break
    raise ResourceError(f"round cap {max_rounds} reached; achieved coverage {coverage:.6f}")


def pack_equal(target_eps: float, delta_max: float, radius_ceiling: float, *,
               max_disks: int = 4_000_000) -> PackingLayer:
    """Single-radius layer: one mesh round of fully free squares, refined until the target is met.

    Each kept square has its closure inside the unit disk and receives the
    inscribed disk shrunk by a factor 1 - 1e-6.  Every disk has the same
    radius, so the layer has exactly one group.
    """
    if not 0 < target_eps < 1:
        raise DomainError("target eps must lie in (0, 1)")
    if not 0 < delta_max < 1 or not 0 < radius_ceiling <= delta_max:
        raise DomainError("need 0 < radius_ceiling <= delta_max < 1")
    side = min(delta_max, 2.0 * radius_ceiling)
    rounds = []
    while True:
        cells = _mesh_cells(-1.0, side)
        lo = -1.0 + cells * side
        far = np.maximum(np.abs(lo), np.abs(lo + side))
        keep = np.hypot(far[:, 0], far[:, 1]) < 1.0
        n = int(keep.sum())
        if n > max_disks:
            raise ResourceError(f"equal-radius layer needs more than {max_disks} disks; "
                                f"best coverage {rounds[-1].coverage if rounds else 0.0:.6f}")
        R = 0.5 * side * (1.0 - SHRINK)
        cov = n * R * R
        rounds.append(RoundRecord(side=side, placed=n, coverage=cov))
        if n and cov >= 1.0 - target_eps:
            c = lo[keep] + 0.5 * side
            return PackingLayer.from_groups([(R, c[:, 0] + 1j * c[:, 1])],
                                            rounds=tuple(rounds), radius_bound=radius_ceiling)
        if cov > 0 and 1.0 - target_eps > math.pi / 4:
            raise ProgressError(f"equal-radius layers cover less than pi/4; target {1 - target_eps} unreachable")
        side *= 0.5


def pack_disk(target_eps: float, delta_max: float, radius_ceiling: float, seed: int = 0, *,
              single_radius: bool = False, exact: bool = False) -> PackingLayer:
    """One construction layer with area deficit at most ``target_eps``.

    ``exact`` rescales the finished layer about the origin so that the
    deficit equals the target (the scaling keeps every invariant).
    ``single_radius`` restricts the layer to one group.
    """
    if single_radius:
        layer = pack_equal(target_eps, delta_max, radius_ceiling)
    else:
        layer = pack_schedule([target_eps], delta_max, radius_ceiling, seed)[0]
    if exact:
        layer = shrink_to(layer, target_eps)
    return layer


def shrink_to(layer: PackingLayer, target_eps: float) -> PackingLayer:
    cov = layer.coverage
    want = 1.0 - target_eps
    if want > cov * (1 + 1e-15):
        raise DomainError("cannot enlarge a layer")
    lam = math.sqrt(want / cov)
    out = layer.scaled(lam)
    return PackingLayer(radii=out.radii, counts=out.counts, centers=out.centers, eps=out.eps,
                        rounds=layer.rounds, radius_bound=layer.radius_bound)


def uncovered_fraction_mc(layer_or_disks, n_points: int = 1_000_000, seed: int = 0) -> float:
    """Monte Carlo estimate of the uncovered fraction of the unit disk."""
    from .rng import SplitMix64

    if isinstance(layer_or_disks, PackingLayer):
        index = layer_or_disks.disk_index()
    else:
        z, r = layer_or_disks
        index = DiskIndex(z, r)
    w = SplitMix64(seed).disk(n_points)
    hit = index.locate(w) >= 0
    return float(1.0 - hit.mean())
