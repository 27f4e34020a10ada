"""The generation maps g_k, their composition phi_N, and distortion checks.

A source block and the corresponding target block share local coordinates:
the cores of the radial stretches carry source sub-frames exactly onto target
sub-frames.  phi_N is therefore evaluated by walking down the source frames
with one local coordinate w, stopping at the first level where w lies in an
annulus or outside every stretch disk, and mapping back through the target
similarities.  Points can start the walk inside any source frame, which keeps
finite differences accurate at scales far below machine epsilon of the plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._util import chunks, ordered_map
from .construction import ConstructionTree
from .errors import DegenerateError, DomainError
from .rng import SplitMix64


@dataclass(frozen=True)
class RadialStretchSpec:
    center: complex
    outer_log_radius: float
    sigma: float
    K: float

    def __post_init__(self):
        if not 0 < self.sigma < 1:
            raise DomainError("sigma must lie in (0, 1)")
        if self.K < 1:
            raise DomainError("K must be >= 1")

    @property
    def radius(self) -> float:
        return math.exp(self.outer_log_radius)


def _stretch_local(x: np.ndarray, log_R, log_core, sigma, K):
    """Stretch of offsets x from the centre; returns new offsets.

    Outside radius R: identity.  Between the core radius sigma^K R and R:
    |x/R|^{1/K - 1} x.  Inside the core: sigma^{1-K} x.
    """
    r = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.log(r)
        ann = np.exp((1.0 / K - 1.0) * (lr - log_R)) * x
    inner = np.exp((1.0 - K) * np.log(sigma)) * x
    return np.where(lr > log_R, x, np.where(lr >= log_core, ann, inner))


def radial_stretch(spec: RadialStretchSpec, z):
    z = np.asarray(z, dtype=complex)
    x = z - spec.center
    log_core = spec.K * math.log(spec.sigma) + spec.outer_log_radius
    y = _stretch_local(x, spec.outer_log_radius, log_core, spec.sigma, spec.K)
    out = np.where(np.abs(x) > spec.radius, z, spec.center + y)
    return complex(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------


def _phi_local(tree: ConstructionTree, N: int, w: np.ndarray, start: np.ndarray) -> np.ndarray:
    """phi_N in local coordinates.

    Point p starts in a source frame at generation start[p] with local
    coordinate w[p]; the result is expressed in the matching target frame.
    """
    K = tree.K
    w = w.astype(complex).copy()
    out = np.empty_like(w)
    c = np.zeros_like(w)
    s = np.ones(w.shape)
    active = np.ones(w.shape, dtype=bool)
    for k in range(1, N + 1):
        sel = np.nonzero(active & (start < k))[0]
        if sel.size == 0:
            continue
        centers, R, _, src = tree.level_arrays(k, "source")
        _, _, _, tgt = tree.level_arrays(k, "target")
        q = tree.tilde_index(k).locate(w[sel])
        miss = q < 0
        done = sel[miss]
        out[done] = c[done] + s[done] * w[done]
        active[done] = False
        hit = sel[~miss]
        qh = q[~miss]
        x = w[hit] - centers[qh]
        r = np.abs(x)
        logR = np.log(R[qh])
        ann = r >= src[qh]
        a_idx = hit[ann]
        y = centers[qh[ann]] + np.exp((1.0 / K - 1.0) * (np.log(r[ann]) - logR[ann])) * x[ann]
        out[a_idx] = c[a_idx] + s[a_idx] * y
        active[a_idx] = False
        core = hit[~ann]
        qc = qh[~ann]
        w[core] = x[~ann] / src[qc]
        c[core] = c[core] + s[core] * centers[qc]
        s[core] = s[core] * tgt[qc]
    rest = np.nonzero(active)[0]
    out[rest] = c[rest] + s[rest] * w[rest]
    return out


def phi_eval(tree: ConstructionTree, N: int, z):
    """phi_N(z) = g_N(...g_1(z)...) for a point or an array of points."""
    if not 0 <= N <= tree.depth:
        raise DomainError(f"N must lie in 0..{tree.depth}")
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    out = _phi_local(tree, N, arr, np.zeros(arr.shape, dtype=int))
    return complex(out[0]) if np.ndim(z) == 0 else out


def frame_flats(tree: ConstructionTree, path) -> list[int]:
    return [tree.flat_index(k, int(j), int(i)) for k, (j, i) in enumerate(path, 1)]


def phi_eval_framed(tree: ConstructionTree, N: int, path, w):
    """phi_N of the point with local coordinate w in the source frame of ``path``.

    The result is the local coordinate in the target frame of the same path;
    it is exact to rounding in w regardless of how small the frame is.  The
    frame's own disk must contain w, or w may lie anywhere when path is empty.
    """
    path = tuple(path)
    if len(path) > N:
        raise DomainError("path deeper than N")
    frame_flats(tree, path)
    arr = np.atleast_1d(np.asarray(w, dtype=complex))
    if path and np.any(np.abs(arr) >= 1):
        raise DomainError("framed points must lie inside the frame disk")
    out = _phi_local(tree, N, arr, np.full(arr.shape, len(path)))
    return complex(out[0]) if np.ndim(w) == 0 else out


def phi_eval_anchored(tree: ConstructionTree, N: int, path, flat, x):
    """phi_N of the point centre + x, where centre is disk ``flat`` of the level below ``path``.

    ``path`` is the parent frame (as in phi_eval_framed), ``flat`` indexes the
    stretch disks of the next level and ``x`` the offsets from their centres,
    in parent-frame units.  The image is returned as its offset from the same
    centre in the target parent frame, so no precision is lost to the centre.
    """
    path = tuple(path)
    k = len(path) + 1
    if k > N:
        raise DomainError("path deeper than N - 1")
    frame_flats(tree, path)
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    flat = np.broadcast_to(np.asarray(flat, dtype=int), x.shape)
    _, R, _, src = tree.level_arrays(k, "source")
    _, _, _, tgt = tree.level_arrays(k, "target")
    r = np.abs(x)
    if np.any(r > R[flat]):
        raise DomainError("anchored offsets must lie inside the stretch disk")
    out = np.empty_like(x)
    ann = r >= src[flat]
    out[ann] = np.exp((1.0 / tree.K - 1.0) * (np.log(r[ann]) - np.log(R[flat[ann]]))) * x[ann]
    core = ~ann
    if np.any(core):
        wl = x[core] / src[flat[core]]
        out[core] = tgt[flat[core]] * _phi_local(tree, N, wl, np.full(wl.shape, k))
    return out


def apply_generation(tree: ConstructionTree, k: int, z):
    """g_k alone: locate the target generation-(k-1) block, then its stretch disks."""
    if not 1 <= k <= tree.depth:
        raise DomainError(f"k must lie in 1..{tree.depth}")
    z = np.asarray(z, dtype=complex)
    arr = np.atleast_1d(z).copy()
    out = arr.copy()
    w = arr.copy()
    c = np.zeros_like(arr)
    s = np.ones(arr.shape)
    alive = np.ones(arr.shape, dtype=bool)
    for m in range(1, k):
        sel = np.nonzero(alive)[0]
        centers, R, _, tgt = tree.level_arrays(m, "target")
        q = tree.tilde_index(m).locate(w[sel])
        ok = q >= 0
        x = np.where(ok, w[sel] - centers[np.maximum(q, 0)], 0)
        inside = ok & (np.abs(x) < tgt[np.maximum(q, 0)])
        alive[sel[~inside]] = False
        idx = sel[inside]
        qq = q[inside]
        w[idx] = x[inside] / tgt[qq]
        c[idx] = c[idx] + s[idx] * centers[qq]
        s[idx] = s[idx] * tgt[qq]
    sel = np.nonzero(alive)[0]
    if sel.size:
        centers, R, _, src = tree.level_arrays(k, "source")
        q = tree.tilde_index(k).locate(w[sel])
        hit = q >= 0
        idx = sel[hit]
        qq = q[hit]
        x = w[idx] - centers[qq]
        lv = tree.levels[k - 1]
        sig = np.repeat(lv.sigmas, lv.counts)[qq]
        y = _stretch_local(x, np.log(R[qq]), np.log(src[qq]), sig, tree.K)
        out[idx] = c[idx] + s[idx] * (centers[qq] + y)
    return complex(out[0]) if z.ndim == 0 else out


def compose_generations(tree: ConstructionTree, N: int, z):
    """g_N o ... o g_1 applied step by step (the slow, literal route)."""
    out = np.asarray(z, dtype=complex)
    for k in range(1, N + 1):
        out = apply_generation(tree, k, out)
    return out


# ---------------------------------------------------------------------------
# Distortion


def beltrami_fd(f: Callable, z, h) -> np.ndarray:
    """mu = dbar f / d f from central differences with step h (vectorized)."""
    z = np.asarray(z, dtype=complex)
    h = np.broadcast_to(np.asarray(h, dtype=float), z.shape)
    if np.any(h <= 0):
        raise DomainError("step must be positive")
    fx = (np.asarray(f(z + h)) - np.asarray(f(z - h))) / (4 * h)
    fy = (np.asarray(f(z + 1j * h)) - np.asarray(f(z - 1j * h))) / (4j * h)
    dz = fx + fy
    dzb = fx - fy
    if np.any(np.abs(dz) < 1e-14):
        raise DegenerateError("|df/dz| below 1e-14")
    mu = dzb / dz
    return complex(mu) if mu.ndim == 0 else mu


@dataclass
class _Located:
    start: np.ndarray      # generation of the deepest source core containing the point
    w: np.ndarray          # local coordinate in that frame
    step: np.ndarray       # finite-difference step in local units
    clearance: np.ndarray  # distance to the nearest interface circle, local units
    piece: np.ndarray      # 0 outside every disk, 1 annulus, 2 inside the deepest core


def _locate_source(tree: ConstructionTree, N: int, z: np.ndarray, rel_step: float) -> _Located:
    n = z.size
    w = z.astype(complex).copy()
    start = np.zeros(n, dtype=int)
    step = np.full(n, rel_step)
    clear = np.full(n, np.inf)
    piece = np.zeros(n, dtype=int)
    active = np.ones(n, dtype=bool)
    for k in range(1, N + 1):
        sel = np.nonzero(active)[0]
        if sel.size == 0:
            break
        centers, R, _, src = tree.level_arrays(k, "source")
        if k > 1:
            clear[sel] = np.minimum(clear[sel], 1.0 - np.abs(w[sel]))
        q = tree.tilde_index(k).locate(w[sel])
        miss = q < 0
        m_idx = sel[miss]
        if m_idx.size:
            clear[m_idx] = np.minimum(clear[m_idx], tree.tilde_index(k).boundary_distance(w[m_idx], 1.0))
            active[m_idx] = False
        hit = sel[~miss]
        qh = q[~miss]
        x = w[hit] - centers[qh]
        r = np.abs(x)
        dist = np.minimum(np.abs(r - R[qh]), np.abs(r - src[qh]))
        ann = r >= src[qh]
        a_idx = hit[ann]
        clear[a_idx] = np.minimum(clear[a_idx], dist[ann])
        step[a_idx] = rel_step * R[qh[ann]]
        piece[a_idx] = 1
        active[a_idx] = False
        core = hit[~ann]
        qc = qh[~ann]
        # the point enters the source frame of this core; rescale all local data
        clear[core] = np.minimum(clear[core], dist[~ann]) / src[qc]
        w[core] = x[~ann] / src[qc]
        start[core] = k
        step[core] = rel_step
        piece[core] = 2
    return _Located(start=start, w=w, step=step, clearance=clear, piece=piece)


def distortion_report(tree: ConstructionTree, N: int, sample_count: int = 10_000, seed: int = 0,
                      *, rel_step: float = 1e-6, exclusion: float = 10.0, tol: float = 1e-3,
                      chunk: int = 2048) -> dict:
    """Sample |mu| of phi_N at uniform points of the disk of radius 2.

    Points within ``exclusion`` steps of any interface circle are skipped.
    Finite differences are taken in the deepest source frame containing the
    point, with step ``rel_step`` times the local disk radius.
    """
    if sample_count < 1:
        raise DomainError("sample_count must be >= 1")
    if not 0 <= N <= tree.depth:
        raise DomainError(f"N must lie in 0..{tree.depth}")
    z = SplitMix64(seed).disk(sample_count, 2.0)
    bound = (tree.K - 1.0) / (tree.K + 1.0) + tol

    def work(sl: slice):
        loc = _locate_source(tree, N, z[sl], rel_step)
        keep = loc.clearance > exclusion * loc.step
        idx = np.nonzero(keep)[0]
        mu = np.zeros(idx.size, dtype=complex)
        if idx.size:
            st = loc.start[idx]
            f = lambda pts: _phi_local(tree, N, pts, st)
            mu = beltrami_fd(f, loc.w[idx], loc.step[idx])
        return idx + sl.start, np.abs(mu), loc.piece[idx]

    parts = ordered_map(work, list(chunks(sample_count, chunk)))
    idx = np.concatenate([p[0] for p in parts])
    amu = np.concatenate([p[1] for p in parts])
    piece = np.concatenate([p[2] for p in parts])
    viol = np.nonzero(amu > bound)[0]
    qs = (0.5, 0.9, 0.99, 1.0)
    report = {
        "N": N,
        "K": tree.K,
        "samples": sample_count,
        "used": int(idx.size),
        "excluded": int(sample_count - idx.size),
        "max_mu": float(amu.max()) if amu.size else 0.0,
        "max_mu_annulus": float(amu[piece == 1].max()) if np.any(piece == 1) else 0.0,
        "max_mu_elsewhere": float(amu[piece != 1].max()) if np.any(piece != 1) else 0.0,
        "quantiles": {str(q): float(np.quantile(amu, q)) for q in qs} if amu.size else {},
        "bound": bound,
        "violations": [{"x": float(z[idx[i]].real), "y": float(z[idx[i]].imag), "mu": float(amu[i])}
                       for i in viol[:100]],
        "pass": bool(viol.size == 0),
    }
    return report


def transport_check(tree: ConstructionTree, k: int, N: int, samples: int = 1000, seed: int = 0) -> dict:
    """Map sampled boundary points of source generation-k blocks through phi_N.

    Each point sits on the circle of a random generation-k source block and is
    anchored at that block's centre; its image must lie on the circle of the
    matching target block.  Returns the worst relative radius error.
    """
    if not 1 <= k <= N <= tree.depth:
        raise DomainError("need 1 <= k <= N <= depth")
    rng = SplitMix64(seed)
    paths = [rng.spawn(lvl).integers(samples, tree.levels[lvl - 1].layer.n_disks) for lvl in range(1, k + 1)]
    theta = rng.spawn(0).uniform(samples, 0.0, 2 * math.pi)
    _, _, _, src = tree.level_arrays(k, "source")
    _, _, _, tgt = tree.level_arrays(k, "target")
    q = paths[-1]
    x = src[q] * np.exp(1j * theta)
    parents = np.stack(paths[:-1], axis=1) if k > 1 else np.zeros((samples, 0), dtype=int)
    keys, inv = np.unique(parents, axis=0, return_inverse=True)
    inv = np.asarray(inv).ravel()
    worst = 0.0
    for g in range(keys.shape[0]):
        sel = np.nonzero(inv == g)[0]
        path = tuple(tree.group_of(lvl + 1, int(f)) for lvl, f in enumerate(keys[g]))
        img = phi_eval_anchored(tree, N, path, q[sel], x[sel])
        worst = max(worst, float(np.max(np.abs(np.abs(img) / tgt[q[sel]] - 1.0))))
    return {"k": k, "N": N, "samples": samples, "max_radius_error": worst}
