"""Gluing countably many scaled copies of the construction into a row of squares.

Q_k is the square of side 2^-k with lower-left corner (1 - 2^-(k-1), 0).
Inside Q_k sit N_k dyadic squares S_{k,n} of side 2^-c with
eps_k lam_n < 2^-c <= 2 eps_k lam_n, where lam_n = 1 / (sqrt(n) log(n + 2)).
Each S_{k,n} receives a copy of the unit-disk construction scaled by
eps_k lam_n / 2.  The squares only accumulate at (1, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AreaError, DomainError, FormatError, RangeError, ResourceError

GLUE_VERSION = "qc-cantor-glue/1"
TAIL_START = 1_000_000
MAX_COPIES = 10_000_000
AREA_FRACTION = 1e-3


def lam(n):
    """1 / (sqrt(n) log(n + 2)), elementwise for n >= 1."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 1):
        raise DomainError("lam is defined for n >= 1")
    out = 1.0 / (np.sqrt(n) * np.log(n + 2.0))
    return float(out) if out.ndim == 0 else out


def _f(x):
    return 1.0 / (x * math.log(x + 2.0) ** 2)


def _df(x):
    L = math.log(x + 2.0)
    return -1.0 / (x * x * L * L) - 2.0 / (x * (x + 2.0) * L ** 3)


def _tail_integral(M: float) -> float:
    """Integral of 1/(x log^2(x+2)) over [M, inf), via u = log x.

    The integrand becomes 1/(u + delta)^2 with delta = log(1 + 2 e^-u); the
    1/u part integrates to 1/U and the small correction is done by quadrature.
    """
    from scipy.integrate import quad

    U = math.log(M)

    def corr(u):
        delta = math.log1p(2.0 * math.exp(-u))
        return (2 * u * delta + delta * delta) / (u * u * (u + delta) ** 2)

    c, _ = quad(corr, U, U + 60.0, epsabs=1e-16, epsrel=1e-13, limit=200)
    return 1.0 / U - c


@dataclass(frozen=True)
class SquareSum:
    partial: float       # sum for n <= M
    tail: float          # Euler-Maclaurin estimate for n > M
    error_bound: float   # bound on |estimate - true value|
    M: int

    @property
    def value(self) -> float:
        return self.partial + self.tail

    @property
    def upper(self) -> float:
        return self.value + self.error_bound


@lru_cache(maxsize=4)
def lam_square_sum(M: int = TAIL_START) -> SquareSum:
    """sum_n lam_n^2 as a partial sum plus an Euler-Maclaurin tail with explicit error bound."""
    n = np.arange(1, M + 1, dtype=float)
    partial = math.fsum((lam(n) ** 2).tolist())
    # sum_{n>M} f(n) = int_M^inf f - f(M)/2 - f'(M)/12 + R, with |R| below the next term scale
    tail = _tail_integral(M) - 0.5 * _f(M) - _df(M) / 12.0
    # next correction is f'''(M)/720 with |f'''| <= 6 f(M) / M^3 * 4 for these x
    rem = 24.0 * _f(M) / M ** 3 / 720.0
    rounding = 4 * 2.0 ** -53 * partial  # one rounding per term plus the correctly rounded fsum
    return SquareSum(partial=partial, tail=tail, error_bound=rem + rounding + 1e-12, M=M)


def bracket_exponent(x):
    """The integer c with x < 2^-c <= 2x (via the binary exponent; exact)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(xs > 0)) or np.any(~np.isfinite(xs)):
        raise DomainError("bracket needs finite positive values")
    _, e = np.frexp(xs)
    c = -e.astype(np.int64)
    return int(c[0]) if np.ndim(x) == 0 else c


def bracket_holds(x, c) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    p = np.ldexp(1.0, -np.asarray(c, dtype=np.int64))
    return (x < p) & (p <= 2 * x)


# ---------------------------------------------------------------------------
# Dyadic placement


def _spread(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64) & np.uint64(0xFFFFFFFF)
    for shift, mask in ((16, 0x0000FFFF0000FFFF), (8, 0x00FF00FF00FF00FF), (4, 0x0F0F0F0F0F0F0F0F),
                        (2, 0x3333333333333333), (1, 0x5555555555555555)):
        v = (v | (v << np.uint64(shift))) & np.uint64(mask)
    return v


def _compact(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64) & np.uint64(0x5555555555555555)
    for shift, mask in ((1, 0x3333333333333333), (2, 0x0F0F0F0F0F0F0F0F), (4, 0x00FF00FF00FF00FF),
                        (8, 0x0000FFFF0000FFFF), (16, 0x00000000FFFFFFFF)):
        v = (v | (v >> np.uint64(shift))) & np.uint64(mask)
    return v


def morton_encode(ix, iy) -> np.ndarray:
    return _spread(np.asarray(ix)) | (_spread(np.asarray(iy)) << np.uint64(1))


def morton_decode(code):
    code = np.asarray(code, dtype=np.uint64)
    return _compact(code).astype(np.int64), _compact(code >> np.uint64(1)).astype(np.int64)


@dataclass(frozen=True)
class Placement:
    """Dyadic squares inside a parent of side 2^-p: square i has side 2^-c[i] and
    integer position (ix[i], iy[i]) in units of its own side, relative to the parent."""

    parent: int
    c: np.ndarray
    ix: np.ndarray
    iy: np.ndarray

    def __len__(self) -> int:
        return int(self.c.size)


def dyadic_place(square_side_log2: int, demands) -> Placement:
    """Place one dyadic square per demand exponent c inside a square of side 2^-p.

    Largest squares go first; within a subdivision the children are taken in
    row-major order (bottom row left to right, then the next row), which is
    the same as walking the Z-order curve.  Demands keep their input order in
    the result.
    """
    p = int(square_side_log2)
    c = np.asarray(demands, dtype=np.int64).ravel()
    if c.size == 0:
        return Placement(p, c, c.copy(), c.copy())
    if np.any(c < p):
        raise AreaError("a demand is larger than the parent square")
    depth = int(c.max()) - p
    if depth > 31:
        raise ResourceError("placement depth exceeds 31 dyadic levels")
    order = np.argsort(c, kind="stable")
    cs = c[order]
    size = np.left_shift(np.uint64(1), (2 * (depth - (cs - p))).astype(np.uint64))
    start = np.concatenate([[np.uint64(0)], np.cumsum(size, dtype=np.uint64)[:-1]])
    total = int(start[-1]) + int(size[-1])
    if total > 4 ** depth:
        raise AreaError(f"demands need area {total} / {4 ** depth} of the parent")
    code = start >> (2 * (depth - (cs - p))).astype(np.uint64)
    ix, iy = morton_decode(code)
    out_x = np.empty_like(ix)
    out_y = np.empty_like(iy)
    out_x[order] = ix
    out_y[order] = iy
    return Placement(p, c, out_x, out_y)


def dyadic_disjoint(pl: Placement) -> bool:
    """Exact check that no two squares overlap (they are dyadic: nested or disjoint)."""
    if len(pl) < 2:
        return True
    depth = int(pl.c.max()) - pl.parent
    if np.any(pl.ix < 0) or np.any(pl.iy < 0):
        return False
    lim = np.left_shift(np.int64(1), pl.c - pl.parent)
    if np.any(pl.ix >= lim) or np.any(pl.iy >= lim):
        return False
    sh = (2 * (depth - (pl.c - pl.parent))).astype(np.uint64)
    lo = morton_encode(pl.ix, pl.iy) << sh
    hi = lo + (np.uint64(1) << sh)
    o = np.argsort(lo, kind="stable")
    return bool(np.all(lo[o][1:] >= hi[o][:-1]))


# ---------------------------------------------------------------------------
# Plans


@dataclass(frozen=True)
class GlueLevel:
    k: int
    eps_log2: int          # eps_k = 2^eps_log2
    n_copies: int
    placement: Placement

    @property
    def eps(self) -> float:
        return math.ldexp(1.0, self.eps_log2)

    def scales(self) -> np.ndarray:
        """eps_k lam_n for n = 1..N_k (copies are scaled by half of this)."""
        return self.eps * lam(np.arange(1, self.n_copies + 1))

    def square_corners(self) -> np.ndarray:
        """Absolute lower-left corners of the S_{k,n} as complex numbers."""
        x0 = 1.0 - math.ldexp(1.0, -(self.k - 1))
        side = np.ldexp(1.0, -self.placement.c)
        return (x0 + self.placement.ix * side) + 1j * (self.placement.iy * side)


@dataclass(frozen=True)
class GluePlan:
    K: float
    d: float
    d_prime: float
    levels: tuple
    lam_sq_upper: float

    @property
    def k_max(self) -> int:
        return len(self.levels)

    def to_json(self) -> dict:
        return {
            "version": GLUE_VERSION, "K": self.K, "d": self.d, "d_prime": self.d_prime,
            "lam_sq_upper": self.lam_sq_upper,
            "levels": [{"k": lv.k, "eps_log2": lv.eps_log2, "N": lv.n_copies,
                        "c": lv.placement.c.tolist(), "ix": lv.placement.ix.tolist(),
                        "iy": lv.placement.iy.tolist()} for lv in self.levels],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GluePlan":
        if data.get("version") != GLUE_VERSION:
            raise FormatError(f"unsupported glue plan version {data.get('version')!r}")
        try:
            levels = tuple(
                GlueLevel(k=int(lv["k"]), eps_log2=int(lv["eps_log2"]), n_copies=int(lv["N"]),
                          placement=Placement(int(lv["k"]), np.asarray(lv["c"], dtype=np.int64),
                                              np.asarray(lv["ix"], dtype=np.int64),
                                              np.asarray(lv["iy"], dtype=np.int64)))
                for lv in data["levels"])
            return cls(K=float(data["K"]), d=float(data["d"]), d_prime=float(data["d_prime"]),
                       levels=levels, lam_sq_upper=float(data["lam_sq_upper"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed glue plan: {exc}") from exc


def _eps_log2(k: int, s2_upper: float) -> int:
    """Largest e with (2^e)^2 * s2_upper < AREA_FRACTION * 4^-k."""
    e = int(math.floor(0.5 * math.log2(AREA_FRACTION / s2_upper))) - k + 1
    while math.ldexp(1.0, 2 * e) * s2_upper >= AREA_FRACTION * math.ldexp(1.0, -2 * k):
        e -= 1
    return e


def _copies_needed(eps: float, d_prime: float, cap: int) -> int | None:
    """Least N with sum_{n<=N} (eps lam_n)^{d'} > 1, or None past cap."""
    done = 0
    acc = 0.0
    block = 1 << 16
    while done < cap:
        n = np.arange(done + 1, min(done + block, cap) + 1, dtype=float)
        v = (eps * lam(n)) ** d_prime
        cs = acc + np.cumsum(v)
        hit = np.nonzero(cs > 1.0)[0]
        if hit.size:
            N = done + int(hit[0]) + 1
            # confirm with a compensated sum; step forward if rounding fooled cumsum
            while math.fsum(((eps * lam(np.arange(1, N + 1, dtype=float))) ** d_prime).tolist()) <= 1.0:
                N += 1
            return N
        acc = float(cs[-1])
        done += n.size
        block *= 2
    return None


def glue_plan(K: float, d: float, k_max: int, max_copies: int = MAX_COPIES) -> GluePlan:
    from .gauge import conjugate_dimension

    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    if not 0 < d < 2:
        raise DomainError("d must lie in (0, 2)")
    dp = conjugate_dimension(K, d)
    s2 = lam_square_sum().upper
    levels = []
    for k in range(1, k_max + 1):
        e = _eps_log2(k, s2)
        eps = math.ldexp(1.0, e)
        N = _copies_needed(eps, dp, max_copies)
        if N is None:
            raise RangeError(f"Q_{k} needs more than {max_copies} copies", max_feasible=k - 1)
        x = eps * lam(np.arange(1, N + 1, dtype=float))
        pl = dyadic_place(k, bracket_exponent(x))
        levels.append(GlueLevel(k=k, eps_log2=e, n_copies=N, placement=pl))
    return GluePlan(K=float(K), d=float(d), d_prime=dp, levels=tuple(levels), lam_sq_upper=s2)


def verify_glue(plan: GluePlan, tree=None, certificates: dict | None = None) -> dict:
    """Check every plan invariant; with certificates also per-square contributions.

    ``certificates`` maps side -> log lower certificate of one unit copy (as
    from measure.lower_bound_certificate); the tree, if given, must match the
    plan's exponents.
    """
    from .gauge import conjugate_dimension

    problems = []
    if tree is not None:
        if abs(tree.K - plan.K) > 1e-12 or abs(tree.d - plan.d) > 1e-12:
            raise DomainError("tree and plan disagree on K or d")
    if abs(conjugate_dimension(plan.K, plan.d) - plan.d_prime) > 1e-15:
        problems.append("d' does not match K and d")
    per_k = []
    total_area = 0.0
    for lv in plan.levels:
        x = lv.scales()
        pl = lv.placement
        n = np.arange(1, lv.n_copies + 1, dtype=float)
        lam_ok = bool(np.array_equal(lam(n), 1.0 / (np.sqrt(n) * np.log(n + 2.0))))
        bracket_ok = bool(np.all(bracket_holds(x, pl.c)))
        area_partial = math.fsum((x * x).tolist())
        area_bound = AREA_FRACTION * math.ldexp(1.0, -2 * lv.k)
        area_ok = lv.eps ** 2 * plan.lam_sq_upper < area_bound and area_partial < area_bound
        tsum = math.fsum((x ** plan.d_prime).tolist())
        ssum = math.fsum((x ** plan.d).tolist())
        disjoint = dyadic_disjoint(pl)
        corners = lv.square_corners()
        side = np.ldexp(1.0, -pl.c)
        far = np.abs(corners + side * (1 + 1j) - 1.0)
        dist = float(np.max(np.maximum(np.abs(corners - 1.0), far)))
        copy_area = math.fsum((math.pi * (x / 2) ** 2).tolist())
        total_area += copy_area
        row = {"k": lv.k, "eps_log2": lv.eps_log2, "N": lv.n_copies, "lam_exact": lam_ok,
               "bracket": bracket_ok, "area_sum": area_partial, "area_bound": area_bound, "area_ok": bool(area_ok),
               "target_sum": tsum, "target_ok": tsum > 1.0, "source_sum": ssum,
               "source_ge_target": bool(ssum > tsum if plan.d < plan.d_prime else ssum == tsum),
               "disjoint": disjoint, "max_dist_to_corner_point": dist,
               "dist_bound": math.sqrt(5.0) * math.ldexp(1.0, -lv.k), "copy_area": copy_area}
        row["compact_ok"] = dist <= row["dist_bound"] * (1 + 1e-15)
        if certificates:
            floor = {}
            for sd, cert in certificates.items():
                expo = plan.d_prime if sd == "target" else plan.d
                contrib = math.fsum(((x / 2) ** expo).tolist()) * math.exp(cert)
                row[f"{sd}_contribution"] = contrib
                floor[sd] = 2.0 ** -expo * math.exp(cert)
                row[f"{sd}_contribution_ok"] = contrib >= floor[sd]
        for key in ("lam_exact", "bracket", "area_ok", "target_ok", "source_ge_target", "disjoint", "compact_ok",
                    "target_contribution_ok", "source_contribution_ok"):
            if key in row and not row[key]:
                problems.append(f"k={lv.k}: {key} failed")
        per_k.append(row)
    dists = [r["max_dist_to_corner_point"] for r in per_k]
    if any(b >= a for a, b in zip(dists, dists[1:])):
        problems.append("squares do not approach (1, 0)")
    area_cap = sum(AREA_FRACTION * 4.0 ** -lv.k for lv in plan.levels)
    return {"ok": not problems, "problems": problems, "per_k": per_k, "total_copy_area": total_area,
            "total_area_cap": area_cap}
