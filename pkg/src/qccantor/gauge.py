"""Gauge functions h(t) = t^d * eps(t), evaluated in the log domain.

All inputs and outputs are logarithms: radii at depth three or four already
sit near the bottom of double precision, while their logs are harmless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (BracketError, ConvergenceError, DomainError, PreconditionError,
                     ResolutionError, UnsupportedError, FormatError)

EPS_KINDS = ("unit", "log_power", "inv_log_power", "tabulated")

BISECTION_TOL = 1e-14
BISECTION_CAP = 200
ORDER_THRESHOLD = 1e-6


@dataclass(frozen=True)
class GaugeSpec:
    """h(t) = t^d * exp(log_scale) * eps(t) for 0 < t < t_cutoff.

    ``unit`` gauges are pure powers and are accepted for every t > 0; the
    cutoff only restricts the logarithmic and tabulated factors.  Tables are
    stored as ``(log_t, log_eps)`` tuples and interpolated linearly in those
    coordinates, extrapolating the end segments.
    """

    d: float
    eps_kind: str = "unit"
    beta: float = 0.0
    t_cutoff: float = 1.0
    log_scale: float = 0.0
    table: tuple[tuple[float, ...], tuple[float, ...]] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.eps_kind not in EPS_KINDS:
            raise DomainError(f"unknown eps_kind {self.eps_kind!r}")
        if not (0.0 < self.d < 2.0) or not math.isfinite(self.d):
            raise DomainError(f"exponent d must lie in (0, 2), got {self.d}")
        if not (0.0 < self.t_cutoff <= 1.0):
            raise DomainError(f"t_cutoff must lie in (0, 1], got {self.t_cutoff}")
        if self.eps_kind in ("log_power", "inv_log_power"):
            if not self.beta > 0:
                raise DomainError("logarithmic gauges need beta > 0")
            if self.t_cutoff >= 1.0:
                raise DomainError("logarithmic gauges need t_cutoff < 1")
        if self.eps_kind == "tabulated":
            if self.table is None:
                raise DomainError("tabulated gauge without a table")
            lt, le = (np.asarray(a, dtype=float) for a in self.table)
            if lt.ndim != 1 or lt.shape != le.shape or lt.size < 2:
                raise DomainError("table needs two equal-length columns with at least 2 rows")
            if not (np.all(np.isfinite(lt)) and np.all(np.isfinite(le))):
                raise DomainError("table entries must be finite")
            if np.any(np.diff(lt) <= 0):
                raise DomainError("table log_t column must be strictly increasing")

    # convenience wrappers
    def eval_log(self, log_t):
        return eval_log(self, log_t)

    def log_eps(self, log_t):
        return log_eps(self, log_t)

    @property
    def is_power(self) -> bool:
        return self.eps_kind == "unit"

    @property
    def log_cutoff(self) -> float:
        return math.inf if self.is_power else math.log(self.t_cutoff)

    def monotonicity(self) -> str:
        """'constant', 'decreasing' (case a) or 'increasing' (case b) eps."""
        if self.eps_kind == "unit":
            return "constant"
        if self.eps_kind == "log_power":
            return "decreasing"
        if self.eps_kind == "inv_log_power":
            return "increasing"
        le = np.diff(np.asarray(self.table[1]))
        if np.all(le < 0):
            return "decreasing"
        if np.all(le > 0):
            return "increasing"
        if np.all(le == 0):
            return "constant"
        return "mixed"

    def descriptor(self) -> dict:
        out = {"d": self.d, "eps_kind": self.eps_kind, "beta": self.beta,
               "t_cutoff": self.t_cutoff, "log_scale": self.log_scale}
        if self.table is not None:
            out["table"] = [list(self.table[0]), list(self.table[1])]
        return out

    @classmethod
    def from_descriptor(cls, data: dict) -> "GaugeSpec":
        table = data.get("table")
        if table is not None:
            table = (tuple(float(x) for x in table[0]), tuple(float(x) for x in table[1]))
        return cls(d=float(data["d"]), eps_kind=data.get("eps_kind", "unit"),
                   beta=float(data.get("beta", 0.0)), t_cutoff=float(data.get("t_cutoff", 1.0)),
                   log_scale=float(data.get("log_scale", 0.0)), table=table)

    @classmethod
    def tabulated(cls, d: float, log_t: Sequence[float], log_eps_values: Sequence[float],
                  t_cutoff: float | None = None) -> "GaugeSpec":
        lt = tuple(float(x) for x in log_t)
        le = tuple(float(x) for x in log_eps_values)
        if t_cutoff is None:
            t_cutoff = min(1.0, math.exp(lt[-1]))
        return cls(d=d, eps_kind="tabulated", t_cutoff=t_cutoff, table=(lt, le))

    def short_name(self) -> str:
        if self.eps_kind == "unit":
            return f"t^{self.d:.6g}"
        if self.eps_kind == "log_power":
            return f"t^{self.d:.6g}*log^{self.beta:.6g}(1/t)"
        if self.eps_kind == "inv_log_power":
            return f"t^{self.d:.6g}/log^{self.beta:.6g}(1/t)"
        return f"t^{self.d:.6g}*tabulated"


def power_gauge(d: float) -> GaugeSpec:
    return GaugeSpec(d=d)


def _as_array(log_t):
    arr = np.asarray(log_t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("log_t must be finite")
    return arr


def _table_interp(table, x: np.ndarray) -> np.ndarray:
    lt = np.asarray(table[0])
    le = np.asarray(table[1])
    y = np.interp(x, lt, le)
    lo = x < lt[0]
    if np.any(lo):
        slope = (le[1] - le[0]) / (lt[1] - lt[0])
        y = np.where(lo, le[0] + slope * (x - lt[0]), y)
    hi = x > lt[-1]
    if np.any(hi):
        slope = (le[-1] - le[-2]) / (lt[-1] - lt[-2])
        y = np.where(hi, le[-1] + slope * (x - lt[-1]), y)
    return y


def log_eps(g: GaugeSpec, log_t):
    """log eps(t), without the power factor."""
    x = _as_array(log_t)
    if g.eps_kind == "unit":
        out = np.zeros_like(x)
    else:
        if np.any(x >= math.log(g.t_cutoff)):
            raise DomainError(f"log_t must be below log(t0) = {math.log(g.t_cutoff)}")
        if g.eps_kind == "log_power":
            out = g.beta * np.log(-x)
        elif g.eps_kind == "inv_log_power":
            out = -g.beta * np.log(-x)
        else:
            out = _table_interp(g.table, x)
    out = out + g.log_scale
    return float(out) if np.ndim(log_t) == 0 else out


def eval_log(g: GaugeSpec, log_t):
    """log h(t) = d*log t + log eps(t)."""
    x = _as_array(log_t)
    out = g.d * x + log_eps(g, x)
    return float(out) if np.ndim(log_t) == 0 else out


def default_bracket(g: GaugeSpec) -> tuple[float, float]:
    hi = 0.0 if g.is_power else math.log(g.t_cutoff) - 1e-12
    return (-1e6, hi)


def invert(g, log_target, bracket: tuple[float, float] | None = None):
    """Least log t with log h(t) >= log_target, by bisection.

    Works for anything exposing ``eval_log`` that is strictly increasing on
    the bracket; arrays of targets are solved together.
    """
    scalar = np.ndim(log_target) == 0
    target = np.atleast_1d(np.asarray(log_target, dtype=float))
    if not np.all(np.isfinite(target)):
        raise DomainError("target must be finite")
    if bracket is None:
        bracket = default_bracket(g)
    lo = np.full(target.shape, float(bracket[0]))
    hi = np.full(target.shape, float(bracket[1]))
    f_lo = np.asarray(g.eval_log(lo))
    f_hi = np.asarray(g.eval_log(hi))
    if np.any(f_lo > target) or np.any(f_hi < target):
        raise BracketError("bracket does not straddle the target value")
    tol = BISECTION_TOL * np.maximum(1.0, np.abs(target))
    best = hi.copy()
    err = np.abs(f_hi - target)
    exact_lo = np.abs(f_lo - target) <= tol
    best[exact_lo] = lo[exact_lo]
    err[exact_lo] = np.abs(f_lo - target)[exact_lo]
    done = err <= tol
    for _ in range(BISECTION_CAP):
        if np.all(done):
            break
        mid = 0.5 * (lo + hi)
        f_mid = np.asarray(g.eval_log(mid))
        below = f_mid < target
        lo = np.where(below & ~done, mid, lo)
        hi = np.where(~below & ~done, mid, hi)
        e_mid = np.abs(f_mid - target)
        improve = ~done & (e_mid <= err)
        best = np.where(improve, mid, best)
        err = np.where(improve, e_mid, err)
        done = done | (err <= tol)
    if not np.all(done):
        raise ConvergenceError(
            f"bisection did not reach tolerance in {BISECTION_CAP} iterations (max error {err.max():.3e})")
    return float(best[0]) if scalar else best


def conjugate_dimension(K: float, d: float, *, allow_inverse: bool = False) -> float:
    """d' = 2Kd / (2 + (K-1)d).

    ``allow_inverse`` admits 0 < K < 1, which inverts the map for K >= 1.
    """
    if not (math.isfinite(K) and math.isfinite(d)):
        raise DomainError("K and d must be finite")
    if K < 1 and not (allow_inverse and K > 0):
        raise DomainError(f"K must be >= 1, got {K}")
    if not 0 < d < 2:
        raise DomainError(f"d must lie in (0, 2), got {d}")
    return 2.0 * K * d / (2.0 + (K - 1.0) * d)


def eps_exponent(K: float, d: float) -> float:
    """The exponent 2/(2+(K-1)d) carried by eps in the target gauge."""
    return 2.0 / (2.0 + (K - 1.0) * d)


def target_gauge(g: GaugeSpec, K: float) -> GaugeSpec:
    """Image gauge t^{d'} eps^a(t^K) (decreasing eps) or t^{d'} eps^a(t) (increasing eps)."""
    dp = conjugate_dimension(K, g.d)
    a = eps_exponent(K, g.d)
    mono = g.monotonicity()
    if g.eps_kind == "unit":
        return GaugeSpec(d=dp, log_scale=a * g.log_scale)
    if g.eps_kind == "log_power":
        return GaugeSpec(d=dp, eps_kind="log_power", beta=a * g.beta,
                         t_cutoff=g.t_cutoff ** (1.0 / K),
                         log_scale=a * (g.log_scale + g.beta * math.log(K)))
    if g.eps_kind == "inv_log_power":
        return GaugeSpec(d=dp, eps_kind="inv_log_power", beta=a * g.beta,
                         t_cutoff=g.t_cutoff, log_scale=a * g.log_scale)
    lt = np.asarray(g.table[0])
    le = np.asarray(g.table[1])
    if mono == "decreasing":
        return GaugeSpec(d=dp, eps_kind="tabulated", t_cutoff=g.t_cutoff ** (1.0 / K),
                         log_scale=a * g.log_scale,
                         table=(tuple(lt / K), tuple(a * le)))
    if mono in ("increasing", "constant"):
        return GaugeSpec(d=dp, eps_kind="tabulated", t_cutoff=g.t_cutoff,
                         log_scale=a * g.log_scale, table=(tuple(lt), tuple(a * le)))
    raise UnsupportedError("tabulated eps is not monotone; no extension rule applies")


def default_order_grid(t0: float, n: int = 100) -> np.ndarray:
    """log t samples with log(1/t) spaced geometrically from log(1/t0) out to 1e12.

    Logarithmic factors only separate from powers at astronomically small t,
    so the grid runs far into the log domain.
    """
    start = max(-math.log(t0), 1e-3)
    return -np.geomspace(start * 1.0001, 1e12, n)


def order_compare(g: GaugeSpec, h: GaugeSpec, grid=None) -> str:
    """Classify the small-t behaviour of h/g.

    Returns 'g_smaller' when h/g -> 0 (g corresponds to a smaller dimension),
    'h_smaller' when g/h -> 0, 'equivalent' when the ratio stays within a
    bounded band and 'inconclusive' otherwise.
    """
    if grid is None:
        grid = default_order_grid(min(g.t_cutoff, h.t_cutoff))
    x = np.sort(np.asarray(grid, dtype=float))[::-1]  # from larger t toward 0
    if x.size == 0:
        raise DomainError("empty comparison grid")
    lr = np.asarray(h.eval_log(x)) - np.asarray(g.eval_log(x))
    tail = lr[-max(2, x.size // 4):]
    thr = math.log(ORDER_THRESHOLD)
    steps = np.diff(tail)
    if tail[-1] < thr and np.all(steps <= 1e-12 * np.maximum(1, np.abs(tail[:-1]))):
        return "g_smaller"
    if tail[-1] > -thr and np.all(steps >= -1e-12 * np.maximum(1, np.abs(tail[:-1]))):
        return "h_smaller"
    if np.all(np.abs(tail) <= -thr):
        return "equivalent"
    return "inconclusive"


def load_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read the two-column ``log_t log_eps`` text format."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected two columns")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if len(rows) < 2:
        raise FormatError(f"{path}: need at least two rows")
    arr = np.array(rows)
    if np.any(np.diff(arr[:, 0]) <= 0):
        raise FormatError(f"{path}: log_t must be strictly increasing")
    return arr[:, 0], arr[:, 1]


def save_table(path, log_t, log_eps_values, comment: str | None = None) -> None:
    from ._util import atomic_write_text

    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.extend(f"{a!r} {b!r}" for a, b in zip(map(float, log_t), map(float, log_eps_values)))
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Regularization of a tabulated eps.


def _flat_runs(values: np.ndarray, attained: np.ndarray) -> list[tuple[int, int]]:
    """Maximal index runs (a, b] where the running extremum stays constant."""
    runs = []
    n = values.size
    i = 0
    while i < n:
        if attained[i]:
            j = i
            while j + 1 < n and not attained[j + 1]:
                j += 1
            if j > i:
                runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


@dataclass(frozen=True)
class DecreasingRegularization:
    gauge: GaugeSpec
    t: np.ndarray
    eps_in: np.ndarray
    running_inf: np.ndarray
    eps_out: np.ndarray
    slope_bound: float


def _table_arrays(table) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(table, GaugeSpec):
        if table.eps_kind != "tabulated":
            raise DomainError("expected a tabulated gauge")
        return np.asarray(table.table[0], float), np.asarray(table.table[1], float)
    lt, le = table
    return np.asarray(lt, float), np.asarray(le, float)


def regularize_decreasing(table, t0: float, d: float, *, perturbation: float = 1e-3
                          ) -> DecreasingRegularization:
    """Replace eps by a strictly decreasing minorant with t^d*eps increasing.

    Takes the running infimum over s <= t on the grid, then tilts each flat
    stretch into a slightly decreasing segment.  ``table`` is either a
    tabulated GaugeSpec or a pair ``(log_t, log_eps)`` on an increasing grid
    inside (0, t0].
    """
    lt, le = _table_arrays(table)
    if lt.size < 4 or np.any(np.diff(lt) <= 0):
        raise DomainError("need an increasing grid with at least 4 points")
    if lt[-1] > math.log(t0) + 1e-12:
        raise DomainError("grid extends beyond t0")
    t = np.exp(lt)
    eps = np.exp(le)
    m = max(2, lt.size // 10)
    report = {"tail_min": float(eps[:m].min()), "head_max": float(eps[-m:].max()),
              "tail_nonincreasing_in_t": bool(np.all(np.diff(eps[:m]) <= 0))}
    if not (report["tail_min"] > report["head_max"] and report["tail_nonincreasing_in_t"]):
        raise PreconditionError("eps does not grow toward t -> 0 on the grid tail", report)
    for alpha in (0.1, 0.01):
        w = alpha * lt + le
        if not w[0] < w[-1]:
            raise PreconditionError(f"t^{alpha}*eps(t) does not decay toward 0 on the grid", report)

    inf = np.minimum.accumulate(eps)
    out = inf.copy()
    attained = eps <= inf
    slope_bound = 0.5 * (d / t0) * inf[-1]
    runs = _flat_runs(inf, attained)
    for a, b in runs:
        v = inf[a]
        if b + 1 < lt.size:
            end_t = t[b + 1]
            drop = min(perturbation * v, 0.5 * (v - inf[b + 1]))
        else:
            end_t = t[b]
            drop = perturbation * v
        width = end_t - t[a]
        drop = min(drop, slope_bound * width)
        seg = v - drop * (t[a + 1:b + 1] - t[a]) / width
        out[a + 1:b + 1] = seg
    # keep t^d * eps strictly increasing: shave slopes where the grid is too coarse
    for _ in range(60):
        w = d * lt + np.log(out)
        bad = np.nonzero(np.diff(w) <= 0)[0]
        if bad.size == 0:
            break
        for i in bad:
            out[i + 1] = 0.5 * (out[i + 1] + out[i] * (t[i] / t[i + 1]) ** d * (1 + 1e-15))
            out[i + 1] = min(out[i + 1], out[i] * (1 - 1e-15))
    gauge = GaugeSpec.tabulated(d, lt, np.log(out), t_cutoff=t0 if t0 <= 1 else 1.0)
    return DecreasingRegularization(gauge=gauge, t=t, eps_in=eps, running_inf=inf,
                                    eps_out=out, slope_bound=slope_bound)


def _upper_hull(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Indices of the upper convex hull of points sorted by x (monotone chain)."""
    hull: list[int] = []
    for i in range(x.size):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull)


@dataclass(frozen=True)
class IncreasingRegularization:
    """Output of the six-stage pipeline; ``gauge`` is the final tabulated gauge."""

    gauge: GaugeSpec
    t: np.ndarray
    stages: dict
    log_t_seq: np.ndarray
    step_values: np.ndarray
    log_type_constant: float
    K: float
    d: float
    t0: float

    def eps6(self, log_t):
        return _eps6_eval(self, np.asarray(log_t, float))

    def eps_final(self, log_t):
        return self.eps6(log_t) ** (2.0 - self.d)


def _eps3_at(hx, hy, t):
    """Concave envelope values; below the first hull vertex the chord to (0, 0)."""
    t = np.asarray(t, float)
    return np.interp(t, hx, hy)


def _eps6_eval(reg: IncreasingRegularization, log_t: np.ndarray) -> np.ndarray:
    K = reg.K
    lt0 = math.log(reg.t0)
    x = np.atleast_1d(log_t)
    if np.any(x > lt0 + 1e-12):
        raise DomainError("eps6 is defined for t <= t0")
    # index n with t_{n+1} < t <= t_n, i.e. K^n * lt0 >= x > K^{n+1} * lt0
    ratio = np.maximum(x / lt0, 1.0)
    n = np.floor(np.log(ratio) / math.log(K) + 1e-12).astype(int)
    n = np.clip(n, 0, None)
    need = int(n.max()) + 2
    lseq, vals = _extend_steps(reg, need)
    lt_hi = lseq[n]
    lt_lo = lseq[n + 1]
    ratio_lo = np.exp(lt_lo - lt_hi)  # t_{n+1}/t_n
    frac = (np.exp(x - lt_hi) - ratio_lo) / (1.0 - ratio_lo)
    v_hi = vals[n]
    v_lo = vals[n + 1]
    out = v_lo + (v_hi - v_lo) * frac
    return out if np.ndim(log_t) else out[0]


def _extend_steps(reg: IncreasingRegularization, need: int):
    lseq = reg.log_t_seq
    vals = reg.step_values
    if lseq.size >= need + 1:
        return lseq, vals
    hx, hy = reg.stages["hull"]
    slope0 = hy[1] / hx[1] if hx.size > 1 else hy[0] / hx[0]
    K = reg.K
    l_list = list(lseq)
    v_list = list(vals / (10 * K))
    while len(l_list) < need + 1:
        l_next = l_list[-1] * K
        e3 = slope0 * math.exp(l_next)
        v_list.append(max(e3, v_list[-1] / K))
        l_list.append(l_next)
    return np.array(l_list), 10 * K * np.array(v_list)


def regularize_increasing(table, d: float, K: float, t0: float, *, perturbation: float = 1e-3
                          ) -> IncreasingRegularization:
    """Six-stage majorant construction for an increasing eps with eps(0+) = 0.

    Stages: power 1/(2-d), running supremum tilted to be strictly increasing,
    concave envelope through the origin, the step function on the intervals
    (t_{n+1}, t_n] with t_n = t0^(K^n), a factor 10K, linear interpolation
    between the step corners, and finally power 2-d.
    """
    if K <= 1:
        raise DomainError("this regularization needs K > 1")
    if not 0 < t0 < (1.0 / K) ** (1.0 / (K - 1.0)):
        raise DomainError(f"t0 must be below (1/K)^(1/(K-1)) = {(1.0 / K) ** (1.0 / (K - 1.0))}")
    lt, le = _table_arrays(table)
    if lt.size < 4 or np.any(np.diff(lt) <= 0):
        raise DomainError("need an increasing grid with at least 4 points")
    if lt[-1] > math.log(t0) + 1e-12:
        raise DomainError("grid extends beyond t0")
    t = np.exp(lt)
    eps = np.exp(le)
    m = max(2, lt.size // 10)
    report = {"head_min": float(eps[-m:].min()), "tail_max": float(eps[:m].max())}
    if not report["tail_max"] < report["head_min"]:
        raise PreconditionError("eps does not decay toward t -> 0 on the grid tail", report)
    lt0 = math.log(t0)
    lseq = [lt0]
    while lseq[-1] * K >= lt[0]:
        lseq.append(lseq[-1] * K)
    if len(lseq) < 3:
        raise ResolutionError("grid too coarse: cannot resolve t_n = t0^(K^n) beyond n = 1")

    e1 = eps ** (1.0 / (2.0 - d))
    sup = np.maximum.accumulate(e1)
    e2 = sup.copy()
    attained = e1 >= sup
    for a, b in _flat_runs(sup, attained):
        v = sup[a]
        if b + 1 < lt.size:
            end_t = t[b + 1]
            rise = min(perturbation * v, 0.5 * (sup[b + 1] - v))
        else:
            end_t = t[b]
            rise = perturbation * v
        e2[a + 1:b + 1] = v + rise * (t[a + 1:b + 1] - t[a]) / (end_t - t[a])
    # grid endpoint t0 may not be a grid point; use the value at the last grid point
    hx_all = np.concatenate([[0.0], t])
    hy_all = np.concatenate([[0.0], e2])
    idx = _upper_hull(hx_all, hy_all)
    hx, hy = hx_all[idx], hy_all[idx]
    e3 = _eps3_at(hx, hy, t)

    lseq_arr = np.array(lseq)
    tseq = np.exp(lseq_arr)
    slope0 = hy[1] / hx[1]
    e3_seq = np.where(tseq >= hx[1], np.interp(tseq, hx, hy), slope0 * tseq)
    e3_seq[0] = float(np.interp(t0, hx, hy)) if t0 <= hx[-1] else hy[-1]
    e4 = np.empty_like(e3_seq)
    e4[0] = e3_seq[0]
    for n in range(1, e4.size):
        e4[n] = max(e3_seq[n], e4[n - 1] / K)
    e5 = 10.0 * K * e4

    reg = IncreasingRegularization(gauge=None, t=t, stages={"hull": (hx, hy)},
                                   log_t_seq=lseq_arr, step_values=e5, log_type_constant=math.nan,
                                   K=K, d=d, t0=t0)
    e6 = _eps6_eval(reg, lt)
    # step function on the grid, for inspection
    n_idx = np.clip(np.floor(np.log(np.maximum(lt / lt0, 1.0)) / math.log(K) + 1e-12).astype(int), 0, None)
    _, step_ext = _extend_steps(reg, int(n_idx.max()) + 2)
    e4_grid = step_ext[n_idx] / (10 * K)
    final = e6 ** (2.0 - d)
    lk = K * lt
    ok = lk >= lt[0] - 50 * abs(lt[0])  # stay in a sane range of the log domain
    ratio = final[ok] / _eps6_eval(reg, lk[ok]) ** (2.0 - d)
    C = float(np.max(ratio))
    stages = {"eps1": e1, "running_sup": sup, "eps2": e2, "eps3": e3, "eps4": e4_grid,
              "eps5": 10 * K * e4_grid, "eps6": e6, "final": final, "hull": (hx, hy)}
    knots_lt = np.unique(np.concatenate([lt, lseq_arr[lseq_arr >= lt[0]]]))
    knots_val = _eps6_eval(reg, knots_lt) ** (2.0 - d)
    gauge = GaugeSpec.tabulated(d, knots_lt, np.log(knots_val), t_cutoff=t0)
    return IncreasingRegularization(gauge=gauge, t=t, stages=stages, log_t_seq=lseq_arr,
                                    step_values=e5, log_type_constant=C, K=K, d=d, t0=t0)
