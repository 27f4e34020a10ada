"""Command-line driver: ``qc-cantor <subcommand> [flags]``.

Every artifact is JSON (or SVG for ``render``), written atomically.  Module
errors become a JSON object on stderr and exit status 2; checks that run but
fail exit with status 1.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

import numpy as np

from . import construction, measure, qcmap, render, sigma_finite
from ._util import atomic_write_json, atomic_write_text, dumps, read_json
from .errors import FormatError, QCCantorError, UsageError
from .gauge import GaugeSpec
from .packing import pack_disk, verify_layer
from .rng import SplitMix64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_gauge(spec: str, d: float, t0: float | None) -> GaugeSpec:
    """``unit``, ``log:beta`` (eps = log^beta(1/t)) or ``invlog:beta`` (eps = log^-beta(1/t))."""
    kind, _, arg = spec.partition(":")
    if kind == "unit":
        if arg:
            raise UsageError("the unit gauge takes no parameter")
        return GaugeSpec(d=d, t_cutoff=1.0 if t0 is None else t0)
    names = {"log": "log_power", "invlog": "inv_log_power"}
    if kind not in names:
        raise UsageError(f"unknown gauge {spec!r}; use unit, log:beta or invlog:beta")
    try:
        beta = float(arg) if arg else 1.0
    except ValueError:
        raise UsageError(f"bad gauge exponent in {spec!r}") from None
    return GaugeSpec(d=d, eps_kind=names[kind], beta=beta, t_cutoff=0.3 if t0 is None else t0)


def parse_eps_schedule(spec: str | None, depth: int) -> tuple[float, ...] | None:
    """``geometric:r[:e1]`` gives eps_n = e1 r^(n-1) (e1 = 1/16 by default); ``list:a,b,...`` is literal."""
    if spec is None:
        return None
    kind, _, rest = spec.partition(":")
    try:
        if kind == "geometric":
            parts = rest.split(":")
            r = float(parts[0])
            e1 = float(parts[1]) if len(parts) > 1 else 1.0 / 16.0
            if not (0 < r < 1 and 0 < e1 < 1):
                raise UsageError("geometric schedule needs 0 < r < 1 and 0 < e1 < 1")
            return tuple(e1 * r ** n for n in range(depth))
        if kind == "list":
            vals = tuple(float(x) for x in rest.split(","))
            return vals
    except ValueError:
        raise UsageError(f"bad eps schedule {spec!r}") from None
    raise UsageError(f"unknown eps schedule {spec!r}; use geometric:r[:e1] or list:a,b,...")


@dataclass
class RunConfig:
    subcommand: str
    K: float = 2.0
    d: float | None = None
    gauge: str = "unit"
    t0: float | None = None
    depth: int = 2
    eps_schedule: str | None = None
    sigma_max: float = construction.DEFAULT_SIGMA_MAX
    seed: int = 0
    inp: str | None = None
    out: str | None = None
    side: str = "both"
    gen: int | None = None
    samples: int = 10_000
    probes: int = 1000
    extra: dict = field(default_factory=dict)

    @property
    def exponent(self) -> float:
        return 2.0 / (self.K + 1.0) if self.d is None else self.d

    def gauge_spec(self) -> GaugeSpec:
        return parse_gauge(self.gauge, self.exponent, self.t0)

    def sides(self) -> tuple[str, ...]:
        return ("source", "target") if self.side == "both" else (self.side,)


def _load_tree(cfg: RunConfig) -> construction.ConstructionTree:
    if not cfg.inp:
        raise UsageError("--in TREE.json is required")
    return construction.load_tree(cfg.inp)


def _emit(cfg: RunConfig, obj) -> None:
    if cfg.out:
        atomic_write_json(cfg.out, obj)
    else:
        sys.stdout.write(dumps(obj) + "\n")


def _read_points(path: str) -> np.ndarray:
    data = read_json(path)
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"points must be a JSON array of [x, y]: {exc}") from None
    if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
        raise FormatError("points must be a JSON array of finite [x, y] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


# ---------------------------------------------------------------------------


def cmd_build(cfg: RunConfig) -> int:
    tree = construction.build(cfg.K, cfg.gauge_spec(), cfg.depth, parse_eps_schedule(cfg.eps_schedule, cfg.depth),
                              sigma_max=cfg.sigma_max, R_start=cfg.extra.get("R_start"), seed=cfg.seed)
    doc = tree.to_json()
    if cfg.out:
        atomic_write_json(cfg.out, doc)
        sys.stdout.write(dumps({"out": cfg.out, "depth": tree.depth,
                                "blocks_per_level": [lv.layer.n_disks for lv in tree.levels],
                                "check": construction.check_tree(tree)}) + "\n")
    else:
        sys.stdout.write(dumps(doc) + "\n")
    return 0


def cmd_pack(cfg: RunConfig) -> int:
    eps = cfg.extra.get("eps", 1.0 / 16.0)
    delta = cfg.extra.get("delta", 0.2)
    ceiling = cfg.extra.get("ceiling", 0.1)
    layer = pack_disk(eps, delta, ceiling, cfg.seed, single_radius=cfg.extra.get("single_radius", False),
                      exact=cfg.extra.get("exact", False))
    doc = layer.to_json()
    doc["verify"] = verify_layer(layer, delta)
    _emit(cfg, doc)
    return 0


def cmd_map(cfg: RunConfig) -> int:
    tree = _load_tree(cfg)
    pts_path = cfg.extra.get("points")
    if not pts_path:
        raise UsageError("--points FILE.json is required")
    z = _read_points(pts_path)
    N = tree.depth if cfg.gen is None else cfg.gen
    w = qcmap.phi_eval(tree, N, z) if z.size else z
    _emit(cfg, [[float(v.real), float(v.imag)] for v in np.atleast_1d(w)])
    return 0


def _survey_all(tree, cfg: RunConfig, sides) -> dict:
    return {s: measure.survey_packing(tree, s, probes=cfg.probes, seed=cfg.seed) for s in sides}


def cmd_measure(cfg: RunConfig) -> int:
    tree = _load_tree(cfg)
    N = tree.depth if cfg.gen is None else cfg.gen
    surveys = _survey_all(tree, cfg, cfg.sides())
    reports = [measure.measure_report(tree, N, s) for s in cfg.sides()]
    for r in reports:
        r["survey"] = surveys[r["side"]].to_json()
    _emit(cfg, reports)
    return 0 if all(r["sandwich"] for r in reports) else 1


def cmd_check(cfg: RunConfig) -> int:
    tree = _load_tree(cfg)
    out = {"tree": construction.check_tree(tree)}
    ok = bool(out["tree"]["eps_product_ok"] and out["tree"]["sigma_bound_ok"])
    tol = 1e-12
    if tree.is_power:
        ok &= out["tree"]["level_identity_residual"] <= tol and out["tree"]["sigma_relation_residual"] <= tol
    else:
        ok &= (out["tree"]["sigma_relation_residual"] <= tol and out["tree"]["target_relation_residual"] <= tol
               and out["tree"]["trapping"] and out["tree"]["h_target_increasing_on_T"])
    # children sums over random parents (root included)
    rng = SplitMix64(cfg.seed)
    parents = [()]
    if tree.depth >= 2:
        lengths = 1 + rng.integers(99, tree.depth - 1)
        for n in lengths:
            path = [tree.group_of(k, int(rng.integers(1, tree.levels[k - 1].layer.n_disks)[0]))
                    for k in range(1, int(n) + 1)]
            parents.append(tuple(path))
    worst = {s: max(measure.children_sum_check(tree, p, s) for p in parents) for s in construction.SIDES}
    out["children_sum_residual"] = worst
    out["children_sum_parents"] = len(parents)
    ok &= max(worst.values()) <= tol
    surveys = _survey_all(tree, cfg, construction.SIDES)
    out["packing"] = {s: v.to_json() for s, v in surveys.items()}
    ok &= all(v.all_finite for v in surveys.values())
    sandwich = []
    for s in construction.SIDES:
        for N in range(1 if not tree.is_power else 0, tree.depth + 1):
            r = measure.measure_report(tree, N, s)
            sandwich.append(r)
            ok &= r["sandwich"]
    out["sandwich"] = sandwich
    rep = qcmap.distortion_report(tree, tree.depth if cfg.gen is None else cfg.gen, cfg.samples, cfg.seed)
    out["distortion"] = rep
    ok &= rep["pass"]
    out["ok"] = bool(ok)
    _emit(cfg, out)
    return 0 if ok else 1


def cmd_glue(cfg: RunConfig) -> int:
    k_max = cfg.extra.get("k_max", 6)
    plan = sigma_finite.glue_plan(cfg.K, cfg.exponent, k_max)
    certs = None
    tree = None
    if cfg.inp:
        tree = construction.load_tree(cfg.inp)
        N = tree.depth if cfg.gen is None else cfg.gen
        certs = {}
        for s in construction.SIDES:
            measure.survey_packing(tree, s, probes=cfg.probes, seed=cfg.seed)
            certs[s] = measure.lower_bound_certificate(tree, N, s)
    report = sigma_finite.verify_glue(plan, tree, certs)
    if cfg.out:
        atomic_write_json(cfg.out, plan.to_json())
        sys.stdout.write(dumps({"out": cfg.out, "verify": report}) + "\n")
    else:
        sys.stdout.write(dumps({"plan": plan.to_json(), "verify": report}) + "\n")
    return 0 if report["ok"] else 1


def cmd_render(cfg: RunConfig) -> int:
    tree = _load_tree(cfg)
    gen = min(tree.depth, 2) if cfg.gen is None else cfg.gen
    if not cfg.out:
        raise UsageError("--out is required for render")
    written = []
    for s in cfg.sides():
        svg = render.render_svg(tree, s, gen, stroke_scale=cfg.extra.get("stroke_scale", 1.0))
        if cfg.side == "both":
            base = cfg.out[:-4] if cfg.out.endswith(".svg") else cfg.out
            path = f"{base}-{s}.svg"
        else:
            path = cfg.out
        atomic_write_text(path, svg)
        written.append({"side": s, "path": path, "blocks": render.block_circle_count(svg)})
    sys.stdout.write(dumps(written) + "\n")
    return 0


COMMANDS = {"build": cmd_build, "pack": cmd_pack, "map": cmd_map, "measure": cmd_measure,
            "check": cmd_check, "glue": cmd_glue, "render": cmd_render}


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qc-cantor", description="Cantor-type constructions for quasiconformal distortion.")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp, tree_in=False):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")
        if tree_in:
            sp.add_argument("--in", dest="inp")

    def geometry(sp):
        sp.add_argument("--K", type=float, default=2.0)
        sp.add_argument("--d", type=float)

    b = sub.add_parser("build", help="construct and save a tree")
    geometry(b)
    common(b)
    b.add_argument("--gauge", default="unit")
    b.add_argument("--t0", type=float)
    b.add_argument("--depth", type=int, default=2)
    b.add_argument("--eps-schedule")
    b.add_argument("--sigma-max", type=float, default=construction.DEFAULT_SIGMA_MAX)
    b.add_argument("--R-start", type=float)

    pk = sub.add_parser("pack", help="pack one disk layer")
    common(pk)
    pk.add_argument("--eps", type=float, default=1.0 / 16.0)
    pk.add_argument("--delta", type=float, default=0.2)
    pk.add_argument("--ceiling", type=float, default=0.1)
    pk.add_argument("--single-radius", action="store_true")
    pk.add_argument("--exact", action="store_true")

    m = sub.add_parser("map", help="evaluate phi_N on a point file")
    common(m, True)
    m.add_argument("--points", required=True)
    m.add_argument("--gen", type=int)

    ms = sub.add_parser("measure", help="upper and lower content reports")
    common(ms, True)
    ms.add_argument("--side", choices=("source", "target", "both"), default="both")
    ms.add_argument("--gen", type=int)
    ms.add_argument("--probes", type=int, default=1000)

    c = sub.add_parser("check", help="full invariant suite")
    common(c, True)
    c.add_argument("--gen", type=int)
    c.add_argument("--samples", type=int, default=10_000)
    c.add_argument("--probes", type=int, default=1000)

    g = sub.add_parser("glue", help="build and verify a gluing plan")
    geometry(g)
    common(g, True)
    g.add_argument("--k-max", type=int, default=6)
    g.add_argument("--gen", type=int)
    g.add_argument("--probes", type=int, default=1000)

    r = sub.add_parser("render", help="SVG of source and target generations")
    common(r, True)
    r.add_argument("--side", choices=("source", "target", "both"), default="both")
    r.add_argument("--gen", type=int)
    r.add_argument("--stroke-scale", type=float, default=1.0)
    return p


EXTRA_KEYS = ("eps", "delta", "ceiling", "single_radius", "exact", "points", "k_max", "stroke_scale", "R_start")


def config_from_args(argv=None) -> RunConfig:
    ns = vars(_parser().parse_args(argv))
    extra = {k: ns.pop(k) for k in EXTRA_KEYS if k in ns and ns[k] is not None}
    known = {k: v for k, v in ns.items() if k in RunConfig.__dataclass_fields__ and v is not None}
    return RunConfig(**known, extra=extra)


def run(cfg: RunConfig) -> int:
    return COMMANDS[cfg.subcommand](cfg)


def main(argv=None) -> int:
    try:
        return run(config_from_args(argv))
    except QCCantorError as exc:
        sys.stderr.write(dumps({"error": exc.to_dict()}) + "\n")
        return 2
    except (OSError, ValueError) as exc:
        sys.stderr.write(dumps({"error": {"code": "io" if isinstance(exc, OSError) else "value",
                                          "message": str(exc)}}) + "\n")
        return 2
    except Exception as exc:  # anything unexpected still yields machine-readable output
        sys.stderr.write(dumps({"error": {"code": "internal", "message": f"{type(exc).__name__}: {exc}"}}) + "\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
