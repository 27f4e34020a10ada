"""SVG 1.1 drawings of the construction generations (circles only)."""

from __future__ import annotations

import math

import numpy as np

from .construction import ConstructionTree, _check_side, count_blocks
from .errors import DomainError, ResourceError

MAX_CIRCLES = 250_000
MAX_GEN = 4


def _fmt(v: float) -> str:
    s = f"{v:.10g}"
    return "0" if s == "-0" else s


def _generation_circles(tree: ConstructionTree, k: int, side: str):
    """Centres and log radii of all generation-k blocks (vectorized, path order)."""
    c = np.zeros(1, dtype=complex)
    lr = np.zeros(1)
    for m in range(1, k + 1):
        centers, _, ls, _ = tree.level_arrays(m, side)
        c = (c[:, None] + np.exp(lr)[:, None] * centers[None, :]).ravel()
        lr = (lr[:, None] + ls[None, :]).ravel()
    return c, lr


def render_svg(tree: ConstructionTree, side: str, gen: int, *, stroke_scale: float = 1.0,
               size: int = 800, tildes: bool = True, max_circles: int = MAX_CIRCLES) -> str:
    """Blocks of generations 1..gen on one side, plus the stretch disks of each level.

    The tilde disks around generation-k blocks are drawn dashed; they are the
    same on both sides, so a side with K = 1 yields the very same document.
    """
    _check_side(side)
    if not 1 <= gen <= min(MAX_GEN, tree.depth):
        raise DomainError(f"gen must lie in 1..{min(MAX_GEN, tree.depth)}")
    if stroke_scale <= 0:
        raise DomainError("stroke_scale must be positive")
    # each generation-k block comes with one tilde disk
    total = (2 if tildes else 1) * sum(count_blocks(tree, k) for k in range(1, gen + 1))
    if total > max_circles:
        raise ResourceError(f"{total} circles exceed the render cap {max_circles}")
    w = 0.002 * stroke_scale
    lines = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{size}" height="{size}" viewBox="-1.05 -1.05 2.1 2.1">',
        "<style>circle{fill:none;stroke:#000}"
        ".tilde{stroke:#888;stroke-dasharray:0.004 0.004}"
        + "".join(f".gen-{k}{{stroke-width:{_fmt(w / (k + 1))}}}" for k in range(0, gen + 1)) + "</style>",
        f'<circle class="gen-0" cx="0" cy="0" r="1" stroke-width="{_fmt(w)}"/>',
    ]
    for k in range(1, gen + 1):
        lines.append(f'<g class="gen-{k}">')
        if tildes and k >= 2:
            pc, plr = _generation_circles(tree, k - 1, side)
            centers, R, _, _ = tree.level_arrays(k, side)
            tc = (pc[:, None] + np.exp(plr)[:, None] * centers[None, :]).ravel()
            tr = (np.exp(plr)[:, None] * R[None, :]).ravel()
            for z, r in zip(tc, tr):
                lines.append(f'<circle class="tilde" cx="{_fmt(z.real)}" cy="{_fmt(-z.imag)}" r="{_fmt(r)}"/>')
        elif tildes:
            centers, R, _, _ = tree.level_arrays(1, side)
            for z, r in zip(centers, R):
                lines.append(f'<circle class="tilde" cx="{_fmt(z.real)}" cy="{_fmt(-z.imag)}" r="{_fmt(r)}"/>')
        c, lr = _generation_circles(tree, k, side)
        for z, l in zip(c, lr):
            lines.append(f'<circle cx="{_fmt(z.real)}" cy="{_fmt(-z.imag)}" r="{_fmt(math.exp(l))}"/>')
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def block_circle_count(svg: str, gen: int | None = None) -> int:
    """Number of block circles, in one generation or in all (tilde outlines excluded)."""
    count = 0
    current = None
    for ln in svg.splitlines():
        if ln.startswith('<g class="gen-'):
            current = int(ln[len('<g class="gen-'):].split('"')[0])
        elif ln.startswith("<circle cx=") and (gen is None or current == gen):
            count += 1
    return count
