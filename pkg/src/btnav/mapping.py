"""Navigation map rendering: fixed-pitch text grids and SVG snapshots.

Text mode paints one character per cell. Cell precedence, highest wins:
'*' estimate > 'o' ground-truth device > 'S' sensor > zone borders
('+', '-', '|') > '.'. Rows are printed with y increasing upward. A legend
line per sensor reports its detection count. SVG mode renders the same
content at 10 px per meter. Both renderers are pure string builders and
fully deterministic.
"""

from __future__ import annotations

import math

from .world import Point2D, World


def _grid_shape(world: World, cell_m: float) -> tuple[int, int]:
    b = world.bounds
    nx = max(1, math.ceil(b.width / cell_m - 1e-9))
    ny = max(1, math.ceil(b.height / cell_m - 1e-9))
    return nx, ny


def _col_of(x: float, min_x: float, cell_m: float, n: int) -> int:
    return min(n - 1, max(0, int(math.floor((x - min_x) / cell_m))))


def _col_of_upper(x: float, min_x: float, cell_m: float, n: int) -> int:
    # Cell whose span ends at or beyond x; an exact boundary maps to the
    # cell below it, so a zone's max edge lands on its own last cell.
    return min(n - 1, max(0, int(math.ceil((x - min_x) / cell_m)) - 1))


def render_text_map(
    world: World,
    t_s: float,
    estimates,
    counts: dict[str, int] | None = None,
    cell_m: float = 1.0,
) -> str:
    from .world import device_position

    counts = counts or {}
    b = world.bounds
    nx, ny = _grid_shape(world, cell_m)
    grid = [["." for _ in range(nx)] for _ in range(ny)]

    def put(ix: int, iy: int, ch: str) -> None:
        grid[iy][ix] = ch

    for z in world.zones:
        ix0 = _col_of(z.rect.min_x, b.min_x, cell_m, nx)
        ix1 = _col_of_upper(z.rect.max_x, b.min_x, cell_m, nx)
        iy0 = _col_of(z.rect.min_y, b.min_y, cell_m, ny)
        iy1 = _col_of_upper(z.rect.max_y, b.min_y, cell_m, ny)
        for ix in range(ix0, ix1 + 1):
            for iy in (iy0, iy1):
                put(ix, iy, "+" if grid[iy][ix] == "|" else "-")
        for iy in range(iy0, iy1 + 1):
            for ix in (ix0, ix1):
                put(ix, iy, "+" if grid[iy][ix] == "-" else "|")
        for ix in (ix0, ix1):
            for iy in (iy0, iy1):
                put(ix, iy, "+")

    def cell(p: Point2D) -> tuple[int, int]:
        return (
            _col_of(p.x, b.min_x, cell_m, nx),
            _col_of(p.y, b.min_y, cell_m, ny),
        )

    for s in world.sensors:
        ix, iy = cell(s.pos)
        put(ix, iy, "S")
    for d in world.devices:
        ix, iy = cell(device_position(world, d.addr, t_s))
        put(ix, iy, "o")
    for e in estimates:
        ix, iy = cell(e.pos)
        put(ix, iy, "*")

    lines = ["".join(grid[iy]) for iy in range(ny - 1, -1, -1)]
    for s in sorted(world.sensors, key=lambda s: s.id):
        lines.append(f"{s.id}: {counts.get(s.id, 0)} detections")
    return "\n".join(lines) + "\n"


def _svg_y(y: float, world: World, px_per_m: float) -> float:
    return (world.bounds.max_y - y) * px_per_m


def render_svg_map(
    world: World,
    t_s: float,
    estimates,
    counts: dict[str, int] | None = None,
    px_per_m: float = 10.0,
) -> str:
    from .world import device_position

    counts = counts or {}
    b = world.bounds
    w = b.width * px_per_m
    h = b.height * px_per_m

    def fx(x: float) -> str:
        return f"{(x - b.min_x) * px_per_m:.1f}"

    def fy(y: float) -> str:
        return f"{_svg_y(y, world, px_per_m):.1f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" '
        f'viewBox="0 0 {w:.0f} {h:.0f}">',
        f'<rect x="0" y="0" width="{w:.0f}" height="{h:.0f}" fill="white" stroke="black"/>',
    ]
    for z in world.zones:
        parts.append(
            f'<rect x="{fx(z.rect.min_x)}" y="{fy(z.rect.max_y)}" '
            f'width="{z.rect.width * px_per_m:.1f}" height="{z.rect.height * px_per_m:.1f}" '
            f'fill="none" stroke="gray" stroke-dasharray="4 2"/>'
        )
        parts.append(
            f'<text x="{fx(z.rect.min_x)}" y="{fy(z.rect.max_y)}" dx="3" dy="12" '
            f'font-size="10" fill="gray">{z.id}</text>'
        )
    for s in sorted(world.sensors, key=lambda s: s.id):
        parts.append(
            f'<circle cx="{fx(s.pos.x)}" cy="{fy(s.pos.y)}" r="4" fill="blue"/>'
        )
        parts.append(
            f'<text x="{fx(s.pos.x)}" y="{fy(s.pos.y)}" dx="5" dy="-5" font-size="10" '
            f'fill="blue">{s.id} ({counts.get(s.id, 0)})</text>'
        )
    for d in world.devices:
        pos = device_position(world, d.addr, t_s)
        parts.append(
            f'<circle cx="{fx(pos.x)}" cy="{fy(pos.y)}" r="3" fill="black"/>'
        )
    for e in estimates:
        x = float(fx(e.pos.x))
        y = float(fy(e.pos.y))
        parts.append(
            f'<path d="M {x - 4:.1f} {y - 4:.1f} L {x + 4:.1f} {y + 4:.1f} '
            f'M {x - 4:.1f} {y + 4:.1f} L {x + 4:.1f} {y - 4:.1f}" '
            f'stroke="red" stroke-width="1.5"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_map(
    world: World,
    t_s: float,
    estimates,
    counts: dict[str, int] | None = None,
    cell_m: float = 1.0,
    fmt: str = "text",
) -> str:
    """Render a snapshot of the world with current estimates.

    fmt is "text" or "svg"; cell_m only affects the text grid.
    """
    if fmt == "text":
        return render_text_map(world, t_s, estimates, counts, cell_m)
    if fmt == "svg":
        return render_svg_map(world, t_s, estimates, counts)
    raise ValueError(f"unknown map format: {fmt!r}")
