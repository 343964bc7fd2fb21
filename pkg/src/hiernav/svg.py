"""Top-down SVG plot of a scenario and an episode."""

from __future__ import annotations

from xml.sax.saxutils import escape

from .world import Scenario

SCALE = 40.0  # pixels per metre
MARGIN = 20.0


def _pt(x: float, y: float, height_m: float) -> tuple[float, float]:
    # SVG y grows downwards
    return (MARGIN + x * SCALE, MARGIN + (height_m - y) * SCALE)


def render_svg(s: Scenario, trajectories=(), graph=None, waypoints=(), obstacles=None) -> str:
    w_m, h_m = s.bounds_m
    W = 2 * MARGIN + w_m * SCALE
    H = 2 * MARGIN + h_m * SCALE
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
           f'viewBox="0 0 {W:.1f} {H:.1f}">',
           f'<rect x="0" y="0" width="{W:.1f}" height="{H:.1f}" fill="white"/>']
    for r in s.rooms:
        x0, y0, x1, y1 = r.rect
        px, py = _pt(x0, y1, h_m)
        out.append(f'<rect class="room" x="{px:.1f}" y="{py:.1f}" width="{(x1 - x0) * SCALE:.1f}" '
                   f'height="{(y1 - y0) * SCALE:.1f}" fill="#f4f1ea" stroke="#333" stroke-width="2"/>')
        cx, cy = _pt((x0 + x1) / 2, y1 - 0.3, h_m)
        out.append(f'<text x="{cx:.1f}" y="{cy:.1f}" font-size="11" text-anchor="middle">{escape(r.label)}</text>')
    for d in s.doors:
        half = d.width_m / 2
        if d.axis == "v":
            a, b = _pt(d.position[0], d.position[1] - half, h_m), _pt(d.position[0], d.position[1] + half, h_m)
        else:
            a, b = _pt(d.position[0] - half, d.position[1], h_m), _pt(d.position[0] + half, d.position[1], h_m)
        out.append(f'<line class="door" x1="{a[0]:.1f}" y1="{a[1]:.1f}" x2="{b[0]:.1f}" y2="{b[1]:.1f}" '
                   f'stroke="#f4f1ea" stroke-width="4"/>')
    for o in s.objects:
        x0, y0, x1, y1 = o.rect
        px, py = _pt(x0, y1, h_m)
        out.append(f'<rect class="object" x="{px:.1f}" y="{py:.1f}" width="{(x1 - x0) * SCALE:.1f}" '
                   f'height="{(y1 - y0) * SCALE:.1f}" fill="#9bc1e8" stroke="#35618f"/>')
    for ob in (s.dynamic_obstacles if obstacles is None else obstacles):
        x0, y0, x1, y1 = ob.rect
        px, py = _pt(x0, y1, h_m)
        out.append(f'<rect class="obstacle" x="{px:.1f}" y="{py:.1f}" width="{(x1 - x0) * SCALE:.1f}" '
                   f'height="{(y1 - y0) * SCALE:.1f}" fill="#c0392b"/>')
    if graph is not None:
        for v in graph.vertices:
            p = v.centroid if v.kind == "region" else v.position
            x, y = _pt(p[0], p[1], h_m)
            color = "#2c3e50" if v.kind == "region" else "#e67e22"
            out.append(f'<circle class="vertex" cx="{x:.1f}" cy="{y:.1f}" r="5" fill="{color}"/>')
    for p in waypoints:
        x, y = _pt(p[0], p[1], h_m)
        out.append(f'<circle class="waypoint" cx="{x:.1f}" cy="{y:.1f}" r="2" fill="#27ae60"/>')
    for traj in trajectories:
        if len(traj) < 2:
            continue
        pts = " ".join("{:.1f},{:.1f}".format(*_pt(p[0], p[1], h_m)) for p in traj)
        out.append(f'<polyline class="trajectory" points="{pts}" fill="none" stroke="#8e44ad" stroke-width="2"/>')
    sx, sy = _pt(s.start.x, s.start.y, h_m)
    out.append(f'<circle class="start" cx="{sx:.1f}" cy="{sy:.1f}" r="6" fill="none" stroke="#000"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
