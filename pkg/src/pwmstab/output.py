"""CSV tables, text reports and SVG plots for the command-line tools.

Numbers are written with 12 significant digits, CSV uses LF line endings,
and nothing here depends on wall-clock time, so repeated runs produce
byte-identical files.
"""

import csv
import io
import math

from .orbit import orbit_slopes
from .sweep import CRITERIA, criterion_value


def fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return "nan"
    if value == 0.0:
        return "0"  # drop the sign of negative zero
    return f"{value:.12g}"


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def analyze_columns(model):
    names = model.state_names
    cols = ["switch_time", "duty"]
    cols += [f"x0_{s}" for s in names]
    cols += ["orbit_residual"]
    for k in range(1, model.n + 1):
        cols += [f"eig{k}_re", f"eig{k}_im"]
    cols += [
        "spectral_radius", "det_phi",
        "det_bound_lhs", "det_bound_rhs", "det_bound_log_margin", "det_bound_holds",
        "slope_ratio_inst", "slope_holds_inst", "slope_ratio_lin", "slope_holds_lin",
        "m1_inst", "m2_inst", "m1_lin", "m2_lin",
    ]
    cols += [f"gamma_v_{s}" for s in names] + [f"gamma_c_{s}" for s in names]
    cols += ["output_sample", "verdict_exact", "sim_verdict", "sim_rate"]
    return cols


def analyze_row(report, model, rule, probe):
    orbit = report.orbit
    slopes = orbit_slopes(orbit, model, rule)
    row = [orbit.switch_time, orbit.duty, *orbit.x0, orbit.residual_norm]
    for z in report.eigenvalues:
        row += [z.real, z.imag]
    row += [
        report.spectral_radius, report.det_phi,
        report.det_bound_lhs, report.det_bound_rhs, report.det_bound_log_margin, report.det_bound_holds,
        report.slope_ratio_inst, report.slope_holds_inst, report.slope_ratio_lin, report.slope_holds_lin,
        *slopes,
        *report.gamma_v, *report.gamma_c,
        report.output_sample, report.verdict_exact, probe.verdict, probe.measured_rate,
    ]
    return row


def text_report(report, model, rule, probe):
    o = report.orbit
    s = orbit_slopes(o, model, rule)
    names = model.state_names
    lines = [
        f"switch instant d      {fmt(o.switch_time)} s  (duty {fmt(o.duty)})",
        "x0                    " + ", ".join(f"{n}={fmt(v)}" for n, v in zip(names, o.x0)),
        f"orbit residual        {fmt(o.residual_norm)}",
        "",
        "exact eigenvalue test",
    ]
    for z in report.eigenvalues:
        lines.append(f"  lambda              {fmt(z.real)} {'+' if z.imag >= 0 else '-'} {fmt(abs(z.imag))}j  |{fmt(abs(z))}|")
    lines += [
        f"  spectral radius     {fmt(report.spectral_radius)}  -> {report.verdict_exact}",
        f"  det(Phi_o)          {fmt(report.det_phi)}",
        "",
        "determinant bound (necessary condition)",
        f"  lhs                 {fmt(report.det_bound_lhs)}",
        f"  rhs                 {fmt(report.det_bound_rhs)}",
        f"  log margin          {fmt(report.det_bound_log_margin)}  -> {'holds' if report.det_bound_holds else 'violated'}",
        "",
        "slope ratio |(-m2 + m_c)/(m1 + m_c)|",
        f"  instantaneous       {fmt(report.slope_ratio_inst)}  (m1={fmt(s.m1_inst)}, m2={fmt(s.m2_inst)})"
        f"  -> {'< 1' if report.slope_holds_inst else '>= 1'}",
        f"  linear (chord)      {fmt(report.slope_ratio_lin)}  (m1={fmt(s.m1_lin)}, m2={fmt(s.m2_lin)})"
        f"  -> {'< 1' if report.slope_holds_lin else '>= 1'}",
        "",
        "sampled gains",
        "  Gamma_v             " + ", ".join(fmt(v) for v in report.gamma_v),
        "  Gamma_c             " + ", ".join(fmt(v) for v in report.gamma_c),
        f"  E x0                {fmt(report.output_sample)}",
        "",
        f"simulator             {probe.verdict} (measured rate {fmt(probe.measured_rate)})",
    ]
    return "\n".join(lines) + "\n"


SWEEP_COLUMNS = [
    "param", "value", "status", "duty", "spectral_radius", "eig_dom_re", "eig_dom_im", "det_phi",
    "det_bound_lhs", "det_bound_rhs", "det_bound_log_margin", "det_bound_holds",
    "slope_ratio_inst", "slope_holds_inst", "slope_ratio_lin", "slope_holds_lin",
    "verdict_exact", "sim_verdict", "sim_rate",
]


def sweep_rows(result):
    for row in result.rows:
        if row.status != "ok":
            yield [result.param, row.value, row.status] + [None] * (len(SWEEP_COLUMNS) - 3)
            continue
        r = row.report
        dom = r.eigenvalues[0]
        yield [
            result.param, row.value, row.status, r.orbit.duty, r.spectral_radius, dom.real, dom.imag,
            r.det_phi, r.det_bound_lhs, r.det_bound_rhs, r.det_bound_log_margin, r.det_bound_holds,
            r.slope_ratio_inst, r.slope_holds_inst, r.slope_ratio_lin, r.slope_holds_lin,
            r.verdict_exact, row.sim_verdict, row.sim_rate,
        ]


BOUNDARY_COLUMNS = ["criterion", "status", "value"]


def boundary_rows(result):
    for criterion in CRITERIA:
        values = result.boundaries.get(criterion, [])
        if not values:
            yield [criterion, "absent", None]
        for v in values:
            yield [criterion, "found", v]


_COLORS = {"exact": "#1f5fbf", "det_bound": "#2a9d3a", "slope": "#c8322d"}
_LABELS = {
    "exact": "spectral radius",
    "det_bound": "det bound lhs/rhs",
    "slope": "slope ratio (inst.)",
}


def sweep_svg(result, width=720, height=420):
    """Line plot of the three criteria against the swept parameter.

    Every curve is a ratio that crosses 1 at its boundary: the spectral
    radius, ``lhs/rhs`` of the determinant bound, and the slope ratio.
    """
    ok = [row for row in result.rows if row.status == "ok"]
    left, right, top, bottom = 70, 20, 20, 50
    pw, ph = width - left - right, height - top - bottom
    xs = [row.value for row in result.rows]
    x_lo, x_hi = min(xs), max(xs)
    series = {
        c: [(row.value, criterion_value(row.report, c)) for row in ok] for c in CRITERIA
    }
    # plot as ratios: exp of the log margin for det_bound, +1 for the others
    curves = {}
    for c, pts in series.items():
        if c == "det_bound":
            curves[c] = [(x, math.exp(min(v, 50.0))) for x, v in pts]
        else:
            curves[c] = [(x, v + 1.0) for x, v in pts]
    y_max = max([1.5] + [y for pts in curves.values() for _, y in pts if math.isfinite(y)])
    y_max = min(y_max * 1.05, 3.0)

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw if x_hi > x_lo else left + pw / 2

    def py(y):
        y = min(max(y, 0.0), y_max)
        return top + ph - y / y_max * ph

    out = io.StringIO()
    w = out.write
    w('<?xml version="1.0" encoding="UTF-8"?>\n')
    w(f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
      f'viewBox="0 0 {width} {height}">\n')
    w(f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n')
    w(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>\n')
    for i in range(6):
        xv = x_lo + (x_hi - x_lo) * i / 5
        yv = y_max * i / 5
        w(f'<text x="{px(xv):.2f}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{xv:.4g}</text>\n')
        w(f'<text x="{left - 6}" y="{py(yv) + 4:.2f}" font-size="11" text-anchor="end">{yv:.3g}</text>\n')
    w(f'<text x="{left + pw / 2:.2f}" y="{height - 8}" font-size="12" text-anchor="middle">{result.param}</text>\n')
    w(f'<line x1="{left}" y1="{py(1.0):.2f}" x2="{left + pw}" y2="{py(1.0):.2f}" '
      'stroke="gray" stroke-dasharray="4,3"/>\n')
    for c in CRITERIA:
        pts = [(x, y) for x, y in curves[c] if math.isfinite(y)]
        if pts:
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
            w(f'<polyline fill="none" stroke="{_COLORS[c]}" stroke-width="1.5" points="{coords}"/>\n')
        for b in result.boundaries.get(c, []):
            w(f'<line x1="{px(b):.2f}" y1="{top}" x2="{px(b):.2f}" y2="{top + ph}" '
              f'stroke="{_COLORS[c]}" stroke-dasharray="2,2"/>\n')
    for i, c in enumerate(CRITERIA):
        y = top + 14 + 16 * i
        w(f'<line x1="{left + 10}" y1="{y - 4}" x2="{left + 30}" y2="{y - 4}" stroke="{_COLORS[c]}" stroke-width="2"/>\n')
        w(f'<text x="{left + 36}" y="{y}" font-size="11">{_LABELS[c]}</text>\n')
    w("</svg>\n")
    return out.getvalue()
