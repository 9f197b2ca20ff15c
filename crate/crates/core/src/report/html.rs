//! Self-contained HTML rendering with inline SVG charts.
//!
//! Output is XHTML-compatible (every element closed) and references no
//! external resources.

use std::fmt::Write;

use super::{
    ClientSection, MetricResult, MetricStatus, Pillar, PillarSection, ReadinessReport, Table, TableValue,
    VizBin, VizPayload,
};
use crate::federated::{ReadinessFlag, Severity};

const STYLE: &str = r#"
body { font-family: system-ui, sans-serif; margin: 2rem; color: #222; max-width: 1100px; }
h1 { margin-bottom: 0.2rem; }
section.pillar { border-top: 2px solid #ccd; margin-top: 1.5rem; padding-top: 0.5rem; }
div.metric { border: 1px solid #dde; border-radius: 6px; padding: 0.6rem 1rem; margin: 0.8rem 0; }
div.status-undefined { border-color: #d9b44a; }
div.status-error { border-color: #c0392b; }
span.status { font-size: 0.8rem; padding: 0.1rem 0.4rem; border-radius: 4px; background: #eef; }
table { border-collapse: collapse; margin: 0.4rem 0; font-size: 0.85rem; }
th, td { border: 1px solid #ddd; padding: 0.2rem 0.5rem; text-align: right; }
th { background: #f4f4f8; }
td.label { text-align: left; }
td.undefined { color: #999; font-style: italic; }
tr.sev-critical td { background: #fbe3e0; }
tr.sev-warn td { background: #fdf5d8; }
p.notice { padding: 0.4rem 0.8rem; background: #f4f4f8; border-left: 4px solid #88a; }
ul.notes { color: #555; font-size: 0.85rem; }
svg.chart { display: block; margin: 0.4rem 0; }
svg.defs { position: absolute; width: 0; height: 0; }
"#;

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Element-id fragment: ASCII alphanumerics, `-` and `_` only.
fn id_part(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return "undefined".into();
    }
    if v.fract() == 0.0 && v.abs() < 1e12 {
        return format!("{v:.0}");
    }
    if v.abs() >= 1e-3 && v.abs() < 1e6 {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        return s.to_string();
    }
    format!("{v:.3e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), fmt_num)
}

fn truncate(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        s.to_string()
    } else {
        let mut t: String = s.chars().take(n.saturating_sub(1)).collect();
        t.push('…');
        t
    }
}

fn flag_roster(out: &mut String, flags: &[ReadinessFlag], id: &str) {
    let _ = writeln!(out, "<section id=\"{id}\" class=\"flags\">\n<h2>Readiness flags</h2>");
    if flags.is_empty() {
        out.push_str("<p class=\"notice\">No readiness flags raised.</p>\n");
    } else {
        out.push_str(
            "<table>\n<tr><th>Code</th><th>Severity</th><th>Client</th><th>Column</th><th>Evidence</th></tr>\n",
        );
        for f in flags {
            let sev = match f.severity {
                Severity::Critical => "critical",
                Severity::Warn => "warn",
            };
            let _ = writeln!(
                out,
                "<tr class=\"sev-{sev}\"><td class=\"label\">{}</td><td class=\"label\">{sev}</td><td class=\"label\">{}</td><td class=\"label\">{}</td><td class=\"label\">{}</td></tr>",
                f.code.as_str(),
                esc(&f.client_id),
                esc(f.column.as_deref().unwrap_or("")),
                esc(&f.evidence)
            );
        }
        out.push_str("</table>\n");
    }
    out.push_str("</section>\n");
}

fn render_table(out: &mut String, t: &Table) {
    let _ = writeln!(out, "<table class=\"data\" data-name=\"{}\">", esc(&t.name));
    let _ = write!(out, "<caption>{}</caption>\n<tr><th></th>", esc(&t.name));
    for c in &t.columns {
        let _ = write!(out, "<th>{}</th>", esc(c));
    }
    out.push_str("</tr>\n");
    for r in &t.rows {
        let _ = write!(out, "<tr><td class=\"label\">{}</td>", esc(&r.label));
        for c in &r.cells {
            match c {
                Some(TableValue::Number(v)) => {
                    let _ = write!(out, "<td>{}</td>", fmt_num(*v));
                }
                Some(TableValue::Text(s)) => {
                    let _ = write!(out, "<td class=\"label\">{}</td>", esc(s));
                }
                None => out.push_str("<td class=\"undefined\">undefined</td>"),
            }
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n");
}

fn bar_svg(out: &mut String, title: &str, labels: &[String], values: &[Option<f64>]) {
    let n = labels.len().max(1);
    let bar_w = (560 / n).clamp(8, 60) as f64;
    let width = 60.0 + bar_w * n as f64 + 20.0;
    let (plot_h, top) = (160.0, 24.0);
    let height = top + plot_h + 60.0;
    let max = values.iter().flatten().copied().fold(0.0f64, f64::max);
    let scale = if max > 0.0 { plot_h / max } else { 0.0 };
    let _ = writeln!(
        out,
        "<svg class=\"chart bar\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" role=\"img\">"
    );
    let _ = writeln!(out, "<title>{}</title>", esc(title));
    let _ = writeln!(out, "<text x=\"4\" y=\"16\" font-size=\"12\">{}</text>", esc(title));
    let base = top + plot_h;
    let _ = writeln!(
        out,
        "<line x1=\"56\" y1=\"{base}\" x2=\"{:.1}\" y2=\"{base}\" stroke=\"#888\" />",
        width - 10.0
    );
    let _ = writeln!(out, "<text x=\"52\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\">{}</text>", top + 8.0, fmt_num(max));
    for (i, (label, v)) in labels.iter().zip(values).enumerate() {
        let x = 60.0 + bar_w * i as f64;
        match v {
            Some(v) => {
                let h = (v.max(0.0) * scale).max(if *v > 0.0 { 1.0 } else { 0.0 });
                let _ = writeln!(
                    out,
                    "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"#4a78b5\"><title>{}: {}</title></rect>",
                    base - h,
                    bar_w * 0.8,
                    esc(label),
                    fmt_num(*v)
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "<rect class=\"undefined-cell\" x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"url(#hatch)\" stroke=\"#999\"><title>{}: undefined</title></rect>",
                    top,
                    bar_w * 0.8,
                    plot_h,
                    esc(label)
                );
                let _ = writeln!(
                    out,
                    "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"8\" text-anchor=\"middle\" transform=\"rotate(-90 {:.1} {:.1})\">undefined</text>",
                    x + bar_w * 0.4,
                    top + plot_h / 2.0,
                    x + bar_w * 0.4,
                    top + plot_h / 2.0
                );
            }
        }
        let lx = x + bar_w * 0.4;
        let ly = base + 12.0;
        let _ = writeln!(
            out,
            "<text x=\"{lx:.1}\" y=\"{ly:.1}\" font-size=\"9\" text-anchor=\"end\" transform=\"rotate(-40 {lx:.1} {ly:.1})\">{}</text>",
            esc(&truncate(label, 14))
        );
    }
    out.push_str("</svg>\n");
}

fn histogram_svg(out: &mut String, title: &str, bins: &[VizBin]) {
    let labels: Vec<String> = bins
        .iter()
        .map(|b| format!("{}–{}", fmt_num(b.lower), fmt_num(b.upper)))
        .collect();
    let values: Vec<Option<f64>> = bins.iter().map(|b| b.count).collect();
    bar_svg(out, title, &labels, &values);
}

fn heat_color(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let t = v.abs();
    let fade = |c: f64| (255.0 - (255.0 - c) * t).round() as u8;
    let (r, g, b) = if v >= 0.0 {
        (fade(192.0), fade(57.0), fade(43.0))
    } else {
        (fade(41.0), fade(98.0), fade(182.0))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn heatmap_svg(out: &mut String, title: &str, labels: &[String], grid: &[Vec<Option<f64>>]) {
    let n = labels.len().max(1);
    let cell = (520 / n).clamp(14, 48) as f64;
    let left = 110.0;
    let top = 100.0;
    let width = left + cell * n as f64 + 20.0;
    let height = top + cell * n as f64 + 20.0;
    let _ = writeln!(
        out,
        "<svg class=\"chart heatmap\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" role=\"img\">"
    );
    let _ = writeln!(out, "<title>{}</title>", esc(title));
    let _ = writeln!(out, "<text x=\"4\" y=\"16\" font-size=\"12\">{}</text>", esc(title));
    for (i, label) in labels.iter().enumerate() {
        let y = top + cell * i as f64 + cell / 2.0 + 3.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"9\" text-anchor=\"end\">{}</text>",
            left - 4.0,
            esc(&truncate(label, 16))
        );
        let x = left + cell * i as f64 + cell / 2.0;
        let ty = top - 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{x:.1}\" y=\"{ty:.1}\" font-size=\"9\" transform=\"rotate(-50 {x:.1} {ty:.1})\">{}</text>",
            esc(&truncate(label, 16))
        );
    }
    for (i, row) in grid.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let x = left + cell * j as f64;
            let y = top + cell * i as f64;
            match v {
                Some(v) => {
                    let _ = writeln!(
                        out,
                        "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell:.1}\" height=\"{cell:.1}\" fill=\"{}\" stroke=\"#fff\"><title>{} / {}: {}</title></rect>",
                        heat_color(*v),
                        esc(&labels[i]),
                        esc(&labels[j]),
                        fmt_num(*v)
                    );
                    if cell >= 28.0 {
                        let _ = writeln!(
                            out,
                            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"8\" text-anchor=\"middle\">{:.2}</text>",
                            x + cell / 2.0,
                            y + cell / 2.0 + 3.0,
                            v
                        );
                    }
                }
                None => {
                    let _ = writeln!(
                        out,
                        "<rect class=\"undefined-cell\" x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell:.1}\" height=\"{cell:.1}\" fill=\"url(#hatch)\" stroke=\"#fff\"><title>{} / {}: undefined</title></rect>",
                        esc(&labels[i]),
                        esc(&labels[j])
                    );
                    let _ = writeln!(
                        out,
                        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"{:.0}\" text-anchor=\"middle\" fill=\"#555\">undefined</text>",
                        x + cell / 2.0,
                        y + cell / 2.0 + 2.0,
                        (cell / 6.0).clamp(3.0, 8.0)
                    );
                }
            }
        }
    }
    out.push_str("</svg>\n");
}

fn render_viz(out: &mut String, v: &VizPayload) {
    match v {
        VizPayload::Bar { title, labels, values } => bar_svg(out, title, labels, values),
        VizPayload::Histogram { title, bins } => histogram_svg(out, title, bins),
        VizPayload::Heatmap { title, labels, grid } => heatmap_svg(out, title, labels, grid),
    }
}

fn render_metric(out: &mut String, m: &MetricResult, id_prefix: &str) {
    let status = match m.status {
        MetricStatus::Ok => "ok",
        MetricStatus::Undefined => "undefined",
        MetricStatus::Error => "error",
    };
    let _ = writeln!(
        out,
        "<div class=\"metric status-{status}\" id=\"metric-{id_prefix}{}\" data-metric-id=\"{}\">",
        id_part(&m.metric_id),
        esc(&m.metric_id)
    );
    let _ = writeln!(out, "<h3>{} <span class=\"status\">{status}</span></h3>", esc(&m.metric_id));
    if !m.scalars.is_empty() {
        out.push_str("<table class=\"scalars\">\n");
        for (k, v) in &m.scalars {
            let class = if v.is_some() { "" } else { " class=\"undefined\"" };
            let _ = writeln!(
                out,
                "<tr><td class=\"label\">{}</td><td{class}>{}</td></tr>",
                esc(k),
                fmt_opt(*v)
            );
        }
        out.push_str("</table>\n");
    }
    for v in &m.viz {
        render_viz(out, v);
    }
    for t in &m.tables {
        render_table(out, t);
    }
    if !m.notes.is_empty() {
        out.push_str("<ul class=\"notes\">\n");
        for n in &m.notes {
            let _ = writeln!(out, "<li>{}</li>", esc(n));
        }
        out.push_str("</ul>\n");
    }
    out.push_str("</div>\n");
}

fn render_pillars(out: &mut String, sections: &[PillarSection], id_prefix: &str) {
    for pillar in Pillar::ALL {
        let section = sections.iter().find(|s| s.pillar == pillar);
        if section.is_none() && pillar != Pillar::StructureOrganization {
            continue;
        }
        let _ = writeln!(
            out,
            "<section class=\"pillar\" id=\"{id_prefix}pillar-{}\">\n<h2>{}</h2>",
            pillar.slug(),
            esc(pillar.title())
        );
        match section {
            Some(s) => {
                for m in &s.metrics {
                    render_metric(out, m, id_prefix);
                }
            }
            None => out.push_str("<p class=\"notice\">No metrics defined for this pillar.</p>\n"),
        }
        out.push_str("</section>\n");
    }
}

fn render_client(out: &mut String, c: &ClientSection) {
    let cid = id_part(&c.client_id);
    let _ = writeln!(
        out,
        "<section class=\"client\" id=\"client-{cid}\">\n<h2>Client {}</h2>\n<p>Rows: {}</p>",
        esc(&c.client_id),
        c.row_count
    );
    flag_roster(out, &c.flags, &format!("client-{cid}-flags"));
    render_pillars(out, &c.sections, &format!("client-{cid}-"));
    out.push_str("</section>\n");
}

pub fn render_html(r: &ReadinessReport) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\" />\n");
    let _ = writeln!(out, "<title>{}</title>", esc(&r.title));
    let _ = writeln!(out, "<style>{STYLE}</style>\n</head>\n<body>");
    out.push_str(concat!(
        "<svg class=\"defs\" width=\"0\" height=\"0\" aria-hidden=\"true\"><defs>",
        "<pattern id=\"hatch\" patternUnits=\"userSpaceOnUse\" width=\"6\" height=\"6\">",
        "<rect width=\"6\" height=\"6\" fill=\"#f2f2f2\" />",
        "<path d=\"M0,6 L6,0\" stroke=\"#999\" stroke-width=\"1\" />",
        "</pattern></defs></svg>\n"
    ));
    let _ = writeln!(out, "<header>\n<h1>{}</h1>", esc(&r.title));
    let _ = writeln!(out, "<p>Source: <code>{}</code></p>", esc(&r.source_id));
    if let Some(ts) = &r.created_at {
        let _ = writeln!(out, "<p>Created: {}</p>", esc(ts));
    }
    let _ = writeln!(out, "<p>Run: <code>{}</code></p>\n</header>", esc(&r.config.run_id));

    for n in &r.notices {
        let _ = writeln!(out, "<p class=\"notice\">{}</p>", esc(n));
    }
    flag_roster(&mut out, &r.flags, "flags");

    if r.sections.is_empty() && r.clients.is_empty() {
        out.push_str("<p class=\"notice\" id=\"no-metrics\">No metrics selected.</p>\n");
    }
    render_pillars(&mut out, &r.sections, "");
    for c in &r.clients {
        render_client(&mut out, c);
    }

    let config = serde_json::to_string_pretty(&r.config).unwrap_or_default();
    let _ = writeln!(
        out,
        "<details id=\"config\">\n<summary>Configuration</summary>\n<pre>{}</pre>\n</details>",
        esc(&config)
    );
    out.push_str("</body>\n</html>\n");
    out.into_bytes()
}
