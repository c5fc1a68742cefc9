//! Human-readable report text, sweep CSV and sweep SVG.

use std::fmt::Write as _;

use super::{verdict_name, AnalysisResult, ReportDocument, SweepResult};
use crate::operators::BoundsEstimate;

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9}")).unwrap_or_else(|| "-".into())
}

fn fmt_est(e: &BoundsEstimate) -> String {
    format!("{:.9} [{:.9}, {:.9}]", e.value, e.certified_low, e.certified_high)
}

pub fn render_text(doc: &ReportDocument) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "framelab report ({})", doc.schema_version);
    let _ = writeln!(s, "analysis: {}", doc.analysis.name());
    let _ = writeln!(s, "seed: {}", doc.seed);
    match &doc.result {
        AnalysisResult::Theorem(t) => {
            let k = &t.constants;
            let _ = writeln!(s, "constants: mu={} lambda1={} lambda2={}", k.mu, k.lambda1, k.lambda2);
            let _ = writeln!(s, "residual: {:.3e} (tolerance {:.1e})", t.residual.value, t.residual.tolerance);
            for m in &t.margins {
                let _ = writeln!(s, "margin {}: {:.9} ({:?})", m.name, m.value, m.status);
            }
            let _ = writeln!(s, "delta: {:.9}", t.delta);
            let _ = writeln!(s, "predicted bounds: [{:.9}, {:.9}]", t.predicted_lower, t.predicted_upper);
            if let Some(e) = &t.actual_lower {
                let _ = writeln!(s, "actual lower: {}", fmt_est(e));
            }
            if let Some(e) = &t.actual_upper {
                let _ = writeln!(s, "actual upper: {}", fmt_est(e));
            }
            for c in &t.checks {
                let _ = writeln!(s, "check {}: {:.9} vs {:.9} ({:?})", c.name, c.value, c.limit, c.status);
            }
            for sub in &t.sub_reports {
                let _ = writeln!(s, "sub-report {:?}: {}", sub.theorem_id, verdict_name(sub.verdict));
            }
            for n in &t.notes {
                let _ = writeln!(s, "note: {n}");
            }
            let _ = writeln!(s, "verdict: {}", verdict_name(t.verdict));
        }
        AnalysisResult::Equivalence(e) => {
            let _ = writeln!(s, "source {}: residual {:.3e}, holds: {}", e.source.condition, e.source.residual, e.source.holds);
            if let Some(t) = &e.target {
                let _ = writeln!(s, "target {} via {:?}: residual {:.3e}, holds: {}", t.condition, e.method, t.residual, t.holds);
            }
            let _ = writeln!(s, "status: {:?}", e.status);
        }
        AnalysisResult::MuThreshold(m) => {
            let _ = writeln!(s, "A={:.9} B={:.9} mu*={:.9}", m.lower_a, m.upper_b, m.mu_star);
            let _ = writeln!(s, "threshold margin: {:.9} ({:?})", m.threshold.value, m.threshold.status);
            let _ = writeln!(s, "predicted lower: {}", fmt_opt(m.predicted_lower));
            if let Some(e) = &m.actual_lower {
                let _ = writeln!(s, "actual lower: {}", fmt_est(e));
            }
            let _ = writeln!(s, "verdict: {}", verdict_name(m.verdict));
        }
        AnalysisResult::FrameBounds(b) => {
            let _ = writeln!(s, "lower: {}", fmt_est(&b.lower));
            let _ = writeln!(s, "upper: {}", fmt_est(&b.upper));
            if let Some(p) = &b.perturbed {
                let _ = writeln!(s, "perturbed lower: {}", fmt_est(&p.lower));
                let _ = writeln!(s, "perturbed upper: {}", fmt_est(&p.upper));
            }
        }
        AnalysisResult::Neumann(n) => {
            match &n.certificate {
                Some(c) => {
                    let _ = writeln!(s, "lambda1={:.9} lambda2={:.9} ({})", c.lambda1, c.lambda2, c.source);
                    let _ = writeln!(s, "inverse ratio bracket: [{:.9}, {:.9}]", c.inverse_lower, c.inverse_upper);
                }
                None => {
                    let _ = writeln!(s, "no contractive pair found");
                }
            }
            if let (Some(lo), Some(hi)) = (&n.inverse_lower, &n.inverse_norm) {
                let _ = writeln!(s, "inverse ratio range: [{:.9}, {:.9}]", lo.value, hi.value);
            }
        }
        AnalysisResult::Residual(r) => {
            let _ = writeln!(s, "residual: {:.9e} (tolerance {:.1e}, holds: {})", r.residual, r.tolerance, r.holds);
        }
        AnalysisResult::MinimalMu(m) => {
            let _ = writeln!(s, "minimal mu at lambda1={} lambda2={}: {:.9}", m.lambda1, m.lambda2, m.minimal_mu);
        }
        AnalysisResult::Sweep(sw) => {
            let _ = writeln!(s, "sweep of {:?} over {} steps ({})", sw.parameter, sw.rows.len(), sw.analysis.name());
            for r in &sw.rows {
                let _ = writeln!(
                    s,
                    "{:.6}: predicted [{}, {}] actual [{}, {}] {}",
                    r.param,
                    fmt_opt(r.pred_lower),
                    fmt_opt(r.pred_upper),
                    fmt_opt(r.act_lower),
                    fmt_opt(r.act_upper),
                    r.verdict
                );
            }
        }
    }
    if let Some(o) = &doc.oracle {
        for e in &o.entries {
            let _ = writeln!(
                s,
                "oracle {}: {:.9} (gap <= {:.3e}, {} points)",
                e.name, e.value.value, e.value.gap_bound, e.value.points
            );
        }
        for k in &o.skipped {
            let _ = writeln!(s, "oracle skipped: {k}");
        }
    }
    s
}

pub fn sweep_csv(sweep: &SweepResult) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["param", "pred_lower", "pred_upper", "act_lower", "act_upper", "verdict"])
        .map_err(|e| e.to_string())?;
    let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in &sweep.rows {
        w.write_record([
            format!("{}", r.param),
            cell(r.pred_lower),
            cell(r.pred_upper),
            cell(r.act_lower),
            cell(r.act_upper),
            r.verdict.clone(),
        ])
        .map_err(|e| e.to_string())?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

const SERIES: [(&str, &str, bool); 4] = [
    ("pred_lower", "#1f77b4", true),
    ("pred_upper", "#1f77b4", true),
    ("act_lower", "#d62728", false),
    ("act_upper", "#d62728", false),
];

/// Line plot of predicted (dashed) and actual (solid) bounds.
pub fn render_svg(sweep: &SweepResult) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let series: Vec<Vec<(f64, f64)>> = (0..4)
        .map(|k| {
            sweep
                .rows
                .iter()
                .filter_map(|r| {
                    let v = [r.pred_lower, r.pred_upper, r.act_lower, r.act_upper][k]?;
                    v.is_finite().then_some((r.param, v))
                })
                .collect()
        })
        .collect();
    let pts = series.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{:?}</text>"#, w / 2.0, h - 15.0, sweep.parameter);
    let _ = writeln!(s, r#"<text x="5" y="{}" font-size="11">{y1:.4}</text>"#, pad);
    let _ = writeln!(s, r#"<text x="5" y="{}" font-size="11">{y0:.4}</text>"#, h - pad);
    let _ = writeln!(s, r#"<text x="{pad}" y="{}" font-size="11">{x0:.4}</text>"#, h - pad + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{x1:.4}</text>"#, w - pad, h - pad + 15.0);
    for (pts, (name, color, dashed)) in series.iter().zip(SERIES) {
        if pts.is_empty() {
            continue;
        }
        let d: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| format!("{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, sx(x), sy(y)))
            .collect();
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}><title>{name}</title></path>"#,
            d.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::{Analysis, SweepParameter, SweepRow};

    fn sample() -> SweepResult {
        let row = |i: usize, v: Option<f64>| SweepRow {
            step: i,
            param: i as f64 * 0.1,
            constants: None,
            pred_lower: v,
            pred_upper: v.map(|x| x + 1.0),
            act_lower: v,
            act_upper: v,
            verdict: if v.is_some() { "verified".into() } else { "error".into() },
            error: None,
        };
        SweepResult {
            analysis: Analysis::Frame,
            parameter: SweepParameter::Mu,
            match_mu: false,
            rows: vec![row(0, Some(1.0)), row(1, None)],
        }
    }

    #[test]
    fn csv_has_fixed_header_and_blank_cells() {
        let text = sweep_csv(&sample()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("param,pred_lower,pred_upper,act_lower,act_upper,verdict"));
        assert_eq!(lines.next(), Some("0,1,2,1,1,verified"));
        assert_eq!(lines.next(), Some("0.1,,,,,error"));
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = render_svg(&sample());
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 1 + 4);
    }
}
