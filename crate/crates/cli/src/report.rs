//! SVG figures and the Markdown report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context};
use serde::Deserialize;

use socialsim_core::harness::{read_csv, LoadAuditRow, ShareRow};
use socialsim_core::model::{LoadCondition, NormRegime};

use crate::{require, runtime, usage, CmdResult, PredictionRow, StageSummary};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

const ACTION_COLORS: [(&str, &str); 4] =
    [("read", "#b0b7c3"), ("like", "#e4572e"), ("repost", "#17bebb"), ("quote", "#ffc914")];
const LOAD_COLORS: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];

fn norm_dash(norm: NormRegime) -> &'static str {
    match norm {
        NormRegime::NoNorm => "",
        NormRegime::LikeDominant => " stroke-dasharray=\"8 4\"",
        NormRegime::RepostDominant => " stroke-dasharray=\"2 3\"",
    }
}

fn load_color(load: LoadCondition) -> &'static str {
    LOAD_COLORS[LoadCondition::ALL.iter().position(|l| *l == load).unwrap_or(0)]
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{title}</text>", WIDTH / 2.0);
    s
}

/// Stacked action shares, one bar per cell. Each bar spans the full plot
/// height when its shares sum to one.
pub(crate) fn shares_svg(rows: &[ShareRow]) -> String {
    let mut s = svg_open("Action shares by condition");
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let slot = (WIDTH - 2.0 * MARGIN - 110.0) / rows.len().max(1) as f64;
    let bar_w = slot * 0.7;
    let base = HEIGHT - MARGIN;
    for (i, r) in rows.iter().enumerate() {
        let x = MARGIN + i as f64 * slot + (slot - bar_w) / 2.0;
        let mut y = base;
        let _ = writeln!(s, "<g class=\"bar\" data-load=\"{}\" data-norm=\"{}\">", r.load, r.norm);
        for ((name, color), share) in ACTION_COLORS.iter().zip(r.shares()) {
            let h = if share.is_finite() { share * plot_h } else { 0.0 };
            y -= h;
            let _ = writeln!(
                s,
                "<rect class=\"seg\" data-action=\"{name}\" x=\"{x:.2}\" y=\"{y:.4}\" width=\"{bar_w:.2}\" height=\"{h:.4}\" fill=\"{color}\"/>"
            );
        }
        let _ = writeln!(s, "</g>");
        let cx = x + bar_w / 2.0;
        let _ = writeln!(
            s,
            "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"end\" transform=\"rotate(-45 {cx:.1} {:.1})\">{}/{}</text>",
            base + 14.0,
            base + 14.0,
            r.load,
            r.norm
        );
    }
    axis_y(&mut s, "share");
    let lx = WIDTH - MARGIN - 90.0;
    for (i, (name, color)) in ACTION_COLORS.iter().enumerate() {
        let y = MARGIN + i as f64 * 18.0;
        let _ = writeln!(s, "<rect x=\"{lx}\" y=\"{y}\" width=\"12\" height=\"12\" fill=\"{color}\"/>");
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">{name}</text>", lx + 18.0, y + 10.0);
    }
    s.push_str("</svg>\n");
    s
}

fn axis_y(s: &mut String, label: &str) {
    let base = HEIGHT - MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let _ = writeln!(s, "<line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{base}\" stroke=\"black\"/>");
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let y = base - v * plot_h;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{v:.2}</text>", MARGIN - 6.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.1}\" transform=\"rotate(-90 16 {:.1})\" text-anchor=\"middle\">{label}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
}

/// One curve per (load, norm) cell of the predicted probability of
/// `outcome` over the popularity composite, with a shaded 95% band.
pub(crate) fn curves_svg(rows: &[PredictionRow], outcome: &str, title: &str) -> anyhow::Result<String> {
    let mut cells: BTreeMap<(LoadCondition, NormRegime), Vec<&PredictionRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.outcome == outcome) {
        let load: LoadCondition = r.load.parse()?;
        let norm: NormRegime = r.norm.parse()?;
        cells.entry((load, norm)).or_default().push(r);
    }
    if cells.is_empty() {
        return Err(anyhow!("no predictions for outcome `{outcome}`"));
    }
    let (xmin, xmax) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.composite), hi.max(r.composite)));
    let span = if xmax > xmin { xmax - xmin } else { 1.0 };
    let plot_w = WIDTH - 2.0 * MARGIN - 150.0;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let base = HEIGHT - MARGIN;
    let px = |x: f64| MARGIN + (x - xmin) / span * plot_w;
    let py = |p: f64| base - p.clamp(0.0, 1.0) * plot_h;

    let mut s = svg_open(title);
    for ((load, norm), pts) in cells.iter_mut() {
        pts.sort_by(|a, b| a.composite.total_cmp(&b.composite));
        let color = load_color(*load);
        let band: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r.composite), py(r.upper)))
            .chain(pts.iter().rev().map(|r| format!("{:.2},{:.2}", px(r.composite), py(r.lower))))
            .collect();
        let _ = writeln!(s, "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.08\" stroke=\"none\"/>", band.join(" "));
        let line: Vec<String> = pts.iter().map(|r| format!("{:.2},{:.2}", px(r.composite), py(r.p))).collect();
        let _ = writeln!(
            s,
            "<polyline data-load=\"{load}\" data-norm=\"{norm}\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"{}/>",
            line.join(" "),
            norm_dash(*norm)
        );
    }
    axis_y(&mut s, &format!("P({outcome})"));
    let _ = writeln!(s, "<line x1=\"{MARGIN}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"black\"/>", MARGIN + plot_w);
    for i in 0..=4 {
        let v = xmin + span * i as f64 / 4.0;
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{v:.2}</text>", px(v), base + 16.0);
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">popularity composite ln(1 + likes + reshares)</text>",
        MARGIN + plot_w / 2.0,
        base + 34.0
    );
    let lx = WIDTH - MARGIN - 130.0;
    for (i, load) in LoadCondition::ALL.iter().enumerate() {
        let y = MARGIN + i as f64 * 16.0;
        let _ = writeln!(s, "<line x1=\"{lx}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{}\" stroke-width=\"2\"/>", lx + 20.0, load_color(*load));
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">load {load}</text>", lx + 26.0, y + 4.0);
    }
    for (i, norm) in NormRegime::ALL.iter().enumerate() {
        let y = MARGIN + 80.0 + i as f64 * 16.0;
        let _ = writeln!(s, "<line x1=\"{lx}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"black\"{}/>", lx + 20.0, norm_dash(*norm));
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">norm {norm}</text>", lx + 26.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[derive(Deserialize)]
struct CoefRow {
    term: String,
    #[serde(rename = "B")]
    b: Option<f64>,
    #[serde(rename = "SE")]
    se: Option<f64>,
    #[serde(rename = "OR")]
    or: Option<f64>,
    p: Option<f64>,
}

fn fmt_num(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.digits$}"),
        _ => "n/a".into(),
    }
}

fn fmt_p(p: Option<f64>) -> String {
    match p {
        Some(x) if x.is_finite() && x < 0.001 => "< .001".into(),
        other => fmt_num(other, 3),
    }
}

fn coefficient_table(md: &mut String, rows: &[CoefRow]) {
    let _ = writeln!(md, "| Term | B | SE | OR | p |\n|---|---:|---:|---:|---:|");
    for r in rows {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            r.term,
            fmt_num(r.b, 3),
            fmt_num(r.se, 3),
            fmt_num(r.or, 3),
            fmt_p(r.p)
        );
    }
    md.push('\n');
}

fn summary_table(md: &mut String, name: &str, s: &StageSummary) {
    let _ = writeln!(
        md,
        "{name}: n = {}, LL = {:.2}, null LL = {:.2}, LR chi2({}) = {:.2}, McFadden R2 = {:.3}, AIC = {:.1}, converged = {}\n",
        s.n_obs, s.ll_full, s.ll_null, s.df, s.lr_chi2, s.mcfadden_r2, s.aic, s.converged
    );
    for d in &s.diagnostics {
        let _ = writeln!(md, "- note: {d}");
    }
    if !s.diagnostics.is_empty() {
        md.push('\n');
    }
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("write {}", path.display()))
}

pub(crate) fn run(analysis: &Path, out: &Path) -> CmdResult {
    if !analysis.is_dir() {
        return Err(usage(anyhow!("analysis directory {} does not exist", analysis.display())));
    }
    build(analysis, out).map_err(runtime)
}

fn build(analysis: &Path, out: &Path) -> anyhow::Result<()> {
    let shares_path = require(analysis, "descriptive_shares.csv")?;
    let audit_path = require(analysis, "load_audit.csv")?;
    let metrics_path = require(analysis, "fit_metrics.json")?;
    let summaries: BTreeMap<String, StageSummary> = serde_json::from_str(
        &std::fs::read_to_string(&metrics_path).with_context(|| format!("read {}", metrics_path.display()))?,
    )
    .with_context(|| format!("parse {}", metrics_path.display()))?;
    let mut stages = Vec::new();
    for stage in ["threshold", "allocation"] {
        if summaries.contains_key(stage) {
            let coefs = require(analysis, &format!("{stage}_coefficients.csv"))?;
            let preds = require(analysis, &format!("{stage}_predictions.csv"))?;
            stages.push((stage, coefs, preds));
        }
    }
    if stages.is_empty() {
        return Err(anyhow!("{} lists no fitted stage", metrics_path.display()));
    }

    std::fs::create_dir_all(out).with_context(|| format!("create {}", out.display()))?;
    let shares: Vec<ShareRow> = read_csv(&shares_path)?;
    let audit: Vec<LoadAuditRow> = read_csv(&audit_path)?;
    write(&out.join("action_shares.svg"), &shares_svg(&shares))?;

    let mut md = String::from("# Engagement experiment report\n\n");
    md.push_str("## Observed behavior\n\n![Action shares by condition](action_shares.svg)\n\n");
    md.push_str("| Load | Norm | Records | Read | Like | Repost | Quote |\n|---|---|---:|---:|---:|---:|---:|\n");
    for r in &shares {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.load,
            r.norm,
            r.records,
            fmt_num(Some(r.read), 3),
            fmt_num(Some(r.like), 3),
            fmt_num(Some(r.repost), 4),
            fmt_num(Some(r.quote), 4)
        );
    }
    md.push_str("\n## Realized load\n\n| Load | Norm | Target | Activations | Mean | Min | Max |\n|---|---|---:|---:|---:|---:|---:|\n");
    for r in &audit {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.load,
            r.norm,
            r.target,
            r.activations,
            fmt_num(Some(r.mean), 2),
            r.min.map_or("n/a".into(), |v| v.to_string()),
            r.max.map_or("n/a".into(), |v| v.to_string())
        );
    }
    md.push('\n');

    for (stage, coefs_path, preds_path) in stages {
        let coefs: Vec<CoefRow> = read_csv_any(&coefs_path)?;
        let preds: Vec<PredictionRow> = read_csv_any(&preds_path)?;
        let summary = &summaries[stage];
        if stage == "threshold" {
            md.push_str("## Participation threshold (engage vs. read)\n\n");
            summary_table(&mut md, "Model fit", summary);
            let svg = curves_svg(&preds, "engage", "Predicted probability of engaging")?;
            write(&out.join("threshold_curves.svg"), &svg)?;
            md.push_str("![Predicted engagement probability](threshold_curves.svg)\n\n");
            coefficient_table(&mut md, &coefs);
        } else {
            md.push_str("## Engagement allocation (reference: like)\n\n");
            summary_table(&mut md, "Model fit", summary);
            for outcome in ["like", "repost", "quote"] {
                let file = format!("allocation_{outcome}_curves.svg");
                let svg = curves_svg(&preds, outcome, &format!("Predicted probability of {outcome}, given engagement"))?;
                write(&out.join(&file), &svg)?;
                let _ = writeln!(md, "![Predicted {outcome} probability]({file})\n");
            }
            coefficient_table(&mut md, &coefs);
        }
    }
    write(&out.join("report.md"), &md)?;
    log::info!("report written to {}", out.display());
    Ok(())
}

fn read_csv_any<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    read_csv(path).with_context(|| format!("read {}", path.display()))
}
