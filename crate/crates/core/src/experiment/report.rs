//! Summary tables, CSV output and the MSE-vs-K chart.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::SweepResult;
use crate::error::{Error, Result};
use crate::selection::SelectionMethod;

/// 17 significant digits, enough to read back the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxStats {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(BoxStats {
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSummary {
    pub k: usize,
    pub count: usize,
    pub mean: f64,
    pub stats: BoxStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: SelectionMethod,
    pub count: usize,
    pub mean_mse: f64,
    pub mse: BoxStats,
    pub chosen_k: BoxStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub by_k: Vec<KSummary>,
    pub methods: Vec<MethodSummary>,
}

impl Summary {
    /// K with the largest median MSE; the first one on ties.
    pub fn peak_k(&self) -> Option<usize> {
        let mut best: Option<&KSummary> = None;
        for s in &self.by_k {
            if best.is_none_or(|b| s.stats.median > b.stats.median) {
                best = Some(s);
            }
        }
        best.map(|s| s.k)
    }

    pub fn median_at(&self, k: usize) -> Option<f64> {
        self.by_k.iter().find(|s| s.k == k).map(|s| s.stats.median)
    }

    pub fn method(&self, m: SelectionMethod) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

pub fn summarize(result: &SweepResult) -> Summary {
    let by_k = result
        .k_grid
        .iter()
        .filter_map(|&k| {
            let v = result.mse_at(k);
            Some(KSummary {
                k,
                count: v.len(),
                mean: mean(&v),
                stats: BoxStats::of(&v)?,
            })
        })
        .collect();
    let mut kinds: Vec<SelectionMethod> = result.methods.iter().map(|r| r.method).collect();
    kinds.sort_unstable();
    kinds.dedup();
    let methods = kinds
        .into_iter()
        .filter_map(|m| {
            let recs = result.method_records(m);
            let mse: Vec<f64> = recs.iter().map(|r| r.mse).collect();
            let ks: Vec<f64> = recs.iter().map(|r| r.chosen_k as f64).collect();
            Some(MethodSummary {
                method: m,
                count: recs.len(),
                mean_mse: mean(&mse),
                mse: BoxStats::of(&mse)?,
                chosen_k: BoxStats::of(&ks)?,
            })
        })
        .collect();
    Summary { by_k, methods }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub records: PathBuf,
    pub methods: PathBuf,
    pub summary: PathBuf,
    pub curve: PathBuf,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn stats_cells(s: &BoxStats) -> String {
    [s.median, s.q1, s.q3, s.min, s.max]
        .iter()
        .map(|v| format_float(*v))
        .collect::<Vec<_>>()
        .join(",")
}

/// Writes `records.csv`, `methods.csv`, `summary.csv` and `curve.svg`.
///
/// `summary.csv` stacks three tables distinguished by the `table` column:
/// `mse_by_k` (keyed by K), `method_mse` and `chosen_k` (keyed by method).
pub fn emit_outputs(result: &SweepResult, summary: &Summary, out_dir: &Path) -> Result<OutputFiles> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = OutputFiles {
        records: out_dir.join("records.csv"),
        methods: out_dir.join("methods.csv"),
        summary: out_dir.join("summary.csv"),
        curve: out_dir.join("curve.svg"),
    };

    let mut text = String::from("replicate,K,mse\n");
    for r in &result.records {
        writeln!(text, "{},{},{}", r.replicate, r.k, format_float(r.mse)).unwrap();
    }
    write(&files.records, &text)?;

    let mut text = String::from("replicate,method,chosen_K,mse\n");
    for r in &result.methods {
        writeln!(text, "{},{},{},{}", r.replicate, r.method, r.chosen_k, format_float(r.mse)).unwrap();
    }
    write(&files.methods, &text)?;

    let mut text = String::from("table,key,count,mean,median,q1,q3,min,max\n");
    for s in &summary.by_k {
        writeln!(
            text,
            "mse_by_k,{},{},{},{}",
            s.k,
            s.count,
            format_float(s.mean),
            stats_cells(&s.stats)
        )
        .unwrap();
    }
    for s in &summary.methods {
        writeln!(
            text,
            "method_mse,{},{},{},{}",
            s.method,
            s.count,
            format_float(s.mean_mse),
            stats_cells(&s.mse)
        )
        .unwrap();
    }
    for s in &summary.methods {
        let ks: Vec<f64> = result.method_records(s.method).iter().map(|r| r.chosen_k as f64).collect();
        writeln!(
            text,
            "chosen_k,{},{},{},{}",
            s.method,
            s.count,
            format_float(mean(&ks)),
            stats_cells(&s.chosen_k)
        )
        .unwrap();
    }
    write(&files.summary, &text)?;

    write(&files.curve, &render_svg(result, summary))?;
    Ok(files)
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// Line chart of log10 median and mean MSE against K.
pub fn render_svg(result: &SweepResult, summary: &Summary) -> String {
    let series: [(&str, &str, Vec<(usize, f64)>); 2] = [
        (
            "median",
            "#1f4e9c",
            summary.by_k.iter().map(|s| (s.k, s.stats.median)).collect(),
        ),
        ("mean", "#c0392b", summary.by_k.iter().map(|s| (s.k, s.mean)).collect()),
    ];
    let floor = series
        .iter()
        .flat_map(|s| s.2.iter().map(|p| p.1))
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1.0 };
    let log = |v: f64| v.max(floor).log10();

    let (k_lo, k_hi) = match (result.k_grid.first(), result.k_grid.last()) {
        (Some(&a), Some(&b)) => (a as f64, (b as f64).max(a as f64 + 1.0)),
        _ => (0.0, 1.0),
    };
    let ys = series.iter().flat_map(|s| s.2.iter().map(|p| log(p.1)));
    let (mut y_lo, mut y_hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    y_lo = y_lo.floor();
    y_hi = y_hi.ceil().max(y_lo + 1.0);

    let px = |k: f64| LEFT + (k - k_lo) / (k_hi - k_lo) * (WIDTH - LEFT - RIGHT);
    let py = |y: f64| HEIGHT - BOTTOM - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - TOP - BOTTOM);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}: test MSE vs K</text>"#,
        WIDTH / 2.0,
        escape(&result.label)
    )
    .unwrap();

    let (x0, x1, y0, y1) = (px(k_lo), px(k_hi), py(y_lo), py(y_hi));
    writeln!(
        svg,
        r#"<path d="M{x0:.1},{y1:.1} V{y0:.1} H{x1:.1}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for e in (y_lo as i64)..=(y_hi as i64) {
        let y = py(e as f64);
        writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0
        )
        .unwrap();
    }
    for k in x_ticks(k_lo as usize, k_hi as usize) {
        let x = px(k as f64);
        writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{k}</text>"#,
            y0 + 5.0,
            y0 + 18.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">K</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 10.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">log10 MSE</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )
    .unwrap();

    let mk = result.marker.k as f64;
    if mk >= k_lo && mk <= k_hi {
        let x = px(mk);
        writeln!(
            svg,
            r#"<line class="marker" x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{y1:.1}" stroke="gray" stroke-dasharray="5,4"/><text x="{:.1}" y="{:.1}" fill="gray">{}</text>"#,
            x + 4.0,
            y1 + 12.0,
            escape(&result.marker.label)
        )
        .unwrap();
    }

    for (i, (name, color, points)) in series.iter().enumerate() {
        let pts: Vec<String> = points
            .iter()
            .map(|(k, v)| format!("{:.2},{:.2}", px(*k as f64), py(log(*v))))
            .collect();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"><title>{name}</title></polyline>"#,
            pts.join(" ")
        )
        .unwrap();
        let ly = TOP + 6.0 + 16.0 * i as f64;
        writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="1.8"/><text x="{:.1}" y="{:.1}">{name}</text>"#,
            x1 - 90.0,
            x1 - 65.0,
            x1 - 60.0,
            ly + 4.0
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn x_ticks(lo: usize, hi: usize) -> Vec<usize> {
    let span = hi.saturating_sub(lo).max(1);
    let step = [1, 2, 5, 10, 20, 25, 50, 100]
        .into_iter()
        .find(|s| span / s <= 10)
        .unwrap_or(200);
    let start = lo.div_ceil(step) * step;
    (start..=hi).step_by(step).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
