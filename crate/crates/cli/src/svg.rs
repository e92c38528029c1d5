//! Static SVG plots drawn from the bench CSV tables. Nothing here touches
//! the library's science; every figure is a function of one CSV file.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use mislabel::pipeline::{BOXPLOT_CSV, MINORITY_CSV, SCATTER_CSV};
use mislabel::{Error, Result};

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 90.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| {
            if hi - lo > 1e-12 {
                (lo, hi)
            } else {
                (lo - 1.0, hi + 1.0)
            }
        };
        Self {
            x: widen(x),
            y: widen(y),
        }
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn padded(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = (hi - lo).max(1e-9) * 0.05;
    (lo - pad, hi + pad)
}

fn ticks((lo, hi): (f64, f64)) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(t);
        t += step;
    }
    out
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (W - RIGHT + LEFT) / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str, xticks: bool) {
    let (x0, x1, y0, y1) = (f.px(f.x.0), f.px(f.x.1), f.py(f.y.0), f.py(f.y.1));
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for t in ticks(f.y) {
        let y = f.py(t);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/>"#,
            x0 - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y + 4.0,
            fmt_num(t)
        );
    }
    if xticks {
        for t in ticks(f.x) {
            let x = f.px(t);
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{y0}" x2="{x}" y2="{}" stroke="black"/>"#,
                y0 + 4.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
                y0 + 16.0,
                fmt_num(t)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 20.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn legend(s: &mut String, entries: &[(String, &str)]) {
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = TOP + 14.0 * i as f64;
        let x = W - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/>"#,
            y - 9.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, escape(name));
    }
}

fn dashed(s: &mut String, f: &Frame, (ax, ay): (f64, f64), (bx, by): (f64, f64)) {
    let _ = writeln!(
        s,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 3"/>"#,
        f.px(ax),
        f.py(ay),
        f.px(bx),
        f.py(by)
    );
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        let headers = r
            .headers()
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        Ok(Self { headers, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("missing column `{name}`")))
    }
}

fn num(cell: &str) -> Option<f64> {
    cell.parse().ok().filter(|v: &f64| v.is_finite())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Boxes of normalized scores per detector and variant, with the silver
/// (100) and unfiltered (200) levels dashed.
pub fn boxplot(table_csv: &Path) -> Result<String> {
    let t = Table::read(table_csv)?;
    let (cd, cv, cs) = (t.col("detector")?, t.col("variant")?, t.col("normalized_score")?);
    let mut groups: Vec<((String, String), Vec<f64>)> = Vec::new();
    for r in &t.rows {
        let Some(v) = num(&r[cs]) else { continue };
        let key = (r[cd].clone(), r[cv].clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, vals)) => vals.push(v),
            None => groups.push((key, vec![v])),
        }
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    for (_, vals) in &mut groups {
        vals.sort_by(f64::total_cmp);
    }
    let mut variants: Vec<&str> = groups.iter().map(|((_, v), _)| v.as_str()).collect();
    variants.sort_unstable();
    variants.dedup();

    let n = groups.len().max(1) as f64;
    let f = Frame::new(
        (0.0, n),
        padded(groups.iter().flat_map(|(_, v)| v.iter().copied()).chain([100.0, 200.0])),
    );
    let mut s = open("Normalized test loss (lower is better)");
    axes(&mut s, &f, "detector / variant", "normalized score", false);
    dashed(&mut s, &f, (0.0, 100.0), (n, 100.0));
    dashed(&mut s, &f, (0.0, 200.0), (n, 200.0));
    for (i, ((det, var), vals)) in groups.iter().enumerate() {
        let color = PALETTE[variants.iter().position(|v| v == var).unwrap_or(0) % PALETTE.len()];
        let (xl, xc, xr) = (f.px(i as f64 + 0.2), f.px(i as f64 + 0.5), f.px(i as f64 + 0.8));
        let (q1, med, q3) = (quantile(vals, 0.25), quantile(vals, 0.5), quantile(vals, 0.75));
        let (lo, hi) = (vals[0], vals[vals.len() - 1]);
        let _ = writeln!(
            s,
            r#"<line x1="{xc}" y1="{}" x2="{xc}" y2="{}" stroke="black"/>"#,
            f.py(lo),
            f.py(hi)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{xl}" y="{}" width="{}" height="{}" fill="{color}" fill-opacity="0.5" stroke="black"/>"#,
            f.py(q3),
            xr - xl,
            (f.py(q1) - f.py(q3)).max(0.5)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{xl}" y1="{0}" x2="{xr}" y2="{0}" stroke="black" stroke-width="2"/>"#,
            f.py(med)
        );
        let ly = H - BOTTOM + 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{xc}" y="{ly}" text-anchor="end" transform="rotate(-45 {xc} {ly})">{}</text>"#,
            escape(&format!("{det} {var}"))
        );
    }
    let entries: Vec<(String, &str)> = variants
        .iter()
        .enumerate()
        .map(|(i, v)| (v.to_string(), PALETTE[i % PALETTE.len()]))
        .collect();
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Mean minority-removal curve per detector and variant.
pub fn minority_curve(table_csv: &Path) -> Result<String> {
    let t = Table::read(table_csv)?;
    let (cd, cv) = (t.col("detector")?, t.col("variant")?);
    let (cx, cy) = (t.col("fraction_removed")?, t.col("minority_fraction_removed")?);
    // (detector, variant) -> x bits -> (sum, count)
    let mut curves: BTreeMap<(String, String), BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    for r in &t.rows {
        let (Some(x), Some(y)) = (num(&r[cx]), num(&r[cy])) else {
            continue;
        };
        let e = curves
            .entry((r[cd].clone(), r[cv].clone()))
            .or_default()
            .entry(x.to_bits())
            .or_insert((0.0, 0));
        e.0 += y;
        e.1 += 1;
    }
    let f = Frame::new((0.0, 1.0), (0.0, 1.0));
    let mut s = open("Minority examples removed");
    axes(
        &mut s,
        &f,
        "fraction of training set removed",
        "fraction of minority removed",
        true,
    );
    dashed(&mut s, &f, (0.0, 0.0), (1.0, 1.0));
    let mut entries = Vec::new();
    for (i, ((det, var), pts)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<(f64, f64)> = pts
            .iter()
            .map(|(b, (sum, k))| (f64::from_bits(*b), sum / *k as f64))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y)))
            .collect();
        let dash = if var.starts_with("baseline") {
            ""
        } else {
            r#" stroke-dasharray="6 3""#
        };
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            path.join(" ")
        );
        entries.push((format!("{det} {var}"), color));
    }
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Paired normalized scores of two variant columns, one point per
/// (task, repeat, detector).
pub fn scatter(table_csv: &Path, x_col: &str, y_col: &str) -> Result<String> {
    let t = Table::read(table_csv)?;
    let (cd, cx, cy) = (t.col("detector")?, t.col(x_col)?, t.col(y_col)?);
    let pts: Vec<(&str, f64, f64)> = t
        .rows
        .iter()
        .filter_map(|r| Some((r[cd].as_str(), num(&r[cx])?, num(&r[cy])?)))
        .collect();
    let mut detectors: Vec<&str> = pts.iter().map(|p| p.0).collect();
    detectors.sort_unstable();
    detectors.dedup();
    let range = padded(pts.iter().flat_map(|p| [p.1, p.2]));
    let f = Frame::new(range, range);
    let mut s = open(&format!("{y_col} vs {x_col}"));
    axes(&mut s, &f, x_col, y_col, true);
    dashed(&mut s, &f, (f.x.0, f.x.0), (f.x.1, f.x.1));
    for (det, x, y) in &pts {
        let color = PALETTE[detectors.iter().position(|d| d == det).unwrap_or(0) % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}" fill-opacity="0.7"/>"#,
            f.px(*x),
            f.py(*y)
        );
    }
    let entries: Vec<(String, &str)> = detectors
        .iter()
        .enumerate()
        .map(|(i, d)| (d.to_string(), PALETTE[i % PALETTE.len()]))
        .collect();
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Scatter panels worth drawing: baseline against every other column, and
/// isotonic against sigmoid.
fn scatter_pairs(columns: &[String]) -> Vec<(String, String)> {
    let has = |c: &str| columns.iter().any(|h| h == c);
    let mut pairs = Vec::new();
    if has("baseline") {
        for c in columns.iter().filter(|c| *c != "baseline") {
            pairs.push(("baseline".to_string(), c.clone()));
        }
    }
    if has("isotonic") && has("sigmoid") {
        pairs.push(("isotonic".into(), "sigmoid".into()));
    }
    pairs
}

/// Redraws every plot whose source CSV exists in `dir`.
pub fn render_all(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut emit = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    let boxes = dir.join(BOXPLOT_CSV);
    if boxes.exists() {
        emit("boxplot.svg".into(), boxplot(&boxes)?)?;
    }
    let curves = dir.join(MINORITY_CSV);
    if curves.exists() {
        emit("minority_curve.svg".into(), minority_curve(&curves)?)?;
    }
    let sc = dir.join(SCATTER_CSV);
    if sc.exists() {
        let t = Table::read(&sc)?;
        let columns: Vec<String> = t.headers.iter().skip(3).cloned().collect();
        for (x, y) in scatter_pairs(&columns) {
            emit(format!("scatter_{x}_vs_{y}.svg"), scatter(&sc, &x, &y)?)?;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        let t = ticks((0.0, 1.0));
        assert_eq!(t.first().copied(), Some(0.0));
        assert!((t.last().unwrap() - 1.0).abs() < 1e-12);
        assert!(ticks((93.0, 212.0)).iter().all(|v| (93.0..=212.0).contains(v)));
    }

    #[test]
    fn quartiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }

    #[test]
    fn pairs_include_method_comparison() {
        let cols: Vec<String> = ["baseline", "adjust", "isotonic", "sigmoid"].map(String::from).to_vec();
        let p = scatter_pairs(&cols);
        assert_eq!(p.len(), 4);
        assert_eq!(p[3], ("isotonic".into(), "sigmoid".into()));
    }

    #[test]
    fn plot_is_a_function_of_the_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scatter.csv");
        std::fs::write(
            &p,
            "task,repeat,detector,baseline,isotonic\nt,0,aum,150,120\nt,0,cleanlab,170,\n",
        )
        .unwrap();
        let a = scatter(&p, "baseline", "isotonic").unwrap();
        let b = scatter(&p, "baseline", "isotonic").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<circle").count(), 1);
    }
}
