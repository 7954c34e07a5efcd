//! Output plumbing: atomic file writes, CSV and JSON emission, two-column
//! plot data with optional SVG rendering, and run manifests.
//!
//! Every writer is byte-stable under identical input: floats print through
//! Rust's shortest round-trip formatting and field orders are fixed.

use crate::covering::{BallTag, DecayReport, DyadicBallFamily};
use crate::curve::SliceOutcome;
use crate::exponent::ExponentEstimate;
use crate::measure::FractionPoint;
use crate::Result;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Write via a temp file in the same directory, then rename into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension("tmp-partial");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn exponent_csv(estimates: &[ExponentEstimate]) -> String {
    let mut s = String::from("kind,n,qmax,running_sup,tail_sup,tail_inf_uniform,rational_flag,n_records\n");
    for e in estimates {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            e.kind.as_str(),
            e.dimension,
            e.qmax,
            fmt_f64(e.running_sup),
            fmt_f64(e.tail_sup),
            fmt_opt(e.tail_inf_uniform),
            e.rational_flag,
            e.records.len()
        ));
    }
    s
}

pub fn cover_balls_csv(families: &[DyadicBallFamily]) -> String {
    let mut s = String::from("t,q,p,tag,trace_measure,lemma1_upper,lemma1_lower\n");
    for fam in families {
        for b in &fam.balls {
            let p = b.ball.p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
            let tag = match b.tag {
                BallTag::Disjoint => "disjoint",
                BallTag::NonDisjoint => "non-disjoint",
            };
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fam.t,
                b.ball.q,
                p,
                tag,
                fmt_f64(b.measure_eps),
                fmt_f64(b.bounds_audit.upper),
                fmt_opt(b.bounds_audit.lower)
            ));
        }
    }
    s
}

pub fn cover_summary_csv(report: &DecayReport) -> String {
    let mut s = String::from("t,s_disjoint,bound,n_disjoint,n_nondisjoint\n");
    for r in &report.rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.t,
            fmt_f64(r.s_disjoint),
            fmt_f64(r.bound),
            r.n_disjoint,
            r.n_nondisjoint
        ));
    }
    s
}

pub fn measure_csv(points: &[FractionPoint]) -> String {
    let mut s = String::from("s,qmax,fraction,stderr_estimate,n_members\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            p.s,
            p.qmax,
            fmt_f64(p.fraction),
            fmt_f64(p.stderr_estimate),
            p.n_members
        ));
    }
    s
}

pub fn slices_csv(outcomes: &[SliceOutcome]) -> String {
    let mut s = String::from("index,y,status,derivative_bound,arc,reason\n");
    for (i, o) in outcomes.iter().enumerate() {
        match o {
            SliceOutcome::Accepted { y, derivative_bound, arc } => {
                s.push_str(&format!("{i},{},accepted,{},{},\n", fmt_f64(*y), fmt_f64(*derivative_bound), fmt_f64(*arc)));
            }
            SliceOutcome::Rejected { y, reason } => {
                s.push_str(&format!("{i},{},rejected,,,{}\n", fmt_f64(*y), reason.replace(',', ";")));
            }
        }
    }
    s
}

/// Minimal CSV reader for round-trip tests: no quoting, comma-separated.
pub fn parse_csv(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|c| c.to_string()).collect())
        .collect()
}

/// Two-column whitespace-delimited series; the header names the columns.
pub fn plotdata_text(series: &[(f64, f64)], xname: &str, yname: &str) -> String {
    let mut s = format!("# {xname} {yname}\n");
    for (x, y) in series {
        s.push_str(&format!("{} {}\n", fmt_f64(*x), fmt_f64(*y)));
    }
    s
}

/// Self-contained SVG line plot; y may be rendered in log2. Returns None for
/// an empty series (the text file is still written, header-only).
pub fn plot_svg(series: &[(f64, f64)], log2_y: bool) -> Option<String> {
    if series.is_empty() {
        return None;
    }
    let ys: Vec<f64> = series
        .iter()
        .map(|&(_, y)| if log2_y { y.max(1e-300).log2() } else { y })
        .collect();
    let xs: Vec<f64> = series.iter().map(|&(x, _)| x).collect();
    let (w, h, pad) = (640.0, 400.0, 40.0);
    let (xmin, xmax) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (ymin, ymax) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let xspan = (xmax - xmin).max(1e-12);
    let yspan = (ymax - ymin).max(1e-12);
    let mut pts = String::new();
    for (x, y) in xs.iter().zip(&ys) {
        let px = pad + (x - xmin) / xspan * (w - 2.0 * pad);
        let py = h - pad - (y - ymin) / yspan * (h - 2.0 * pad);
        pts.push_str(&format!("{px:.3},{py:.3} "));
    }
    let ylabel = if log2_y { "log2(y)" } else { "y" };
    Some(format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<polyline points=\"{pts}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
            "<text x=\"{pad}\" y=\"16\" font-size=\"12\">{ylabel}: [{ymin}, {ymax}]</text>\n",
            "</svg>\n"
        ),
        w = w,
        h = h,
        pts = pts.trim_end(),
        pad = pad,
        ylabel = ylabel,
        ymin = fmt_f64(ymin),
        ymax = fmt_f64(ymax),
    ))
}

/// Write a plot series: two-column text always, plus a self-contained SVG
/// next to it when the series is nonempty. Returns the paths written.
pub fn emit_plotdata(series: &[(f64, f64)], path: &Path, xname: &str, yname: &str, log2_y: bool) -> Result<Vec<PathBuf>> {
    let mut written = vec![];
    atomic_write(path, plotdata_text(series, xname, yname).as_bytes())?;
    written.push(path.to_path_buf());
    if let Some(svg) = plot_svg(series, log2_y) {
        let svg_path = path.with_extension("svg");
        atomic_write(&svg_path, svg.as_bytes())?;
        written.push(svg_path);
    }
    Ok(written)
}

/// Flat key-value manifest, sorted, with the command and tool version first.
pub fn manifest_text(command: &str, values: &BTreeMap<String, String>) -> String {
    let mut s = String::new();
    s.push_str(&format!("command {command}\n"));
    s.push_str(&format!("version {}\n", env!("CARGO_PKG_VERSION")));
    for (k, v) in values {
        if k != "command" && k != "version" {
            s.push_str(&format!("{k} {v}\n"));
        }
    }
    s
}

/// Parse a manifest or config file: `key value` per line, '#' comments.
pub fn parse_keyvalue(text: &str) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once(char::is_whitespace) {
            Some((k, v)) => map.insert(k.trim().to_string(), v.trim().to_string()),
            None => map.insert(line.to_string(), String::new()),
        };
    }
    map
}

pub fn default_out_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plotdata_empty_series_is_header_only() {
        let t = plotdata_text(&[], "t", "s");
        assert_eq!(t, "# t s\n");
        assert!(plot_svg(&[], true).is_none());
    }

    #[test]
    fn plotdata_byte_stable() {
        let series = vec![(1.0, 0.125), (2.0, 0.0625)];
        let a = plotdata_text(&series, "t", "s");
        let b = plotdata_text(&series, "t", "s");
        assert_eq!(a, b);
        assert_eq!(plot_svg(&series, true), plot_svg(&series, true));
    }

    #[test]
    fn keyvalue_round_trip() {
        let mut m = BTreeMap::new();
        m.insert("qmax".to_string(), "1000".to_string());
        m.insert("point".to_string(), "surd:(-1+1*sqrt5)/2".to_string());
        let text = manifest_text("exponent", &m);
        let back = parse_keyvalue(&text);
        assert_eq!(back.get("command").unwrap(), "exponent");
        assert_eq!(back.get("qmax").unwrap(), "1000");
        assert_eq!(back.get("point").unwrap(), "surd:(-1+1*sqrt5)/2");
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join(format!("dioph-report-test-{}", std::process::id()));
        let path = dir.join("x.csv");
        atomic_write(&path, b"one\n").unwrap();
        atomic_write(&path, b"two\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
