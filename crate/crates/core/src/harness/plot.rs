//! Static SVG loss curves on a log scale.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::trace::TraceRecord;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 170.0, 30.0, 50.0); // left, right, top, bottom
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Points `(k, f)` up to the last finite loss; nonpositive losses are kept
/// and later drawn at the floor of the axis.
fn finite_prefix(records: &[TraceRecord]) -> Vec<(f64, f64)> {
    records
        .iter()
        .take_while(|r| r.f.is_finite())
        .map(|r| (r.k as f64, r.f))
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// SVG markup overlaying `f` against `k` for each labelled trace.
pub fn render_svg(series: &[(String, Vec<TraceRecord>)]) -> String {
    let curves: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(name, recs)| (name.as_str(), finite_prefix(recs)))
        .collect();
    let positive = curves
        .iter()
        .flat_map(|(_, p)| p.iter().map(|&(_, f)| f))
        .filter(|f| *f > 0.0);
    let (mut lo, mut hi) = positive.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), f| {
        (l.min(f), h.max(f))
    });
    if !lo.is_finite() {
        (lo, hi) = (1e-16, 1.0);
    }
    let (mut ylo, mut yhi) = (lo.log10().floor(), hi.log10().ceil());
    if yhi <= ylo {
        yhi = ylo + 1.0;
    }
    ylo = ylo.max(yhi - 300.0);
    let kmax = curves
        .iter()
        .flat_map(|(_, p)| p.iter().map(|&(k, _)| k))
        .fold(1.0_f64, f64::max);

    let (ml, mr, mt, mb) = MARGIN;
    let pw = WIDTH - ml - mr;
    let ph = HEIGHT - mt - mb;
    let x = |k: f64| ml + pw * k / kmax;
    let y = |f: f64| {
        let l = if f > 0.0 {
            f.log10().clamp(ylo, yhi)
        } else {
            ylo
        };
        mt + ph * (yhi - l) / (yhi - ylo)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let step = ((yhi - ylo) / 8.0).ceil().max(1.0);
    let mut e = ylo;
    while e <= yhi {
        let py = y(10f64.powf(e));
        let _ = writeln!(
            s,
            r##"<line x1="{ml}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
            ml + pw,
            ml - 6.0,
            py + 4.0
        );
        e += step;
    }
    for i in 0..=4 {
        let k = kmax * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x(k),
            mt + ph + 18.0,
            k.round()
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#,
        ml + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">loss</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0
    );
    for (i, (name, pts)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(k, f)| format!("{:.2},{:.2}", x(k), y(f)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = mt + 14.0 + 18.0 * i as f64;
        let lx = ml + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{:.2}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_plot(series: &[(String, Vec<TraceRecord>)], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, render_svg(series)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(fs: &[f64]) -> Vec<TraceRecord> {
        fs.iter()
            .enumerate()
            .map(|(k, &f)| TraceRecord {
                k,
                f,
                ..Default::default()
            })
            .collect()
    }

    #[test]
    fn two_runs_two_polylines() {
        let svg = render_svg(&[
            ("a".into(), trace(&[1.0, 0.1])),
            ("b".into(), trace(&[2.0, 0.5, 0.0])),
        ]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches(r#"class="legend""#).count(), 2);
    }

    #[test]
    fn divergent_trace_is_clipped() {
        let svg = render_svg(&[("gd".into(), trace(&[1.0, 1e200, f64::INFINITY, f64::NAN]))]);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
