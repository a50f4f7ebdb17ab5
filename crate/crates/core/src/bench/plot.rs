//! Dual-axis SVG chart: mean wall time on the left axis, speedup on the
//! right, both against worker count, with an optional Amdahl curve and its
//! asymptote.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{amdahl_limit, amdahl_speedup, BenchError, SpeedupRow};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 80.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const TIME_COLOR: &str = "#1f77b4";
const SPEEDUP_COLOR: &str = "#d62728";
const BOUND_COLOR: &str = "#7f7f7f";

struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

/// Three significant digits, no trailing zeros.
fn label(v: f64) -> String {
    let s = format!(
        "{:.*}",
        2usize.saturating_sub(v.abs().log10().floor().max(0.0) as usize),
        v
    );
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn polyline(out: &mut String, points: &[(f64, f64)], color: &str, dashed: bool) {
    if points.is_empty() {
        return;
    }
    let pts: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    let dash = if dashed {
        r#" stroke-dasharray="6,4""#
    } else {
        ""
    };
    writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
        pts.join(" ")
    )
    .unwrap();
}

fn markers(out: &mut String, points: &[(f64, f64)], color: &str) {
    for (x, y) in points {
        writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#
        )
        .unwrap();
    }
}

/// Renders the chart. Output depends only on the inputs.
pub fn render_plot(
    rows: &[SpeedupRow],
    declared_fraction: Option<f64>,
) -> Result<String, BenchError> {
    let mut rows: Vec<&SpeedupRow> = rows.iter().collect();
    rows.sort_by_key(|r| r.workers);
    let limit = match declared_fraction {
        Some(f) => Some(amdahl_limit(f)?),
        None => None,
    };

    let max_p = rows.last().map_or(1, |r| r.workers);
    let (x_lo, x_hi) = if max_p <= 1 {
        (0.5, 1.5)
    } else {
        (1.0, max_p as f64)
    };
    let x = Scale {
        lo: x_lo,
        hi: x_hi,
        px_lo: LEFT,
        px_hi: WIDTH - RIGHT,
    };

    let bound: Vec<(f64, f64)> = match declared_fraction {
        Some(f) => {
            let samples = max_p.clamp(2, 200);
            (0..samples)
                .map(|i| {
                    let p = 1.0 + (max_p.max(2) - 1) as f64 * i as f64 / (samples - 1) as f64;
                    let p_int = p.round() as usize;
                    amdahl_speedup(f, p_int.max(1)).map(|s| (p, s))
                })
                .collect::<Result<_, _>>()?
        }
        None => Vec::new(),
    };

    let max_time = rows.iter().map(|r| r.mean_time_s).fold(0.0, f64::max);
    let max_speed = rows
        .iter()
        .map(|r| r.speedup)
        .chain(bound.iter().map(|b| b.1))
        .chain(limit)
        .fold(1.0, f64::max);
    let t = Scale {
        lo: 0.0,
        hi: if max_time > 0.0 { max_time * 1.1 } else { 1.0 },
        px_lo: HEIGHT - BOTTOM,
        px_hi: TOP,
    };
    let s = Scale {
        lo: 0.0,
        hi: max_speed * 1.1,
        px_lo: HEIGHT - BOTTOM,
        px_hi: TOP,
    };

    let kernel = rows
        .first()
        .map_or("no data".to_string(), |r| r.kernel.to_string());
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{kernel}: time and speedup vs workers</text>"#,
        WIDTH / 2.0
    )
    .unwrap();

    // Axes.
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    writeln!(out, r#"<g stroke="black" stroke-width="1">"#).unwrap();
    writeln!(
        out,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<line x1="{x1:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}"/>"#
    )
    .unwrap();
    writeln!(out, "</g>").unwrap();

    for r in &rows {
        let px = x.map(r.workers as f64);
        writeln!(
            out,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            r.workers
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">workers</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    for i in 0..=TICKS {
        let tv = t.hi * i as f64 / TICKS as f64;
        let sv = s.hi * i as f64 / TICKS as f64;
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="{TIME_COLOR}">{}</text>"#,
            x0 - 6.0,
            t.map(tv) + 4.0,
            label(tv)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="start" fill="{SPEEDUP_COLOR}">{}</text>"#,
            x1 + 6.0,
            s.map(sv) + 4.0,
            label(sv)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text transform="translate(20,{:.2}) rotate(-90)" text-anchor="middle" fill="{TIME_COLOR}">mean time (s)</text>"#,
        (y0 + y1) / 2.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text transform="translate({:.2},{:.2}) rotate(90)" text-anchor="middle" fill="{SPEEDUP_COLOR}">speedup</text>"#,
        WIDTH - 20.0,
        (y0 + y1) / 2.0
    )
    .unwrap();

    if let Some(l) = limit {
        let py = s.map(l);
        writeln!(
            out,
            r#"<line x1="{x0:.2}" y1="{py:.2}" x2="{x1:.2}" y2="{py:.2}" stroke="{BOUND_COLOR}" stroke-dasharray="2,3"/>"#
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="{BOUND_COLOR}">Amdahl limit {}</text>"#,
            x0 + 6.0,
            py - 5.0,
            label(l)
        )
        .unwrap();
    }
    let bound_px: Vec<(f64, f64)> = bound.iter().map(|&(p, v)| (x.map(p), s.map(v))).collect();
    polyline(&mut out, &bound_px, BOUND_COLOR, true);

    let time_px: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (x.map(r.workers as f64), t.map(r.mean_time_s)))
        .collect();
    let speed_px: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (x.map(r.workers as f64), s.map(r.speedup)))
        .collect();
    polyline(&mut out, &time_px, TIME_COLOR, false);
    markers(&mut out, &time_px, TIME_COLOR);
    polyline(&mut out, &speed_px, SPEEDUP_COLOR, false);
    markers(&mut out, &speed_px, SPEEDUP_COLOR);

    // Legend.
    let mut entries = vec![("mean time", TIME_COLOR), ("speedup", SPEEDUP_COLOR)];
    if let Some(f) = declared_fraction {
        entries.push((
            if f < 1.0 {
                "Amdahl bound"
            } else {
                "linear bound"
            },
            BOUND_COLOR,
        ));
    }
    for (i, (name, color)) in entries.iter().enumerate() {
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let lx = x1 - 120.0;
        writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{name}</text>"#,
            lx + 24.0,
            ly + 4.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_plot(
    rows: &[SpeedupRow],
    declared_fraction: Option<f64>,
    path: &Path,
) -> Result<(), BenchError> {
    let svg = render_plot(rows, declared_fraction)?;
    fs::write(path, svg).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::KernelId;

    fn rows(ps: &[usize]) -> Vec<SpeedupRow> {
        ps.iter()
            .map(|&p| SpeedupRow {
                kernel: KernelId::Batch,
                workers: p,
                mean_time_s: 10.0 / p as f64,
                speedup: p as f64 * 0.9,
                efficiency: 0.9,
                amdahl_bound: p as f64,
            })
            .collect()
    }

    #[test]
    fn byte_identical_for_same_input() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
        emit_plot(&rows(&[1, 2, 4, 8]), Some(0.9), &a).unwrap();
        emit_plot(&rows(&[1, 2, 4, 8]), Some(0.9), &b).unwrap();
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }

    #[test]
    fn single_point_plot_is_valid() {
        let svg = render_plot(&rows(&[1]), None).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn bound_approaches_limit_of_ten() {
        let svg = render_plot(&rows(&[1, 2, 4, 8, 16, 32]), Some(0.9)).unwrap();
        assert!(svg.contains("Amdahl limit 10<"), "{svg}");
        // Sampled bound stays under the asymptote.
        let top = amdahl_speedup(0.9, 32).unwrap();
        assert!(top < 10.0 && top > 7.0);
    }

    #[test]
    fn labels() {
        assert_eq!(label(10.0), "10");
        assert_eq!(label(3.076923), "3.08");
        assert_eq!(label(0.0), "0");
        assert_eq!(label(123.4), "123");
    }

    #[test]
    fn empty_rows_still_render() {
        let svg = render_plot(&[], None).unwrap();
        assert!(svg.contains("no data"));
    }
}
