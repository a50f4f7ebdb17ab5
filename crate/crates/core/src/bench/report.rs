//! Speedup tables and their CSV form.
//!
//! ```text
//! kernel,workers,mean_time_s,speedup,efficiency,amdahl_bound
//! sar,1,2.5,1,1,1
//! ```
//!
//! Floating point fields use C's `%.9g` formatting.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{amdahl_speedup, BenchError, KernelId, TimingRecord};

pub const CSV_HEADER: &str = "kernel,workers,mean_time_s,speedup,efficiency,amdahl_bound";

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub kernel: KernelId,
    pub workers: usize,
    pub mean_time_s: f64,
    /// `T(1) / T(P)`.
    pub speedup: f64,
    /// `speedup / P`.
    pub efficiency: f64,
    /// Amdahl speedup at this `P` for the declared parallel fraction.
    pub amdahl_bound: f64,
}

/// Mean time per worker count, speedups against the `P = 1` mean.
///
/// `parallel_fraction` sets the Amdahl column; without one the bound is the
/// ideal linear speedup.
pub fn speedup_table(
    records: &[TimingRecord],
    parallel_fraction: Option<f64>,
) -> Result<Vec<SpeedupRow>, BenchError> {
    let first = records.first().ok_or(BenchError::MissingBaseline)?;
    if let Some(r) = records
        .iter()
        .find(|r| r.config_digest != first.config_digest || r.kernel != first.kernel)
    {
        return Err(BenchError::DigestMismatch {
            expected: first.config_digest.clone(),
            got: r.config_digest.clone(),
        });
    }
    let mut by_workers: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_workers.entry(r.workers).or_default().push(r.wall_time_s);
    }
    let means: BTreeMap<usize, f64> = by_workers
        .into_iter()
        .map(|(p, times)| (p, times.iter().sum::<f64>() / times.len() as f64))
        .collect();
    let baseline = *means.get(&1).ok_or(BenchError::MissingBaseline)?;
    let fraction = parallel_fraction.unwrap_or(1.0);
    means
        .into_iter()
        .map(|(workers, mean)| {
            let speedup = baseline / mean;
            Ok(SpeedupRow {
                kernel: first.kernel,
                workers,
                mean_time_s: mean,
                speedup,
                efficiency: speedup / workers as f64,
                amdahl_bound: amdahl_speedup(fraction, workers)?,
            })
        })
        .collect()
}

/// `%.9g`: nine significant digits, trailing zeros dropped, exponent form
/// outside `1e-4 <= |x| < 1e9`.
pub fn format_sig9(x: f64) -> String {
    const PRECISION: i32 = 9;
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..PRECISION).contains(&exp) {
        let decimals = (PRECISION - 1 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let mantissa = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn render_report(rows: &[SpeedupRow]) -> String {
    let mut sorted: Vec<&SpeedupRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.workers);
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.kernel,
            r.workers,
            format_sig9(r.mean_time_s),
            format_sig9(r.speedup),
            format_sig9(r.efficiency),
            format_sig9(r.amdahl_bound),
        ));
    }
    out
}

pub fn write_report(rows: &[SpeedupRow], path: &Path) -> Result<(), BenchError> {
    fs::write(path, render_report(rows)).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_report(text: &str) -> Result<Vec<SpeedupRow>, BenchError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(BenchError::Parse {
                line: 1,
                reason: "missing or wrong header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let err = |reason: String| BenchError::Parse {
                line: i + 1,
                reason,
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(err(format!("expected 6 fields, got {}", fields.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
            Ok(SpeedupRow {
                kernel: fields[0].parse().map_err(err)?,
                workers: fields[1]
                    .parse()
                    .map_err(|e| err(format!("`{}`: {e}", fields[1])))?,
                mean_time_s: num(fields[2])?,
                speedup: num(fields[3])?,
                efficiency: num(fields[4])?,
                amdahl_bound: num(fields[5])?,
            })
        })
        .collect()
}

pub fn read_report(path: &Path) -> Result<Vec<SpeedupRow>, BenchError> {
    let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_report(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(workers: usize, t: f64) -> TimingRecord {
        TimingRecord {
            kernel: KernelId::Sar,
            workers,
            trial: 0,
            wall_time_s: t,
            config_digest: "abc".into(),
        }
    }

    #[test]
    fn definitional_speedups() {
        let rows = speedup_table(&[rec(1, 100.0), rec(4, 25.0)], None).unwrap();
        assert_eq!((rows[1].speedup, rows[1].efficiency), (4.0, 1.0));

        let rows = speedup_table(&[rec(4, 30.0), rec(1, 100.0), rec(2, 50.0)], None).unwrap();
        let s: Vec<f64> = rows.iter().map(|r| r.speedup).collect();
        assert_eq!(s[..2], [1.0, 2.0]);
        assert!((s[2] - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn efficiency_at_thirty_two() {
        let rows = speedup_table(&[rec(1, 2.6), rec(32, 1.0)], None).unwrap();
        assert_eq!(rows[1].speedup, 2.6);
        assert_eq!(rows[1].efficiency, 0.08125);
    }

    #[test]
    fn trials_are_averaged() {
        let rows = speedup_table(
            &[rec(1, 9.0), rec(1, 11.0), rec(2, 4.0), rec(2, 6.0)],
            Some(0.9),
        )
        .unwrap();
        assert_eq!(rows[0].mean_time_s, 10.0);
        assert_eq!(rows[1].speedup, 2.0);
        assert_eq!(rows[0].amdahl_bound, 1.0);
        assert!((rows[1].amdahl_bound - 1.0 / (0.1 + 0.45)).abs() < 1e-12);
    }

    #[test]
    fn baseline_and_digest_checks() {
        assert!(matches!(
            speedup_table(&[rec(2, 1.0)], None),
            Err(BenchError::MissingBaseline)
        ));
        assert!(matches!(
            speedup_table(&[], None),
            Err(BenchError::MissingBaseline)
        ));
        let mut other = rec(2, 1.0);
        other.config_digest = "xyz".into();
        assert!(matches!(
            speedup_table(&[rec(1, 1.0), other], None),
            Err(BenchError::DigestMismatch { .. })
        ));
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(10.0 / 3.0), "3.33333333");
        assert_eq!(format_sig9(0.08125), "0.08125");
        assert_eq!(format_sig9(123456789.0), "123456789");
        assert_eq!(format_sig9(1234567890.0), "1.23456789e+09");
        assert_eq!(format_sig9(0.0001), "0.0001");
        assert_eq!(format_sig9(0.00001234), "1.234e-05");
        assert_eq!(format_sig9(-2.5), "-2.5");
        assert_eq!(format_sig9(9.999999999), "10");
    }

    #[test]
    fn csv_line_counts() {
        assert_eq!(render_report(&[]), format!("{CSV_HEADER}\n"));
        let rows = speedup_table(&[rec(1, 3.0), rec(2, 2.0), rec(4, 1.0)], None).unwrap();
        let text = render_report(&rows);
        assert_eq!(text.lines().count(), 4);
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = speedup_table(&[rec(1, 3.0), rec(2, 1.7), rec(3, 1.3)], Some(0.95)).unwrap();
        write_report(&rows, &path).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.workers, b.workers);
            assert!((a.speedup - b.speedup).abs() <= 5e-9 * a.speedup.abs());
        }
    }

    #[test]
    fn parse_errors() {
        assert!(parse_report("nope\n").is_err());
        assert!(parse_report(&format!("{CSV_HEADER}\nsar,1,2\n")).is_err());
        assert!(parse_report(&format!("{CSV_HEADER}\nfft,1,1,1,1,1\n")).is_err());
    }

    fn row_strategy() -> impl Strategy<Value = SpeedupRow> {
        (
            1usize..512,
            1e-6f64..1e6,
            1e-3f64..1e3,
            0.0f64..1.0,
            1.0f64..100.0,
        )
            .prop_map(
                |(workers, mean_time_s, speedup, efficiency, amdahl_bound)| SpeedupRow {
                    kernel: KernelId::SqifDp,
                    workers,
                    mean_time_s,
                    speedup,
                    efficiency,
                    amdahl_bound,
                },
            )
    }

    proptest! {
        #[test]
        fn round_trip_keeps_nine_digits(rows in proptest::collection::vec(row_strategy(), 0..8)) {
            let text = render_report(&rows);
            let back = parse_report(&text).unwrap();
            prop_assert_eq!(render_report(&back), text.clone());
            let mut sorted = rows.clone();
            sorted.sort_by_key(|r| r.workers);
            for (a, b) in sorted.iter().zip(&back) {
                for (x, y) in [
                    (a.mean_time_s, b.mean_time_s),
                    (a.speedup, b.speedup),
                    (a.efficiency, b.efficiency),
                    (a.amdahl_bound, b.amdahl_bound),
                ] {
                    prop_assert!((x - y).abs() <= 5e-9 * x.abs(), "{} vs {}", x, y);
                }
            }
        }
    }
}
