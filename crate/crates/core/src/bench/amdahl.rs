use super::BenchError;

/// `1 - f`, snapped to 15 significant digits.
///
/// Fractions arrive as decimals (0.9, 0.675); in binary, `1 - 0.9` is
/// `0.09999999999999998` and would make the 90% bound `10.000000000000002`.
/// Fifteen digits is the decimal precision an f64 always round-trips.
fn serial_fraction(f: f64) -> f64 {
    format!("{:.14e}", 1.0 - f)
        .parse()
        .expect("formatted float parses")
}

fn check_fraction(f: f64, allow_one: bool) -> Result<(), BenchError> {
    let ok = f.is_finite() && f >= 0.0 && (f < 1.0 || (allow_one && f == 1.0));
    if ok {
        Ok(())
    } else {
        Err(BenchError::InvalidFraction(f))
    }
}

/// Asymptotic Amdahl bound `1 / (1 - f)` for parallel fraction `f` in `[0, 1)`.
pub fn amdahl_limit(f: f64) -> Result<f64, BenchError> {
    check_fraction(f, false)?;
    Ok(1.0 / serial_fraction(f))
}

/// Amdahl speedup on `workers` processors, `1 / ((1 - f) + f / P)`.
pub fn amdahl_speedup(f: f64, workers: usize) -> Result<f64, BenchError> {
    check_fraction(f, true)?;
    if workers == 0 {
        return Err(BenchError::InvalidWorkers);
    }
    let s = serial_fraction(f);
    let p = workers as f64;
    // Same law written as P / (1 + s (P - 1)): exact at f = 0 and f = 1.
    let speedup = p / (1.0 + s * (p - 1.0));
    Ok(if s > 0.0 {
        speedup.min(1.0 / s)
    } else {
        speedup
    })
}
