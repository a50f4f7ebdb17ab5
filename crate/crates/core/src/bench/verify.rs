//! Oracle parity: each parallel kernel against its serial reference.

use crate::dist_map::block_partition;
use crate::kernels::{
    form_image_serial, run_batch_serial, sar_input, sqif_sweep_serial, Partitioner,
};
use crate::transport::{launch, Backend, LaunchOptions};

use super::{run_kernel_with, BenchError, KernelConfig, KernelId};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyCase {
    pub kernel: KernelId,
    pub workers: usize,
    pub passed: bool,
    /// Largest absolute elementwise difference; infinite on a length
    /// mismatch or a NaN.
    pub max_error: f64,
    pub tolerance: f64,
}

impl VerifyCase {
    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// Allowed max abs error against the serial reference.
pub fn tolerance(kernel: KernelId) -> f64 {
    match kernel {
        KernelId::Batch => 0.0,
        KernelId::Sar => 1e-10,
        KernelId::SqifTp | KernelId::SqifDp => 1e-12,
    }
}

/// Serial output in the same flattened layout as [`super::run_kernel`].
pub fn serial_reference(kernel: KernelId, cfg: &KernelConfig) -> Result<Vec<f64>, BenchError> {
    Ok(match kernel {
        KernelId::Batch => run_batch_serial(&cfg.batch)?,
        KernelId::Sar => {
            cfg.sar.validate()?;
            form_image_serial(&sar_input(&cfg.sar))
                .into_iter()
                .collect()
        }
        KernelId::SqifTp | KernelId::SqifDp => sqif_sweep_serial(&cfg.sqif)?.voltage,
    })
}

fn max_error(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(
            0.0,
            |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) },
        )
}

/// Runs `kernel` at each worker count and compares rank 0's result with
/// the serial reference. `partitioner` is normally
/// [`block_partition`]; tests substitute faulty ones.
pub fn verify_kernel(
    kernel: KernelId,
    cfg: &KernelConfig,
    workers: &[usize],
    backend: Backend,
    opts: &LaunchOptions,
    partitioner: Option<Partitioner>,
) -> Result<Vec<VerifyCase>, BenchError> {
    let partitioner = partitioner.unwrap_or(block_partition);
    let reference = serial_reference(kernel, cfg)?;
    let tol = tolerance(kernel);
    workers
        .iter()
        .map(|&p| {
            if p == 0 {
                return Err(BenchError::InvalidWorkers);
            }
            let out = launch(p, backend, opts, |ctx| {
                run_kernel_with(ctx, kernel, cfg, partitioner)
            })
            .map_err(|source| BenchError::Trial { trial: 0, source })?;
            let got = out.into_iter().next().flatten().unwrap_or_default();
            let err = max_error(&got, &reference);
            Ok(VerifyCase {
                kernel,
                workers: p,
                passed: err <= tol,
                max_error: err,
                tolerance: tol,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist_map::{BlockRange, MapError};

    fn small() -> KernelConfig {
        let mut cfg = KernelConfig::default();
        cfg.batch.work_cost = 500;
        cfg.sar.n_rows = 12;
        cfg.sar.n_cols = 10;
        cfg.sqif.n_units = 9;
        cfg.sqif.flux.truncate(5);
        cfg.sqif.t_max = 1.0;
        cfg
    }

    /// Every rank claims the first block.
    fn everyone_first(n: usize, p: usize) -> Result<Vec<BlockRange>, MapError> {
        let first = block_partition(n, p)?[0];
        Ok(vec![first; p])
    }

    #[test]
    fn all_kernels_pass_with_block_partition() {
        let cfg = small();
        for k in KernelId::ALL {
            let cases = verify_kernel(
                k,
                &cfg,
                &[1, 2, 3, 4],
                Backend::InProc,
                &LaunchOptions::default(),
                None,
            )
            .unwrap();
            for c in cases {
                assert!(c.passed, "{k} P={} err={}", c.workers, c.max_error);
            }
        }
    }

    #[test]
    fn broken_partition_fails_only_where_it_matters() {
        let cfg = small();
        let cases = verify_kernel(
            KernelId::Batch,
            &cfg,
            &[1, 2, 4],
            Backend::InProc,
            &LaunchOptions::default(),
            Some(everyone_first),
        )
        .unwrap();
        let verdicts: Vec<bool> = cases.iter().map(|c| c.passed).collect();
        assert_eq!(verdicts, [true, false, false]);
        assert_eq!(cases[1].verdict(), "FAIL");
    }

    #[test]
    fn max_error_flags_shape_and_nan() {
        assert_eq!(max_error(&[1.0], &[1.0, 2.0]), f64::INFINITY);
        assert_eq!(max_error(&[f64::NAN], &[1.0]), f64::INFINITY);
        assert_eq!(max_error(&[1.0, 2.5], &[1.0, 2.0]), 0.5);
    }
}
