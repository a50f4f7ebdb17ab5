//! Timing harness, speedup analysis and report emission.
//!
//! [`time_kernel`] launches a kernel repeatedly and records the wall time of
//! the kernel body on rank 0, bracketed by barriers so every rank has
//! started before the clock starts and finished before it stops. Records
//! from one comparison set carry the same config digest; [`speedup_table`]
//! refuses to mix digests.
//!
//! Kernel configs can be read from a `key=value` file:
//!
//! ```text
//! # batch
//! batch.items = 63
//! batch.work_cost = 200000
//! # sar
//! sar.rows = 128
//! sar.cols = 192
//! # sqif
//! sqif.units = 64
//! sqif.flux_points = 32
//! sqif.flux_min = -1
//! sqif.flux_max = 1
//! sqif.bias = 1.1
//! sqif.coupling = 0.3
//! sqif.damping = 1
//! sqif.spread = 0.4
//! sqif.dt = 0.01
//! sqif.t_max = 20
//! ```
//!
//! The seed is not a file key; it comes from [`KernelConfig::with_seed`].

pub mod amdahl;
pub mod plot;
pub mod report;
pub mod verify;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::dist_map::block_partition;
use crate::kernels::{
    form_image_parallel, run_batch_parallel_with, sqif_sweep_dp, sqif_sweep_tp_with, BatchJob,
    KernelError, Partitioner, SarConfig, SqifParams,
};
use crate::transport::{launch, Backend, LaunchError, LaunchOptions, WorkerCtx};

pub use amdahl::{amdahl_limit, amdahl_speedup};
pub use plot::{emit_plot, render_plot};
pub use report::{
    format_sig9, parse_report, read_report, render_report, speedup_table, write_report, SpeedupRow,
    CSV_HEADER,
};
pub use verify::{serial_reference, verify_kernel, VerifyCase};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("parallel fraction {0} outside the allowed range")]
    InvalidFraction(f64),
    #[error("worker count must be ≥ 1")]
    InvalidWorkers,
    #[error("trial count must be ≥ 1")]
    InvalidTrials,
    #[error("no P = 1 baseline among the records")]
    MissingBaseline,
    #[error("records from different configurations: digest {expected} vs {got}")]
    DigestMismatch { expected: String, got: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("report line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("trial {trial} failed: {source}")]
    Trial { trial: usize, source: LaunchError },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelId {
    Batch,
    Sar,
    SqifTp,
    SqifDp,
}

impl KernelId {
    pub const ALL: [KernelId; 4] = [
        KernelId::Batch,
        KernelId::Sar,
        KernelId::SqifTp,
        KernelId::SqifDp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelId::Batch => "batch",
            KernelId::Sar => "sar",
            KernelId::SqifTp => "sqif-tp",
            KernelId::SqifDp => "sqif-dp",
        }
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelId::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                format!("unknown kernel `{s}` (expected batch, sar, sqif-tp or sqif-dp)")
            })
    }
}

/// Parameters for every kernel; each benchmark uses the part it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub batch: BatchJob,
    pub sar: SarConfig,
    pub sqif: SqifParams,
    flux_range: (f64, f64),
}

impl Default for KernelConfig {
    /// Desk-scale defaults: 63 batch items, a 128×192 SAR input and a
    /// 64-unit chain swept over 32 flux points.
    fn default() -> Self {
        let flux_range = (-1.0, 1.0);
        KernelConfig {
            batch: BatchJob {
                n_items: 63,
                work_cost: 200_000,
                seed: DEFAULT_SEED,
            },
            sar: SarConfig {
                n_rows: 128,
                n_cols: 192,
                seed: DEFAULT_SEED,
            },
            sqif: SqifParams {
                bias: 1.1,
                flux: SqifParams::linspace(flux_range.0, flux_range.1, 32),
                coupling: 0.3,
                dt: 0.01,
                damping: 1.0,
                n_units: 64,
                spread: 0.4,
                t_max: 20.0,
                seed: DEFAULT_SEED,
            },
            flux_range,
        }
    }
}

impl KernelConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.batch.seed = seed;
        self.sar.seed = seed;
        self.sqif.seed = seed;
        self
    }

    /// Defaults overridden by the keys present in `text`.
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut cfg = KernelConfig::default();
        let mut flux_points = cfg.sqif.flux.len();
        for (i, raw) in text.lines().enumerate() {
            let err = |reason: String| BenchError::Config {
                line: i + 1,
                reason,
            };
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let int = || {
                value
                    .parse::<u64>()
                    .map_err(|e| err(format!("{key}: `{value}`: {e}")))
            };
            let float = || {
                value
                    .parse::<f64>()
                    .map_err(|e| err(format!("{key}: `{value}`: {e}")))
            };
            match key {
                "batch.items" => cfg.batch.n_items = int()? as usize,
                "batch.work_cost" => cfg.batch.work_cost = int()?,
                "sar.rows" => cfg.sar.n_rows = int()? as usize,
                "sar.cols" => cfg.sar.n_cols = int()? as usize,
                "sqif.units" => cfg.sqif.n_units = int()? as usize,
                "sqif.flux_points" => flux_points = int()? as usize,
                "sqif.flux_min" => cfg.flux_range.0 = float()?,
                "sqif.flux_max" => cfg.flux_range.1 = float()?,
                "sqif.bias" => cfg.sqif.bias = float()?,
                "sqif.coupling" => cfg.sqif.coupling = float()?,
                "sqif.damping" => cfg.sqif.damping = float()?,
                "sqif.spread" => cfg.sqif.spread = float()?,
                "sqif.dt" => cfg.sqif.dt = float()?,
                "sqif.t_max" => cfg.sqif.t_max = float()?,
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        cfg.sqif.flux = SqifParams::linspace(cfg.flux_range.0, cfg.flux_range.1, flux_points);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self, kernel: KernelId) -> Result<(), BenchError> {
        match kernel {
            KernelId::Batch => self.batch.validate()?,
            KernelId::Sar => self.sar.validate()?,
            KernelId::SqifTp | KernelId::SqifDp => self.sqif.validate()?,
        }
        Ok(())
    }

    /// Canonical text of the parameters `kernel` reads. Floats use Rust's
    /// shortest round-trip form.
    fn canonical(&self, kernel: KernelId) -> String {
        let b = &self.batch;
        let s = &self.sar;
        let q = &self.sqif;
        match kernel {
            KernelId::Batch => format!(
                "batch\nitems={}\nwork_cost={}\nseed={}\n",
                b.n_items, b.work_cost, b.seed
            ),
            KernelId::Sar => format!(
                "sar\nrows={}\ncols={}\nseed={}\n",
                s.n_rows, s.n_cols, s.seed
            ),
            KernelId::SqifTp | KernelId::SqifDp => {
                let flux: Vec<String> = q.flux.iter().map(|x| format!("{x:?}")).collect();
                format!(
                    "{kernel}\nunits={}\nflux={}\nbias={:?}\ncoupling={:?}\ndamping={:?}\nspread={:?}\ndt={:?}\nt_max={:?}\nseed={}\n",
                    q.n_units,
                    flux.join(","),
                    q.bias,
                    q.coupling,
                    q.damping,
                    q.spread,
                    q.dt,
                    q.t_max,
                    q.seed
                )
            }
        }
    }

    /// First 16 hex digits of the SHA-256 of the kernel's canonical config.
    pub fn config_digest(&self, kernel: KernelId) -> String {
        let hash = Sha256::digest(self.canonical(kernel).as_bytes());
        hex::encode(&hash[..8])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub kernel: KernelId,
    pub workers: usize,
    pub trial: usize,
    pub wall_time_s: f64,
    pub config_digest: String,
}

/// Runs one kernel SPMD; rank 0 gets the flattened result (batch values,
/// row-major SAR image, or SQIF voltages).
pub fn run_kernel(
    ctx: &mut WorkerCtx,
    kernel: KernelId,
    cfg: &KernelConfig,
) -> Result<Option<Vec<f64>>, KernelError> {
    run_kernel_with(ctx, kernel, cfg, block_partition)
}

/// As [`run_kernel`], with the index partitioner used by the batch and
/// task-parallel SQIF kernels replaced.
pub fn run_kernel_with(
    ctx: &mut WorkerCtx,
    kernel: KernelId,
    cfg: &KernelConfig,
    partitioner: Partitioner,
) -> Result<Option<Vec<f64>>, KernelError> {
    Ok(match kernel {
        KernelId::Batch => run_batch_parallel_with(ctx, &cfg.batch, partitioner)?,
        KernelId::Sar => form_image_parallel(ctx, &cfg.sar)?.map(|img| img.into_iter().collect()),
        KernelId::SqifTp => sqif_sweep_tp_with(ctx, &cfg.sqif, partitioner)?.map(|c| c.voltage),
        KernelId::SqifDp => sqif_sweep_dp(ctx, &cfg.sqif)?.map(|c| c.voltage),
    })
}

/// Times `trials` launches of `kernel` on `workers` ranks.
pub fn time_kernel(
    kernel: KernelId,
    cfg: &KernelConfig,
    workers: usize,
    trials: usize,
    backend: Backend,
    opts: &LaunchOptions,
) -> Result<Vec<TimingRecord>, BenchError> {
    if workers == 0 {
        return Err(BenchError::InvalidWorkers);
    }
    if trials == 0 {
        return Err(BenchError::InvalidTrials);
    }
    cfg.validate(kernel)?;
    let config_digest = cfg.config_digest(kernel);
    (0..trials)
        .map(|trial| {
            let times = launch(workers, backend, opts, |ctx| -> Result<f64, KernelError> {
                ctx.barrier()?;
                let start = Instant::now();
                run_kernel(ctx, kernel, cfg)?;
                ctx.barrier()?;
                Ok(start.elapsed().as_secs_f64())
            })
            .map_err(|source| BenchError::Trial { trial, source })?;
            Ok(TimingRecord {
                kernel,
                workers,
                trial,
                wall_time_s: times[0],
                config_digest: config_digest.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> KernelConfig {
        let mut cfg = KernelConfig::default();
        cfg.batch.n_items = 10;
        cfg.batch.work_cost = 1000;
        cfg.sar.n_rows = 8;
        cfg.sar.n_cols = 6;
        cfg.sqif.n_units = 6;
        cfg.sqif.flux.truncate(4);
        cfg.sqif.t_max = 0.5;
        cfg
    }

    #[test]
    fn kernel_ids_round_trip() {
        for k in KernelId::ALL {
            assert_eq!(k.to_string().parse::<KernelId>().unwrap(), k);
        }
        assert!("fft".parse::<KernelId>().is_err());
    }

    #[test]
    fn three_trials_share_a_digest() {
        let cfg = small();
        let recs = time_kernel(
            KernelId::Batch,
            &cfg,
            2,
            3,
            Backend::InProc,
            &LaunchOptions::default(),
        )
        .unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs
            .iter()
            .all(|r| r.config_digest == recs[0].config_digest && r.wall_time_s > 0.0));
        assert_eq!(recs.iter().map(|r| r.trial).collect::<Vec<_>>(), [0, 1, 2]);
    }

    #[test]
    fn different_configs_cannot_be_mixed() {
        let a = small();
        let mut b = small();
        b.batch.work_cost += 1;
        assert_ne!(
            a.config_digest(KernelId::Batch),
            b.config_digest(KernelId::Batch)
        );
        let opts = LaunchOptions::default();
        let mut recs = time_kernel(KernelId::Batch, &a, 1, 1, Backend::InProc, &opts).unwrap();
        recs.extend(time_kernel(KernelId::Batch, &b, 2, 1, Backend::InProc, &opts).unwrap());
        assert!(matches!(
            speedup_table(&recs, None),
            Err(BenchError::DigestMismatch { .. })
        ));
    }

    #[test]
    fn zero_workers_or_trials_rejected() {
        let cfg = small();
        let opts = LaunchOptions::default();
        assert!(matches!(
            time_kernel(KernelId::Sar, &cfg, 0, 1, Backend::InProc, &opts),
            Err(BenchError::InvalidWorkers)
        ));
        assert!(matches!(
            time_kernel(KernelId::Sar, &cfg, 1, 0, Backend::InProc, &opts),
            Err(BenchError::InvalidTrials)
        ));
    }

    #[test]
    fn kernel_failure_names_the_trial() {
        let mut cfg = small();
        cfg.sqif.dt = 0.0;
        assert!(matches!(
            time_kernel(
                KernelId::SqifTp,
                &cfg,
                1,
                1,
                Backend::InProc,
                &LaunchOptions::default()
            ),
            Err(BenchError::Kernel(_))
        ));
        // Valid parameters whose integration overflows at runtime.
        let mut unstable = small();
        unstable.sqif.coupling = 1e300;
        match time_kernel(
            KernelId::SqifDp,
            &unstable,
            2,
            2,
            Backend::InProc,
            &LaunchOptions::default(),
        ) {
            Err(BenchError::Trial { trial: 0, source }) => {
                assert!(source.to_string().contains("non-finite"), "{source}")
            }
            other => panic!("expected trial failure, got {other:?}"),
        }
    }

    #[test]
    fn config_file_overrides_defaults() {
        let cfg = KernelConfig::parse(
            "# comment\n\nbatch.items = 5\nsar.rows=4 # trailing\nsqif.flux_points = 3\nsqif.flux_min = 0\nsqif.flux_max = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.batch.n_items, 5);
        assert_eq!(cfg.sar.n_rows, 4);
        assert_eq!(cfg.sar.n_cols, 192);
        assert_eq!(cfg.sqif.flux, [0.0, 0.25, 0.5]);
        assert_eq!(KernelConfig::parse("").unwrap(), KernelConfig::default());
    }

    #[test]
    fn config_errors_name_the_line() {
        for (text, line) in [
            ("sar.rows = x", 1),
            ("\nbogus = 1", 2),
            ("\n\nno equals", 3),
        ] {
            match KernelConfig::parse(text) {
                Err(BenchError::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn seed_changes_digest_and_reaches_every_kernel() {
        let a = KernelConfig::default();
        let b = KernelConfig::default().with_seed(7);
        for k in KernelId::ALL {
            assert_ne!(a.config_digest(k), b.config_digest(k));
            assert_eq!(a.config_digest(k).len(), 16);
        }
        assert_eq!(
            a.config_digest(KernelId::Sar),
            KernelConfig::default().config_digest(KernelId::Sar)
        );
    }
}
