//! Image formation stage of a SAR benchmark: a shifted 2-D inverse DFT
//! followed by magnitude and a value transpose.
//!
//! Serial pipeline, for an `n_rows x n_cols` complex matrix `F`:
//!
//! ```text
//! S = transpose(abs(shift(idft_cols(idft_rows(shift(F))))))
//! ```
//!
//! where `idft_rows` transforms along the row index (down each column) and
//! `idft_cols` along the column index (across each row). The parallel
//! version distributes `shift(F)` by column blocks, so the first pass is
//! local, redistributes to row blocks with `transpose_grid`, runs the second
//! pass locally, and collects magnitudes on rank 0.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::darray::DArray;
use crate::dist_map::DistMap;
use crate::transport::WorkerCtx;

use super::dft::{fftshift2, inverse_along};
use super::KernelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SarConfig {
    /// Rows of the frequency-domain matrix (`nx`).
    pub n_rows: usize,
    /// Columns of the frequency-domain matrix (`m`).
    pub n_cols: usize,
    pub seed: u64,
}

impl SarConfig {
    pub fn validate(&self) -> Result<(), KernelError> {
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(KernelError::InvalidConfig("SAR extents must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Deterministic pseudo-random input with components uniform in `[-1, 1)`.
pub fn sar_input(cfg: &SarConfig) -> Array2<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Array2::from_shape_fn((cfg.n_rows, cfg.n_cols), |_| {
        let re = rng.random_range(-1.0..1.0);
        let im = rng.random_range(-1.0..1.0);
        Complex64::new(re, im)
    })
}

fn finish(magnitude: Array2<f64>) -> Array2<f64> {
    let shifted = fftshift2(&magnitude);
    shifted.t().as_standard_layout().into_owned()
}

/// Single-process reference. Output shape is `(n_cols, n_rows)`.
pub fn form_image_serial(f: &Array2<Complex64>) -> Array2<f64> {
    let mut x = fftshift2(f);
    inverse_along(&mut x, Axis(0));
    inverse_along(&mut x, Axis(1));
    finish(x.mapv(|z| z.norm()))
}

/// SPMD image formation; the image lands on rank 0.
pub fn form_image_parallel(
    ctx: &mut WorkerCtx,
    cfg: &SarConfig,
) -> Result<Option<Array2<f64>>, KernelError> {
    cfg.validate()?;
    let p = ctx.world_size();
    let shape = (cfg.n_rows, cfg.n_cols);
    // The input shift crosses column blocks, so it happens before the scatter.
    let shifted = (ctx.rank() == 0).then(|| fftshift2(&sar_input(cfg)));
    let mut pf = DArray::scatter(ctx, 0, shifted.as_ref(), shape, DistMap::cols(p)?)?;

    let mut pf_local = pf.local_part();
    inverse_along(&mut pf_local, Axis(0));
    pf.put_local(pf_local)?;

    let mut z = pf.transpose_grid(ctx)?;
    drop(pf);
    let mut z_local = z.local_part();
    inverse_along(&mut z_local, Axis(1));
    let magnitude = z_local.mapv(|v| v.norm());
    z.put_local(z_local)?;

    // Magnitudes only: half the bytes of the complex blocks. Shift and abs
    // commute, so the output shift runs on the assembled image.
    let mut mag = DArray::<f64>::zeros(ctx, shape, z.map().clone())?;
    mag.put_local(magnitude)?;
    Ok(mag.agg(ctx)?.map(finish))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::transport::{launch, Backend, LaunchOptions};

    /// Brute-force oracle: shift, full 2-D inverse DFT by direct summation
    /// over both indices at once, shift, abs, transpose.
    fn oracle(f: &Array2<Complex64>) -> Array2<f64> {
        let (n, m) = f.dim();
        let g = fftshift2(f);
        let mut x = Array2::<Complex64>::zeros((n, m));
        for k in 0..n {
            for l in 0..m {
                let mut acc = Complex64::default();
                for a in 0..n {
                    for b in 0..m {
                        let phase =
                            2.0 * PI * ((a * k) as f64 / n as f64 + (b * l) as f64 / m as f64);
                        acc += g[(a, b)] * Complex64::from_polar(1.0, phase);
                    }
                }
                x[(k, l)] = acc / (n * m) as f64;
            }
        }
        let s = fftshift2(&x.mapv(|z| z.norm()));
        s.t().to_owned()
    }

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        assert_eq!(a.dim(), b.dim());
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_input_gives_zero_image() {
        let img = form_image_serial(&Array2::zeros((4, 6)));
        assert_eq!(img.dim(), (6, 4));
        assert!(img.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn impulse_has_flat_magnitude() {
        let (n, m) = (5, 4);
        let mut f = Array2::<Complex64>::zeros((n, m));
        f[(0, 0)] = Complex64::new(1.0, 0.0);
        let img = form_image_serial(&f);
        let want = oracle(&f);
        assert!(max_abs_diff(&img, &want) < 1e-12);
        let level = 1.0 / (n * m) as f64;
        assert!(img.iter().all(|&x| (x - level).abs() < 1e-15));
    }

    #[test]
    fn matches_direct_summation_oracle() {
        for (n, m, seed) in [(8, 6, 1), (3, 5, 2), (16, 16, 3), (1, 7, 4)] {
            let f = sar_input(&SarConfig {
                n_rows: n,
                n_cols: m,
                seed,
            });
            assert!(
                max_abs_diff(&form_image_serial(&f), &oracle(&f)) < 1e-12,
                "{n}x{m}"
            );
        }
    }

    #[test]
    fn parallel_single_rank_is_bit_exact() {
        let cfg = SarConfig {
            n_rows: 12,
            n_cols: 10,
            seed: 8,
        };
        let out = launch(1, Backend::InProc, &LaunchOptions::default(), |ctx| {
            form_image_parallel(ctx, &cfg)
        })
        .unwrap();
        assert_eq!(
            out[0].as_ref().unwrap(),
            &form_image_serial(&sar_input(&cfg))
        );
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = SarConfig {
            n_rows: 24,
            n_cols: 18,
            seed: 5,
        };
        let serial = form_image_serial(&sar_input(&cfg));
        for p in [2, 3, 4, 8] {
            let out = launch(p, Backend::InProc, &LaunchOptions::default(), |ctx| {
                form_image_parallel(ctx, &cfg)
            })
            .unwrap();
            let img = out[0].as_ref().unwrap();
            assert!(max_abs_diff(img, &serial) <= 1e-10, "P={p}");
            assert!(out[1..].iter().all(Option::is_none));
        }
    }

    #[test]
    fn full_size_matches_serial() {
        let cfg = SarConfig {
            n_rows: 1492,
            n_cols: 2296,
            seed: 42,
        };
        let serial = form_image_serial(&sar_input(&cfg));
        let out = launch(4, Backend::InProc, &LaunchOptions::default(), |ctx| {
            form_image_parallel(ctx, &cfg)
        })
        .unwrap();
        assert!(max_abs_diff(out[0].as_ref().unwrap(), &serial) <= 1e-10);
    }

    #[test]
    fn rejects_empty_extent() {
        let cfg = SarConfig {
            n_rows: 0,
            n_cols: 3,
            seed: 1,
        };
        assert!(cfg.validate().is_err());
    }
}
