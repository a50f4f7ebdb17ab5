//! Flux sweep over a chain of coupled phase units.
//!
//! The sweep computes a flux-to-voltage transfer curve: for each external
//! flux point the chain is integrated from rest and the time-averaged phase
//! velocity (the "voltage") is averaged over units.
//!
//! The unit dynamics are an overdamped, nearest-neighbour coupled phase
//! model standing in for the real device physics:
//!
//! ```text
//! dphi_i/dt = J - beta_n * sin(phi_i + 2 pi xe (1 + var_size * s_i))
//!             + M * (phi_{i-1} - 2 phi_i + phi_{i+1})
//! ```
//!
//! `s_i` in `[-1, 1]` is a fixed per-unit spread derived from the seed and
//! the unit's global index. The chain ends are reflective (a missing
//! neighbour is replaced by the unit itself).
//!
//! Integration is fixed-step RK4 for `ceil(tmax/dt)` steps from `phi = 0`;
//! the first `steps/2` steps are discarded as transient and the voltage of a
//! unit is its phase advance over the remaining steps divided by their
//! duration.

use std::f64::consts::PI;

use crate::dist_map::{block_partition, BlockRange, DistMap};
use crate::transport::{Payload, Rank, ReduceOp, WorkerCtx, TAG_HALO};

use super::{mix64, my_block, unit_interval, KernelError, Partitioner};

#[derive(Debug, Clone, PartialEq)]
pub struct SqifParams {
    /// Bias `J`.
    pub bias: f64,
    /// External flux sample points `xe`.
    pub flux: Vec<f64>,
    /// Nearest-neighbour coupling `M`.
    pub coupling: f64,
    /// Integration step `dt`.
    pub dt: f64,
    /// Damping `beta_n`.
    pub damping: f64,
    /// Number of units `Nsquid`.
    pub n_units: usize,
    /// Per-unit parameter spread amplitude `var_size`.
    pub spread: f64,
    /// Integration horizon `tmax`.
    pub t_max: f64,
    pub seed: u64,
}

impl SqifParams {
    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |msg: &str| Err(KernelError::InvalidConfig(msg.into()));
        let scalars = [
            self.bias,
            self.coupling,
            self.dt,
            self.damping,
            self.spread,
            self.t_max,
        ];
        if scalars.iter().chain(&self.flux).any(|x| !x.is_finite()) {
            return bad("SQIF parameters must be finite");
        }
        if self.dt <= 0.0 {
            return bad("dt must be > 0");
        }
        if self.t_max < self.dt {
            return bad("tmax must be ≥ dt");
        }
        if self.n_units == 0 {
            return bad("Nsquid must be ≥ 1");
        }
        if self.flux.is_empty() {
            return bad("xe must not be empty");
        }
        if self.spread < 0.0 {
            return bad("var_size must be ≥ 0");
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_max / self.dt).ceil() as usize).max(1)
    }

    /// `n` evenly spaced flux points from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Flux-to-voltage transfer curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferCurve {
    pub flux: Vec<f64>,
    pub voltage: Vec<f64>,
}

/// Voltage summed over a set of units, kept with the unit count so partial
/// results from different ranks can be combined before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UnitSum {
    pub sum: f64,
    pub units: usize,
}

impl UnitSum {
    pub fn mean(&self) -> f64 {
        self.sum / self.units as f64
    }
}

/// Boundary exchange between ranks owning adjacent unit slices.
pub trait HaloExchange {
    /// Publishes this slice's first and last values and returns the values
    /// just outside it, `(left, right)`.
    fn exchange(&mut self, first: f64, last: f64) -> Result<(f64, f64), KernelError>;
}

/// Fixed spread `s_i` in `[-1, 1]` of global unit `unit`.
fn unit_spread(seed: u64, unit: usize) -> f64 {
    let z = mix64(seed ^ mix64((unit as u64).wrapping_add(0x5851_F42D_4C95_7F2D)));
    2.0 * unit_interval(z) - 1.0
}

fn phase_offsets(xe: f64, p: &SqifParams, owned: BlockRange) -> Vec<f64> {
    owned
        .as_range()
        .map(|i| 2.0 * PI * xe * (1.0 + p.spread * unit_spread(p.seed, i)))
        .collect()
}

/// `phi` holds the slice with one halo value on each side.
fn rhs_into(phi: &[f64], offsets: &[f64], p: &SqifParams, out: &mut [f64]) {
    for (i, (d, off)) in out.iter_mut().zip(offsets).enumerate() {
        let (left, centre, right) = (phi[i], phi[i + 1], phi[i + 2]);
        *d = p.bias - p.damping * (centre + off).sin() + p.coupling * (left - 2.0 * centre + right);
    }
}

/// Time derivative of the units in a slice.
///
/// `phi` is the slice's state with the left halo value first and the right
/// halo value last; `unit_offset` is the global index of the first unit.
pub fn sqif_rhs(phi: &[f64], xe: f64, p: &SqifParams, unit_offset: usize) -> Vec<f64> {
    assert!(phi.len() >= 2, "state slice must include both halo values");
    let n = phi.len() - 2;
    let offsets = phase_offsets(xe, p, BlockRange::new(unit_offset, n));
    let mut out = vec![0.0; n];
    rhs_into(phi, &offsets, p, &mut out);
    out
}

/// Integrates the chain at one flux point and returns the summed voltage of
/// the units in `owned`.
///
/// When `owned` is a proper subset of the chain, `halo` must connect this
/// slice to the ranks owning its neighbours; it is called before each of
/// the four RK stages.
pub fn series_sqif(
    xe: f64,
    p: &SqifParams,
    owned: BlockRange,
    mut halo: Option<&mut dyn HaloExchange>,
) -> Result<UnitSum, KernelError> {
    p.validate()?;
    if owned.end() > p.n_units {
        return Err(KernelError::InvalidConfig(format!(
            "owned range {}..{} exceeds {} units",
            owned.start,
            owned.end(),
            p.n_units
        )));
    }
    let n = owned.len;
    if n == 0 {
        return Ok(UnitSum::default());
    }
    let full = n == p.n_units;
    if !full && halo.is_none() {
        return Err(KernelError::MissingHalo {
            start: owned.start,
            end: owned.end(),
            n: p.n_units,
        });
    }

    let offsets = phase_offsets(xe, p, owned);
    let steps = p.steps();
    let transient = steps / 2;
    let dt = p.dt;

    let mut phi = vec![0.0; n];
    let mut stage = vec![0.0; n + 2];
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut settled = phi.clone();

    let mut fill_halo = |stage: &mut [f64]| -> Result<(), KernelError> {
        let (first, last) = (stage[1], stage[n]);
        let (left, right) = match halo.as_deref_mut() {
            Some(h) => h.exchange(first, last)?,
            None => (first, last),
        };
        stage[0] = left;
        stage[n + 1] = right;
        Ok(())
    };

    for step in 0..steps {
        if step == transient {
            settled.copy_from_slice(&phi);
        }
        for s in 0..4 {
            let factor = match s {
                0 => 0.0,
                1 | 2 => 0.5 * dt,
                _ => dt,
            };
            if s == 0 {
                stage[1..=n].copy_from_slice(&phi);
            } else {
                let prev = &k[s - 1];
                for ((st, ph), kv) in stage[1..=n].iter_mut().zip(&phi).zip(prev) {
                    *st = ph + factor * kv;
                }
            }
            fill_halo(&mut stage)?;
            rhs_into(&stage, &offsets, p, &mut k[s]);
        }
        for (i, ph) in phi.iter_mut().enumerate() {
            *ph += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        if let Some(bad) = phi.iter().position(|x| !x.is_finite()) {
            return Err(KernelError::NonFinite {
                step,
                unit: owned.start + bad,
            });
        }
    }

    let duration = (steps - transient) as f64 * dt;
    let sum = phi
        .iter()
        .zip(&settled)
        .map(|(end, start)| (end - start) / duration)
        .sum();
    Ok(UnitSum { sum, units: n })
}

/// Serial sweep over every flux point with the whole chain.
pub fn sqif_sweep_serial(p: &SqifParams) -> Result<TransferCurve, KernelError> {
    p.validate()?;
    let all = BlockRange::new(0, p.n_units);
    let voltage = p
        .flux
        .iter()
        .map(|&xe| series_sqif(xe, p, all, None).map(|s| s.mean()))
        .collect::<Result<_, _>>()?;
    Ok(TransferCurve {
        flux: p.flux.clone(),
        voltage,
    })
}

/// Task-parallel sweep: flux points are block-partitioned over ranks, each
/// rank integrates the whole chain for its points. Curve lands on rank 0.
pub fn sqif_sweep_tp(
    ctx: &mut WorkerCtx,
    p: &SqifParams,
) -> Result<Option<TransferCurve>, KernelError> {
    sqif_sweep_tp_with(ctx, p, block_partition)
}

pub fn sqif_sweep_tp_with(
    ctx: &mut WorkerCtx,
    p: &SqifParams,
    partitioner: Partitioner,
) -> Result<Option<TransferCurve>, KernelError> {
    p.validate()?;
    let mine = my_block(partitioner, p.flux.len(), ctx.world_size(), ctx.rank())?;
    let all = BlockRange::new(0, p.n_units);
    let local: Vec<f64> = p.flux[mine.as_range()]
        .iter()
        .map(|&xe| series_sqif(xe, p, all, None).map(|s| s.mean()))
        .collect::<Result<_, _>>()?;
    Ok(ctx.gather(0, &local)?.map(|g| TransferCurve {
        flux: p.flux.clone(),
        voltage: g.data,
    }))
}

/// Halo exchange over the transport with the ranks owning the neighbouring
/// slices. Chain ends reflect.
struct NeighbourHalo<'a> {
    ctx: &'a mut WorkerCtx,
    left: Option<Rank>,
    right: Option<Rank>,
}

impl HaloExchange for NeighbourHalo<'_> {
    fn exchange(&mut self, first: f64, last: f64) -> Result<(f64, f64), KernelError> {
        if let Some(l) = self.left {
            self.ctx
                .send_raw(l, TAG_HALO, Payload::real_row(&[first]))?;
        }
        if let Some(r) = self.right {
            self.ctx.send_raw(r, TAG_HALO, Payload::real_row(&[last]))?;
        }
        let left = match self.left {
            Some(l) => self.ctx.recv_real(l, TAG_HALO)?[(0, 0)],
            None => first,
        };
        let right = match self.right {
            Some(r) => self.ctx.recv_real(r, TAG_HALO)?[(0, 0)],
            None => last,
        };
        Ok((left, right))
    }
}

/// Data-parallel sweep: units are block-partitioned over ranks and every
/// rank integrates its slice at every flux point, exchanging one boundary
/// value with each neighbour per RK stage. Per-point unit sums are reduced
/// to rank 0.
pub fn sqif_sweep_dp(
    ctx: &mut WorkerCtx,
    p: &SqifParams,
) -> Result<Option<TransferCurve>, KernelError> {
    p.validate()?;
    let map = DistMap::cols(ctx.world_size())?;
    let owned = map.local_range(p.n_units, ctx.rank())?;
    let (left, right) = if owned.is_empty() {
        (None, None)
    } else {
        let left = (owned.start > 0)
            .then(|| map.owner_of(p.n_units, owned.start - 1))
            .transpose()?;
        let right = (owned.end() < p.n_units)
            .then(|| map.owner_of(p.n_units, owned.end()))
            .transpose()?;
        (left, right)
    };

    let mut sums = Vec::with_capacity(p.flux.len());
    for &xe in &p.flux {
        let part = if left.is_none() && right.is_none() {
            series_sqif(xe, p, owned, None)?
        } else {
            let mut halo = NeighbourHalo {
                ctx: &mut *ctx,
                left,
                right,
            };
            series_sqif(xe, p, owned, Some(&mut halo))?
        };
        sums.push(part.sum);
    }
    let total = ctx.reduce(0, ReduceOp::Sum, &sums)?;
    Ok(total.map(|t| TransferCurve {
        flux: p.flux.clone(),
        voltage: t.into_iter().map(|s| s / p.n_units as f64).collect(),
    }))
}
