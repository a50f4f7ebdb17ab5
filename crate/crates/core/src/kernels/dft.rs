//! 1-D inverse DFTs along one axis of a complex matrix, and the circular
//! half-shift applied around them.
//!
//! Every lane is copied into a contiguous buffer, transformed, and scaled by
//! `1/N`, so a lane produces the same bits whether it is transformed as part
//! of the whole matrix or of one rank's block.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place normalized inverse DFT of every lane along `axis`
/// (`Axis(0)`: each column, `Axis(1)`: each row).
pub fn inverse_along(a: &mut Array2<Complex64>, axis: Axis) {
    let n = a.len_of(axis);
    if n == 0 || a.is_empty() {
        return;
    }
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut buf = vec![Complex64::default(); n];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let scale = n as f64;
    for mut lane in a.lanes_mut(axis) {
        for (b, x) in buf.iter_mut().zip(lane.iter()) {
            *b = *x;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (x, b) in lane.iter_mut().zip(&buf) {
            *x = *b / scale;
        }
    }
}

/// Circular shift of both axes by half their extent (rounded down), moving
/// index `0` to `extent / 2`.
pub fn fftshift2<T: Clone>(a: &Array2<T>) -> Array2<T> {
    let (rows, cols) = a.dim();
    let (dr, dc) = (rows / 2, cols / 2);
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        a[((i + rows - dr) % rows, (j + cols - dc) % cols)].clone()
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use ndarray::array;

    use super::*;

    /// Direct `O(N^2)` summation: `x[k] = (1/N) sum_j X[j] e^{+2 pi i jk/N}`.
    fn naive_inverse(v: &[Complex64]) -> Vec<Complex64> {
        let n = v.len();
        (0..n)
            .map(|k| {
                v.iter()
                    .enumerate()
                    .map(|(j, x)| {
                        x * Complex64::from_polar(1.0, 2.0 * PI * (j * k) as f64 / n as f64)
                    })
                    .sum::<Complex64>()
                    / n as f64
            })
            .collect()
    }

    #[test]
    fn matches_direct_summation_on_both_axes() {
        for (rows, cols) in [(1, 1), (5, 3), (6, 7), (16, 12)] {
            let a = Array2::from_shape_fn((rows, cols), |(i, j)| {
                Complex64::new(
                    (i * 7 + j * 3) as f64 % 5.0 - 2.0,
                    (i + 2 * j) as f64 * 0.25 - 1.0,
                )
            });
            let mut by_col = a.clone();
            inverse_along(&mut by_col, Axis(0));
            for j in 0..cols {
                let col: Vec<_> = a.column(j).to_vec();
                for (got, want) in by_col.column(j).iter().zip(naive_inverse(&col)) {
                    assert!((got - want).norm() < 1e-12);
                }
            }
            let mut by_row = a.clone();
            inverse_along(&mut by_row, Axis(1));
            for i in 0..rows {
                let row: Vec<_> = a.row(i).to_vec();
                for (got, want) in by_row.row(i).iter().zip(naive_inverse(&row)) {
                    assert!((got - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shift_moves_origin_to_center() {
        let a = array![[1, 2, 3], [4, 5, 6]];
        // rows shift by 1, cols by 1
        assert_eq!(fftshift2(&a), array![[6, 4, 5], [3, 1, 2]]);
        let b = Array2::from_shape_fn((4, 5), |(i, j)| i * 10 + j);
        assert_eq!(fftshift2(&b)[(2, 2)], 0);
    }

    #[test]
    fn empty_matrix_is_untouched() {
        let mut a: Array2<Complex64> = Array2::zeros((0, 4));
        inverse_along(&mut a, Axis(0));
        inverse_along(&mut a, Axis(1));
        assert_eq!(a.dim(), (0, 4));
    }
}
