//! Multi-dimensional complex FFT over a grid's storage order, built from
//! one-dimensional `rustfft` plans.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

pub struct FftNd<T: Scalar> {
    dims: Vec<usize>,
    forward: Vec<Arc<dyn Fft<T>>>,
    inverse: Vec<Arc<dyn Fft<T>>>,
}

impl<T: Scalar> FftNd<T> {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = dims.iter().map(|&d| planner.plan_fft_forward(d)).collect();
        let inverse = dims.iter().map(|&d| planner.plan_fft_inverse(d)).collect();
        Self { dims: dims.to_vec(), forward, inverse }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalised forward transform in place.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.apply(data, &self.forward);
    }

    /// Inverse transform in place, scaled by `1/n` so it undoes [`forward`](Self::forward).
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.apply(data, &self.inverse);
        let scale = T::count(self.len()).recip();
        data.iter_mut().for_each(|c| *c = *c * scale);
    }

    pub fn forward_real(&self, values: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward(&mut buf);
        buf
    }

    /// Multiplies the spectrum of `values` by real `gains` and returns the real part.
    pub fn filter_real(&self, values: &[T], gains: &[T]) -> Vec<T> {
        let mut buf = self.forward_real(values);
        buf.iter_mut().zip(gains).for_each(|(c, &g)| *c = *c * g);
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    fn apply(&self, data: &mut [Complex<T>], plans: &[Arc<dyn Fft<T>>]) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        let mut stride = 1;
        let mut lines = vec![Complex::new(T::zero(), T::zero()); data.len()];
        for (axis, plan) in plans.iter().enumerate() {
            let n = self.dims[axis];
            let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
            } else {
                // Gather each line along this axis contiguously, transform, scatter back.
                let block = stride * n;
                let mut line = 0;
                for base in (0..data.len()).step_by(block) {
                    for offset in 0..stride {
                        let dst = &mut lines[line * n..(line + 1) * n];
                        for (i, d) in dst.iter_mut().enumerate() {
                            *d = data[base + offset + i * stride];
                        }
                        line += 1;
                    }
                }
                plan.process_with_scratch(&mut lines, &mut scratch);
                let mut line = 0;
                for base in (0..data.len()).step_by(block) {
                    for offset in 0..stride {
                        let src = &lines[line * n..(line + 1) * n];
                        for (i, s) in src.iter().enumerate() {
                            data[base + offset + i * stride] = *s;
                        }
                        line += 1;
                    }
                }
            }
            stride *= n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(values: &[f64], dims: &[usize]) -> Vec<Complex<f64>> {
        let n: usize = dims.iter().product();
        let coords = |mut i: usize| -> Vec<usize> {
            dims.iter()
                .map(|&d| {
                    let c = i % d;
                    i /= d;
                    c
                })
                .collect()
        };
        (0..n)
            .map(|k| {
                let kc = coords(k);
                (0..n)
                    .map(|j| {
                        let jc = coords(j);
                        let phase: f64 = kc
                            .iter()
                            .zip(&jc)
                            .zip(dims)
                            .map(|((&a, &b), &d)| (a * b) as f64 / d as f64)
                            .sum();
                        Complex::from_polar(values[j], -2.0 * std::f64::consts::PI * phase)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_in_3d() {
        let dims = [4, 5, 6];
        let values: Vec<f64> = (0..120).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let fft = FftNd::new(&dims);
        let ours = fft.forward_real(&values);
        let theirs = naive_dft(&values, &dims);
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn inverse_undoes_forward() {
        let dims = [8, 6];
        let values: Vec<f64> = (0..48).map(|i| (i as f64).sin()).collect();
        let fft = FftNd::new(&dims);
        let back = fft.filter_real(&values, &vec![1.0; 48]);
        for (a, b) in values.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
