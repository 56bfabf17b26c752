//! Batched FFT helpers over the `n x n x n` canonical layout.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse plans of one length.
#[derive(Clone)]
pub struct FftPair {
    pub len: usize,
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPair").field("len", &self.len).finish()
    }
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }
}

/// Unnormalized DFT `X_j = sum_k x_k exp(-2 pi i j k / n)`.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if !buf.is_empty() {
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    }
    buf
}

/// Separable 3-D transform on a cube of side `n` stored in the canonical
/// layout (axis 0 outermost, axis 2 contiguous).
#[derive(Debug, Clone)]
pub struct Fft3 {
    n: usize,
    plans: FftPair,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        Fft3 { n, plans: FftPair::new(n) }
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Forward 3-D DFT, unnormalized.
    pub fn forward(&self, data: &mut [Complex64], ws: &mut Fft3Workspace) {
        self.run(data, ws, false);
    }

    /// Inverse 3-D DFT including the `1/n^3` factor.
    pub fn inverse(&self, data: &mut [Complex64], ws: &mut Fft3Workspace) {
        self.run(data, ws, true);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    pub fn workspace(&self) -> Fft3Workspace {
        Fft3Workspace {
            strip: vec![Complex64::default(); STRIP * self.n],
            scratch: vec![Complex64::default(); self.plans.scratch_len()],
        }
    }

    fn run(&self, data: &mut [Complex64], ws: &mut Fft3Workspace, inverse: bool) {
        let n = self.n;
        let n2 = n * n;
        assert_eq!(data.len(), n * n2);
        let plan = if inverse { &self.plans.inverse } else { &self.plans.forward };
        let Fft3Workspace { strip, scratch } = ws;
        // x2 lines are contiguous, one batched call for the whole cube
        plan.process_with_scratch(data, scratch);
        // x1 lines sit n apart inside a slab, time lines n^2 apart
        for (outer, stride) in [(n, n), (n, n2)] {
            for o in 0..outer {
                let base = if stride == n { o * n2 } else { o * n };
                for j0 in (0..n).step_by(STRIP) {
                    let w = STRIP.min(n - j0);
                    let lines = &mut strip[..w * n];
                    gather_strip(&data[base + j0..], stride, w, n, lines, |d, s| *d = s);
                    plan.process_with_scratch(lines, scratch);
                    scatter_strip(lines, w, n, &mut data[base + j0..], stride, |d, s| *d = s);
                }
            }
        }
    }

    pub fn plans(&self) -> &FftPair {
        &self.plans
    }
}

/// Lines gathered per strip on the non-contiguous axes. Eight complex
/// values span two cache lines, and a strip of `8 n` stays in L1.
pub(crate) const STRIP: usize = 8;

/// Gathers `w` adjacent lines of length `n` whose consecutive entries sit
/// `stride` apart into `strip`, line `c` at `strip[c n .. (c + 1) n]`,
/// combining with `f(&mut target, source)`.
#[inline]
pub(crate) fn gather_strip<S: Copy, D, F: FnMut(&mut D, S)>(
    src: &[S],
    stride: usize,
    w: usize,
    n: usize,
    strip: &mut [D],
    mut f: F,
) {
    for r in 0..n {
        for (c, v) in src[r * stride..r * stride + w].iter().enumerate() {
            f(&mut strip[c * n + r], *v);
        }
    }
}

/// Inverse of [`gather_strip`].
#[inline]
pub(crate) fn scatter_strip<S: Copy, D, F: FnMut(&mut D, S)>(
    strip: &[S],
    w: usize,
    n: usize,
    dst: &mut [D],
    stride: usize,
    mut f: F,
) {
    for r in 0..n {
        for (c, d) in dst[r * stride..r * stride + w].iter_mut().enumerate() {
            f(d, strip[c * n + r]);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fft3Workspace {
    pub(crate) strip: Vec<Complex64>,
    pub(crate) scratch: Vec<Complex64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft3(x: &[Complex64], n: usize) -> Vec<Complex64> {
        let w = |a: usize, b: usize| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (a * b) as f64 / n as f64);
        let mut out = vec![Complex64::default(); n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut s = Complex64::default();
                    for k in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                s += x[(k * n + i) * n + j] * w(a, k) * w(b, i) * w(c, j);
                            }
                        }
                    }
                    out[(a * n + b) * n + c] = s;
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_and_inverts() {
        for n in 1..5 {
            let x: Vec<Complex64> = (0..n * n * n)
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.1).cos()))
                .collect();
            let fft = Fft3::new(n);
            let mut ws = fft.workspace();
            let mut y = x.clone();
            fft.forward(&mut y, &mut ws);
            let expect = naive_dft3(&x, n);
            for (a, b) in y.iter().zip(&expect) {
                assert!((a - b).norm() < 1e-11);
            }
            fft.inverse(&mut y, &mut ws);
            for (a, b) in y.iter().zip(&x) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn strips_round_trip_with_ragged_width() {
        // n = 11, lines 13 apart, 3 lines per strip
        let n = 11;
        let src: Vec<f64> = (0..n * 13).map(|v| v as f64).collect();
        let mut strip = vec![0.0; 3 * n];
        gather_strip(&src[4..], 13, 3, n, &mut strip, |d, s| *d = s);
        for c in 0..3 {
            for r in 0..n {
                assert_eq!(strip[c * n + r], src[4 + r * 13 + c]);
            }
        }
        let mut back = vec![1.0; n * 13];
        scatter_strip(&strip, 3, n, &mut back[4..], 13, |d, s| *d += s);
        for r in 0..n {
            for c in 0..3 {
                assert_eq!(back[4 + r * 13 + c], 1.0 + src[4 + r * 13 + c]);
            }
        }
    }
}
