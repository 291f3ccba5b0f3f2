//! Three-dimensional FFTs on cubic arrays and the zero-padded free-space
//! convolution used for the Coulomb potential.
//!
//! Arrays are x-major: `idx = (ix * n + iy) * n + iz`. Transforms are
//! unnormalized in both directions; callers apply `1/n³` where needed.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::par;

pub type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn transpose_square(a: &mut [C64], n: usize) {
    const B: usize = 16;
    for ib in (0..n).step_by(B) {
        for jb in (ib..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                let j0 = if ib == jb { i + 1 } else { jb };
                for j in j0..(jb + B).min(n) {
                    a.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Planned forward and inverse transforms of one cubic size.
pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.fwd);
    }

    /// Unnormalized inverse.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inv);
    }

    fn run(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let nn = n * n;
        assert_eq!(data.len(), n * nn);
        let scratch_len = plan.get_inplace_scratch_len();
        par::for_each_chunk(data, nn, |_, slab| {
            let mut scratch = vec![ZERO; scratch_len];
            plan.process_with_scratch(slab, &mut scratch);
            transpose_square(slab, n);
            plan.process_with_scratch(slab, &mut scratch);
            transpose_square(slab, n);
        });
        // x lines: gather per fixed iy into [iz][ix] blocks, transform, scatter
        let mut tmp = vec![ZERO; n * nn];
        {
            let src: &[C64] = data;
            par::for_each_chunk(&mut tmp, nn, |iy, block| {
                for ix in 0..n {
                    let row = &src[(ix * n + iy) * n..(ix * n + iy + 1) * n];
                    for (iz, v) in row.iter().enumerate() {
                        block[iz * n + ix] = *v;
                    }
                }
                let mut scratch = vec![ZERO; scratch_len];
                plan.process_with_scratch(block, &mut scratch);
            });
        }
        let src: &[C64] = &tmp;
        par::for_each_chunk(data, nn, |ix, slab| {
            for iy in 0..n {
                for iz in 0..n {
                    slab[iy * n + iz] = src[(iy * n + iz) * n + ix];
                }
            }
        });
    }
}

#[derive(Clone, Copy)]
struct SyncPtr(*mut C64);
// SAFETY: every task writes a disjoint index set, see `PaddedConvolver::convolve`.
unsafe impl Send for SyncPtr {}
unsafe impl Sync for SyncPtr {}

/// Aperiodic convolution of an `n³` array with a radial kernel, done on a
/// `(2n)³` zero-padded lattice.
///
/// The kernel is given by its continuous Fourier transform sampled on the
/// padded lattice. Only one octant is stored since the kernel is even in each
/// wavenumber component. Transform passes skip lines that are known to be
/// zero on input or discarded on output.
pub struct PaddedConvolver {
    n: usize,
    big: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kernel: Vec<f64>,
}

impl PaddedConvolver {
    /// `kernel(index_norm2)` receives the squared integer wavenumber index on
    /// the padded lattice and must already include the `1/(2n)³` factor.
    pub fn new<F: Fn(f64) -> f64 + Sync>(n: usize, kernel: F) -> Self {
        let big = 2 * n;
        let mut planner = FftPlanner::new();
        let m = n + 1;
        let table = par::map(m * m * m, |i| {
            let (a, b, c) = (i / (m * m), (i / m) % m, i % m);
            kernel((a * a + b * b + c * c) as f64)
        });
        Self {
            n,
            big,
            fwd: planner.plan_fft_forward(big),
            inv: planner.plan_fft_inverse(big),
            kernel: table,
        }
    }

    #[inline]
    fn kernel_at(&self, i: usize, j: usize, k: usize) -> f64 {
        let fold = |x: usize| x.min(self.big - x);
        let m = self.n + 1;
        self.kernel[(fold(i) * m + fold(j)) * m + fold(k)]
    }

    /// Convolve a complex `n³` input. Real and imaginary parts are convolved
    /// independently since the kernel is real and even.
    pub fn convolve(&self, input: &[C64], out: &mut [C64]) {
        let n = self.n;
        let big = self.big;
        let bb = big * big;
        assert_eq!(input.len(), n * n * n);
        assert_eq!(out.len(), n * n * n);
        let scratch_len = self
            .fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len());

        // buf holds x-slabs ix < n only; layout [ix][iy][iz], later [ix][kz][ky]
        let mut buf = vec![ZERO; n * bb];
        par::for_each_chunk(&mut buf, bb, |ix, slab| {
            for iy in 0..n {
                let src = &input[(ix * n + iy) * n..(ix * n + iy + 1) * n];
                slab[iy * big..iy * big + n].copy_from_slice(src);
            }
            let mut scratch = vec![ZERO; scratch_len];
            self.fwd.process_with_scratch(&mut slab[..n * big], &mut scratch);
            transpose_square(slab, big);
            self.fwd.process_with_scratch(slab, &mut scratch);
        });

        let ptr = SyncPtr(buf.as_mut_ptr());
        let tasks = par::map(big, |kz| kz);
        let run_kz = |kz: usize| {
            let p = ptr;
            let mut block = vec![ZERO; bb];
            let mut scratch = vec![ZERO; scratch_len];
            for ix in 0..n {
                let base = (ix * big + kz) * big;
                for ky in 0..big {
                    // SAFETY: reads/writes touch only row (ix, kz), owned by this task
                    block[ky * big + ix] = unsafe { *p.0.add(base + ky) };
                }
            }
            self.fwd.process_with_scratch(&mut block, &mut scratch);
            for ky in 0..big {
                for kx in 0..big {
                    block[ky * big + kx] *= self.kernel_at(kx, ky, kz);
                }
            }
            self.inv.process_with_scratch(&mut block, &mut scratch);
            for ix in 0..n {
                let base = (ix * big + kz) * big;
                for ky in 0..big {
                    unsafe { *p.0.add(base + ky) = block[ky * big + ix] };
                }
            }
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            tasks.into_par_iter().for_each(run_kz);
        }
        #[cfg(not(feature = "parallel"))]
        tasks.into_iter().for_each(run_kz);

        let out_ptr = SyncPtr(out.as_mut_ptr());
        par::for_each_chunk(&mut buf, bb, |ix, slab| {
            let p = out_ptr;
            let mut scratch = vec![ZERO; scratch_len];
            self.inv.process_with_scratch(slab, &mut scratch);
            transpose_square(slab, big);
            self.inv.process_with_scratch(&mut slab[..n * big], &mut scratch);
            for iy in 0..n {
                let dst = (ix * n + iy) * n;
                for iz in 0..n {
                    // SAFETY: slab ix writes only output plane ix
                    unsafe { *p.0.add(dst + iz) = slab[iy * big + iz] };
                }
            }
        });
    }
}
