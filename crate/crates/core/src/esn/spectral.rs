//! Power-iteration estimate of the spectral radius.
//!
//! Random non-symmetric reservoirs often have a complex-conjugate pair on the
//! spectral circle, where the plain Rayleigh quotient oscillates. Each sweep
//! therefore projects the matrix onto the two-dimensional Krylov space
//! `{x, Wx}` and takes the largest Ritz value magnitude; that handles a real
//! dominant eigenvalue and a dominant complex pair alike.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sparse::CsrMatrix;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub radius: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Largest eigenvalue magnitude of the 2×2 matrix `[[a, b], [c, d]]`.
fn max_eig_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
    } else {
        det.max(0.0).sqrt()
    }
}

/// Estimates `max |λ(w)|`. Stops once the estimate changes by less than
/// `tol` (relative) over three consecutive sweeps, or after `max_iter` sweeps.
pub fn estimate_spectral_radius(w: &CsrMatrix, tol: f64, max_iter: usize) -> SpectralEstimate {
    assert_eq!(w.n_rows(), w.n_cols(), "spectral radius needs a square matrix");
    let n = w.n_rows();
    if n == 0 || w.nnz() == 0 {
        return SpectralEstimate {
            radius: 0.0,
            iterations: 0,
            converged: true,
        };
    }

    let mut start = ChaCha8Rng::seed_from_u64(0x5eed_5eed);
    let mut x: Vec<f64> = (0..n).map(|_| start.random_range(-1.0..1.0)).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);

    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut prev = f64::NAN;
    let mut stable = 0;
    let mut estimate = 0.0;

    for iter in 1..=max_iter {
        w.mul_vec_into(&x, &mut y);
        w.mul_vec_into(&y, &mut z);

        let h11 = dot(&x, &y);
        let mut v: Vec<f64> = y.iter().zip(&x).map(|(yi, xi)| yi - h11 * xi).collect();
        let nv = norm(&v);
        let ny = norm(&y);

        estimate = if nv <= 1e-14 * ny.max(f64::MIN_POSITIVE) {
            h11.abs()
        } else {
            v.iter_mut().for_each(|e| *e /= nv);
            // W q2 = (W y − h11 W x) / |v| = (z − h11 y) / |v|
            let wq2: Vec<f64> = z.iter().zip(&y).map(|(zi, yi)| (zi - h11 * yi) / nv).collect();
            let h21 = dot(&v, &y);
            let h12 = dot(&x, &wq2);
            let h22 = dot(&v, &wq2);
            max_eig_2x2(h11, h12, h21, h22)
        };

        if ny == 0.0 {
            return SpectralEstimate {
                radius: 0.0,
                iterations: iter,
                converged: true,
            };
        }

        if (estimate - prev).abs() <= tol * estimate {
            stable += 1;
            if stable >= 3 {
                return SpectralEstimate {
                    radius: estimate,
                    iterations: iter,
                    converged: true,
                };
            }
        } else {
            stable = 0;
        }
        prev = estimate;

        let nz = norm(&z);
        if nz == 0.0 {
            return SpectralEstimate {
                radius: 0.0,
                iterations: iter,
                converged: true,
            };
        }
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = zi / nz;
        }
    }

    SpectralEstimate {
        radius: estimate,
        iterations: max_iter,
        converged: false,
    }
}
