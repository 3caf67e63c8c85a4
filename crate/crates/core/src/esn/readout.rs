//! Least-squares fit of the readout.
//!
//! The training trajectory `a(0) … a(N_t)` drives the reservoir from zero; the
//! state `a(0)` only seeds the first update. Rows of the design matrix are
//! `[r(k); 1]` for `k = 1 … N_t` and the targets are `a(k)`. The problem
//! `min ‖R X − A‖²` is solved through a Householder QR of `R` rather than by
//! forming `RᵀR`, which squares the condition number.

use faer::linalg::solvers::SolveLstsq;
use faer::{Mat, MatRef};
use rand::Rng;

use super::{EsnError, EsnModel, Readout};
use crate::mfe::{Trajectory, N_MODES};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Number of regression rows `N_t`.
    pub n_samples: usize,
    /// `‖R W_outᵀ − A‖²` at the solution.
    pub residual: f64,
    /// `‖A‖²`.
    pub target_norm_sq: f64,
    /// `min |R_ii| / max |R_ii|` of the QR factor, a cheap conditioning hint.
    pub diagonal_ratio: f64,
    pub warnings: Vec<String>,
}

/// Design matrix `R` (`N_t × (N_r + 1)`) and targets `A` (`N_t × 9`) for a
/// training trajectory, using `rng` for the reservoir noise.
pub fn design_matrix<R: Rng + ?Sized>(
    model: &EsnModel,
    training: &Trajectory,
    rng: &mut R,
) -> Result<(Mat<f64>, Mat<f64>), EsnError> {
    if training.len() < 2 {
        return Err(EsnError::InsufficientTraining {
            needed: 2,
            got: training.len(),
        });
    }
    let n = model.n_reservoir();
    let rows = training.len() - 1;
    let mut design = Mat::<f64>::zeros(rows, n + 1);
    let mut targets = Mat::<f64>::zeros(rows, N_MODES);

    let mut r = vec![0.0; n];
    let mut next = vec![0.0; n];
    let noise = model.hyperparameters().noise_amplitude;
    for k in 0..rows {
        let a = &training.states[k];
        if !a.is_finite() {
            return Err(EsnError::NonFiniteInput { index: k });
        }
        model.step_reservoir(&r, a, noise, rng, &mut next);
        std::mem::swap(&mut r, &mut next);
        for (i, v) in r.iter().enumerate() {
            design[(k, i)] = *v;
        }
        design[(k, n)] = 1.0;
        let target = &training.states[k + 1];
        if !target.is_finite() {
            return Err(EsnError::NonFiniteInput { index: k + 1 });
        }
        for j in 0..N_MODES {
            targets[(k, j)] = target[j];
        }
    }
    Ok((design, targets))
}

/// Solves `min ‖design · X − targets‖² + ridge · ‖X_reservoir‖²` by QR.
/// The last design column (the constant) is never penalized.
/// Returns `X` (`ncols × ntargets`) and the diagonal ratio of the R factor.
pub fn solve_least_squares(
    design: MatRef<'_, f64>,
    targets: MatRef<'_, f64>,
    ridge: f64,
) -> Result<(Mat<f64>, f64), EsnError> {
    let (rows, cols) = (design.nrows(), design.ncols());
    if targets.nrows() != rows {
        return Err(EsnError::DimensionMismatch(format!(
            "{rows} design rows but {} target rows",
            targets.nrows()
        )));
    }

    let (system, rhs) = if ridge > 0.0 {
        let extra = cols - 1;
        let mut system = Mat::<f64>::zeros(rows + extra, cols);
        system.as_mut().get_mut(..rows, ..).copy_from(design);
        let s = ridge.sqrt();
        for i in 0..extra {
            system[(rows + i, i)] = s;
        }
        let mut rhs = Mat::<f64>::zeros(rows + extra, targets.ncols());
        rhs.as_mut().get_mut(..rows, ..).copy_from(targets);
        (system, rhs)
    } else {
        (design.to_owned(), targets.to_owned())
    };

    if system.nrows() < cols {
        return Err(EsnError::InsufficientTraining {
            needed: cols,
            got: system.nrows(),
        });
    }

    let qr = system.qr();
    let r = qr.thin_R();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..cols {
        let d = r[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio > f64::EPSILON * cols as f64) {
        return Err(EsnError::RankDeficient { ratio });
    }
    Ok((qr.solve_lstsq(&rhs), ratio))
}

/// `‖design · solution − targets‖²` in the Frobenius norm.
pub fn residual(design: MatRef<'_, f64>, solution: MatRef<'_, f64>, targets: MatRef<'_, f64>) -> f64 {
    let fitted = design * solution;
    let mut acc = 0.0;
    for j in 0..targets.ncols() {
        for i in 0..targets.nrows() {
            let e = fitted[(i, j)] - targets[(i, j)];
            acc += e * e;
        }
    }
    acc
}

/// Converts a `(N_r + 1) × 9` solution into the row-major `W_out` layout.
pub fn readout_from_solution(solution: MatRef<'_, f64>) -> Readout {
    let cols = solution.nrows();
    let mut weights = vec![0.0; N_MODES * cols];
    for j in 0..N_MODES {
        for i in 0..cols {
            weights[j * cols + i] = solution[(i, j)];
        }
    }
    Readout { weights }
}

/// The `(N_r + 1) × 9` view of a readout, the inverse of
/// [`readout_from_solution`].
pub fn solution_from_readout(readout: &Readout) -> Mat<f64> {
    let cols = readout.weights.len() / N_MODES;
    Mat::from_fn(cols, N_MODES, |i, j| readout.weights[j * cols + i])
}

pub(super) fn train<R: Rng + ?Sized>(
    model: &EsnModel,
    training: &Trajectory,
    rng: &mut R,
) -> Result<(Readout, TrainingReport), EsnError> {
    let hp = model.hyperparameters();
    let mut warnings = Vec::new();
    if training.len() < hp.n_reservoir + 2 {
        if hp.ridge == 0.0 {
            return Err(EsnError::InsufficientTraining {
                needed: hp.n_reservoir + 2,
                got: training.len(),
            });
        }
        warnings.push(format!(
            "training set of {} samples is shorter than the reservoir ({}); relying on the ridge term",
            training.len(),
            hp.n_reservoir
        ));
    }
    if (training.dt_sample - hp.dt_model).abs() > 1e-9 * hp.dt_model {
        warnings.push(format!(
            "training data sampled every {} but the model step is {}",
            training.dt_sample, hp.dt_model
        ));
    }

    let (design, targets) = design_matrix(model, training, rng)?;
    let (solution, diagonal_ratio) = solve_least_squares(design.as_ref(), targets.as_ref(), hp.ridge)?;
    let res = residual(design.as_ref(), solution.as_ref(), targets.as_ref());
    let target_norm_sq = targets.as_ref().squared_norm_l2();

    Ok((
        readout_from_solution(solution.as_ref()),
        TrainingReport {
            n_samples: design.nrows(),
            residual: res,
            target_norm_sq,
            diagonal_ratio,
            warnings,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recovers_exact_linear_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (rows, cols) = (80, 12);
        let design = Mat::from_fn(rows, cols, |_, j| {
            if j == cols - 1 { 1.0 } else { rng.random_range(-1.0..1.0) }
        });
        let truth = Mat::from_fn(cols, 3, |i, j| (i as f64 - 2.0 * j as f64) * 0.1);
        let targets = &design * &truth;
        let (x, ratio) = solve_least_squares(design.as_ref(), targets.as_ref(), 0.0).unwrap();
        assert!(ratio > 0.0);
        assert!((&x - &truth).norm_max() < 1e-12);
        assert!(residual(design.as_ref(), x.as_ref(), targets.as_ref()) < 1e-24);
    }

    #[test]
    fn detects_rank_deficiency() {
        let design = Mat::from_fn(20, 3, |i, j| if j == 2 { i as f64 } else { 2.0 * i as f64 });
        let targets = Mat::from_fn(20, 1, |i, _| i as f64);
        assert!(matches!(
            solve_least_squares(design.as_ref(), targets.as_ref(), 0.0),
            Err(EsnError::RankDeficient { .. })
        ));
        // a ridge term restores a unique solution
        assert!(solve_least_squares(design.as_ref(), targets.as_ref(), 1e-3).is_ok());
    }

    #[test]
    fn layout_round_trip() {
        let x = Mat::from_fn(7, N_MODES, |i, j| (i * 10 + j) as f64);
        let r = readout_from_solution(x.as_ref());
        assert_eq!(r.weights[2 * 7 + 3], 32.0);
        assert_eq!(solution_from_readout(&r), x);
    }
}
