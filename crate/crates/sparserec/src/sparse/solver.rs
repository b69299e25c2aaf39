//! Coordinate-descent weighted L1 solver and the reweighted L1/2 wrapper.

use ndarray::{Array1, Array2};

use super::{Norm, SolverSchedule, SparseCode};
use crate::error::{Error, Result};

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        // boundary |z| == t lands here: the sparser choice
        0.0
    }
}

fn check_inputs(
    dictionary: &Array2<f64>,
    y: &Array1<f64>,
    lambda: f64,
    weights: &Array1<f64>,
) -> Result<()> {
    if dictionary.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "dictionary has {} rows but target has {} entries",
            dictionary.nrows(),
            y.len()
        )));
    }
    if weights.len() != dictionary.ncols() {
        return Err(Error::Dimension(format!(
            "{} weights for {} dictionary columns",
            weights.len(),
            dictionary.ncols()
        )));
    }
    if !dictionary.iter().all(|v| v.is_finite()) || !y.iter().all(|v| v.is_finite()) {
        return Err(Error::Data("non-finite entries in coding problem".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Parameter("lambda must be nonnegative".into()));
    }
    if weights.iter().any(|w| *w < 0.0) {
        return Err(Error::Parameter("weights must be nonnegative".into()));
    }
    Ok(())
}

/// Largest violation of the subgradient optimality condition for
/// `||y - D w||^2 + lambda * sum_i weights_i |w_i|`:
/// at `w_i = 0` the gradient magnitude may exceed `lambda * weights_i`
/// by at most the returned amount; elsewhere `g_i + lambda w_i sign`
/// must vanish.
pub(crate) fn certificate_violation(
    dictionary: &Array2<f64>,
    residual: &Array1<f64>,
    omega: &Array1<f64>,
    lambda: f64,
    weights: &Array1<f64>,
) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..dictionary.ncols() {
        let g = -2.0 * dictionary.column(j).dot(residual);
        let v = if omega[j] == 0.0 {
            (g.abs() - lambda * weights[j]).max(0.0)
        } else {
            (g + lambda * weights[j] * omega[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Weighted L1 solve started from zero. See [`solve_weighted_l1_from`].
pub fn solve_weighted_l1(
    dictionary: &Array2<f64>,
    y: &Array1<f64>,
    lambda: f64,
    weights: &Array1<f64>,
    schedule: &SolverSchedule,
) -> Result<SparseCode> {
    solve_weighted_l1_from(dictionary, y, lambda, weights, schedule, None)
}

/// Minimizes `||y - D w||^2 + lambda * sum_i weights_i |w_i|` by cyclic
/// coordinate descent with exact per-coordinate minimization, optionally
/// warm-started. Convergence is certified by the subgradient condition at
/// `schedule.inner_tol`; on budget exhaustion the best (current) iterate
/// is returned with `converged = false`.
pub fn solve_weighted_l1_from(
    dictionary: &Array2<f64>,
    y: &Array1<f64>,
    lambda: f64,
    weights: &Array1<f64>,
    schedule: &SolverSchedule,
    init: Option<&Array1<f64>>,
) -> Result<SparseCode> {
    schedule.validate()?;
    check_inputs(dictionary, y, lambda, weights)?;
    let n = dictionary.ncols();

    let col_sq: Vec<f64> = (0..n)
        .map(|j| dictionary.column(j).dot(&dictionary.column(j)))
        .collect();

    let mut omega = match init {
        Some(w0) if w0.len() == n => w0.clone(),
        Some(w0) => {
            return Err(Error::Dimension(format!(
                "warm start has {} entries for {} columns",
                w0.len(),
                n
            )))
        }
        None => Array1::zeros(n),
    };
    let mut residual = y - &dictionary.dot(&omega);

    let objective = |r: &Array1<f64>, w: &Array1<f64>| -> f64 {
        r.dot(r)
            + lambda
                * w.iter()
                    .zip(weights)
                    .map(|(v, wi)| wi * v.abs())
                    .sum::<f64>()
    };

    let mut trace = Vec::new();
    trace.push(objective(&residual, &omega));
    let mut converged = false;
    let mut sweeps = 0usize;

    while sweeps < schedule.max_inner_iter {
        sweeps += 1;
        for j in 0..n {
            if col_sq[j] == 0.0 {
                // zero column: optimality forces the coefficient to zero
                if omega[j] != 0.0 {
                    let w = omega[j];
                    residual.scaled_add(w, &dictionary.column(j));
                    omega[j] = 0.0;
                }
                continue;
            }
            let z = dictionary.column(j).dot(&residual) + col_sq[j] * omega[j];
            let new = soft_threshold(z, lambda * weights[j] / 2.0) / col_sq[j];
            let delta = omega[j] - new;
            if delta != 0.0 {
                residual.scaled_add(delta, &dictionary.column(j));
                omega[j] = new;
            }
        }
        // periodic exact residual refresh against incremental drift
        if sweeps % 64 == 0 {
            residual = y - &dictionary.dot(&omega);
        }
        trace.push(objective(&residual, &omega));

        if certificate_violation(dictionary, &residual, &omega, lambda, weights)
            <= schedule.inner_tol
        {
            // re-verify on an exactly recomputed residual before accepting
            residual = y - &dictionary.dot(&omega);
            if certificate_violation(dictionary, &residual, &omega, lambda, weights)
                <= schedule.inner_tol
            {
                converged = true;
                break;
            }
        }
    }

    residual = y - &dictionary.dot(&omega);
    let norm = if weights.iter().all(|w| *w == 1.0) {
        Norm::L1
    } else {
        Norm::WeightedL1(weights.to_vec())
    };
    let final_obj = objective(&residual, &omega);
    Ok(SparseCode {
        omega,
        lambda,
        norm,
        iterations: sweeps,
        objective: final_obj,
        converged,
        objective_trace: trace,
    })
}

/// Approximately minimizes `||y - D w||^2 + lambda * sum_i |w_i|^(1/2)`
/// by reweighted L1: starting from the plain L1 solution, each round
/// solves a weighted L1 problem with majorization weights
/// `w_i = (|omega_i| + eps)^(-1/2) / 2`. Returns the best iterate seen;
/// an objective increase beyond `inner_tol` marks the result unconverged.
pub fn solve_l_half(
    dictionary: &Array2<f64>,
    y: &Array1<f64>,
    lambda: f64,
    schedule: &SolverSchedule,
) -> Result<SparseCode> {
    schedule.validate()?;
    let n = dictionary.ncols();
    let ones = Array1::from_elem(n, 1.0);

    let half_objective = |omega: &Array1<f64>| -> f64 {
        let r = y - &dictionary.dot(omega);
        r.dot(&r) + lambda * omega.iter().map(|v| v.abs().sqrt()).sum::<f64>()
    };

    let init = solve_weighted_l1(dictionary, y, lambda, &ones, schedule)?;
    let mut iterations = init.iterations;
    let mut inner_converged = init.converged;

    let mut best = init.omega.clone();
    let mut best_obj = half_objective(&best);
    let mut current = init.omega;
    let mut prev_obj = best_obj;
    let mut trace = vec![best_obj];
    let mut oscillated = false;

    for _round in 0..schedule.outer_reweight_iters {
        let weights = current.mapv(|v| 0.5 / (v.abs() + schedule.epsilon_smoothing).sqrt());
        let solved =
            solve_weighted_l1_from(dictionary, y, lambda, &weights, schedule, Some(&current))?;
        iterations += solved.iterations;
        inner_converged &= solved.converged;
        current = solved.omega;

        let obj = half_objective(&current);
        trace.push(obj);
        if obj > prev_obj + schedule.inner_tol {
            oscillated = true;
        }
        if obj < best_obj {
            best_obj = obj;
            best = current.clone();
        }
        prev_obj = obj;
    }

    Ok(SparseCode {
        omega: best,
        lambda,
        norm: Norm::LHalf,
        iterations,
        objective: best_obj,
        converged: inner_converged && !oscillated,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, gaussian_vector, seeded_rng};

    fn schedule() -> SolverSchedule {
        SolverSchedule::default()
    }

    fn one_d(d: f64) -> Array2<f64> {
        Array2::from_shape_vec((1, 1), vec![d]).unwrap()
    }

    /// 1D grid-search oracle over [-2, 2] for any penalty.
    fn grid_argmin(y: f64, lambda: f64, penalty: impl Fn(f64) -> f64) -> f64 {
        let mut best_w = 0.0;
        let mut best = f64::INFINITY;
        let steps = 4_000_000usize;
        for i in 0..=steps {
            let w = -2.0 + 4.0 * i as f64 / steps as f64;
            let obj = (y - w) * (y - w) + lambda * penalty(w);
            if obj < best {
                best = obj;
                best_w = w;
            }
        }
        best_w
    }

    #[test]
    fn scalar_soft_threshold_midpoint() {
        // objective (1-w)^2 + |w| is minimized at 0.5
        let code = solve_weighted_l1(
            &one_d(1.0),
            &ndarray::array![1.0],
            1.0,
            &ndarray::array![1.0],
            &schedule(),
        )
        .unwrap();
        assert!((code.omega[0] - 0.5).abs() < 1e-9);
        assert!(code.converged);
    }

    #[test]
    fn scalar_below_threshold_is_zero() {
        let code = solve_weighted_l1(
            &one_d(1.0),
            &ndarray::array![0.3],
            1.0,
            &ndarray::array![1.0],
            &schedule(),
        )
        .unwrap();
        assert_eq!(code.omega[0], 0.0);
    }

    #[test]
    fn boundary_tie_prefers_zero() {
        // |y| exactly at the lambda/2 threshold
        let code = solve_weighted_l1(
            &one_d(1.0),
            &ndarray::array![0.5],
            1.0,
            &ndarray::array![1.0],
            &schedule(),
        )
        .unwrap();
        assert_eq!(code.omega[0], 0.0);
    }

    #[test]
    fn tiny_lambda_recovers_inverse() {
        let mut rng = seeded_rng(5);
        let d = gaussian_matrix(6, 6, &mut rng);
        let x_true = gaussian_vector(6, &mut rng);
        let y = d.dot(&x_true);
        let sched = SolverSchedule {
            max_inner_iter: 20_000,
            ..schedule()
        };
        let code = solve_weighted_l1(&d, &y, 1e-12, &Array1::from_elem(6, 1.0), &sched).unwrap();
        for (a, b) in code.omega.iter().zip(x_true.iter()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn grid_oracle_matches_l_half_scalar() {
        let want = grid_argmin(1.0, 0.1, |w| w.abs().sqrt());
        let code = solve_l_half(&one_d(1.0), &ndarray::array![1.0], 0.1, &schedule()).unwrap();
        assert!(
            (code.omega[0] - want).abs() <= 1e-4,
            "solver {} oracle {}",
            code.omega[0],
            want
        );
    }

    #[test]
    fn l_half_zero_lambda_is_least_squares() {
        let mut rng = seeded_rng(8);
        let d = gaussian_matrix(5, 5, &mut rng);
        let x_true = gaussian_vector(5, &mut rng);
        let y = d.dot(&x_true);
        let sched = SolverSchedule {
            max_inner_iter: 20_000,
            ..schedule()
        };
        let code = solve_l_half(&d, &y, 0.0, &sched).unwrap();
        for (a, b) in code.omega.iter().zip(x_true.iter()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn l_half_huge_lambda_is_zero() {
        let y = ndarray::array![1.0];
        let lambda = 10.0 * y.dot(&y);
        let code = solve_l_half(&one_d(1.0), &y, lambda, &schedule()).unwrap();
        assert_eq!(code.omega[0], 0.0);
        let want = grid_argmin(1.0, lambda, |w| w.abs().sqrt());
        assert!(want.abs() <= 1e-4);
    }

    #[test]
    fn zero_column_coefficient_stays_zero() {
        let d = Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let y = ndarray::array![1.0, 1.0];
        let code = solve_weighted_l1(&d, &y, 0.5, &ndarray::array![1.0, 1.0], &schedule()).unwrap();
        assert_eq!(code.omega[1], 0.0);
        assert!(code.converged);
    }

    #[test]
    fn objective_trace_is_monotone() {
        let mut rng = seeded_rng(17);
        let d = gaussian_matrix(20, 35, &mut rng);
        let y = gaussian_vector(20, &mut rng);
        let code =
            solve_weighted_l1(&d, &y, 0.3, &Array1::from_elem(35, 1.0), &schedule()).unwrap();
        for pair in code.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn objective_is_recomputable() {
        let mut rng = seeded_rng(23);
        let d = gaussian_matrix(15, 25, &mut rng);
        let y = gaussian_vector(15, &mut rng);
        let code =
            solve_weighted_l1(&d, &y, 0.2, &Array1::from_elem(25, 1.0), &schedule()).unwrap();
        let re = code.recompute_objective(&d, &y);
        assert!((re - code.objective).abs() <= 1e-9 * re.abs().max(1.0));

        let half = solve_l_half(&d, &y, 0.2, &schedule()).unwrap();
        let re = half.recompute_objective(&d, &y);
        assert!((re - half.objective).abs() <= 1e-9 * re.abs().max(1.0));
    }

    #[test]
    fn l_half_no_worse_than_l1_under_half_penalty() {
        let mut rng = seeded_rng(31);
        for _ in 0..10 {
            let d = gaussian_matrix(12, 24, &mut rng);
            let y = gaussian_vector(12, &mut rng);
            let l1 =
                solve_weighted_l1(&d, &y, 0.15, &Array1::from_elem(24, 1.0), &schedule()).unwrap();
            let half = solve_l_half(&d, &y, 0.15, &schedule()).unwrap();
            let l1_as_half = {
                let r = &y - &d.dot(&l1.omega);
                r.dot(&r) + 0.15 * l1.omega.iter().map(|v| v.abs().sqrt()).sum::<f64>()
            };
            assert!(half.objective <= l1_as_half + 1e-12);
        }
    }

    #[test]
    fn certificate_holds_on_random_problems() {
        let mut rng = seeded_rng(41);
        for _ in 0..20 {
            let mut d = gaussian_matrix(40, 80, &mut rng);
            for j in 0..80 {
                let n = d.column(j).dot(&d.column(j)).sqrt();
                d.column_mut(j).mapv_inplace(|v| v / n);
            }
            let y = gaussian_vector(40, &mut rng);
            let code =
                solve_weighted_l1(&d, &y, 0.1, &Array1::from_elem(80, 1.0), &schedule()).unwrap();
            assert!(code.converged);
            let r = &y - &d.dot(&code.omega);
            let viol = certificate_violation(&d, &r, &code.omega, 0.1, &Array1::from_elem(80, 1.0));
            assert!(viol <= 1e-5, "violation {viol}");
        }
    }

    #[test]
    fn budget_exhaustion_returns_best_iterate_unconverged() {
        let mut rng = seeded_rng(55);
        let d = gaussian_matrix(40, 80, &mut rng);
        let y = gaussian_vector(40, &mut rng);
        let sched = SolverSchedule {
            max_inner_iter: 1,
            inner_tol: 1e-14,
            ..schedule()
        };
        let code = solve_weighted_l1(&d, &y, 0.01, &Array1::from_elem(80, 1.0), &sched).unwrap();
        assert!(!code.converged);
        assert_eq!(code.iterations, 1);
        assert!(code.omega.iter().all(|v| v.is_finite()));
        // the single sweep still reduced the objective from zero-init
        assert!(code.objective <= y.dot(&y) + 1e-12);
    }

    #[test]
    fn rejects_negative_lambda_and_bad_dims() {
        let d = one_d(1.0);
        let y = ndarray::array![1.0];
        let w = ndarray::array![1.0];
        assert!(solve_weighted_l1(&d, &y, -1.0, &w, &schedule()).is_err());
        let wrong_w = ndarray::array![1.0, 1.0];
        assert!(solve_weighted_l1(&d, &y, 1.0, &wrong_w, &schedule()).is_err());
        let bad = Array2::from_shape_vec((1, 1), vec![f64::NAN]).unwrap();
        assert!(solve_weighted_l1(&bad, &y, 1.0, &w, &schedule()).is_err());
    }
}
