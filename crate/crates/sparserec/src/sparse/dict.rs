//! Compressed occlusion-dictionary learning by alternating minimization:
//! sparse-code the exemplars over the current atoms, then update each atom
//! along its code-weighted residual direction under a unit-norm constraint.

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rayon::prelude::*;

use super::{solve_weighted_l1_from, SolverSchedule};
use crate::error::{Error, Result};
use crate::linalg::seeded_rng;

/// A learned dictionary of unit-norm occlusion atoms.
#[derive(Debug, Clone)]
pub struct LearnedOcclusionDictionary {
    /// Atom matrix, one unit-norm column per atom (feature_dim x p).
    pub gamma: Array2<f64>,
    /// Atom count.
    pub p: usize,
    /// Sparse-coding weight used during learning.
    pub zeta: f64,
    /// Final squared Frobenius residual ||Z - Gamma Lambda||_F^2.
    pub training_residual: f64,
    /// Residual after each alternation.
    pub residual_trace: Vec<f64>,
}

fn code_columns(
    z: &Array2<f64>,
    gamma: &Array2<f64>,
    zeta: f64,
    schedule: &SolverSchedule,
    warm: Option<&Array2<f64>>,
) -> Result<Array2<f64>> {
    let n = z.ncols();
    let p = gamma.ncols();
    let ones = Array1::from_elem(p, 1.0);
    let cols: Vec<Array1<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let y = z.column(j).to_owned();
            let init = warm.map(|w| w.column(j).to_owned());
            solve_weighted_l1_from(gamma, &y, zeta, &ones, schedule, init.as_ref()).map(|c| c.omega)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut codes = Array2::<f64>::zeros((p, n));
    for (j, c) in cols.into_iter().enumerate() {
        codes.column_mut(j).assign(&c);
    }
    Ok(codes)
}

/// Learns `p` unit-norm atoms compressing the columns of `Z`.
///
/// Alternates (a) coding every column of `Z` over the current atoms with
/// an L1 weight of `zeta`, and (b) sequentially replacing each atom by the
/// unit-norm minimizer of the code-fixed residual restricted to the
/// columns that use it. Atoms used by no column are reseeded from the
/// worst-reconstructed column. Stops when the relative residual decrease
/// falls below `schedule.inner_tol` or after `schedule.max_alternations`;
/// the best iterate is returned.
pub fn learn_compressed_dictionary(
    z: &Array2<f64>,
    p: usize,
    zeta: f64,
    schedule: &SolverSchedule,
    seed: u64,
) -> Result<LearnedOcclusionDictionary> {
    schedule.validate()?;
    let (m, n) = z.dim();
    if p < 1 {
        return Err(Error::Parameter("atom count p must be >= 1".into()));
    }
    if p > n {
        return Err(Error::Parameter(format!(
            "atom count p = {p} exceeds exemplar count {n}"
        )));
    }
    if !(zeta > 0.0) {
        return Err(Error::Parameter("zeta must be positive".into()));
    }
    if !z.iter().all(|v| v.is_finite()) {
        return Err(Error::Data("non-finite entries in exemplar matrix".into()));
    }
    for j in 0..n {
        if z.column(j).iter().all(|v| *v == 0.0) {
            return Err(Error::Data(format!("exemplar column {j} is all zero")));
        }
    }

    // seed atoms from distinct exemplar columns
    let mut rng = seeded_rng(seed);
    let picks = sample(&mut rng, n, p);
    let mut gamma = Array2::<f64>::zeros((m, p));
    for (a, j) in picks.into_iter().enumerate() {
        let col = z.column(j);
        let norm = col.dot(&col).sqrt();
        gamma.column_mut(a).assign(&(&col / norm));
    }

    let mut best_gamma = gamma.clone();
    let mut best_residual = f64::INFINITY;
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;

    // per-coding budgets stay bounded: alternations revisit every column,
    // warm starts keep later codings cheap, and certificate precision past
    // 1e-5 does not move the residual trace
    let coding_schedule = SolverSchedule {
        max_inner_iter: schedule.max_inner_iter.min(500),
        inner_tol: schedule.inner_tol.max(1e-5),
        ..schedule.clone()
    };
    let mut codes = Array2::<f64>::zeros((p, n));

    for alt in 0..schedule.max_alternations {
        let warm = if alt == 0 { None } else { Some(&codes) };
        codes = code_columns(z, &gamma, zeta, &coding_schedule, warm)?;

        // residual matrix R = Z - Gamma * Codes, kept in sync during updates
        let mut r = z - &gamma.dot(&codes);

        for a in 0..p {
            let row = codes.row(a);
            let used: Vec<usize> = (0..n).filter(|&j| row[j] != 0.0).collect();
            if used.is_empty() {
                // dead atom: reseed from the worst-reconstructed column
                let mut worst_j = 0;
                let mut worst = -1.0;
                for j in 0..n {
                    let e = r.column(j).dot(&r.column(j));
                    if e > worst {
                        worst = e;
                        worst_j = j;
                    }
                }
                let col = z.column(worst_j);
                let norm = col.dot(&col).sqrt();
                gamma.column_mut(a).assign(&(&col / norm));
                continue;
            }
            // direction v = sum_j (R_j + d_a c_aj) c_aj = R c^T + d_a ||c||^2
            let mut v = Array1::<f64>::zeros(m);
            let mut csq = 0.0;
            for &j in &used {
                let c = row[j];
                v.scaled_add(c, &r.column(j).to_owned());
                csq += c * c;
            }
            v.scaled_add(csq, &gamma.column(a).to_owned());
            let vnorm = v.dot(&v).sqrt();
            if vnorm == 0.0 {
                continue;
            }
            v.mapv_inplace(|x| x / vnorm);
            // update residual for affected columns with the atom delta
            let old = gamma.column(a).to_owned();
            let delta = &old - &v;
            for &j in &used {
                let c = row[j];
                let mut col = r.column_mut(j);
                col.scaled_add(c, &delta);
            }
            gamma.column_mut(a).assign(&v);
            debug_assert!((gamma.column(a).dot(&gamma.column(a)) - 1.0).abs() < 1e-10);
        }

        let residual = {
            let fresh = z - &gamma.dot(&codes);
            fresh.iter().map(|v| v * v).sum::<f64>()
        };
        trace.push(residual);
        if residual < best_residual {
            best_residual = residual;
            best_gamma = gamma.clone();
        }
        if prev.is_finite() {
            let rel = (prev - residual) / prev.max(f64::MIN_POSITIVE);
            if rel < schedule.inner_tol {
                break;
            }
        }
        prev = residual;
    }

    Ok(LearnedOcclusionDictionary {
        gamma: best_gamma,
        p,
        zeta,
        training_residual: best_residual,
        residual_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_vector, seeded_rng};

    fn schedule() -> SolverSchedule {
        SolverSchedule::default()
    }

    #[test]
    fn rank_one_data_single_atom() {
        let mut rng = seeded_rng(2);
        let z_col = gaussian_vector(10, &mut rng);
        let mut z = Array2::<f64>::zeros((10, 3));
        for j in 0..3 {
            z.column_mut(j).assign(&z_col);
        }
        let zeta = 0.05;
        let learned = learn_compressed_dictionary(&z, 1, zeta, &schedule(), 7).unwrap();
        let atom = learned.gamma.column(0);
        let znorm = z_col.dot(&z_col).sqrt();
        let cosine = atom.dot(&z_col).abs() / znorm;
        assert!(cosine > 1.0 - 1e-9, "atom not aligned: {cosine}");
        // coding each column shrinks by zeta/2 along the atom
        let per_col = (zeta / 2.0) * (zeta / 2.0);
        assert!(learned.training_residual <= 3.0 * per_col + 1e-9);
    }

    #[test]
    fn orthonormal_exemplars_perfect_dictionary() {
        let n = 6;
        let z = Array2::<f64>::eye(n);
        let sched = SolverSchedule {
            inner_tol: 1e-12,
            ..schedule()
        };
        let learned = learn_compressed_dictionary(&z, n, 1e-9, &sched, 3).unwrap();
        assert!(learned.training_residual <= 1e-8);
    }

    #[test]
    fn atoms_unit_norm_and_residual_monotone() {
        let mut rng = seeded_rng(9);
        let mut z = Array2::<f64>::zeros((16, 24));
        for j in 0..24 {
            z.column_mut(j).assign(&gaussian_vector(16, &mut rng));
        }
        let learned = learn_compressed_dictionary(&z, 6, 0.05, &schedule(), 5).unwrap();
        for a in 0..6 {
            let norm = learned.gamma.column(a).dot(&learned.gamma.column(a)).sqrt();
            assert!((norm - 1.0).abs() <= 1e-10);
        }
        for pair in learned.residual_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "trace not monotone: {pair:?}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let z = Array2::<f64>::eye(4);
        assert!(learn_compressed_dictionary(&z, 5, 0.1, &schedule(), 1).is_err());
        assert!(learn_compressed_dictionary(&z, 0, 0.1, &schedule(), 1).is_err());
        let mut z0 = z.clone();
        z0.column_mut(2).fill(0.0);
        assert!(learn_compressed_dictionary(&z0, 2, 0.1, &schedule(), 1).is_err());
    }

    #[test]
    fn identical_columns_exercise_dead_atom_reseed() {
        // both atoms start identical; one goes unused and gets reseeded
        let mut z = Array2::<f64>::zeros((6, 10));
        for j in 0..10 {
            z[[0, j]] = 2.0;
        }
        let learned = learn_compressed_dictionary(&z, 2, 0.05, &schedule(), 1).unwrap();
        for a in 0..2 {
            let norm = learned.gamma.column(a).dot(&learned.gamma.column(a)).sqrt();
            assert!((norm - 1.0).abs() <= 1e-10);
        }
        // a single direction suffices: residual is just the zeta shrinkage
        let per_col = (0.05f64 / 2.0) * (0.05 / 2.0);
        assert!(learned.training_residual <= 10.0 * per_col + 1e-9);
    }

    #[test]
    fn deterministic_in_seed() {
        let mut rng = seeded_rng(4);
        let mut z = Array2::<f64>::zeros((12, 18));
        for j in 0..18 {
            z.column_mut(j).assign(&gaussian_vector(12, &mut rng));
        }
        let a = learn_compressed_dictionary(&z, 4, 0.05, &schedule(), 11).unwrap();
        let b = learn_compressed_dictionary(&z, 4, 0.05, &schedule(), 11).unwrap();
        assert_eq!(a.gamma, b.gamma);
        assert_eq!(a.training_residual, b.training_residual);
    }
}
