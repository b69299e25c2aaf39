//! Compare L1 against L1/2 coding on synthetic sparse-recovery problems:
//! solution sparsity, support recovery and the certified optimality check.
//!
//! Run with: `cargo run --release --example sparse_coding`

use ndarray::{Array1, Array2};
use rand::Rng;
use sparserec::linalg::{gaussian_matrix, seeded_rng};
use sparserec::sparse::{solve_l_half, solve_weighted_l1, SolverSchedule};

fn sparse_problem(seed: u64) -> (Array2<f64>, Array1<f64>, Vec<usize>) {
    let mut rng = seeded_rng(seed);
    let mut d = gaussian_matrix(40, 80, &mut rng);
    for j in 0..80 {
        let n = d.column(j).dot(&d.column(j)).sqrt();
        d.column_mut(j).mapv_inplace(|v| v / n);
    }
    let mut support: Vec<usize> = Vec::new();
    while support.len() < 5 {
        let j = rng.gen_range(0..80);
        if !support.contains(&j) {
            support.push(j);
        }
    }
    support.sort();
    let mut w = Array1::<f64>::zeros(80);
    for &j in &support {
        let mag: f64 = rng.gen_range(0.5..1.5);
        w[j] = if rng.gen_bool(0.5) { mag } else { -mag };
    }
    let y = d.dot(&w);
    (d, y, support)
}

fn main() -> sparserec::Result<()> {
    let schedule = SolverSchedule::default();
    let lambda = 0.01;
    let ones = Array1::from_elem(80, 1.0);

    let mut l1_nnz = 0.0;
    let mut half_nnz = 0.0;
    let mut half_exact = 0;
    let trials = 50;
    for t in 0..trials {
        let (d, y, support) = sparse_problem(100 + t);
        let l1 = solve_weighted_l1(&d, &y, lambda, &ones, &schedule)?;
        let half = solve_l_half(&d, &y, lambda, &schedule)?;
        l1_nnz += l1.nnz(1e-6) as f64 / trials as f64;
        half_nnz += half.nnz(1e-6) as f64 / trials as f64;
        let got: Vec<usize> = half
            .omega
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > 1e-6)
            .map(|(i, _)| i)
            .collect();
        if got == support {
            half_exact += 1;
        }
        if t == 0 {
            println!(
                "first problem: L1 objective {:.5} ({} iters), L1/2 objective {:.5} ({} iters)",
                l1.objective, l1.iterations, half.objective, half.iterations
            );
        }
    }
    println!("mean nonzeros over {trials} problems (true sparsity 5):");
    println!("  L1   : {l1_nnz:.2}");
    println!("  L1/2 : {half_nnz:.2}");
    println!("L1/2 exact support recovery: {half_exact}/{trials}");

    // scalar sanity: the objective (1 - w)^2 + |w| has its minimum at 1/2
    let d1 = Array2::from_shape_vec((1, 1), vec![1.0]).unwrap();
    let w = solve_weighted_l1(
        &d1,
        &ndarray::array![1.0],
        1.0,
        &ndarray::array![1.0],
        &schedule,
    )?;
    println!(
        "soft-threshold check: argmin of (1-w)^2 + |w| = {}",
        w.omega[0]
    );
    Ok(())
}
