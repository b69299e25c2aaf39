//! Compress a redundant family of occlusion patterns into a few unit-norm
//! atoms and show the compressed dictionary beating naive column picking
//! on held-out patterns.
//!
//! Run with: `cargo run --release --example occlusion_dictionary`

use ndarray::{Array1, Array2};
use rand::Rng;
use sparserec::linalg::seeded_rng;
use sparserec::sparse::{learn_compressed_dictionary, solve_weighted_l1, SolverSchedule};

/// 8x8 image with one rectangle of ones, flattened.
fn block_pattern(rng: &mut rand_chacha::ChaCha8Rng) -> Array1<f64> {
    let (h, w) = (8usize, 8usize);
    let bh = rng.gen_range(2..=5usize);
    let bw = rng.gen_range(2..=5usize);
    let top = rng.gen_range(0..=(h - bh));
    let left = rng.gen_range(0..=(w - bw));
    let mut img = Array2::<f64>::zeros((h, w));
    for y in top..top + bh {
        for x in left..left + bw {
            img[[y, x]] = 1.0;
        }
    }
    Array1::from_iter(img.iter().copied())
}

fn coding_residual(dict: &Array2<f64>, x: &Array1<f64>, zeta: f64, s: &SolverSchedule) -> f64 {
    let ones = Array1::from_elem(dict.ncols(), 1.0);
    let code = solve_weighted_l1(dict, x, zeta, &ones, s).unwrap();
    let r = x - &dict.dot(&code.omega);
    r.dot(&r)
}

fn main() -> sparserec::Result<()> {
    let schedule = SolverSchedule::default();
    let zeta = 0.05;
    let mut rng = seeded_rng(902);

    // a full occlusion basis for 8x8 images would need 64 identity atoms;
    // the structured patterns below compress into 8
    let mut z = Array2::<f64>::zeros((64, 40));
    for j in 0..40 {
        z.column_mut(j).assign(&block_pattern(&mut rng));
    }
    let learned = learn_compressed_dictionary(&z, 8, zeta, &schedule, 3)?;
    println!(
        "compressed 40 patterns (64-dim) into {} atoms; training residual {:.3}",
        learned.p, learned.training_residual
    );
    println!(
        "residual after each alternation: {:?}",
        learned
            .residual_trace
            .iter()
            .map(|r| (r * 100.0).round() / 100.0)
            .collect::<Vec<_>>()
    );

    // held-out evaluation against a naive baseline of raw exemplar columns
    let held: Vec<Array1<f64>> = (0..40).map(|_| block_pattern(&mut rng)).collect();
    let picks = rand::seq::index::sample(&mut rng, 40, 8);
    let mut baseline = Array2::<f64>::zeros((64, 8));
    for (a, j) in picks.into_iter().enumerate() {
        let col = z.column(j);
        let n = col.dot(&col).sqrt();
        baseline.column_mut(a).assign(&(&col / n));
    }
    let learned_err: f64 = held
        .iter()
        .map(|x| coding_residual(&learned.gamma, x, zeta, &schedule))
        .sum::<f64>()
        / held.len() as f64;
    let baseline_err: f64 = held
        .iter()
        .map(|x| coding_residual(&baseline, x, zeta, &schedule))
        .sum::<f64>()
        / held.len() as f64;
    println!(
        "held-out reconstruction error: learned {learned_err:.3} vs raw columns {baseline_err:.3}"
    );
    Ok(())
}
