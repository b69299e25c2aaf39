//! Train the randomized autoencoder, watch reconstruction improve with
//! hidden width, and time a large train+project task.
//!
//! Run with: `cargo run --release --example autoencoder_reduction`

use std::time::Instant;

use ndarray::Array2;
use sparserec::elm_ae::{load_model, project_values, save_model, train_elm_ae};
use sparserec::linalg::{frobenius, gaussian_matrix, seeded_rng};

fn main() -> sparserec::Result<()> {
    // low-rank-ish synthetic data: random factors plus small noise
    let mut rng = seeded_rng(11);
    let n = 200;
    let dim = 256;
    let factors = gaussian_matrix(n, 12, &mut rng);
    let loadings = gaussian_matrix(12, dim, &mut rng);
    let x = factors.dot(&loadings) + gaussian_matrix(n, dim, &mut rng) * 0.05;

    println!("reconstruction error vs hidden width (N={n}, dim={dim}):");
    for hidden in [4, 8, 16, 32, 64] {
        let model = train_elm_ae(&x, hidden, 100.0, 5)?;
        let err = frobenius(&(&model.reconstruct(&x) - &x)) / frobenius(&x);
        println!("  hidden {hidden:>3}: relative error {err:.4}");
    }

    // the output weights double as a linear projection
    let model = train_elm_ae(&x, 32, 100.0, 5)?;
    let reduced = project_values(&x.row(0).to_owned(), &model)?;
    println!("projected one {dim}-dim sample to {} dims", reduced.len());

    // models serialize losslessly
    let dir = std::env::temp_dir().join("sparserec_example_model.bin");
    save_model(&model, &dir)?;
    let back = load_model(&dir)?;
    assert_eq!(model.beta, back.beta);
    println!("model round-tripped through {} bit-exact", dir.display());
    let _ = std::fs::remove_file(&dir);

    // the headline speed task: 2000 samples x 4000 dims down to 256
    let big = gaussian_matrix(2000, 4000, &mut rng);
    let t = Instant::now();
    let big_model = train_elm_ae(&big, 256, 100.0, 9)?;
    let train_time = t.elapsed();
    let t = Instant::now();
    let mut projected = Array2::<f64>::zeros((2000, 256));
    for (i, row) in big.rows().into_iter().enumerate() {
        projected
            .row_mut(i)
            .assign(&project_values(&row.to_owned(), &big_model)?);
    }
    let project_time = t.elapsed();
    println!(
        "2000x4000 -> 256: train {train_time:.2?}, project {project_time:.2?} (total {:.2?})",
        train_time + project_time
    );
    Ok(())
}
