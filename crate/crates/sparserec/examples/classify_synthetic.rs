//! Run the three pipeline variants on a clean synthetic dataset and
//! compare recognition rate, code sparsity and coding time.
//!
//! Run with: `cargo run --release --example classify_synthetic`

use sparserec::bench::{run_experiment, ExperimentConfig};

fn main() -> sparserec::Result<()> {
    let base = "
seed = 1
lambda = 0.001
dataset.synth.classes = 8
dataset.synth.per_class = 12
dataset.synth.height = 32
dataset.synth.width = 32
dataset.synth.noise = 0.05
split.train_per_class = 6
gabor.kernel_size = 11
gabor.downsample = 2
reduce.dim = 64
";
    println!("pipeline      rate   mean_nnz  coding_s  feature_s  train_s");
    for mode in ["src", "gsrc", "hsr"] {
        let cfg = ExperimentConfig::parse(&format!("{base}pipeline = {mode}\n"))?;
        let report = run_experiment(&cfg)?;
        println!(
            "{mode:<8} {:>8.3} {:>9.1} {:>9.3} {:>10.3} {:>8.3}",
            report.recognition_rate,
            report.mean_nnz,
            report.total_coding_time,
            report.feature_seconds,
            report.train_seconds
        );
    }
    Ok(())
}
