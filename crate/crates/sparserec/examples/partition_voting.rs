//! Classify heavily occluded images with and without block-partition
//! voting. The band occlusion corrupts the lower blocks; clean blocks
//! outvote them.
//!
//! Run with: `cargo run --release --example partition_voting`

use sparserec::bench::{run_experiment, ExperimentConfig};

fn main() -> sparserec::Result<()> {
    let base = "
pipeline = hsr
seed = 2
lambda = 0.0005
dataset.synth.classes = 8
dataset.synth.per_class = 12
dataset.synth.height = 32
dataset.synth.width = 32
dataset.synth.noise = 0.05
split.train_per_class = 6
solver.inner_tol = 1e-5
solver.max_inner_iter = 1500
occlusion.kind = band
occlusion.fraction = 0.4
occlusion.fill = random-noise
occlusion.seed = 2
";
    let whole = ExperimentConfig::parse(&format!(
        "{base}gabor.kernel_size = 11\ngabor.downsample = 2\nreduce.dim = 64\n"
    ))?;
    let report = run_experiment(&whole)?;
    println!(
        "whole-image HSR under 40% band occlusion: rate {:.3}",
        report.recognition_rate
    );

    let partitioned = ExperimentConfig::parse(&format!(
        "{base}gabor.kernel_size = 7\ngabor.downsample = 1\nreduce.dim = 32\n\
         partition.grid = 4x2\npartition.block_height = 8\npartition.block_width = 16\n"
    ))?;
    let report = run_experiment(&partitioned)?;
    println!(
        "partitioned (4x2 blocks, majority vote):  rate {:.3}",
        report.recognition_rate
    );
    Ok(())
}
