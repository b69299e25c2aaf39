//! Build a Gabor bank, inspect its kernels and turn an image into an
//! augmented feature vector.
//!
//! Run with: `cargo run --release --example gabor_features`

use ndarray::Array2;
use sparserec::dataset::synth_faces;
use sparserec::gabor::{augment_features, build_gabor_bank, convolve_bank, GaborParams};

fn main() -> sparserec::Result<()> {
    let params = GaborParams::default();
    let bank = build_gabor_bank(&params)?;
    println!(
        "bank: {} kernels ({} scales x {} orientations), window {}x{}",
        bank.kernels.len(),
        params.num_scales,
        params.num_orientations,
        params.kernel_size,
        params.kernel_size
    );

    // every kernel ignores constant offsets: entries sum to ~0
    let worst_dc = bank
        .kernels
        .iter()
        .map(|k| {
            let sum: num_complex::Complex64 = k.iter().sum();
            let mass: f64 = k.iter().map(|c| c.norm()).sum();
            sum.norm() / mass
        })
        .fold(0.0f64, f64::max);
    println!("worst DC ratio over all bands: {worst_dc:.2e}");

    // one synthetic face image through the full feature path
    let set = synth_faces(1, 1, (64, 64), 0.02, 7)?;
    let image = &set.images[0];
    let responses = convolve_bank(image, &bank)?;
    let features = augment_features(&responses, &params)?;
    println!(
        "64x64 image -> {} bands -> augmented feature of length {}",
        responses.bands.len(),
        features.len()
    );

    // intensity changes do not move the features
    let brighter: Array2<f64> = image.mapv(|v| 1.8 * v + 0.1);
    let f2 = augment_features(&convolve_bank(&brighter, &bank)?, &params)?;
    let max_diff = features
        .values
        .iter()
        .zip(f2.values.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("max feature change under aI+b intensity shift: {max_diff:.2e}");

    // downsampling shrinks the vector by the stride squared
    let strided = GaborParams {
        downsample: 4,
        ..params
    };
    let f4 = augment_features(
        &convolve_bank(image, &build_gabor_bank(&strided)?)?,
        &strided,
    )?;
    println!("same image with downsample=4: length {}", f4.len());
    Ok(())
}
