//! Gabor wavelet bank construction, image convolution and augmented
//! feature assembly.
//!
//! A bank holds one complex kernel per (scale, orientation) pair. Each
//! kernel is the product of a Gaussian envelope and a complex plane wave
//! with the window's DC component removed, so filter responses ignore
//! constant intensity offsets. Feature vectors concatenate the magnitude
//! responses of every band, each band downsampled and normalized to zero
//! mean and unit variance.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Parameters of a Gabor wavelet bank.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborParams {
    /// Number of scales (frequency octaves), indexed `0..num_scales`.
    pub num_scales: usize,
    /// Number of orientations over the half circle, indexed `0..num_orientations`.
    pub num_orientations: usize,
    /// Maximum spatial frequency in radians per pixel.
    pub k_max: f64,
    /// Spacing factor between scales in the frequency domain (> 1).
    pub f: f64,
    /// Ratio of Gaussian window width to wavelength, in radians.
    pub sigma: f64,
    /// Kernel side length in pixels; must be odd and >= 3.
    pub kernel_size: usize,
    /// Stride applied to each response band before concatenation.
    pub downsample: usize,
}

impl Default for GaborParams {
    /// Five scales, eight orientations, k_max = pi/2, f = sqrt(2), sigma = pi,
    /// a 33x33 window and no downsampling.
    ///
    /// sigma defaults to pi rather than 2*pi; both values appear in the
    /// literature and sigma is a free parameter here.
    fn default() -> Self {
        GaborParams {
            num_scales: 5,
            num_orientations: 8,
            k_max: std::f64::consts::FRAC_PI_2,
            f: std::f64::consts::SQRT_2,
            sigma: std::f64::consts::PI,
            kernel_size: 33,
            downsample: 1,
        }
    }
}

impl GaborParams {
    /// Checks every parameter invariant, naming the violated one.
    pub fn validate(&self) -> Result<()> {
        if self.num_scales < 1 {
            return Err(Error::Parameter("num_scales must be >= 1".into()));
        }
        if self.num_orientations < 1 {
            return Err(Error::Parameter("num_orientations must be >= 1".into()));
        }
        if !(self.k_max > 0.0) {
            return Err(Error::Parameter("k_max must be > 0".into()));
        }
        if !(self.f > 1.0) {
            return Err(Error::Parameter("f must be > 1".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Parameter("sigma must be > 0".into()));
        }
        if self.kernel_size < 3 || self.kernel_size % 2 == 0 {
            return Err(Error::Parameter("kernel_size must be odd and >= 3".into()));
        }
        if self.downsample < 1 {
            return Err(Error::Parameter("downsample must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of bands in the bank.
    pub fn num_bands(&self) -> usize {
        self.num_scales * self.num_orientations
    }

    /// Orientation angle phi_mu = pi * mu / num_orientations.
    pub fn orientation_angle(&self, mu: usize) -> f64 {
        std::f64::consts::PI * mu as f64 / self.num_orientations as f64
    }

    /// Scale frequency k_nu = k_max / f^nu.
    pub fn scale_frequency(&self, nu: usize) -> f64 {
        self.k_max / self.f.powi(nu as i32)
    }

    /// Length of the augmented feature vector for an H x W image.
    pub fn augmented_len(&self, height: usize, width: usize) -> usize {
        self.num_bands() * height.div_ceil(self.downsample) * width.div_ceil(self.downsample)
    }
}

/// A built bank of complex Gabor kernels, ordered scale-major,
/// orientation-minor: band index = nu * num_orientations + mu.
#[derive(Debug, Clone)]
pub struct GaborBank {
    pub params: GaborParams,
    /// One kernel per band; entry `[y + half, x + half]` holds psi(x, y).
    pub kernels: Vec<Array2<Complex64>>,
}

impl GaborBank {
    /// Band index for a (scale, orientation) pair.
    pub fn band_index(&self, nu: usize, mu: usize) -> usize {
        nu * self.params.num_orientations + mu
    }
}

/// Complex response of one image against every band of a bank.
#[derive(Debug, Clone)]
pub struct ResponseStack {
    /// One same-size complex response per band, bank band order.
    pub bands: Vec<Array2<Complex64>>,
    pub params: GaborParams,
}

/// Pipeline stage of a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    RawImage,
    GaborAugmented,
    Reduced,
}

/// A real feature vector together with where it came from.
#[derive(Debug, Clone)]
pub struct FeatureVector {
    pub values: Array1<f64>,
    pub stage: Stage,
    /// Original image (height, width).
    pub source_dims: (usize, usize),
    /// Start offset of each band within `values`; empty unless gabor-augmented.
    pub band_layout: Vec<usize>,
    /// Indices of bands that had zero variance and were zeroed out.
    pub degenerate_bands: Vec<usize>,
}

impl FeatureVector {
    /// Wraps a raw image (row-major flatten) as a feature vector.
    pub fn from_image(image: &Array2<f64>) -> FeatureVector {
        let (h, w) = image.dim();
        FeatureVector {
            values: Array1::from_iter(image.iter().copied()),
            stage: Stage::RawImage,
            source_dims: (h, w),
            band_layout: Vec::new(),
            degenerate_bands: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Builds the kernel bank for `params`.
///
/// Each kernel entry is
/// `(|k|^2 / sigma^2) * exp(-|k|^2 |z|^2 / (2 sigma^2)) * (exp(i k.z) - mu_dc)`
/// with wave vector `k = (k_nu cos phi_mu, k_nu sin phi_mu)`. The DC term
/// `mu_dc` is the discrete mean of the windowed plane wave under the
/// envelope, so the entries of every kernel sum to zero exactly; it
/// converges to the continuum constant `exp(-sigma^2/2)` as the window
/// grows.
pub fn build_gabor_bank(params: &GaborParams) -> Result<GaborBank> {
    params.validate()?;
    let half = (params.kernel_size / 2) as i64;
    let size = params.kernel_size;
    let sigma2 = params.sigma * params.sigma;

    let mut kernels = Vec::with_capacity(params.num_bands());
    for nu in 0..params.num_scales {
        let k_nu = params.scale_frequency(nu);
        let k2 = k_nu * k_nu;
        let prefactor = k2 / sigma2;
        for mu in 0..params.num_orientations {
            let phi = params.orientation_angle(mu);
            let (kx, ky) = (k_nu * phi.cos(), k_nu * phi.sin());

            // First pass: envelope-weighted DC mean of the plane wave.
            let mut wave_sum = Complex64::new(0.0, 0.0);
            let mut env_sum = 0.0;
            for y in -half..=half {
                for x in -half..=half {
                    let z2 = (x * x + y * y) as f64;
                    let env = (-k2 * z2 / (2.0 * sigma2)).exp();
                    let phase = kx * x as f64 + ky * y as f64;
                    wave_sum += env * Complex64::new(phase.cos(), phase.sin());
                    env_sum += env;
                }
            }
            let dc = wave_sum / env_sum;

            let mut kernel = Array2::<Complex64>::zeros((size, size));
            for y in -half..=half {
                for x in -half..=half {
                    let z2 = (x * x + y * y) as f64;
                    let env = prefactor * (-k2 * z2 / (2.0 * sigma2)).exp();
                    let phase = kx * x as f64 + ky * y as f64;
                    let wave = Complex64::new(phase.cos(), phase.sin());
                    kernel[[(y + half) as usize, (x + half) as usize]] = env * (wave - dc);
                }
            }
            kernels.push(kernel);
        }
    }
    Ok(GaborBank {
        params: params.clone(),
        kernels,
    })
}

/// Convolves `image` against every band of `bank` ("same" output size,
/// replicate boundary). Bands are independent and computed in parallel.
pub fn convolve_bank(image: &Array2<f64>, bank: &GaborBank) -> Result<ResponseStack> {
    let (h, w) = image.dim();
    let k = bank.params.kernel_size;
    if h < k || w < k {
        return Err(Error::Dimension(format!(
            "image {h}x{w} smaller than kernel size {k}"
        )));
    }
    let bands: Vec<Array2<Complex64>> = bank
        .kernels
        .par_iter()
        .map(|kernel| convolve_same(image, kernel))
        .collect();
    Ok(ResponseStack {
        bands,
        params: bank.params.clone(),
    })
}

/// "Same"-size convolution out(z) = sum_k psi(k) * img(z - k) with
/// replicate padding. Interior pixels take a clamp-free fast path.
fn convolve_same(image: &Array2<f64>, kernel: &Array2<Complex64>) -> Array2<Complex64> {
    let (h, w) = image.dim();
    let size = kernel.nrows();
    let half = (size / 2) as i64;
    let mut out = Array2::<Complex64>::zeros((h, w));

    let clamp = |v: i64, hi: usize| -> usize { v.clamp(0, hi as i64 - 1) as usize };

    for oy in 0..h {
        let interior_y = oy as i64 - half >= 0 && oy as i64 + half < h as i64;
        for ox in 0..w {
            let interior = interior_y && ox as i64 - half >= 0 && ox as i64 + half < w as i64;
            let mut acc = Complex64::new(0.0, 0.0);
            if interior {
                for ky in -half..=half {
                    let iy = (oy as i64 - ky) as usize;
                    for kx in -half..=half {
                        let ix = (ox as i64 - kx) as usize;
                        acc +=
                            kernel[[(ky + half) as usize, (kx + half) as usize]] * image[[iy, ix]];
                    }
                }
            } else {
                for ky in -half..=half {
                    let iy = clamp(oy as i64 - ky, h);
                    for kx in -half..=half {
                        let ix = clamp(ox as i64 - kx, w);
                        acc +=
                            kernel[[(ky + half) as usize, (kx + half) as usize]] * image[[iy, ix]];
                    }
                }
            }
            out[[oy, ox]] = acc;
        }
    }
    out
}

/// Assembles the augmented feature vector from a response stack: per band,
/// complex magnitude, stride-`downsample` decimation, zero-mean/unit-variance
/// normalization, then concatenation in band order. A zero-variance band is
/// replaced by zeros and recorded in `degenerate_bands`.
pub fn augment_features(responses: &ResponseStack, params: &GaborParams) -> Result<FeatureVector> {
    params.validate()?;
    if responses.bands.len() != params.num_bands() {
        return Err(Error::Dimension(format!(
            "response stack has {} bands, params expect {}",
            responses.bands.len(),
            params.num_bands()
        )));
    }
    let (h, w) = responses.bands[0].dim();
    let s = params.downsample;
    let bh = h.div_ceil(s);
    let bw = w.div_ceil(s);
    let band_len = bh * bw;

    let mut values = Array1::<f64>::zeros(params.num_bands() * band_len);
    let mut band_layout = Vec::with_capacity(params.num_bands());
    let mut degenerate_bands = Vec::new();

    for (b, band) in responses.bands.iter().enumerate() {
        let offset = b * band_len;
        band_layout.push(offset);
        let mut mags = Vec::with_capacity(band_len);
        for y in (0..h).step_by(s) {
            for x in (0..w).step_by(s) {
                mags.push(band[[y, x]].norm());
            }
        }
        let n = mags.len() as f64;
        let mean = mags.iter().sum::<f64>() / n;
        let var = mags.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var < 1e-24 {
            degenerate_bands.push(b);
            // band stays all-zero
            continue;
        }
        let std = var.sqrt();
        for (i, m) in mags.iter().enumerate() {
            values[offset + i] = (m - mean) / std;
        }
    }

    Ok(FeatureVector {
        values,
        stage: Stage::GaborAugmented,
        source_dims: (h, w),
        band_layout,
        degenerate_bands,
    })
}

/// Convenience: bank convolution plus feature assembly in one call.
pub fn gabor_features(image: &Array2<f64>, bank: &GaborBank) -> Result<FeatureVector> {
    let responses = convolve_bank(image, bank)?;
    augment_features(&responses, &bank.params)
}
