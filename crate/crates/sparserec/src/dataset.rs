//! Dataset loading, image normalization, seeded synthetic face-like data
//! and synthetic occlusions.
//!
//! On-disk layout for real datasets: `root/<class_name>/<images>`, one
//! subdirectory per class, sorted lexicographically into contiguous class
//! ids starting at 0. Supported rasters: PNG (8/16-bit gray or RGB,
//! converted with the broadcast luminance weights) and binary/ascii PGM.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::seeded_rng;

/// Train/test tag for a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// A labeled grayscale image collection with one shared size.
#[derive(Debug, Clone)]
pub struct LabeledImageSet {
    pub images: Vec<Array2<f64>>,
    pub labels: Vec<usize>,
    pub name: String,
    pub split: Split,
}

impl LabeledImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.images.first().map(|i| i.dim()).unwrap_or((0, 0))
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map(|m| m + 1).unwrap_or(0)
    }

    /// Seeded per-class split: shuffles each class's indices and takes the
    /// first `train_per_class` for training, the rest for testing.
    pub fn split_train_test(
        &self,
        train_per_class: usize,
        seed: u64,
    ) -> (LabeledImageSet, LabeledImageSet) {
        let mut rng = seeded_rng(seed);
        let mut train = LabeledImageSet {
            images: Vec::new(),
            labels: Vec::new(),
            name: self.name.clone(),
            split: Split::Train,
        };
        let mut test = LabeledImageSet {
            images: Vec::new(),
            labels: Vec::new(),
            name: self.name.clone(),
            split: Split::Test,
        };
        for class in 0..self.num_classes() {
            let mut idx: Vec<usize> = (0..self.len())
                .filter(|&i| self.labels[i] == class)
                .collect();
            // Fisher-Yates with the shared seeded stream
            for i in (1..idx.len()).rev() {
                let j = rng.gen_range(0..=i);
                idx.swap(i, j);
            }
            for (k, &i) in idx.iter().enumerate() {
                let target = if k < train_per_class {
                    &mut train
                } else {
                    &mut test
                };
                target.images.push(self.images[i].clone());
                target.labels.push(class);
            }
        }
        (train, test)
    }
}

/// Loads a labeled dataset from `root/<class>/<image>` directories.
pub fn load_dataset(root: &Path) -> Result<LabeledImageSet> {
    let mut class_dirs: Vec<_> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root.display().to_string(), e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.path())
        .collect();
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(Error::Config(format!(
            "no classes found under {}",
            root.display()
        )));
    }

    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut first_dims: Option<(usize, usize)> = None;
    let mut offending: Vec<String> = Vec::new();

    for (class, dir) in class_dirs.iter().enumerate() {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir.display().to_string(), e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.is_file()
                    && matches!(
                        p.extension().and_then(|e| e.to_str()),
                        Some("png") | Some("pgm")
                    )
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Config(format!(
                "class directory {} contains no images",
                dir.display()
            )));
        }
        for file in files {
            let img = load_image(&file)?;
            match first_dims {
                None => first_dims = Some(img.dim()),
                Some(d) if d != img.dim() => offending.push(format!(
                    "{} is {}x{}, expected {}x{}",
                    file.display(),
                    img.dim().0,
                    img.dim().1,
                    d.0,
                    d.1
                )),
                _ => {}
            }
            images.push(img);
            labels.push(class);
        }
    }
    if !offending.is_empty() {
        return Err(Error::Dimension(format!(
            "mixed image sizes: {}",
            offending.join("; ")
        )));
    }
    Ok(LabeledImageSet {
        images,
        labels,
        name: root
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("dataset")
            .to_string(),
        split: Split::Train,
    })
}

/// Decodes one PNG or PGM file to a [0,1] grayscale array.
pub fn load_image(path: &Path) -> Result<Array2<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => load_png(path),
        Some("pgm") => load_pgm(path),
        _ => Err(Error::Data(format!(
            "unsupported image format: {}",
            path.display()
        ))),
    }
}

fn load_png(path: &Path) -> Result<Array2<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];

    let bits = info.bit_depth;
    let color = info.color_type;
    let mut img = Array2::<f64>::zeros((h, w));

    // broadcast luminance weights for color input
    let luma = |r: f64, g: f64, b: f64| 0.299 * r + 0.587 * g + 0.114 * b;
    let read16 = |d: &[u8], i: usize| u16::from_be_bytes([d[2 * i], d[2 * i + 1]]) as f64 / 65535.0;

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let v = match (color, bits) {
                (png::ColorType::Grayscale, png::BitDepth::Eight) => data[i] as f64 / 255.0,
                (png::ColorType::Grayscale, png::BitDepth::Sixteen) => read16(data, i),
                (png::ColorType::Rgb, png::BitDepth::Eight) => {
                    let p = 3 * i;
                    luma(
                        data[p] as f64 / 255.0,
                        data[p + 1] as f64 / 255.0,
                        data[p + 2] as f64 / 255.0,
                    )
                }
                (png::ColorType::Rgb, png::BitDepth::Sixteen) => luma(
                    read16(data, 3 * i),
                    read16(data, 3 * i + 1),
                    read16(data, 3 * i + 2),
                ),
                (png::ColorType::Rgba, png::BitDepth::Eight) => {
                    let p = 4 * i;
                    luma(
                        data[p] as f64 / 255.0,
                        data[p + 1] as f64 / 255.0,
                        data[p + 2] as f64 / 255.0,
                    )
                }
                _ => {
                    return Err(Error::Data(format!(
                        "{}: unsupported png layout {color:?}/{bits:?}",
                        path.display()
                    )))
                }
            };
            img[[y, x]] = v;
        }
    }
    Ok(img)
}

fn load_pgm(path: &Path) -> Result<Array2<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        // skip whitespace and `#` comments
        while pos < bytes.len() {
            let b = bytes[pos];
            if b == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Data(format!("{}: truncated pgm", path.display())));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token()?;
    let w: usize = token()?
        .parse()
        .map_err(|_| Error::Data(format!("{}: bad width", path.display())))?;
    let h: usize = token()?
        .parse()
        .map_err(|_| Error::Data(format!("{}: bad height", path.display())))?;
    let maxval: f64 = token()?
        .parse()
        .map_err(|_| Error::Data(format!("{}: bad maxval", path.display())))?;
    let mut img = Array2::<f64>::zeros((h, w));
    match magic.as_str() {
        "P5" => {
            pos += 1; // single whitespace after header
            if maxval > 255.0 {
                return Err(Error::Data(format!(
                    "{}: 16-bit pgm unsupported",
                    path.display()
                )));
            }
            if pos + w * h > bytes.len() {
                return Err(Error::Data(format!(
                    "{}: truncated pgm body",
                    path.display()
                )));
            }
            for y in 0..h {
                for x in 0..w {
                    img[[y, x]] = bytes[pos + y * w + x] as f64 / maxval;
                }
            }
        }
        "P2" => {
            for y in 0..h {
                for x in 0..w {
                    let v: f64 = token()?
                        .parse()
                        .map_err(|_| Error::Data(format!("{}: bad pixel", path.display())))?;
                    img[[y, x]] = v / maxval;
                }
            }
        }
        other => {
            return Err(Error::Data(format!(
                "{}: unsupported pgm magic {other}",
                path.display()
            )))
        }
    }
    Ok(img)
}

/// Writes a [0,1] image as a 16-bit grayscale PNG.
pub fn save_png(img: &Array2<f64>, path: &Path) -> Result<()> {
    let (h, w) = img.dim();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), w as u32, h as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut data = Vec::with_capacity(h * w * 2);
    for v in img.iter() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        data.extend_from_slice(&q.to_be_bytes());
    }
    writer
        .write_image_data(&data)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Normalizes an image to zero mean and unit (population) variance.
/// A constant image becomes all zeros; the flag reports that degeneracy.
pub fn normalize_image(img: &Array2<f64>) -> (Array2<f64>, bool) {
    let n = img.len() as f64;
    let mean = img.sum() / n;
    let var = img.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var < 1e-24 {
        return (Array2::zeros(img.dim()), true);
    }
    let std = var.sqrt();
    (img.mapv(|v| (v - mean) / std), false)
}

/// Shape of a synthetic occlusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcclusionKind {
    /// One contiguous seeded rectangle.
    Block,
    /// Full-width horizontal band anchored to the lower half.
    Band,
}

/// Content written inside the occluded region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillKind {
    RandomNoise,
    Constant,
    Texture,
}

/// A reproducible synthetic occlusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionSpec {
    pub kind: OcclusionKind,
    /// Target occluded area fraction, in (0, 1).
    pub fraction: f64,
    pub fill: FillKind,
    pub seed: u64,
}

impl OcclusionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::Parameter(format!(
                "occlusion fraction {} outside (0, 1)",
                self.fraction
            )));
        }
        Ok(())
    }

    /// Derives a per-sample spec with a decorrelated seed.
    pub fn for_sample(&self, index: u64) -> OcclusionSpec {
        let mut s = *self;
        s.seed = self
            .seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(index.wrapping_mul(0xbf58476d1ce4e5b9).wrapping_add(1));
        s
    }
}

/// The occluded rectangle (top, left, height, width) that
/// [`apply_occlusion`] uses for an H x W image, determined by the spec.
pub fn occlusion_rect(spec: &OcclusionSpec, h: usize, w: usize) -> (usize, usize, usize, usize) {
    let mut rng = seeded_rng(spec.seed);
    match spec.kind {
        OcclusionKind::Block => {
            let area = spec.fraction * (h * w) as f64;
            let bh = (area * h as f64 / w as f64).sqrt().round().max(1.0) as usize;
            let bh = bh.min(h);
            let bw = ((area / bh as f64).round().max(1.0) as usize).min(w);
            let top = rng.gen_range(0..=(h - bh));
            let left = rng.gen_range(0..=(w - bw));
            (top, left, bh, bw)
        }
        OcclusionKind::Band => {
            let bh = ((spec.fraction * h as f64).round().max(1.0) as usize).min(h);
            let top_min = (h / 2).min(h - bh);
            let top = if top_min >= h - bh {
                h - bh
            } else {
                rng.gen_range(top_min..=(h - bh))
            };
            (top, 0, bh, w)
        }
    }
}

/// Overwrites one seeded region of `img` per the spec; pixels outside the
/// region are bit-identical to the input.
pub fn apply_occlusion(img: &Array2<f64>, spec: &OcclusionSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let (h, w) = img.dim();
    let (top, left, bh, bw) = occlusion_rect(spec, h, w);
    // fill values drawn after the geometry from an independent stream so
    // kinds with the same seed occlude the same region
    let mut rng = seeded_rng(spec.seed ^ 0x5851f42d4c957f2d);
    let mut out = img.clone();
    match spec.fill {
        FillKind::RandomNoise => {
            for y in top..top + bh {
                for x in left..left + bw {
                    out[[y, x]] = rng.gen_range(0.0..1.0);
                }
            }
        }
        FillKind::Constant => {
            for y in top..top + bh {
                for x in left..left + bw {
                    out[[y, x]] = 0.0;
                }
            }
        }
        FillKind::Texture => {
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let freq: f64 = rng.gen_range(0.3..0.9);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            for y in top..top + bh {
                for x in left..left + bw {
                    let u = x as f64 * angle.cos() + y as f64 * angle.sin();
                    out[[y, x]] = 0.5 + 0.5 * (freq * u + phase).sin();
                }
            }
        }
    }
    Ok(out)
}

/// Generates a seeded synthetic dataset of smooth class prototypes
/// (Gaussian blobs plus one oriented edge), per-sample illumination
/// gradients and Gaussian pixel noise. Distinct prototypes are kept below
/// 0.8 pairwise normalized correlation.
pub fn synth_faces(
    n_classes: usize,
    per_class: usize,
    size: (usize, usize),
    variation: f64,
    seed: u64,
) -> Result<LabeledImageSet> {
    if n_classes < 1 || per_class < 1 || size.0 < 1 || size.1 < 1 {
        return Err(Error::Parameter(
            "synth_faces requires positive counts and dimensions".into(),
        ));
    }
    let (h, w) = size;
    let mut rng = seeded_rng(seed);

    let correlation = |a: &Array2<f64>, b: &Array2<f64>| -> f64 {
        let n = a.len() as f64;
        let ma = a.sum() / n;
        let mb = b.sum() / n;
        let mut num = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (x, y) in a.iter().zip(b.iter()) {
            num += (x - ma) * (y - mb);
            va += (x - ma) * (x - ma);
            vb += (y - mb) * (y - mb);
        }
        num / (va.sqrt() * vb.sqrt()).max(f64::MIN_POSITIVE)
    };

    let mut prototypes: Vec<Array2<f64>> = Vec::with_capacity(n_classes);
    for _class in 0..n_classes {
        let mut accepted = None;
        for _attempt in 0..100 {
            let mut proto = Array2::<f64>::zeros((h, w));
            let blobs = rng.gen_range(3..=6usize);
            for _ in 0..blobs {
                let cy: f64 = rng.gen_range(0.15..0.85) * h as f64;
                let cx: f64 = rng.gen_range(0.15..0.85) * w as f64;
                let s: f64 = rng.gen_range(0.08..0.25) * h.min(w) as f64;
                let amp: f64 = rng.gen_range(0.4..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                for y in 0..h {
                    for x in 0..w {
                        let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                        proto[[y, x]] += amp * (-d2 / (2.0 * s * s)).exp();
                    }
                }
            }
            // one oriented soft edge
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let offset: f64 = rng.gen_range(0.3..0.7);
            let sharp: f64 = rng.gen_range(0.05..0.15) * h.min(w) as f64;
            let amp: f64 = rng.gen_range(0.3..0.7);
            let (dy, dx) = (angle.sin(), angle.cos());
            let mid = offset * (dx * w as f64 + dy * h as f64);
            for y in 0..h {
                for x in 0..w {
                    let d = dx * x as f64 + dy * y as f64 - mid;
                    proto[[y, x]] += amp * (d / sharp).tanh();
                }
            }
            // rescale into [0.2, 0.8]
            let lo = proto.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = proto.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let span = (hi - lo).max(f64::MIN_POSITIVE);
            proto.mapv_inplace(|v| 0.2 + 0.6 * (v - lo) / span);

            if prototypes
                .iter()
                .all(|p| correlation(p, &proto).abs() <= 0.8)
            {
                accepted = Some(proto);
                break;
            }
        }
        match accepted {
            Some(p) => prototypes.push(p),
            None => {
                return Err(Error::Data(format!(
                    "could not separate {n_classes} prototypes below 0.8 correlation \
                     after 100 attempts"
                )))
            }
        }
    }

    let mut images = Vec::with_capacity(n_classes * per_class);
    let mut labels = Vec::with_capacity(n_classes * per_class);
    for (class, proto) in prototypes.iter().enumerate() {
        for _ in 0..per_class {
            let gx: f64 = rng.gen_range(-0.1..0.1);
            let gy: f64 = rng.gen_range(-0.1..0.1);
            let mut img = proto.clone();
            for y in 0..h {
                for x in 0..w {
                    let grad = gx * (2.0 * x as f64 / w.max(1) as f64 - 1.0)
                        + gy * (2.0 * y as f64 / h.max(1) as f64 - 1.0);
                    let noise: f64 = if variation > 0.0 {
                        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                        variation * (-2.0 * u1.ln()).sqrt() * u2.cos()
                    } else {
                        0.0
                    };
                    img[[y, x]] = (img[[y, x]] + grad + noise).clamp(0.0, 1.0);
                }
            }
            images.push(img);
            labels.push(class);
        }
    }
    Ok(LabeledImageSet {
        images,
        labels,
        name: format!("synth-{n_classes}x{per_class}-{h}x{w}-s{seed}"),
        split: Split::Train,
    })
}

/// Bilinear resize with edge clamping.
pub fn resize_bilinear(img: &Array2<f64>, out_dims: (usize, usize)) -> Array2<f64> {
    let (ih, iw) = img.dim();
    let (oh, ow) = out_dims;
    if (ih, iw) == (oh, ow) {
        return img.clone();
    }
    let sy = ih as f64 / oh as f64;
    let sx = iw as f64 / ow as f64;
    Array2::from_shape_fn((oh, ow), |(oy, ox)| {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (ih - 1) as f64);
        let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (iw - 1) as f64);
        let y0 = fy.floor() as usize;
        let x0 = fx.floor() as usize;
        let y1 = (y0 + 1).min(ih - 1);
        let x1 = (x0 + 1).min(iw - 1);
        let ty = fy - y0 as f64;
        let tx = fx - x0 as f64;
        img[[y0, x0]] * (1.0 - ty) * (1.0 - tx)
            + img[[y0, x1]] * (1.0 - ty) * tx
            + img[[y1, x0]] * ty * (1.0 - tx)
            + img[[y1, x1]] * ty * tx
    })
}

/// Flattens an image set into a row-sample matrix of normalized pixels.
pub fn to_normalized_rows(set: &LabeledImageSet) -> Array2<f64> {
    let (h, w) = set.dims();
    let mut m = Array2::<f64>::zeros((set.len(), h * w));
    for (i, img) in set.images.iter().enumerate() {
        let (norm, _) = normalize_image(img);
        m.row_mut(i)
            .assign(&Array1::from_iter(norm.iter().copied()));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn normalize_contract_and_idempotence() {
        let mut rng = seeded_rng(5);
        let img = Array2::from_shape_fn((13, 9), |_| rng.gen_range(0.0..1.0));
        let (n1, flag) = normalize_image(&img);
        assert!(!flag);
        let count = n1.len() as f64;
        let mean = n1.sum() / count;
        let var = n1.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        assert!(mean.abs() <= 1e-9);
        assert!((var - 1.0).abs() <= 1e-9);
        let (n2, _) = normalize_image(&n1);
        for (a, b) in n1.iter().zip(n2.iter()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn constant_image_normalizes_to_zeros() {
        let img = Array2::from_elem((4, 4), 0.77);
        let (n, flag) = normalize_image(&img);
        assert!(flag);
        assert!(n.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn synth_is_deterministic_and_sized() {
        let a = synth_faces(10, 20, (32, 32), 0.05, 1).unwrap();
        let b = synth_faces(10, 20, (32, 32), 0.05, 1).unwrap();
        assert_eq!(a.len(), 200);
        assert_eq!(a.labels, b.labels);
        for (x, y) in a.images.iter().zip(b.images.iter()) {
            assert_eq!(x, y);
        }
        let c = synth_faces(10, 20, (32, 32), 0.05, 2).unwrap();
        assert!(a.images[0] != c.images[0]);
    }

    #[test]
    fn synth_prototypes_decorrelated() {
        let set = synth_faces(8, 1, (24, 24), 0.0, 3).unwrap();
        // with zero noise every sample is prototype + gradient; correlations
        // between classes must stay below the bound plus gradient slack
        for i in 0..8 {
            for j in 0..i {
                let a = &set.images[i];
                let b = &set.images[j];
                let n = a.len() as f64;
                let ma = a.sum() / n;
                let mb = b.sum() / n;
                let mut num = 0.0;
                let mut va = 0.0;
                let mut vb = 0.0;
                for (x, y) in a.iter().zip(b.iter()) {
                    num += (x - ma) * (y - mb);
                    va += (x - ma) * (x - ma);
                    vb += (y - mb) * (y - mb);
                }
                let corr = (num / (va.sqrt() * vb.sqrt())).abs();
                assert!(corr <= 0.85, "classes {i},{j} correlate at {corr}");
            }
        }
    }

    #[test]
    fn band_occlusion_fraction_and_purity() {
        let mut rng = seeded_rng(9);
        let img = Array2::from_shape_fn((32, 32), |_| rng.gen_range(0.0..1.0));
        let spec = OcclusionSpec {
            kind: OcclusionKind::Band,
            fraction: 0.40,
            fill: FillKind::RandomNoise,
            seed: 4,
        };
        let out = apply_occlusion(&img, &spec).unwrap();
        let (top, left, bh, bw) = occlusion_rect(&spec, 32, 32);
        let frac = (bh * bw) as f64 / (32.0 * 32.0);
        assert!((0.39..=0.41).contains(&frac), "band fraction {frac}");
        assert!(top >= 16 || top + bh >= 16, "band not anchored low");
        assert_eq!(left, 0);
        assert_eq!(bw, 32);
        for y in 0..32 {
            for x in 0..32 {
                let inside = y >= top && y < top + bh;
                if !inside {
                    assert_eq!(out[[y, x]], img[[y, x]]);
                }
            }
        }
    }

    #[test]
    fn block_occlusion_fraction() {
        let img = Array2::<f64>::zeros((32, 32));
        for seed in 0..5u64 {
            let spec = OcclusionSpec {
                kind: OcclusionKind::Block,
                fraction: 0.20,
                fill: FillKind::Constant,
                seed,
            };
            let (_, _, bh, bw) = occlusion_rect(&spec, 32, 32);
            let frac = (bh * bw) as f64 / 1024.0;
            assert!((0.19..=0.21).contains(&frac), "block fraction {frac}");
            let _ = apply_occlusion(&img, &spec).unwrap();
        }
    }

    #[test]
    fn occlusion_is_deterministic() {
        let mut rng = seeded_rng(11);
        let img = Array2::from_shape_fn((20, 20), |_| rng.gen_range(0.0..1.0));
        let spec = OcclusionSpec {
            kind: OcclusionKind::Block,
            fraction: 0.3,
            fill: FillKind::Texture,
            seed: 21,
        };
        let a = apply_occlusion(&img, &spec).unwrap();
        let b = apply_occlusion(&img, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_fraction_rejected() {
        let img = Array2::<f64>::zeros((8, 8));
        for fraction in [0.0, 1.0, -0.2, 1.5] {
            let spec = OcclusionSpec {
                kind: OcclusionKind::Block,
                fraction,
                fill: FillKind::Constant,
                seed: 0,
            };
            assert!(apply_occlusion(&img, &spec).is_err());
        }
    }

    #[test]
    fn dataset_roundtrip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let set = synth_faces(2, 3, (16, 16), 0.05, 6).unwrap();
        for (i, img) in set.images.iter().enumerate() {
            let class_dir = dir.path().join(format!("class{}", set.labels[i]));
            std::fs::create_dir_all(&class_dir).unwrap();
            save_png(img, &class_dir.join(format!("img{i:03}.png"))).unwrap();
        }
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded.len(), 6);
        assert_eq!(loaded.labels, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(loaded.dims(), (16, 16));
        // 16-bit quantization error bound
        for (orig, back) in set.images.iter().zip(loaded.images.iter()) {
            for (a, b) in orig.iter().zip(back.iter()) {
                assert!((a - b).abs() <= 1.0 / 65535.0);
            }
        }
    }

    #[test]
    fn pgm_binary_and_ascii_load() {
        let dir = tempfile::tempdir().unwrap();
        // P5 (binary): 3x2, maxval 255
        let p5 = dir.path().join("img.pgm");
        let mut bytes = b"P5\n# comment\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 128, 255, 64, 192, 32]);
        std::fs::write(&p5, &bytes).unwrap();
        let img = load_image(&p5).unwrap();
        assert_eq!(img.dim(), (2, 3));
        assert!((img[[0, 1]] - 128.0 / 255.0).abs() < 1e-12);
        assert!((img[[1, 2]] - 32.0 / 255.0).abs() < 1e-12);

        // P2 (ascii)
        let p2 = dir.path().join("ascii.pgm");
        std::fs::write(&p2, "P2\n2 2\n100\n0 50\n100 25\n").unwrap();
        let img = load_image(&p2).unwrap();
        assert_eq!(img.dim(), (2, 2));
        assert!((img[[0, 1]] - 0.5).abs() < 1e-12);
        assert!((img[[1, 1]] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_samples_differ_by_a_plane() {
        // with zero pixel noise, two samples of one class differ only by
        // their illumination gradients, i.e. an affine function of (x, y)
        let set = synth_faces(1, 2, (16, 12), 0.0, 9).unwrap();
        let diff = &set.images[0] - &set.images[1];
        // least-squares fit of a + b*x + c*y via the normal equations
        let (h, w) = diff.dim();
        let mut sums = [0.0f64; 9];
        let mut rhs = [0.0f64; 3];
        for y in 0..h {
            for x in 0..w {
                let (fx, fy, v) = (x as f64, y as f64, diff[[y, x]]);
                let row = [1.0, fx, fy];
                for i in 0..3 {
                    for j in 0..3 {
                        sums[i * 3 + j] += row[i] * row[j];
                    }
                    rhs[i] += row[i] * v;
                }
            }
        }
        // solve the 3x3 system by elimination
        let mut m = [
            [sums[0], sums[1], sums[2], rhs[0]],
            [sums[3], sums[4], sums[5], rhs[1]],
            [sums[6], sums[7], sums[8], rhs[2]],
        ];
        for p in 0..3 {
            for r in p + 1..3 {
                let f = m[r][p] / m[p][p];
                for c in p..4 {
                    m[r][c] -= f * m[p][c];
                }
            }
        }
        let c2 = m[2][3] / m[2][2];
        let c1 = (m[1][3] - m[1][2] * c2) / m[1][1];
        let c0 = (m[0][3] - m[0][1] * c1 - m[0][2] * c2) / m[0][0];
        let mut worst = 0.0f64;
        for y in 0..h {
            for x in 0..w {
                let plane = c0 + c1 * x as f64 + c2 * y as f64;
                worst = worst.max((diff[[y, x]] - plane).abs());
            }
        }
        assert!(worst <= 1e-9, "residual from plane fit: {worst}");
    }

    #[test]
    fn empty_root_and_empty_class_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no classes found"));

        std::fs::create_dir(dir.path().join("empty_class")).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no images"));
    }

    #[test]
    fn mixed_sizes_error_names_files() {
        let dir = tempfile::tempdir().unwrap();
        let class = dir.path().join("a");
        std::fs::create_dir(&class).unwrap();
        save_png(&Array2::zeros((8, 8)), &class.join("one.png")).unwrap();
        save_png(&Array2::zeros((9, 8)), &class.join("two.png")).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("two.png"), "message was: {msg}");
    }

    #[test]
    fn split_is_per_class_and_seeded() {
        let set = synth_faces(3, 10, (8, 8), 0.01, 5).unwrap();
        let (train, test) = set.split_train_test(6, 42);
        assert_eq!(train.len(), 18);
        assert_eq!(test.len(), 12);
        for class in 0..3 {
            assert_eq!(train.labels.iter().filter(|&&l| l == class).count(), 6);
            assert_eq!(test.labels.iter().filter(|&&l| l == class).count(), 4);
        }
        let (train2, _) = set.split_train_test(6, 42);
        for (a, b) in train.images.iter().zip(train2.images.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn resize_preserves_constant_and_dims() {
        let img = Array2::from_elem((8, 16), 0.4);
        let out = resize_bilinear(&img, (16, 16));
        assert_eq!(out.dim(), (16, 16));
        for v in out.iter() {
            assert!((v - 0.4).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn occlusion_never_touches_outside_mask(seed in 0u64..500, frac in 0.05f64..0.9) {
            let mut rng = seeded_rng(seed);
            let img = Array2::from_shape_fn((16, 16), |_| rng.gen_range(0.0..1.0));
            let spec = OcclusionSpec { kind: OcclusionKind::Block, fraction: frac, fill: FillKind::RandomNoise, seed };
            let out = apply_occlusion(&img, &spec).unwrap();
            let (top, left, bh, bw) = occlusion_rect(&spec, 16, 16);
            for y in 0..16 {
                for x in 0..16 {
                    let inside = y >= top && y < top + bh && x >= left && x < left + bw;
                    if !inside {
                        prop_assert_eq!(out[[y, x]], img[[y, x]]);
                    }
                }
            }
        }
    }
}
