//! Dictionary assembly, minimum-residual classification and
//! block-partition voting.
//!
//! A global dictionary holds unit-norm training atoms (class-labeled)
//! optionally followed by occlusion atoms (unlabeled). Classification
//! sparse-codes the test feature over the whole dictionary, subtracts the
//! occlusion contribution once, and picks the class whose own coefficients
//! reconstruct the remainder best.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::dataset::resize_bilinear;
use crate::elm_ae::{project_values, train_elm_ae, ProjectionModel};
use crate::error::{Error, Result};
use crate::gabor::{build_gabor_bank, gabor_features, GaborBank, GaborParams};
use crate::sparse::{
    learn_compressed_dictionary, solve_l_half, solve_weighted_l1, SolverSchedule, SparseCode,
};

/// Which occlusion atoms a dictionary carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcclusionBlockKind {
    None,
    /// The feature_dim x feature_dim identity (baseline mode).
    Identity,
    /// Atoms from a learned compressed occlusion dictionary.
    Learned,
}

/// Occlusion atoms requested when building a dictionary.
pub enum OcclusionAtoms<'a> {
    None,
    Identity,
    Learned(&'a Array2<f64>),
}

/// Coding norm used by the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodingNorm {
    L1,
    LHalf,
}

/// A global dictionary: labeled training atoms plus optional occlusion atoms.
#[derive(Debug, Clone)]
pub struct Dictionary {
    /// feature_dim x (n_train + n_occlusion) matrix of unit-norm columns.
    pub atoms: Array2<f64>,
    /// Class id of each of the first `n_train` columns.
    pub labels: Vec<usize>,
    pub occlusion_block: OcclusionBlockKind,
    pub n_train: usize,
    pub n_occlusion: usize,
    pub num_classes: usize,
}

impl Dictionary {
    pub fn feature_dim(&self) -> usize {
        self.atoms.nrows()
    }
}

/// Result of classifying one feature vector.
#[derive(Debug, Clone)]
pub struct ClassificationResult {
    /// Winning class id (argmin of residuals; ties to the lowest id).
    pub identity: usize,
    /// Per-class reconstruction residuals.
    pub residuals: Vec<f64>,
    /// The sparse code that produced the residuals.
    pub code: SparseCode,
    /// Wall-clock seconds spent in the coding step.
    pub coding_seconds: f64,
}

impl ClassificationResult {
    /// One CSV row: sample id, true class, predicted class, the per-class
    /// residual vector (`;`-joined), coding wall time, solver iterations.
    pub fn csv_row(&self, sample_id: usize, true_class: usize) -> String {
        let residuals: Vec<String> = self.residuals.iter().map(|r| format!("{r:.9e}")).collect();
        format!(
            "{sample_id},{true_class},{},{},{:.9},{}",
            self.identity,
            residuals.join(";"),
            self.coding_seconds,
            self.code.iterations
        )
    }
}

/// Builds a global dictionary from training feature columns and labels.
/// Every class in `0..=max(labels)` must own at least one atom; all
/// columns are L2-normalized.
pub fn build_global_dictionary(
    train_features: &Array2<f64>,
    labels: &[usize],
    occlusion: OcclusionAtoms<'_>,
) -> Result<Dictionary> {
    let (dim, n_train) = train_features.dim();
    if labels.len() != n_train {
        return Err(Error::Dimension(format!(
            "{} labels for {} training atoms",
            labels.len(),
            n_train
        )));
    }
    if n_train == 0 {
        return Err(Error::Config("dictionary needs at least one atom".into()));
    }
    let num_classes = labels.iter().max().unwrap() + 1;
    for class in 0..num_classes {
        if !labels.contains(&class) {
            return Err(Error::Config(format!("class {class} has zero atoms")));
        }
    }

    let n_occlusion = match &occlusion {
        OcclusionAtoms::None => 0,
        OcclusionAtoms::Identity => dim,
        OcclusionAtoms::Learned(gamma) => {
            if gamma.nrows() != dim {
                return Err(Error::Dimension(format!(
                    "occlusion atoms have {} rows, training atoms {}",
                    gamma.nrows(),
                    dim
                )));
            }
            gamma.ncols()
        }
    };

    let mut atoms = Array2::<f64>::zeros((dim, n_train + n_occlusion));
    for j in 0..n_train {
        atoms.column_mut(j).assign(&train_features.column(j));
    }
    match &occlusion {
        OcclusionAtoms::None => {}
        OcclusionAtoms::Identity => {
            for j in 0..dim {
                atoms[[j, n_train + j]] = 1.0;
            }
        }
        OcclusionAtoms::Learned(gamma) => {
            for j in 0..gamma.ncols() {
                atoms.column_mut(n_train + j).assign(&gamma.column(j));
            }
        }
    }
    for j in 0..n_train + n_occlusion {
        let norm = atoms.column(j).dot(&atoms.column(j)).sqrt();
        if norm == 0.0 {
            return Err(Error::Data(format!("atom {j} is all zero")));
        }
        atoms.column_mut(j).mapv_inplace(|v| v / norm);
    }

    Ok(Dictionary {
        atoms,
        labels: labels.to_vec(),
        occlusion_block: match occlusion {
            OcclusionAtoms::None => OcclusionBlockKind::None,
            OcclusionAtoms::Identity => OcclusionBlockKind::Identity,
            OcclusionAtoms::Learned(_) => OcclusionBlockKind::Learned,
        },
        n_train,
        n_occlusion,
        num_classes,
    })
}

/// Classifies `y` against `dict` by sparse coding and minimum class
/// residual. The occlusion contribution is subtracted uniformly for every
/// class; occlusion coefficients are never attributed to a class.
pub fn classify(
    y: &Array1<f64>,
    dict: &Dictionary,
    lambda: f64,
    norm: CodingNorm,
    schedule: &SolverSchedule,
) -> Result<ClassificationResult> {
    if y.len() != dict.feature_dim() {
        return Err(Error::Dimension(format!(
            "feature has {} entries, dictionary expects {}",
            y.len(),
            dict.feature_dim()
        )));
    }
    let started = Instant::now();
    let code = match norm {
        CodingNorm::L1 => {
            let ones = Array1::from_elem(dict.atoms.ncols(), 1.0);
            solve_weighted_l1(&dict.atoms, y, lambda, &ones, schedule)?
        }
        CodingNorm::LHalf => solve_l_half(&dict.atoms, y, lambda, schedule)?,
    };
    let coding_seconds = started.elapsed().as_secs_f64();

    // shared part: y minus the occlusion reconstruction
    let mut y_shared = y.clone();
    for j in dict.n_train..dict.n_train + dict.n_occlusion {
        let w = code.omega[j];
        if w != 0.0 {
            y_shared.scaled_add(-w, &dict.atoms.column(j));
        }
    }

    let mut residuals = vec![0.0f64; dict.num_classes];
    for (class, r) in residuals.iter_mut().enumerate() {
        let mut recon = y_shared.clone();
        for j in 0..dict.n_train {
            if dict.labels[j] == class {
                let w = code.omega[j];
                if w != 0.0 {
                    recon.scaled_add(-w, &dict.atoms.column(j));
                }
            }
        }
        *r = recon.dot(&recon).sqrt();
    }

    let identity = argmin_lowest_id(&residuals);
    Ok(ClassificationResult {
        identity,
        residuals,
        code,
        coding_seconds,
    })
}

fn argmin_lowest_id(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Block-partition layout for occlusion-robust voting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionConfig {
    /// (rows, cols) of the block grid.
    pub grid: (usize, usize),
    /// Per-block size after rescale (height, width).
    pub block_size: (usize, usize),
    /// Learned occlusion atoms per block (0 disables them).
    pub per_block_occ_atoms: usize,
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.0 * self.grid.1 < 1 {
            return Err(Error::Parameter("partition grid must be nonempty".into()));
        }
        if self.block_size.0 < 1 || self.block_size.1 < 1 {
            return Err(Error::Parameter("block size must be positive".into()));
        }
        Ok(())
    }
}

/// One block's trained pipeline: projection model plus dictionary.
#[derive(Debug, Clone)]
pub struct BlockPipeline {
    pub model: ProjectionModel,
    pub dict: Dictionary,
}

/// A trained per-block classifier with majority voting.
pub struct PartitionedClassifier {
    pub config: PartitionConfig,
    pub gabor: GaborBank,
    pub blocks: Vec<BlockPipeline>,
    pub lambda: f64,
    pub norm: CodingNorm,
    pub schedule: SolverSchedule,
}

/// Voting outcome for one image.
#[derive(Debug, Clone)]
pub struct PartitionedResult {
    /// Class chosen by majority vote (ties: lowest normalized-residual sum,
    /// then lowest class id).
    pub identity: usize,
    /// Per-block winning class; `None` where the block abstained.
    pub block_identities: Vec<Option<usize>>,
    /// Sum over voting blocks of r_i / ||y_block|| per class.
    pub residual_sums: Vec<f64>,
    /// Total coding seconds across blocks.
    pub coding_seconds: f64,
    /// Total inner iterations across blocks.
    pub iterations: usize,
    /// Total nonzero coefficients across blocks (|w| > 1e-6).
    pub nnz: usize,
}

fn extract_block(
    image: &Array2<f64>,
    grid: (usize, usize),
    index: (usize, usize),
) -> Result<Array2<f64>> {
    let (h, w) = image.dim();
    let (rows, cols) = grid;
    if h % rows != 0 || w % cols != 0 {
        return Err(Error::Dimension(format!(
            "image {h}x{w} not divisible into a {rows}x{cols} grid"
        )));
    }
    let bh = h / rows;
    let bw = w / cols;
    let (r, c) = index;
    let mut block = Array2::<f64>::zeros((bh, bw));
    for y in 0..bh {
        for x in 0..bw {
            block[[y, x]] = image[[r * bh + y, c * bw + x]];
        }
    }
    Ok(block)
}

impl PartitionedClassifier {
    /// Trains one projection model and dictionary per block position.
    /// `occlusion_exemplars` optionally supplies (clean, occluded) image
    /// pairs used to learn per-block occlusion atoms when
    /// `config.per_block_occ_atoms > 0`.
    #[allow(clippy::too_many_arguments)]
    pub fn train(
        train_images: &[Array2<f64>],
        labels: &[usize],
        config: PartitionConfig,
        gabor_params: &GaborParams,
        reduce_dim: usize,
        elm_c: f64,
        lambda: f64,
        norm: CodingNorm,
        schedule: &SolverSchedule,
        occlusion_exemplars: Option<&[(Array2<f64>, Array2<f64>)]>,
        zeta: f64,
        seed: u64,
    ) -> Result<PartitionedClassifier> {
        config.validate()?;
        if train_images.is_empty() {
            return Err(Error::Config("no training images".into()));
        }
        let bank = build_gabor_bank(gabor_params)?;
        let (rows, cols) = config.grid;

        let mut blocks = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let feats: Vec<Array1<f64>> = train_images
                    .par_iter()
                    .map(|img| {
                        let block = extract_block(img, config.grid, (r, c))?;
                        let scaled = resize_bilinear(&block, config.block_size);
                        Ok(gabor_features(&scaled, &bank)?.values)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let input_dim = feats[0].len();
                let mut x = Array2::<f64>::zeros((feats.len(), input_dim));
                for (i, f) in feats.iter().enumerate() {
                    x.row_mut(i).assign(f);
                }
                let hidden = reduce_dim.min(input_dim);
                let block_seed = seed
                    .wrapping_mul(0x9e3779b97f4a7c15)
                    .wrapping_add((r * cols + c) as u64);
                let model = train_elm_ae(&x, hidden, elm_c, block_seed)?;

                let mut reduced = Array2::<f64>::zeros((hidden, feats.len()));
                for (i, f) in feats.iter().enumerate() {
                    reduced.column_mut(i).assign(&project_values(f, &model)?);
                }

                let occ_atoms = match (config.per_block_occ_atoms, occlusion_exemplars) {
                    (p, Some(pairs)) if p > 0 => {
                        let diffs: Vec<Array1<f64>> = pairs
                            .par_iter()
                            .map(|(clean, occluded)| {
                                let cb = extract_block(clean, config.grid, (r, c))?;
                                let ob = extract_block(occluded, config.grid, (r, c))?;
                                let cf = gabor_features(
                                    &resize_bilinear(&cb, config.block_size),
                                    &bank,
                                )?;
                                let of = gabor_features(
                                    &resize_bilinear(&ob, config.block_size),
                                    &bank,
                                )?;
                                Ok(&of.values - &cf.values)
                            })
                            .collect::<Result<Vec<_>>>()?;
                        let kept: Vec<&Array1<f64>> =
                            diffs.iter().filter(|d| d.dot(*d).sqrt() > 1e-12).collect();
                        if kept.len() < p {
                            None
                        } else {
                            let mut z = Array2::<f64>::zeros((input_dim, kept.len()));
                            for (i, d) in kept.iter().enumerate() {
                                z.column_mut(i).assign(d);
                            }
                            let learned =
                                learn_compressed_dictionary(&z, p, zeta, schedule, block_seed)?;
                            let mut projected = Array2::<f64>::zeros((hidden, p));
                            for j in 0..p {
                                let col = learned.gamma.column(j).to_owned();
                                projected
                                    .column_mut(j)
                                    .assign(&project_values(&col, &model)?);
                            }
                            Some(projected)
                        }
                    }
                    _ => None,
                };

                let dict = match &occ_atoms {
                    Some(gamma) => {
                        build_global_dictionary(&reduced, labels, OcclusionAtoms::Learned(gamma))?
                    }
                    None => build_global_dictionary(&reduced, labels, OcclusionAtoms::None)?,
                };
                blocks.push(BlockPipeline { model, dict });
            }
        }

        Ok(PartitionedClassifier {
            config,
            gabor: bank,
            blocks,
            lambda,
            norm,
            schedule: schedule.clone(),
        })
    }

    /// Classifies an image by independent per-block classification and
    /// majority vote. A failing block abstains; if every block abstains the
    /// classification fails.
    pub fn classify(&self, image: &Array2<f64>) -> Result<PartitionedResult> {
        let (rows, cols) = self.config.grid;
        let num_classes = self.blocks[0].dict.num_classes;

        let per_block: Vec<Option<(ClassificationResult, f64)>> = (0..rows * cols)
            .into_par_iter()
            .map(|b| {
                let (r, c) = (b / cols, b % cols);
                let attempt = || -> Result<(ClassificationResult, f64)> {
                    let block = extract_block(image, self.config.grid, (r, c))?;
                    let scaled = resize_bilinear(&block, self.config.block_size);
                    let feat = gabor_features(&scaled, &self.gabor)?;
                    let reduced = project_values(&feat.values, &self.blocks[b].model)?;
                    let ynorm = reduced.dot(&reduced).sqrt();
                    let res = classify(
                        &reduced,
                        &self.blocks[b].dict,
                        self.lambda,
                        self.norm,
                        &self.schedule,
                    )?;
                    Ok((res, ynorm))
                };
                attempt().ok()
            })
            .collect();

        let mut votes = vec![0usize; num_classes];
        let mut residual_sums = vec![0.0f64; num_classes];
        let mut block_identities = Vec::with_capacity(per_block.len());
        let mut coding_seconds = 0.0;
        let mut iterations = 0usize;
        let mut nnz = 0usize;
        let mut any = false;
        for entry in &per_block {
            match entry {
                Some((res, ynorm)) => {
                    any = true;
                    votes[res.identity] += 1;
                    block_identities.push(Some(res.identity));
                    let scale = ynorm.max(f64::MIN_POSITIVE);
                    for (class, r) in res.residuals.iter().enumerate() {
                        residual_sums[class] += r / scale;
                    }
                    coding_seconds += res.coding_seconds;
                    iterations += res.code.iterations;
                    nnz += res.code.nnz(1e-6);
                }
                None => block_identities.push(None),
            }
        }
        if !any {
            return Err(Error::Classification(
                "every block abstained; no votes cast".into(),
            ));
        }

        let top = *votes.iter().max().unwrap();
        let tied: Vec<usize> = (0..num_classes).filter(|&c| votes[c] == top).collect();
        let identity = if tied.len() == 1 {
            tied[0]
        } else {
            // ties: lowest summed normalized residual, then lowest class id
            let mut best = tied[0];
            for &c in &tied[1..] {
                if residual_sums[c] < residual_sums[best] {
                    best = c;
                }
            }
            best
        };

        Ok(PartitionedResult {
            identity,
            block_identities,
            residual_sums,
            coding_seconds,
            iterations,
            nnz,
        })
    }
}
