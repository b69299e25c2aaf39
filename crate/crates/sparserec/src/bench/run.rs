//! The experiment runner: builds the train-side pipeline, classifies every
//! test sample and aggregates metrics. Only the sparse-coding step counts
//! toward the headline timing; feature extraction and training are
//! reported separately.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use super::config::{DatasetSpec, ExperimentConfig, OccDictSpec, PipelineMode};
use crate::classifier::{
    build_global_dictionary, classify, CodingNorm, OcclusionAtoms, PartitionedClassifier,
};
use crate::dataset::{
    apply_occlusion, load_dataset, normalize_image, synth_faces, LabeledImageSet,
};
use crate::elm_ae::{project_values, train_elm_ae, ProjectionModel};
use crate::error::{Error, Result};
use crate::gabor::{build_gabor_bank, gabor_features, GaborBank};
use crate::sparse::learn_compressed_dictionary;

/// Per-sample outcome row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sample_id: usize,
    pub true_label: usize,
    pub predicted: usize,
    pub coding_seconds: f64,
    pub iterations: usize,
    pub nnz: usize,
}

/// Aggregated experiment outcome.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    /// Fraction of test samples classified correctly; NaN when empty.
    pub recognition_rate: f64,
    /// Summed coding wall time over samples.
    pub total_coding_time: f64,
    pub per_sample: Vec<SampleRecord>,
    /// confusion[true][predicted] counts.
    pub confusion: Vec<Vec<usize>>,
    pub mean_iterations: f64,
    pub mean_nnz: f64,
    /// Wall time spent extracting features (train + test).
    pub feature_seconds: f64,
    /// Wall time spent training models and dictionaries.
    pub train_seconds: f64,
    /// Canonical config text sufficient to re-run bit-identically.
    pub config_echo: String,
}

impl MetricsReport {
    /// Recomputes the rate from the confusion matrix.
    pub fn rate_from_confusion(&self) -> f64 {
        let total: usize = self.confusion.iter().flatten().sum();
        if total == 0 {
            return f64::NAN;
        }
        let hits: usize = (0..self.confusion.len())
            .map(|i| self.confusion[i][i])
            .sum();
        hits as f64 / total as f64
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

fn resolve_dataset(config: &ExperimentConfig) -> Result<LabeledImageSet> {
    match &config.dataset {
        DatasetSpec::Path(p) => load_dataset(p),
        DatasetSpec::Synth {
            classes,
            per_class,
            height,
            width,
            noise,
        } => synth_faces(*classes, *per_class, (*height, *width), *noise, config.seed),
    }
}

fn raw_feature(img: &Array2<f64>) -> Array1<f64> {
    let (norm, _) = normalize_image(img);
    Array1::from_iter(norm.iter().copied())
}

fn gabor_feature_matrix(images: &[Array2<f64>], bank: &GaborBank) -> Result<Vec<Array1<f64>>> {
    images
        .par_iter()
        .map(|img| Ok(gabor_features(img, bank)?.values))
        .collect()
}

fn columns_to_matrix(cols: &[Array1<f64>]) -> Array2<f64> {
    let dim = cols.first().map(|c| c.len()).unwrap_or(0);
    let mut m = Array2::<f64>::zeros((dim, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        m.column_mut(j).assign(c);
    }
    m
}

/// Occlusion exemplar pairs (clean, occluded) drawn from training images
/// with seeds disjoint from the test-sample occlusion seeds.
fn occlusion_exemplar_pairs(
    train: &LabeledImageSet,
    config: &ExperimentConfig,
    count: usize,
) -> Result<Vec<(Array2<f64>, Array2<f64>)>> {
    let spec = config.occlusion.as_ref().ok_or_else(|| {
        Error::Config("learned occlusion dictionary requires an occlusion spec".into())
    })?;
    let mut pairs = Vec::with_capacity(count);
    for i in 0..count {
        let img = &train.images[i % train.len()];
        let sample_spec = spec.for_sample(0x0002_0000 + i as u64);
        pairs.push((img.clone(), apply_occlusion(img, &sample_spec)?));
    }
    Ok(pairs)
}

/// How many training images each occlusion exemplar averages over. The
/// average cancels class-specific content in the feature difference and
/// keeps the systematic occlusion signature.
const EXEMPLAR_AVERAGING: usize = 4;

/// Pre-reduction feature of one image under the configured pipeline.
fn pipeline_feature(
    img: &Array2<f64>,
    mode: PipelineMode,
    bank: &GaborBank,
) -> Result<Array1<f64>> {
    match mode {
        PipelineMode::Src => Ok(raw_feature(img)),
        PipelineMode::Gsrc | PipelineMode::Hsr => Ok(gabor_features(img, bank)?.values),
    }
}

/// Exemplar difference vectors in pre-reduction feature space: each column
/// is one occlusion realization applied to several training images with
/// the feature differences averaged (the average cancels class-specific
/// content and keeps the occlusion signature).
pub fn occlusion_exemplar_diffs(
    train: &LabeledImageSet,
    config: &ExperimentConfig,
    bank: &GaborBank,
    exemplars: usize,
) -> Result<Vec<Array1<f64>>> {
    let spec = config.occlusion.as_ref().ok_or_else(|| {
        Error::Config("learned occlusion dictionary requires an occlusion spec".into())
    })?;

    let clean_feats: Vec<Array1<f64>> = train
        .images
        .par_iter()
        .map(|img| pipeline_feature(img, config.pipeline, bank))
        .collect::<Result<Vec<_>>>()?;

    let diffs: Vec<Array1<f64>> = (0..exemplars)
        .into_par_iter()
        .map(|g| {
            let group_spec = spec.for_sample(0x0001_0000 + g as u64);
            let mut acc: Option<Array1<f64>> = None;
            for m in 0..EXEMPLAR_AVERAGING {
                let idx = (g * EXEMPLAR_AVERAGING + m) % train.len();
                let occluded = apply_occlusion(&train.images[idx], &group_spec)?;
                let of = pipeline_feature(&occluded, config.pipeline, bank)?;
                let d = &of - &clean_feats[idx];
                acc = Some(match acc {
                    None => d,
                    Some(a) => a + d,
                });
            }
            Ok(acc.unwrap() / EXEMPLAR_AVERAGING as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(diffs
        .into_iter()
        .filter(|d| d.dot(d).sqrt() > 1e-12)
        .collect())
}

/// Learns the compressed occlusion atoms in pre-reduction feature space
/// from exemplar difference vectors.
pub fn learn_occlusion_atoms(
    train: &LabeledImageSet,
    config: &ExperimentConfig,
    bank: &GaborBank,
) -> Result<crate::sparse::LearnedOcclusionDictionary> {
    let (p, zeta, exemplars) = match config.occ_dict {
        OccDictSpec::Learned { p, zeta, exemplars } => (p, zeta, exemplars),
        _ => {
            return Err(Error::Config(
                "occ_dict is not set to learned in this config".into(),
            ))
        }
    };
    let kept = occlusion_exemplar_diffs(train, config, bank, exemplars)?;
    if kept.len() < p {
        return Err(Error::Data(format!(
            "only {} usable occlusion exemplars for {} atoms",
            kept.len(),
            p
        )));
    }
    let z = columns_to_matrix(&kept);
    learn_compressed_dictionary(&z, p, zeta, &config.schedule, config.seed)
}

/// Runs one experiment end to end.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsReport> {
    config.validate()?;
    let data = stage("dataset", resolve_dataset(config))?;
    let (train, test) = data.split_train_test(config.train_per_class, config.seed);
    if train.is_empty() {
        return Err(Error::Config("empty training split".into()).in_stage("dataset"));
    }
    let num_classes = data.num_classes();

    // occlude test images when configured
    let test_images: Vec<Array2<f64>> = match &config.occlusion {
        Some(spec) => stage(
            "occlusion",
            test.images
                .iter()
                .enumerate()
                .map(|(i, img)| apply_occlusion(img, &spec.for_sample(i as u64)))
                .collect::<Result<Vec<_>>>(),
        )?,
        None => test.images.clone(),
    };

    if let Some(part) = &config.partition {
        // partitioned pipeline (hsr only, enforced by validate)
        let t0 = Instant::now();
        let exemplar_pairs = if part.per_block_occ_atoms > 0 {
            let count = (part.per_block_occ_atoms * 3).max(8);
            Some(stage(
                "occlusion-exemplars",
                occlusion_exemplar_pairs(&train, config, count),
            )?)
        } else {
            None
        };
        let zeta = match config.occ_dict {
            OccDictSpec::Learned { zeta, .. } => zeta,
            _ => 0.05,
        };
        let model = stage(
            "partition-train",
            PartitionedClassifier::train(
                &train.images,
                &train.labels,
                *part,
                &config.gabor,
                config.reduce_dim.unwrap_or(64),
                config.elm_c,
                config.lambda,
                CodingNorm::LHalf,
                &config.schedule,
                exemplar_pairs.as_deref(),
                zeta,
                config.seed,
            ),
        )?;
        let train_seconds = t0.elapsed().as_secs_f64();

        let records: Vec<SampleRecord> = stage(
            "classify",
            test_images
                .par_iter()
                .enumerate()
                .map(|(i, img)| {
                    let res = model.classify(img)?;
                    Ok(SampleRecord {
                        sample_id: i,
                        true_label: test.labels[i],
                        predicted: res.identity,
                        coding_seconds: res.coding_seconds,
                        iterations: res.iterations,
                        nnz: res.nnz,
                    })
                })
                .collect::<Result<Vec<_>>>(),
        )?;
        return Ok(assemble_report(
            config,
            num_classes,
            records,
            0.0,
            train_seconds,
        ));
    }

    let norm = match config.pipeline {
        PipelineMode::Src | PipelineMode::Gsrc => CodingNorm::L1,
        PipelineMode::Hsr => CodingNorm::LHalf,
    };

    // feature extraction
    let tf = Instant::now();
    let bank = stage("gabor", build_gabor_bank(&config.gabor))?;
    let (train_feats, test_feats): (Vec<Array1<f64>>, Vec<Array1<f64>>) = match config.pipeline {
        PipelineMode::Src => (
            train.images.iter().map(raw_feature).collect(),
            test_images.iter().map(raw_feature).collect(),
        ),
        PipelineMode::Gsrc | PipelineMode::Hsr => (
            stage("gabor", gabor_feature_matrix(&train.images, &bank))?,
            stage("gabor", gabor_feature_matrix(&test_images, &bank))?,
        ),
    };
    let feature_seconds = tf.elapsed().as_secs_f64();

    // training: optional occlusion dictionary in pre-reduction space,
    // optional autoencoder reduction, dictionary assembly
    let tt = Instant::now();
    let (learned_occ, occ_diffs) = match config.occ_dict {
        OccDictSpec::Learned { p, zeta, exemplars } => {
            let diffs = stage(
                "occlusion-dictionary",
                occlusion_exemplar_diffs(&train, config, &bank, exemplars),
            )?;
            if diffs.len() < p {
                return Err(Error::Data(format!(
                    "only {} usable occlusion exemplars for {} atoms",
                    diffs.len(),
                    p
                ))
                .in_stage("occlusion-dictionary"));
            }
            let z = columns_to_matrix(&diffs);
            let learned = stage(
                "occlusion-dictionary",
                learn_compressed_dictionary(&z, p, zeta, &config.schedule, config.seed),
            )?;
            (Some(learned), diffs)
        }
        _ => (None, Vec::new()),
    };

    let (dict_train_cols, dict_test_cols, occ_atoms): (
        Vec<Array1<f64>>,
        Vec<Array1<f64>>,
        Option<Array2<f64>>,
    ) = match config.pipeline {
        PipelineMode::Hsr => {
            let hidden = config.reduce_dim.unwrap().min(train_feats[0].len());
            // the compression map must represent everything the global
            // dictionary holds, so occlusion exemplar directions train
            // alongside the clean features
            let x = {
                let dim = train_feats[0].len();
                let rows = train_feats.len() + occ_diffs.len();
                let mut m = Array2::<f64>::zeros((rows, dim));
                for (i, f) in train_feats.iter().enumerate() {
                    m.row_mut(i).assign(f);
                }
                for (i, d) in occ_diffs.iter().enumerate() {
                    m.row_mut(train_feats.len() + i).assign(d);
                }
                m
            };
            let model: ProjectionModel = stage(
                "elm-ae",
                train_elm_ae(&x, hidden, config.elm_c, config.seed),
            )?;
            let project_all = |feats: &[Array1<f64>]| -> Result<Vec<Array1<f64>>> {
                feats
                    .par_iter()
                    .map(|f| project_values(f, &model))
                    .collect()
            };
            let tr = stage("elm-ae", project_all(&train_feats))?;
            let te = stage("elm-ae", project_all(&test_feats))?;
            let occ = match &learned_occ {
                Some(l) => {
                    let mut projected = Array2::<f64>::zeros((hidden, l.p));
                    for j in 0..l.p {
                        let col = l.gamma.column(j).to_owned();
                        projected
                            .column_mut(j)
                            .assign(&stage("elm-ae", project_values(&col, &model))?);
                    }
                    Some(projected)
                }
                None => None,
            };
            (tr, te, occ)
        }
        _ => {
            let occ = learned_occ.as_ref().map(|l| l.gamma.clone());
            (train_feats, test_feats, occ)
        }
    };

    let train_matrix = columns_to_matrix(&dict_train_cols);
    let occ_spec = match (&config.occ_dict, &occ_atoms) {
        (OccDictSpec::None, _) => OcclusionAtoms::None,
        (OccDictSpec::Identity, _) => OcclusionAtoms::Identity,
        (OccDictSpec::Learned { .. }, Some(gamma)) => OcclusionAtoms::Learned(gamma),
        (OccDictSpec::Learned { .. }, None) => OcclusionAtoms::None,
    };
    let dict = stage(
        "dictionary",
        build_global_dictionary(&train_matrix, &train.labels, occ_spec),
    )?;
    let train_seconds = tt.elapsed().as_secs_f64();

    let records: Vec<SampleRecord> = stage(
        "classify",
        dict_test_cols
            .par_iter()
            .enumerate()
            .map(|(i, y)| {
                let res = classify(y, &dict, config.lambda, norm, &config.schedule)?;
                Ok(SampleRecord {
                    sample_id: i,
                    true_label: test.labels[i],
                    predicted: res.identity,
                    coding_seconds: res.coding_seconds,
                    iterations: res.code.iterations,
                    nnz: res.code.nnz(1e-6),
                })
            })
            .collect::<Result<Vec<_>>>(),
    )?;

    Ok(assemble_report(
        config,
        num_classes,
        records,
        feature_seconds,
        train_seconds,
    ))
}

fn assemble_report(
    config: &ExperimentConfig,
    num_classes: usize,
    records: Vec<SampleRecord>,
    feature_seconds: f64,
    train_seconds: f64,
) -> MetricsReport {
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    let mut total_time = 0.0;
    let mut iters = 0usize;
    let mut nnz = 0usize;
    for r in &records {
        confusion[r.true_label][r.predicted] += 1;
        total_time += r.coding_seconds;
        iters += r.iterations;
        nnz += r.nnz;
    }
    let n = records.len();
    let hits: usize = (0..num_classes).map(|i| confusion[i][i]).sum();
    MetricsReport {
        recognition_rate: if n == 0 {
            f64::NAN
        } else {
            hits as f64 / n as f64
        },
        total_coding_time: total_time,
        mean_iterations: if n == 0 { 0.0 } else { iters as f64 / n as f64 },
        mean_nnz: if n == 0 { 0.0 } else { nnz as f64 / n as f64 },
        per_sample: records,
        confusion,
        feature_seconds,
        train_seconds,
        config_echo: config.echo(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::ExperimentConfig;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig::parse(
            "\
pipeline = hsr
seed = 3
lambda = 0.001
dataset.synth.classes = 4
dataset.synth.per_class = 6
dataset.synth.height = 24
dataset.synth.width = 24
dataset.synth.noise = 0.04
split.train_per_class = 3
gabor.kernel_size = 11
gabor.downsample = 2
reduce.dim = 48
",
        )
        .unwrap()
    }

    #[test]
    fn hsr_runs_and_reports() {
        let report = run_experiment(&small_config()).unwrap();
        assert_eq!(report.per_sample.len(), 4 * 3);
        assert!(
            report.recognition_rate >= 0.5,
            "rate {}",
            report.recognition_rate
        );
        assert!((report.recognition_rate - report.rate_from_confusion()).abs() < 1e-12);
        assert!(report.total_coding_time >= 0.0);
    }

    #[test]
    fn rerun_is_deterministic() {
        let cfg = small_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.recognition_rate.to_bits(), b.recognition_rate.to_bits());
        assert_eq!(a.confusion, b.confusion);
        let nnz_a: Vec<usize> = a.per_sample.iter().map(|r| r.nnz).collect();
        let nnz_b: Vec<usize> = b.per_sample.iter().map(|r| r.nnz).collect();
        assert_eq!(nnz_a, nnz_b);
    }

    #[test]
    fn src_mode_runs() {
        let mut cfg = small_config();
        cfg.pipeline = PipelineMode::Src;
        cfg.reduce_dim = None;
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.per_sample.len(), 12);
    }

    #[test]
    fn partitioned_run_with_per_block_occ_atoms_is_deterministic() {
        let cfg = ExperimentConfig::parse(
            "\
pipeline = hsr
seed = 5
lambda = 0.001
dataset.synth.classes = 3
dataset.synth.per_class = 6
dataset.synth.height = 16
dataset.synth.width = 16
dataset.synth.noise = 0.04
split.train_per_class = 3
gabor.kernel_size = 7
gabor.downsample = 1
reduce.dim = 24
solver.inner_tol = 1e-5
solver.max_inner_iter = 400
occlusion.kind = band
occlusion.fraction = 0.4
occlusion.fill = random-noise
occlusion.seed = 3
partition.grid = 2x1
partition.block_height = 8
partition.block_width = 16
partition.occ_atoms = 2
",
        )
        .unwrap();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.per_sample.len(), 9);
        assert_eq!(a.recognition_rate.to_bits(), b.recognition_rate.to_bits());
        assert_eq!(a.confusion, b.confusion);
        let preds_a: Vec<usize> = a.per_sample.iter().map(|r| r.predicted).collect();
        let preds_b: Vec<usize> = b.per_sample.iter().map(|r| r.predicted).collect();
        assert_eq!(preds_a, preds_b);
    }

    #[test]
    fn hsr_codes_no_denser_than_gsrc() {
        // identical data, moderate lambda so sparsity differences show
        let base = "\
seed = 7
lambda = 0.01
dataset.synth.classes = 4
dataset.synth.per_class = 6
dataset.synth.height = 20
dataset.synth.width = 20
dataset.synth.noise = 0.04
split.train_per_class = 3
gabor.kernel_size = 9
gabor.downsample = 2
reduce.dim = 32
";
        let hsr =
            run_experiment(&ExperimentConfig::parse(&format!("{base}pipeline = hsr\n")).unwrap())
                .unwrap();
        let gsrc =
            run_experiment(&ExperimentConfig::parse(&format!("{base}pipeline = gsrc\n")).unwrap())
                .unwrap();
        assert!(
            hsr.mean_nnz <= gsrc.mean_nnz,
            "hsr nnz {} > gsrc nnz {}",
            hsr.mean_nnz,
            gsrc.mean_nnz
        );
    }

    #[test]
    fn empty_test_set_reports_nan_rate() {
        let mut cfg = small_config();
        cfg.train_per_class = 6; // consumes every sample
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.per_sample.len(), 0);
        assert!(report.recognition_rate.is_nan());
        let dir = tempfile::tempdir().unwrap();
        let paths =
            crate::bench::report::emit_report(&report, dir.path(), &crate::bench::ALL_FORMATS)
                .unwrap();
        assert_eq!(paths.len(), 3);
        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains("recognition_rate = nan"));
        assert!(summary.contains("samples = 0"));
        let csv = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1); // header only
    }

    #[test]
    fn error_names_failing_stage() {
        let mut cfg = small_config();
        cfg.dataset = DatasetSpec::Path(std::path::PathBuf::from("/nonexistent/dataset"));
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.to_string().contains("dataset"), "got: {err}");
    }
}
