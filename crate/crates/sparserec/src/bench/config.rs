//! Experiment configuration: a flat key-value text format with dotted
//! section keys. Lines are `key = value`; `#` starts a comment. Unknown
//! keys are rejected so typos fail loudly.

use std::path::PathBuf;

use crate::classifier::PartitionConfig;
use crate::dataset::{FillKind, OcclusionKind, OcclusionSpec};
use crate::error::{Error, Result};
use crate::gabor::GaborParams;
use crate::sparse::SolverSchedule;

/// Which pipeline variant an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineMode {
    /// Raw normalized pixels coded with L1.
    Src,
    /// Gabor-augmented features coded with L1.
    Gsrc,
    /// Gabor features, autoencoder reduction, L1/2 coding.
    Hsr,
}

impl PipelineMode {
    pub fn name(&self) -> &'static str {
        match self {
            PipelineMode::Src => "src",
            PipelineMode::Gsrc => "gsrc",
            PipelineMode::Hsr => "hsr",
        }
    }
}

/// Source of experiment images.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// `root/<class>/<image>` directory tree.
    Path(PathBuf),
    /// Seeded synthetic dataset.
    Synth {
        classes: usize,
        per_class: usize,
        height: usize,
        width: usize,
        noise: f64,
    },
}

/// Occlusion-dictionary construction mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OccDictSpec {
    None,
    Identity,
    Learned {
        p: usize,
        zeta: f64,
        exemplars: usize,
    },
}

/// Full experiment description; `parse` and `echo` round-trip.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub train_per_class: usize,
    pub pipeline: PipelineMode,
    pub gabor: GaborParams,
    pub reduce_dim: Option<usize>,
    pub elm_c: f64,
    pub lambda: f64,
    pub occlusion: Option<OcclusionSpec>,
    pub partition: Option<PartitionConfig>,
    pub occ_dict: OccDictSpec,
    pub schedule: SolverSchedule,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::Synth {
                classes: 10,
                per_class: 20,
                height: 32,
                width: 32,
                noise: 0.05,
            },
            train_per_class: 10,
            pipeline: PipelineMode::Hsr,
            gabor: GaborParams {
                kernel_size: 19,
                downsample: 2,
                ..GaborParams::default()
            },
            reduce_dim: Some(128),
            elm_c: 100.0,
            lambda: 0.001,
            occlusion: None,
            partition: None,
            occ_dict: OccDictSpec::None,
            schedule: SolverSchedule::default(),
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    /// Parses the key-value text format. Missing keys keep defaults.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let mut synth = match cfg.dataset.clone() {
            DatasetSpec::Synth {
                classes,
                per_class,
                height,
                width,
                noise,
            } => (classes, per_class, height, width, noise),
            _ => unreachable!(),
        };
        let mut dataset_path: Option<PathBuf> = None;
        let mut occ = (OcclusionKind::Band, 0.4, FillKind::RandomNoise, 0u64);
        let mut occ_set = false;
        let mut part = ((4usize, 2usize), (16usize, 16usize), 0usize);
        let mut part_set = false;
        let mut occ_dict_kind = "none".to_string();
        let mut occ_dict = (16usize, 0.05f64, 48usize);

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad =
                |what: &str| Error::Config(format!("line {}: bad {what}: `{value}`", lineno + 1));

            macro_rules! num {
                ($t:ty, $what:expr) => {
                    value.parse::<$t>().map_err(|_| bad($what))?
                };
            }

            match key {
                "pipeline" => {
                    cfg.pipeline = match value {
                        "src" => PipelineMode::Src,
                        "gsrc" => PipelineMode::Gsrc,
                        "hsr" => PipelineMode::Hsr,
                        _ => return Err(bad("pipeline (src|gsrc|hsr)")),
                    }
                }
                "seed" => cfg.seed = num!(u64, "seed"),
                "lambda" => cfg.lambda = num!(f64, "lambda"),
                "dataset.path" => dataset_path = Some(PathBuf::from(value)),
                "dataset.synth.classes" => synth.0 = num!(usize, "class count"),
                "dataset.synth.per_class" => synth.1 = num!(usize, "per-class count"),
                "dataset.synth.height" => synth.2 = num!(usize, "height"),
                "dataset.synth.width" => synth.3 = num!(usize, "width"),
                "dataset.synth.noise" => synth.4 = num!(f64, "noise"),
                "split.train_per_class" => cfg.train_per_class = num!(usize, "train per class"),
                "gabor.num_scales" => cfg.gabor.num_scales = num!(usize, "scale count"),
                "gabor.num_orientations" => {
                    cfg.gabor.num_orientations = num!(usize, "orientation count")
                }
                "gabor.k_max" => cfg.gabor.k_max = num!(f64, "k_max"),
                "gabor.f" => cfg.gabor.f = num!(f64, "f"),
                "gabor.sigma" => cfg.gabor.sigma = num!(f64, "sigma"),
                "gabor.kernel_size" => cfg.gabor.kernel_size = num!(usize, "kernel size"),
                "gabor.downsample" => cfg.gabor.downsample = num!(usize, "downsample"),
                "reduce.dim" => cfg.reduce_dim = Some(num!(usize, "reduced dimension")),
                "elm.c" => cfg.elm_c = num!(f64, "ridge C"),
                "occlusion.kind" => {
                    occ_set = true;
                    occ.0 = match value {
                        "block" => OcclusionKind::Block,
                        "band" => OcclusionKind::Band,
                        _ => return Err(bad("occlusion kind (block|band)")),
                    };
                }
                "occlusion.fraction" => {
                    occ_set = true;
                    occ.1 = num!(f64, "occlusion fraction");
                }
                "occlusion.fill" => {
                    occ_set = true;
                    occ.2 = match value {
                        "random-noise" => FillKind::RandomNoise,
                        "constant" => FillKind::Constant,
                        "texture" => FillKind::Texture,
                        _ => return Err(bad("occlusion fill (random-noise|constant|texture)")),
                    };
                }
                "occlusion.seed" => {
                    occ_set = true;
                    occ.3 = num!(u64, "occlusion seed");
                }
                "partition.grid" => {
                    part_set = true;
                    let (r, c) = value.split_once('x').ok_or_else(|| bad("grid (RxC)"))?;
                    part.0 = (
                        r.trim().parse().map_err(|_| bad("grid rows"))?,
                        c.trim().parse().map_err(|_| bad("grid cols"))?,
                    );
                }
                "partition.block_height" => {
                    part_set = true;
                    part.1 .0 = num!(usize, "block height");
                }
                "partition.block_width" => {
                    part_set = true;
                    part.1 .1 = num!(usize, "block width");
                }
                "partition.occ_atoms" => {
                    part_set = true;
                    part.2 = num!(usize, "per-block occlusion atoms");
                }
                "occ_dict" => occ_dict_kind = value.to_string(),
                "occ_dict.p" => occ_dict.0 = num!(usize, "occlusion atom count"),
                "occ_dict.zeta" => occ_dict.1 = num!(f64, "zeta"),
                "occ_dict.exemplars" => occ_dict.2 = num!(usize, "exemplar count"),
                "solver.inner_tol" => cfg.schedule.inner_tol = num!(f64, "inner tolerance"),
                "solver.max_inner_iter" => {
                    cfg.schedule.max_inner_iter = num!(usize, "max inner iterations")
                }
                "solver.outer_reweight_iters" => {
                    cfg.schedule.outer_reweight_iters = num!(usize, "reweight rounds")
                }
                "solver.epsilon" => cfg.schedule.epsilon_smoothing = num!(f64, "smoothing epsilon"),
                "solver.max_alternations" => {
                    cfg.schedule.max_alternations = num!(usize, "max alternations")
                }
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }

        cfg.dataset = match dataset_path {
            Some(p) => DatasetSpec::Path(p),
            None => DatasetSpec::Synth {
                classes: synth.0,
                per_class: synth.1,
                height: synth.2,
                width: synth.3,
                noise: synth.4,
            },
        };
        if occ_set {
            cfg.occlusion = Some(OcclusionSpec {
                kind: occ.0,
                fraction: occ.1,
                fill: occ.2,
                seed: occ.3,
            });
        }
        if part_set {
            cfg.partition = Some(PartitionConfig {
                grid: part.0,
                block_size: part.1,
                per_block_occ_atoms: part.2,
            });
        }
        cfg.occ_dict = match occ_dict_kind.as_str() {
            "none" => OccDictSpec::None,
            "identity" => OccDictSpec::Identity,
            "learned" => OccDictSpec::Learned {
                p: occ_dict.0,
                zeta: occ_dict.1,
                exemplars: occ_dict.2,
            },
            other => {
                return Err(Error::Config(format!(
                    "bad occ_dict `{other}` (none|identity|learned)"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Consistency checks across fields.
    pub fn validate(&self) -> Result<()> {
        self.gabor.validate()?;
        self.schedule.validate()?;
        if self.pipeline == PipelineMode::Hsr && self.reduce_dim.is_none() {
            return Err(Error::Config("hsr pipeline requires reduce.dim".into()));
        }
        if self.train_per_class < 1 {
            return Err(Error::Config("split.train_per_class must be >= 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be nonnegative".into()));
        }
        if !(self.elm_c > 0.0) {
            return Err(Error::Config("elm.c must be positive".into()));
        }
        if let Some(o) = &self.occlusion {
            o.validate()?;
        }
        if let Some(p) = &self.partition {
            p.validate()?;
            if self.pipeline != PipelineMode::Hsr {
                return Err(Error::Config(
                    "partitioned classification needs the hsr pipeline".into(),
                ));
            }
        }
        if let OccDictSpec::Learned { p, zeta, exemplars } = self.occ_dict {
            if p < 1 || exemplars < p {
                return Err(Error::Config(
                    "occ_dict.learned needs p >= 1 and exemplars >= p".into(),
                ));
            }
            if !(zeta > 0.0) {
                return Err(Error::Config("occ_dict.zeta must be positive".into()));
            }
            if self.occlusion.is_none() {
                return Err(Error::Config(
                    "occ_dict = learned requires an occlusion.* section to draw exemplars".into(),
                ));
            }
        }
        Ok(())
    }

    /// Canonical text form; `parse(echo())` reproduces the config.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("pipeline", self.pipeline.name().to_string());
        kv("seed", self.seed.to_string());
        kv("lambda", format!("{:?}", self.lambda));
        match &self.dataset {
            DatasetSpec::Path(p) => kv("dataset.path", p.display().to_string()),
            DatasetSpec::Synth {
                classes,
                per_class,
                height,
                width,
                noise,
            } => {
                kv("dataset.synth.classes", classes.to_string());
                kv("dataset.synth.per_class", per_class.to_string());
                kv("dataset.synth.height", height.to_string());
                kv("dataset.synth.width", width.to_string());
                kv("dataset.synth.noise", format!("{noise:?}"));
            }
        }
        kv("split.train_per_class", self.train_per_class.to_string());
        kv("gabor.num_scales", self.gabor.num_scales.to_string());
        kv(
            "gabor.num_orientations",
            self.gabor.num_orientations.to_string(),
        );
        kv("gabor.k_max", format!("{:?}", self.gabor.k_max));
        kv("gabor.f", format!("{:?}", self.gabor.f));
        kv("gabor.sigma", format!("{:?}", self.gabor.sigma));
        kv("gabor.kernel_size", self.gabor.kernel_size.to_string());
        kv("gabor.downsample", self.gabor.downsample.to_string());
        if let Some(d) = self.reduce_dim {
            kv("reduce.dim", d.to_string());
        }
        kv("elm.c", format!("{:?}", self.elm_c));
        if let Some(o) = &self.occlusion {
            kv(
                "occlusion.kind",
                match o.kind {
                    OcclusionKind::Block => "block",
                    OcclusionKind::Band => "band",
                }
                .to_string(),
            );
            kv("occlusion.fraction", format!("{:?}", o.fraction));
            kv(
                "occlusion.fill",
                match o.fill {
                    FillKind::RandomNoise => "random-noise",
                    FillKind::Constant => "constant",
                    FillKind::Texture => "texture",
                }
                .to_string(),
            );
            kv("occlusion.seed", o.seed.to_string());
        }
        if let Some(p) = &self.partition {
            kv("partition.grid", format!("{}x{}", p.grid.0, p.grid.1));
            kv("partition.block_height", p.block_size.0.to_string());
            kv("partition.block_width", p.block_size.1.to_string());
            kv("partition.occ_atoms", p.per_block_occ_atoms.to_string());
        }
        match self.occ_dict {
            OccDictSpec::None => kv("occ_dict", "none".to_string()),
            OccDictSpec::Identity => kv("occ_dict", "identity".to_string()),
            OccDictSpec::Learned { p, zeta, exemplars } => {
                kv("occ_dict", "learned".to_string());
                kv("occ_dict.p", p.to_string());
                kv("occ_dict.zeta", format!("{zeta:?}"));
                kv("occ_dict.exemplars", exemplars.to_string());
            }
        }
        kv("solver.inner_tol", format!("{:?}", self.schedule.inner_tol));
        kv(
            "solver.max_inner_iter",
            self.schedule.max_inner_iter.to_string(),
        );
        kv(
            "solver.outer_reweight_iters",
            self.schedule.outer_reweight_iters.to_string(),
        );
        kv(
            "solver.epsilon",
            format!("{:?}", self.schedule.epsilon_smoothing),
        );
        kv(
            "solver.max_alternations",
            self.schedule.max_alternations.to_string(),
        );
        out
    }
}
