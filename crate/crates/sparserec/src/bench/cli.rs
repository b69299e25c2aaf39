//! Command-line entry points for the benchmark binary. Argument handling
//! stays deliberately small: four subcommands with long flags only.

use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::report::{emit_report, parse_samples_csv, summarize_records, ALL_FORMATS};
use super::run::run_experiment;
use crate::dataset::{save_png, synth_faces};
use crate::error::{Error, Result};
use crate::gabor::build_gabor_bank;

const USAGE: &str = "\
usage: sparserec <command> [flags]

commands:
  run       --config PATH --out DIR [--seed N]
            run an experiment and write samples.csv, summary.txt, metrics.dat
  synth     --out DIR [--classes N] [--per-class N] [--height N] [--width N]
            [--noise F] [--seed N]
            write a synthetic dataset (png tree + manifest.txt) to DIR
  learn-occ --config PATH --out FILE
            learn a compressed occlusion dictionary and save it to FILE
  report    --csv PATH [--out DIR]
            recompute the summary from a samples.csv
";

/// Runs the CLI; returns the process exit code.
pub fn run(args: Vec<String>) -> i32 {
    match dispatch(&args) {
        Ok(()) => 0,
        Err(Error::Config(msg)) if msg == "usage" => {
            eprint!("{USAGE}");
            2
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            1
        }
    }
}

fn dispatch(args: &[String]) -> Result<()> {
    let mut it = args.iter();
    let command = it.next().ok_or_else(|| Error::Config("usage".into()))?;
    let rest: Vec<&String> = it.collect();
    match command.as_str() {
        "run" => cmd_run(&rest),
        "synth" => cmd_synth(&rest),
        "learn-occ" => cmd_learn_occ(&rest),
        "report" => cmd_report(&rest),
        "--help" | "-h" | "help" => Err(Error::Config("usage".into())),
        other => Err(Error::Config(format!(
            "unknown command `{other}` (try --help)"
        ))),
    }
}

struct Flags<'a> {
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Flags<'a> {
    fn parse(args: &[&'a String]) -> Result<Flags<'a>> {
        let mut pairs = Vec::new();
        let mut i = 0;
        while i < args.len() {
            let flag = args[i].as_str();
            if !flag.starts_with("--") {
                return Err(Error::Config(format!("unexpected argument `{flag}`")));
            }
            let value = args
                .get(i + 1)
                .ok_or_else(|| Error::Config(format!("flag {flag} needs a value")))?;
            pairs.push((&flag[2..], value.as_str()));
            i += 2;
        }
        Ok(Flags { pairs })
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
    }

    fn require(&self, name: &str) -> Result<&str> {
        self.get(name)
            .ok_or_else(|| Error::Config(format!("missing required flag --{name}")))
    }

    fn num<T: std::str::FromStr>(&self, name: &str, default: T) -> Result<T> {
        match self.get(name) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("bad value for --{name}: `{v}`"))),
        }
    }
}

fn load_config(path: &str) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.to_string(), e))?;
    ExperimentConfig::parse(&text)
}

fn cmd_run(args: &[&String]) -> Result<()> {
    let flags = Flags::parse(args)?;
    let mut config = load_config(flags.require("config")?)?;
    if let Some(seed) = flags.get("seed") {
        config.seed = seed
            .parse()
            .map_err(|_| Error::Config(format!("bad value for --seed: `{seed}`")))?;
    }
    let out_dir = PathBuf::from(flags.require("out")?);
    let report = run_experiment(&config)?;
    let written = emit_report(&report, &out_dir, &ALL_FORMATS)?;
    println!(
        "recognition_rate = {:.6}  samples = {}  coding_time_s = {:.3}",
        report.recognition_rate,
        report.per_sample.len(),
        report.total_coding_time
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_synth(args: &[&String]) -> Result<()> {
    let flags = Flags::parse(args)?;
    let out_dir = PathBuf::from(flags.require("out")?);
    let classes: usize = flags.num("classes", 10)?;
    let per_class: usize = flags.num("per-class", 20)?;
    let height: usize = flags.num("height", 32)?;
    let width: usize = flags.num("width", 32)?;
    let noise: f64 = flags.num("noise", 0.05)?;
    let seed: u64 = flags.num("seed", 1)?;

    let set = synth_faces(classes, per_class, (height, width), noise, seed)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    for class in 0..classes {
        let class_dir = out_dir.join(format!("class{class:03}"));
        std::fs::create_dir_all(&class_dir)
            .map_err(|e| Error::io(class_dir.display().to_string(), e))?;
        let mut index = 0usize;
        for (img, &label) in set.images.iter().zip(&set.labels) {
            if label == class {
                save_png(img, &class_dir.join(format!("sample{index:04}.png")))?;
                index += 1;
            }
        }
    }
    let manifest = format!(
        "name = {}\nseed = {seed}\nclasses = {classes}\nper_class = {per_class}\n\
         height = {height}\nwidth = {width}\nnoise = {noise:?}\n",
        set.name
    );
    let manifest_path = out_dir.join("manifest.txt");
    std::fs::write(&manifest_path, manifest)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    println!(
        "wrote {} images across {} classes under {}",
        set.len(),
        classes,
        out_dir.display()
    );
    Ok(())
}

fn cmd_learn_occ(args: &[&String]) -> Result<()> {
    let flags = Flags::parse(args)?;
    let config = load_config(flags.require("config")?)?;
    let out = PathBuf::from(flags.require("out")?);

    let data = match &config.dataset {
        super::config::DatasetSpec::Path(p) => crate::dataset::load_dataset(p)?,
        super::config::DatasetSpec::Synth {
            classes,
            per_class,
            height,
            width,
            noise,
        } => synth_faces(*classes, *per_class, (*height, *width), *noise, config.seed)?,
    };
    let (train, _) = data.split_train_test(config.train_per_class, config.seed);
    let bank = build_gabor_bank(&config.gabor)?;
    let learned = super::run::learn_occlusion_atoms(&train, &config, &bank)
        .map_err(|e| e.in_stage("occlusion-dictionary"))?;
    save_occlusion_dictionary(&learned, &out)?;
    println!(
        "learned {} atoms (dim {}) with training residual {:.6e}; wrote {}",
        learned.p,
        learned.gamma.nrows(),
        learned.training_residual,
        out.display()
    );
    Ok(())
}

fn cmd_report(args: &[&String]) -> Result<()> {
    let flags = Flags::parse(args)?;
    let csv = flags.require("csv")?;
    let records = parse_samples_csv(Path::new(csv))?;
    let (rate, confusion) = summarize_records(&records);
    let mut text = String::new();
    if records.is_empty() {
        text.push_str("recognition_rate = nan\n");
    } else {
        text.push_str(&format!("recognition_rate = {rate:.6}\n"));
    }
    text.push_str(&format!("samples = {}\n", records.len()));
    let total: f64 = records.iter().map(|r| r.coding_seconds).sum();
    text.push_str(&format!("total_coding_time_s = {total:.6}\n"));
    for (i, row) in confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        text.push_str(&format!("confusion.{i} = {}\n", cells.join(" ")));
    }
    print!("{text}");
    if let Some(out) = flags.get("out") {
        let out_dir = PathBuf::from(out);
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| Error::io(out_dir.display().to_string(), e))?;
        let path = out_dir.join("summary.txt");
        std::fs::write(&path, &text).map_err(|e| Error::io(path.display().to_string(), e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

const OCC_MAGIC: &[u8; 8] = b"SPROCDIC";

/// Saves a learned occlusion dictionary as a flat binary file.
pub fn save_occlusion_dictionary(
    dict: &crate::sparse::LearnedOcclusionDictionary,
    path: &Path,
) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(OCC_MAGIC);
    buf.extend_from_slice(&(dict.gamma.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(dict.p as u64).to_le_bytes());
    buf.extend_from_slice(&dict.zeta.to_bits().to_le_bytes());
    buf.extend_from_slice(&dict.training_residual.to_bits().to_le_bytes());
    for v in dict.gamma.iter() {
        buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads a dictionary saved by [`save_occlusion_dictionary`].
pub fn load_occlusion_dictionary(path: &Path) -> Result<crate::sparse::LearnedOcclusionDictionary> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.len() < 40 || &bytes[..8] != OCC_MAGIC {
        return Err(Error::Data(format!(
            "{} is not an occlusion dictionary file",
            path.display()
        )));
    }
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let dim = u64_at(8) as usize;
    let p = u64_at(16) as usize;
    let zeta = f64::from_bits(u64_at(24));
    let residual = f64::from_bits(u64_at(32));
    let need = 40 + dim * p * 8;
    if bytes.len() != need {
        return Err(Error::Data(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            need,
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes[40..]
        .chunks_exact(8)
        .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let gamma =
        ndarray::Array2::from_shape_vec((dim, p), data).map_err(|e| Error::Data(e.to_string()))?;
    Ok(crate::sparse::LearnedOcclusionDictionary {
        gamma,
        p,
        zeta,
        training_residual: residual,
        residual_trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_and_require() {
        let a = "--config".to_string();
        let b = "x.cfg".to_string();
        let args = vec![&a, &b];
        let flags = Flags::parse(&args).unwrap();
        assert_eq!(flags.require("config").unwrap(), "x.cfg");
        assert!(flags.require("out").is_err());
    }

    #[test]
    fn occlusion_dictionary_roundtrip() {
        let mut rng = crate::linalg::seeded_rng(5);
        let mut z = ndarray::Array2::<f64>::zeros((12, 10));
        for j in 0..10 {
            z.column_mut(j)
                .assign(&crate::linalg::gaussian_vector(12, &mut rng));
        }
        let learned = crate::sparse::learn_compressed_dictionary(
            &z,
            3,
            0.05,
            &crate::sparse::SolverSchedule::default(),
            1,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("occ.bin");
        save_occlusion_dictionary(&learned, &path).unwrap();
        let loaded = load_occlusion_dictionary(&path).unwrap();
        assert_eq!(learned.gamma, loaded.gamma);
        assert_eq!(learned.zeta, loaded.zeta);
        assert_eq!(learned.training_residual, loaded.training_residual);
    }
}
