//! Randomized autoencoder for dimensionality reduction: orthogonal random
//! input weights, a single ridge solve for the output weights, and the
//! output weights reused as a linear compression map.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::gabor::FeatureVector;
use crate::linalg::{
    gaussian_matrix, gaussian_vector, orthonormalize_columns, seeded_rng, spd_solve,
};

/// Scalar activation applied to the hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(&self, u: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-u).exp()),
            Activation::Tanh => u.tanh(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Result<Activation> {
        match name {
            "sigmoid" | "sig" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Parameter(format!("unknown activation `{other}`"))),
        }
    }
}

/// Trained autoencoder parameters. Immutable once trained; safe to share
/// across threads for concurrent projection.
#[derive(Debug, Clone)]
pub struct ProjectionModel {
    /// Input-to-hidden weights with orthonormal columns (input_dim x hidden_dim).
    pub a: Array2<f64>,
    /// Unit-norm hidden bias (hidden_dim).
    pub b: Array1<f64>,
    /// Output weights from the ridge solve (hidden_dim x input_dim).
    pub beta: Array2<f64>,
    /// Ridge regularizer.
    pub c: f64,
    pub activation: Activation,
    /// Seed used to draw `a` and `b`.
    pub seed: u64,
}

/// A feature vector after projection through a model.
#[derive(Debug, Clone)]
pub struct ReducedFeature {
    pub values: Array1<f64>,
    /// Fingerprint of the model that produced this feature.
    pub model_id: u64,
}

impl ProjectionModel {
    pub fn input_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.a.ncols()
    }

    /// Deterministic fingerprint of (dims, seed, C, activation).
    pub fn model_id(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64; // FNV-1a
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x100000001b3);
        };
        mix(self.input_dim() as u64);
        mix(self.hidden_dim() as u64);
        mix(self.seed);
        mix(self.c.to_bits());
        mix(self.activation.name().len() as u64);
        h
    }

    /// Hidden layer output for a batch of row samples: g(X a + b).
    pub fn hidden(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = x.dot(&self.a);
        for mut row in h.rows_mut() {
            row += &self.b;
        }
        h.mapv_inplace(|u| self.activation.apply(u));
        h
    }

    /// Reconstruction of the batch through the autoencoder: g(X a + b) beta.
    pub fn reconstruct(&self, x: &Array2<f64>) -> Array2<f64> {
        self.hidden(x).dot(&self.beta)
    }
}

/// Draws seeded orthonormal input weights and a unit-norm bias.
///
/// `a` comes from Gram-Schmidt orthonormalization of a Gaussian matrix, so
/// `a^T a = I`; `b` is a normalized Gaussian vector. Fully determined by
/// the seed.
pub fn generate_orthogonal_weights(
    input_dim: usize,
    hidden_dim: usize,
    seed: u64,
) -> Result<(Array2<f64>, Array1<f64>)> {
    if hidden_dim < 1 {
        return Err(Error::Parameter("hidden_dim must be >= 1".into()));
    }
    if hidden_dim > input_dim {
        return Err(Error::Parameter(format!(
            "hidden_dim {hidden_dim} > input_dim {input_dim}: compressed representation \
             requires fewer hidden nodes than inputs"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut a = gaussian_matrix(input_dim, hidden_dim, &mut rng);
    orthonormalize_columns(&mut a)?;
    let mut b = gaussian_vector(hidden_dim, &mut rng);
    let norm = b.dot(&b).sqrt();
    b.mapv_inplace(|v| v / norm);
    Ok((a, b))
}

/// Trains the autoencoder on row samples `x` (N x input_dim): the output
/// weights solve the ridge system `(I/C + H^T H) beta = H^T X`.
pub fn train_elm_ae(
    x: &Array2<f64>,
    hidden_dim: usize,
    c: f64,
    seed: u64,
) -> Result<ProjectionModel> {
    train_elm_ae_with(x, hidden_dim, c, seed, Activation::default())
}

/// As [`train_elm_ae`] with an explicit activation.
pub fn train_elm_ae_with(
    x: &Array2<f64>,
    hidden_dim: usize,
    c: f64,
    seed: u64,
    activation: Activation,
) -> Result<ProjectionModel> {
    let (n, input_dim) = x.dim();
    if n < 1 {
        return Err(Error::Data("training set is empty".into()));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Data("non-finite entries in training data".into()));
    }
    if !(c > 0.0) {
        return Err(Error::Parameter("ridge regularizer C must be > 0".into()));
    }
    let (a, b) = generate_orthogonal_weights(input_dim, hidden_dim, seed)?;

    let mut model = ProjectionModel {
        a,
        b,
        beta: Array2::zeros((hidden_dim, input_dim)),
        c,
        activation,
        seed,
    };
    let h = model.hidden(x);
    let mut gram = h.t().dot(&h);
    for i in 0..hidden_dim {
        gram[[i, i]] += 1.0 / c;
    }
    let rhs = h.t().dot(x);
    model.beta = spd_solve(&gram, &rhs)?;
    Ok(model)
}

/// Projects a feature vector through the model's output weights:
/// the reduced feature is the contraction of `x` with beta.
pub fn project(x: &FeatureVector, model: &ProjectionModel) -> Result<ReducedFeature> {
    Ok(ReducedFeature {
        values: project_values(&x.values, model)?,
        model_id: model.model_id(),
    })
}

/// Raw projection of a plain vector.
pub fn project_values(x: &Array1<f64>, model: &ProjectionModel) -> Result<Array1<f64>> {
    if x.len() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "feature has {} entries, model expects {}",
            x.len(),
            model.input_dim()
        )));
    }
    Ok(model.beta.dot(x))
}

const MODEL_MAGIC: &[u8; 8] = b"SPRELMAE";
const MODEL_VERSION: u32 = 1;

/// Serializes a model to a flat binary container; round-trips are
/// bit-exact for every float.
pub fn save_model(model: &ProjectionModel, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    let name = model.activation.name().as_bytes();
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name);
    buf.extend_from_slice(&(model.input_dim() as u64).to_le_bytes());
    buf.extend_from_slice(&(model.hidden_dim() as u64).to_le_bytes());
    buf.extend_from_slice(&model.seed.to_le_bytes());
    buf.extend_from_slice(&model.c.to_bits().to_le_bytes());
    for v in model.a.iter() {
        buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    for v in model.b.iter() {
        buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    for v in model.beta.iter() {
        buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&buf)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Loads a model saved by [`save_model`].
pub fn load_model(path: &Path) -> Result<ProjectionModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::Data(format!(
                "model file truncated at byte {} of {}",
                *pos,
                bytes.len()
            )));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 8)? != MODEL_MAGIC {
        return Err(Error::Data("not a projection-model file".into()));
    }
    let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::Data(format!("unsupported model version {version}")));
    }
    let name_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let name = std::str::from_utf8(take(&mut pos, name_len)?)
        .map_err(|_| Error::Data("bad activation name".into()))?
        .to_string();
    let activation = Activation::from_name(&name)?;
    let input_dim = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
    let hidden_dim = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
    let seed = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
    let c = f64::from_bits(u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));

    let read_f64s = |pos: &mut usize, count: usize| -> Result<Vec<f64>> {
        let raw = take(pos, count * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    };
    let a = Array2::from_shape_vec(
        (input_dim, hidden_dim),
        read_f64s(&mut pos, input_dim * hidden_dim)?,
    )
    .map_err(|e| Error::Data(e.to_string()))?;
    let b = Array1::from_vec(read_f64s(&mut pos, hidden_dim)?);
    let beta = Array2::from_shape_vec(
        (hidden_dim, input_dim),
        read_f64s(&mut pos, hidden_dim * input_dim)?,
    )
    .map_err(|e| Error::Data(e.to_string()))?;
    Ok(ProjectionModel {
        a,
        b,
        beta,
        c,
        activation,
        seed,
    })
}
