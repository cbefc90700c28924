//! Per-command experiment configs, read from JSON.
//!
//! Every field that drives randomness is a declared seed, and every config
//! is echoed into the files it produces.

use std::path::{Path, PathBuf};

use mccs_core::signals::CoefficientLaw;
use mccs_core::{OrthonormalBasis, Seed};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats;

pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Encoding scheme shared by `encode`, `decode` and `ric`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub m: usize,
    pub n: usize,
    /// Flip density of each level `0 .. w-2`.
    #[serde(default)]
    pub etas: Vec<f64>,
    /// `1/sqrt(n)` measurement normalization.
    #[serde(default)]
    pub scaled: bool,
}

impl SchemeConfig {
    pub fn sensing(&self) -> CliResult<mccs_core::sensing::SensingConfig> {
        Ok(mccs_core::sensing::SensingConfig::new(self.m, self.n, self.etas.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisSpec {
    #[default]
    Identity,
    Dct,
    Daubechies4,
    Random { seed: u64 },
    File { path: PathBuf },
}

impl BasisSpec {
    pub fn build(&self, n: usize) -> CliResult<OrthonormalBasis> {
        let b = match self {
            BasisSpec::Identity => OrthonormalBasis::identity(n)?,
            BasisSpec::Dct => OrthonormalBasis::dct2(n)?,
            BasisSpec::Daubechies4 => OrthonormalBasis::daubechies4(n)?,
            BasisSpec::Random { seed } => OrthonormalBasis::random(n, Seed(*seed))?,
            BasisSpec::File { path } => formats::read_basis(path)?,
        };
        if b.dim() != n {
            return Err(CliError::config(format!("basis has dimension {}, expected {n}", b.dim())));
        }
        Ok(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    #[default]
    Gaussian,
    UniformSign,
}

impl From<Law> for CoefficientLaw {
    fn from(l: Law) -> Self {
        match l {
            Law::Gaussian => CoefficientLaw::Gaussian,
            Law::UniformSign => CoefficientLaw::UniformSign,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    #[default]
    Bpdn,
    Cosamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeygenConfig {
    pub w: usize,
    #[serde(default)]
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSource {
    /// Single-column CSV cut into non-overlapping windows of length `n`.
    Corpus { path: PathBuf },
    /// `frames` draws of a `k`-sparse model.
    Synthetic {
        frames: usize,
        k: usize,
        #[serde(default)]
        basis: BasisSpec,
        #[serde(default)]
        law: Law,
        #[serde(default)]
        energy: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodeConfig {
    pub key: PathBuf,
    pub scheme: SchemeConfig,
    pub source: SignalSource,
    /// Also write each frame's encoding matrix as a golden binary file.
    #[serde(default)]
    pub write_matrices: bool,
}

/// Noise radius of the decoder: a number or `"genie"` (`||y - A x||` from
/// ground truth).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Value(f64),
    Named(GammaName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaName {
    Genie,
}

impl Default for GammaSpec {
    fn default() -> Self {
        GammaSpec::Value(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeConfig {
    pub key: PathBuf,
    pub measurements: PathBuf,
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub basis: BasisSpec,
    /// Defaults to the top class of the key.
    #[serde(default)]
    pub class: Option<usize>,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub gamma: GammaSpec,
    /// Sparsity, required by CoSaMP.
    #[serde(default)]
    pub k: Option<usize>,
    /// Plaintext CSV written by `encode`; enables RSNR scoring.
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
}

fn default_theta() -> f64 {
    0.5
}
fn default_trials() -> usize {
    1000
}
fn default_energy() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub m: usize,
    pub n: usize,
    pub etas: Vec<f64>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Plaintext energy of the sphere-uniform model used by both bounds.
    #[serde(default = "default_energy")]
    pub energy: f64,
    /// Trials of the practical lower bound; 0 skips it.
    #[serde(default = "default_trials")]
    pub lb_trials: usize,
    /// Sparsity for the RIP constants; no RIP columns without it.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_trials")]
    pub ric_trials: usize,
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RicConfig {
    pub m: usize,
    pub n: usize,
    pub etas: Vec<f64>,
    pub ks: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_chi() -> usize {
    50_000
}
fn default_pairs() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub e1: f64,
    pub e2: f64,
    pub n: usize,
    #[serde(default = "default_chi")]
    pub chi: usize,
    #[serde(rename = "P", default = "default_pairs")]
    pub pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_plaintexts() -> usize {
    100
}
fn default_rows() -> usize {
    100_000
}
fn default_rhos() -> Vec<f64> {
    vec![0.5, 0.1, 0.001]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub n_grid: Vec<usize>,
    #[serde(default = "default_plaintexts")]
    pub plaintexts: usize,
    #[serde(default = "default_rows")]
    pub rows: usize,
    #[serde(default = "default_rhos")]
    pub rhos: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_gauss_chi() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianityConfig {
    /// Dimension of the sphere-uniform plaintext; ignored with `signal`.
    #[serde(default)]
    pub n: Option<usize>,
    /// Single-column CSV holding the plaintext.
    #[serde(default)]
    pub signal: Option<PathBuf>,
    #[serde(default = "default_energy")]
    pub energy: f64,
    #[serde(default = "default_gauss_chi")]
    pub chi: usize,
    #[serde(default)]
    pub seed: u64,
}
