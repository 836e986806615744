use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::learning::{Architecture, Model};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Individual channel estimates, zero-forcing, per-client sparsity patterns.
    Blue,
    /// Sum-channel combining, one sparsity pattern shared by all clients.
    SumSame,
    /// Sum-channel combining, each client sparsifies on its own.
    SumDiff,
    /// Noiseless aggregation of the full updates.
    Genie,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Genie, Method::Blue, Method::SumSame, Method::SumDiff];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Blue => "blue",
            Method::SumSame => "sum-same",
            Method::SumDiff => "sum-diff",
            Method::Genie => "genie",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Mlp,
    Cnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    /// i.i.d. CN(0,1) entries normalized to spectral norm 1/1.01.
    Gaussian,
    /// A random unitary divided by 1.01; requires `samples = d/2`.
    ScaledUnitary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Desk,
    Paper,
}

/// Every knob of one simulation run. Config files are flat TOML tables with
/// these keys; missing keys take the desk-scale defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    /// Base-station antennas `M`.
    pub antennas: usize,
    /// Clients `K`; must be even.
    pub clients: usize,
    pub snr_db: f64,
    /// Pilot length `τ_p`.
    pub pilot_len: usize,
    /// Kept entries `S` per client; defaults to `⌊sparsity_fraction · d/2⌋`.
    pub sparsity: Option<usize>,
    pub sparsity_fraction: f64,
    /// Transmitted samples `T`; defaults to `samples_per_sparsity · S`.
    pub samples: Option<usize>,
    pub samples_per_sparsity: usize,
    pub rounds: u64,
    pub local_iters: usize,
    pub batch_size: usize,
    pub local_lr: f64,
    pub beta_db_low: f64,
    pub beta_db_high: f64,
    pub seed: u64,
    pub model: ModelKind,
    pub hidden: usize,
    /// Training samples kept per digit; `None` keeps everything.
    pub train_per_digit: Option<usize>,
    /// Test samples kept per digit (digits in use only); `None` keeps everything.
    pub test_per_digit: Option<usize>,
    pub mnist_dir: PathBuf,
    pub output: PathBuf,
    /// Drop pilot and data noise.
    pub noiseless: bool,
    /// Give the receiver the true channel instead of the MMSE estimate.
    pub perfect_csi: bool,
    pub measurement: MatrixKind,
    /// Write the measured wall-clock time; when off the column is zero so that
    /// runs are byte-for-byte reproducible.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// Small configuration that runs a full comparison in minutes on one core.
    pub fn desk() -> Self {
        Self {
            method: Method::Blue,
            antennas: 32,
            clients: 10,
            snr_db: 30.0,
            pilot_len: 10,
            sparsity: None,
            sparsity_fraction: 0.005,
            samples: None,
            samples_per_sparsity: 10,
            rounds: 150,
            local_iters: 6,
            batch_size: 100,
            local_lr: 0.5,
            beta_db_low: -40.0,
            beta_db_high: 0.0,
            seed: 1,
            model: ModelKind::Mlp,
            hidden: 4,
            train_per_digit: Some(400),
            test_per_digit: None,
            mnist_dir: PathBuf::from("data/mnist-5k"),
            output: PathBuf::from("metrics.csv"),
            noiseless: false,
            perfect_csi: false,
            measurement: MatrixKind::Gaussian,
            record_wall_time: true,
        }
    }

    /// The full setting: 100 antennas, 20 clients, the convolutional network
    /// and full MNIST.
    pub fn paper() -> Self {
        Self {
            antennas: 100,
            clients: 20,
            snr_db: 30.0,
            pilot_len: 20,
            rounds: 1000,
            local_iters: 3,
            batch_size: 500,
            local_lr: 0.01,
            model: ModelKind::Cnn,
            train_per_digit: None,
            test_per_digit: None,
            mnist_dir: PathBuf::from("data/mnist"),
            ..Self::desk()
        }
    }

    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self::desk(),
            Scale::Paper => Self::paper(),
        }
    }

    /// Parses a flat TOML document on top of `base`.
    pub fn from_toml_str(text: &str, base: Self) -> Result<Self> {
        let overrides: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let mut table = toml::Table::try_from(&base).map_err(|e| Error::Config(format!("{e}")))?;
        for (k, v) in overrides {
            table.insert(k, v);
        }
        table.try_into().map_err(|e| Error::Config(format!("{e}")))
    }

    pub fn from_file(path: &Path, base: Self) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn rho(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn build_model(&self) -> Result<Model> {
        match self.model {
            ModelKind::Mlp => Model::mlp(self.hidden),
            ModelKind::Cnn => Ok(Model::cnn()),
        }
    }

    /// `(S, T)` for a model with `real_len` parameters.
    pub fn sparsity_and_samples(&self, real_len: usize) -> (usize, usize) {
        let half = real_len.div_ceil(2);
        let s = self
            .sparsity
            .unwrap_or((self.sparsity_fraction * half as f64).floor() as usize)
            .clamp(1, half.max(1));
        let t = self.samples.unwrap_or(self.samples_per_sparsity * s).max(1);
        (s, t)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.clients == 0 || self.clients % 2 == 1 {
            return bad(format!("clients must be even and positive, got {}", self.clients));
        }
        if self.antennas == 0 {
            return bad("antennas must be positive".into());
        }
        if self.method == Method::Blue {
            if self.pilot_len < self.clients {
                return bad(format!(
                    "blue needs pilot_len >= clients ({} < {})",
                    self.pilot_len, self.clients
                ));
            }
            if self.antennas < self.clients {
                return bad(format!(
                    "blue needs antennas >= clients ({} < {})",
                    self.antennas, self.clients
                ));
            }
        }
        if self.pilot_len == 0 {
            return bad("pilot_len must be positive".into());
        }
        if self.sparsity == Some(0) || self.samples == Some(0) || self.samples_per_sparsity == 0 {
            return bad("sparsity and samples must be at least 1".into());
        }
        if self.local_iters == 0 || self.batch_size == 0 {
            return bad("local_iters and batch_size must be positive".into());
        }
        if let ModelKind::Mlp = self.model {
            if self.hidden == 0 {
                return bad("hidden must be positive".into());
            }
        }
        if self.measurement == MatrixKind::ScaledUnitary {
            let d = self.build_model()?.num_params();
            let (_, t) = self.sparsity_and_samples(d);
            if t != d.div_ceil(2) {
                return bad(format!("scaled-unitary matrices need samples = d/2 = {}", d.div_ceil(2)));
            }
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        match self.model {
            ModelKind::Mlp => Architecture::Mlp { hidden: self.hidden },
            ModelKind::Cnn => Architecture::Cnn,
        }
    }
}
