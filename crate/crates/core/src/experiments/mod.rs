//! Experiment configs, signal generation and sweep plumbing.

use std::path::PathBuf;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{generate_ba, generate_er, generate_sbm, Graph, ShiftOperatorKind};
use crate::sampling::Criterion;
use crate::spectral::{BandBasis, SpectralBasis};

pub mod output;
pub mod sweep;
pub mod verify;

pub use output::{write_csv, write_svg, CSV_HEADER};
pub use sweep::{run_mse_sweep, run_tau_sweep};
pub use verify::{verify_theorems, CheckResult, ThresholdRule, VerifyOptions, VerifyReport};

/// Bundled configs, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("default", include_str!("../../configs/default.json")),
    ("small", include_str!("../../configs/small.json")),
    ("desk", include_str!("../../configs/desk.json")),
    (
        "paper_scale",
        include_str!("../../configs/paper_scale.json"),
    ),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphModel {
    Er {
        p: f64,
    },
    Ba {
        m: usize,
    },
    Sbm {
        #[serde(default = "default_blocks")]
        blocks: usize,
        p_in: f64,
        p_out: f64,
    },
}

fn default_blocks() -> usize {
    10
}

impl GraphModel {
    pub fn generate(&self, n: usize, seed: u64) -> Result<Graph> {
        match *self {
            GraphModel::Er { p } => generate_er(n, p, seed),
            GraphModel::Ba { m } => generate_ba(n, m, seed),
            GraphModel::Sbm {
                blocks,
                p_in,
                p_out,
            } => generate_sbm(n, blocks, p_in, p_out, seed),
        }
    }
}

/// Selection scheme as named in configs and output rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    AOpt,
    DOpt,
    EOpt,
    WeightedRandom,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::AOpt => "A-opt",
            Scheme::DOpt => "D-opt",
            Scheme::EOpt => "E-opt",
            Scheme::WeightedRandom => "weighted-random",
        }
    }

    pub fn criterion(self, seed: u64) -> Criterion {
        match self {
            Scheme::AOpt => Criterion::AOpt,
            Scheme::DOpt => Criterion::DOpt,
            Scheme::EOpt => Criterion::EOpt,
            Scheme::WeightedRandom => Criterion::WeightedRandom { seed },
        }
    }

    pub fn is_greedy(self) -> bool {
        self != Scheme::WeightedRandom
    }
}

/// Inclusive range of sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSizeRange {
    pub start: usize,
    pub end: usize,
}

impl SampleSizeRange {
    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph_model: GraphModel,
    pub n_vertices: usize,
    #[serde(default = "default_instances")]
    pub n_graph_instances: usize,
    /// Defaults to `⌊N/10⌋`.
    #[serde(default)]
    pub bandwidth: Option<usize>,
    #[serde(default)]
    pub shift_kind: ShiftOperatorKind,
    pub schemes: Vec<Scheme>,
    pub snr_list: Vec<f64>,
    #[serde(default = "default_signals")]
    pub n_signals: usize,
    pub sample_size_range: SampleSizeRange,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_instances() -> usize {
    10
}

fn default_signals() -> usize {
    200
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn preset(name: &str) -> Result<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, s)| Self::from_json(s))
            .unwrap_or_else(|| Err(Error::Config(format!("unknown preset {name}"))))
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth.unwrap_or(self.n_vertices / 10)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vertices;
        let k = self.bandwidth();
        if n < 2 {
            return Err(Error::Config(format!(
                "n_vertices must be at least 2, got {n}"
            )));
        }
        if k == 0 || k > n {
            return Err(Error::Config(format!("bandwidth {k} must be in 1..={n}")));
        }
        if self.n_graph_instances == 0 {
            return Err(Error::Config("n_graph_instances must be positive".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("schemes must not be empty".into()));
        }
        let mut schemes = self.schemes.clone();
        schemes.sort();
        schemes.dedup();
        if schemes.len() != self.schemes.len() {
            return Err(Error::Config("schemes must not repeat".into()));
        }
        if self.snr_list.is_empty() {
            return Err(Error::Config("snr_list must not be empty".into()));
        }
        if let Some(bad) = self.snr_list.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Config(format!("SNR {bad} is not positive")));
        }
        if self.n_signals < 2 {
            return Err(Error::Config("n_signals must be at least 2".into()));
        }
        let r = self.sample_size_range;
        if r.start > r.end || r.end > n {
            return Err(Error::Config(format!(
                "sample_size_range {}..={} must be ordered and within 0..={n}",
                r.start, r.end
            )));
        }
        Ok(())
    }

    /// Graph seed for instance `i`.
    pub fn graph_seed(&self, instance: usize) -> u64 {
        derive_seed(self.seed, &[1, instance as u64])
    }

    /// Seed of the weighted random scheme on instance `i`.
    pub fn scheme_seed(&self, instance: usize) -> u64 {
        derive_seed(self.seed, &[2, instance as u64])
    }

    /// Seed of signal `j` for instance `i` at the `snr_index`-th SNR.
    pub fn signal_seed(&self, instance: usize, snr_index: usize, j: usize) -> u64 {
        derive_seed(self.seed, &[3, instance as u64, snr_index as u64, j as u64])
    }

    pub fn graph(&self, instance: usize) -> Result<Graph> {
        self.graph_model
            .generate(self.n_vertices, self.graph_seed(instance))
    }

    pub fn band(&self, g: &Graph) -> Result<BandBasis> {
        SpectralBasis::of_graph(g, self.shift_kind)?.band(self.bandwidth())
    }

    /// First 16 hex digits of the SHA-256 of the config's JSON form, with
    /// `output_dir` cleared so the hash names the computation only.
    pub fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.output_dir = PathBuf::new();
        let json = serde_json::to_string(&cfg).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }

    /// Key/value pairs written at the top of every output.
    pub fn metadata(&self) -> Vec<(&'static str, String)> {
        vec![
            ("config_hash", self.hash()),
            ("seed", self.seed.to_string()),
            ("shift_kind", self.shift_kind.name().to_string()),
            ("library_version", crate::VERSION.to_string()),
            ("n_vertices", self.n_vertices.to_string()),
            ("bandwidth", self.bandwidth().to_string()),
            (
                "interval",
                "5th/95th percentile of pooled per-signal values (per instance for analytic rows)"
                    .to_string(),
            ),
            (
                "weighted_random",
                "sequential draws without replacement".to_string(),
            ),
            (
                "empirical_scale",
                "k x squared error of unit-norm signals".to_string(),
            ),
        ]
    }
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a path of integers into a child seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// A noisy observation of a unit-norm bandlimited signal.
///
/// `x = U_k g / ‖U_k g‖` and `y = x + ε / (‖ε‖ √snr)` with standard normal
/// `g` and `ε`, so `‖x‖ = 1` and `‖y − x‖ = 1/√snr`.
pub fn generate_experiment_signal(
    b: &BandBasis,
    snr: f64,
    seed: u64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "SNR must be positive, got {snr}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DVector::<f64>::from_fn(b.k(), |_, _| StandardNormal.sample(&mut rng));
    let eps = DVector::<f64>::from_fn(b.n(), |_, _| StandardNormal.sample(&mut rng));
    let x_raw = b.u_k() * g;
    let x = &x_raw / x_raw.norm();
    let y = &x + &eps * (1.0 / (eps.norm() * snr.sqrt()));
    Ok((x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum MetricKind {
    AnalyticEmse,
    EmpiricalMse,
    Tau,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::AnalyticEmse => "analytic_emse",
            MetricKind::EmpiricalMse => "empirical_mse",
            MetricKind::Tau => "tau",
        }
    }
}

/// One output row. `instance == None` marks a row aggregated over instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub sample_size: usize,
    pub snr: Option<f64>,
    pub instance: Option<usize>,
    pub metric: MetricKind,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Standard error of an empirical mean; not written to CSV.
    pub std_error: Option<f64>,
}

/// Sorts rows by (scheme, snr, sample size, metric, instance), aggregate last.
pub fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.snr.unwrap_or(0.0).total_cmp(&b.snr.unwrap_or(0.0)))
            .then(a.sample_size.cmp(&b.sample_size))
            .then(a.metric.cmp(&b.metric))
            .then(
                a.instance
                    .unwrap_or(usize::MAX)
                    .cmp(&b.instance.unwrap_or(usize::MAX)),
            )
    });
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean and 90% band of a sample. The band is widened to include the mean.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let lo = quantile(&sorted, 0.05).min(mean);
    let hi = quantile(&sorted, 0.95).max(mean);
    (mean, lo, hi)
}
