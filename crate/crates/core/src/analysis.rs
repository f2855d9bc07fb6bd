//! Exact expected reconstruction error and the effect of dropping a sample.
//!
//! For a linear operator `R_S` and the signal model `x ~ N(0, U_k U_kᵀ)`,
//! `y = x + σε`, the expected squared error is
//!
//! ```text
//! E[MSE_S] = ‖U_k − R_S M_S U_k‖²_F + σ² ‖R_S‖²_F
//!          =   noiseless error      + σ² · noise sensitivity
//! ```
//!
//! Under least squares the noiseless error is `k − rank(M_S U_k)`, so dropping
//! a vertex changes it by 0 or −1, and the noise sensitivity moves the other
//! way. Dropping `v` lowers the expected error iff `SNR < (k/N)·Δsensitivity`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::reconstruction::{ls_operator, Method, ReconstructionOperator};
use crate::sampling::{restrict_rows, SampleSet};
use crate::spectral::BandBasis;

/// Least-squares noiseless error must be this close to an integer.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-6;

/// Sensitivity changes smaller than this, relative to the larger of the two
/// sensitivities involved, are treated as exactly zero.
pub const SENSITIVITY_ZERO_TOLERANCE: f64 = 1e-9;

/// White observation noise at a given SNR (ratio form).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    snr: f64,
    k: usize,
    n: usize,
}

impl NoiseModel {
    pub fn new(snr: f64, k: usize, n: usize) -> Result<Self> {
        if !(snr.is_finite() && snr > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "SNR must be positive, got {snr}"
            )));
        }
        if k == 0 || k > n {
            return Err(Error::BandwidthOutOfRange { k, n });
        }
        Ok(NoiseModel { snr, k, n })
    }

    pub fn for_basis(snr: f64, b: &BandBasis) -> Result<Self> {
        Self::new(snr, b.k(), b.n())
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// `σ² = k / (N · SNR)`.
    pub fn sigma_sq(&self) -> f64 {
        self.k as f64 / (self.n as f64 * self.snr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseReport {
    pub noiseless_error: f64,
    pub noise_sensitivity: f64,
    pub sigma_sq: f64,
    pub expected_mse: f64,
    pub method: &'static str,
}

fn check_operator(b: &BandBasis, r: &ReconstructionOperator) -> Result<()> {
    if r.n() != b.n() {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} rows, basis has {} vertices",
            r.n(),
            b.n()
        )));
    }
    Ok(())
}

/// `‖U_k − R M_S U_k‖²_F` without any rounding.
pub fn noiseless_error_raw(b: &BandBasis, r: &ReconstructionOperator) -> Result<f64> {
    check_operator(b, r)?;
    let sampled = restrict_rows(b.u_k(), r.sample_set())?;
    Ok((b.u_k() - r.matrix() * sampled).norm_squared())
}

/// Noiseless reconstruction error.
///
/// For least squares the value is snapped to the nearest integer, and an
/// error is returned if it is further than [`INTEGRALITY_TOLERANCE`] from one.
pub fn noiseless_error(b: &BandBasis, r: &ReconstructionOperator) -> Result<f64> {
    let raw = noiseless_error_raw(b, r)?;
    match r.method() {
        Method::LeastSquares { .. } => {
            let rounded = raw.round();
            if (raw - rounded).abs() > INTEGRALITY_TOLERANCE {
                return Err(Error::Tolerance(format!(
                    "least-squares noiseless error {raw} is not integral"
                )));
            }
            Ok(rounded)
        }
        Method::Regularized { .. } => Ok(raw),
    }
}

/// Noise sensitivity `‖R‖²_F`.
pub fn noise_sensitivity(r: &ReconstructionOperator) -> f64 {
    r.matrix().norm_squared()
}

/// `E[MSE] = noiseless + σ²·sensitivity` for any linear operator.
pub fn expected_mse(
    b: &BandBasis,
    r: &ReconstructionOperator,
    nm: &NoiseModel,
) -> Result<MseReport> {
    if nm.k != b.k() || nm.n != b.n() {
        return Err(Error::DimensionMismatch(format!(
            "noise model (k={}, n={}) does not match basis (k={}, n={})",
            nm.k,
            nm.n,
            b.k(),
            b.n()
        )));
    }
    let noiseless = noiseless_error(b, r)?;
    let sensitivity = noise_sensitivity(r);
    let sigma_sq = nm.sigma_sq();
    Ok(MseReport {
        noiseless_error: noiseless,
        noise_sensitivity: sensitivity,
        sigma_sq,
        expected_mse: noiseless + sigma_sq * sensitivity,
        method: r.method().name(),
    })
}

/// Least-squares expected MSE of a sample set, built from scratch.
pub fn ls_expected_mse(b: &BandBasis, s: &SampleSet, snr: f64) -> Result<MseReport> {
    let r = ls_operator(b, s)?;
    expected_mse(b, &r, &NoiseModel::for_basis(snr, b)?)
}

/// What happens to the least-squares error terms when one vertex is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemovalEffect {
    pub vertex: usize,
    /// Noiseless error of `S` minus that of `S∖{v}`; 0 or −1.
    pub noiseless_change: f64,
    /// Noise sensitivity of `S` minus that of `S∖{v}`.
    pub sensitivity_change: f64,
    /// `(k/N) · sensitivity_change`: dropping `v` helps iff `SNR` is below it.
    pub snr_threshold: f64,
}

impl RemovalEffect {
    /// `E[MSE_S] − E[MSE_{S∖v}]` at noise level `σ²`.
    pub fn mse_change(&self, sigma_sq: f64) -> f64 {
        self.noiseless_change + sigma_sq * self.sensitivity_change
    }

    /// Whether dropping the vertex lowers the expected error at this SNR.
    /// The boundary `SNR = threshold` does not count as an improvement.
    pub fn improves_at(&self, snr: f64) -> bool {
        snr < self.snr_threshold
    }
}

fn sensitivity_change(with: f64, without: f64) -> f64 {
    let change = with - without;
    if change.abs() <= SENSITIVITY_ZERO_TOLERANCE * with.abs().max(without.abs()) {
        0.0
    } else {
        change
    }
}

/// Removal effect of `v ∈ S` under least squares, from two full evaluations.
pub fn removal_effect(b: &BandBasis, s: &SampleSet, v: usize) -> Result<RemovalEffect> {
    let reduced = s.without(v)?;
    let with = ls_operator(b, s)?;
    let without = ls_operator(b, &reduced)?;
    let noiseless_change = noiseless_error(b, &with)? - noiseless_error(b, &without)?;
    let sens = sensitivity_change(noise_sensitivity(&with), noise_sensitivity(&without));
    Ok(RemovalEffect {
        vertex: v,
        noiseless_change,
        sensitivity_change: sens,
        snr_threshold: b.k() as f64 / b.n() as f64 * sens,
    })
}

/// `τ(S_i, v_i)` for every prefix `S_i` of a sequence of distinct vertices.
///
/// Entry `i − 1` is the threshold for dropping the `i`-th vertex from the
/// first `i`.
pub fn snr_threshold_trace(b: &BandBasis, ordering: &[usize]) -> Result<Vec<f64>> {
    let s = SampleSet::new(ordering.to_vec(), b.n())?;
    let scale = b.k() as f64 / b.n() as f64;
    let sensitivities: Vec<f64> = (0..=s.len())
        .into_par_iter()
        .map(|i| Ok(noise_sensitivity(&ls_operator(b, &s.prefix(i))?)))
        .collect::<Result<_>>()?;
    Ok(sensitivities
        .windows(2)
        .map(|w| scale * sensitivity_change(w[1], w[0]))
        .collect())
}

/// 1-based positions `i` in a full vertex ordering where dropping the `i`-th
/// vertex from the first `i` helps at some SNR. There are always exactly `k`.
pub fn improving_indices(b: &BandBasis, ordering: &[usize]) -> Result<Vec<usize>> {
    let n = b.n();
    SampleSet::new(ordering.to_vec(), n)?;
    if ordering.len() != n {
        return Err(Error::NotAPermutation(n));
    }
    Ok(snr_threshold_trace(b, ordering)?
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0.0)
        .map(|(i, _)| i + 1)
        .collect())
}

/// True iff every prefix of length `m ≤ min(|S|, k)` has linearly independent
/// rows in `U_k`, i.e. the first `k` samples form a uniqueness set whenever
/// there are at least `k` of them.
pub fn verify_noiseless_optimal_prefix(b: &BandBasis, s: &SampleSet) -> Result<bool> {
    let limit = s.len().min(b.k());
    for m in 1..=limit {
        let rows = restrict_rows(b.u_k(), &s.prefix(m))?;
        if b.tolerance().rank(&rows)? != m {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `rank(M_S U_k)` under the basis' tolerance.
pub fn sample_rank(b: &BandBasis, s: &SampleSet) -> Result<usize> {
    b.tolerance().rank(&restrict_rows(b.u_k(), s)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_signals: usize,
}

impl MonteCarloEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MonteCarloEstimate {
            mean,
            std_error: (var / n).sqrt(),
            n_signals: samples.len(),
        }
    }

    /// `|mean − target| ≤ z · std_error`.
    pub fn agrees_with(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.std_error
    }
}

/// Empirical mean squared error under the model `x = U_k g`, `y = x + σε`
/// with standard normal `g` and `ε`.
///
/// Draw `j` uses stream `j` of a ChaCha generator keyed by `seed`, so the
/// result does not depend on how draws are spread over threads.
pub fn monte_carlo_mse(
    b: &BandBasis,
    r: &ReconstructionOperator,
    nm: &NoiseModel,
    n_signals: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_operator(b, r)?;
    if n_signals < 2 {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo needs at least 2 signals, got {n_signals}"
        )));
    }
    let sigma = nm.sigma_sq().sqrt();
    let (n, k) = (b.n(), b.k());
    let sampled: Vec<usize> = r.sample_set().vertices().to_vec();
    let errors: Vec<f64> = (0..n_signals)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let g = DVector::<f64>::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
            let noise = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let x = b.u_k() * g;
            let observed = DVector::from_iterator(
                sampled.len(),
                sampled.iter().map(|&v| x[v] + sigma * noise[v]),
            );
            (&x - r.matrix() * observed).norm_squared()
        })
        .collect();
    Ok(MonteCarloEstimate::from_samples(&errors))
}
