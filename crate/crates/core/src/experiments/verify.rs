//! Batch check of the error-decomposition identities and threshold rules
//! on random instances of a config's graph model.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{derive_seed, ExperimentConfig, Scheme};
use crate::analysis::{
    expected_mse, monte_carlo_mse, noise_sensitivity, noiseless_error, noiseless_error_raw,
    removal_effect, sample_rank, verify_noiseless_optimal_prefix, NoiseModel,
};
use crate::error::Result;
use crate::reconstruction::ls_operator;
use crate::sampling::{gram, select, SampleSet};
use crate::spectral::BandBasis;

/// How a predicted improvement is read off the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    /// `SNR < τ`
    #[default]
    Strict,
    /// `SNR ≤ τ`. Wrong at the boundary; exists to check that the boundary
    /// check catches it.
    Inclusive,
}

impl ThresholdRule {
    pub fn predicts_improvement(self, snr: f64, tau: f64) -> bool {
        match self {
            ThresholdRule::Strict => snr < tau,
            ThresholdRule::Inclusive => snr <= tau,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub pairs_per_graph: usize,
    pub orderings_per_graph: usize,
    pub mc_cells: usize,
    pub mc_signals: usize,
    /// Cells that must agree within three standard errors.
    pub mc_required: usize,
    pub threshold_rule: ThresholdRule,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            pairs_per_graph: 100,
            orderings_per_graph: 20,
            mc_cells: 30,
            mc_signals: 10_000,
            mc_required: 28,
            threshold_rule: ThresholdRule::Strict,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckResult {
    pub passed: bool,
    pub count: usize,
    pub failures: usize,
    pub worst_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub metadata: BTreeMap<String, String>,
    pub checks: BTreeMap<String, CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.values().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    count: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn record(&mut self, ok: bool, residual: f64) {
        self.count += 1;
        if !ok {
            self.failures += 1;
        }
        if residual.is_nan() || residual > self.worst {
            self.worst = residual;
        }
    }

    fn merge(&mut self, other: &Tally) {
        self.count += other.count;
        self.failures += other.failures;
        if other.worst.is_nan() || other.worst > self.worst {
            self.worst = other.worst;
        }
    }
}

type Tallies = BTreeMap<&'static str, Tally>;

fn random_pair(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (SampleSet, usize) {
    let hi = if rng.random_bool(0.5) {
        n.min(2 * k)
    } else {
        n
    };
    let size = rng.random_range(1..=hi);
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    all.truncate(size);
    let v = all[rng.random_range(0..size)];
    (SampleSet::new(all, n).expect("distinct vertices"), v)
}

/// Improvement of dropping `v` from `s` at `snr`, from two independent
/// expected-MSE evaluations: `(E[MSE_S] − E[MSE_{S∖v}], scale)`.
fn mse_drop(b: &BandBasis, s: &SampleSet, v: usize, snr: f64) -> Result<(f64, f64)> {
    let nm = NoiseModel::for_basis(snr, b)?;
    let with = expected_mse(b, &ls_operator(b, s)?, &nm)?.expected_mse;
    let without = expected_mse(b, &ls_operator(b, &s.without(v)?)?, &nm)?.expected_mse;
    Ok((with - without, with.abs().max(without.abs()).max(1.0)))
}

fn pair_checks(
    b: &BandBasis,
    s: &SampleSet,
    v: usize,
    rng: &mut ChaCha8Rng,
    rule: ThresholdRule,
    t: &mut Tallies,
) -> Result<()> {
    let k = b.k() as f64;
    let reduced = s.without(v)?;
    let r_s = ls_operator(b, s)?;
    let r_v = ls_operator(b, &reduced)?;
    let rank_s = sample_rank(b, s)?;
    let rank_v = sample_rank(b, &reduced)?;
    let raw_s = noiseless_error_raw(b, &r_s)?;
    let raw_v = noiseless_error_raw(b, &r_v)?;

    let res = (raw_s - (k - rank_s as f64))
        .abs()
        .max((raw_v - (k - rank_v as f64)).abs());
    t.entry("noiseless_error_is_rank_deficit")
        .or_default()
        .record(res <= 1e-6, res);

    let d = raw_s - raw_v;
    let res = d.abs().min((d + 1.0).abs());
    t.entry("noiseless_change_in_zero_minus_one")
        .or_default()
        .record(res <= 1e-6, res);

    let eff = removal_effect(b, s, v)?;
    let ok = (eff.noiseless_change < -0.5) == (eff.sensitivity_change > 0.0);
    t.entry("noiseless_and_sensitivity_changes_opposite")
        .or_default()
        .record(ok, if ok { 0.0 } else { 1.0 });

    let mut eig: Vec<f64> = gram(b, s)?
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, c| c.total_cmp(a));
    let reciprocal: f64 = eig[..rank_s].iter().map(|l| 1.0 / l).sum();
    let sens = noise_sensitivity(&r_s);
    let res = (sens - reciprocal).abs() / sens.abs().max(f64::MIN_POSITIVE);
    t.entry("sensitivity_is_reciprocal_eigen_sum")
        .or_default()
        .record(res <= 1e-6 || (sens == 0.0 && reciprocal == 0.0), res);

    let snr = 10f64.powf(rng.random_range(-2.0..2.0));
    let nm = NoiseModel::for_basis(snr, b)?;
    let rep = expected_mse(b, &r_s, &nm)?;
    let recomposed = noiseless_error(b, &r_s)? + nm.sigma_sq() * noise_sensitivity(&r_s);
    let res = (rep.expected_mse - recomposed).abs();
    t.entry("expected_mse_decomposition")
        .or_default()
        .record(res <= 1e-10, res);

    let tau = eff.snr_threshold;
    let probes: &[f64] = if tau > 0.0 {
        &[0.5, 2.0]
    } else {
        &[0.01, 1.0, 100.0]
    };
    for &p in probes {
        let probe_snr = if tau > 0.0 { tau * p } else { p };
        let (drop, scale) = mse_drop(b, s, v, probe_snr)?;
        let actual = drop > 1e-9 * scale;
        let predicted = rule.predicts_improvement(probe_snr, tau);
        t.entry("threshold_decides_improvement")
            .or_default()
            .record(
                actual == predicted,
                if actual == predicted { 0.0 } else { drop.abs() },
            );
    }
    if tau > 0.0 {
        let (drop, scale) = mse_drop(b, s, v, tau)?;
        let actual = drop > 1e-9 * scale;
        let predicted = rule.predicts_improvement(tau, tau);
        t.entry("threshold_boundary_does_not_improve")
            .or_default()
            .record(actual == predicted && !actual, drop.abs());
    }
    Ok(())
}

fn greedy_checks(b: &BandBasis, scheme: Scheme, max_m: usize, t: &mut Tallies) -> Result<()> {
    let k = b.k();
    let ordering = select(b, scheme.criterion(0), max_m)?;
    let ok = verify_noiseless_optimal_prefix(b, &ordering)?;
    t.entry("greedy_prefix_is_uniqueness_set")
        .or_default()
        .record(ok, if ok { 0.0 } else { 1.0 });
    for m in 1..=max_m {
        let s = ordering.prefix(m);
        let vertices: &[usize] = if m <= k {
            s.vertices()
        } else {
            &s.vertices()[k..]
        };
        for &v in vertices {
            let tau = removal_effect(b, &s, v)?.snr_threshold;
            if m <= k {
                t.entry("greedy_first_k_thresholds_positive")
                    .or_default()
                    .record(tau > 0.0, (-tau).max(0.0));
            } else {
                t.entry("greedy_later_thresholds_nonpositive")
                    .or_default()
                    .record(tau <= 0.0, tau.max(0.0));
            }
        }
    }
    Ok(())
}

fn instance_checks(
    cfg: &ExperimentConfig,
    opts: &VerifyOptions,
    instance: usize,
) -> Result<Tallies> {
    let b = cfg.band(&cfg.graph(instance)?)?;
    let (n, k) = (b.n(), b.k());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[4, instance as u64]));
    let mut t = Tallies::new();

    for _ in 0..opts.pairs_per_graph {
        let (s, v) = random_pair(&mut rng, n, k);
        pair_checks(&b, &s, v, &mut rng, opts.threshold_rule, &mut t)?;
    }

    for _ in 0..opts.orderings_per_graph {
        let mut ordering: Vec<usize> = (0..n).collect();
        ordering.shuffle(&mut rng);
        let count = crate::analysis::improving_indices(&b, &ordering)?.len();
        t.entry("exactly_k_improving_indices")
            .or_default()
            .record(count == k, count.abs_diff(k) as f64);
    }

    let greedy: Vec<Scheme> = cfg
        .schemes
        .iter()
        .copied()
        .filter(|s| s.is_greedy())
        .collect();
    let greedy = if greedy.is_empty() {
        vec![Scheme::AOpt, Scheme::DOpt, Scheme::EOpt]
    } else {
        greedy
    };
    for scheme in greedy {
        greedy_checks(&b, scheme, n.min(3 * k), &mut t)?;
    }
    Ok(t)
}

fn monte_carlo_checks(cfg: &ExperimentConfig, opts: &VerifyOptions) -> Result<Tally> {
    let results: Vec<(bool, f64)> = (0..opts.mc_cells)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[5, c as u64]));
            let instance = c % cfg.n_graph_instances;
            let b = cfg.band(&cfg.graph(instance)?)?;
            let scheme = cfg.schemes[rng.random_range(0..cfg.schemes.len())];
            let m = rng.random_range(cfg.sample_size_range.iter());
            let snr = cfg.snr_list[rng.random_range(0..cfg.snr_list.len())];
            let s = select(&b, scheme.criterion(cfg.scheme_seed(instance)), m)?;
            let r = ls_operator(&b, &s)?;
            let nm = NoiseModel::for_basis(snr, &b)?;
            let analytic = expected_mse(&b, &r, &nm)?.expected_mse;
            let est = monte_carlo_mse(&b, &r, &nm, opts.mc_signals, rng.random())?;
            let z = if est.std_error > 0.0 {
                (est.mean - analytic).abs() / est.std_error
            } else if (est.mean - analytic).abs() <= 1e-10 * analytic.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            };
            Ok((z <= 3.0, z))
        })
        .collect::<Result<_>>()?;
    let mut tally = Tally::default();
    for (ok, z) in results {
        tally.record(ok, z);
    }
    Ok(tally)
}

/// Runs every check and reports per-check counts, failures and worst residuals.
///
/// Monte Carlo agreement is statistical: it passes when at least
/// `mc_required` of `mc_cells` cells land within three standard errors.
/// Every other check must hold without exception.
pub fn verify_theorems(cfg: &ExperimentConfig, opts: &VerifyOptions) -> Result<VerifyReport> {
    cfg.validate()?;
    let per_instance: Vec<Tallies> = (0..cfg.n_graph_instances)
        .into_par_iter()
        .map(|i| instance_checks(cfg, opts, i))
        .collect::<Result<_>>()?;
    let mut merged = Tallies::new();
    for t in &per_instance {
        for (name, tally) in t {
            merged.entry(name).or_default().merge(tally);
        }
    }

    let mut checks: BTreeMap<String, CheckResult> = merged
        .into_iter()
        .map(|(name, t)| {
            (
                name.to_string(),
                CheckResult {
                    passed: t.failures == 0,
                    count: t.count,
                    failures: t.failures,
                    worst_residual: t.worst,
                },
            )
        })
        .collect();
    if opts.mc_cells > 0 {
        let mc = monte_carlo_checks(cfg, opts)?;
        let agreeing = mc.count - mc.failures;
        checks.insert(
            "monte_carlo_agreement".to_string(),
            CheckResult {
                passed: agreeing >= opts.mc_required.min(mc.count),
                count: mc.count,
                failures: mc.failures,
                worst_residual: mc.worst,
            },
        );
    }
    let metadata = cfg
        .metadata()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    Ok(VerifyReport { metadata, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> VerifyOptions {
        VerifyOptions {
            pairs_per_graph: 20,
            orderings_per_graph: 3,
            mc_cells: 6,
            mc_signals: 2000,
            mc_required: 5,
            ..VerifyOptions::default()
        }
    }

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset("default").unwrap();
        cfg.n_graph_instances = 2;
        cfg
    }

    #[test]
    fn quick_run_passes() {
        let report = verify_theorems(&small_cfg(), &quick()).unwrap();
        for (name, c) in &report.checks {
            assert!(c.passed, "{name}: {c:?}");
            assert!(c.count > 0, "{name}");
        }
        assert!(report
            .checks
            .contains_key("threshold_boundary_does_not_improve"));
        assert!(report.checks.contains_key("monte_carlo_agreement"));
    }

    #[test]
    fn inclusive_threshold_is_caught_at_the_boundary() {
        let opts = VerifyOptions {
            threshold_rule: ThresholdRule::Inclusive,
            mc_cells: 0,
            ..quick()
        };
        let report = verify_theorems(&small_cfg(), &opts).unwrap();
        assert!(!report.passed());
        let boundary = &report.checks["threshold_boundary_does_not_improve"];
        assert!(!boundary.passed);
        assert_eq!(boundary.failures, boundary.count);
        assert!(report.checks["threshold_decides_improvement"].passed);
    }

    #[test]
    fn full_band_has_n_improving_indices() {
        let mut cfg = small_cfg();
        cfg.n_vertices = 12;
        cfg.bandwidth = Some(12);
        cfg.sample_size_range.end = 12;
        let opts = VerifyOptions {
            mc_cells: 0,
            ..quick()
        };
        let report = verify_theorems(&cfg, &opts).unwrap();
        let c = &report.checks["exactly_k_improving_indices"];
        assert!(c.passed && c.worst_residual == 0.0, "{c:?}");
    }
}
