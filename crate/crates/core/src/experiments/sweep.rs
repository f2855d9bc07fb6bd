//! Expected-MSE and SNR-threshold sweeps over sample size.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;

use super::{
    generate_experiment_signal, sort_rows, summarize, ExperimentConfig, MetricKind, Scheme,
    SweepRow,
};
use crate::analysis::{expected_mse, snr_threshold_trace, MonteCarloEstimate, NoiseModel};
use crate::error::Result;
use crate::reconstruction::{ls_operator, reconstruct, Observation};
use crate::sampling::select;

/// Per-instance result of one (scheme, sample size, SNR index) cell.
struct Cell {
    analytic: f64,
    errors: Vec<f64>,
}

type CellKey = (Scheme, usize, usize);

fn mse_instance(cfg: &ExperimentConfig, instance: usize) -> Result<BTreeMap<CellKey, Cell>> {
    let g = cfg.graph(instance)?;
    let b = cfg.band(&g)?;
    let k = b.k() as f64;
    let range = cfg.sample_size_range;

    // The same signals are reused for every scheme and sample size.
    let signals: Vec<Vec<(DVector<f64>, DVector<f64>)>> = cfg
        .snr_list
        .iter()
        .enumerate()
        .map(|(si, &snr)| {
            (0..cfg.n_signals)
                .map(|j| generate_experiment_signal(&b, snr, cfg.signal_seed(instance, si, j)))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let noise: Vec<NoiseModel> = cfg
        .snr_list
        .iter()
        .map(|&snr| NoiseModel::for_basis(snr, &b))
        .collect::<Result<_>>()?;

    let mut cells = BTreeMap::new();
    for &scheme in &cfg.schemes {
        let ordering = select(&b, scheme.criterion(cfg.scheme_seed(instance)), range.end)?;
        for m in range.iter() {
            let s = ordering.prefix(m);
            let r = ls_operator(&b, &s)?;
            for (si, nm) in noise.iter().enumerate() {
                let analytic = expected_mse(&b, &r, nm)?.expected_mse;
                let errors = signals[si]
                    .iter()
                    .map(|(x, y)| {
                        let estimate = reconstruct(&r, &Observation::sample(y, &s)?)?;
                        Ok(k * (x - estimate).norm_squared())
                    })
                    .collect::<Result<Vec<f64>>>()?;
                cells.insert((scheme, m, si), Cell { analytic, errors });
            }
        }
    }
    Ok(cells)
}

/// Analytic and empirical least-squares MSE for every (instance, scheme,
/// sample size, SNR).
///
/// Empirical values are `k · ‖x − x̂‖²` for unit-norm signals, which has the
/// analytic expected MSE as its expectation. Per-instance rows carry the
/// 5th/95th percentiles over signals; aggregate rows (`instance = None`) pool
/// all signals of all instances for the empirical metric and use the
/// per-instance values for the analytic one.
pub fn run_mse_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let per_instance: Vec<BTreeMap<CellKey, Cell>> = (0..cfg.n_graph_instances)
        .into_par_iter()
        .map(|i| mse_instance(cfg, i))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &(scheme, m, si) in per_instance[0].keys() {
        let snr = Some(cfg.snr_list[si]);
        let mut analytic = Vec::with_capacity(per_instance.len());
        let mut pooled = Vec::new();
        for (i, cells) in per_instance.iter().enumerate() {
            let cell = &cells[&(scheme, m, si)];
            analytic.push(cell.analytic);
            pooled.extend_from_slice(&cell.errors);
            rows.push(SweepRow {
                scheme,
                sample_size: m,
                snr,
                instance: Some(i),
                metric: MetricKind::AnalyticEmse,
                value: cell.analytic,
                ci_low: cell.analytic,
                ci_high: cell.analytic,
                std_error: None,
            });
            let (mean, lo, hi) = summarize(&cell.errors);
            rows.push(SweepRow {
                scheme,
                sample_size: m,
                snr,
                instance: Some(i),
                metric: MetricKind::EmpiricalMse,
                value: mean,
                ci_low: lo,
                ci_high: hi,
                std_error: Some(MonteCarloEstimate::from_samples(&cell.errors).std_error),
            });
        }
        let (mean, lo, hi) = summarize(&analytic);
        rows.push(SweepRow {
            scheme,
            sample_size: m,
            snr,
            instance: None,
            metric: MetricKind::AnalyticEmse,
            value: mean,
            ci_low: lo,
            ci_high: hi,
            std_error: None,
        });
        let (mean, lo, hi) = summarize(&pooled);
        rows.push(SweepRow {
            scheme,
            sample_size: m,
            snr,
            instance: None,
            metric: MetricKind::EmpiricalMse,
            value: mean,
            ci_low: lo,
            ci_high: hi,
            std_error: Some(MonteCarloEstimate::from_samples(&pooled).std_error),
        });
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// `τ(S_i, v_i)` along each scheme's selection order, for `i` in the
/// configured range (`i = 0` has no vertex to drop and is skipped).
pub fn run_tau_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let range = cfg.sample_size_range;
    let traces: Vec<BTreeMap<Scheme, Vec<f64>>> = (0..cfg.n_graph_instances)
        .into_par_iter()
        .map(|i| {
            let b = cfg.band(&cfg.graph(i)?)?;
            cfg.schemes
                .iter()
                .map(|&scheme| {
                    let ordering = select(&b, scheme.criterion(cfg.scheme_seed(i)), range.end)?;
                    Ok((scheme, snr_threshold_trace(&b, ordering.vertices())?))
                })
                .collect::<Result<BTreeMap<_, _>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        for idx in range.iter().filter(|&i| i >= 1) {
            let values: Vec<f64> = traces.iter().map(|t| t[&scheme][idx - 1]).collect();
            for (i, &v) in values.iter().enumerate() {
                rows.push(SweepRow {
                    scheme,
                    sample_size: idx,
                    snr: None,
                    instance: Some(i),
                    metric: MetricKind::Tau,
                    value: v,
                    ci_low: v,
                    ci_high: v,
                    std_error: None,
                });
            }
            let (mean, lo, hi) = summarize(&values);
            rows.push(SweepRow {
                scheme,
                sample_size: idx,
                snr: None,
                instance: None,
                metric: MetricKind::Tau,
                value: mean,
                ci_low: lo,
                ci_high: hi,
                std_error: None,
            });
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}
