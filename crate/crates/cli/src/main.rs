use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bandsample::experiments::{
    run_mse_sweep, run_tau_sweep, verify_theorems, write_csv, write_svg, ExperimentConfig,
    MetricKind, VerifyOptions,
};
use bandsample::spectral::cache::write_basis;
use bandsample::SpectralBasis;
use clap::{Args, Parser, Subcommand};

const CONFIG_HELP: &str = "\
Config file (JSON, unknown keys rejected):
  graph_model         {\"er\": {\"p\": ..}} | {\"ba\": {\"m\": ..}} | {\"sbm\": {\"blocks\": .., \"p_in\": .., \"p_out\": ..}}
                      (sbm blocks defaults to 10)
  n_vertices          number of vertices N (>= 2)
  n_graph_instances   independent graph draws (default 10)
  bandwidth           k, number of low-frequency eigenvectors (default floor(N/10), at least 1)
  shift_kind          \"combinatorial\" (default) | \"normalized\"
  schemes             non-empty list of \"a_opt\", \"d_opt\", \"e_opt\", \"weighted_random\"
  snr_list            positive SNR values
  n_signals           signals per (instance, SNR) cell (default 200, at least 2)
  sample_size_range   {\"start\": m0, \"end\": m1}, inclusive, m1 <= N
  seed                base seed; every random stream is derived from it
  output_dir          directory for CSV/SVG/JSON outputs (default \"out\")

Bundled presets: default (N=30, k=5), small, desk (N=100, k=10), paper_scale (N=1000).
Set GSL_THREADS to fix the worker pool size.";

#[derive(Parser)]
#[command(name = "bandsample", version, about = "Sampling-size sweeps and threshold checks for bandlimited graph signals", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic and empirical least-squares MSE against sample size.
    #[command(after_long_help = CONFIG_HELP)]
    MseSweep(ConfigArgs),
    /// SNR threshold of the last-added vertex along each selection order.
    #[command(after_long_help = CONFIG_HELP)]
    TauSweep(ConfigArgs),
    /// Check the error identities and threshold rules on random instances.
    #[command(after_long_help = CONFIG_HELP)]
    Verify {
        #[command(flatten)]
        config: ConfigArgs,
        /// Random (S, v) pairs per graph.
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        /// Random full orderings per graph.
        #[arg(long, default_value_t = 20)]
        orderings: usize,
        /// Monte Carlo cells.
        #[arg(long, default_value_t = 30)]
        mc_cells: usize,
        /// Signals per Monte Carlo cell.
        #[arg(long, default_value_t = 10_000)]
        mc_signals: usize,
    },
    /// Write one graph instance as JSON, optionally with its cached eigenbasis.
    #[command(after_long_help = CONFIG_HELP)]
    GenGraph {
        #[command(flatten)]
        config: ConfigArgs,
        /// Instance index.
        #[arg(long, default_value_t = 0)]
        instance: usize,
        /// Also cache this many leading eigenvectors (0 = none).
        #[arg(long, default_value_t = 0)]
        cache_basis: usize,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Config JSON file; overrides --preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled preset name.
    #[arg(long, default_value = "default")]
    preset: String,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the SNR list (comma separated or repeated).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    snr: Option<Vec<f64>>,
    /// Override the number of vertices.
    #[arg(long)]
    n: Option<usize>,
    /// Override the bandwidth k.
    #[arg(long)]
    bandwidth: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => ExperimentConfig::preset(&self.preset)?,
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(snr) = &self.snr {
            cfg.snr_list = snr.clone();
        }
        if let Some(n) = self.n {
            cfg.n_vertices = n;
            cfg.sample_size_range.end = cfg.sample_size_range.end.min(n);
        }
        if let Some(k) = self.bandwidth {
            cfg.bandwidth = Some(k);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn snr_tag(snr: f64) -> String {
    format!("{snr:e}").replace('.', "p")
}

fn mse_sweep(cfg: &ExperimentConfig) -> Result<()> {
    let rows = run_mse_sweep(cfg)?;
    let dir = &cfg.output_dir;
    let csv = dir.join("mse_sweep.csv");
    write_csv(&csv, cfg, &rows)?;
    for &snr in &cfg.snr_list {
        for metric in [MetricKind::AnalyticEmse, MetricKind::EmpiricalMse] {
            let path = dir.join(format!("mse_{}_snr_{}.svg", metric.name(), snr_tag(snr)));
            let title = format!("{} vs sample size, SNR = {snr}", metric.name());
            write_svg(&path, cfg, &rows, metric, Some(snr), &title)?;
        }
    }
    println!("{}", csv.display());
    Ok(())
}

fn tau_sweep(cfg: &ExperimentConfig) -> Result<()> {
    let rows = run_tau_sweep(cfg)?;
    let dir = &cfg.output_dir;
    let csv = dir.join("tau_sweep.csv");
    write_csv(&csv, cfg, &rows)?;
    write_svg(
        &dir.join("tau_sweep.svg"),
        cfg,
        &rows,
        MetricKind::Tau,
        None,
        "SNR threshold vs sample index",
    )?;
    println!("{}", csv.display());
    Ok(())
}

fn verify(cfg: &ExperimentConfig, opts: &VerifyOptions) -> Result<bool> {
    let report = verify_theorems(cfg, opts)?;
    let path = cfg.output_dir.join("verify_report.json");
    write_text(&path, &report.to_json()?)?;
    for (name, c) in &report.checks {
        println!(
            "{} {name}: {} checked, {} failed, worst residual {:e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.count,
            c.failures,
            c.worst_residual
        );
    }
    println!("{}", path.display());
    Ok(report.passed())
}

fn gen_graph(cfg: &ExperimentConfig, instance: usize, cache_basis: usize) -> Result<()> {
    if instance >= cfg.n_graph_instances {
        bail!(
            "instance {instance} out of range for {} instances",
            cfg.n_graph_instances
        );
    }
    let g = cfg.graph(instance)?;
    let dir = &cfg.output_dir;
    let path = dir.join(format!("graph_{instance}.json"));
    write_text(&path, &g.to_json()?)?;
    let mut meta: serde_json::Map<String, serde_json::Value> = cfg
        .metadata()
        .into_iter()
        .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
        .collect();
    meta.insert("instance".into(), instance.into());
    meta.insert(
        "graph_seed".into(),
        cfg.graph_seed(instance).to_string().into(),
    );
    write_text(
        &dir.join(format!("graph_{instance}.meta.json")),
        &serde_json::to_string_pretty(&meta)?,
    )?;
    if cache_basis > 0 {
        let basis = SpectralBasis::of_graph(&g, cfg.shift_kind)?;
        write_basis(
            &dir.join(format!("graph_{instance}.basis")),
            &g,
            &basis,
            cache_basis.min(g.n_vertices()),
        )?;
    }
    println!("{}", path.display());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn init_pool() -> Result<()> {
    if let Ok(v) = std::env::var("GSL_THREADS") {
        let threads: usize = v
            .trim()
            .parse()
            .with_context(|| format!("GSL_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    init_pool()?;
    match cli.command {
        Command::MseSweep(args) => mse_sweep(&args.resolve()?).map(|_| true),
        Command::TauSweep(args) => tau_sweep(&args.resolve()?).map(|_| true),
        Command::Verify {
            config,
            pairs,
            orderings,
            mc_cells,
            mc_signals,
        } => {
            let opts = VerifyOptions {
                pairs_per_graph: pairs,
                orderings_per_graph: orderings,
                mc_cells,
                mc_signals,
                mc_required: (mc_cells * 28).div_ceil(30),
                ..VerifyOptions::default()
            };
            verify(&config.resolve()?, &opts)
        }
        Command::GenGraph {
            config,
            instance,
            cache_basis,
        } => gen_graph(&config.resolve()?, instance, cache_basis).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
