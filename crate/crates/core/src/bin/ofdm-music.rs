use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ofdm_music::config::RunConfig;
use ofdm_music::detection::Routine;
use ofdm_music::harness::{calibrate_cfar, mix_seed, run_sweep, SweepSummary};
use ofdm_music::music::flop_estimate;
use ofdm_music::pipeline::estimate;
use ofdm_music::signal::{synthesize_csi, CsiMatrix, Target, TargetScene};
use ofdm_music::smoothing::{make_plan, SubarrayPlan};
use ofdm_music::{Error, Result};

const VERSION: &str = concat!("ofdm-music ", env!("CARGO_PKG_VERSION"));

#[derive(Parser)]
#[command(name = "ofdm-music", version, about = "Range and angle estimation from OFDM CSI")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all available cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Peak selection routine: off, single or multiple
    #[arg(long, global = true)]
    routine: Option<Routine>,
    /// SNR in dB for synthesized scenes
    #[arg(long = "snr-db", global = true, allow_negative_numbers = true)]
    snr_db: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate targets in a binary CSI file and print a JSON report.
    Estimate {
        /// CSI file: u32 K, u32 N, then K*N complex f64 pairs, little endian.
        csi: PathBuf,
    },
    /// Run the configured Monte Carlo sweep; writes sweep.csv and sweep.json.
    Sweep,
    /// Calibrate the CFAR scale on noise-only scenes; writes kappa.toml.
    Calibrate,
    /// Print sample counts and eigendecomposition cost of the configured plan.
    Complexity,
    /// Write a synthetic CSI file.
    Synthesize {
        /// Target as `range_m,azimuth_deg`; repeatable.
        #[arg(long = "target", required = true)]
        targets: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(routine) = cli.common.routine {
        cfg.routine = routine;
    }
    if let Some(snr) = cli.common.snr_db {
        cfg.snr_db = snr;
    }
    if let Some(out) = &cli.common.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Estimate { csi } => cmd_estimate(&cfg, &csi, cli.common.out.as_deref()),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Calibrate => cmd_calibrate(&cfg),
        Command::Complexity => cmd_complexity(&cfg),
        Command::Synthesize { targets } => cmd_synthesize(&cfg, &targets, cli.common.out.as_deref()),
    }
}

fn cmd_estimate(cfg: &RunConfig, csi_path: &Path, out: Option<&Path>) -> Result<()> {
    let (setup, _) = cfg.calibrated_setup()?;
    let bytes = fs::read(csi_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", csi_path.display())))?;
    let csi = CsiMatrix::from_bytes(&bytes, &setup.config)?;
    let est = estimate(&csi, &setup.plan, &setup.detector, setup.angle_limit_rad)?;
    let text = serde_json::to_string_pretty(&est.report.to_json())?;
    println!("{text}");
    if let Some(path) = out {
        fs::write(path, format!("{text}\n"))?;
    }
    if cfg.verbosity > 1 {
        eprintln!(
            "order estimate {}, {} detection(s)",
            est.subspaces.order_estimate,
            est.report.detections.len()
        );
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    let (setup, _) = cfg.calibrated_setup()?;
    let spec = cfg.scenario(&setup.config)?;
    let summary = run_sweep(&spec, &setup)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let csv = cfg.out_dir.join("sweep.csv");
    let mut w = BufWriter::new(fs::File::create(&csv)?);
    summary.write_csv(&mut w)?;
    w.flush()?;
    let sidecar = serde_json::json!({
        "version": VERSION,
        "seed": cfg.seed,
        "kappa": setup.detector.cfar_scale,
        "columns": SweepSummary::CSV_HEADER.split(',').collect::<Vec<_>>(),
        "config": serde_json::to_value(cfg)?,
    });
    fs::write(cfg.out_dir.join("sweep.json"), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    if cfg.verbosity > 0 {
        eprintln!("wrote {} ({} rows)", csv.display(), summary.x_axis.len());
    }
    Ok(())
}

fn cmd_calibrate(cfg: &RunConfig) -> Result<()> {
    let setup = cfg.setup()?;
    let cal = calibrate_cfar(&setup, cfg.calibration_trials, mix_seed(cfg.seed, 0, 3))?;
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("kappa.toml");
    let text = format!(
        "kappa = {:?}\np_FA = {:?}\ncalibration_trials = {}\nseed = {}\n",
        cal.scale, cal.p_fa, cal.n_trials, cfg.seed
    );
    fs::write(&path, text)?;
    println!("kappa = {:?}", cal.scale);
    if cfg.verbosity > 0 {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cost_row(name: &str, plan: &SubarrayPlan) -> (String, u64) {
    let m = plan.m() as u64;
    let flops = flop_estimate(m, 2.min(m.saturating_sub(1)));
    (format!("{name:<12} {:>6} {:>6} {:>18}", m, plan.l(), flops), flops)
}

fn cmd_complexity(cfg: &RunConfig) -> Result<()> {
    let config = cfg.radio()?;
    let plan = cfg.plan_for(&config)?;
    let mut full = plan.params;
    full.decim_f = 1;
    let comparator = make_plan(&config, full)?;
    let (row, flops) = cost_row("configured", &plan);
    let (row_full, flops_full) = cost_row("D_f = 1", &comparator);
    println!("{:<12} {:>6} {:>6} {:>18}", "plan", "M", "L", "flops (Q = 2)");
    println!("{row}");
    println!("{row_full}");
    println!("ratio {:.4e}", flops_full as f64 / flops as f64);
    Ok(())
}

fn parse_target(text: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("target '{text}' is not range_m,azimuth_deg"));
    let (r, a) = text.split_once(',').ok_or_else(bad)?;
    Ok((
        r.trim().parse().map_err(|_| bad())?,
        a.trim().parse().map_err(|_| bad())?,
    ))
}

fn cmd_synthesize(cfg: &RunConfig, targets: &[String], out: Option<&Path>) -> Result<()> {
    let out = out.ok_or_else(|| Error::Config("synthesize needs --out".to_string()))?;
    let config = cfg.radio()?;
    let targets = targets
        .iter()
        .enumerate()
        .map(|(q, t)| {
            let (r, a) = parse_target(t)?;
            let coeff = ofdm_music::signal::scene_coefficient(r, ofdm_music::harness::mix_seed(cfg.seed, q as u64, 2))?;
            Target::new(r, a.to_radians(), coeff)
        })
        .collect::<Result<Vec<_>>>()?;
    let sigma2 = ofdm_music::harness::noise_variance_for_snr(&config, &targets, cfg.snr_db)?;
    let csi = synthesize_csi(&config, &TargetScene::new(targets, sigma2)?, cfg.seed)?;
    let mut w = BufWriter::new(fs::File::create(out)?);
    csi.write_binary(&mut w)?;
    w.flush()?;
    Ok(())
}
