//! Command-line front end for the RIS channel sounding toolkit.
//!
//! Subcommands cover the single pipeline stages (channel generation,
//! sounding, PDP computation, multipath identification, decay fitting,
//! clustering) and the batch drivers (`run-campaign`, `analyze-file`,
//! `report`).
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use rischan_core::campaign::{
    analyze_records, build_probe, run_campaign, sound_channel, summarize_dispersion, AnalysisParams,
};
use rischan_core::channel::{compose_channel, synth_sv, ChannelMode};
use rischan_core::clustering::{assign_rays, bubble_cluster, BubbleParams};
use rischan_core::config::CampaignConfig;
use rischan_core::decay::{
    fit_exponential, fit_power_law, normalize_and_pool, FitModel, FitTarget,
};
use rischan_core::io;
use rischan_core::pdp::{compute_pdp, identify_multipaths, StartMode};
use rischan_core::ris::{cascaded_vlos_gain, Geometry, RisCodebook};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rischan",
    version,
    about = "RIS channel sounding simulation and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one channel realization for a configured point/mode and
    /// write it as a single-snapshot CIR record plus ground truth.
    GenChannel(GenChannelArgs),
    /// Sound a stored channel record: M noisy snapshots, estimated CIRs.
    Sound(SoundArgs),
    /// Compute PDPs from a CIR snapshot file (one CSV per point/mode).
    Pdp(PdpArgs),
    /// Identify multipath components in a PDP CSV.
    Identify(IdentifyArgs),
    /// Fit the power-law and exponential decay models over PDP CSVs.
    FitDecay(FitDecayArgs),
    /// Cluster a PDP CSV with the bubbling search.
    Cluster(ClusterArgs),
    /// Aggregate a per-point dispersion table into per-mode means.
    Report(ReportArgs),
    /// Run the full synthetic campaign from a configuration file.
    RunCampaign(RunCampaignArgs),
    /// Run the analysis-only pipeline on a CIR snapshot file.
    AnalyzeFile(AnalyzeFileArgs),
    /// Export the 1-bit intelligent-reflection codebook for a point as a
    /// text bit grid.
    Codebook(CodebookArgs),
}

#[derive(Args)]
struct GenChannelArgs {
    /// Campaign configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Point id from the configuration.
    #[arg(long)]
    point: String,
    /// Channel mode.
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Override the panel configuration with a bit grid from a file
    /// (rows x cols of '0'/'1').
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Output CIR record file.
    #[arg(long)]
    out: PathBuf,
    /// Optional ground-truth dump.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
}

#[derive(Args)]
struct SoundArgs {
    #[arg(long)]
    config: PathBuf,
    /// Channel file written by gen-channel (first record is sounded).
    #[arg(long)]
    channel: PathBuf,
    /// Output snapshot file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PdpArgs {
    /// CIR snapshot file.
    #[arg(long, name = "cirs")]
    cirs: PathBuf,
    /// Output directory for PDP CSVs.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct IdentifyArgs {
    /// PDP CSV file.
    #[arg(long)]
    pdp: PathBuf,
    /// Enumeration start.
    #[arg(long, value_enum, default_value_t = StartModeArg::MaxPath)]
    start_mode: StartModeArg,
    /// Output multipath CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitDecayArgs {
    /// PDP CSV files to pool.
    #[arg(long, required = true, num_args = 1..)]
    pdp: Vec<PathBuf>,
    /// Fitting window in ns.
    #[arg(long, default_value_t = 300.0)]
    window_ns: f64,
    /// Fit the pooled cloud instead of the per-delay average curve.
    #[arg(long)]
    pooled: bool,
    /// Output report file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// PDP CSV file.
    #[arg(long)]
    pdp: PathBuf,
    /// Output cluster CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    t0_ns: f64,
    #[arg(long, default_value_t = 300.0)]
    t_dur_ns: f64,
    #[arg(long, default_value_t = 30.0)]
    t_dis_ns: f64,
    #[arg(long, default_value_t = 5.0)]
    p_dis_db: f64,
    #[arg(long, default_value_t = 1.0)]
    beta_offset_db: f64,
    #[arg(long, default_value_t = 5.0)]
    delta_tau_ns: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-point dispersion CSV (analysis/dispersion.csv).
    #[arg(long)]
    dispersion: PathBuf,
    /// Output summary CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunCampaignArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the report bundle.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AnalyzeFileArgs {
    #[arg(long)]
    config: PathBuf,
    /// CIR snapshot file.
    #[arg(long)]
    cirs: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CodebookArgs {
    #[arg(long)]
    config: PathBuf,
    /// Point id from the configuration.
    #[arg(long)]
    point: String,
    /// Output bit-grid file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    WithoutRis,
    Specular,
    IntelligentQuantized,
    IntelligentContinuous,
}

impl From<ModeArg> for ChannelMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::WithoutRis => ChannelMode::WithoutRis,
            ModeArg::Specular => ChannelMode::Specular,
            ModeArg::IntelligentQuantized => ChannelMode::IntelligentQuantized,
            ModeArg::IntelligentContinuous => ChannelMode::IntelligentContinuous,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StartModeArg {
    MaxPath,
    ZeroDelay,
}

impl From<StartModeArg> for StartMode {
    fn from(m: StartModeArg) -> Self {
        match m {
            StartModeArg::MaxPath => StartMode::MaxPath,
            StartModeArg::ZeroDelay => StartMode::ZeroDelay,
        }
    }
}

/// Failure category controlling the exit code.
enum Failure {
    Config(String),
    Data(String),
}

impl Failure {
    fn exit(self) -> ExitCode {
        match self {
            Failure::Config(msg) => {
                eprintln!("configuration error: {msg}");
                ExitCode::from(1)
            }
            Failure::Data(msg) => {
                eprintln!("data error: {msg}");
                ExitCode::from(2)
            }
        }
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

fn data_err<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

fn load_config(path: &Path) -> Result<CampaignConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    CampaignConfig::from_text(&text).map_err(config_err)
}

fn read_data(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_out(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(data_err)?;
        }
    }
    std::fs::write(path, contents).map_err(data_err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.exit(),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenChannel(args) => gen_channel(args),
        Command::Sound(args) => sound(args),
        Command::Pdp(args) => pdp(args),
        Command::Identify(args) => identify(args),
        Command::FitDecay(args) => fit_decay(args),
        Command::Cluster(args) => cluster(args),
        Command::Report(args) => report(args),
        Command::RunCampaign(args) => run_campaign_cmd(args),
        Command::AnalyzeFile(args) => analyze_file(args),
        Command::Codebook(args) => codebook(args),
    }
}

fn codebook(args: CodebookArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    let point = cfg
        .points
        .iter()
        .find(|p| p.id == args.point)
        .ok_or_else(|| Failure::Config(format!("unknown point id '{}'", args.point)))?;
    let geom = Geometry::new(cfg.tx, point.position, cfg.wavelength_m).map_err(config_err)?;
    let cb = RisCodebook::intelligent_quantized(&cfg.ris, &geom).map_err(config_err)?;
    let grid = cb.to_text_grid(&cfg.ris).map_err(config_err)?;
    write_out(&args.out, &grid)
}

fn gen_channel(args: GenChannelArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    let point = cfg
        .points
        .iter()
        .find(|p| p.id == args.point)
        .ok_or_else(|| Failure::Config(format!("unknown point id '{}'", args.point)))?;
    let mode: ChannelMode = args.mode.into();
    let sv_seed = rischan_core::util::derive_seed(cfg.master_seed, &[&point.id, "sv"]);
    let (background, truth) = synth_sv(&cfg.sv, sv_seed).map_err(config_err)?;
    let geom = Geometry::new(cfg.tx, point.position, cfg.wavelength_m).map_err(config_err)?;
    let codebook = match &args.codebook {
        Some(path) => {
            let grid = read_data(path)?;
            RisCodebook::from_text_grid(&grid).map_err(data_err)?
        }
        None => match mode {
            ChannelMode::WithoutRis => RisCodebook::WithoutRis,
            ChannelMode::Specular => RisCodebook::Specular,
            ChannelMode::IntelligentContinuous => RisCodebook::IntelligentContinuous,
            ChannelMode::IntelligentQuantized => {
                RisCodebook::intelligent_quantized(&cfg.ris, &geom).map_err(config_err)?
            }
        },
    };
    let vlos =
        cascaded_vlos_gain(&cfg.ris, &geom, &codebook, cfg.vlos_scale).map_err(config_err)?;
    let channel = compose_channel(&background, vlos, mode).map_err(config_err)?;
    let record = io::CirRecord {
        point_id: point.id.clone(),
        snapshot_index: 0,
        mode,
        cir: channel,
    };
    write_out(&args.out, &io::write_cir_records(&[record]))?;
    if let Some(gt_path) = args.ground_truth {
        write_out(&gt_path, &io::ground_truth_to_text(&truth))?;
    }
    Ok(())
}

fn sound(args: SoundArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    let text = read_data(&args.channel)?;
    let records = io::parse_cir_records(&text).map_err(data_err)?;
    let channel = &records[0];
    let probe = build_probe(&cfg).map_err(config_err)?;
    let snapshots = sound_channel(&cfg, &probe, &channel.cir, &channel.point_id, channel.mode)
        .map_err(data_err)?;
    let out: Vec<io::CirRecord> = snapshots
        .into_iter()
        .enumerate()
        .map(|(m, cir)| io::CirRecord {
            point_id: channel.point_id.clone(),
            snapshot_index: m,
            mode: channel.mode,
            cir,
        })
        .collect();
    write_out(&args.out, &io::write_cir_records(&out))
}

fn pdp(args: PdpArgs) -> Result<(), Failure> {
    let text = read_data(&args.cirs)?;
    let records = io::parse_cir_records(&text).map_err(data_err)?;
    let mut groups: Vec<(String, ChannelMode, Vec<rischan_core::Cir>)> = Vec::new();
    for r in &records {
        match groups
            .iter_mut()
            .find(|(p, m, _)| *p == r.point_id && *m == r.mode)
        {
            Some((_, _, v)) => v.push(r.cir.clone()),
            None => groups.push((r.point_id.clone(), r.mode, vec![r.cir.clone()])),
        }
    }
    for (point, mode, cirs) in &groups {
        let pdp = compute_pdp(cirs).map_err(data_err)?;
        let path = args.out_dir.join(format!("pdp_{point}_{mode}.csv"));
        write_out(&path, &io::pdp_to_csv(&pdp))?;
    }
    Ok(())
}

fn identify(args: IdentifyArgs) -> Result<(), Failure> {
    let text = read_data(&args.pdp)?;
    let pdp = io::parse_pdp_csv(&text, 1).map_err(data_err)?;
    let mp = identify_multipaths(&pdp, args.start_mode.into()).map_err(data_err)?;
    write_out(&args.out, &io::multipaths_to_csv(&mp))
}

fn fit_decay(args: FitDecayArgs) -> Result<(), Failure> {
    let mut pdps = Vec::new();
    for path in &args.pdp {
        let text = read_data(path)?;
        pdps.push(io::parse_pdp_csv(&text, 1).map_err(data_err)?);
    }
    let refs: Vec<&rischan_core::Pdp> = pdps.iter().collect();
    let cloud = normalize_and_pool(&refs, args.window_ns).map_err(data_err)?;
    let target = if args.pooled {
        FitTarget::PooledCloud
    } else {
        FitTarget::AveragedCurve
    };
    let pl = fit_power_law(&cloud, args.window_ns, target).map_err(data_err)?;
    let ex = fit_exponential(&cloud, args.window_ns, target).map_err(data_err)?;
    let (eta0, n_pdp) = match pl.model {
        FitModel::PowerLaw { eta0_db, n_pdp } => (eta0_db, n_pdp),
        _ => unreachable!(),
    };
    let inv_gamma = match ex.model {
        FitModel::Exponential { inv_gamma_per_ns } => inv_gamma_per_ns,
        _ => unreachable!(),
    };
    let mut out = String::from("model,eta0_db,n_pdp,inv_gamma_per_ns,rmse_db\n");
    out.push_str(&format!("power_law,{eta0},{n_pdp},,{}\n", pl.rmse_db));
    out.push_str(&format!("exponential,,,{inv_gamma},{}\n", ex.rmse_db));
    write_out(&args.out, &out)
}

fn cluster(args: ClusterArgs) -> Result<(), Failure> {
    let text = read_data(&args.pdp)?;
    let pdp = io::parse_pdp_csv(&text, 1).map_err(data_err)?;
    let params = BubbleParams {
        t0_ns: args.t0_ns,
        t_dur_ns: args.t_dur_ns,
        t_dis_ns: args.t_dis_ns,
        p_dis_db: args.p_dis_db,
        beta_offset_db: args.beta_offset_db,
        delta_tau_ns: args.delta_tau_ns,
    };
    let outcome = bubble_cluster(&pdp, &params).map_err(data_err)?;
    let cs = assign_rays(&outcome.starts, &outcome.rays).map_err(data_err)?;
    write_out(&args.out, &io::clusters_to_csv(&cs))
}

fn report(args: ReportArgs) -> Result<(), Failure> {
    let text = read_data(&args.dispersion)?;
    let summary = summarize_dispersion(&text).map_err(data_err)?;
    write_out(&args.out, &summary)
}

fn run_campaign_cmd(args: RunCampaignArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    let bundle = run_campaign(&cfg).map_err(data_err)?;
    bundle.write_to_dir(&args.out_dir).map_err(data_err)?;
    println!(
        "campaign complete: {} files under {}",
        bundle.files.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn analyze_file(args: AnalyzeFileArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    let text = read_data(&args.cirs)?;
    let records = io::parse_cir_records(&text).map_err(data_err)?;
    let bundle = analyze_records(&records, &AnalysisParams::from(&cfg)).map_err(data_err)?;
    bundle.write_to_dir(&args.out_dir).map_err(data_err)?;
    println!(
        "analysis complete: {} files under {}",
        bundle.files.len(),
        args.out_dir.display()
    );
    Ok(())
}
