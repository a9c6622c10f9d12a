//! Campaign orchestration: synthesize, sound, analyze and report.
//!
//! For every `(point, mode)` pair the pipeline synthesizes the cluster
//! background (one realization per point, shared across modes), adds the
//! mode's VLoS tap, sounds the channel for the configured number of
//! snapshots, and stores the estimated CIRs. The analysis stage computes
//! PDPs, identifies multipaths, extracts dispersion parameters, clusters
//! the masked PDPs and aggregates per-mode reports.
//!
//! Seeds derive deterministically from the master seed and the
//! `(point id, mode, snapshot index)` labels, so results are independent
//! of execution order; aggregation is an ordered reduction over the
//! configured point list. Report bundles are byte-identical across runs
//! with the same configuration.

use crate::channel::{compose_channel, synth_sv, ChannelMode, Cir};
use crate::clustering::{
    cluster_identified, fit_cluster_decay, inter_cluster_stats, intra_cluster_stats,
    lognormal_rms_params, ClusterSet, DecayTarget,
};
use crate::config::CampaignConfig;
use crate::decay::{fit_exponential, fit_power_law, normalize_and_pool, FitModel, FitTarget};
use crate::error::{Error, Result};
use crate::io::{self, CirRecord};
use crate::pdp::{
    compute_pdp, fit_cdf_gaussian, identify_multipaths, k_factor, DispersionReport,
    KFactorEstimate, MultipathSet, Pdp, StartMode,
};
use crate::ris::{cascaded_vlos_gain, Geometry, RisCodebook};
use crate::signalgen::{
    bpsk_map, chip_waveform, default_taps, generate_mseq, shape_pulse_periodic, ComplexSignal,
};
use crate::sounder::{estimate_cir, propagate};
use crate::util::{db_to_lin, derive_seed};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Deterministic set of output files (relative path -> contents).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportBundle {
    pub files: BTreeMap<String, String>,
}

impl ReportBundle {
    /// Write every file below `dir`, creating subdirectories as needed.
    pub fn write_to_dir(&self, dir: &std::path::Path) -> Result<()> {
        for (rel, contents) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, contents)?;
        }
        Ok(())
    }

    /// Files under the `analysis/` prefix (the part reproducible from a
    /// CIR snapshot dump alone).
    pub fn analysis_files(&self) -> BTreeMap<String, String> {
        self.files
            .iter()
            .filter(|(k, _)| k.starts_with("analysis/"))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

/// Snapshots of one `(point, mode)` measurement.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub point_id: String,
    pub mode: ChannelMode,
    pub snapshots: Vec<Cir>,
}

/// Analysis knobs shared by in-process and file-based runs.
#[derive(Debug, Clone)]
pub struct AnalysisParams {
    pub bubble: crate::clustering::BubbleParams,
    pub analysis_window_ns: f64,
    pub k_factor_sub_bands: usize,
}

impl From<&CampaignConfig> for AnalysisParams {
    fn from(cfg: &CampaignConfig) -> Self {
        Self {
            bubble: cfg.bubble.clone(),
            analysis_window_ns: cfg.analysis_window_ns,
            k_factor_sub_bands: cfg.k_factor_sub_bands,
        }
    }
}

/// One probe period at the configured transmit power: a chip waveform
/// for `samples_per_symbol = 1`, a periodically shaped pulse train
/// otherwise.
pub fn build_probe(cfg: &CampaignConfig) -> Result<ComplexSignal> {
    let degree = cfg.probe.mseq_degree;
    let taps = default_taps(degree)
        .ok_or_else(|| Error::InvalidParam(format!("no default taps for degree {degree}")))?;
    let mut seed = vec![0u8; degree as usize];
    seed[0] = 1;
    let seq = generate_mseq(degree, taps, &seed)?;
    let symbols = bpsk_map(&seq);
    let period = if cfg.probe.samples_per_symbol == 1 {
        chip_waveform(&symbols, cfg.probe.sample_interval())?
    } else {
        let shape = cfg.probe.pulse_shape()?;
        shape_pulse_periodic(&symbols, &shape, cfg.probe.sample_interval())?
    };
    let target = db_to_lin(cfg.sounder.transmit_power_dbm);
    let scale = (target / period.mean_power()).sqrt();
    Ok(period.scaled(scale))
}

/// Sound one composed channel: M snapshots, estimated and truncated to
/// the storage window.
pub fn sound_channel(
    cfg: &CampaignConfig,
    probe: &ComplexSignal,
    channel: &Cir,
    point_id: &str,
    mode: ChannelMode,
) -> Result<Vec<Cir>> {
    let mut snapshots = Vec::with_capacity(cfg.sounder.snapshots);
    for m in 0..cfg.sounder.snapshots {
        let seed = derive_seed(cfg.master_seed, &[point_id, mode.as_str(), &m.to_string()]);
        let received = propagate(probe, channel, cfg.sounder.noise_power_dbm, seed)?;
        let estimated = estimate_cir(&received, probe)?;
        snapshots.push(estimated.truncated(cfg.storage_bins));
    }
    Ok(snapshots)
}

/// Run the full synthetic campaign.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    let probe = build_probe(cfg)?;

    let mut bundle = ReportBundle::default();
    let mut sets: Vec<SnapshotSet> = Vec::new();
    let mut records: Vec<CirRecord> = Vec::new();

    for point in &cfg.points {
        let sv_seed = derive_seed(cfg.master_seed, &[&point.id, "sv"]);
        let (background, truth) = synth_sv(&cfg.sv, sv_seed)?;
        bundle.files.insert(
            format!("ground_truth/{}.txt", point.id),
            io::ground_truth_to_text(&truth),
        );
        let geom = Geometry::new(cfg.tx, point.position, cfg.wavelength_m)?;

        for &mode in &cfg.modes {
            let codebook = match mode {
                ChannelMode::WithoutRis => RisCodebook::WithoutRis,
                ChannelMode::Specular => RisCodebook::Specular,
                ChannelMode::IntelligentContinuous => RisCodebook::IntelligentContinuous,
                ChannelMode::IntelligentQuantized => {
                    RisCodebook::intelligent_quantized(&cfg.ris, &geom)?
                }
            };
            let vlos = cascaded_vlos_gain(&cfg.ris, &geom, &codebook, cfg.vlos_scale)?;
            let channel = compose_channel(&background, vlos, mode)?;
            let snapshots = sound_channel(cfg, &probe, &channel, &point.id, mode)?;
            for (m, cir) in snapshots.iter().enumerate() {
                records.push(CirRecord {
                    point_id: point.id.clone(),
                    snapshot_index: m,
                    mode,
                    cir: cir.clone(),
                });
            }
            sets.push(SnapshotSet {
                point_id: point.id.clone(),
                mode,
                snapshots,
            });
        }
    }

    bundle
        .files
        .insert("cirs.txt".into(), io::write_cir_records(&records));

    let analysis = analyze_sets(&sets, &AnalysisParams::from(cfg))?;
    bundle.files.extend(analysis.files);
    Ok(bundle)
}

/// Analyze an externally supplied CIR snapshot dump.
pub fn analyze_records(records: &[CirRecord], params: &AnalysisParams) -> Result<ReportBundle> {
    let mut sets: Vec<SnapshotSet> = Vec::new();
    for r in records {
        match sets
            .iter_mut()
            .find(|s| s.point_id == r.point_id && s.mode == r.mode)
        {
            Some(set) => set.snapshots.push(r.cir.clone()),
            None => sets.push(SnapshotSet {
                point_id: r.point_id.clone(),
                mode: r.mode,
                snapshots: vec![r.cir.clone()],
            }),
        }
    }
    analyze_sets(&sets, params)
}

/// Per-point analysis products kept for aggregation.
struct PointAnalysis {
    point_id: String,
    mode: ChannelMode,
    pdp: Pdp,
    multipaths: MultipathSet,
    dispersion: Option<DispersionReport>,
    clusters: ClusterSet,
}

/// The analysis-only pipeline over snapshot sets.
pub fn analyze_sets(sets: &[SnapshotSet], params: &AnalysisParams) -> Result<ReportBundle> {
    if sets.is_empty() {
        return Err(Error::InvalidParam("no snapshot sets to analyze".into()));
    }
    let mut bundle = ReportBundle::default();
    let mut analyses: Vec<PointAnalysis> = Vec::new();

    for set in sets {
        let pdp = compute_pdp(&set.snapshots)?;
        let start_mode = match set.mode {
            ChannelMode::WithoutRis => StartMode::ZeroDelay,
            _ => StartMode::MaxPath,
        };
        let multipaths = identify_multipaths(&pdp, start_mode)?;

        let k = if set.snapshots.len() >= 2 {
            k_factor(&set.snapshots, params.k_factor_sub_bands)?
        } else {
            KFactorEstimate {
                k_db: f64::NAN,
                capped: false,
            }
        };
        let dispersion = if multipaths.is_empty() {
            None
        } else {
            Some(DispersionReport::from_multipaths(&multipaths, k)?)
        };

        let clusters = if multipaths.is_empty() {
            ClusterSet::default()
        } else {
            cluster_identified(&pdp, &params.bubble, db_to_lin(multipaths.p_min_dbm()))?
        };

        bundle.files.insert(
            format!("analysis/pdp/{}_{}.csv", set.point_id, set.mode),
            io::pdp_to_csv(&pdp),
        );
        bundle.files.insert(
            format!("analysis/multipaths/{}_{}.csv", set.point_id, set.mode),
            io::multipaths_to_csv(&multipaths),
        );
        bundle.files.insert(
            format!("analysis/clusters/{}_{}.csv", set.point_id, set.mode),
            io::clusters_to_csv(&clusters),
        );

        analyses.push(PointAnalysis {
            point_id: set.point_id.clone(),
            mode: set.mode,
            pdp,
            multipaths,
            dispersion,
            clusters,
        });
    }

    bundle.files.insert(
        "analysis/dispersion.csv".into(),
        dispersion_table(&analyses),
    );

    // Per-mode aggregates, in first-appearance order.
    let mut modes: Vec<ChannelMode> = Vec::new();
    for a in &analyses {
        if !modes.contains(&a.mode) {
            modes.push(a.mode);
        }
    }

    let mut decay_csv = String::from(
        "mode,points,power_law_eta0_db,power_law_n,power_law_rmse_db,exp_inv_gamma_per_ns,exp_rmse_db\n",
    );
    let mut summary_csv = String::from(
        "mode,points,multipath_power_dbm,max_path_power_dbm,max_path_delay_ns,mean_delay_ns,rms_delay_spread_ns,k_factor_db,rms_ds_cdf_mu,rms_ds_cdf_sigma\n",
    );
    let mut cluster_csv = String::from(
        "mode,realizations,mean_cluster_count,lambda_per_ns,mean_interval_ns,tau0_ns,intra_rms_mu_db,intra_rms_sigma_db,n_cluster,n_ray,n_first_cluster\n",
    );

    for &mode in &modes {
        let of_mode: Vec<&PointAnalysis> = analyses.iter().filter(|a| a.mode == mode).collect();

        // Decay fits over the pooled normalized PDPs.
        let pdps: Vec<&Pdp> = of_mode.iter().map(|a| &a.pdp).collect();
        let cloud = normalize_and_pool(&pdps, params.analysis_window_ns)?;
        let (eta0, n_pdp, pl_rmse) =
            match fit_power_law(&cloud, params.analysis_window_ns, FitTarget::AveragedCurve) {
                Ok(fit) => match fit.model {
                    FitModel::PowerLaw { eta0_db, n_pdp } => (eta0_db, n_pdp, fit.rmse_db),
                    _ => unreachable!(),
                },
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
        let (inv_gamma, ex_rmse) =
            match fit_exponential(&cloud, params.analysis_window_ns, FitTarget::AveragedCurve) {
                Ok(fit) => match fit.model {
                    FitModel::Exponential { inv_gamma_per_ns } => (inv_gamma_per_ns, fit.rmse_db),
                    _ => unreachable!(),
                },
                Err(_) => (f64::NAN, f64::NAN),
            };
        let _ = writeln!(
            decay_csv,
            "{},{},{},{},{},{},{}",
            mode,
            of_mode.len(),
            eta0,
            n_pdp,
            pl_rmse,
            inv_gamma,
            ex_rmse
        );

        // Dispersion means over points with at least one path.
        let reports: Vec<&DispersionReport> = of_mode
            .iter()
            .filter_map(|a| a.dispersion.as_ref())
            .collect();
        let mean_of = |f: &dyn Fn(&DispersionReport) -> f64| -> f64 {
            if reports.is_empty() {
                f64::NAN
            } else {
                reports.iter().map(|r| f(r)).sum::<f64>() / reports.len() as f64
            }
        };
        let rms_values: Vec<f64> = reports.iter().map(|r| r.rms_delay_spread_ns).collect();
        let (cdf_mu, cdf_sigma) = match fit_cdf_gaussian(&rms_values) {
            Ok(fit) => {
                bundle.files.insert(
                    format!("analysis/cdf_rms_delay_spread_{mode}.csv"),
                    cdf_csv(&fit),
                );
                (fit.mu, fit.sigma)
            }
            Err(_) => (f64::NAN, f64::NAN),
        };
        let _ = writeln!(
            summary_csv,
            "{},{},{},{},{},{},{},{},{},{}",
            mode,
            reports.len(),
            mean_of(&|r| r.received_power_dbm),
            mean_of(&|r| r.max_path_power_dbm),
            mean_of(&|r| r.max_path_delay_ns),
            mean_of(&|r| r.mean_delay_ns),
            mean_of(&|r| r.rms_delay_spread_ns),
            mean_of(&|r| r.k_factor_db),
            cdf_mu,
            cdf_sigma
        );

        // Cluster statistics.
        let cluster_sets: Vec<ClusterSet> = of_mode.iter().map(|a| a.clusters.clone()).collect();
        let nonempty: Vec<ClusterSet> = cluster_sets
            .iter()
            .filter(|cs| !cs.is_empty())
            .cloned()
            .collect();
        if nonempty.is_empty() {
            let _ = writeln!(cluster_csv, "{mode},0,NaN,NaN,NaN,NaN,NaN,NaN,NaN,NaN,NaN");
        } else {
            let stats = inter_cluster_stats(&nonempty, params.bubble.t_dur_ns)?;
            let mut rms_all = Vec::new();
            for cs in &nonempty {
                for s in intra_cluster_stats(cs)? {
                    rms_all.push(s.rms_ns);
                }
            }
            let (mu, sigma) = lognormal_rms_params(&rms_all).unwrap_or((f64::NAN, f64::NAN));
            let n_cluster = fit_cluster_decay(&nonempty, DecayTarget::Clusters).unwrap_or(f64::NAN);
            let n_ray = fit_cluster_decay(&nonempty, DecayTarget::Rays).unwrap_or(f64::NAN);
            let n_first =
                fit_cluster_decay(&nonempty, DecayTarget::FirstClusterRays).unwrap_or(f64::NAN);
            let _ = writeln!(
                cluster_csv,
                "{},{},{},{},{},{},{},{},{},{},{}",
                mode,
                nonempty.len(),
                stats.mean_count,
                stats.lambda_per_ns,
                stats.mean_interval_ns.unwrap_or(f64::NAN),
                stats.tau0_ns.unwrap_or(f64::NAN),
                mu,
                sigma,
                n_cluster,
                n_ray,
                n_first
            );
        }
    }

    bundle
        .files
        .insert("analysis/decay_fits.csv".into(), decay_csv);
    bundle
        .files
        .insert("analysis/dispersion_summary.csv".into(), summary_csv);
    bundle
        .files
        .insert("analysis/cluster_stats.csv".into(), cluster_csv);
    Ok(bundle)
}

fn dispersion_table(analyses: &[PointAnalysis]) -> String {
    let mut out = String::from(
        "point,mode,paths,received_power_dbm,max_path_power_dbm,max_path_delay_ns,mean_delay_ns,rms_delay_spread_ns,k_factor_db,k_capped\n",
    );
    for a in analyses {
        match &a.dispersion {
            Some(d) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    a.point_id,
                    a.mode,
                    a.multipaths.len(),
                    d.received_power_dbm,
                    d.max_path_power_dbm,
                    d.max_path_delay_ns,
                    d.mean_delay_ns,
                    d.rms_delay_spread_ns,
                    d.k_factor_db,
                    d.k_factor_capped
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{},{},0,NaN,NaN,NaN,NaN,NaN,NaN,false",
                    a.point_id, a.mode
                );
            }
        }
    }
    out
}

fn cdf_csv(fit: &crate::pdp::GaussianCdfFit) -> String {
    let mut out = String::from("rms_delay_spread_ns,empirical_cdf,fitted_cdf\n");
    for ((v, e), (_, f)) in fit.empirical.iter().zip(&fit.fitted) {
        let _ = writeln!(out, "{},{},{}", v, e, f);
    }
    out
}

/// Aggregate a per-point dispersion table into per-mode means
/// (the `report` command).
pub fn summarize_dispersion(csv: &str) -> Result<String> {
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, line) in csv.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("point,") {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 9 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected at least 9 columns, found {}", cols.len()),
            });
        }
        let mode = cols[1].to_string();
        let paths: f64 = cols[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("invalid path count '{}'", cols[2]),
        })?;
        if paths == 0.0 {
            continue;
        }
        let values: Vec<f64> = cols[3..9]
            .iter()
            .map(|v| {
                v.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid numeric value '{v}'"),
                })
            })
            .collect::<Result<_>>()?;
        rows.push((mode, values));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no dispersion rows found".into(),
        });
    }
    let mut modes: Vec<String> = Vec::new();
    for (m, _) in &rows {
        if !modes.contains(m) {
            modes.push(m.clone());
        }
    }
    let mut out = String::from(
        "mode,points,multipath_power_dbm,max_path_power_dbm,max_path_delay_ns,mean_delay_ns,rms_delay_spread_ns,k_factor_db\n",
    );
    for mode in &modes {
        let of_mode: Vec<&Vec<f64>> = rows
            .iter()
            .filter(|(m, _)| m == mode)
            .map(|(_, v)| v)
            .collect();
        let n = of_mode.len() as f64;
        let mut means = [0.0f64; 6];
        for v in &of_mode {
            for (acc, x) in means.iter_mut().zip(v.iter()) {
                *acc += x / n;
            }
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            mode,
            of_mode.len(),
            means[0],
            means[1],
            means[2],
            means[3],
            means[4],
            means[5]
        );
    }
    Ok(out)
}
