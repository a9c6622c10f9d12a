//! Campaign configuration: structured text file parsing and defaults.
//!
//! The format is line-oriented: `[section]` headers, `key = value`
//! entries and `#` comments. Points are listed as repeated `point = id
//! x y z` entries in the `[points]` section.

use crate::channel::{ChannelMode, DecayModel, SvParams};
use crate::clustering::BubbleParams;
use crate::error::{Error, Result};
use crate::ris::{Orientation, Point3, RisSpec};
use crate::signalgen::{default_taps, PulseShape};
use crate::sounder::SounderConfig;

/// PN probe configuration.
///
/// With `samples_per_symbol = 1` the probe is a full-bandwidth chip
/// waveform (one chip per sample) and the correlation sounder attains
/// the exact m-sequence sidelobe bound. Larger values shape the chips
/// with a root-raised cosine filter, which widens the correlation
/// mainlobe to the pulse autocorrelation.
#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub mseq_degree: u32,
    pub rolloff: f64,
    pub samples_per_symbol: usize,
    pub span_symbols: usize,
    pub sample_rate_hz: f64,
}

impl Default for ProbeConfig {
    /// 511-chip probe, one chip per sample at 200 MHz (5 ns delay bins).
    fn default() -> Self {
        Self {
            mseq_degree: 9,
            rolloff: 0.5,
            samples_per_symbol: 1,
            span_symbols: 12,
            sample_rate_hz: 200e6,
        }
    }
}

impl ProbeConfig {
    pub fn sample_interval(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn pulse_shape(&self) -> Result<PulseShape> {
        PulseShape::root_raised_cosine(self.rolloff, self.samples_per_symbol, self.span_symbols)
    }

    pub fn validate(&self) -> Result<()> {
        default_taps(self.mseq_degree).ok_or_else(|| {
            Error::InvalidParam(format!(
                "probe.mseq_degree: no default taps for degree {}",
                self.mseq_degree
            ))
        })?;
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidParam(
                "probe.sample_rate_hz must be positive".into(),
            ));
        }
        if self.samples_per_symbol == 0 {
            return Err(Error::InvalidParam(
                "probe.samples_per_symbol must be >= 1".into(),
            ));
        }
        if self.samples_per_symbol > 1 {
            self.pulse_shape()?;
        }
        Ok(())
    }
}

/// One receiver location.
#[derive(Debug, Clone)]
pub struct PointConfig {
    pub id: String,
    pub position: Point3,
}

/// Full campaign description.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub master_seed: u64,
    pub modes: Vec<ChannelMode>,
    pub points: Vec<PointConfig>,
    pub tx: Point3,
    pub ris: RisSpec,
    pub wavelength_m: f64,
    /// Global VLoS amplitude scale of the cascaded sub-channel.
    pub vlos_scale: f64,
    pub sv: SvParams,
    pub sounder: SounderConfig,
    pub bubble: BubbleParams,
    pub probe: ProbeConfig,
    /// CIR bins kept per snapshot.
    pub storage_bins: usize,
    /// Decay-fit / clustering window in ns.
    pub analysis_window_ns: f64,
    /// K-factor sub-band count.
    pub k_factor_sub_bands: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            modes: vec![
                ChannelMode::WithoutRis,
                ChannelMode::Specular,
                ChannelMode::IntelligentQuantized,
            ],
            points: Vec::new(),
            tx: Point3::new(-1.77, 1.77, 1.2),
            ris: RisSpec::default(),
            wavelength_m: crate::ris::wavelength_2_6_ghz(),
            vlos_scale: 1.0,
            sv: SvParams::default(),
            sounder: SounderConfig {
                noise_power_dbm: -120.0,
                ..SounderConfig::default()
            },
            bubble: BubbleParams::default(),
            probe: ProbeConfig::default(),
            storage_bins: 300,
            analysis_window_ns: 300.0,
            k_factor_sub_bands: 8,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidParam(
                "points: at least one measurement point".into(),
            ));
        }
        if self.modes.is_empty() {
            return Err(Error::InvalidParam(
                "modes: at least one channel mode".into(),
            ));
        }
        let mut ids: Vec<&str> = self.points.iter().map(|p| p.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.points.len() {
            return Err(Error::InvalidParam("points: duplicate point ids".into()));
        }
        if !(self.wavelength_m > 0.0) {
            return Err(Error::InvalidParam(
                "geometry.wavelength_m must be positive".into(),
            ));
        }
        if !(self.vlos_scale >= 0.0) {
            return Err(Error::InvalidParam("ris.vlos_scale must be >= 0".into()));
        }
        if self.storage_bins < 160 {
            return Err(Error::InvalidParam(
                "campaign.storage_bins must be >= 160 (noise-floor estimation)".into(),
            ));
        }
        if !(self.analysis_window_ns > 0.0) {
            return Err(Error::InvalidParam(
                "campaign.analysis_window_ns must be positive".into(),
            ));
        }
        if self.k_factor_sub_bands == 0 {
            return Err(Error::InvalidParam(
                "campaign.k_factor_sub_bands must be >= 1".into(),
            ));
        }
        self.sv.validate()?;
        self.sounder.validate()?;
        self.bubble.validate()?;
        self.probe.validate()?;
        // Panel geometry invariants (orthonormal axes etc.) are enforced
        // by RisSpec::new; re-check here for hand-built configs.
        RisSpec::new(
            self.ris.rows,
            self.ris.cols,
            self.ris.cell_size,
            self.ris.center,
            self.ris.orientation,
        )?;
        Ok(())
    }

    /// Parse the structured text format.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = CampaignConfig::default();
        let mut section = String::new();
        let mut exp_gamma_cluster: Option<f64> = None;
        let mut exp_gamma_ray: Option<f64> = None;
        let mut exp_p0_db: f64 = 0.0;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_lowercase();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: line_no,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            let key = key.trim().to_lowercase();
            let value = value.trim();
            let field = format!("{section}.{key}");
            let bad = |msg: String| Error::Parse { line: line_no, msg };

            match (section.as_str(), key.as_str()) {
                ("campaign", "master_seed") => cfg.master_seed = num(value, &field, line_no)?,
                ("campaign", "modes") => {
                    cfg.modes = value
                        .split(',')
                        .map(|m| ChannelMode::parse(m.trim()))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| bad(e.to_string()))?;
                }
                ("campaign", "snapshots") => cfg.sounder.snapshots = num(value, &field, line_no)?,
                ("campaign", "storage_bins") => cfg.storage_bins = num(value, &field, line_no)?,
                ("campaign", "analysis_window_ns") => {
                    cfg.analysis_window_ns = num(value, &field, line_no)?
                }
                ("campaign", "k_factor_sub_bands") => {
                    cfg.k_factor_sub_bands = num(value, &field, line_no)?
                }
                ("probe", "mseq_degree") => cfg.probe.mseq_degree = num(value, &field, line_no)?,
                ("probe", "rolloff") => cfg.probe.rolloff = num(value, &field, line_no)?,
                ("probe", "samples_per_symbol") => {
                    cfg.probe.samples_per_symbol = num(value, &field, line_no)?
                }
                ("probe", "span_symbols") => cfg.probe.span_symbols = num(value, &field, line_no)?,
                ("probe", "sample_rate_hz") => {
                    cfg.probe.sample_rate_hz = num(value, &field, line_no)?
                }
                ("ris", "rows") => cfg.ris.rows = num(value, &field, line_no)?,
                ("ris", "cols") => cfg.ris.cols = num(value, &field, line_no)?,
                ("ris", "cell_size_m") => cfg.ris.cell_size = num(value, &field, line_no)?,
                ("ris", "center") => cfg.ris.center = point(value, &field, line_no)?,
                ("ris", "normal") => {
                    let n = point(value, &field, line_no)?;
                    cfg.ris.orientation = orientation_from_normal(n)
                        .ok_or_else(|| bad(format!("{field}: cannot build axes from normal")))?;
                }
                ("ris", "quantization_thresholds_deg") => {
                    let v = floats(value, &field, line_no)?;
                    if v.len() != 2 {
                        return Err(bad(format!("{field}: expected two values")));
                    }
                    cfg.ris.quantization_thresholds_deg = (v[0], v[1]);
                }
                ("ris", "vlos_scale") => cfg.vlos_scale = num(value, &field, line_no)?,
                ("geometry", "tx") => cfg.tx = point(value, &field, line_no)?,
                ("geometry", "wavelength_m") => cfg.wavelength_m = num(value, &field, line_no)?,
                ("sv", "cluster_rate_per_ns") => {
                    cfg.sv.cluster_rate_per_ns = num(value, &field, line_no)?
                }
                ("sv", "ray_rate_per_ns") => cfg.sv.ray_rate_per_ns = num(value, &field, line_no)?,
                ("sv", "t_dur_ns") => cfg.sv.t_dur_ns = num(value, &field, line_no)?,
                ("sv", "tau0_offset_ns") => cfg.sv.tau0_offset_ns = num(value, &field, line_no)?,
                ("sv", "bin_interval_ns") => cfg.sv.bin_interval_ns = num(value, &field, line_no)?,
                ("sv", "window_ns") => cfg.sv.window_ns = num(value, &field, line_no)?,
                ("sv", "rayleigh_fading") => {
                    cfg.sv.rayleigh_fading = value
                        .parse()
                        .map_err(|_| bad(format!("{field}: expected true/false, got '{value}'")))?
                }
                ("sv", "intra_rms_log") => {
                    let v = floats(value, &field, line_no)?;
                    if v.len() != 2 {
                        return Err(bad(format!("{field}: expected 'mu sigma'")));
                    }
                    cfg.sv.intra_rms_log = Some((v[0], v[1]));
                }
                ("sv", "decay") => {
                    let fields: Vec<&str> = value.split_whitespace().collect();
                    match fields.first() {
                        Some(&"power_law") if fields.len() == 4 => {
                            cfg.sv.decay = DecayModel::PowerLaw {
                                n_cluster: num(fields[1], &field, line_no)?,
                                n_ray: num(fields[2], &field, line_no)?,
                                eta0_db: num(fields[3], &field, line_no)?,
                            };
                        }
                        Some(&"exponential") if fields.len() == 3 || fields.len() == 4 => {
                            exp_gamma_cluster = Some(num(fields[1], &field, line_no)?);
                            exp_gamma_ray = Some(num(fields[2], &field, line_no)?);
                            if fields.len() == 4 {
                                exp_p0_db = num(fields[3], &field, line_no)?;
                            }
                        }
                        _ => {
                            return Err(bad(format!(
                                "{field}: expected 'power_law <n_cluster> <n_ray> <eta0_db>' or \
                                 'exponential <gamma_cluster_ns> <gamma_ray_ns> [p0_db]'"
                            )))
                        }
                    }
                }
                ("sounder", "transmit_power_dbm") => {
                    cfg.sounder.transmit_power_dbm = num(value, &field, line_no)?
                }
                ("sounder", "noise_power_dbm") => {
                    cfg.sounder.noise_power_dbm = if value == "-inf" {
                        f64::NEG_INFINITY
                    } else {
                        num(value, &field, line_no)?
                    }
                }
                ("sounder", "dynamic_range_db") => {
                    cfg.sounder.dynamic_range_db = num(value, &field, line_no)?
                }
                ("bubble", "t0_ns") => cfg.bubble.t0_ns = num(value, &field, line_no)?,
                ("bubble", "t_dur_ns") => cfg.bubble.t_dur_ns = num(value, &field, line_no)?,
                ("bubble", "t_dis_ns") => cfg.bubble.t_dis_ns = num(value, &field, line_no)?,
                ("bubble", "p_dis_db") => cfg.bubble.p_dis_db = num(value, &field, line_no)?,
                ("bubble", "beta_offset_db") => {
                    cfg.bubble.beta_offset_db = num(value, &field, line_no)?
                }
                ("bubble", "delta_tau_ns") => {
                    cfg.bubble.delta_tau_ns = num(value, &field, line_no)?
                }
                ("points", "point") => {
                    let fields: Vec<&str> = value.split_whitespace().collect();
                    if fields.len() != 4 {
                        return Err(bad(format!("{field}: expected 'id x y z', got '{value}'")));
                    }
                    cfg.points.push(PointConfig {
                        id: fields[0].to_string(),
                        position: Point3::new(
                            num(fields[1], &field, line_no)?,
                            num(fields[2], &field, line_no)?,
                            num(fields[3], &field, line_no)?,
                        ),
                    });
                }
                _ => {
                    return Err(bad(format!("unknown configuration field '{field}'")));
                }
            }
        }

        if let (Some(gc), Some(gr)) = (exp_gamma_cluster, exp_gamma_ray) {
            cfg.sv.decay = DecayModel::Exponential {
                gamma_cluster_ns: gc,
                gamma_ray_ns: gr,
                p0_db: exp_p0_db,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn num<T: std::str::FromStr>(s: &str, field: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{field}: invalid value '{s}'"),
    })
}

fn floats(s: &str, field: &str, line: usize) -> Result<Vec<f64>> {
    s.split_whitespace().map(|v| num(v, field, line)).collect()
}

fn point(s: &str, field: &str, line: usize) -> Result<Point3> {
    let v = floats(s, field, line)?;
    if v.len() != 3 {
        return Err(Error::Parse {
            line,
            msg: format!("{field}: expected three coordinates"),
        });
    }
    Ok(Point3::new(v[0], v[1], v[2]))
}

/// Orthonormal panel axes for a given normal: `u` horizontal in the
/// world x-y plane, `v` completing the right-handed frame.
fn orientation_from_normal(n: Point3) -> Option<Orientation> {
    let len = n.norm();
    if !(len > 0.0) {
        return None;
    }
    let normal = n.scale(1.0 / len);
    let up = if normal.z.abs() > 0.9 {
        Point3::new(1.0, 0.0, 0.0)
    } else {
        Point3::new(0.0, 0.0, 1.0)
    };
    // u = up x normal, v = normal x u.
    let cross = |a: Point3, b: Point3| {
        Point3::new(
            a.y * b.z - a.z * b.y,
            a.z * b.x - a.x * b.z,
            a.x * b.y - a.y * b.x,
        )
    };
    let u_raw = cross(up, normal);
    let u_len = u_raw.norm();
    if !(u_len > 0.0) {
        return None;
    }
    let u = u_raw.scale(1.0 / u_len);
    let v = cross(normal, u);
    Some(Orientation { normal, u, v })
}
