//! Cascaded Tx–RIS–Rx sub-channel model.
//!
//! Each unit cell reflects the incident wave with a programmable phase.
//! The optimal continuous phase compensates the per-cell propagation
//! phase `2 pi (r_t + r_r) / lambda`; 1-bit hardware quantizes it to two
//! states 180° apart using a threshold window. The coherent sum over all
//! cells gives the virtual line-of-sight (VLoS) amplitude and delay used
//! by the channel composer.
//!
//! Amplitude model: per-cell amplitude `a0 / (r_t * r_r)` (near-field
//! broadcasting form with a free global scale `a0`), isotropic cells.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// 3D point / vector in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }
}

impl std::ops::Add for Point3 {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Point3 {
    type Output = Self;

    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// Orientation of the RIS plane: unit normal plus two in-plane axes.
///
/// `u` spans the column direction, `v` the row direction. The three
/// vectors must be orthonormal.
#[derive(Debug, Clone, Copy)]
pub struct Orientation {
    pub normal: Point3,
    pub u: Point3,
    pub v: Point3,
}

impl Orientation {
    /// RIS in the x–z plane: columns along +x, rows along +z, normal +y.
    pub fn xz_plane() -> Self {
        Self {
            normal: Point3::new(0.0, 1.0, 0.0),
            u: Point3::new(1.0, 0.0, 0.0),
            v: Point3::new(0.0, 0.0, 1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let vs = [self.normal, self.u, self.v];
        for v in vs {
            if (v.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParam(
                    "orientation axes must be unit length".into(),
                ));
            }
        }
        if self.normal.dot(self.u).abs() > 1e-9
            || self.normal.dot(self.v).abs() > 1e-9
            || self.u.dot(self.v).abs() > 1e-9
        {
            return Err(Error::InvalidParam(
                "orientation axes must be orthogonal".into(),
            ));
        }
        Ok(())
    }
}

/// Physical description of the RIS panel.
#[derive(Debug, Clone)]
pub struct RisSpec {
    pub rows: usize,
    pub cols: usize,
    /// Unit-cell edge length in meters.
    pub cell_size: f64,
    /// Center of the panel.
    pub center: Point3,
    pub orientation: Orientation,
    /// 1-bit quantization window in degrees; phases inside
    /// `[lo, hi)` code as bit 1.
    pub quantization_thresholds_deg: (f64, f64),
}

impl RisSpec {
    pub fn new(
        rows: usize,
        cols: usize,
        cell_size: f64,
        center: Point3,
        orientation: Orientation,
    ) -> Result<Self> {
        let spec = Self {
            rows,
            cols,
            cell_size,
            center,
            orientation,
            quantization_thresholds_deg: (55.0, 235.0),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParam(
                "RIS must have at least one cell".into(),
            ));
        }
        if !(self.cell_size > 0.0) {
            return Err(Error::InvalidParam("cell size must be positive".into()));
        }
        let (lo, hi) = self.quantization_thresholds_deg;
        if !(0.0..360.0).contains(&lo) || !(0.0..=360.0).contains(&hi) || lo >= hi {
            return Err(Error::InvalidParam(
                "quantization thresholds must satisfy 0 <= lo < hi <= 360".into(),
            ));
        }
        self.orientation.validate()
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Center of cell `(n, m)` (row `n`, column `m`).
    pub fn cell_center(&self, n: usize, m: usize) -> Result<Point3> {
        if n >= self.rows || m >= self.cols {
            return Err(Error::OutOfRange(format!(
                "cell ({n}, {m}) outside {} x {} grid",
                self.rows, self.cols
            )));
        }
        let du = (m as f64 - (self.cols as f64 - 1.0) / 2.0) * self.cell_size;
        let dv = (n as f64 - (self.rows as f64 - 1.0) / 2.0) * self.cell_size;
        Ok(self.center + self.orientation.u.scale(du) + self.orientation.v.scale(dv))
    }
}

impl Default for RisSpec {
    /// 16 x 32 panel of 5 cm cells in the x–z plane, centered 1.2 m high,
    /// thresholds 55°/235°.
    fn default() -> Self {
        Self {
            rows: 16,
            cols: 32,
            cell_size: 0.05,
            center: Point3::new(0.0, 0.0, 1.2),
            orientation: Orientation::xz_plane(),
            quantization_thresholds_deg: (55.0, 235.0),
        }
    }
}

/// Transmitter / receiver placement and carrier wavelength.
#[derive(Debug, Clone, Copy)]
pub struct Geometry {
    pub tx: Point3,
    pub rx: Point3,
    /// Carrier wavelength in meters (0.1153 m at 2.6 GHz).
    pub wavelength: f64,
}

impl Geometry {
    pub fn new(tx: Point3, rx: Point3, wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidParam("wavelength must be positive".into()));
        }
        Ok(Self { tx, rx, wavelength })
    }
}

/// Wavelength at 2.6 GHz.
pub fn wavelength_2_6_ghz() -> f64 {
    SPEED_OF_LIGHT / 2.6e9
}

/// Distances from the Tx to cell `(n, m)` and from that cell to the Rx.
pub fn cell_distances(spec: &RisSpec, geom: &Geometry, n: usize, m: usize) -> Result<(f64, f64)> {
    let c = spec.cell_center(n, m)?;
    Ok((geom.tx.distance(c), geom.rx.distance(c)))
}

/// Optimal continuous reflection phase `mod(2 pi (r_t + r_r) / lambda, 2 pi)`.
pub fn optimal_phase(r_t: f64, r_r: f64, wavelength: f64) -> f64 {
    debug_assert!(wavelength > 0.0);
    (TAU * (r_t + r_r) / wavelength).rem_euclid(TAU)
}

/// Quantize a continuous phase (radians, `[0, 2 pi)`) to one bit.
///
/// Returns 1 when the phase in degrees lies in `[lo, hi)`, else 0. The
/// boundary belongs to the upper interval.
pub fn quantize_phase(phi: f64, thresholds_deg: (f64, f64)) -> u8 {
    let deg = phi.to_degrees();
    u8::from(deg >= thresholds_deg.0 && deg < thresholds_deg.1)
}

/// Per-cell configuration of the panel.
#[derive(Debug, Clone, PartialEq)]
pub enum RisCodebook {
    /// Panel absent; the cascaded path contributes nothing.
    WithoutRis,
    /// Uncoded panel acting as a plane reflector (all cells in state 0).
    Specular,
    /// Ideal continuous phases from [`optimal_phase`] per cell.
    IntelligentContinuous,
    /// Explicit 1-bit states, row-major `rows * cols`; bit 1 adds a
    /// reflection phase of 180°.
    Bits(Vec<u8>),
    /// Explicit per-cell reflection phases in radians, row-major.
    Phases(Vec<f64>),
}

impl RisCodebook {
    /// Compute the 1-bit intelligent-reflection codebook for a geometry:
    /// optimal continuous phase per cell, then threshold quantization.
    pub fn intelligent_quantized(spec: &RisSpec, geom: &Geometry) -> Result<Self> {
        let mut bits = Vec::with_capacity(spec.cell_count());
        for n in 0..spec.rows {
            for m in 0..spec.cols {
                let (rt, rr) = cell_distances(spec, geom, n, m)?;
                let phi = optimal_phase(rt, rr, geom.wavelength);
                bits.push(quantize_phase(phi, spec.quantization_thresholds_deg));
            }
        }
        Ok(Self::Bits(bits))
    }

    /// Bit grid as text, one row per line.
    pub fn to_text_grid(&self, spec: &RisSpec) -> Result<String> {
        let bits: Vec<u8> = match self {
            Self::Bits(b) => b.clone(),
            Self::Specular => vec![0; spec.cell_count()],
            _ => {
                return Err(Error::InvalidParam(
                    "only bit codebooks can be exported as a text grid".into(),
                ))
            }
        };
        if bits.len() != spec.cell_count() {
            return Err(Error::Mismatch(format!(
                "codebook has {} states, panel has {} cells",
                bits.len(),
                spec.cell_count()
            )));
        }
        let mut out = String::new();
        for n in 0..spec.rows {
            for m in 0..spec.cols {
                out.push(if bits[n * spec.cols + m] == 1 {
                    '1'
                } else {
                    '0'
                });
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Parse a text bit grid (one row per line of '0'/'1').
    pub fn from_text_grid(text: &str) -> Result<Self> {
        let mut bits = Vec::new();
        let mut cols = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            match cols {
                None => cols = Some(line.len()),
                Some(c) if c != line.len() => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("row has {} cells, expected {c}", line.len()),
                    })
                }
                _ => {}
            }
            for ch in line.chars() {
                match ch {
                    '0' => bits.push(0),
                    '1' => bits.push(1),
                    _ => {
                        return Err(Error::Parse {
                            line: i + 1,
                            msg: format!("invalid cell state '{ch}'"),
                        })
                    }
                }
            }
        }
        if bits.is_empty() {
            return Err(Error::Parse {
                line: 1,
                msg: "empty codebook grid".into(),
            });
        }
        Ok(Self::Bits(bits))
    }
}

/// Coherent cascaded VLoS gain and delay of the configured panel.
///
/// Sums `a0 / (r_t r_r) * exp(j(-2 pi (r_t + r_r)/lambda + phi_cell))`
/// over all cells; the delay is the cell-averaged path length over the
/// speed of light (the spread across the aperture is below one delay
/// bin). `WithoutRis` yields zero amplitude and zero delay.
pub fn cascaded_vlos_gain(
    spec: &RisSpec,
    geom: &Geometry,
    codebook: &RisCodebook,
    a0: f64,
) -> Result<(Complex64, f64)> {
    spec.validate()?;
    if let RisCodebook::WithoutRis = codebook {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    match codebook {
        RisCodebook::Bits(b) if b.len() != spec.cell_count() => {
            return Err(Error::Mismatch(format!(
                "codebook has {} states, panel has {} cells",
                b.len(),
                spec.cell_count()
            )))
        }
        RisCodebook::Phases(p) if p.len() != spec.cell_count() => {
            return Err(Error::Mismatch(format!(
                "codebook has {} phases, panel has {} cells",
                p.len(),
                spec.cell_count()
            )))
        }
        _ => {}
    }
    // Both terminals must sit on the reflecting side of the panel.
    for (who, p) in [("tx", geom.tx), ("rx", geom.rx)] {
        if (p - spec.center).dot(spec.orientation.normal) <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "{who} is not on the reflecting side of the RIS plane"
            )));
        }
    }

    let mut sum = Complex64::new(0.0, 0.0);
    let mut path_sum = 0.0;
    for n in 0..spec.rows {
        for m in 0..spec.cols {
            let (rt, rr) = cell_distances(spec, geom, n, m)?;
            if rt * rr == 0.0 {
                return Err(Error::Degenerate(format!(
                    "zero distance at cell ({n}, {m})"
                )));
            }
            let refl = match codebook {
                RisCodebook::Specular => 0.0,
                RisCodebook::IntelligentContinuous => optimal_phase(rt, rr, geom.wavelength),
                RisCodebook::Bits(b) => f64::from(b[n * spec.cols + m]) * PI,
                RisCodebook::Phases(p) => p[n * spec.cols + m],
                RisCodebook::WithoutRis => unreachable!(),
            };
            let phase = -TAU * (rt + rr) / geom.wavelength + refl;
            let amp = a0 / (rt * rr);
            sum += Complex64::from_polar(amp, phase);
            path_sum += rt + rr;
        }
    }
    let delay = path_sum / spec.cell_count() as f64 / SPEED_OF_LIGHT;
    Ok((sum, delay))
}
