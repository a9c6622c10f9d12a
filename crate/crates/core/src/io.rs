//! Text interchange formats.
//!
//! * CIR snapshot records — the interface between the sounding and
//!   analysis stages: one whitespace-separated record per line,
//!   `point_id snapshot_index mode bin_interval_ns t0_ns n_taps re im ...`.
//! * PDP tables — CSV with columns `bin,delay_ns,power_dbm`.
//! * Multipath and cluster tables, ground-truth dumps.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! parsing a dump reproduces the original values bit-exactly.

use crate::channel::{ChannelMode, Cir, GroundTruth};
use crate::clustering::ClusterSet;
use crate::error::{Error, Result};
use crate::pdp::{MultipathSet, Pdp};
use crate::util::lin_to_db;
use num_complex::Complex64;
use std::fmt::Write as _;

/// One stored CIR snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct CirRecord {
    pub point_id: String,
    pub snapshot_index: usize,
    pub mode: ChannelMode,
    pub cir: Cir,
}

/// Serialize snapshot records, one per line, with a format header.
pub fn write_cir_records(records: &[CirRecord]) -> String {
    let mut out = String::from(
        "# cir-snapshots v1\n# point_id snapshot_index mode bin_interval_ns t0_ns n_taps re im ...\n",
    );
    for r in records {
        let _ = write!(
            out,
            "{} {} {} {} {} {}",
            r.point_id,
            r.snapshot_index,
            r.mode,
            r.cir.bin_interval_ns(),
            r.cir.t0_ns(),
            r.cir.len()
        );
        for t in r.cir.taps() {
            let _ = write!(out, " {} {}", t.re, t.im);
        }
        out.push('\n');
    }
    out
}

/// Parse snapshot records; malformed lines report their line number.
pub fn parse_cir_records(text: &str) -> Result<Vec<CirRecord>> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut next = |what: &str| -> Result<&str> {
            fields.next().ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("missing field '{what}'"),
            })
        };
        let point_id = next("point_id")?.to_string();
        let snapshot_index: usize =
            parse_field(next("snapshot_index")?, "snapshot_index", line_no)?;
        let mode = ChannelMode::parse(next("mode")?).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let bin_interval_ns: f64 =
            parse_field(next("bin_interval_ns")?, "bin_interval_ns", line_no)?;
        let t0_ns: f64 = parse_field(next("t0_ns")?, "t0_ns", line_no)?;
        let n_taps: usize = parse_field(next("n_taps")?, "n_taps", line_no)?;
        let rest: Vec<&str> = fields.collect();
        if rest.len() != 2 * n_taps {
            return Err(Error::Parse {
                line: line_no,
                msg: format!(
                    "expected {} tap components, found {}",
                    2 * n_taps,
                    rest.len()
                ),
            });
        }
        let mut taps = Vec::with_capacity(n_taps);
        for pair in rest.chunks(2) {
            let re: f64 = parse_field(pair[0], "tap re", line_no)?;
            let im: f64 = parse_field(pair[1], "tap im", line_no)?;
            taps.push(Complex64::new(re, im));
        }
        let cir = Cir::new(taps, bin_interval_ns, t0_ns).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        records.push(CirRecord {
            point_id,
            snapshot_index,
            mode,
            cir,
        });
    }
    if records.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no CIR records found".into(),
        });
    }
    Ok(records)
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what}: '{s}'"),
    })
}

/// PDP as CSV (`bin,delay_ns,power_dbm`).
pub fn pdp_to_csv(pdp: &Pdp) -> String {
    let mut out = String::from("bin,delay_ns,power_dbm\n");
    for k in 0..pdp.len() {
        let _ = writeln!(out, "{},{},{}", k, pdp.delay_ns(k), pdp.power_dbm(k));
    }
    out
}

/// Parse a PDP CSV produced by [`pdp_to_csv`].
///
/// `snapshot_count` is not stored in the CSV; the caller provides it
/// (default 1).
pub fn parse_pdp_csv(text: &str, snapshot_count: usize) -> Result<Pdp> {
    let mut powers = Vec::new();
    let mut bin_interval = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("bin,") {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 3 columns, found {}", cols.len()),
            });
        }
        let bin: usize = parse_field(cols[0], "bin", line_no)?;
        let delay: f64 = parse_field(cols[1], "delay_ns", line_no)?;
        let dbm: f64 = parse_field(cols[2], "power_dbm", line_no)?;
        if bin != powers.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("bin {bin} out of order (expected {})", powers.len()),
            });
        }
        if bin == 1 {
            bin_interval = Some(delay);
        }
        powers.push(if dbm == f64::NEG_INFINITY {
            0.0
        } else {
            10f64.powf(dbm / 10.0)
        });
    }
    if powers.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no PDP rows found".into(),
        });
    }
    let bin_interval = bin_interval.unwrap_or(1.0);
    Pdp::new(powers, bin_interval, snapshot_count.max(1))
}

/// Identified multipaths as CSV with threshold metadata in a comment.
pub fn multipaths_to_csv(mp: &MultipathSet) -> String {
    let mut out = format!(
        "# p_min_dbm={} noise_floor_dbm={} max_power_dbm={}\ndelay_ns,power_dbm\n",
        mp.p_min_dbm(),
        mp.noise_floor_dbm(),
        mp.max_power_dbm()
    );
    for &(t, p) in mp.paths() {
        let _ = writeln!(out, "{},{}", t, lin_to_db(p));
    }
    out
}

/// Cluster partition as CSV: one row per ray with its cluster start.
pub fn clusters_to_csv(cs: &ClusterSet) -> String {
    let mut out = String::from("cluster,start_ns,rel_delay_ns,power_dbm\n");
    for (l, c) in cs.clusters.iter().enumerate() {
        for &(t, p) in &c.rays {
            let _ = writeln!(out, "{},{},{},{}", l, c.start_ns, t, lin_to_db(p));
        }
    }
    out
}

/// Ground-truth dump: cluster starts and ray lists.
pub fn ground_truth_to_text(gt: &GroundTruth) -> String {
    let mut out = String::from("# ground-truth v1\n");
    for (l, (&start, rays)) in gt.cluster_starts_ns.iter().zip(&gt.clusters).enumerate() {
        let _ = writeln!(out, "cluster {} start_ns {}", l, start);
        for &(t, p) in rays {
            let _ = writeln!(out, "ray {} {}", t, p);
        }
    }
    out
}

/// Parse a ground-truth dump written by [`ground_truth_to_text`].
pub fn parse_ground_truth(text: &str) -> Result<GroundTruth> {
    let mut starts = Vec::new();
    let mut clusters: Vec<Vec<(f64, f64)>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.first() {
            Some(&"cluster") if fields.len() == 4 && fields[2] == "start_ns" => {
                starts.push(parse_field(fields[3], "start_ns", line_no)?);
                clusters.push(Vec::new());
            }
            Some(&"ray") if fields.len() == 3 => {
                let rays = clusters.last_mut().ok_or(Error::Parse {
                    line: line_no,
                    msg: "ray before any cluster".into(),
                })?;
                rays.push((
                    parse_field(fields[1], "rel_delay_ns", line_no)?,
                    parse_field(fields[2], "power", line_no)?,
                ));
            }
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unrecognized record '{line}'"),
                })
            }
        }
    }
    if starts.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no clusters found".into(),
        });
    }
    Ok(GroundTruth {
        cluster_starts_ns: starts,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synth_sv, SvParams};

    fn sample_records() -> Vec<CirRecord> {
        let (cir, _) = synth_sv(&SvParams::default(), 42).unwrap();
        vec![
            CirRecord {
                point_id: "r1c1".into(),
                snapshot_index: 0,
                mode: ChannelMode::Specular,
                cir: cir.truncated(300),
            },
            CirRecord {
                point_id: "r1c1".into(),
                snapshot_index: 1,
                mode: ChannelMode::Specular,
                cir: cir.truncated(300),
            },
        ]
    }

    #[test]
    fn cir_records_round_trip_bit_exactly() {
        let records = sample_records();
        let text = write_cir_records(&records);
        let parsed = parse_cir_records(&text).unwrap();
        assert_eq!(records, parsed);
        // Second serialization is byte-identical.
        assert_eq!(text, write_cir_records(&parsed));
    }

    #[test]
    fn malformed_record_reports_line_number() {
        let text = "# header\np1 0 specular 5 0 2 0.1 0.2 0.3\n";
        match parse_cir_records(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_error() {
        assert!(parse_cir_records("# nothing\n").is_err());
    }

    #[test]
    fn pdp_csv_round_trip() {
        let pdp = Pdp::new(vec![0.0, 1.0e-4, 5.0e-6, 0.0], 5.0, 3).unwrap();
        let csv = pdp_to_csv(&pdp);
        assert!(csv.starts_with("bin,delay_ns,power_dbm\n"));
        let parsed = parse_pdp_csv(&csv, 3).unwrap();
        assert_eq!(parsed.len(), 4);
        assert_eq!(parsed.bin_interval_ns(), 5.0);
        assert_eq!(parsed.powers()[0], 0.0);
        for (a, b) in pdp.powers().iter().zip(parsed.powers()) {
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn ground_truth_round_trip() {
        let (_, gt) = synth_sv(&SvParams::default(), 7).unwrap();
        let text = ground_truth_to_text(&gt);
        let parsed = parse_ground_truth(&text).unwrap();
        assert_eq!(gt.cluster_starts_ns, parsed.cluster_starts_ns);
        assert_eq!(gt.clusters, parsed.clusters);
    }
}
