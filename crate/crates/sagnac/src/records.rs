//! CSV and JSON forms of count records, fringe sweeps and simulator output.

use std::path::Path;

use serde::Serialize;

use sagnac_core::fringes::{FringeData, FringePoint};
use sagnac_core::simulator::{CrosstalkMatrix, SimResult};
use sagnac_core::tomography::CountRecord;
use sagnac_core::{CMatrix, WaveplateSetting};

use crate::error::{Error, Result};

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::format(path, line, e.to_string())
}

fn angle(text: &str, path: &Path, line: usize) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::format(path, line, format!("`{text}` is not a number")))
}

/// `setting_id,q1_qwp,q1_hwp,…,counts,exposure`, angles in degrees and
/// `out` for a removed QWP.
pub fn write_count_record(record: &CountRecord) -> String {
    let n = record.n_photons();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["setting_id".to_string()];
    for k in 1..=n {
        header.push(format!("q{k}_qwp"));
        header.push(format!("q{k}_hwp"));
    }
    header.push("counts".into());
    header.push("exposure".into());
    w.write_record(&header).expect("in-memory write");
    for (i, (tuple, &c)) in record.settings().iter().zip(record.counts()).enumerate() {
        let mut row = vec![i.to_string()];
        for s in tuple {
            row.push(s.qwp.map_or("out".to_string(), |q| q.to_string()));
            row.push(s.hwp.to_string());
        }
        row.push(c.to_string());
        row.push(record.exposure().to_string());
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn parse_count_record(text: &str, path: &Path) -> Result<CountRecord> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let n = (cols.len().saturating_sub(3)) / 2;
    let mut expected = vec!["setting_id".to_string()];
    for k in 1..=n {
        expected.push(format!("q{k}_qwp"));
        expected.push(format!("q{k}_hwp"));
    }
    expected.push("counts".into());
    expected.push("exposure".into());
    if n == 0 || cols != expected {
        return Err(Error::format(
            path,
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    let mut settings = Vec::new();
    let mut counts = Vec::new();
    let mut exposure: Option<f64> = None;
    for row in r.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let mut tuple = Vec::with_capacity(n);
        for k in 0..n {
            let q = &row[1 + 2 * k];
            let qwp = if q == "out" { None } else { Some(angle(q, path, line)?) };
            let hwp = angle(&row[2 + 2 * k], path, line)?;
            tuple.push(WaveplateSetting::new(qwp, hwp).map_err(|e| Error::format(path, line, e.to_string()))?);
        }
        settings.push(tuple);
        counts.push(angle(&row[1 + 2 * n], path, line)?);
        let e = angle(&row[2 + 2 * n], path, line)?;
        match exposure {
            Some(prev) if prev != e => {
                return Err(Error::format(path, line, "exposure differs between rows"));
            }
            _ => exposure = Some(e),
        }
    }
    let exposure = exposure.ok_or_else(|| Error::format(path, 0, "no data rows"))?;
    CountRecord::new(settings, counts, exposure).map_err(|e| Error::format(path, 0, e.to_string()))
}

/// `angle_deg,counts` for Poisson data, `angle_deg,counts,err` otherwise.
pub fn write_fringe_data(data: &FringeData) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let poisson = data.is_poisson();
    if poisson {
        w.write_record(["angle_deg", "counts"]).expect("in-memory write");
    } else {
        w.write_record(["angle_deg", "counts", "err"]).expect("in-memory write");
    }
    for p in data.points() {
        let mut row = vec![p.angle_deg.to_string(), p.counts.to_string()];
        if !poisson {
            row.push(p.count_error.to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Reads `angle_deg,counts[,err]`. Without an `err` column the points get
/// Poisson error bars.
pub fn parse_fringe_data(text: &str, path: &Path, signal_basis_deg: f64, n_fold: usize) -> Result<FringeData> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let with_err = match cols.as_slice() {
        ["angle_deg", "counts"] => false,
        ["angle_deg", "counts", "err"] => true,
        _ => return Err(Error::format(path, 1, "expected header `angle_deg,counts[,err]`")),
    };
    let mut points = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let angle_deg = angle(&row[0], path, line)?;
        let counts = angle(&row[1], path, line)?;
        let count_error = if with_err {
            angle(&row[2], path, line)?
        } else {
            counts.max(0.0).sqrt()
        };
        points.push(FringePoint {
            angle_deg,
            counts,
            count_error,
        });
    }
    let data = if with_err {
        FringeData::new(points, signal_basis_deg, n_fold)
    } else {
        let angles: Vec<f64> = points.iter().map(|p| p.angle_deg).collect();
        let counts: Vec<f64> = points.iter().map(|p| p.counts).collect();
        FringeData::from_counts(&angles, &counts, signal_basis_deg, n_fold)
    };
    data.map_err(|e| Error::format(path, 0, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResultJson {
    pub n_pulses: u64,
    pub n_fold: usize,
    pub elapsed_s: f64,
    pub coincidences: u64,
    pub coincidence_rate_hz: f64,
    pub accidental_estimate: f64,
    pub singles: Vec<u64>,
    /// detector × detector two-fold counts, singles on the diagonal
    pub twofold: Vec<Vec<u64>>,
}

impl From<&SimResult> for SimResultJson {
    fn from(r: &SimResult) -> Self {
        let n = r.n_detectors();
        SimResultJson {
            n_pulses: r.n_pulses,
            n_fold: r.n_fold,
            elapsed_s: r.elapsed_s,
            coincidences: r.coincidences,
            coincidence_rate_hz: r.coincidence_rate_hz(),
            accidental_estimate: r.accidental_estimate(),
            singles: r.singles.clone(),
            twofold: (0..n).map(|a| (0..n).map(|b| r.twofold(a, b)).collect()).collect(),
        }
    }
}

/// Per-detector singles of one run: `detector,channel,singles,singles_rate_hz`.
pub fn write_singles(r: &SimResult, channel_of: impl Fn(usize) -> i64) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["detector", "channel", "singles", "singles_rate_hz"]).expect("in-memory write");
    for (d, &s) in r.singles.iter().enumerate() {
        w.write_record(&[
            d.to_string(),
            channel_of(d).to_string(),
            s.to_string(),
            (s as f64 / r.elapsed_s).to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosstalkJson {
    pub signal_channels: Vec<i64>,
    pub idler_channels: Vec<i64>,
    pub elapsed_s: f64,
    pub counts: Vec<Vec<u64>>,
    pub rates_hz: Vec<Vec<f64>>,
}

impl From<&CrosstalkMatrix> for CrosstalkJson {
    fn from(m: &CrosstalkMatrix) -> Self {
        CrosstalkJson {
            signal_channels: m.signal_channels.clone(),
            idler_channels: m.idler_channels.clone(),
            elapsed_s: m.elapsed_s,
            counts: m.counts.clone(),
            rates_hz: m.rates_hz.clone(),
        }
    }
}

/// Long form: `signal_channel,idler_channel,counts,rate_hz`.
pub fn write_crosstalk(m: &CrosstalkMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["signal_channel", "idler_channel", "counts", "rate_hz"]).expect("in-memory write");
    for (a, s) in m.signal_channels.iter().enumerate() {
        for (b, i) in m.idler_channels.iter().enumerate() {
            w.write_record(&[
                s.to_string(),
                i.to_string(),
                m.counts[a][b].to_string(),
                m.rates_hz[a][b].to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Real or imaginary part of a matrix as bare CSV rows, for bar charts.
pub fn write_matrix_part(m: &CMatrix, imaginary: bool) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        let row: Vec<String> = m
            .row(r)
            .iter()
            .map(|z| if imaginary { z.im } else { z.re }.to_string())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Row-major `[re, im]` pairs.
pub fn matrix_json(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows()).map(|r| m.row(r).iter().map(|z| [z.re, z.im]).collect()).collect()
}
