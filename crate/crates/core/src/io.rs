//! CSV and JSON artifacts.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bands::ConfidenceBand;
use crate::error::{Error, Result};
use crate::estimator::{CoefficientStats, MeanEstimate};
use crate::grid_basis::{make_grid, BasisMatrix, Grid};
use crate::metrics::BenchReport;
use crate::process_sim::CurvePanel;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::invalid(format!("unknown format `{other}` (csv or json)"))),
        }
    }
}

fn num<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

fn parse_num<T: Real>(s: &str, row: usize, col: usize) -> Result<T> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("row {row}, column {col}: `{s}` is not a number")))?;
    Ok(T::lit(v))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Create `path` and hand a buffered writer to `body`.
pub fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn open_file(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| io_err(path, e))
}

fn csv_writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

/// First row: grid points. Then one row per curve. No header.
pub fn write_panel_csv<T: Real>(w: &mut dyn Write, panel: &CurvePanel<T>) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(panel.grid().points().iter().map(|&t| num(t)))?;
    for row in panel.y().rows() {
        out.write_record(row.iter().map(|&v| num(v)))?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn read_panel_csv<T: Real, R: Read>(r: R) -> Result<CurvePanel<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_reader(r);
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, s)| parse_num(s, i + 1, j + 1))
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::invalid("panel CSV needs a grid row and at least one curve"));
    }
    let grid_row = rows.remove(0);
    panel_from_rows(&grid_row, rows)
}

fn panel_from_rows<T: Real>(grid_row: &[T], rows: Vec<Vec<T>>) -> Result<CurvePanel<T>> {
    let m = grid_row.len();
    let grid: Grid<T> = make_grid(m)?;
    let tol = T::lit(1e-9);
    if grid_row.iter().zip(grid.points()).any(|(&a, &b)| (a - b).abs() > tol) {
        return Err(Error::invalid(format!(
            "grid is not the midpoint grid (j - 1/2)/m for m = {m}"
        )));
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::invalid("panel has no curves"));
    }
    let flat: Vec<T> = rows.into_iter().flatten().collect();
    let y = Array2::from_shape_vec((n, m), flat).map_err(|_| Error::invalid("ragged panel"))?;
    CurvePanel::new(grid, y)
}

#[derive(Deserialize)]
struct PanelJson {
    grid: Vec<f64>,
    y: Vec<Vec<f64>>,
}

/// `{"grid": [...], "y": [[...], ...]}`; other keys are ignored.
pub fn read_panel_json<T: Real, R: Read>(r: R) -> Result<CurvePanel<T>> {
    let p: PanelJson = serde_json::from_reader(r)
        .map_err(|e| Error::invalid(format!("panel JSON: {e}")))?;
    let conv = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    let rows = p.y.into_iter().map(conv).collect();
    panel_from_rows(&conv(p.grid), rows)
}

/// Reads a `.json` panel by extension, CSV otherwise.
pub fn load_panel<T: Real>(path: &Path) -> Result<CurvePanel<T>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        return read_panel_json(open_file(path)?);
    }
    read_panel_csv(open_file(path)?).map_err(|e| match e {
        Error::Csv(c) if c.is_io_error() => io_err(path, std::io::Error::other(c.to_string())),
        other => other,
    })
}

/// `m x m` matrix, row `j` holds `phi_1(t_j), ..., phi_m(t_j)`.
pub fn write_basis_csv<T: Real>(w: &mut dyn Write, basis: &BasisMatrix<T>) -> Result<()> {
    let mut out = csv_writer(w);
    for row in basis.values().rows() {
        out.write_record(row.iter().map(|&v| num(v)))?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

/// `k,mu_hat,S_k,r_hat,active`, with 1-based `k`.
pub fn write_coefficients_csv<T: Real>(
    w: &mut dyn Write,
    stats: &CoefficientStats<T>,
    estimate: &MeanEstimate<T>,
) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["k", "mu_hat", "S_k", "r_hat", "active"])?;
    for k in 0..stats.m() {
        out.write_record([
            (k + 1).to_string(),
            num(stats.mu_hat()[k]),
            num(stats.s_k()[k]),
            num(stats.r_hat()[k]),
            u8::from(estimate.active[k]).to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

/// `j,t_j,f_hat`, with 1-based `j`.
pub fn write_estimate_csv<T: Real>(w: &mut dyn Write, grid: &Grid<T>, estimate: &MeanEstimate<T>) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["j", "t_j", "f_hat"])?;
    for (j, (&t, &f)) in grid.points().iter().zip(&estimate.values).enumerate() {
        out.write_record([(j + 1).to_string(), num(t), num(f)])?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

/// `j,t_j,center,lower,upper`.
pub fn write_band_csv<T: Real>(w: &mut dyn Write, grid: &Grid<T>, band: &ConfidenceBand<T>) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["j", "t_j", "center", "lower", "upper"])?;
    let (lo, hi) = (band.lower(), band.upper());
    for j in 0..band.m() {
        out.write_record([
            (j + 1).to_string(),
            num(grid.points()[j]),
            num(band.center()[j]),
            num(lo[j]),
            num(hi[j]),
        ])?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

/// One row per estimator, band and oracle check.
pub fn write_bench_csv<T: Real>(w: &mut dyn Write, report: &BenchReport<T>) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["row", "name", "sqrt_emse", "sqrt_medmse", "coverage", "mean_width", "pass_rate"])?;
    for e in &report.estimators {
        out.write_record([
            "estimator".to_string(),
            e.label.clone(),
            num(e.sqrt_emse),
            num(e.sqrt_medmse),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    for b in &report.bands {
        out.write_record([
            "band".to_string(),
            b.kind.to_string(),
            String::new(),
            String::new(),
            num(b.coverage),
            num(b.mean_width),
            String::new(),
        ])?;
    }
    for (tag, rate) in &report.oracle_pass_rates {
        out.write_record([
            "oracle".to_string(),
            tag.clone(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            num(*rate),
        ])?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn write_json<S: Serialize + ?Sized>(w: &mut dyn Write, value: &S) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    w.write_all(b"\n").map_err(|e| Error::Io {
        path: "<json output>".into(),
        source: e,
    })
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let file = open_file(path)?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| {
        if e.is_io() {
            io_err(path, std::io::Error::other(e.to_string()))
        } else {
            Error::invalid(format!("{}: {e}", path.display()))
        }
    })
}

/// Sidecar recording how an artifact was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// `<dir>/<stem>.provenance.json`.
pub fn sidecar_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.provenance.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_basis::BasisFamily;
    use crate::process_sim::{generate_panel, PanelConfig, ProcessSpec, SignalSpec};

    fn panel() -> CurvePanel<f64> {
        generate_panel(&PanelConfig {
            n: 5,
            grid: make_grid(8).unwrap(),
            signal: SignalSpec::signal1_default(),
            process: ProcessSpec::brownian_bridge(),
            noise_sd: 0.3,
            seed: 9,
        })
        .unwrap()
    }

    #[test]
    fn panel_round_trip_is_exact() {
        let p = panel();
        let mut buf = Vec::new();
        write_panel_csv(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 6);
        let back: CurvePanel<f64> = read_panel_csv(&buf[..]).unwrap();
        assert_eq!(back.y(), p.y());
        assert_eq!(back.grid(), p.grid());
    }

    #[test]
    fn panel_rejects_bad_input() {
        assert!(read_panel_csv::<f64, _>(&b"0.25,0.75\n"[..]).is_err());
        assert!(read_panel_csv::<f64, _>(&b"0.1,0.9\n1,2\n"[..]).is_err());
        assert!(read_panel_csv::<f64, _>(&b"0.25,0.75\n1,x\n"[..]).is_err());
        assert!(read_panel_csv::<f64, _>(&b"0.25,0.75\n1,2,3\n"[..]).is_err());
        assert!(read_panel_csv::<f64, _>(&b"0.25,0.75\n1,2\n"[..]).is_ok());
    }

    #[test]
    fn basis_and_band_shapes() {
        let p = panel();
        let b = BasisFamily::Haar.build(p.grid()).unwrap();
        let mut buf = Vec::new();
        write_basis_csv(&mut buf, &b).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 8);
        assert!(text.lines().all(|l| l.split(',').count() == 8));

        let band = crate::bands::build_band(crate::bands::BandKind::ProposedHard1, &p, &b, None, 0.05, 0.0).unwrap();
        let mut buf = Vec::new();
        write_band_csv(&mut buf, p.grid(), &band).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "j,t_j,center,lower,upper");
        assert_eq!(text.lines().count(), 9);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("JSON".parse::<Format>().unwrap(), Format::Json);
        assert!("xml".parse::<Format>().is_err());
    }
}
