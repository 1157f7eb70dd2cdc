//! File formats. Node indices in every file are zero-based; node `j`
//! is the dataset column `z{j+1}`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::cv::CvPoint;
use crate::error::{Error, Result};
use crate::evaluation::RocPoint;
use crate::model::{ConfoundedDataset, SymmetricParam};
use crate::simulation::{ScaleReport, SimTruth};
use crate::solver::{FitPath, PathPoint};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes through a sibling temp file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

/// `g,z1,...,zp`, one sample per row.
pub fn write_dataset(path: &Path, data: &ConfoundedDataset) -> Result<()> {
    let mut header = vec!["g".to_string()];
    header.extend((1..=data.p()).map(|j| format!("z{j}")));
    let rows = (0..data.n()).map(|i| {
        let mut row = vec![data.g()[i].to_string()];
        row.extend((0..data.p()).map(|j| data.z()[(i, j)].to_string()));
        row
    });
    write_atomic(path, &csv_bytes(&header, rows)?)
}

pub fn read_dataset(path: &Path) -> Result<ConfoundedDataset> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let parse_err = |line: usize, message: String| Error::Parse {
        line,
        message: format!("{}: {message}", path.display()),
    };
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let p = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("g".to_string())
        .chain((1..=p).map(|j| format!("z{j}")))
        .collect();
    if p == 0 || header.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(parse_err(1, format!("header must be {}", expected.join(","))));
    }
    let mut g = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |pos| pos.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |pos| pos.line() as usize);
        if record.len() != p + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", p + 1, record.len())));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("field {} is not a number: '{field}'", c + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("field {} is not finite", c + 1)));
            }
            if c == 0 {
                g.push(v);
            } else {
                values.push(v);
            }
        }
    }
    if g.is_empty() {
        return Err(parse_err(2, "no samples".into()));
    }
    let z = DMatrix::from_row_slice(g.len(), p, &values);
    ConfoundedDataset::new(g, z)
}

/// Sparse form of a parameter: intercepts plus nonzero interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeList {
    pub p: usize,
    pub diag: Vec<f64>,
    /// `[j, k, value]` with `j < k`.
    pub edges: Vec<(usize, usize, f64)>,
}

impl EdgeList {
    pub fn from_param(theta: &SymmetricParam) -> Self {
        let idx = theta.index();
        let edges = idx
            .pairs()
            .zip(theta.offdiag())
            .filter(|(_, v)| **v != 0.0)
            .map(|((j, k), v)| (j, k, *v))
            .collect();
        EdgeList {
            p: theta.p(),
            diag: theta.diag().to_vec(),
            edges,
        }
    }

    pub fn to_param(&self) -> Result<SymmetricParam> {
        if self.diag.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: self.diag.len(),
            });
        }
        let mut theta = SymmetricParam::new(self.p, self.diag.clone(), vec![0.0; self.p * (self.p - 1) / 2])?;
        for &(j, k, v) in &self.edges {
            if j >= self.p || k >= self.p {
                return Err(Error::IndexOutOfRange {
                    index: j.max(k),
                    len: self.p,
                });
            }
            if j == k {
                return Err(Error::InvalidInput(format!("edge ({j}, {k}) is a diagonal entry")));
            }
            theta.set(j, k, v);
        }
        Ok(theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub p: usize,
    pub diag: Vec<f64>,
    pub edges: Vec<(usize, usize, f64)>,
    pub scale: ScaleReport,
}

impl TruthFile {
    pub fn from_truth(truth: &SimTruth) -> Self {
        let e = EdgeList::from_param(&truth.theta0);
        TruthFile {
            p: e.p,
            diag: e.diag,
            edges: e.edges,
            scale: truth.scale,
        }
    }

    pub fn theta0(&self) -> Result<SymmetricParam> {
        EdgeList {
            p: self.p,
            diag: self.diag.clone(),
            edges: self.edges.clone(),
        }
        .to_param()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub lambda: f64,
    pub objective: f64,
    pub kkt_violation: f64,
    pub converged: bool,
    #[serde(flatten)]
    pub estimate: EdgeList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFile {
    pub method: String,
    pub points: Vec<PathEntry>,
}

impl PathFile {
    pub fn new(method: &str, path: &FitPath) -> Self {
        PathFile {
            method: method.to_string(),
            points: path.points.iter().map(path_entry).collect(),
        }
    }

    pub fn estimates(&self) -> Result<Vec<(f64, SymmetricParam)>> {
        self.points
            .iter()
            .map(|pt| Ok((pt.lambda, pt.estimate.to_param()?)))
            .collect()
    }
}

fn path_entry(pt: &PathPoint) -> PathEntry {
    PathEntry {
        lambda: pt.lambda,
        objective: pt.objective,
        kkt_violation: pt.kkt_violation,
        converged: pt.converged,
        estimate: EdgeList::from_param(&pt.theta),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFile {
    pub method: String,
    pub lambda: f64,
    #[serde(flatten)]
    pub estimate: EdgeList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub method: String,
    pub n: usize,
    pub p: usize,
    pub n_lambda: usize,
    pub seed: u64,
    pub bandwidth: Option<f64>,
    pub ridge_enabled: bool,
    pub ridge: f64,
    pub screening_repairs: usize,
    pub all_converged: bool,
    pub selected_lambda: f64,
    pub cv_fold_failures: Vec<(usize, String)>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub auc: f64,
    pub degenerate: bool,
}

pub type Summary = BTreeMap<String, MethodSummary>;

pub fn write_cv_curve(path: &Path, curve: &[CvPoint]) -> Result<()> {
    let header = ["lambda", "mean", "sd", "folds"].map(String::from);
    let rows = curve.iter().map(|pt| {
        vec![
            pt.lambda.to_string(),
            pt.mean.to_string(),
            pt.sd.to_string(),
            pt.folds.to_string(),
        ]
    });
    write_atomic(path, &csv_bytes(&header, rows)?)
}

pub fn read_cv_curve(path: &Path) -> Result<Vec<CvPoint>> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r: std::result::Result<CvPoint, csv::Error>| {
            r.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |pos| pos.line() as usize),
                message: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}

pub fn write_roc(path: &Path, rows: &[(String, RocPoint)]) -> Result<()> {
    let header = ["method", "lambda", "fpr", "tpr"].map(String::from);
    let rows = rows.iter().map(|(m, pt)| {
        vec![
            m.clone(),
            pt.lambda.to_string(),
            pt.fpr.to_string(),
            pt.tpr.to_string(),
        ]
    });
    write_atomic(path, &csv_bytes(&header, rows)?)
}

pub fn write_dense(path: &Path, theta: &SymmetricParam) -> Result<()> {
    let m = theta.to_matrix();
    let header: Vec<String> = (1..=theta.p()).map(|j| format!("z{j}")).collect();
    let rows = (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect());
    write_atomic(path, &csv_bytes(&header, rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset() -> ConfoundedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = (0..7).map(|i| i as f64 - 3.5).collect();
        let z = DMatrix::from_fn(7, 3, |_, _| rng.random_range(-2.0..2.0));
        ConfoundedDataset::new(g, z).unwrap()
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let d = dataset();
        write_dataset(&a, &d).unwrap();
        let back = read_dataset(&a).unwrap();
        assert_eq!(back, d);
        write_dataset(&b, &back).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("bad.csv");
        fs::write(&f, "g,z1,z2\n0,1,2\n1,x,3\n").unwrap();
        match read_dataset(&f) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        fs::write(&f, "g,a,b\n0,1,2\n").unwrap();
        assert!(matches!(read_dataset(&f), Err(Error::Parse { line: 1, .. })));
        fs::write(&f, "g,z1,z2\n0,1\n").unwrap();
        assert!(matches!(read_dataset(&f), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_dataset(Path::new("/nonexistent/data.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/data.csv"));
    }

    #[test]
    fn edge_list_round_trip() {
        let mut theta = SymmetricParam::zeros(4);
        theta.set(0, 2, 0.25);
        theta.set(3, 1, -0.5);
        theta.set(2, 2, 1.5);
        let e = EdgeList::from_param(&theta);
        assert_eq!(e.edges, vec![(0, 2, 0.25), (1, 3, -0.5)]);
        assert_eq!(e.to_param().unwrap(), theta);
        let text = serde_json::to_string(&e).unwrap();
        let back: EdgeList = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);

        let bad = EdgeList { p: 2, diag: vec![0.0; 2], edges: vec![(0, 5, 1.0)] };
        assert!(bad.to_param().is_err());
    }

    #[test]
    fn cv_curve_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("cv.csv");
        let curve = vec![
            CvPoint { lambda: 0.5, mean: 1.25, sd: 0.1, folds: 10 },
            CvPoint { lambda: 0.1, mean: 1.0 / 3.0, sd: 0.0, folds: 9 },
        ];
        write_cv_curve(&f, &curve).unwrap();
        assert_eq!(read_cv_curve(&f).unwrap(), curve);
    }
}
