//! Dataset loaders (libsvm, dense CSV, count triplets) and seeded synthetic
//! generators.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use thiserror::Error;

use crate::linalg::{DesignMatrix, LinalgError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("parse error on line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("file contains no samples")]
    EmptyFile,
    #[error("labels {0:?} cannot be mapped to {{0, 1}}")]
    BadLabels(Vec<f64>),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid synthetic spec: {0}")]
    BadSynth(String),
}

/// How raw labels are turned into observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelPolicy {
    Raw,
    /// Map {0,1}, {−1,+1} or {1,2} onto {0,1}.
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub source: String,
    pub preprocessing: Vec<String>,
    pub m: usize,
    pub n: usize,
    pub density: f64,
    /// `(raw, mapped)` pairs when a label remap was applied.
    pub label_map: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub a: DesignMatrix,
    pub y: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(a: DesignMatrix, y: Vec<f64>, source: &str) -> Self {
        let meta = DatasetMeta {
            source: source.to_string(),
            preprocessing: Vec::new(),
            m: a.rows(),
            n: a.cols(),
            density: a.density(),
            label_map: Vec::new(),
        };
        Dataset { a, y, meta }
    }

    /// Drops zero rows and normalizes columns, recording it in `meta`.
    pub fn preprocessed(&self) -> Result<(Dataset, crate::linalg::PreprocessReport), DataError> {
        let (a, y, report) = crate::linalg::preprocess(&self.a, &self.y)?;
        let mut meta = self.meta.clone();
        meta.preprocessing.push(format!(
            "dropped {} zero rows; unit-norm columns",
            report.dropped_rows.len()
        ));
        meta.m = a.rows();
        meta.density = a.density();
        Ok((Dataset { a, y, meta }, report))
    }
}

fn read(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn map_labels(y: &mut [f64], policy: LabelPolicy) -> Result<Vec<(f64, f64)>, DataError> {
    if policy == LabelPolicy::Raw {
        return Ok(Vec::new());
    }
    let mut distinct: Vec<f64> = Vec::new();
    for &v in y.iter() {
        if !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite labels"));
    let table: Vec<(f64, f64)> = if distinct.iter().all(|v| *v == 0.0 || *v == 1.0) {
        vec![(0.0, 0.0), (1.0, 1.0)]
    } else if distinct.iter().all(|v| *v == -1.0 || *v == 1.0) {
        vec![(-1.0, 0.0), (1.0, 1.0)]
    } else if distinct.iter().all(|v| *v == 1.0 || *v == 2.0) {
        vec![(1.0, 0.0), (2.0, 1.0)]
    } else {
        return Err(DataError::BadLabels(distinct));
    };
    for v in y.iter_mut() {
        *v = table.iter().find(|(r, _)| r == v).expect("label in table").1;
    }
    Ok(table)
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, DataError> {
    let v: f64 = tok.parse().map_err(|_| DataError::ParseError {
        line,
        msg: format!("invalid number '{tok}'"),
    })?;
    if !v.is_finite() {
        return Err(DataError::ParseError {
            line,
            msg: format!("non-finite value '{tok}'"),
        });
    }
    Ok(v)
}

/// Parses `<label> <idx>:<val> ...` lines with 1-based feature indices.
/// `n_features` fixes the column count; otherwise the largest index is used.
pub fn parse_libsvm(
    text: &str,
    n_features: Option<usize>,
    policy: LabelPolicy,
) -> Result<Dataset, DataError> {
    let mut y = Vec::new();
    let mut entries = Vec::new();
    let mut max_col = 0usize;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let label = parse_f64(toks.next().expect("nonempty line"), line_no)?;
        let row = y.len();
        let mut last = 0usize;
        for tok in toks {
            let (idx, val) = tok.split_once(':').ok_or_else(|| DataError::ParseError {
                line: line_no,
                msg: format!("expected idx:value, got '{tok}'"),
            })?;
            let idx: usize = idx.parse().map_err(|_| DataError::ParseError {
                line: line_no,
                msg: format!("invalid index '{idx}'"),
            })?;
            if idx == 0 {
                return Err(DataError::ParseError {
                    line: line_no,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if idx <= last {
                return Err(DataError::ParseError {
                    line: line_no,
                    msg: "feature indices must increase".into(),
                });
            }
            last = idx;
            if let Some(n) = n_features {
                if idx > n {
                    return Err(DataError::ParseError {
                        line: line_no,
                        msg: format!("index {idx} exceeds {n} features"),
                    });
                }
            }
            let v = parse_f64(val, line_no)?;
            max_col = max_col.max(idx);
            if v != 0.0 {
                entries.push((row, idx - 1, v));
            }
        }
        y.push(label);
    }
    if y.is_empty() {
        return Err(DataError::EmptyFile);
    }
    let n = n_features.unwrap_or(max_col).max(1);
    let label_map = map_labels(&mut y, policy)?;
    let a = DesignMatrix::from_triplets(y.len(), n, &entries)?;
    let mut ds = Dataset::new(a, y, "libsvm");
    ds.meta.label_map = label_map;
    Ok(ds)
}

pub fn load_libsvm(
    path: impl AsRef<Path>,
    n_features: Option<usize>,
    policy: LabelPolicy,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let mut ds = parse_libsvm(&read(path)?, n_features, policy)?;
    ds.meta.source = path.display().to_string();
    Ok(ds)
}

/// Writes `y` and the nonzeros of `A` in libsvm format.
pub fn write_libsvm<W: Write>(ds: &Dataset, mut w: W) -> std::io::Result<()> {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ds.a.rows()];
    for (i, j, v) in ds.a.triplets() {
        rows[i].push((j, v));
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row.sort_by_key(|e| e.0);
        write!(w, "{}", ds.y[i])?;
        for (j, v) in row.iter() {
            write!(w, " {}:{}", j + 1, v)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Dense CSV with a header row. The column named `y` holds the observations;
/// without one, the first column does.
pub fn parse_csv(text: &str, policy: LabelPolicy) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| DataError::ParseError {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let target = headers.iter().position(|h| h == "y").unwrap_or(0);
    let width = headers.len();
    if width < 2 {
        return Err(DataError::ParseError {
            line: 1,
            msg: "need a target and at least one feature column".into(),
        });
    }
    let mut y = Vec::new();
    let mut entries = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| DataError::ParseError {
            line,
            msg: e.to_string(),
        })?;
        if rec.len() != width {
            return Err(DataError::ParseError {
                line,
                msg: format!("expected {width} fields, got {}", rec.len()),
            });
        }
        let row = y.len();
        let mut col = 0;
        for (c, field) in rec.iter().enumerate() {
            let v = parse_f64(field, line)?;
            if c == target {
                y.push(v);
            } else {
                if v != 0.0 {
                    entries.push((row, col, v));
                }
                col += 1;
            }
        }
    }
    if y.is_empty() {
        return Err(DataError::EmptyFile);
    }
    let label_map = map_labels(&mut y, policy)?;
    let a = DesignMatrix::from_triplets(y.len(), width - 1, &entries)?;
    let mut ds = Dataset::new(a, y, "csv");
    ds.meta.label_map = label_map;
    Ok(ds)
}

pub fn load_csv(path: impl AsRef<Path>, policy: LabelPolicy) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let mut ds = parse_csv(&read(path)?, policy)?;
    ds.meta.source = path.display().to_string();
    Ok(ds)
}

/// Whitespace triplets `row col value` (1-based) after a header `m n nnz`
/// describing A. Entries with `col = 0` give `y[row]`; missing ones are 0.
pub fn parse_triplets(text: &str) -> Result<Dataset, DataError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(DataError::EmptyFile)?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(DataError::ParseError {
            line: hline,
            msg: "header must be 'm n nnz'".into(),
        });
    }
    let parse_usize = |s: &str, line: usize| -> Result<usize, DataError> {
        s.parse().map_err(|_| DataError::ParseError {
            line,
            msg: format!("invalid integer '{s}'"),
        })
    };
    let m = parse_usize(dims[0], hline)?;
    let n = parse_usize(dims[1], hline)?;
    let nnz = parse_usize(dims[2], hline)?;
    if m == 0 {
        return Err(DataError::EmptyFile);
    }
    let mut y = vec![0.0; m];
    let mut entries = Vec::with_capacity(nnz);
    for (line, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(DataError::ParseError {
                line,
                msg: "expected 'row col value'".into(),
            });
        }
        let r = parse_usize(t[0], line)?;
        let c = parse_usize(t[1], line)?;
        let v = parse_f64(t[2], line)?;
        if r == 0 || r > m || c > n {
            return Err(DataError::ParseError {
                line,
                msg: format!("entry ({r}, {c}) outside {m} x {n}"),
            });
        }
        if c == 0 {
            y[r - 1] = v;
        } else {
            entries.push((r - 1, c - 1, v));
        }
    }
    if entries.len() != nnz {
        return Err(DataError::ParseError {
            line: hline,
            msg: format!("header announces {nnz} entries, found {}", entries.len()),
        });
    }
    let a = DesignMatrix::from_triplets(m, n, &entries)?;
    Ok(Dataset::new(a, y, "triplet"))
}

pub fn load_triplets(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let mut ds = parse_triplets(&read(path)?)?;
    ds.meta.source = path.display().to_string();
    Ok(ds)
}

/// Picks a loader from the file extension: `.csv`, `.tri`/`.triplet`,
/// anything else is libsvm.
pub fn load_auto(path: impl AsRef<Path>, policy: LabelPolicy) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => load_csv(path, policy),
        Some("tri") | Some("triplet") => {
            let mut ds = load_triplets(path)?;
            ds.meta.label_map = map_labels(&mut ds.y, policy)?;
            Ok(ds)
        }
        _ => load_libsvm(path, None, policy),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Standard normal design, unit-norm columns, `y = Ax + noise`.
    Gaussian,
    /// Gaussian design with labels `1{Ax + noise > 0}`.
    Binary,
    /// Poisson design and `y ~ Poisson(Ax)` with some rows forced to zero.
    /// At least one observation is positive.
    Count,
    /// Smooth non-negative correlated spectra, `y = Ax`.
    PixelMix,
}

impl std::str::FromStr for SynthKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(SynthKind::Gaussian),
            "binary" => Ok(SynthKind::Binary),
            "count" => Ok(SynthKind::Count),
            "pixel_mix" => Ok(SynthKind::PixelMix),
            other => Err(DataError::BadSynth(format!("unknown kind '{other}'"))),
        }
    }
}

/// Fraction of rows of a count dataset whose observation is forced to zero.
pub const COUNT_ZERO_FRACTION: f64 = 0.1;

/// Seeded synthetic problem; returns the dataset and the planted `x`.
pub fn synth(
    kind: SynthKind,
    m: usize,
    n: usize,
    support: usize,
    seed: u64,
) -> Result<(Dataset, Vec<f64>), DataError> {
    if m == 0 || n == 0 {
        return Err(DataError::BadSynth("m and n must be positive".into()));
    }
    if support > n {
        return Err(DataError::BadSynth(format!(
            "support {support} exceeds {n} columns"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, n, support).into_vec();
    let mut x = vec![0.0; n];
    let (a, y) = match kind {
        SynthKind::Gaussian | SynthKind::Binary => {
            let mut cols = vec![vec![0.0; m]; n];
            for col in cols.iter_mut() {
                for v in col.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for v in col.iter_mut() {
                        *v /= norm;
                    }
                }
            }
            for &j in &picks {
                let s: f64 = rng.sample(StandardNormal);
                x[j] = s.signum() * (1.0 + s.abs());
            }
            let mut z = vec![0.0; m];
            for j in 0..n {
                for i in 0..m {
                    z[i] += cols[j][i] * x[j];
                }
            }
            let noise = Normal::new(0.0, 0.1).expect("valid sigma");
            let y: Vec<f64> = z
                .iter()
                .map(|zi| {
                    let v = zi + noise.sample(&mut rng);
                    if kind == SynthKind::Binary {
                        if v > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        v
                    }
                })
                .collect();
            let entries: Vec<(usize, usize, f64)> = (0..n)
                .flat_map(|j| {
                    let col = &cols[j];
                    (0..m).map(move |i| (i, j, col[i]))
                })
                .collect();
            (DesignMatrix::from_triplets(m, n, &entries)?, y)
        }
        SynthKind::Count => {
            let pois = Poisson::new(0.3).expect("valid rate");
            let mut dense = vec![vec![0.0; n]; m];
            for row in dense.iter_mut() {
                for v in row.iter_mut() {
                    *v = pois.sample(&mut rng);
                }
                if row.iter().all(|v| *v == 0.0) {
                    let j = rng.random_range(0..n);
                    row[j] = 1.0;
                }
            }
            for &j in &picks {
                x[j] = rng.random_range(1.0..5.0);
            }
            let n_zero = ((m as f64 * COUNT_ZERO_FRACTION).round() as usize).clamp(1, m);
            let zero_rows = rand::seq::index::sample(&mut rng, m, n_zero).into_vec();
            let mut y = vec![0.0; m];
            for i in 0..m {
                let rate: f64 = dense[i].iter().zip(&x).map(|(a, b)| a * b).sum();
                y[i] = if rate > 0.0 {
                    Poisson::new(rate).expect("positive rate").sample(&mut rng)
                } else {
                    0.0
                };
            }
            for &i in &zero_rows {
                y[i] = 0.0;
            }
            // An all-zero observation makes x = 0 optimal for every λ.
            if y.iter().all(|v| *v == 0.0) {
                let i = (0..m).find(|i| !zero_rows.contains(i)).unwrap_or(0);
                y[i] = 1.0;
            }
            (DesignMatrix::from_rows(&dense)?, y)
        }
        SynthKind::PixelMix => {
            let mut dense = vec![vec![0.0; n]; m];
            for j in 0..n {
                let bumps: Vec<(f64, f64, f64)> = (0..3)
                    .map(|_| {
                        (
                            rng.random_range(0.0..1.0),
                            rng.random_range(0.05..0.2),
                            rng.random_range(0.2..1.0),
                        )
                    })
                    .collect();
                for (i, row) in dense.iter_mut().enumerate() {
                    let t = if m > 1 { i as f64 / (m - 1) as f64 } else { 0.0 };
                    let v: f64 = bumps
                        .iter()
                        .map(|(c, s, w)| w * (-(t - c) * (t - c) / (2.0 * s * s)).exp())
                        .sum();
                    row[j] = v + 0.01;
                }
            }
            for &j in &picks {
                x[j] = rng.random_range(0.5..2.0);
            }
            let y: Vec<f64> = dense
                .iter()
                .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
                .collect();
            (DesignMatrix::from_rows(&dense)?, y)
        }
    };
    let name = match kind {
        SynthKind::Gaussian => "synth:gaussian",
        SynthKind::Binary => "synth:binary",
        SynthKind::Count => "synth:count",
        SynthKind::PixelMix => "synth:pixel_mix",
    };
    Ok((Dataset::new(a, y, name), x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn libsvm_line() {
        let ds = parse_libsvm("1 1:0.5 3:2.0\n", Some(3), LabelPolicy::Raw).unwrap();
        assert_eq!(ds.y, vec![1.0]);
        assert_eq!(ds.a.to_rows(), vec![vec![0.5, 0.0, 2.0]]);
    }

    #[test]
    fn libsvm_label_remap() {
        let ds = parse_libsvm("-1 1:1\n+1 2:1\n", None, LabelPolicy::Binary).unwrap();
        assert_eq!(ds.y, vec![0.0, 1.0]);
        assert_eq!(ds.meta.label_map, vec![(-1.0, 0.0), (1.0, 1.0)]);
        let ds = parse_libsvm("2 1:1\n1 2:1\n", None, LabelPolicy::Binary).unwrap();
        assert_eq!(ds.y, vec![1.0, 0.0]);
        assert!(matches!(
            parse_libsvm("3 1:1\n1 2:1\n", None, LabelPolicy::Binary),
            Err(DataError::BadLabels(_))
        ));
    }

    #[test]
    fn libsvm_errors() {
        assert!(matches!(
            parse_libsvm("1 0:5\n", None, LabelPolicy::Raw),
            Err(DataError::ParseError { line: 1, .. })
        ));
        assert!(matches!(
            parse_libsvm("1 1:2\n1 2:x\n", None, LabelPolicy::Raw),
            Err(DataError::ParseError { line: 2, .. })
        ));
        assert!(matches!(
            parse_libsvm("\n\n", None, LabelPolicy::Raw),
            Err(DataError::EmptyFile)
        ));
    }

    #[test]
    fn csv_target_column() {
        let ds = parse_csv("a,y,b\n1,5,0\n0,6,2\n", LabelPolicy::Raw).unwrap();
        assert_eq!(ds.y, vec![5.0, 6.0]);
        assert_eq!(ds.a.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert!(matches!(
            parse_csv("y,a\n1,2\n3\n", LabelPolicy::Raw),
            Err(DataError::ParseError { .. })
        ));
    }

    #[test]
    fn triplet_format() {
        let ds = parse_triplets("2 3 3\n1 1 2\n2 3 1\n1 2 4\n1 0 7\n").unwrap();
        assert_eq!(ds.y, vec![7.0, 0.0]);
        assert_eq!(
            ds.a.to_rows(),
            vec![vec![2.0, 4.0, 0.0], vec![0.0, 0.0, 1.0]]
        );
        assert!(parse_triplets("2 2 2\n1 1 1\n").is_err());
    }

    #[test]
    fn synth_is_deterministic() {
        for kind in [
            SynthKind::Gaussian,
            SynthKind::Binary,
            SynthKind::Count,
            SynthKind::PixelMix,
        ] {
            let (a, xa) = synth(kind, 20, 30, 4, 7).unwrap();
            let (b, xb) = synth(kind, 20, 30, 4, 7).unwrap();
            assert_eq!(a, b);
            assert_eq!(xa, xb);
            assert_eq!(xa.iter().filter(|v| **v != 0.0).count(), 4);
            assert!(a.a.zero_rows().is_empty());
        }
    }

    #[test]
    fn count_synth_properties() {
        let (ds, _) = synth(SynthKind::Count, 50, 80, 5, 3).unwrap();
        for (_, _, v) in ds.a.triplets() {
            assert!(v >= 0.0 && v.fract() == 0.0);
        }
        assert!(ds.y.iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
        assert!(ds.y.contains(&0.0));
    }
}
