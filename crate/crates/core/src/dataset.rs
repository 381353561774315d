//! Sparse binary-classification data in LIBSVM text format.
//!
//! Files use 1-based feature indices; rows are stored 0-based. Labels are
//! normalized to ±1.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::rng;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseRow {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRow {
    /// Indices must be strictly increasing and values finite.
    pub fn new(indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::invalid("row indices and values differ in length"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("row indices not strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        Ok(SparseRow { indices, values })
    }

    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let (i, v) = pairs.iter().copied().unzip();
        Self::new(i, v)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a + v * v)
    }

    /// Smallest dimension that can hold this row.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i + 1)
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    /// `Σ_j values[j] · x[indices[j]]` in ascending index order, without
    /// bounds checking against a dataset dimension.
    #[inline]
    pub(crate) fn dot_unchecked(&self, x: &[f64]) -> f64 {
        self.iter().fold(0.0, |acc, (i, v)| acc + v * x[i])
    }

    /// `out += alpha · row`
    #[inline]
    pub(crate) fn axpy_into(&self, alpha: f64, out: &mut [f64]) {
        for (i, v) in self.iter() {
            out[i] += alpha * v;
        }
    }
}

/// Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    dim: usize,
}

impl Dataset {
    /// Builds a dataset from rows and ±1 labels, checking every invariant.
    pub fn new(rows: Vec<SparseRow>, labels: Vec<f64>, dim: usize) -> Result<Self> {
        let ds = Dataset { rows, labels, dim };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if self.rows.len() != self.labels.len() {
            return Err(Error::invalid(format!(
                "{} rows but {} labels",
                self.rows.len(),
                self.labels.len()
            )));
        }
        if let Some(b) = self.labels.iter().find(|&&b| b != 1.0 && b != -1.0) {
            return Err(Error::Labels(format!("label {b} is not ±1")));
        }
        for (k, row) in self.rows.iter().enumerate() {
            if row.indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("row {k}: indices not increasing")));
            }
            if row.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("row {k}: non-finite value")));
            }
            if row.min_dim() > self.dim {
                return Err(Error::invalid(format!(
                    "row {k}: index {} outside dimension {}",
                    row.min_dim() - 1,
                    self.dim
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn max_row_norm_sq(&self) -> f64 {
        self.rows.iter().map(SparseRow::norm_sq).fold(0.0, f64::max)
    }

    /// Enlarges the feature dimension. Shrinking is refused.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::invalid(format!(
                "cannot shrink dimension {} to {dim}",
                self.dim
            )));
        }
        self.dim = dim;
        Ok(self)
    }

    /// `⟨row, x⟩` with `x` checked against the dataset dimension.
    pub fn sparse_dot(&self, row: &SparseRow, x: &[f64]) -> Result<f64> {
        sparse_dot(row, x, self.dim)
    }

    /// LIBSVM text (1-based indices, shortest round-trip float formatting).
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for (row, &b) in self.rows.iter().zip(&self.labels) {
            let _ = write!(out, "{}", if b > 0.0 { "+1" } else { "-1" });
            for (i, v) in row.iter() {
                let _ = write!(out, " {}:{:?}", i + 1, v);
            }
            out.push('\n');
        }
        out
    }
}

/// `Σ_j values[j]·x[indices[j]]`, ascending index order. `x` must have the
/// dataset dimension `dim`.
pub fn sparse_dot(row: &SparseRow, x: &[f64], dim: usize) -> Result<f64> {
    check_dim(dim, x.len())?;
    if row.min_dim() > dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: row.min_dim(),
        });
    }
    Ok(row.dot_unchecked(x))
}

/// Maps two distinct raw label values to −1 (smaller) and +1 (larger).
pub fn normalize_labels(raw: &[f64]) -> Result<Vec<f64>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in raw {
        if !v.is_finite() {
            return Err(Error::Labels(format!("non-finite label {v}")));
        }
        if !distinct.contains(&v) {
            distinct.push(v);
            if distinct.len() > 2 {
                return Err(Error::Labels("more than two distinct label values".into()));
            }
        }
    }
    if distinct.len() < 2 {
        return Err(Error::Labels(format!(
            "need two distinct label values, found {}",
            distinct.len()
        )));
    }
    let hi = distinct[0].max(distinct[1]);
    Ok(raw
        .iter()
        .map(|&v| if v == hi { 1.0 } else { -1.0 })
        .collect())
}

/// Parses LIBSVM text: `<label> <idx>:<val> ...` with 1-based indices.
/// Blank lines are skipped and anything after `#` is ignored.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dim = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };

        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("bad label `{label_tok}`")))?;
        if !label.is_finite() {
            return Err(err(format!("bad label `{label_tok}`")));
        }

        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("malformed token `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("bad index in `{tok}`")))?;
            if idx == 0 {
                return Err(err("index 0 (indices are 1-based)".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(format!("non-numeric value in `{tok}`")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite value in `{tok}`")));
            }
            let idx = idx - 1;
            if indices.last().is_some_and(|&last| idx <= last) {
                return Err(err(format!("index {} not increasing", idx + 1)));
            }
            indices.push(idx);
            values.push(val);
        }
        if let Some(&last) = indices.last() {
            dim = dim.max(last + 1);
        }
        rows.push(SparseRow { indices, values });
        raw_labels.push(label);
    }

    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = normalize_labels(&raw_labels)?;
    Dataset::new(rows, labels, dim)
}

pub fn parse_libsvm_str(text: &str) -> Result<Dataset> {
    parse_libsvm(text.as_bytes())
}

pub fn load_libsvm(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm(std::io::BufReader::new(file))
}

/// Seeded stand-in for the a3a benchmark: one-hot encoded categorical
/// attributes with Zipf-skewed category frequencies, binary features, and
/// labels drawn from a logistic model. Rare categories make the logistic
/// objective ill-conditioned, like the census-derived original.
pub fn synthetic_categorical(n: usize, dim: usize, seed: u64) -> Result<Dataset> {
    if n < 2 || dim < 2 {
        return Err(Error::invalid("synthetic dataset needs n ≥ 2 and d ≥ 2"));
    }
    const CARDINALITIES: [usize; 8] = [2, 3, 4, 5, 6, 8, 10, 12];
    let mut groups = Vec::new();
    let mut start = 0;
    for &c in CARDINALITIES.iter().cycle() {
        if start >= dim {
            break;
        }
        let size = c.min(dim - start);
        groups.push(start..start + size);
        start += size;
    }

    let mut rng = rng::stream(seed, 0x5EED_DA7A);
    let weights: Vec<f64> = (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            1.5 * z
        })
        .collect::<Vec<_>>();

    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut indices = Vec::with_capacity(groups.len());
        for g in &groups {
            let len = g.len();
            let total: f64 = (0..len).map(|j| 1.0 / ((j + 1) as f64).powf(1.2)).sum();
            let mut u = rng.gen::<f64>() * total;
            let mut pick = len - 1;
            for j in 0..len {
                let p = 1.0 / ((j + 1) as f64).powf(1.2);
                if u < p {
                    pick = j;
                    break;
                }
                u -= p;
            }
            indices.push(g.start + pick);
        }
        let z: f64 = indices.iter().map(|&i| weights[i]).sum();
        let p_pos = 1.0 / (1.0 + (-z).exp());
        labels.push(if rng.gen::<f64>() < p_pos { 1.0 } else { -1.0 });
        let values = vec![1.0; indices.len()];
        rows.push(SparseRow { indices, values });
    }
    let distinct: BTreeSet<i8> = labels.iter().map(|&b| b as i8).collect();
    if distinct.len() < 2 {
        return Err(Error::Labels(
            "synthetic labels collapsed to one class".into(),
        ));
    }
    Dataset::new(rows, labels, dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_line_sample() {
        let ds = parse_libsvm_str("+1 1:0.5 3:1.0\n-1 2:2.0").unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.dim(), 3);
        assert_eq!(
            ds.row(0),
            &SparseRow::from_pairs(&[(0, 0.5), (2, 1.0)]).unwrap()
        );
        assert_eq!(ds.row(1), &SparseRow::from_pairs(&[(1, 2.0)]).unwrap());
        assert_eq!(ds.labels(), &[1.0, -1.0]);
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(matches!(parse_libsvm_str(""), Err(Error::EmptyDataset)));
        assert!(matches!(
            parse_libsvm_str("\n  \n# only comments\n"),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn comments_and_blank_lines() {
        let ds = parse_libsvm_str("# header\n1 2:1 # trailing\n\n0 1:3\n").unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.labels(), &[1.0, -1.0]);
        assert_eq!(ds.dim(), 2);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let cases = [
            ("+1 1:1\n-1 2:x", 2),
            ("+1 1:1\n-1 0:1", 2),
            ("+1 3:1 2:1\n-1 1:1", 1),
            ("+1 1:1 1:2\n-1 1:1", 1),
            ("+1 1:1\n-1 1:1\nabc 1:1", 3),
            ("+1 1:1\n-1 11", 2),
            ("+1 1:nan\n-1 1:1", 1),
        ];
        for (text, line) in cases {
            match parse_libsvm_str(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn normalize_label_cases() {
        assert_eq!(
            normalize_labels(&[0.0, 1.0, 0.0]).unwrap(),
            vec![-1.0, 1.0, -1.0]
        );
        assert_eq!(normalize_labels(&[-1.0, 1.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(
            normalize_labels(&[1.0, 2.0, 2.0, 1.0]).unwrap(),
            vec![-1.0, 1.0, 1.0, -1.0]
        );
        assert!(normalize_labels(&[1.0, 1.0]).is_err());
        assert!(normalize_labels(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn sparse_dot_cases() {
        let row = SparseRow::from_pairs(&[(0, 2.0), (2, 3.0)]).unwrap();
        assert_eq!(sparse_dot(&row, &[1.0, 5.0, -1.0], 3).unwrap(), -1.0);
        assert_eq!(
            sparse_dot(&SparseRow::default(), &[4.0, 2.0], 2).unwrap(),
            0.0
        );
        let row = SparseRow::from_pairs(&[(1, 1.0)]).unwrap();
        assert!(matches!(
            sparse_dot(&row, &[0.0, 0.0], 3),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dimension_can_grow_not_shrink() {
        let ds = parse_libsvm_str("+1 1:0.5 3:1.0\n-1 2:2.0").unwrap();
        let grown = ds.clone().with_dim(5).unwrap();
        assert_eq!(grown.dim(), 5);
        assert!(ds.with_dim(2).is_err());
    }

    #[test]
    fn synthetic_is_valid_and_seeded() {
        let a = synthetic_categorical(300, 50, 3).unwrap();
        let b = synthetic_categorical(300, 50, 3).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert_eq!(a.dim(), 50);
        assert!(a.rows().iter().all(|r| r.nnz() == 8));
        assert_ne!(a, synthetic_categorical(300, 50, 4).unwrap());
    }
}
