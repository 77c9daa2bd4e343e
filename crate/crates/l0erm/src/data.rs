//! Labeled training data.
//!
//! A [`Dataset`] holds `n` observations of a binary label, a scalar feature
//! `x1` that every classifier includes with unit coefficient, and a dense
//! `n x p` block `xt` of features subject to selection.
//!
//! On disk a dataset is a CSV file with header `y,x1,x2,...,x{p+1}`, one
//! row per observation. Column `x1` is the always-included feature and
//! columns `x2..x{p+1}` map to `xt` columns `0..p`. An optional trailing
//! `eta` column carries the conditional probability `P(Y=1|X)` for
//! generated data; readers tolerate and return it separately.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::Result;

/// An immutable training or validation sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    labels: Vec<u8>,
    x1: Vec<f64>,
    /// Row-major `n x p`.
    xt: Vec<f64>,
    n: usize,
    p: usize,
}

impl Dataset {
    /// Build a dataset from its parts, validating every invariant:
    /// labels in {0,1}, all entries finite, `n >= 1` and consistent shapes.
    pub fn new(labels: Vec<u8>, x1: Vec<f64>, xt: Vec<f64>, p: usize) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidArgument("dataset must have n >= 1".into()));
        }
        if x1.len() != n {
            return Err(Error::InvalidArgument(format!(
                "x1 has {} entries, expected {}",
                x1.len(),
                n
            )));
        }
        if xt.len() != n * p {
            return Err(Error::InvalidArgument(format!(
                "xt has {} entries, expected {}x{}",
                xt.len(),
                n,
                p
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside {{0,1}}"
            )));
        }
        if !x1.iter().all(|v| v.is_finite()) || !xt.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        Ok(Self { labels, x1, xt, n, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn x1(&self) -> &[f64] {
        &self.x1
    }

    /// Row `i` of the selectable-feature block.
    pub fn xt_row(&self, i: usize) -> &[f64] {
        &self.xt[i * self.p..(i + 1) * self.p]
    }

    /// Column `j` of the selectable-feature block, materialized.
    pub fn xt_col(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.xt[i * self.p + j]).collect()
    }

    /// Index of a column of `xt` that is constant across all rows with a
    /// nonzero value (an intercept column), if any. First match wins.
    pub fn constant_column(&self) -> Option<usize> {
        (0..self.p).find(|&j| {
            let v0 = self.xt[j];
            v0 != 0.0 && (1..self.n).all(|i| self.xt[i * self.p + j] == v0)
        })
    }

    /// Restrict to a subset of row indices (used by cross validation).
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        let x1 = rows.iter().map(|&i| self.x1[i]).collect();
        let mut xt = Vec::with_capacity(rows.len() * self.p);
        for &i in rows {
            xt.extend_from_slice(self.xt_row(i));
        }
        Self::new(labels, x1, xt, self.p)
    }

    /// Write as CSV with header `y,x1,x2,...,x{p+1}` and an optional
    /// trailing `eta` column.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P, eta: Option<&[f64]>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        let mut header = vec!["y".to_string(), "x1".to_string()];
        header.extend((2..=self.p + 1).map(|j| format!("x{j}")));
        if eta.is_some() {
            header.push("eta".to_string());
        }
        w.write_record(&header)?;
        for i in 0..self.n {
            let mut rec = vec![self.labels[i].to_string(), fmt_float(self.x1[i])];
            rec.extend(self.xt_row(i).iter().map(|&v| fmt_float(v)));
            if let Some(e) = eta {
                rec.push(fmt_float(e[i]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a CSV produced by [`Dataset::write_csv`]. Returns the dataset
    /// and the `eta` column when present.
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<(Self, Option<Vec<f64>>)> {
        let mut r = csv::Reader::from_path(path.as_ref())?;
        let headers = r.headers()?.clone();
        let cols = headers.len();
        if cols < 2 || &headers[0] != "y" || &headers[1] != "x1" {
            return Err(Error::InvalidArgument(
                "expected CSV header starting with y,x1".into(),
            ));
        }
        let has_eta = &headers[cols - 1] == "eta";
        let p = cols - 2 - usize::from(has_eta);

        let mut labels = Vec::new();
        let mut x1 = Vec::new();
        let mut xt = Vec::new();
        let mut eta = Vec::new();
        for record in r.records() {
            let record = record?;
            if record.len() != cols {
                return Err(Error::InvalidArgument(format!(
                    "row with {} fields, expected {}",
                    record.len(),
                    cols
                )));
            }
            labels.push(parse_label(&record[0])?);
            x1.push(parse_float(&record[1])?);
            for j in 0..p {
                xt.push(parse_float(&record[2 + j])?);
            }
            if has_eta {
                eta.push(parse_float(&record[cols - 1])?);
            }
        }
        let ds = Self::new(labels, x1, xt, p)?;
        Ok((ds, has_eta.then_some(eta)))
    }
}

/// Held-out row sets for seeded k-fold cross validation: a shuffled
/// partition of `0..n` into `folds` contiguous chunks whose sizes differ
/// by at most one. Rows within each fold are sorted ascending.
pub fn kfold(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_fold_count(n, folds)?;
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, rem) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < rem);
        let mut fold: Vec<usize> = rows[start..start + len].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += len;
    }
    Ok(out)
}

/// Like [`kfold`] but stratified by label: each class is shuffled and
/// dealt round-robin, so per-fold class counts differ by at most one.
pub fn kfold_stratified(labels: &[u8], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_fold_count(labels.len(), folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    // The deal position carries over between classes so no fold is empty.
    let mut slot = 0usize;
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            out[slot % folds].push(i);
            slot += 1;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

/// Ascending rows of `0..n` not present in `rows` (the training side of a
/// held-out fold).
pub fn complement_rows(n: usize, rows: &[usize]) -> Vec<usize> {
    let mut held = vec![false; n];
    for &i in rows {
        held[i] = true;
    }
    (0..n).filter(|&i| !held[i]).collect()
}

fn check_fold_count(n: usize, folds: usize) -> Result<()> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!(
            "fold count {folds} outside 2..={n}"
        )));
    }
    Ok(())
}

/// Shortest round-trip decimal form, stable across runs.
fn fmt_float(v: f64) -> String {
    format!("{v}")
}

fn parse_label(s: &str) -> Result<u8> {
    match s.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::InvalidArgument(format!(
            "label {other:?} outside {{0,1}}"
        ))),
    }
}

fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::InvalidArgument(format!("bad float {s:?}: {e}")))
}
