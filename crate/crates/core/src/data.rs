//! Datasets for linear models: LibSVM I/O, row normalization, worker
//! sharding, preconditioning subsamples and synthetic generators.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-compressed examples `(a_i, b_i)` with a cache of `‖a_i‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    n_features: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
    row_norms: Vec<f64>,
}

/// A borrowed sparse row.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl Row<'_> {
    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&j, &v)| v * x[j])
            .sum()
    }

    /// `out += alpha * a_i`
    #[inline]
    pub fn axpy_into(&self, alpha: f64, out: &mut [f64]) {
        for (&j, &v) in self.indices.iter().zip(self.values) {
            out[j] += alpha * v;
        }
    }
}

impl SparseDataset {
    /// Builds a dataset from per-row `(indices, values)` pairs, checking that
    /// indices are in range and strictly increasing and values are finite.
    pub fn from_rows(
        n_features: usize,
        rows: Vec<(Vec<usize>, Vec<f64>)>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::arg("labels", "one label per row required"));
        }
        let mut ds = SparseDataset {
            n_features,
            indptr: Vec::with_capacity(rows.len() + 1),
            indices: Vec::new(),
            values: Vec::new(),
            labels,
            row_norms: Vec::with_capacity(rows.len()),
        };
        ds.indptr.push(0);
        for (r, (idx, val)) in rows.into_iter().enumerate() {
            if idx.len() != val.len() {
                return Err(Error::arg(
                    "rows",
                    format!("row {r}: index/value length mismatch"),
                ));
            }
            for w in idx.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::arg(
                        "rows",
                        format!("row {r}: indices not strictly increasing"),
                    ));
                }
            }
            if let Some(&last) = idx.last() {
                if last >= n_features {
                    return Err(Error::arg(
                        "rows",
                        format!("row {r}: index {last} >= {n_features}"),
                    ));
                }
            }
            if val.iter().any(|v| !v.is_finite()) {
                return Err(Error::arg("rows", format!("row {r}: non-finite value")));
            }
            ds.indices.extend(idx);
            ds.values.extend(val);
            ds.indptr.push(ds.indices.len());
        }
        if ds.labels.iter().any(|b| !b.is_finite()) {
            return Err(Error::arg("labels", "non-finite label"));
        }
        ds.refresh_norms();
        Ok(ds)
    }

    /// Dense rows, one `Vec` per example.
    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        let sparse = rows
            .iter()
            .map(|r| {
                let (i, v): (Vec<usize>, Vec<f64>) = r
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .unzip();
                (i, v)
            })
            .collect();
        Self::from_rows(d, sparse, labels)
    }

    fn refresh_norms(&mut self) {
        self.row_norms = (0..self.n_examples())
            .map(|i| self.row(i).values.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
    }

    pub fn n_examples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn row(&self, i: usize) -> Row<'_> {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        Row {
            indices: &self.indices[s..e],
            values: &self.values[s..e],
        }
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn row_norms(&self) -> &[f64] {
        &self.row_norms
    }

    pub fn max_row_norm(&self) -> f64 {
        self.row_norms.iter().cloned().fold(0.0, f64::max)
    }

    /// Copies the given rows (in the given order) into a new dataset.
    pub fn select(&self, rows: &[usize]) -> SparseDataset {
        let mut out = SparseDataset {
            n_features: self.n_features,
            indptr: Vec::with_capacity(rows.len() + 1),
            indices: Vec::new(),
            values: Vec::new(),
            labels: Vec::with_capacity(rows.len()),
            row_norms: Vec::with_capacity(rows.len()),
        };
        out.indptr.push(0);
        for &i in rows {
            let r = self.row(i);
            out.indices.extend_from_slice(r.indices);
            out.values.extend_from_slice(r.values);
            out.indptr.push(out.indices.len());
            out.labels.push(self.labels[i]);
            out.row_norms.push(self.row_norms[i]);
        }
        out
    }

    /// True when every label is −1 or +1.
    pub fn has_binary_labels(&self) -> bool {
        self.labels.iter().all(|&b| b == 1.0 || b == -1.0)
    }

    /// Row `i` as a dense vector.
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        self.row(i).axpy_into(1.0, &mut out);
        out
    }
}

/// Parses LibSVM text (`label idx:val ...`, 1-based strictly increasing
/// indices). `n_features` overrides the inferred dimension when larger.
pub fn parse_libsvm<R: BufRead>(input: R, n_features: Option<usize>) -> Result<SparseDataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_idx = 0usize;
    for (lineno, line) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { line: lineno, msg };
        let mut toks = content.split_whitespace();
        let label_tok = toks.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| perr(format!("bad label `{label_tok}`")))?;
        if !label.is_finite() {
            return Err(perr(format!("non-finite label `{label_tok}`")));
        }
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for tok in toks {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| perr(format!("expected idx:val, got `{tok}`")))?;
            let i: usize = i
                .parse()
                .map_err(|_| perr(format!("bad feature index `{i}`")))?;
            if i == 0 {
                return Err(perr("feature indices are 1-based".into()));
            }
            let v: f64 = v.parse().map_err(|_| perr(format!("bad value `{v}`")))?;
            if !v.is_finite() {
                return Err(perr(format!("non-finite value `{tok}`")));
            }
            if let Some(&prev) = idx.last() {
                if i - 1 <= prev {
                    return Err(perr(format!("indices not strictly increasing at `{tok}`")));
                }
            }
            idx.push(i - 1);
            val.push(v);
            max_idx = max_idx.max(i);
        }
        rows.push((idx, val));
        labels.push(label);
    }
    let all_01 = labels.iter().all(|&b| b == 0.0 || b == 1.0);
    if all_01 {
        for b in labels.iter_mut() {
            if *b == 0.0 {
                *b = -1.0;
            }
        }
    }
    let d = n_features.map_or(max_idx, |n| n.max(max_idx));
    SparseDataset::from_rows(d, rows, labels)
}

/// Writes LibSVM text; floats use the shortest round-tripping representation.
pub fn write_libsvm<W: Write>(ds: &SparseDataset, mut out: W) -> std::io::Result<()> {
    for i in 0..ds.n_examples() {
        write!(out, "{}", ds.labels[i])?;
        let r = ds.row(i);
        for (&j, &v) in r.indices.iter().zip(r.values) {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Scales every row with `‖a_i‖ > radius` down to norm `radius`.
pub fn normalize_rows(mut ds: SparseDataset, radius: f64) -> Result<SparseDataset> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::arg(
            "radius",
            format!("must be positive, got {radius}"),
        ));
    }
    for i in 0..ds.n_examples() {
        let nrm = ds.row_norms[i];
        if nrm > radius {
            let s = radius / nrm;
            let (a, b) = (ds.indptr[i], ds.indptr[i + 1]);
            ds.values[a..b].iter_mut().for_each(|v| *v *= s);
        }
    }
    ds.refresh_norms();
    Ok(ds)
}

/// Disjoint near-even split of example indices across `m` workers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardAssignment {
    pub m: usize,
    /// Each shard's indices, sorted ascending.
    pub shards: Vec<Vec<usize>>,
    pub seed: u64,
}

/// Seeded Fisher–Yates shuffle followed by a contiguous split; the first
/// `N mod m` shards receive one extra example.
pub fn partition(n_examples: usize, m: usize, seed: u64) -> Result<ShardAssignment> {
    if m == 0 || m > n_examples {
        return Err(Error::arg(
            "m",
            format!("worker count must be in 1..={n_examples}, got {m}"),
        ));
    }
    let mut perm: Vec<usize> = (0..n_examples).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n_examples / m;
    let extra = n_examples % m;
    let mut shards = Vec::with_capacity(m);
    let mut start = 0;
    for j in 0..m {
        let len = base + usize::from(j < extra);
        let mut s = perm[start..start + len].to_vec();
        s.sort_unstable();
        shards.push(s);
        start += len;
    }
    Ok(ShardAssignment { m, shards, seed })
}

/// Uniform sample without replacement used to build the server's reference
/// function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecondSample {
    pub indices: Vec<usize>,
    pub seed: u64,
}

pub fn subsample(n_examples: usize, n: usize, seed: u64) -> Result<PrecondSample> {
    if n == 0 || n > n_examples {
        return Err(Error::arg(
            "n",
            format!("sample size must be in 1..={n_examples}, got {n}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = rand::seq::index::sample(&mut rng, n_examples, n).into_vec();
    Ok(PrecondSample { indices, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    Logistic,
    Squared,
}

fn check_synthetic(d: usize, n_examples: usize, decay: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::arg("d", "must be at least 1"));
    }
    if n_examples == 0 {
        return Err(Error::arg("N", "must be at least 1"));
    }
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::arg(
            "decay",
            format!("must lie in (0, 1], got {decay}"),
        ));
    }
    Ok(())
}

/// Clips `values` to unit norm and draws the label from the planted model.
fn finish_row(
    values: &mut [f64],
    margin_of: impl Fn(&[f64]) -> f64,
    kind: SyntheticKind,
    noise: &Normal<f64>,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let nrm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm > 1.0 {
        values.iter_mut().for_each(|v| *v /= nrm);
    }
    let margin = margin_of(values);
    match kind {
        SyntheticKind::Logistic => {
            let sign = if margin >= 0.0 { 1.0 } else { -1.0 };
            let flip: f64 = rng.gen();
            if flip < 0.05 {
                -sign
            } else {
                sign
            }
        }
        SyntheticKind::Squared => margin + noise.sample(rng),
    }
}

/// Gaussian design with per-coordinate standard deviation `decay^j`, rows
/// clipped to unit norm, labels from a planted model (5% flipped signs for
/// logistic, additive N(0, 0.1²) noise for squared).
pub fn make_synthetic(
    d: usize,
    n_examples: usize,
    kind: SyntheticKind,
    decay: f64,
    seed: u64,
) -> Result<SparseDataset> {
    check_synthetic(d, n_examples, decay)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let stds: Vec<f64> = (0..d).map(|j| decay.powi(j as i32)).collect();
    let noise = Normal::new(0.0, 0.1).expect("valid std");
    let mut rows = Vec::with_capacity(n_examples);
    let mut labels = Vec::with_capacity(n_examples);
    for _ in 0..n_examples {
        let mut a: Vec<f64> = stds
            .iter()
            .map(|s| s * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let margin = |a: &[f64]| a.iter().zip(&planted).map(|(x, w)| x * w).sum::<f64>();
        let b = finish_row(&mut a, margin, kind, &noise, &mut rng);
        rows.push(((0..d).collect(), a));
        labels.push(b);
    }
    SparseDataset::from_rows(d, rows, labels)
}

/// Sparse design in the style of bag-of-words data: coordinate `j` is
/// present with probability `decay^j` and standard normal when present.
/// Rows are clipped to unit norm; labels as in [`make_synthetic`]. Rare
/// coordinates are what a small preconditioning sample fails to capture.
pub fn make_sparse_synthetic(
    d: usize,
    n_examples: usize,
    kind: SyntheticKind,
    decay: f64,
    seed: u64,
) -> Result<SparseDataset> {
    check_synthetic(d, n_examples, decay)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let probs: Vec<f64> = (0..d).map(|j| decay.powi(j as i32)).collect();
    let noise = Normal::new(0.0, 0.1).expect("valid std");
    let mut rows = Vec::with_capacity(n_examples);
    let mut labels = Vec::with_capacity(n_examples);
    for _ in 0..n_examples {
        let mut idx = Vec::new();
        let mut vals = Vec::new();
        for (j, &p) in probs.iter().enumerate() {
            let u: f64 = rng.gen();
            if u < p {
                idx.push(j);
                vals.push(<StandardNormal as Distribution<f64>>::sample(
                    &StandardNormal,
                    &mut rng,
                ));
            }
        }
        let margin = |a: &[f64]| idx.iter().zip(a).map(|(&j, x)| x * planted[j]).sum::<f64>();
        let b = finish_row(&mut vals, margin, kind, &noise, &mut rng);
        rows.push((idx, vals));
        labels.push(b);
    }
    SparseDataset::from_rows(d, rows, labels)
}
