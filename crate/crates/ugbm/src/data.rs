//! Columnar datasets, CSV ingestion, synthetic generators, and the
//! randomized three-way sample partitioning used by unbiased training.
//!
//! Datasets are immutable after construction and safe to share across
//! threads. Numeric columns reject NaN/Inf at ingestion; categorical
//! columns store dense integer codes with a code-to-label vocabulary
//! assigned by first appearance in file order.

use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scalar::Scalar;

/// Code used to route a categorical value no model vocabulary maps.
pub const UNSEEN_CATEGORY: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}, column `{col}`: cannot parse `{value}` as a finite number")]
    ParseError { row: usize, col: String, value: String },
    #[error("file has no data rows")]
    EmptyFile,
    #[error("partition ratios leave a required bucket empty")]
    DegenerateRatios,
    #[error("train/test split would leave one side empty")]
    DegenerateSplit,
    #[error("need at least {min} rows, got {got}")]
    TooFewRows { min: usize, got: usize },
    #[error("column `{col}` has {got} entries, expected {expected}")]
    LengthMismatch { col: String, got: usize, expected: usize },
    #[error("categorical column has duplicate vocabulary label `{0}`")]
    DuplicateLabel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Whether a feature holds real values or coded categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// A single feature column.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureColumn<S: Scalar> {
    Numeric(Vec<S>),
    Categorical { codes: Vec<u32>, vocab: Vec<String> },
}

impl<S: Scalar> FeatureColumn<S> {
    pub fn len(&self) -> usize {
        match self {
            FeatureColumn::Numeric(v) => v.len(),
            FeatureColumn::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureColumn::Numeric(_) => FeatureKind::Numeric,
            FeatureColumn::Categorical { .. } => FeatureKind::Categorical,
        }
    }

    /// Vocabulary of a categorical column, `None` for numeric.
    pub fn vocab(&self) -> Option<&[String]> {
        match self {
            FeatureColumn::Numeric(_) => None,
            FeatureColumn::Categorical { vocab, .. } => Some(vocab),
        }
    }

    fn select_rows(&self, rows: &[usize]) -> Self {
        match self {
            FeatureColumn::Numeric(v) => {
                FeatureColumn::Numeric(rows.iter().map(|&i| v[i]).collect())
            }
            FeatureColumn::Categorical { codes, vocab } => FeatureColumn::Categorical {
                codes: rows.iter().map(|&i| codes[i]).collect(),
                vocab: vocab.clone(),
            },
        }
    }
}

/// Columnar feature matrix with a real-valued target vector.
#[derive(Debug, Clone)]
pub struct Dataset<S: Scalar> {
    feature_names: Vec<String>,
    columns: Vec<FeatureColumn<S>>,
    target: Vec<S>,
}

impl<S: Scalar> Dataset<S> {
    /// Build a dataset, validating the column invariants.
    pub fn new(
        feature_names: Vec<String>,
        columns: Vec<FeatureColumn<S>>,
        target: Vec<S>,
    ) -> Result<Self, DataError> {
        assert_eq!(feature_names.len(), columns.len(), "one name per column");
        let n = target.len();
        for (name, col) in feature_names.iter().zip(&columns) {
            if col.len() != n {
                return Err(DataError::LengthMismatch {
                    col: name.clone(),
                    got: col.len(),
                    expected: n,
                });
            }
            match col {
                FeatureColumn::Numeric(values) => {
                    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
                        return Err(DataError::ParseError {
                            row: pos,
                            col: name.clone(),
                            value: format!("{}", values[pos]),
                        });
                    }
                }
                FeatureColumn::Categorical { codes, vocab } => {
                    let mut seen = HashSet::new();
                    for label in vocab {
                        if !seen.insert(label) {
                            return Err(DataError::DuplicateLabel(label.clone()));
                        }
                    }
                    if let Some(pos) = codes.iter().position(|&c| c as usize >= vocab.len()) {
                        return Err(DataError::ParseError {
                            row: pos,
                            col: name.clone(),
                            value: format!("code {}", codes[pos]),
                        });
                    }
                }
            }
        }
        Ok(Dataset {
            feature_names,
            columns,
            target,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn column(&self, feature: usize) -> &FeatureColumn<S> {
        &self.columns[feature]
    }

    pub fn columns(&self) -> &[FeatureColumn<S>] {
        &self.columns
    }

    pub fn target(&self) -> &[S] {
        &self.target
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset<S> {
        Dataset {
            feature_names: self.feature_names.clone(),
            columns: self.columns.iter().map(|c| c.select_rows(rows)).collect(),
            target: rows.iter().map(|&i| self.target[i]).collect(),
        }
    }

    /// New dataset keeping only the given features, in the given order.
    pub fn select_features(&self, keep: &[usize]) -> Dataset<S> {
        Dataset {
            feature_names: keep.iter().map(|&j| self.feature_names[j].clone()).collect(),
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            target: self.target.clone(),
        }
    }
}

fn parse_numeric_cell<S: Scalar>(raw: &str, row: usize, col: &str) -> Result<S, DataError> {
    let trimmed = raw.trim();
    let parsed: f64 = trimmed.parse().map_err(|_| DataError::ParseError {
        row,
        col: col.to_string(),
        value: raw.to_string(),
    })?;
    if !parsed.is_finite() {
        return Err(DataError::ParseError {
            row,
            col: col.to_string(),
            value: raw.to_string(),
        });
    }
    Ok(S::cast(parsed))
}

enum RawColumn<S> {
    Numeric(Vec<S>),
    Categorical { codes: Vec<u32>, vocab: Vec<String> },
}

impl<S> RawColumn<S> {
    fn push_category(codes: &mut Vec<u32>, vocab: &mut Vec<String>, label: &str) {
        match vocab.iter().position(|v| v == label) {
            Some(code) => codes.push(code as u32),
            None => {
                codes.push(vocab.len() as u32);
                vocab.push(label.to_string());
            }
        }
    }
}

/// Header names, parsed columns, and row count of one CSV read.
type RawTable<S> = (Vec<String>, Vec<RawColumn<S>>, usize);

fn read_columns<S: Scalar>(
    path: &Path,
    categorical_columns: &HashSet<String>,
) -> Result<RawTable<S>, DataError> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(DataError::EmptyFile);
    }
    for name in categorical_columns {
        if !headers.iter().any(|h| h == name) {
            return Err(DataError::MissingColumn(name.clone()));
        }
    }

    let mut columns: Vec<RawColumn<S>> = headers
        .iter()
        .map(|name| {
            if categorical_columns.contains(name) {
                RawColumn::Categorical {
                    codes: Vec::new(),
                    vocab: Vec::new(),
                }
            } else {
                RawColumn::Numeric(Vec::new())
            }
        })
        .collect();

    let mut n_rows = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        for (col_idx, cell) in record.iter().enumerate() {
            if col_idx >= columns.len() {
                continue;
            }
            match &mut columns[col_idx] {
                RawColumn::Numeric(values) => {
                    values.push(parse_numeric_cell(cell, row_idx, &headers[col_idx])?)
                }
                RawColumn::Categorical { codes, vocab } => {
                    RawColumn::<S>::push_category(codes, vocab, cell.trim())
                }
            }
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(DataError::EmptyFile);
    }
    Ok((headers, columns, n_rows))
}

/// Load a CSV with a header row into a [`Dataset`].
///
/// The target column is removed from the feature set and must parse as
/// numeric. Columns named in `categorical_columns` are coded by first
/// appearance; every other column must parse as a finite real with `.`
/// as decimal separator.
pub fn load_csv<S: Scalar>(
    path: impl AsRef<Path>,
    target_column: &str,
    categorical_columns: &HashSet<String>,
) -> Result<Dataset<S>, DataError> {
    let path = path.as_ref();
    // The target is always read numerically, even if listed as categorical.
    let mut effective_cats = categorical_columns.clone();
    effective_cats.remove(target_column);
    let (headers, mut columns, _) = read_columns::<S>(path, &effective_cats)?;
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| DataError::MissingColumn(target_column.to_string()))?;

    let target = match columns.remove(target_idx) {
        RawColumn::Numeric(values) => values,
        RawColumn::Categorical { .. } => unreachable!("target removed from categorical set"),
    };

    let mut names = headers;
    names.remove(target_idx);
    let columns = columns
        .into_iter()
        .map(|c| match c {
            RawColumn::Numeric(v) => FeatureColumn::Numeric(v),
            RawColumn::Categorical { codes, vocab } => FeatureColumn::Categorical { codes, vocab },
        })
        .collect();
    Dataset::new(names, columns, target)
}

/// Load a CSV that has no usable target column (prediction inputs).
///
/// The target vector is filled with zeros. `keep` restricts and orders the
/// feature columns; columns not listed are ignored.
pub fn load_csv_unlabeled<S: Scalar>(
    path: impl AsRef<Path>,
    keep: &[String],
    categorical_columns: &HashSet<String>,
) -> Result<Dataset<S>, DataError> {
    let (headers, mut columns, n_rows) = read_columns::<S>(path.as_ref(), categorical_columns)?;
    let mut out_names = Vec::with_capacity(keep.len());
    let mut out_cols = Vec::with_capacity(keep.len());
    for name in keep {
        let idx = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.clone()))?;
        // Order follows `keep`, so pull columns out by index without draining.
        let col = std::mem::replace(&mut columns[idx], RawColumn::Numeric(Vec::new()));
        out_names.push(name.clone());
        out_cols.push(match col {
            RawColumn::Numeric(v) => FeatureColumn::Numeric(v),
            RawColumn::Categorical { codes, vocab } => FeatureColumn::Categorical { codes, vocab },
        });
    }
    Dataset::new(out_names, out_cols, vec![S::zero(); n_rows])
}

/// Sample bucket labels for the three-way split used by unbiased training.
///
/// `SubTrain` picks each feature's best threshold, `Val1` picks the feature,
/// `Val2` gates leaf-wise early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bucket {
    SubTrain,
    Val1,
    Val2,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::SubTrain, Bucket::Val1, Bucket::Val2];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Bucket::SubTrain => 0,
            Bucket::Val1 => 1,
            Bucket::Val2 => 2,
        }
    }
}

/// Per-sample bucket assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionAssignment {
    buckets: Vec<Bucket>,
    merge_validation: bool,
}

impl PartitionAssignment {
    /// Assignment with every sample in `SubTrain` (classic mode).
    pub fn single_bucket(n_rows: usize) -> Self {
        PartitionAssignment {
            buckets: vec![Bucket::SubTrain; n_rows],
            merge_validation: true,
        }
    }

    /// Assignment with explicit bucket labels (fixtures, custom schemes).
    ///
    /// With `merge_validation` no sample may carry `Val2`.
    pub fn from_buckets(
        buckets: Vec<Bucket>,
        merge_validation: bool,
    ) -> Result<Self, DataError> {
        if merge_validation && buckets.contains(&Bucket::Val2) {
            return Err(DataError::DegenerateRatios);
        }
        Ok(PartitionAssignment {
            buckets,
            merge_validation,
        })
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    #[inline]
    pub fn bucket(&self, row: usize) -> Bucket {
        self.buckets[row]
    }

    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    pub fn merge_validation(&self) -> bool {
        self.merge_validation
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut counts = [0usize; 3];
        for b in &self.buckets {
            counts[b.index()] += 1;
        }
        counts
    }
}

/// Largest-remainder apportionment of `n` into parts proportional to `ratios`,
/// remainders tied toward lower bucket index.
fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let total: f64 = ratios.iter().sum();
    let mut sizes = [0usize; 3];
    let mut remainders = [0f64; 3];
    let mut assigned = 0usize;
    for k in 0..3 {
        let quota = n as f64 * ratios[k] / total;
        sizes[k] = quota.floor() as usize;
        remainders[k] = quota - quota.floor();
        assigned += sizes[k];
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        remainders[b]
            .partial_cmp(&remainders[a])
            .expect("finite remainders")
            .then(a.cmp(&b))
    });
    for &k in order.iter().take(n - assigned) {
        sizes[k] += 1;
    }
    sizes
}

/// Randomly divide `n_rows` samples into sub-training and validation buckets.
///
/// A uniformly random permutation is cut into contiguous blocks sized by
/// largest-remainder apportionment of `ratios`, ties broken toward
/// `SubTrain` then `Val1`. With `merge_validation` the third ratio is folded
/// into the second before allocation and no sample is labeled `Val2`.
///
/// `SubTrain` and `Val1` must receive at least one sample, as must `Val2`
/// unless merged; otherwise the ratios are degenerate.
pub fn partition(
    n_rows: usize,
    ratios: [f64; 3],
    merge_validation: bool,
    rng: &mut impl Rng,
) -> Result<PartitionAssignment, DataError> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || ratios.iter().sum::<f64>() <= 0.0 {
        return Err(DataError::DegenerateRatios);
    }
    let effective = if merge_validation {
        [ratios[0], ratios[1] + ratios[2], 0.0]
    } else {
        ratios
    };
    let sizes = apportion(n_rows, effective);
    let required = if merge_validation { 2 } else { 3 };
    if sizes.iter().take(required).any(|&s| s == 0) {
        return Err(DataError::DegenerateRatios);
    }

    let mut perm: Vec<usize> = (0..n_rows).collect();
    perm.shuffle(rng);
    let mut buckets = vec![Bucket::SubTrain; n_rows];
    for (pos, &row) in perm.iter().enumerate() {
        buckets[row] = if pos < sizes[0] {
            Bucket::SubTrain
        } else if pos < sizes[0] + sizes[1] {
            Bucket::Val1
        } else {
            Bucket::Val2
        };
    }
    Ok(PartitionAssignment {
        buckets,
        merge_validation,
    })
}

/// Synthetic three-feature dataset: a binary feature carrying the signal, a
/// six-category feature and a standard normal feature independent of it.
///
/// `y = 0.1 * x1 + eps` with `eps ~ N(0, 1)`.
pub fn synth_example1<S: Scalar>(n_rows: usize, rng: &mut impl Rng) -> Result<Dataset<S>, DataError>
where
    StandardNormal: Distribution<S>,
{
    if n_rows == 0 {
        return Err(DataError::TooFewRows { min: 1, got: 0 });
    }
    let mut x1 = Vec::with_capacity(n_rows);
    let mut x2 = Vec::with_capacity(n_rows);
    let mut x3 = Vec::with_capacity(n_rows);
    let mut y = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let bit = if rng.random::<bool>() { S::one() } else { S::zero() };
        x1.push(bit);
        x2.push(rng.random_range(0..6u32));
        x3.push(rng.sample(StandardNormal));
        let eps: S = rng.sample(StandardNormal);
        y.push(S::cast(0.1) * bit + eps);
    }
    let vocab = (0..6).map(|c| format!("c{c}")).collect();
    Dataset::new(
        vec!["X1".into(), "X2".into(), "X3".into()],
        vec![
            FeatureColumn::Numeric(x1),
            FeatureColumn::Categorical { codes: x2, vocab },
            FeatureColumn::Numeric(x3),
        ],
        y,
    )
}

/// Disjoint random row split. The test side gets `floor(fraction * n)`
/// rows clamped to `[1, n - 1]`; row order within each side follows the
/// original dataset.
pub fn train_test_split<S: Scalar>(
    dataset: &Dataset<S>,
    test_fraction: f64,
    rng: &mut impl Rng,
) -> Result<(Dataset<S>, Dataset<S>), DataError> {
    let n = dataset.n_rows();
    if n < 2 || !test_fraction.is_finite() || test_fraction <= 0.0 || test_fraction >= 1.0 {
        return Err(DataError::DegenerateSplit);
    }
    let test_n = ((test_fraction * n as f64).floor() as usize).clamp(1, n - 1);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut test_rows: Vec<usize> = perm[..test_n].to_vec();
    let mut train_rows: Vec<usize> = perm[test_n..].to_vec();
    test_rows.sort_unstable();
    train_rows.sort_unstable();
    Ok((dataset.select_rows(&train_rows), dataset.select_rows(&test_rows)))
}
