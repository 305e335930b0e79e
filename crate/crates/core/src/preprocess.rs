//! Cleaning, feature engineering and splitting.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::domain::{FieldValue, Priority, TransactionRecord};
use crate::error::{Error, PreprocessError, Result};
use crate::lexicon::Lexicon;
use crate::rng::stream_rng;

/// Replaces absent entries with the most frequent present value; ties go to
/// the lexicographically smallest value.
pub fn impute_mode<T: Clone + Ord>(column: &[Option<T>]) -> Result<Vec<T>, PreprocessError> {
    if column.is_empty() {
        return Err(PreprocessError::EmptyColumn);
    }
    let mode = column_mode(column).ok_or(PreprocessError::AllValuesMissing)?;
    Ok(column.iter().map(|v| v.clone().unwrap_or_else(|| mode.clone())).collect())
}

pub fn column_mode<T: Clone + Ord>(column: &[Option<T>]) -> Option<T> {
    let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
    for v in column.iter().flatten() {
        *counts.entry(v).or_default() += 1;
    }
    // BTreeMap iterates ascending, so the first maximum is the smallest value.
    let mut best: Option<(&T, usize)> = None;
    for (v, c) in counts {
        if best.map_or(true, |(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v.clone())
}

/// Nearest-rank quantile: the value at 1-based index ceil(p * n) of the
/// sorted column.
pub fn nearest_rank(column: &[f64], pct: f64) -> Result<f64, PreprocessError> {
    if column.is_empty() {
        return Err(PreprocessError::EmptyColumn);
    }
    if !(pct > 0.0 && pct < 1.0) {
        return Err(PreprocessError::InvalidQuantile(pct));
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((pct * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

pub fn cap_outliers(column: &[f64], pct: f64) -> Result<Vec<f64>, PreprocessError> {
    let cap = nearest_rank(column, pct)?;
    Ok(column.iter().map(|&v| if v > cap { cap } else { v }).collect())
}

/// Pearson correlation; zero-variance inputs give 0.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "pearson needs equal-length columns");
    let n = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Column::Numeric(_) => "numeric",
            Column::Categorical(_) => "categorical",
        }
    }

    /// Population variance; a categorical column counts as the total
    /// variance of its one-hot encoding, `1 - sum(p_level^2)`.
    fn spread(&self) -> f64 {
        match self {
            Column::Numeric(v) => {
                let n = v.len().max(1) as f64;
                let m = v.iter().sum::<f64>() / n;
                v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
            }
            Column::Categorical(v) => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for level in v {
                    *counts.entry(level.as_str()).or_insert(0) += 1;
                }
                let n = v.len().max(1) as f64;
                1.0 - counts.values().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub column_names: Vec<String>,
    pub columns: Vec<Column>,
    pub row_count: usize,
}

impl FeatureMatrix {
    pub fn new(named: Vec<(String, Column)>) -> FeatureMatrix {
        let row_count = named.first().map_or(0, |(_, c)| c.len());
        assert!(named.iter().all(|(_, c)| c.len() == row_count), "columns must share row count");
        let mut seen = std::collections::HashSet::new();
        assert!(named.iter().all(|(n, _)| seen.insert(n.clone())), "column names must be unique");
        let (column_names, columns) = named.into_iter().unzip();
        FeatureMatrix { column_names, columns, row_count }
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.column_names.iter().position(|n| n == name).map(|i| &self.columns[i])
    }

    fn select(&self, keep: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            column_names: keep.iter().map(|&i| self.column_names[i].clone()).collect(),
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            row_count: self.row_count,
        }
    }

    /// Numeric encoding of row `i`: numeric columns as-is, categorical
    /// columns as their level index in `levels`.
    pub fn numeric_row(&self, i: usize, levels: &CategoryLevels) -> Vec<f64> {
        self.column_names
            .iter()
            .zip(&self.columns)
            .map(|(name, c)| match c {
                Column::Numeric(v) => v[i],
                Column::Categorical(v) => levels.code(name, &v[i]),
            })
            .collect()
    }
}

/// Sorted level vocabulary per categorical column.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryLevels(pub BTreeMap<String, Vec<String>>);

impl CategoryLevels {
    pub fn fit(m: &FeatureMatrix) -> CategoryLevels {
        let mut out = BTreeMap::new();
        for (name, c) in m.column_names.iter().zip(&m.columns) {
            if let Column::Categorical(v) = c {
                let mut levels = v.clone();
                levels.sort();
                levels.dedup();
                out.insert(name.clone(), levels);
            }
        }
        CategoryLevels(out)
    }

    /// Level index, or the level count for unseen values.
    pub fn code(&self, column: &str, value: &str) -> f64 {
        match self.0.get(column) {
            Some(levels) => levels.binary_search_by(|l| l.as_str().cmp(value)).unwrap_or(levels.len()) as f64,
            None => 0.0,
        }
    }
}

/// Drops the later column of every numeric pair with |r| above the
/// threshold, scanning in column order against earlier survivors only.
pub fn prune_correlated(m: &FeatureMatrix, r_threshold: f64) -> (FeatureMatrix, Vec<String>) {
    let mut kept: Vec<usize> = Vec::new();
    let mut removed = Vec::new();
    for (i, col) in m.columns.iter().enumerate() {
        let Column::Numeric(x) = col else {
            kept.push(i);
            continue;
        };
        let correlated = kept.iter().any(|&j| match &m.columns[j] {
            Column::Numeric(y) => pearson(x, y).abs() > r_threshold,
            Column::Categorical(_) => false,
        });
        if correlated {
            removed.push(m.column_names[i].clone());
        } else {
            kept.push(i);
        }
    }
    (m.select(&kept), removed)
}

/// Keeps the top `k` columns by spread (descending), name ascending on ties,
/// then restores original column order.
pub fn select_key_features(m: &FeatureMatrix, k: usize) -> FeatureMatrix {
    let mut ranked: Vec<(usize, f64)> = m.columns.iter().map(Column::spread).enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| m.column_names[a.0].cmp(&m.column_names[b.0])));
    let mut keep: Vec<usize> = ranked.into_iter().take(k).map(|(i, _)| i).collect();
    keep.sort_unstable();
    m.select(&keep)
}

pub const EFFICIENCY_MAX: f64 = 2.0;

pub fn efficiency_score(planned_minutes: f64, actual_minutes: f64) -> Result<f64, PreprocessError> {
    if !(actual_minutes > 0.0) {
        return Err(PreprocessError::NonPositiveActual(actual_minutes));
    }
    Ok((planned_minutes / actual_minutes).clamp(0.0, EFFICIENCY_MAX))
}

pub const ROLLING_WINDOW_MINUTES: i64 = 10;

/// Inter-arrival gaps and the number of arrivals in the trailing 10-minute
/// window (inclusive of the record itself).
pub fn temporal_features(timestamps: &[i64]) -> Result<(Vec<i64>, Vec<usize>), PreprocessError> {
    if let Some(pos) = timestamps.windows(2).position(|w| w[1] < w[0]) {
        return Err(PreprocessError::UnsortedInput(pos + 1));
    }
    let gaps = timestamps
        .iter()
        .enumerate()
        .map(|(i, &t)| if i == 0 { 0 } else { t - timestamps[i - 1] })
        .collect();
    let mut counts = Vec::with_capacity(timestamps.len());
    let mut lo = 0;
    for (i, &t) in timestamps.iter().enumerate() {
        while timestamps[lo] <= t - ROLLING_WINDOW_MINUTES {
            lo += 1;
        }
        counts.push(i + 1 - lo);
    }
    Ok((gaps, counts))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl SplitSpec {
    /// Training indices outside fold `k`.
    pub fn fold_train(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> =
            self.folds.iter().enumerate().filter(|(i, _)| *i != k).flat_map(|(_, f)| f.iter().copied()).collect();
        out.sort_unstable();
        out
    }
}

/// Seeded stratified train/test split with k folds over the training part.
/// Positives and negatives are shuffled separately and dealt out in
/// proportion, so every part's positive count is within one of its share.
pub fn split(labels: &[bool], train_frac: f64, k: usize, seed: u64) -> Result<SplitSpec, PreprocessError> {
    let n = labels.len();
    if n < k || k == 0 {
        return Err(PreprocessError::TooFewRows { needed: k.max(1), got: n });
    }
    let mut rng = stream_rng(seed, "split");
    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let n_train = ((n as f64) * train_frac).round() as usize;
    let pos_train = ((pos.len() as f64) * train_frac).round() as usize;
    let pos_train = pos_train.min(n_train).max(n_train.saturating_sub(neg.len()));
    let neg_train = n_train - pos_train;

    let mut train: Vec<usize> = pos[..pos_train].iter().chain(&neg[..neg_train]).copied().collect();
    let mut test: Vec<usize> = pos[pos_train..].iter().chain(&neg[neg_train..]).copied().collect();

    // Deal folds class by class, continuing the round-robin across classes
    // so fold sizes differ by at most one.
    let mut folds = vec![Vec::new(); k];
    for (slot, &i) in pos[..pos_train].iter().chain(&neg[..neg_train]).enumerate() {
        folds[slot % k].push(i);
    }
    train.sort_unstable();
    test.sort_unstable();
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(SplitSpec { train_indices: train, test_indices: test, folds, seed })
}

// ---------------------------------------------------------------------------
// Dataset-level preprocessing

/// Statistics fitted on the dataset and reused when encoding states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub priority_mode: Priority,
    pub quantity_cap: f64,
    pub planned_p99: f64,
    pub imputed_records: Vec<u64>,
    pub removed_columns: Vec<String>,
    pub key_features: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    pub cap_pct: f64,
    pub r_threshold: f64,
    pub key_feature_count: usize,
    pub normalize_language: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions { cap_pct: 0.99, r_threshold: 0.8, key_feature_count: 100, normalize_language: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    /// Records with priorities imputed and quantities capped.
    pub records: Vec<TransactionRecord>,
    /// Record-level key features after pruning and ranking.
    pub features: FeatureMatrix,
    pub levels: CategoryLevels,
    pub stats: PreprocessStats,
    pub options: PreprocessOptions,
}

/// Priority as the encoder sees it: the surface token, normalized through the
/// lexicon when enabled. Tokens outside the English vocabulary fall back to
/// the Normal bucket.
pub fn observed_priority(token: Option<&str>, normalize: bool, lexicon: &Lexicon) -> Option<Priority> {
    let token = token?;
    let canonical = if normalize { lexicon.normalize(token) } else { token };
    Some(Priority::from_token(canonical).unwrap_or(Priority::Normal))
}

fn record_feature_columns(records: &[TransactionRecord], normalize: bool) -> Result<FeatureMatrix, PreprocessError> {
    let lexicon = Lexicon::shipped();
    let timestamps: Vec<i64> = records.iter().map(|r| r.timestamp).collect();
    let (gaps, rolling) = temporal_features(&timestamps)?;
    let mut named: Vec<(String, Column)> = vec![
        ("quantity".into(), Column::Numeric(records.iter().map(|r| r.quantity as f64).collect())),
        ("planned_minutes".into(), Column::Numeric(records.iter().map(|r| r.planned_minutes).collect())),
        ("deadline_slack".into(), Column::Numeric(records.iter().map(|r| (r.deadline - r.timestamp) as f64).collect())),
        ("inter_arrival".into(), Column::Numeric(gaps.iter().map(|&g| g as f64).collect())),
        ("rolling_arrivals_10min".into(), Column::Numeric(rolling.iter().map(|&c| c as f64).collect())),
        ("burst_size".into(), Column::Numeric(records.iter().map(|r| f64::from(r.evidence.burst_size)).collect())),
        (
            "priority".into(),
            Column::Categorical(
                records
                    .iter()
                    .map(|r| {
                        let p = observed_priority(r.observable().priority_token(), normalize, lexicon);
                        p.map_or("missing", Priority::token).to_string()
                    })
                    .collect(),
            ),
        ),
        ("record_type".into(), Column::Categorical(records.iter().map(|r| format!("{:?}", r.record_type)).collect())),
        (
            "status_label".into(),
            Column::Categorical(
                records
                    .iter()
                    .map(|r| if normalize { lexicon.normalize(&r.status_label) } else { r.status_label.as_str() }.to_string())
                    .collect(),
            ),
        ),
    ];
    named.push((
        "equipment_alerts".into(),
        Column::Numeric(records.iter().map(|r| r.evidence.equipment_flags.iter().filter(|&&f| f).count() as f64).collect()),
    ));
    for (e, name) in ["conveyor_flag", "forklift_flag", "scanner_flag"].iter().enumerate() {
        named.push((
            name.to_string(),
            Column::Numeric(records.iter().map(|r| f64::from(u8::from(r.evidence.equipment_flags[e]))).collect()),
        ));
    }
    if let Some(first) = records.first() {
        for (j, (name, v)) in first.extra_fields.iter().enumerate() {
            let col = match v {
                FieldValue::Num(_) => Column::Numeric(
                    records
                        .iter()
                        .map(|r| match &r.extra_fields[j].1 {
                            FieldValue::Num(x) => *x,
                            FieldValue::Cat(_) => 0.0,
                        })
                        .collect(),
                ),
                FieldValue::Cat(_) => Column::Categorical(
                    records
                        .iter()
                        .map(|r| match &r.extra_fields[j].1 {
                            FieldValue::Cat(s) => s.clone(),
                            FieldValue::Num(x) => x.to_string(),
                        })
                        .collect(),
                ),
            };
            named.push((name.clone(), col));
        }
    }
    Ok(FeatureMatrix::new(named))
}

/// Full cleaning pass: mode imputation of priority, p99 capping of
/// quantities, correlation pruning and key-feature selection.
pub fn preprocess(records: &[TransactionRecord], opts: &PreprocessOptions) -> Result<Preprocessed, PreprocessError> {
    if records.is_empty() {
        return Err(PreprocessError::EmptyColumn);
    }
    let priorities: Vec<Option<Priority>> = records.iter().map(|r| r.priority).collect();
    let mode = column_mode(&priorities).ok_or(PreprocessError::AllValuesMissing)?;
    let imputed = impute_mode(&priorities)?;
    let quantities: Vec<f64> = records.iter().map(|r| r.quantity as f64).collect();
    let quantity_cap = nearest_rank(&quantities, opts.cap_pct)?;
    let planned: Vec<f64> = records.iter().map(|r| r.planned_minutes).collect();
    let planned_p99 = nearest_rank(&planned, opts.cap_pct)?;

    let mut imputed_records = Vec::new();
    let cleaned: Vec<TransactionRecord> = records
        .iter()
        .zip(imputed)
        .map(|(r, p)| {
            if r.priority.is_none() {
                imputed_records.push(r.record_id);
            }
            let mut out = r.clone();
            out.priority = Some(p);
            out.quantity = out.quantity.min(quantity_cap as i64);
            out
        })
        .collect();

    let full = record_feature_columns(&cleaned, opts.normalize_language)?;
    let (pruned, removed_columns) = prune_correlated(&full, opts.r_threshold);
    let features = select_key_features(&pruned, opts.key_feature_count);
    let levels = CategoryLevels::fit(&features);
    let stats = PreprocessStats {
        priority_mode: mode,
        quantity_cap,
        planned_p99,
        imputed_records,
        removed_columns,
        key_features: features.column_names.clone(),
    };
    Ok(Preprocessed { records: cleaned, features, levels, stats, options: *opts })
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    schema_version: u32,
    columns: Vec<SidecarColumn>,
    state_vector: Vec<(String, usize)>,
    stats: PreprocessStats,
    options: PreprocessOptions,
    levels: CategoryLevels,
}

#[derive(Serialize, Deserialize)]
struct SidecarColumn {
    name: String,
    kind: String,
}

pub const MATRIX_SCHEMA_VERSION: u32 = 1;

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes the matrix as CSV plus a JSON sidecar describing column types and
/// the state-vector layout.
pub fn write_matrix(p: &Preprocessed, layout: &[(String, usize)], csv_path: &Path, sidecar_path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let m = &p.features;
    let mut text = m.column_names.iter().map(|n| csv_escape(n)).collect::<Vec<_>>().join(",");
    text.push('\n');
    for i in 0..m.row_count {
        let row: Vec<String> = m
            .columns
            .iter()
            .map(|c| match c {
                Column::Numeric(v) => format!("{}", v[i]),
                Column::Categorical(v) => csv_escape(&v[i]),
            })
            .collect();
        writeln!(text, "{}", row.join(",")).unwrap();
    }
    std::fs::write(csv_path, text)?;
    let sidecar = Sidecar {
        schema_version: MATRIX_SCHEMA_VERSION,
        columns: m
            .column_names
            .iter()
            .zip(&m.columns)
            .map(|(n, c)| SidecarColumn { name: n.clone(), kind: c.kind().to_string() })
            .collect(),
        state_vector: layout.to_vec(),
        stats: p.stats.clone(),
        options: p.options,
        levels: p.levels.clone(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    std::fs::write(sidecar_path, json)?;
    Ok(())
}

/// Parts of a [`Preprocessed`] recovered from a matrix CSV and its sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub features: FeatureMatrix,
    pub levels: CategoryLevels,
    pub stats: PreprocessStats,
    pub options: PreprocessOptions,
    pub state_vector: Vec<(String, usize)>,
}

/// Reads what [`write_matrix`] wrote. A sidecar from another schema version
/// is rejected before the CSV is opened.
pub fn read_matrix(csv_path: &Path, sidecar_path: &Path) -> Result<MatrixFile> {
    for p in [csv_path, sidecar_path] {
        if !p.exists() {
            return Err(Error::MissingInput(p.display().to_string()));
        }
    }
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)?;
    let found = value.get("schema_version").and_then(serde_json::Value::as_u64).unwrap_or(0) as u32;
    if found != MATRIX_SCHEMA_VERSION {
        return Err(crate::error::ModelError::SchemaVersion { expected: MATRIX_SCHEMA_VERSION, found }.into());
    }
    let sidecar: Sidecar = serde_json::from_value(value)?;
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| Error::Format(e.to_string()))?;
    let header: Vec<String> = reader.headers().map_err(|e| Error::Format(e.to_string()))?.iter().map(String::from).collect();
    let names: Vec<&str> = sidecar.columns.iter().map(|c| c.name.as_str()).collect();
    if header != names {
        return Err(Error::Format("matrix header disagrees with sidecar".into()));
    }
    let mut columns: Vec<Column> = sidecar
        .columns
        .iter()
        .map(|c| match c.kind.as_str() {
            "numeric" => Ok(Column::Numeric(Vec::new())),
            "categorical" => Ok(Column::Categorical(Vec::new())),
            other => Err(Error::Format(format!("column `{}` has unknown kind `{other}`", c.name))),
        })
        .collect::<Result<_>>()?;
    for row in reader.records() {
        let row = row.map_err(|e| Error::Format(e.to_string()))?;
        for (col, cell) in columns.iter_mut().zip(row.iter()) {
            match col {
                Column::Numeric(v) => v.push(cell.parse().map_err(|_| Error::Format(format!("bad number `{cell}`")))?),
                Column::Categorical(v) => v.push(cell.to_string()),
            }
        }
    }
    let features = FeatureMatrix::new(header.into_iter().zip(columns).collect());
    Ok(MatrixFile {
        features,
        levels: sidecar.levels,
        stats: sidecar.stats,
        options: sidecar.options,
        state_vector: sidecar.state_vector,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn impute_examples() {
        let col = vec![Some("High"), Some("High"), Some("Low"), None];
        assert_eq!(impute_mode(&col).unwrap(), vec!["High", "High", "Low", "High"]);
        assert_eq!(impute_mode(&[Some("A"), Some("B"), None]).unwrap(), vec!["A", "B", "A"]);
        assert_eq!(impute_mode::<&str>(&[None, None]), Err(PreprocessError::AllValuesMissing));
    }

    #[test]
    fn cap_examples() {
        let mut col = vec![1.0; 99];
        col.push(1000.0);
        let capped = cap_outliers(&col, 0.99).unwrap();
        assert!(capped.iter().all(|&v| v == 1.0));
        assert_eq!(cap_outliers(&[4.0; 7], 0.99).unwrap(), vec![4.0; 7]);
        assert_eq!(cap_outliers(&[3.5], 0.99).unwrap(), vec![3.5]);
        assert_eq!(cap_outliers(&[], 0.99), Err(PreprocessError::EmptyColumn));
    }

    #[test]
    fn prune_examples() {
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        let m = FeatureMatrix::new(vec![
            ("a".into(), Column::Numeric(x.clone())),
            ("b".into(), Column::Numeric(x.clone())),
            ("c".into(), Column::Numeric(vec![2.0; 50])),
            ("d".into(), Column::Categorical(vec!["k".into(); 50])),
        ]);
        let (kept, removed) = prune_correlated(&m, 0.8);
        assert_eq!(removed, vec!["b".to_string()]);
        assert_eq!(kept.column_names, vec!["a", "c", "d"]);
    }

    #[test]
    fn independent_columns_survive() {
        let mut rng = stream_rng(99, "test-prune");
        let x: Vec<f64> = (0..1000).map(|_| rng.gen()).collect();
        let y: Vec<f64> = (0..1000).map(|_| rng.gen()).collect();
        assert!(oracle_pearson(&x, &y).abs() <= 0.8);
        let m = FeatureMatrix::new(vec![("x".into(), Column::Numeric(x)), ("y".into(), Column::Numeric(y))]);
        assert!(prune_correlated(&m, 0.8).1.is_empty());
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(efficiency_score(30.0, 30.0).unwrap(), 1.0);
        assert_eq!(efficiency_score(30.0, 60.0).unwrap(), 0.5);
        assert_eq!(efficiency_score(30.0, 10.0).unwrap(), 2.0);
        assert_eq!(efficiency_score(30.0, 0.0), Err(PreprocessError::NonPositiveActual(0.0)));
    }

    #[test]
    fn temporal_examples() {
        assert_eq!(temporal_features(&[0, 5, 7]).unwrap(), (vec![0, 5, 2], vec![1, 2, 3]));
        assert_eq!(temporal_features(&[42]).unwrap(), (vec![0], vec![1]));
        assert_eq!(temporal_features(&[0, 10, 20, 20]).unwrap().1, vec![1, 1, 1, 2]);
        assert_eq!(temporal_features(&[5, 3]), Err(PreprocessError::UnsortedInput(1)));
    }

    #[test]
    fn split_examples() {
        let labels = vec![false; 300_000];
        let s = split(&labels, 0.8, 5, 1).unwrap();
        assert_eq!((s.train_indices.len(), s.test_indices.len()), (240_000, 60_000));

        let s = split(&[false; 10], 0.8, 5, 3).unwrap();
        assert!(s.folds.iter().all(|f| (1..=2).contains(&f.len())));
        assert_eq!(split(&[false; 10], 0.8, 5, 3).unwrap(), s);
        assert_eq!(split(&[true; 3], 0.8, 5, 3), Err(PreprocessError::TooFewRows { needed: 5, got: 3 }));
    }

    #[test]
    fn key_feature_ranking() {
        let m = FeatureMatrix::new(vec![
            ("lo".into(), Column::Numeric(vec![0.0, 1.0, 0.0, 1.0])),
            ("hi".into(), Column::Numeric(vec![0.0, 10.0, 0.0, 10.0])),
            ("b_same".into(), Column::Numeric(vec![0.0, 1.0, 0.0, 1.0])),
        ]);
        assert_eq!(select_key_features(&m, 2).column_names, vec!["hi", "b_same"]);
    }

    pub(crate) fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
        // Two-pass textbook formula with separate mean, covariance and
        // variance loops.
        let n = x.len() as f64;
        let mut mx = 0.0;
        for v in x {
            mx += v;
        }
        mx /= n;
        let mut my = 0.0;
        for v in y {
            my += v;
        }
        my /= n;
        let cov: f64 = (0..x.len()).map(|i| (x[i] - mx) * (y[i] - my)).sum::<f64>() / n;
        let vx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / n;
        let vy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum::<f64>() / n;
        if vx == 0.0 || vy == 0.0 {
            0.0
        } else {
            cov / (vx.sqrt() * vy.sqrt())
        }
    }

    proptest! {
        #[test]
        fn pearson_matches_two_pass(xs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..60)) {
            let (x, y): (Vec<f64>, Vec<f64>) = xs.into_iter().unzip();
            prop_assert!((pearson(&x, &y) - oracle_pearson(&x, &y)).abs() < 1e-12);
        }

        #[test]
        fn capping_is_idempotent(col in prop::collection::vec(-1e3f64..1e3, 1..80), pct in 0.01f64..0.99) {
            let once = cap_outliers(&col, pct).unwrap();
            prop_assert_eq!(cap_outliers(&once, pct).unwrap(), once);
        }

        #[test]
        fn imputation_preserves_present(col in prop::collection::vec(prop::option::of(0u8..5), 1..50)) {
            prop_assume!(col.iter().any(Option::is_some));
            let out = impute_mode(&col).unwrap();
            prop_assert_eq!(out.len(), col.len());
            for (a, b) in col.iter().zip(&out) {
                if let Some(v) = a { prop_assert_eq!(v, b); }
            }
        }

        #[test]
        fn split_invariants(n in 5usize..400, seed in any::<u64>(), rate in 0.0f64..0.5) {
            let labels: Vec<bool> = (0..n).map(|i| (i as f64) < rate * n as f64).collect();
            let s = split(&labels, 0.8, 5, seed).unwrap();
            let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.train_indices.len(), ((n as f64) * 0.8).round() as usize);
            let mut folded: Vec<usize> = s.folds.iter().flatten().copied().collect();
            folded.sort_unstable();
            prop_assert_eq!(&folded, &s.train_indices);
            let pos_total = labels.iter().filter(|&&b| b).count() as f64;
            for f in &s.folds {
                let expected = pos_total * f.len() as f64 / n as f64;
                let got = f.iter().filter(|&&i| labels[i]).count() as f64;
                prop_assert!((got - expected).abs() <= 1.0 + 1e-9, "fold positives {} vs {}", got, expected);
            }
        }
    }
}
