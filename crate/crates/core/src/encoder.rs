//! Numeric encoding of catalog records into training rows, the CSV exchange
//! format, min-max normalization and the seeded train/test split.
//!
//! Every operation here is a pure function of its inputs; `split` draws its
//! randomness from the seed alone.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::catalog::{AttackType, Catalog, ComponentRegistry};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("unknown component {0:?}")]
    UnknownComponent(String),
    #[error("group id must be in 1..=6, got {0}")]
    GroupIdRange(i64),
    #[error("line {line}: expected {expected} columns, got {got}")]
    ColumnCount {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: non-numeric token {token:?}")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: one-hot target must be 0/1 entries summing to 1")]
    BadOneHot { line: usize },
    #[error("line {line}: scalar target must be an integer in [1,6], got {got}")]
    BadScalarTarget { line: usize, got: f64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite network output")]
    NonFiniteOutput,
    #[error("requested {n_test} test rows from a dataset of {len}")]
    SplitTooLarge { n_test: usize, len: usize },
    #[error("row/target count mismatch: {rows} rows, {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("target width {got} does not match mode width {expected}")]
    TargetWidth { got: usize, expected: usize },
}

/// One pre-encoding training sample, as read off an attack pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub attack_id: u32,
    pub resource: String,
    pub vector: String,
    pub attack_type: AttackType,
    pub target_group: u8,
}

/// The four network inputs: attack ID, resource component ID, vector
/// component ID, attack-type value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow(pub [f64; 4]);

impl FeatureRow {
    pub fn values(&self) -> &[f64; 4] {
        &self.0
    }
}

/// How the target group is represented: one real number equal to the group
/// ID, or a 6-wide one-hot vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    Scalar,
    OneHot,
}

impl TargetMode {
    /// Number of target columns (and network outputs).
    pub fn width(self) -> usize {
        match self {
            TargetMode::Scalar => 1,
            TargetMode::OneHot => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TargetMode::Scalar => "scalar",
            TargetMode::OneHot => "onehot",
        }
    }

    pub fn parse(text: &str) -> Option<TargetMode> {
        match text {
            "scalar" => Some(TargetMode::Scalar),
            "onehot" => Some(TargetMode::OneHot),
            _ => None,
        }
    }
}

/// Encoded feature rows plus targets in one representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<FeatureRow>,
    targets: Vec<Vec<f64>>,
    mode: TargetMode,
}

impl Dataset {
    pub fn new(
        rows: Vec<FeatureRow>,
        targets: Vec<Vec<f64>>,
        mode: TargetMode,
    ) -> Result<Dataset, EncodeError> {
        if rows.len() != targets.len() {
            return Err(EncodeError::LengthMismatch {
                rows: rows.len(),
                targets: targets.len(),
            });
        }
        for target in &targets {
            if target.len() != mode.width() {
                return Err(EncodeError::TargetWidth {
                    got: target.len(),
                    expected: mode.width(),
                });
            }
        }
        Ok(Dataset {
            rows,
            targets,
            mode,
        })
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn mode(&self) -> TargetMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Per-column (min, max) used for the [-1, 1] input mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationParams {
    pub columns: [(f64, f64); 4],
}

impl NormalizationParams {
    /// Map one raw row into [-1, 1] per column; constant columns map to 0.
    pub fn apply(&self, row: &FeatureRow) -> FeatureRow {
        let mut out = [0.0; 4];
        for (i, value) in row.0.iter().enumerate() {
            let (min, max) = self.columns[i];
            out[i] = if max > min {
                2.0 * (value - min) / (max - min) - 1.0
            } else {
                0.0
            };
        }
        FeatureRow(out)
    }

    /// Inverse of `apply`; constant columns recover their single value.
    pub fn invert(&self, row: &FeatureRow) -> FeatureRow {
        let mut out = [0.0; 4];
        for (i, value) in row.0.iter().enumerate() {
            let (min, max) = self.columns[i];
            out[i] = if max > min {
                (value + 1.0) / 2.0 * (max - min) + min
            } else {
                min
            };
        }
        FeatureRow(out)
    }

    /// Serialize as `column,min,max` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, (min, max)) in self.columns.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", i, fmt_number(*min), fmt_number(*max)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<NormalizationParams, EncodeError> {
        let mut columns = [(0.0, 0.0); 4];
        let mut seen = [false; 4];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(EncodeError::ColumnCount {
                    line: line_no,
                    expected: 3,
                    got: parts.len(),
                });
            }
            let col: usize = parts[0].parse().map_err(|_| EncodeError::BadNumber {
                line: line_no,
                token: parts[0].to_string(),
            })?;
            if col >= 4 {
                return Err(EncodeError::BadNumber {
                    line: line_no,
                    token: parts[0].to_string(),
                });
            }
            let min = parse_number(parts[1], line_no)?;
            let max = parse_number(parts[2], line_no)?;
            columns[col] = (min, max);
            seen[col] = true;
        }
        if seen != [true; 4] {
            return Err(EncodeError::EmptyDataset);
        }
        Ok(NormalizationParams { columns })
    }
}

/// Expand a catalog into raw samples, one per (pattern, path, category),
/// ordered by attack ID, then path order, then group ID.
pub fn enumerate_samples(catalog: &Catalog) -> Vec<RawSample> {
    let mut patterns: Vec<_> = catalog.patterns().iter().collect();
    patterns.sort_by_key(|p| p.attack_id);
    let mut samples = Vec::new();
    for pattern in patterns {
        for path in &pattern.paths {
            for category in &pattern.categories {
                samples.push(RawSample {
                    attack_id: pattern.attack_id,
                    resource: path.resource.clone(),
                    vector: path.vector.clone(),
                    attack_type: path.attack_type,
                    target_group: category.group_id(),
                });
            }
        }
    }
    samples
}

/// Encode one raw sample into its four feature values.
pub fn encode_sample(
    raw: &RawSample,
    registry: &ComponentRegistry,
) -> Result<FeatureRow, EncodeError> {
    let resource = registry
        .lookup(&raw.resource)
        .ok_or_else(|| EncodeError::UnknownComponent(raw.resource.clone()))?;
    let vector = registry
        .lookup(&raw.vector)
        .ok_or_else(|| EncodeError::UnknownComponent(raw.vector.clone()))?;
    Ok(FeatureRow([
        raw.attack_id as f64,
        resource as f64,
        vector as f64,
        raw.attack_type.value(),
    ]))
}

/// Encode a group ID as a training target in the given mode.
pub fn encode_target(group_id: u8, mode: TargetMode) -> Result<Vec<f64>, EncodeError> {
    if !(1..=6).contains(&group_id) {
        return Err(EncodeError::GroupIdRange(group_id as i64));
    }
    Ok(match mode {
        TargetMode::Scalar => vec![group_id as f64],
        TargetMode::OneHot => {
            let mut target = vec![0.0; 6];
            target[(group_id - 1) as usize] = 1.0;
            target
        }
    })
}

/// Decode a raw network output back to a group ID.
///
/// Scalar: round to nearest (halves away from zero), clamp to [1, 6].
/// One-hot: index of the maximum entry, lowest index on an exact tie.
pub fn decode_output(raw_output: &[f64], mode: TargetMode) -> Result<u8, EncodeError> {
    if raw_output.iter().any(|v| !v.is_finite()) {
        return Err(EncodeError::NonFiniteOutput);
    }
    match mode {
        TargetMode::Scalar => {
            if raw_output.len() != 1 {
                return Err(EncodeError::TargetWidth {
                    got: raw_output.len(),
                    expected: 1,
                });
            }
            Ok(raw_output[0].round().clamp(1.0, 6.0) as u8)
        }
        TargetMode::OneHot => {
            if raw_output.len() != 6 {
                return Err(EncodeError::TargetWidth {
                    got: raw_output.len(),
                    expected: 6,
                });
            }
            let mut best = 0;
            for (i, value) in raw_output.iter().enumerate().skip(1) {
                if *value > raw_output[best] {
                    best = i;
                }
            }
            Ok((best + 1) as u8)
        }
    }
}

/// Format a value the way the CSV and params writers emit it: integral
/// values without a decimal point, everything else as the shortest decimal
/// that round-trips.
pub fn fmt_number(value: f64) -> String {
    if value.fract() == 0.0 && value.abs() < 1e15 {
        format!("{}", value as i64)
    } else {
        format!("{value}")
    }
}

fn parse_number(token: &str, line: usize) -> Result<f64, EncodeError> {
    let token = token.trim();
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| EncodeError::BadNumber {
            line,
            token: token.to_string(),
        })
}

/// Serialize a dataset: one sample per line, four feature columns then the
/// target column(s), comma-separated, LF line endings, no padding.
pub fn write_csv(dataset: &Dataset, header: bool) -> String {
    let mut out = String::new();
    if header {
        out.push_str("attack_id,resource_id,vector_id,attack_type");
        match dataset.mode {
            TargetMode::Scalar => out.push_str(",group"),
            TargetMode::OneHot => {
                for i in 1..=6 {
                    out.push_str(&format!(",g{i}"));
                }
            }
        }
        out.push('\n');
    }
    for (row, target) in dataset.rows.iter().zip(&dataset.targets) {
        let mut fields: Vec<String> = row.0.iter().copied().map(fmt_number).collect();
        fields.extend(target.iter().copied().map(fmt_number));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parse a dataset written by [`write_csv`]. Surrounding whitespace per
/// field is tolerated; column count and target shape are enforced.
pub fn read_csv(text: &str, mode: TargetMode, header: bool) -> Result<Dataset, EncodeError> {
    let expected = 4 + mode.width();
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if header && idx == 0 {
            continue;
        }
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            return Err(EncodeError::ColumnCount {
                line: line_no,
                expected,
                got: fields.len(),
            });
        }
        let mut values = [0.0; 4];
        for (i, token) in fields[..4].iter().enumerate() {
            values[i] = parse_number(token, line_no)?;
        }
        let target: Vec<f64> = fields[4..]
            .iter()
            .map(|token| parse_number(token, line_no))
            .collect::<Result<_, _>>()?;
        match mode {
            TargetMode::Scalar => {
                let value = target[0];
                if value.fract() != 0.0 || !(1.0..=6.0).contains(&value) {
                    return Err(EncodeError::BadScalarTarget {
                        line: line_no,
                        got: value,
                    });
                }
            }
            TargetMode::OneHot => {
                let ones = target.iter().filter(|&&v| v == 1.0).count();
                let zeros = target.iter().filter(|&&v| v == 0.0).count();
                if ones != 1 || zeros != 5 {
                    return Err(EncodeError::BadOneHot { line: line_no });
                }
            }
        }
        rows.push(FeatureRow(values));
        targets.push(target);
    }
    Dataset::new(rows, targets, mode)
}

/// Min-max map every input column to [-1, 1]; targets are untouched. The
/// returned params reproduce the same mapping on fresh rows at inference.
pub fn normalize(dataset: &Dataset) -> Result<(Dataset, NormalizationParams), EncodeError> {
    if dataset.is_empty() {
        return Err(EncodeError::EmptyDataset);
    }
    let mut columns = [(f64::INFINITY, f64::NEG_INFINITY); 4];
    for row in &dataset.rows {
        for (i, value) in row.0.iter().enumerate() {
            columns[i].0 = columns[i].0.min(*value);
            columns[i].1 = columns[i].1.max(*value);
        }
    }
    let params = NormalizationParams { columns };
    let rows = dataset.rows.iter().map(|row| params.apply(row)).collect();
    Ok((
        Dataset {
            rows,
            targets: dataset.targets.clone(),
            mode: dataset.mode,
        },
        params,
    ))
}

/// Uniformly random disjoint partition into (train, test), deterministic per
/// seed. Order within each part follows the original dataset order.
pub fn split(dataset: &Dataset, n_test: usize, seed: u64) -> Result<(Dataset, Dataset), EncodeError> {
    if n_test > dataset.len() {
        return Err(EncodeError::SplitTooLarge {
            n_test,
            len: dataset.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates: the first n_test entries of `indices` are a
    // uniform sample without replacement.
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    for i in 0..n_test {
        let j = rng.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    let mut in_test = vec![false; dataset.len()];
    for &idx in &indices[..n_test] {
        in_test[idx] = true;
    }
    let take = |want_test: bool| -> Dataset {
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for (i, flag) in in_test.iter().enumerate() {
            if *flag == want_test {
                rows.push(dataset.rows[i]);
                targets.push(dataset.targets[i].clone());
            }
        }
        Dataset {
            rows,
            targets,
            mode: dataset.mode,
        }
    };
    let test = take(true);
    let train = take(false);
    Ok((train, test))
}

/// Convenience: enumerate, encode and target-encode a whole catalog.
pub fn dataset_from_catalog(catalog: &Catalog, mode: TargetMode) -> Result<Dataset, EncodeError> {
    let samples = enumerate_samples(catalog);
    let mut rows = Vec::with_capacity(samples.len());
    let mut targets = Vec::with_capacity(samples.len());
    for sample in &samples {
        rows.push(encode_sample(sample, catalog.registry())?);
        targets.push(encode_target(sample.target_group, mode)?);
    }
    Dataset::new(rows, targets, mode)
}

/// Group-ID histogram of a dataset's targets, indexed by `group_id - 1`.
pub fn target_histogram(dataset: &Dataset) -> [usize; 6] {
    let mut counts = [0usize; 6];
    for target in &dataset.targets {
        let group = match dataset.mode {
            TargetMode::Scalar => target[0] as usize,
            TargetMode::OneHot => target.iter().position(|&v| v == 1.0).unwrap_or(0) + 1,
        };
        if (1..=6).contains(&group) {
            counts[group - 1] += 1;
        }
    }
    counts
}

/// Expected group ID of one stored target.
pub fn target_group(target: &[f64], mode: TargetMode) -> u8 {
    match mode {
        TargetMode::Scalar => target[0] as u8,
        TargetMode::OneHot => (target.iter().position(|&v| v == 1.0).unwrap_or(0) + 1) as u8,
    }
}
