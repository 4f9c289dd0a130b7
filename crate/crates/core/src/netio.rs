//! CSV ingestion and correlation-network normalization.
//!
//! Two input shapes are supported: a square weight matrix, and a table of
//! raw observations (for example roll-call votes) from which a correlation
//! network is built. Networks are standardized so their off-diagonal
//! entries have pooled mean 0 and variance 1 with a zero diagonal, which
//! puts them on the scale of the GOE null.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// Asymmetry above which loading a matrix emits a warning.
pub const ASYMMETRY_WARN: f64 = 1e-8;

/// Members with a larger fraction of missing observations are dropped.
pub const MAX_MISSING_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedMatrix {
    pub matrix: SymmetricMatrix,
    pub labels: Option<Vec<String>>,
    pub warnings: Vec<String>,
}

pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<LoadedMatrix> {
    read_matrix_csv(std::fs::File::open(path)?)
}

/// Parses a square numeric CSV. A first row containing any non-numeric
/// field is taken as member labels. The matrix is symmetrized as
/// `(W + Wᵀ)/2`.
pub fn read_matrix_csv(reader: impl Read) -> Result<LoadedMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec?);
    }
    if records.is_empty() {
        return Err(Error::Format("matrix file is empty".into()));
    }
    let labels = if records[0].iter().any(|f| f.parse::<f64>().is_err()) {
        Some(
            records
                .remove(0)
                .iter()
                .map(str::to_string)
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let n = records.len();
    if n == 0 {
        return Err(Error::Format("matrix file has a header but no rows".into()));
    }
    let header_offset = usize::from(labels.is_some());
    let mut data = Vec::with_capacity(n * n);
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != n {
            return Err(Error::Format(format!(
                "matrix is not square: row {} has {} fields, expected {n}",
                i + 1 + header_offset,
                rec.len()
            )));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: i + 1 + header_offset,
                col: j + 1,
                value: field.to_string(),
            })?;
            data.push(v);
        }
    }
    if let Some(l) = &labels {
        if l.len() != n {
            return Err(Error::Format(format!(
                "header has {} labels for a {n}×{n} matrix",
                l.len()
            )));
        }
    }
    let (matrix, asym) = SymmetricMatrix::symmetrize(n, &data)?;
    let mut warnings = Vec::new();
    if asym > ASYMMETRY_WARN {
        warnings.push(format!(
            "input matrix was asymmetric (max |w_ij - w_ji| = {asym:e}); symmetrized as (W + Wᵀ)/2"
        ));
    }
    Ok(LoadedMatrix {
        matrix,
        labels,
        warnings,
    })
}

pub fn save_matrix_csv(
    path: impl AsRef<Path>,
    w: &SymmetricMatrix,
    labels: Option<&[String]>,
) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_matrix_csv(std::io::BufWriter::new(f), w, labels)
}

/// Writes every entry with 17 significant digits, enough to read back the
/// identical `f64`.
pub fn write_matrix_csv(
    writer: impl Write,
    w: &SymmetricMatrix,
    labels: Option<&[String]>,
) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    if let Some(labels) = labels {
        if labels.len() != w.n() {
            return Err(Error::InvalidInput(format!(
                "{} labels for a {}×{} matrix",
                labels.len(),
                w.n(),
                w.n()
            )));
        }
        wtr.write_record(labels)?;
    }
    for i in 0..w.n() {
        wtr.write_record(w.row(i).iter().map(|x| format!("{x:.16e}")))?;
    }
    wtr.flush()?;
    Ok(())
}

/// How an observation table is laid out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationFormat {
    /// Cell text that marks a missing value (compared after trimming).
    pub missing_token: String,
    /// `true` when each row is a member and each column an observation.
    pub members_as_rows: bool,
    pub has_header: bool,
    /// Column holding member labels when members are rows.
    pub label_column: Option<usize>,
}

impl Default for ObservationFormat {
    fn default() -> Self {
        ObservationFormat {
            missing_token: "NA".into(),
            members_as_rows: false,
            has_header: true,
            label_column: None,
        }
    }
}

/// Raw observations per member. `columns[k][t]` is member `k`'s value at
/// observation `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawObservations {
    pub labels: Vec<String>,
    pub columns: Vec<Vec<Option<f64>>>,
    /// Members removed for having too many missing values.
    pub dropped: Vec<String>,
}

impl RawObservations {
    pub fn members(&self) -> usize {
        self.columns.len()
    }

    pub fn observations(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

/// Encodes one cell: numbers as themselves, yea/nay-style votes as `±1`,
/// abstentions and the missing token as missing.
pub fn encode_cell(raw: &str, missing_token: &str) -> Option<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() || s == missing_token {
        return Some(None);
    }
    if let Ok(v) = s.parse::<f64>() {
        return Some(v.is_finite().then_some(v));
    }
    match s.to_ascii_lowercase().as_str() {
        "y" | "yes" | "yea" | "aye" => Some(Some(1.0)),
        "n" | "no" | "nay" => Some(Some(-1.0)),
        "?" | "abstain" | "present" | "not voting" | "nv" | "na" => Some(None),
        _ => None,
    }
}

pub fn load_observations_csv(
    path: impl AsRef<Path>,
    format: &ObservationFormat,
) -> Result<RawObservations> {
    read_observations_csv(std::fs::File::open(path)?, format)
}

/// Parses an observation table and drops members with more than half of
/// their observations missing.
pub fn read_observations_csv(
    reader: impl Read,
    format: &ObservationFormat,
) -> Result<RawObservations> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?);
    }
    let header = if format.has_header && !rows.is_empty() {
        Some(rows.remove(0))
    } else {
        None
    };
    if rows.is_empty() {
        return Err(Error::EmptyData("observation file has no data rows".into()));
    }
    let width = rows[0].len();
    let first_data_row = 1 + usize::from(header.is_some());
    let mut cells: Vec<Vec<Option<f64>>> = Vec::with_capacity(rows.len());
    let mut row_labels = Vec::with_capacity(rows.len());
    for (r, rec) in rows.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::Format(format!(
                "row {} has {} fields, expected {width}",
                r + first_data_row,
                rec.len()
            )));
        }
        let mut out = Vec::with_capacity(width);
        for (c, field) in rec.iter().enumerate() {
            if format.members_as_rows && format.label_column == Some(c) {
                row_labels.push(field.to_string());
                continue;
            }
            let v = encode_cell(field, &format.missing_token).ok_or_else(|| Error::Parse {
                row: r + first_data_row,
                col: c + 1,
                value: field.to_string(),
            })?;
            out.push(v);
        }
        cells.push(out);
    }

    let (labels, columns): (Vec<String>, Vec<Vec<Option<f64>>>) = if format.members_as_rows {
        let labels = if format.label_column.is_some() {
            row_labels
        } else {
            (1..=cells.len()).map(|i| format!("member_{i}")).collect()
        };
        (labels, cells)
    } else {
        let labels = match &header {
            Some(h) => h.iter().map(str::to_string).collect(),
            None => (1..=width).map(|i| format!("member_{i}")).collect(),
        };
        let columns = (0..width)
            .map(|c| cells.iter().map(|row| row[c]).collect())
            .collect();
        (labels, columns)
    };
    if labels.len() != columns.len() {
        return Err(Error::Format(format!(
            "{} labels for {} members",
            labels.len(),
            columns.len()
        )));
    }

    let mut kept_labels = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (label, col) in labels.into_iter().zip(columns) {
        let missing = col.iter().filter(|v| v.is_none()).count();
        if col.is_empty() || missing as f64 > MAX_MISSING_FRACTION * col.len() as f64 {
            dropped.push(label);
        } else {
            kept_labels.push(label);
            kept.push(col);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyData(format!(
            "all {} members have more than {}% missing observations",
            dropped.len(),
            MAX_MISSING_FRACTION * 100.0
        )));
    }
    Ok(RawObservations {
        labels: kept_labels,
        columns: kept,
        dropped,
    })
}

/// A standardized network with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedNetwork {
    #[serde(skip)]
    pub matrix: SymmetricMatrix,
    pub labels: Vec<String>,
    /// Processing steps applied, in order.
    pub provenance: Vec<String>,
    /// Members excluded after filtering (zero variance).
    pub excluded: Vec<String>,
}

/// Pairwise-complete Pearson correlations between members. Pairs with fewer
/// than 2 joint observations or no joint variation get correlation 0; the
/// count of such pairs is returned alongside.
pub fn pairwise_correlation(columns: &[Vec<Option<f64>>]) -> Result<(SymmetricMatrix, usize)> {
    let mut undefined = 0;
    let m = SymmetricMatrix::from_lower_fn(columns.len(), |i, j| {
        if i == j {
            return 1.0;
        }
        match pearson_complete(&columns[i], &columns[j]) {
            Some(r) => r,
            None => {
                undefined += 1;
                0.0
            }
        }
    })?;
    Ok((m, undefined))
}

fn pearson_complete(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let k = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / k;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Centres and scales the off-diagonal entries to pooled mean 0 and
/// (population) variance 1, and zeroes the diagonal.
pub fn standardize_off_diagonal(w: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let n = w.n();
    if n < 2 {
        return Err(Error::InvalidDimension(n, "standardization needs n >= 2"));
    }
    let count = (n * (n - 1) / 2) as f64;
    let upper = || (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)));
    let mean = upper().map(|(i, j)| w.get(i, j)).sum::<f64>() / count;
    let var = upper()
        .map(|(i, j)| (w.get(i, j) - mean).powi(2))
        .sum::<f64>()
        / count;
    if var.is_nan() || var <= 0.0 {
        return Err(Error::InvalidInput(
            "off-diagonal entries are constant; the network cannot be standardized".into(),
        ));
    }
    let sd = var.sqrt();
    SymmetricMatrix::from_lower_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            (w.get(i, j) - mean) / sd
        }
    })
}

/// Correlation network of the members: pairwise-complete Pearson
/// correlations, then [`standardize_off_diagonal`].
pub fn build_correlation_network(obs: &RawObservations) -> Result<NormalizedNetwork> {
    let mut provenance = vec![format!(
        "loaded {} members x {} observations",
        obs.members(),
        obs.observations()
    )];
    if !obs.dropped.is_empty() {
        provenance.push(format!(
            "dropped {} members with more than {}% missing: {}",
            obs.dropped.len(),
            MAX_MISSING_FRACTION * 100.0,
            obs.dropped.join(", ")
        ));
    }
    let mut excluded = Vec::new();
    let mut labels = Vec::new();
    let mut columns = Vec::new();
    for (label, col) in obs.labels.iter().zip(&obs.columns) {
        let present: Vec<f64> = col.iter().flatten().copied().collect();
        let constant = present.windows(2).all(|w| w[0] == w[1]);
        if present.len() < 3 || constant {
            excluded.push(label.clone());
        } else {
            labels.push(label.clone());
            columns.push(col.clone());
        }
    }
    if !excluded.is_empty() {
        provenance.push(format!(
            "excluded {} members with zero variance or fewer than 3 observations: {}",
            excluded.len(),
            excluded.join(", ")
        ));
    }
    if columns.len() < 2 {
        return Err(Error::EmptyData(format!(
            "{} usable members; a network needs at least 2",
            columns.len()
        )));
    }
    let (corr, undefined) = pairwise_correlation(&columns)?;
    provenance.push("pairwise-complete Pearson correlation".into());
    if undefined > 0 {
        provenance.push(format!(
            "{undefined} member pairs had no joint variation; their correlation was set to 0"
        ));
    }
    let matrix = standardize_off_diagonal(&corr)?;
    provenance.push("off-diagonal standardized to mean 0, variance 1; diagonal set to 0".into());
    Ok(NormalizedNetwork {
        matrix,
        labels,
        provenance,
        excluded,
    })
}
