//! CSV ingestion, preprocessing and report serialization.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Dataset;
use crate::simulation::{AggregateReport, ReplicationOutcome};
use crate::thresholding::SelectionResult;

pub const INTERCEPT_LABEL: &str = "intercept";

/// Reads a headered CSV; every cell must be numeric. Columns named in
/// `exclude` are dropped before parsing.
pub fn load_csv(path: impl AsRef<Path>, response_column: &str, exclude: &[String]) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, response_column, exclude)
}

pub fn read_csv<R: Read>(reader: R, response_column: &str, exclude: &[String]) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    for name in exclude {
        if !headers.contains(name) {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    let response_idx = headers
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| Error::MissingColumn(response_column.to_string()))?;
    let covariates: Vec<usize> = (0..headers.len())
        .filter(|&i| i != response_idx && !exclude.contains(&headers[i]))
        .collect();

    let mut design = Vec::new();
    let mut response = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let cell = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    column: headers[i].clone(),
                    message: format!("`{raw}` is not a finite number"),
                })
        };
        response.push(cell(response_idx)?);
        for &i in &covariates {
            design.push(cell(i)?);
        }
    }
    let n = response.len();
    if n == 0 {
        return Err(Error::InvalidDataset("no data rows".into()));
    }
    let labels = covariates.iter().map(|&i| headers[i].clone()).collect();
    Dataset::new(
        DMatrix::from_row_slice(n, covariates.len(), &design),
        DVector::from_vec(response),
        labels,
    )
}

/// Writes covariates then the response as a headered CSV. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_dataset_csv(data: &Dataset, path: impl AsRef<Path>, response_column: &str) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let mut header: Vec<&str> = data.labels().iter().map(String::as_str).collect();
    header.push(response_column);
    out.push_str(&csv_line(header.iter().copied()));
    for i in 0..data.n() {
        let row = (0..data.p())
            .map(|j| data.design()[(i, j)])
            .chain(std::iter::once(data.response()[i]))
            .map(|v| v.to_string());
        out.push_str(&csv_line(row));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_line<I, S>(fields: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut line = fields
        .into_iter()
        .map(|f| csv_field(f.as_ref()))
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationRecord {
    /// Per-column scaling, `None` for columns left untouched.
    pub columns: Vec<Option<ColumnScaling>>,
    pub response: Option<ColumnScaling>,
}

fn center_scale(values: &mut [f64], name: &str) -> Result<ColumnScaling> {
    let n = values.len();
    if n < 2 {
        return Err(Error::ZeroVariance(name.to_string()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let scale = var.sqrt();
    if !(scale > 0.0) || scale <= 1e-12 * mean.abs() {
        return Err(Error::ZeroVariance(name.to_string()));
    }
    for v in values.iter_mut() {
        *v = (*v - mean) / scale;
    }
    Ok(ColumnScaling { mean, scale })
}

/// Centers and scales the chosen columns to mean 0 and sample standard
/// deviation 1 (divisor `n − 1`); the response too when asked.
pub fn standardize_columns(
    data: &Dataset,
    columns: &[usize],
    include_response: bool,
) -> Result<(Dataset, StandardizationRecord)> {
    let (mut x, mut y, labels) = data.clone().into_parts();
    let mut record = StandardizationRecord {
        columns: vec![None; labels.len()],
        response: None,
    };
    for &j in columns {
        if j >= labels.len() {
            return Err(Error::InvalidArgument(format!("no column {j}")));
        }
        let mut col: Vec<f64> = x.column(j).iter().copied().collect();
        record.columns[j] = Some(center_scale(&mut col, &labels[j])?);
        x.set_column(j, &DVector::from_vec(col));
    }
    if include_response {
        record.response = Some(center_scale(y.as_mut_slice(), "response")?);
    }
    Ok((Dataset::new(x, y, labels)?, record))
}

pub fn standardize(data: &Dataset, include_response: bool) -> Result<(Dataset, StandardizationRecord)> {
    let all: Vec<usize> = (0..data.p()).collect();
    standardize_columns(data, &all, include_response)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnSource {
    Original(usize),
    Product(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionMap {
    pub sources: Vec<ColumnSource>,
}

/// Appends every pairwise product `X_i · X_j` (`i < j`) after the original
/// columns, labeled `Xi:Xj`.
pub fn interaction_expand(data: &Dataset) -> Result<(Dataset, InteractionMap)> {
    let p = data.p();
    if p < 2 {
        return Err(Error::InvalidArgument(format!(
            "interactions need at least two columns, got {p}"
        )));
    }
    let x = data.design();
    let mut sources: Vec<ColumnSource> = (0..p).map(ColumnSource::Original).collect();
    let mut labels = data.labels().to_vec();
    for i in 0..p {
        for j in i + 1..p {
            sources.push(ColumnSource::Product(i, j));
            labels.push(format!("{}:{}", data.labels()[i], data.labels()[j]));
        }
    }
    let expanded = DMatrix::from_fn(data.n(), sources.len(), |r, c| match sources[c] {
        ColumnSource::Original(j) => x[(r, j)],
        ColumnSource::Product(i, j) => x[(r, i)] * x[(r, j)],
    });
    Ok((
        Dataset::new(expanded, data.response().clone(), labels)?,
        InteractionMap { sources },
    ))
}

/// Prepends a column of ones.
pub fn with_intercept(data: &Dataset) -> Result<Dataset> {
    if data.labels().iter().any(|l| l == INTERCEPT_LABEL) {
        return Err(Error::InvalidDataset(format!(
            "dataset already has a column named `{INTERCEPT_LABEL}`"
        )));
    }
    let x = data.design().clone().insert_column(0, 1.0);
    let mut labels = vec![INTERCEPT_LABEL.to_string()];
    labels.extend(data.labels().iter().cloned());
    Dataset::new(x, data.response().clone(), labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preprocessing {
    pub standardize: bool,
    pub standardize_response: bool,
    pub interactions: bool,
    pub intercept: bool,
}

impl Default for Preprocessing {
    fn default() -> Self {
        Self {
            standardize: true,
            standardize_response: true,
            interactions: false,
            intercept: false,
        }
    }
}

/// Standardize the raw covariates, form products, standardize the products,
/// then optionally prepend the intercept.
pub fn preprocess(data: &Dataset, opts: &Preprocessing) -> Result<Dataset> {
    let mut d = if opts.standardize {
        standardize(data, opts.standardize_response)?.0
    } else {
        data.clone()
    };
    if opts.interactions {
        let p0 = d.p();
        d = interaction_expand(&d)?.0;
        if opts.standardize {
            let products: Vec<usize> = (p0..d.p()).collect();
            d = standardize_columns(&d, &products, false)?.0;
        }
    }
    if opts.intercept {
        d = with_intercept(&d)?;
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::InvalidArgument(format!("unknown report format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Report<'a> {
    Selection(&'a SelectionResult),
    Aggregate(&'a [AggregateReport]),
}

pub fn render_report(report: Report<'_>, format: ReportFormat) -> Result<String> {
    Ok(match (report, format) {
        (Report::Selection(s), ReportFormat::Json) => {
            let mut out = serde_json::to_string_pretty(s)?;
            out.push('\n');
            out
        }
        (Report::Selection(s), ReportFormat::Csv) => risk_profile_csv(s),
        (Report::Aggregate(a), ReportFormat::Json) => {
            let mut out = serde_json::to_string_pretty(a)?;
            out.push('\n');
            out
        }
        (Report::Aggregate(a), ReportFormat::Csv) => aggregate_table_csv(a),
    })
}

pub fn write_report(report: Report<'_>, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let body = render_report(report, format)?;
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn read_selection_json(path: impl AsRef<Path>) -> Result<SelectionResult> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// `k,delta,risk,penalty,criterion,n_excluded`, one row per level.
pub fn risk_profile_csv(sel: &SelectionResult) -> String {
    let mut out = csv_line(["k", "delta", "risk", "penalty", "criterion", "n_excluded"]);
    for t in &sel.profile.per_k {
        out.push_str(&csv_line([
            t.k.to_string(),
            t.delta.to_string(),
            t.risk.to_string(),
            t.penalty.to_string(),
            t.criterion.to_string(),
            t.excluded.len().to_string(),
        ]));
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

struct GridRow {
    scenario: String,
    estimator: String,
    measure: &'static str,
    n: usize,
    p: usize,
    cells: Vec<Option<f64>>,
}

struct AggregateGrid {
    pairs: Vec<String>,
    rows: Vec<GridRow>,
}

fn aggregate_grid(reports: &[AggregateReport]) -> AggregateGrid {
    let mut pairs: Vec<String> = Vec::new();
    let mut keys: Vec<(String, String, usize, usize)> = Vec::new();
    for r in reports {
        let pair = r.penalty.to_string();
        if !pairs.contains(&pair) {
            pairs.push(pair);
        }
        let key = (r.scenario.clone(), r.estimator.clone(), r.n, r.p);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    type Measure = fn(&AggregateReport) -> Option<f64>;
    let measures: [(&'static str, Measure); 3] = [
        ("delta_hat", |r| Some(r.mean_delta_hat)),
        ("fnr_pct", |r| Some(r.mean_fnr_pct)),
        ("tnr_pct", |r| r.mean_tnr_pct),
    ];
    let mut rows = Vec::new();
    for (name, get) in measures {
        for (scenario, estimator, n, p) in &keys {
            let cells = pairs
                .iter()
                .map(|pair| {
                    reports
                        .iter()
                        .find(|r| {
                            &r.scenario == scenario
                                && &r.estimator == estimator
                                && r.n == *n
                                && r.p == *p
                                && &r.penalty.to_string() == pair
                        })
                        .and_then(get)
                })
                .collect();
            rows.push(GridRow {
                scenario: scenario.clone(),
                estimator: estimator.clone(),
                measure: name,
                n: *n,
                p: *p,
                cells,
            });
        }
    }
    AggregateGrid { pairs, rows }
}

/// Table layout with one block per measure (`delta_hat`, `fnr_pct`,
/// `tnr_pct`), one row per (scenario, estimator, n, p) and one column per
/// penalty pair, all in first-appearance order.
pub fn aggregate_table_csv(reports: &[AggregateReport]) -> String {
    let grid = aggregate_grid(reports);
    let mut out = csv_line(
        ["scenario", "estimator", "measure", "n", "p"]
            .into_iter()
            .map(String::from)
            .chain(grid.pairs.iter().cloned()),
    );
    for row in grid.rows {
        let fields = [
            row.scenario,
            row.estimator,
            row.measure.to_string(),
            row.n.to_string(),
            row.p.to_string(),
        ]
        .into_iter()
        .chain(row.cells.into_iter().map(fmt_opt));
        out.push_str(&csv_line(fields));
    }
    out
}

/// Per-replication audit rows. Wall times are left out so the file is
/// reproducible.
pub fn outcomes_csv(outcomes: &[ReplicationOutcome]) -> String {
    let mut out = csv_line(["index", "seed", "c", "r", "delta_hat", "fnr", "tnr", "irrelevant_set"]);
    for o in outcomes {
        let set = o
            .selected_set
            .iter()
            .map(|j| j.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&csv_line([
            o.index.to_string(),
            o.seed.to_string(),
            o.penalty.c.to_string(),
            o.penalty.r.to_string(),
            o.delta_hat.to_string(),
            o.fnr.to_string(),
            fmt_opt(o.tnr),
            set,
        ]));
    }
    out
}

/// Human-readable table for terminals.
pub fn format_aggregate_table(reports: &[AggregateReport]) -> String {
    let grid = aggregate_grid(reports);
    let mut out = String::new();
    let _ = write!(out, "{:<10} {:>6} {:>4}", "measure", "n", "p");
    for pair in &grid.pairs {
        let _ = write!(out, " {:>14}", format!("({pair})"));
    }
    out.push('\n');
    for row in &grid.rows {
        let _ = write!(out, "{:<10} {:>6} {:>4}", row.measure, row.n, row.p);
        for cell in &row.cells {
            let shown = cell.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            let _ = write!(out, " {shown:>14}");
        }
        out.push('\n');
    }
    out
}
