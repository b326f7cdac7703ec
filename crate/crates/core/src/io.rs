//! File formats and the end-to-end analysis behind the command-line tool.
//!
//! Input series, one observation per row or array element:
//!
//! | space                | file | payload                                              |
//! |----------------------|------|------------------------------------------------------|
//! | `sphere-composition` | CSV  | one composition per row, parts summing to 1          |
//! | `euclidean`          | CSV  | one coordinate vector per row                        |
//! | `laplacian`          | JSON | `{"adjacency": [A_1, ..., A_T]}` or a bare array     |
//! | `wasserstein1d`      | JSON | `{"grid": x, "curves": [f_1, ...]}` or `{"quantiles": [...]}` |
//!
//! CSV files may start with a header row and contain `#` comments. Curves
//! are normalized by their trapezoid integral and converted to quantile
//! functions on `quantile_grid` levels (default 100).
//!
//! Results are JSON documents tagged with [`SCHEMA_VERSION`].

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::component::{component_from_scan, PeriodicComponent};
use crate::error::{Error, Result};
use crate::metric::{
    laplacian_from_adjacency, sqrt_compositional_transform, Euclidean, EuclideanPoint, Laplacian,
    MetricSpace, QuantileFunction, Sphere, SpherePoint, Wasserstein1d, DEFAULT_QUANTILE_GRID,
};
use crate::scan::{default_theta_max, estimate_period, scan, ObjectSeries};
use crate::tuning::{default_weight, select, Criterion, IcReport, LambdaPath};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "objper";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tolerance on the row sums of input compositions. Rows within it are
/// rescaled to sum to one exactly before the square-root transform.
pub const COMPOSITION_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    SphereComposition,
    Laplacian,
    Wasserstein1d,
    Euclidean,
}

impl InputKind {
    pub const ALL: [InputKind; 4] = [
        InputKind::SphereComposition,
        InputKind::Laplacian,
        InputKind::Wasserstein1d,
        InputKind::Euclidean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputKind::SphereComposition => "sphere-composition",
            InputKind::Laplacian => "laplacian",
            InputKind::Wasserstein1d => "wasserstein1d",
            InputKind::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown space kind {s:?}")))
    }
}

/// A parsed series in any of the supported spaces.
#[derive(Debug, Clone)]
pub enum AnySeries {
    Sphere(ObjectSeries<Sphere>),
    Laplacian(ObjectSeries<Laplacian>),
    Wasserstein(ObjectSeries<Wasserstein1d>),
    Euclidean(ObjectSeries<Euclidean>),
}

impl AnySeries {
    pub fn kind(&self) -> InputKind {
        match self {
            AnySeries::Sphere(_) => InputKind::SphereComposition,
            AnySeries::Laplacian(_) => InputKind::Laplacian,
            AnySeries::Wasserstein(_) => InputKind::Wasserstein1d,
            AnySeries::Euclidean(_) => InputKind::Euclidean,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnySeries::Sphere(s) => s.len(),
            AnySeries::Laplacian(s) => s.len(),
            AnySeries::Wasserstein(s) => s.len(),
            AnySeries::Euclidean(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn parse_err(row: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        row,
        message: message.into(),
    }
}

fn at_row(row: usize, invariant: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| match e {
        Error::Validation { invariant, message } => Error::Validation {
            invariant,
            message: format!("row {row}: {message}"),
        },
        other => Error::validation(invariant, format!("row {row}: {other}")),
    }
}

/// Numeric CSV rows with their line numbers. A first row that does not
/// parse as numbers is taken as a header.
fn read_numeric_csv(text: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some((_, prev)) = rows.first() {
                    if prev.len() != values.len() {
                        return Err(parse_err(
                            line,
                            format!("expected {} columns, found {}", prev.len(), values.len()),
                        ));
                    }
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(parse_err(line, "non-finite value"));
                }
                rows.push((line, values));
            }
            Err(_) if first => {}
            Err(e) => {
                let bad = record
                    .iter()
                    .find(|f| f.parse::<f64>().is_err())
                    .unwrap_or_default();
                return Err(parse_err(
                    line,
                    format!("cannot parse {bad:?} as a number: {e}"),
                ));
            }
        }
        first = false;
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no observations"));
    }
    Ok(rows)
}

fn composition_row(line: usize, row: &[f64]) -> Result<SpherePoint> {
    if let Some(x) = row.iter().find(|x| **x < 0.0) {
        return Err(Error::validation(
            "composition is nonnegative",
            format!("row {line}: entry {x}"),
        ));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > COMPOSITION_SUM_TOLERANCE {
        return Err(Error::validation(
            "composition sums to one",
            format!("row {line}: entries sum to {sum}"),
        ));
    }
    let rescaled;
    let row = if (sum - 1.0).abs() > crate::metric::INVARIANT_TOLERANCE {
        rescaled = row.iter().map(|x| x / sum).collect::<Vec<_>>();
        &rescaled[..]
    } else {
        row
    };
    sqrt_compositional_transform(row).map_err(at_row(line, "composition is in the simplex"))
}

fn json_rows(text: &str, key: &str) -> Result<(Value, Vec<Value>)> {
    let doc: Value = serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.to_string()))?;
    let rows = match &doc {
        Value::Array(a) => a.clone(),
        Value::Object(o) => match o.get(key) {
            Some(Value::Array(a)) => a.clone(),
            Some(_) => return Err(parse_err(0, format!("\"{key}\" must be an array"))),
            None => return Err(parse_err(0, format!("missing \"{key}\" array"))),
        },
        _ => return Err(parse_err(0, "expected a JSON array or object")),
    };
    if rows.is_empty() {
        return Err(parse_err(0, "no observations"));
    }
    Ok((doc, rows))
}

fn check_declared_space(doc: &Value, kind: InputKind) -> Result<()> {
    match doc.get("space").and_then(Value::as_str) {
        Some(s) if s != kind.as_str() => Err(Error::validation(
            "declared space matches file",
            format!("file declares {s:?}, requested {:?}", kind.as_str()),
        )),
        _ => Ok(()),
    }
}

fn row_as<T: serde::de::DeserializeOwned>(row: usize, v: &Value) -> Result<T> {
    T::deserialize(v).map_err(|e| parse_err(row, e.to_string()))
}

fn parse_laplacians(text: &str) -> Result<ObjectSeries<Laplacian>> {
    let (doc, rows) = json_rows(text, "adjacency")?;
    check_declared_space(&doc, InputKind::Laplacian)?;
    let mut points = Vec::with_capacity(rows.len());
    for (i, v) in rows.iter().enumerate() {
        let a: Vec<Vec<f64>> = row_as(i + 1, v)?;
        let l = laplacian_from_adjacency(&a).map_err(at_row(
            i + 1,
            "adjacency is square, symmetric, nonnegative with zero diagonal",
        ))?;
        points.push(l);
    }
    let nodes = points[0].nodes();
    series_checked(Laplacian::new(nodes), points)
}

fn parse_distributions(text: &str) -> Result<ObjectSeries<Wasserstein1d>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.to_string()))?;
    check_declared_space(&doc, InputKind::Wasserstein1d)?;
    let points = if doc.get("quantiles").is_some() {
        let (_, rows) = json_rows(text, "quantiles")?;
        rows.iter()
            .enumerate()
            .map(|(i, v)| {
                let q: Vec<f64> = row_as(i + 1, v)?;
                QuantileFunction::new(q)
                    .map_err(at_row(i + 1, "quantile function is nondecreasing"))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let (_, rows) = json_rows(text, "curves")?;
        let grid: Vec<f64> = match doc.get("grid") {
            Some(g) => row_as(0, g)?,
            None => return Err(parse_err(0, "curves need a \"grid\" array")),
        };
        let m = match doc.get("quantile_grid") {
            Some(v) => row_as::<usize>(0, v)?,
            None => DEFAULT_QUANTILE_GRID,
        };
        if m < 2 {
            return Err(Error::validation(
                "quantile grid has M >= 2",
                format!("M = {m}"),
            ));
        }
        rows.iter()
            .enumerate()
            .map(|(i, v)| {
                let f: Vec<f64> = row_as(i + 1, v)?;
                QuantileFunction::from_density(&grid, &f, m).map_err(at_row(i + 1, "density"))
            })
            .collect::<Result<Vec<_>>>()?
    };
    let grid = points[0].len();
    series_checked(Wasserstein1d::new(grid), points)
}

fn series_checked<S: MetricSpace>(space: S, points: Vec<S::Point>) -> Result<ObjectSeries<S>> {
    if points.len() < 2 {
        return Err(Error::validation(
            "series has at least 2 observations",
            format!("found {}", points.len()),
        ));
    }
    ObjectSeries::new(space, points)
}

/// Parses series text in the format of `kind`.
pub fn parse_series_str(text: &str, kind: InputKind) -> Result<AnySeries> {
    match kind {
        InputKind::SphereComposition => {
            let rows = read_numeric_csv(text)?;
            let points = rows
                .iter()
                .map(|(line, r)| composition_row(*line, r))
                .collect::<Result<Vec<_>>>()?;
            let dim = points[0].dim();
            Ok(AnySeries::Sphere(series_checked(Sphere::new(dim), points)?))
        }
        InputKind::Euclidean => {
            let rows = read_numeric_csv(text)?;
            let dim = rows[0].1.len();
            let points = rows
                .into_iter()
                .map(|(_, r)| EuclideanPoint::new(r))
                .collect::<Result<Vec<_>>>()?;
            Ok(AnySeries::Euclidean(series_checked(
                Euclidean::new(dim),
                points,
            )?))
        }
        InputKind::Laplacian => Ok(AnySeries::Laplacian(parse_laplacians(text)?)),
        InputKind::Wasserstein1d => Ok(AnySeries::Wasserstein(parse_distributions(text)?)),
    }
}

/// Reads and parses a series file.
pub fn parse_series(path: &Path, kind: InputKind) -> Result<AnySeries> {
    let text = fs::read_to_string(path)?;
    parse_series_str(&text, kind)
}

fn csv_lines<'a>(rows: impl Iterator<Item = Vec<f64>> + 'a) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Writes a series in the format [`parse_series_str`] reads back.
///
/// Sphere points are written as compositions (squared coordinates).
pub fn serialize_series(series: &AnySeries) -> Result<String> {
    Ok(match series {
        AnySeries::Sphere(s) => csv_lines(
            s.points()
                .iter()
                .map(|p| p.coords().iter().map(|x| x * x).collect()),
        ),
        AnySeries::Euclidean(s) => csv_lines(s.points().iter().map(|p| p.coords().to_vec())),
        AnySeries::Laplacian(s) => {
            let adjacency: Vec<Vec<Vec<f64>>> = s
                .points()
                .iter()
                .map(|l| {
                    let n = l.nodes();
                    (0..n)
                        .map(|i| {
                            (0..n)
                                .map(|j| if i == j { 0.0 } else { -l.get(i, j) + 0.0 })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let doc = serde_json::json!({
                "space": InputKind::Laplacian.as_str(),
                "nodes": s.space().nodes(),
                "adjacency": adjacency,
            });
            serde_json::to_string(&doc)? + "\n"
        }
        AnySeries::Wasserstein(s) => {
            let doc = serde_json::json!({
                "space": InputKind::Wasserstein1d.as_str(),
                "quantiles": s.points(),
            });
            serde_json::to_string(&doc)? + "\n"
        }
    })
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Settings of one analysis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub theta_max: Option<usize>,
    pub criterion: Criterion,
    pub g_override: Option<f64>,
    /// Penalized-loss curves are emitted at `multiplier * selected_lambda`.
    pub lambda_multipliers: Vec<f64>,
    /// Extract the component at this period instead of the selected one.
    pub component_period: Option<usize>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            theta_max: None,
            criterion: Criterion::Rss,
            g_override: None,
            lambda_multipliers: vec![1.0],
            component_period: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub input: Option<String>,
    pub space: InputKind,
    pub len: usize,
    pub theta_max: usize,
    pub criterion: Criterion,
    pub g_value: f64,
    pub g_override: Option<f64>,
    pub lambda_multipliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub multiplier: f64,
    pub lambda: f64,
    /// `RSS(theta) + lambda * theta` for `theta = 1..=theta_max`.
    pub loss: Vec<f64>,
    pub argmin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentPayload {
    pub period: usize,
    pub phase_counts: Vec<usize>,
    /// Mean squared distance of each phase's observations to its value.
    pub dispersion: Vec<f64>,
    /// Per-phase values in the space's point encoding.
    pub values: Vec<Value>,
}

impl ComponentPayload {
    pub fn from_component<S>(c: &PeriodicComponent<S>, series: &ObjectSeries<S>) -> Result<Self>
    where
        S: MetricSpace,
        S::Point: Serialize,
    {
        Ok(Self {
            period: c.period(),
            phase_counts: c.phase_counts().to_vec(),
            dispersion: c.dispersion(series)?,
            values: c
                .values()
                .iter()
                .map(serde_json::to_value)
                .collect::<std::result::Result<_, _>>()?,
        })
    }
}

/// Output of `scan`: the whole pipeline from RSS curve to component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub rss: Vec<f64>,
    pub lambda_path: LambdaPath,
    pub ic: IcReport,
    pub penalized_loss: Vec<LossCurve>,
    pub selected_period: usize,
    pub component: ComponentPayload,
}

fn schema_check(ok: bool, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::validation("result schema", message))
    }
}

impl ResultFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        r.validate()?;
        Ok(r)
    }

    /// Structural checks every result file satisfies.
    pub fn validate(&self) -> Result<()> {
        schema_check(
            self.schema_version == SCHEMA_VERSION,
            format!("unsupported schema version {}", self.schema_version),
        )?;
        let tm = self.config.theta_max;
        schema_check(self.rss.len() == tm, "rss has theta_max entries")?;
        schema_check(
            self.rss.iter().all(|r| r.is_finite() && *r >= 0.0),
            "rss is finite and nonnegative",
        )?;
        let path = self.lambda_path.thetas();
        schema_check(
            path.windows(2).all(|w| w[0] > w[1]) && path.last() == Some(&1),
            "lambda path periods decrease to 1",
        )?;
        schema_check(
            self.lambda_path.breakpoints().len() == path.len()
                && self
                    .lambda_path
                    .breakpoints()
                    .windows(2)
                    .all(|w| w[0] <= w[1]),
            "lambda path breakpoints ascend",
        )?;
        schema_check(
            self.ic.records.len() == path.len(),
            "one IC record per path segment",
        )?;
        let min = self
            .ic
            .records
            .iter()
            .map(|r| r.ic)
            .fold(f64::INFINITY, f64::min);
        schema_check(self.ic.selected_ic == min, "selected IC is the minimum")?;
        schema_check(
            self.ic.selected_theta == self.selected_period,
            "selected period matches the IC report",
        )?;
        schema_check(
            self.penalized_loss.len() == self.config.lambda_multipliers.len()
                && self.penalized_loss.iter().all(|c| c.loss.len() == tm),
            "one loss curve of length theta_max per multiplier",
        )?;
        let c = &self.component;
        schema_check(
            c.values.len() == c.period
                && c.phase_counts.len() == c.period
                && c.dispersion.len() == c.period
                && c.phase_counts.iter().sum::<usize>() == self.config.len,
            "component has one value, count and dispersion per phase",
        )
    }
}

/// Output of `ic-path`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcPathFile {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub rss: Vec<f64>,
    pub lambda_path: LambdaPath,
    pub ic: IcReport,
}

/// Output of `component`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFile {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub selected_period: usize,
    pub component: ComponentPayload,
}

fn analyze_series<S>(
    series: &ObjectSeries<S>,
    kind: InputKind,
    options: &AnalysisOptions,
    command: &str,
    input: Option<String>,
) -> Result<ResultFile>
where
    S: MetricSpace,
    S::Point: Serialize,
{
    let len = series.len();
    let theta_max = options.theta_max.unwrap_or_else(|| default_theta_max(len));
    if theta_max == 0 || theta_max > len {
        return Err(Error::InvalidArgument(format!(
            "--theta-max {theta_max} must lie in 1..={len}"
        )));
    }
    if let Some(g) = options.g_override {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidRegularizer(format!(
                "g override must be positive and finite, got {g}"
            )));
        }
    }
    if let Some(m) = options
        .lambda_multipliers
        .iter()
        .find(|m| !(**m >= 0.0 && m.is_finite()))
    {
        return Err(Error::InvalidArgument(format!(
            "lambda multipliers must be finite and nonnegative, got {m}"
        )));
    }
    if let Some(p) = options.component_period {
        if p == 0 || p > len {
            return Err(Error::InvalidArgument(format!(
                "component period {p} must lie in 1..={len}"
            )));
        }
    }

    let fit = scan(series, theta_max)?;
    let g = match options.g_override {
        Some(g) => g,
        None => default_weight(options.criterion, fit.rss(), len, theta_max)?,
    };
    let ic = select(&fit, options.criterion, g)?;
    let path = LambdaPath::from_rss(fit.rss());
    let penalized_loss = options
        .lambda_multipliers
        .iter()
        .map(|&m| {
            let lambda = m * ic.selected_lambda;
            LossCurve {
                multiplier: m,
                lambda,
                loss: fit.penalized_loss(lambda),
                argmin: estimate_period(fit.rss(), lambda),
            }
        })
        .collect();
    let period = options.component_period.unwrap_or(ic.selected_theta);
    let component = component_from_scan(series, &fit, period)?;
    Ok(ResultFile {
        schema_version: SCHEMA_VERSION,
        tool: TOOL_NAME.into(),
        tool_version: TOOL_VERSION.into(),
        config: RunConfig {
            command: command.into(),
            input,
            space: kind,
            len,
            theta_max,
            criterion: options.criterion,
            g_value: g,
            g_override: options.g_override,
            lambda_multipliers: options.lambda_multipliers.clone(),
        },
        rss: fit.rss().to_vec(),
        lambda_path: path,
        selected_period: ic.selected_theta,
        ic,
        penalized_loss,
        component: ComponentPayload::from_component(&component, series)?,
    })
}

/// Runs scan, selection and extraction on a parsed series.
pub fn analyze(
    series: &AnySeries,
    options: &AnalysisOptions,
    command: &str,
    input: Option<String>,
) -> Result<ResultFile> {
    let kind = series.kind();
    match series {
        AnySeries::Sphere(s) => analyze_series(s, kind, options, command, input),
        AnySeries::Laplacian(s) => analyze_series(s, kind, options, command, input),
        AnySeries::Wasserstein(s) => analyze_series(s, kind, options, command, input),
        AnySeries::Euclidean(s) => analyze_series(s, kind, options, command, input),
    }
}

impl From<ResultFile> for IcPathFile {
    fn from(r: ResultFile) -> Self {
        Self {
            schema_version: r.schema_version,
            tool: r.tool,
            tool_version: r.tool_version,
            config: r.config,
            rss: r.rss,
            lambda_path: r.lambda_path,
            ic: r.ic,
        }
    }
}

impl From<ResultFile> for ComponentFile {
    fn from(r: ResultFile) -> Self {
        Self {
            schema_version: r.schema_version,
            tool: r.tool,
            tool_version: r.tool_version,
            config: r.config,
            selected_period: r.selected_period,
            component: r.component,
        }
    }
}
