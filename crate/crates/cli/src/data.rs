//! CSV ingestion.
//!
//! Dialect: comma separated, `.` decimal point, UTF-8, no quoting needed,
//! optional header row. The header is detected from the first record: if any
//! field fails to parse as a number the record is taken as column names.
//! Without a header, columns are named `C1, C2, …` and features are named
//! `V1, V2, …` in schema order.
//!
//! Regression observations are laid out response first, `z = (y, x₁, …, x_p)`;
//! mean-model observations are just the selected columns.

use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{CliError, Result};

/// Where the CSV bytes come from. Standard input is buffered in memory so
/// that it can be read more than once.
#[derive(Debug, Clone)]
pub enum Input {
    Path(PathBuf),
    Bytes(Arc<Vec<u8>>),
}

impl Input {
    /// `None` or `-` reads standard input.
    pub fn from_arg(arg: Option<&Path>) -> Result<Self> {
        match arg {
            Some(p) if p != Path::new("-") => Ok(Input::Path(p.to_path_buf())),
            _ => {
                let mut buf = Vec::new();
                io::stdin()
                    .read_to_end(&mut buf)
                    .map_err(|e| CliError::io("<stdin>", e))?;
                Ok(Input::Bytes(Arc::new(buf)))
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Input::Path(p) => p.display().to_string(),
            Input::Bytes(_) => "<stdin>".to_string(),
        }
    }

    fn reader(&self) -> Result<csv::Reader<Box<dyn Read + '_>>> {
        let source: Box<dyn Read + '_> = match self {
            Input::Path(p) => Box::new(io::BufReader::new(
                File::open(p).map_err(|e| CliError::io(p, e))?,
            )),
            Input::Bytes(b) => Box::new(b.as_slice()),
        };
        Ok(csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(source))
    }
}

/// A column given by name or by 1-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Position(usize),
}

impl ColumnRef {
    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(CliError::usage("empty column reference in --schema"));
        }
        match s.parse::<usize>() {
            Ok(0) => Err(CliError::usage("column positions in --schema start at 1")),
            Ok(n) => Ok(ColumnRef::Position(n)),
            Err(_) => Ok(ColumnRef::Name(s.to_string())),
        }
    }
}

/// Which columns hold the response and the features.
///
/// Written on the command line as `RESPONSE:F1,F2,…`. `RESPONSE` alone takes
/// every other column as a feature, and `:F1,F2,…` selects features without
/// a response (mean model). Columns are names or 1-based positions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CsvSchema {
    pub response: Option<ColumnRef>,
    /// `None` means every column other than the response.
    pub features: Option<Vec<ColumnRef>>,
    pub standardize: bool,
}

impl CsvSchema {
    pub fn parse(spec: &str) -> Result<Self> {
        let (resp, feats) = match spec.split_once(':') {
            Some((r, f)) => (r.trim(), Some(f)),
            None => (spec.trim(), None),
        };
        let response = if resp.is_empty() {
            None
        } else {
            Some(ColumnRef::parse(resp)?)
        };
        let features = feats
            .map(|f| f.split(',').map(ColumnRef::parse).collect::<Result<Vec<_>>>())
            .transpose()?;
        if response.is_none() && features.is_none() {
            return Err(CliError::usage("--schema needs a response column or a feature list"));
        }
        Ok(Self {
            response,
            features,
            standardize: false,
        })
    }
}

/// A schema resolved against a concrete file.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub has_header: bool,
    pub columns: Vec<String>,
    pub response: Option<usize>,
    pub features: Vec<usize>,
    pub feature_names: Vec<String>,
    pub standardize: bool,
}

impl Layout {
    pub fn obs_dim(&self) -> usize {
        self.features.len() + usize::from(self.response.is_some())
    }
}

fn parse_number(field: &str) -> Option<f64> {
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads the first record to detect the header and resolves `schema`.
///
/// With `with_response`, a missing response defaults to the first column;
/// otherwise a response in the schema is an error.
pub fn resolve(input: &Input, schema: &CsvSchema, with_response: bool) -> Result<Layout> {
    let mut reader = input.reader()?;
    let mut first = csv::StringRecord::new();
    let got = reader
        .read_record(&mut first)
        .map_err(|e| CliError::input(format!("{}: {e}", input.describe())))?;
    if !got {
        return Err(CliError::input(format!("{}: no rows", input.describe())));
    }
    let has_header = first.iter().any(|f| parse_number(f).is_none());
    let columns: Vec<String> = if has_header {
        first.iter().map(str::to_string).collect()
    } else {
        (1..=first.len()).map(|i| format!("C{i}")).collect()
    };
    let lookup = |c: &ColumnRef| -> Result<usize> {
        match c {
            ColumnRef::Position(n) if *n <= columns.len() => Ok(n - 1),
            ColumnRef::Position(n) => Err(CliError::usage(format!(
                "column {n} is out of range: the file has {} columns",
                columns.len()
            ))),
            ColumnRef::Name(name) => columns.iter().position(|c| c == name).ok_or_else(|| {
                CliError::usage(format!(
                    "no column named '{name}'; columns are: {}",
                    columns.join(", ")
                ))
            }),
        }
    };
    let response = match (&schema.response, with_response) {
        (Some(c), true) => Some(lookup(c)?),
        (None, true) => Some(0),
        (Some(_), false) => {
            return Err(CliError::usage("the mean model takes no response column"))
        }
        (None, false) => None,
    };
    let features = match &schema.features {
        Some(list) => list.iter().map(lookup).collect::<Result<Vec<_>>>()?,
        None => (0..columns.len()).filter(|&i| Some(i) != response).collect(),
    };
    if features.is_empty() {
        return Err(CliError::usage("no feature columns selected"));
    }
    if let Some(r) = response {
        if features.contains(&r) {
            return Err(CliError::usage(format!(
                "response column '{}' is also listed as a feature",
                columns[r]
            )));
        }
    }
    for (i, f) in features.iter().enumerate() {
        if features[..i].contains(f) {
            return Err(CliError::usage(format!("feature '{}' listed twice", columns[*f])));
        }
    }
    let feature_names = if has_header {
        features.iter().map(|&i| columns[i].clone()).collect()
    } else {
        (1..=features.len()).map(|i| format!("V{i}")).collect()
    };
    Ok(Layout {
        has_header,
        columns,
        response,
        features,
        feature_names,
        standardize: schema.standardize,
    })
}

/// How response values are mapped before reaching the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Labels {
    Raw,
    /// Accepts `0/1` or `−1/+1` and maps to `−1/+1`.
    PlusMinusOne,
}

/// Column means and sample standard deviations (denominator `n − 1`) of the
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub rows: u64,
}

impl Standardizer {
    /// Welford accumulation over `rows` of feature vectors.
    pub fn fit<'a>(names: &[String], rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let k = names.len();
        let mut means = vec![0.0; k];
        let mut m2 = vec![0.0; k];
        let mut n = 0u64;
        for row in rows {
            n += 1;
            for j in 0..k {
                let delta = row[j] - means[j];
                means[j] += delta / n as f64;
                m2[j] += delta * (row[j] - means[j]);
            }
        }
        Self::finish(names, means, m2, n)
    }

    fn finish(names: &[String], means: Vec<f64>, m2: Vec<f64>, n: u64) -> Result<Self> {
        if n < 2 {
            return Err(CliError::input("standardization needs at least two rows"));
        }
        let sds: Vec<f64> = m2.iter().map(|s| (s / (n - 1) as f64).sqrt()).collect();
        for (j, (&sd, &mean)) in sds.iter().zip(&means).enumerate() {
            if !(sd > 1e-12 * mean.abs().max(1.0)) {
                return Err(CliError::input(format!(
                    "feature column '{}' is constant and cannot be standardized",
                    names[j]
                )));
            }
        }
        Ok(Self {
            means,
            sds,
            rows: n,
        })
    }

    pub fn apply(&self, x: &mut [f64]) {
        for ((v, m), s) in x.iter_mut().zip(&self.means).zip(&self.sds) {
            *v = (*v - m) / s;
        }
    }
}

/// Streams the data once, calling `f` with the 1-based file line and the
/// observation vector.
pub fn for_each_observation<F>(
    input: &Input,
    layout: &Layout,
    standardizer: Option<&Standardizer>,
    labels: Labels,
    mut f: F,
) -> Result<u64>
where
    F: FnMut(u64, &[f64]) -> Result<()>,
{
    let mut reader = input.reader()?;
    let mut record = csv::StringRecord::new();
    let mut z = vec![0.0; layout.obs_dim()];
    let offset = usize::from(layout.response.is_some());
    let mut count = 0u64;
    let mut first = true;
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            CliError::input(format!("{}: {e}", input.describe()))
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if first {
            first = false;
            if layout.has_header {
                continue;
            }
        }
        if record.len() != layout.columns.len() {
            return Err(CliError::input(format!(
                "{} line {line}: expected {} fields, found {}",
                input.describe(),
                layout.columns.len(),
                record.len()
            )));
        }
        let field = |i: usize| -> Result<f64> {
            parse_number(&record[i]).ok_or_else(|| {
                CliError::input(format!(
                    "{} line {line}, column '{}': cannot read '{}' as a finite number",
                    input.describe(),
                    layout.columns[i],
                    &record[i]
                ))
            })
        };
        if let Some(r) = layout.response {
            let y = field(r)?;
            z[0] = match labels {
                Labels::Raw => y,
                Labels::PlusMinusOne if y == 1.0 => 1.0,
                Labels::PlusMinusOne if y == 0.0 || y == -1.0 => -1.0,
                Labels::PlusMinusOne => {
                    return Err(CliError::input(format!(
                        "{} line {line}: binary response must be 0/1 or -1/1, found {y}",
                        input.describe()
                    )))
                }
            };
        }
        for (slot, &col) in z[offset..].iter_mut().zip(&layout.features) {
            *slot = field(col)?;
        }
        if let Some(s) = standardizer {
            s.apply(&mut z[offset..]);
        }
        count += 1;
        f(line, &z)?;
    }
    Ok(count)
}

/// First pass of two-pass standardization.
pub fn standardize_pass(input: &Input, layout: &Layout) -> Result<Standardizer> {
    let k = layout.features.len();
    let offset = usize::from(layout.response.is_some());
    let mut means = vec![0.0; k];
    let mut m2 = vec![0.0; k];
    let mut n = 0u64;
    for_each_observation(input, layout, None, Labels::Raw, |_, z| {
        n += 1;
        for (j, &x) in z[offset..].iter().enumerate() {
            let delta = x - means[j];
            means[j] += delta / n as f64;
            m2[j] += delta * (x - means[j]);
        }
        Ok(())
    })?;
    Standardizer::finish(&layout.feature_names, means, m2, n)
}

/// Loads every observation, with the standardization pass first when the
/// layout asks for it.
pub fn load(input: &Input, layout: &Layout, labels: Labels) -> Result<Vec<Vec<f64>>> {
    let standardizer = if layout.standardize {
        Some(standardize_pass(input, layout)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for_each_observation(input, layout, standardizer.as_ref(), labels, |_, z| {
        rows.push(z.to_vec());
        Ok(())
    })?;
    Ok(rows)
}
