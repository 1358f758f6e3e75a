//! Tabular data, design matrices and derived growth series.
//!
//! CSV input is comma separated with a header row. A cell that is empty or
//! reads `NA` is missing; missing cells are kept as `None` and only removed
//! by listwise deletion when a design is built.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("column `{column}` row {row}: non-numeric value `{value}`")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },
    #[error("column `{column}` row {row}: non-binary value `{value}`")]
    NonBinary {
        column: String,
        row: usize,
        value: String,
    },
    #[error("column `{column}` has type {actual}, expected {expected}")]
    WrongType {
        column: String,
        actual: ColumnType,
        expected: &'static str,
    },
    #[error("dataset has no rows")]
    Empty,
    #[error("column `{column}` has {len} rows, expected {expected}")]
    LengthMismatch {
        column: String,
        len: usize,
        expected: usize,
    },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("column `{0}` has missing values")]
    MissingValues(String),
    #[error("rank-deficient design (rank {rank} < {k}): collinear columns {columns:?}")]
    RankDeficient {
        rank: usize,
        k: usize,
        columns: Vec<String>,
    },
    #[error("{n} complete rows but {k} design columns")]
    TooFewRows { n: usize, k: usize },
    #[error("design has no columns")]
    NoColumns,
    #[error("GDP series `{unit}`: nonpositive value {value} in period {period}")]
    NonPositiveGdp { unit: String, period: i64, value: f64 },
    #[error("GDP series `{unit}`: periods must be strictly increasing")]
    UnorderedPeriods { unit: String },
    #[error("GDP series `{unit}`: need at least 2 periods, got {got}")]
    TooFewPeriods { unit: String, got: usize },
}

type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Continuous,
    Categorical,
    Binary,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Continuous => "continuous",
            ColumnType::Categorical => "categorical",
            ColumnType::Binary => "binary",
        })
    }
}

/// A typed column. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Continuous(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
    Binary(Vec<Option<u8>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Continuous(v) => v.len(),
            Column::Categorical(v) => v.len(),
            Column::Binary(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_type(&self) -> ColumnType {
        match self {
            Column::Continuous(_) => ColumnType::Continuous,
            Column::Categorical(_) => ColumnType::Categorical,
            Column::Binary(_) => ColumnType::Binary,
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Continuous(v) => v[row].is_none(),
            Column::Categorical(v) => v[row].is_none(),
            Column::Binary(v) => v[row].is_none(),
        }
    }

    /// Numeric view of a continuous or binary cell.
    pub fn numeric(&self, row: usize) -> Option<f64> {
        match self {
            Column::Continuous(v) => v[row],
            Column::Binary(v) => v[row].map(f64::from),
            Column::Categorical(_) => None,
        }
    }

    pub fn label(&self, row: usize) -> Option<String> {
        match self {
            Column::Categorical(v) => v[row].clone(),
            Column::Binary(v) => v[row].map(|b| b.to_string()),
            Column::Continuous(_) => None,
        }
    }

    fn cell_text(&self, row: usize) -> String {
        match self {
            Column::Continuous(v) => v[row].map_or_else(|| "NA".to_string(), |x| x.to_string()),
            Column::Categorical(v) => v[row].clone().unwrap_or_else(|| "NA".to_string()),
            Column::Binary(v) => v[row].map_or_else(|| "NA".to_string(), |x| x.to_string()),
        }
    }
}

/// Column-type declarations used when loading a CSV.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    columns: Vec<(String, ColumnType)>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn column(mut self, name: impl Into<String>, ty: ColumnType) -> Self {
        self.columns.push((name.into(), ty));
        self
    }

    pub fn continuous(self, name: impl Into<String>) -> Self {
        self.column(name, ColumnType::Continuous)
    }

    pub fn categorical(self, name: impl Into<String>) -> Self {
        self.column(name, ColumnType::Categorical)
    }

    pub fn binary(self, name: impl Into<String>) -> Self {
        self.column(name, ColumnType::Binary)
    }

    pub fn columns(&self) -> &[(String, ColumnType)] {
        &self.columns
    }
}

/// Named, typed columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<(String, Column)>) -> Result<Self> {
        let n_rows = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        if n_rows == 0 {
            return Err(DataError::Empty);
        }
        let mut seen = BTreeSet::new();
        for (name, col) in &columns {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateColumn(name.clone()));
            }
            if col.len() != n_rows {
                return Err(DataError::LengthMismatch {
                    column: name.clone(),
                    len: col.len(),
                    expected: n_rows,
                });
            }
            if let Column::Binary(values) = col {
                if let Some((row, v)) = values
                    .iter()
                    .enumerate()
                    .find_map(|(i, v)| v.filter(|b| *b > 1).map(|b| (i, b)))
                {
                    return Err(DataError::NonBinary {
                        column: name.clone(),
                        row: row + 1,
                        value: v.to_string(),
                    });
                }
            }
        }
        let (names, columns) = columns.into_iter().unzip();
        Ok(Self {
            names,
            columns,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    }

    /// Complete numeric values of a continuous or binary column.
    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        let col = self.column(name)?;
        if col.column_type() == ColumnType::Categorical {
            return Err(DataError::WrongType {
                column: name.to_string(),
                actual: ColumnType::Categorical,
                expected: "continuous or binary",
            });
        }
        (0..self.n_rows)
            .map(|i| col.numeric(i).ok_or_else(|| DataError::MissingValues(name.to_string())))
            .collect()
    }

    /// Complete values of a binary column.
    pub fn binary(&self, name: &str) -> Result<Vec<u8>> {
        match self.column(name)? {
            Column::Binary(v) => v
                .iter()
                .map(|x| x.ok_or_else(|| DataError::MissingValues(name.to_string())))
                .collect(),
            other => Err(DataError::WrongType {
                column: name.to_string(),
                actual: other.column_type(),
                expected: "binary",
            }),
        }
    }

    /// Complete labels of a categorical (or binary) column.
    pub fn labels(&self, name: &str) -> Result<Vec<String>> {
        let col = self.column(name)?;
        if col.column_type() == ColumnType::Continuous {
            return Err(DataError::WrongType {
                column: name.to_string(),
                actual: ColumnType::Continuous,
                expected: "categorical or binary",
            });
        }
        (0..self.n_rows)
            .map(|i| col.label(i).ok_or_else(|| DataError::MissingValues(name.to_string())))
            .collect()
    }

    /// Rows (0-based) with no missing cell among `names`.
    pub fn complete_rows(&self, names: &[&str]) -> Result<Vec<usize>> {
        let cols = names
            .iter()
            .map(|n| self.column(n))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.n_rows)
            .filter(|&i| cols.iter().all(|c| !c.is_missing(i)))
            .collect())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.names)?;
        for i in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c.cell_text(i)))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Parse CSV text according to `schema`. Undeclared columns are ignored.
    pub fn from_reader<R: Read>(reader: R, schema: &Schema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let positions = schema
            .columns()
            .iter()
            .map(|(name, _)| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| DataError::MissingColumn(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut columns: Vec<Column> = schema
            .columns()
            .iter()
            .map(|(_, ty)| match ty {
                ColumnType::Continuous => Column::Continuous(Vec::new()),
                ColumnType::Categorical => Column::Categorical(Vec::new()),
                ColumnType::Binary => Column::Binary(Vec::new()),
            })
            .collect();

        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            for ((col, &pos), (name, _)) in columns.iter_mut().zip(&positions).zip(schema.columns()) {
                let cell = record.get(pos).unwrap_or("");
                let missing = cell.is_empty() || cell == "NA";
                match col {
                    Column::Continuous(v) => v.push(if missing {
                        None
                    } else {
                        Some(cell.parse::<f64>().map_err(|_| DataError::NonNumeric {
                            column: name.clone(),
                            row: row + 1,
                            value: cell.to_string(),
                        })?)
                    }),
                    Column::Categorical(v) => v.push((!missing).then(|| cell.to_string())),
                    Column::Binary(v) => v.push(if missing {
                        None
                    } else {
                        Some(parse_binary(cell).ok_or_else(|| DataError::NonBinary {
                            column: name.clone(),
                            row: row + 1,
                            value: cell.to_string(),
                        })?)
                    }),
                }
            }
        }
        Dataset::new(schema.columns().iter().map(|(n, _)| n.clone()).zip(columns).collect())
    }
}

fn parse_binary(cell: &str) -> Option<u8> {
    match cell.parse::<f64>().ok()? {
        x if x == 0.0 => Some(0),
        x if x == 1.0 => Some(1),
        _ => None,
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    Dataset::from_reader(std::io::BufReader::new(file), schema)
}

/// Which terms enter a design and in what order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignSpec {
    pub intercept: bool,
    pub continuous: Vec<String>,
    pub categorical: Vec<String>,
}

impl Default for DesignSpec {
    fn default() -> Self {
        Self {
            intercept: true,
            continuous: Vec::new(),
            categorical: Vec::new(),
        }
    }
}

impl DesignSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intercept(mut self, yes: bool) -> Self {
        self.intercept = yes;
        self
    }

    pub fn continuous<S: Into<String>>(mut self, terms: impl IntoIterator<Item = S>) -> Self {
        self.continuous.extend(terms.into_iter().map(Into::into));
        self
    }

    pub fn fixed_effects<S: Into<String>>(mut self, terms: impl IntoIterator<Item = S>) -> Self {
        self.categorical.extend(terms.into_iter().map(Into::into));
        self
    }
}

/// Regressor matrix with column labels and its numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    column_names: Vec<String>,
    intercept_index: Option<usize>,
    dropped_levels: Vec<(String, String)>,
    rank: usize,
}

impl DesignMatrix {
    /// Wrap a raw matrix, checking that it has full column rank.
    pub fn from_matrix(values: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        assert_eq!(values.ncols(), column_names.len(), "one name per column");
        if values.ncols() == 0 {
            return Err(DataError::NoColumns);
        }
        let intercept_index = (0..values.ncols()).find(|&j| values.column(j).iter().all(|&v| v == 1.0));
        let rank = check_full_rank(&values, &column_names)?;
        Ok(Self {
            values,
            column_names,
            intercept_index,
            dropped_levels: Vec::new(),
            rank,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn intercept_index(&self) -> Option<usize> {
        self.intercept_index
    }

    /// `(categorical, base level)` pairs, in declaration order.
    pub fn dropped_levels(&self) -> &[(String, String)] {
        &self.dropped_levels
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

/// A design, its aligned response and the source rows that survived
/// listwise deletion.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub matrix: DesignMatrix,
    pub response: Vec<f64>,
    pub rows: Vec<usize>,
    pub dropped_rows: usize,
}

/// Assemble `[intercept | continuous terms | dummy blocks]` for `response`.
///
/// Rows missing any used column are dropped. Each categorical contributes one
/// dummy per level except its lexicographically first level.
pub fn build_design(dataset: &Dataset, response: &str, spec: &DesignSpec) -> Result<Design> {
    let mut used: Vec<&str> = vec![response];
    used.extend(spec.continuous.iter().map(String::as_str));
    used.extend(spec.categorical.iter().map(String::as_str));
    for name in &spec.continuous {
        let ty = dataset.column(name)?.column_type();
        if ty == ColumnType::Categorical {
            return Err(DataError::WrongType {
                column: name.clone(),
                actual: ty,
                expected: "continuous or binary",
            });
        }
    }
    for name in &spec.categorical {
        let ty = dataset.column(name)?.column_type();
        if ty == ColumnType::Continuous {
            return Err(DataError::WrongType {
                column: name.clone(),
                actual: ty,
                expected: "categorical or binary",
            });
        }
    }
    let resp_col = dataset.column(response)?;
    if resp_col.column_type() == ColumnType::Categorical {
        return Err(DataError::WrongType {
            column: response.to_string(),
            actual: ColumnType::Categorical,
            expected: "continuous or binary",
        });
    }

    let rows = dataset.complete_rows(&used)?;
    let n = rows.len();

    let mut names = Vec::new();
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    let mut intercept_index = None;
    if spec.intercept {
        intercept_index = Some(0);
        names.push("(Intercept)".to_string());
        blocks.push(vec![1.0; n]);
    }
    for name in &spec.continuous {
        let col = dataset.column(name)?;
        names.push(name.clone());
        blocks.push(rows.iter().map(|&i| col.numeric(i).expect("complete row")).collect());
    }
    let mut dropped_levels = Vec::new();
    for name in &spec.categorical {
        let col = dataset.column(name)?;
        let labels: Vec<String> = rows.iter().map(|&i| col.label(i).expect("complete row")).collect();
        let levels: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
        let mut levels = levels.into_iter();
        if let Some(base) = levels.next() {
            dropped_levels.push((name.clone(), base.to_string()));
        }
        for level in levels {
            names.push(format!("{name}[{level}]"));
            blocks.push(labels.iter().map(|l| if l == level { 1.0 } else { 0.0 }).collect());
        }
    }

    let k = names.len();
    if k == 0 {
        return Err(DataError::NoColumns);
    }
    if n < k {
        return Err(DataError::TooFewRows { n, k });
    }
    let values = DMatrix::from_fn(n, k, |i, j| blocks[j][i]);
    let rank = check_full_rank(&values, &names)?;
    let response = rows
        .iter()
        .map(|&i| resp_col.numeric(i).expect("complete row"))
        .collect();
    Ok(Design {
        matrix: DesignMatrix {
            values,
            column_names: names,
            intercept_index,
            dropped_levels,
            rank,
        },
        response,
        dropped_rows: dataset.n_rows() - n,
        rows,
    })
}

/// Column-wise modified Gram-Schmidt. Returns the rank, or an error naming
/// the first dependent column together with the columns it is a combination of.
fn check_full_rank(values: &DMatrix<f64>, names: &[String]) -> Result<usize> {
    const REL_TOL: f64 = 1e-9;
    let k = values.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut independent: Vec<usize> = Vec::with_capacity(k);
    let mut first_dependent = None;
    for j in 0..k {
        let col = values.column(j).into_owned();
        let norm = col.norm();
        let mut v = col.clone();
        for q in &basis {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        let rest = v.norm();
        if norm == 0.0 || rest <= REL_TOL * norm {
            if first_dependent.is_none() {
                first_dependent = Some(j);
            }
            continue;
        }
        basis.push(v / rest);
        independent.push(j);
    }
    let rank = basis.len();
    if let Some(j) = first_dependent {
        let mut columns: Vec<String> = Vec::new();
        let prior: Vec<usize> = independent.iter().copied().filter(|&i| i < j).collect();
        if !prior.is_empty() && values.column(j).norm() > 0.0 {
            let sub = values.select_columns(&prior);
            let target = values.column(j).into_owned();
            if let Ok(coef) = sub.clone().svd(true, true).solve(&target, 1e-12) {
                let scale = coef.amax().max(1e-300);
                for (c, &i) in coef.iter().zip(&prior) {
                    if c.abs() > 1e-8 * scale {
                        columns.push(names[i].clone());
                    }
                }
            }
        }
        columns.push(names[j].clone());
        return Err(DataError::RankDeficient { rank, k, columns });
    }
    Ok(rank)
}

/// Per-period GDP per capita for one unit (e.g. a province by decade).
#[derive(Debug, Clone, PartialEq)]
pub struct GdpSeries {
    unit: String,
    periods: Vec<i64>,
    values: Vec<f64>,
}

impl GdpSeries {
    pub fn new(unit: impl Into<String>, periods: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        let unit = unit.into();
        assert_eq!(periods.len(), values.len(), "one value per period");
        if periods.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DataError::UnorderedPeriods { unit });
        }
        if let Some((&period, &value)) = periods.iter().zip(&values).find(|(_, v)| !(**v > 0.0)) {
            return Err(DataError::NonPositiveGdp { unit, period, value });
        }
        Ok(Self {
            unit,
            periods,
            values,
        })
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn periods(&self) -> &[i64] {
        &self.periods
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Growth from each period to the next, `(g[t+1] - g[t]) / g[t]`.
///
/// The result has one entry fewer than the series: the final period has no
/// successor and therefore no growth rate.
pub fn decadal_growth(series: &GdpSeries) -> Result<Vec<f64>> {
    if series.values.len() < 2 {
        return Err(DataError::TooFewPeriods {
            unit: series.unit.clone(),
            got: series.values.len(),
        });
    }
    Ok(series
        .values
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .collect())
}
