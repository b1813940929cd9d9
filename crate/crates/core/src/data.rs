//! Benchmark registry, dataset sampling, noise injection and data summaries.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{eval_columns, eval_point_strict};
use crate::expr::{parse_infix, ExprError, ExprTree};
use crate::rng::rng_for;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("task `{task}`: target is non-finite on more than 90% of sampled points")]
    DomainExhausted { task: String },
    #[error("invalid dataset: {0}")]
    Shape(String),
    #[error("invalid sampling spec: {0}")]
    Spec(String),
    #[error("noise level {0} outside [0, 0.1]")]
    InvalidNoise(f64),
    #[error("bad CSV header: column {column} is `{found}`, expected `{expected}`")]
    Header {
        column: usize,
        found: String,
        expected: String,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingMode {
    Uniform,
    Evenly,
}

/// How a task's inputs are drawn: `U(low, high, count)` or `E(low, high, count)`
/// applied to each of `dims` inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub mode: SamplingMode,
    pub low: f64,
    pub high: f64,
    pub count: usize,
    pub dims: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SamplingSpec {
    pub fn uniform(low: f64, high: f64, count: usize, dims: usize) -> Self {
        SamplingSpec {
            mode: SamplingMode::Uniform,
            low,
            high,
            count,
            dims,
            seed: 0,
        }
    }

    pub fn evenly(low: f64, high: f64, count: usize, dims: usize) -> Self {
        SamplingSpec {
            mode: SamplingMode::Evenly,
            ..SamplingSpec::uniform(low, high, count, dims)
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if !(self.low < self.high) {
            return Err(DataError::Spec(format!(
                "low {} >= high {}",
                self.low, self.high
            )));
        }
        if self.count == 0 {
            return Err(DataError::Spec("count must be positive".into()));
        }
        if !(1..=crate::expr::MAX_VARS).contains(&self.dims) {
            return Err(DataError::Spec(format!(
                "dims {} outside 1..=10",
                self.dims
            )));
        }
        Ok(())
    }

    /// Evenly spaced points per axis; multi-dimensional specs use a full
    /// grid with `round(count^(1/dims))` points on each axis.
    pub fn grid_points_per_axis(&self) -> usize {
        if self.dims == 1 {
            self.count
        } else {
            ((self.count as f64).powf(1.0 / self.dims as f64).round() as usize).max(2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Suite {
    Nguyen,
    Keijzer,
    Korns,
    Constant,
    Livermore,
    Vladislavleva,
    R,
    Jin,
    Neat,
    Others,
    Feynman,
}

impl std::str::FromStr for Suite {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "nguyen" => Suite::Nguyen,
            "keijzer" => Suite::Keijzer,
            "korns" => Suite::Korns,
            "constant" => Suite::Constant,
            "livermore" => Suite::Livermore,
            "vladislavleva" => Suite::Vladislavleva,
            "r" => Suite::R,
            "jin" => Suite::Jin,
            "neat" => Suite::Neat,
            "others" => Suite::Others,
            "feynman" => Suite::Feynman,
            _ => return Err(DataError::UnknownTask(s.to_string())),
        })
    }
}

/// A named regression problem with its ground-truth expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTask {
    pub name: String,
    /// Infix source of the target as it appears in the benchmark listing,
    /// normalized to `x1..x10` variable names.
    pub expression: String,
    pub target: ExprTree,
    pub spec: SamplingSpec,
    pub suite: Suite,
    /// Set when the printed formula had to be interpreted (ambiguous
    /// bracketing, typos, or operators outside the vocabulary).
    pub approximate_source: bool,
}

impl BenchmarkTask {
    pub fn new(
        name: &str,
        expression: &str,
        spec: SamplingSpec,
        suite: Suite,
    ) -> Result<Self, DataError> {
        let target = parse_infix(expression)?;
        spec.validate()?;
        if target.required_dims() > spec.dims {
            return Err(DataError::Spec(format!(
                "{name}: target uses {} inputs but spec has {}",
                target.required_dims(),
                spec.dims
            )));
        }
        Ok(BenchmarkTask {
            name: name.to_string(),
            expression: expression.to_string(),
            target,
            spec,
            suite,
            approximate_source: false,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.spec.seed = seed;
        self
    }

    fn approximate(mut self) -> Self {
        self.approximate_source = true;
        self
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub task: String,
    pub seed: u64,
    pub noise: f64,
}

/// Column-major table of inputs with one target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(
        columns: Vec<Vec<f64>>,
        y: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        if y.is_empty() {
            return Err(DataError::Shape("no rows".into()));
        }
        if columns.is_empty() || columns.len() > crate::expr::MAX_VARS {
            return Err(DataError::Shape(format!("{} input columns", columns.len())));
        }
        for (k, c) in columns.iter().enumerate() {
            if c.len() != y.len() {
                return Err(DataError::Shape(format!(
                    "column x{} has {} rows, y has {}",
                    k + 1,
                    c.len(),
                    y.len()
                )));
            }
        }
        if columns.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return Err(DataError::Shape("non-finite entry".into()));
        }
        Ok(Dataset {
            columns,
            y,
            provenance,
        })
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn dims(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Same inputs with a different target column.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Dataset, DataError> {
        Dataset::new(self.columns.clone(), y, self.provenance.clone())
    }

    /// Keep only the rows at `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Dataset, DataError> {
        let columns = self
            .columns
            .iter()
            .map(|c| idx.iter().map(|&i| c[i]).collect())
            .collect();
        let y = idx.iter().map(|&i| self.y[i]).collect();
        Dataset::new(columns, y, self.provenance.clone())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DataError> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.dims()).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        wr.write_record(&header)?;
        for i in 0..self.rows() {
            let mut rec: Vec<String> = self.columns.iter().map(|c| c[i].to_string()).collect();
            rec.push(self.y[i].to_string());
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Read a CSV with header `x1,...,xd,y`.
    pub fn read_csv<R: Read>(r: R, provenance: Provenance) -> Result<Dataset, DataError> {
        let mut rd = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let header = rd.headers()?.clone();
        let ncol = header.len();
        if ncol < 2 {
            return Err(DataError::Header {
                column: ncol + 1,
                found: String::new(),
                expected: if ncol == 0 { "x1".into() } else { "y".into() },
            });
        }
        for (i, h) in header.iter().enumerate() {
            let expected = if i + 1 == ncol {
                "y".to_string()
            } else {
                format!("x{}", i + 1)
            };
            if h != expected {
                return Err(DataError::Header {
                    column: i + 1,
                    found: h.to_string(),
                    expected,
                });
            }
        }
        let d = ncol - 1;
        let mut columns = vec![Vec::new(); d];
        let mut y = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            for (i, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    DataError::Shape(format!("row {}: cannot parse `{field}`", line + 1))
                })?;
                if i < d {
                    columns[i].push(v);
                } else {
                    y.push(v);
                }
            }
        }
        Dataset::new(columns, y, provenance)
    }
}

fn linspace(low: f64, high: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![low];
    }
    let step = (high - low) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                high
            } else {
                low + step * i as f64
            }
        })
        .collect()
}

/// Draw a dataset for `task` using `task.spec.seed`.
///
/// Targets are evaluated with plain IEEE arithmetic; points where that is
/// non-finite lie outside the target's domain and are resampled (uniform
/// mode) or dropped (evenly mode).
pub fn sample(task: &BenchmarkTask) -> Result<Dataset, DataError> {
    let spec = &task.spec;
    spec.validate()?;
    let d = spec.dims;
    let provenance = Provenance {
        task: task.name.clone(),
        seed: spec.seed,
        noise: 0.0,
    };
    let mut columns = vec![Vec::with_capacity(spec.count); d];
    let mut y = Vec::with_capacity(spec.count);
    let mut point = vec![0.0; d];
    let mut attempts = 0usize;
    let mut failures = 0usize;
    match spec.mode {
        SamplingMode::Uniform => {
            let mut rng = rng_for(spec.seed, &[0xDA7A]);
            while y.len() < spec.count {
                for p in point.iter_mut() {
                    *p = rng.random_range(spec.low..spec.high);
                }
                attempts += 1;
                let v = eval_point_strict(&task.target, &point);
                if v.is_finite() {
                    for (c, p) in columns.iter_mut().zip(&point) {
                        c.push(*p);
                    }
                    y.push(v);
                } else {
                    failures += 1;
                    if attempts >= 100 && failures * 10 > attempts * 9 {
                        return Err(DataError::DomainExhausted {
                            task: task.name.clone(),
                        });
                    }
                }
            }
        }
        SamplingMode::Evenly => {
            let axis = linspace(spec.low, spec.high, spec.grid_points_per_axis());
            let total = axis.len().pow(d as u32);
            for mut idx in 0..total {
                for p in point.iter_mut() {
                    *p = axis[idx % axis.len()];
                    idx /= axis.len();
                }
                attempts += 1;
                let v = eval_point_strict(&task.target, &point);
                if v.is_finite() {
                    for (c, p) in columns.iter_mut().zip(&point) {
                        c.push(*p);
                    }
                    y.push(v);
                } else {
                    failures += 1;
                }
            }
            if failures * 10 > attempts * 9 || y.len() < 2 {
                return Err(DataError::DomainExhausted {
                    task: task.name.clone(),
                });
            }
        }
    }
    Dataset::new(columns, y, provenance)
}

/// Sample `task` with an explicit seed.
pub fn sample_seeded(task: &BenchmarkTask, seed: u64) -> Result<Dataset, DataError> {
    sample(&task.clone().with_seed(seed))
}

/// Add uniform noise of half-width `level · Span(y)` to every target value,
/// where `Span = |max(y) − min(y)|`.
pub fn add_noise(ds: &Dataset, level: f64, seed: u64) -> Result<Dataset, DataError> {
    if !(0.0..=0.1 + 1e-12).contains(&level) {
        return Err(DataError::InvalidNoise(level));
    }
    let mut out = ds.clone();
    out.provenance.noise = level;
    if level == 0.0 {
        return Ok(out);
    }
    let width = level * span(&ds.y);
    let mut rng = rng_for(seed, &[0x0015E]);
    for v in out.y.iter_mut() {
        *v += width * (2.0 * rng.random::<f64>() - 1.0);
    }
    Ok(out)
}

/// `|max − min|` of a slice.
pub fn span(v: &[f64]) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo).abs()
}

/// Fixed-length, row-order-invariant description of a dataset:
/// `(min, max, mean, std)` of every input column and of `y`, then the row
/// count. Standard deviations use the population convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary(pub Vec<f64>);

impl DataSummary {
    pub fn dims(&self) -> usize {
        (self.0.len() - 1) / 4 - 1
    }

    pub fn y_mean(&self) -> f64 {
        self.0[4 * self.dims() + 2]
    }

    pub fn y_std(&self) -> f64 {
        self.0[4 * self.dims() + 3]
    }

    pub fn count(&self) -> f64 {
        *self.0.last().unwrap()
    }
}

fn column_stats(v: &[f64]) -> [f64; 4] {
    // Sorting first makes the floating-point sums independent of row order.
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = s.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / n;
    [s[0], s[s.len() - 1], mean, var.sqrt()]
}

pub fn summarize(ds: &Dataset) -> DataSummary {
    let mut out = Vec::with_capacity(4 * (ds.dims() + 1) + 1);
    for c in ds.columns() {
        out.extend(column_stats(c));
    }
    out.extend(column_stats(ds.y()));
    out.push(ds.rows() as f64);
    DataSummary(out)
}

/// Feynman equations in the registry, in listing order, with their
/// variable order.
const FEYNMAN: &[(&str, &str, usize)] = &[
    ("I.6.20a", "exp(-x1^2/2)/sqrt(2*pi)", 1),
    ("I.6.20", "exp(-x1^2/(2*x2^2))/sqrt(2*pi*x2^2)", 2),
    ("I.12.1", "x1*x2", 2),
    ("I.12.5", "x1*x2", 2),
    ("I.14.4", "x1*x2^2/2", 2),
    ("I.25.13", "x1/x2", 2),
    ("I.29.4", "x1/x2", 2),
    ("I.34.27", "x1*x2", 2),
    ("I.39.10", "3/2*x1*x2", 2),
    ("I.6.20b", "exp(-(x1-x2)^2/(2*x3^2))/sqrt(2*pi*x3^2)", 3),
    ("I.12.4", "x1/(4*pi*x2*x3^2)", 3),
    ("I.14.3", "x1*x2*x3", 3),
    ("I.15.10", "x1*x2/sqrt(1-x2^2/x3^2)", 3),
    ("I.16.6", "(x1+x2)/(1+x1*x2/x3^2)", 3),
    ("I.18.12", "x1*x2*sin(x3)", 3),
    ("I.27.6", "1/(1/x1+x2/x3)", 3),
    ("I.30.3", "x1*sin(x2*x3/2)^2/sin(x3/2)^2", 3),
    ("I.34.10", "x1/(1-x2/x3)", 3),
    ("I.34.14", "(1+x1/x2)/sqrt(1-x1^2/x2^2)*x3", 3),
    ("I.37.4", "x1+x2+2*sqrt(x1*x2)*cos(x3)", 3),
];

/// Every benchmark task, in listing order.
pub fn registry() -> Vec<BenchmarkTask> {
    use SamplingSpec as S;
    use Suite::*;
    let u = S::uniform;
    let e = S::evenly;
    // (name, expression, spec, suite, approximate)
    let rows: Vec<(&str, &str, SamplingSpec, Suite, bool)> = vec![
        (
            "Nguyen-1",
            "x1^3+x1^2+x1",
            u(-1.0, 1.0, 20, 1),
            Nguyen,
            false,
        ),
        (
            "Nguyen-2",
            "x1^4+x1^3+x1^2+x1",
            u(-1.0, 1.0, 20, 1),
            Nguyen,
            false,
        ),
        (
            "Nguyen-3",
            "x1^5+x1^4+x1^3+x1^2+x1",
            u(-1.0, 1.0, 20, 1),
            Nguyen,
            false,
        ),
        (
            "Nguyen-4",
            "x1^6+x1^5+x1^4+x1^3+x1^2+x1",
            u(-1.0, 1.0, 20, 1),
            Nguyen,
            false,
        ),
        (
            "Nguyen-5",
            "sin(x1^2)*cos(x1)-1",
            u(-1.0, 1.0, 20, 1),
            Nguyen,
            false,
        ),
        (
            "Nguyen-6",
            "sin(x1)+sin(x1+x1^2)",
            u(-1.0, 1.0, 20, 1),
            Nguyen,
            false,
        ),
        (
            "Nguyen-7",
            "log(x1+1)+log(x1^2+1)",
            u(0.0, 2.0, 20, 1),
            Nguyen,
            false,
        ),
        ("Nguyen-8", "sqrt(x1)", u(0.0, 4.0, 20, 1), Nguyen, false),
        (
            "Nguyen-9",
            "sin(x1)+sin(x2^2)",
            u(0.0, 1.0, 20, 2),
            Nguyen,
            false,
        ),
        (
            "Nguyen-10",
            "2*sin(x1)*cos(x2)",
            u(0.0, 1.0, 20, 2),
            Nguyen,
            false,
        ),
        ("Nguyen-11", "x1^x2", u(0.0, 1.0, 20, 2), Nguyen, false),
        (
            "Nguyen-12",
            "x1^4-x1^3+1/2*x2^2-x2",
            u(0.0, 1.0, 20, 2),
            Nguyen,
            false,
        ),
        (
            "Nguyen-2'",
            "4*x1^4+3*x1^3+2*x1^2+x1",
            u(-1.0, 1.0, 20, 1),
            Nguyen,
            false,
        ),
        (
            "Nguyen-5'",
            "sin(x1^2)*cos(x1)-2",
            u(-1.0, 1.0, 20, 1),
            Nguyen,
            false,
        ),
        ("Nguyen-8'", "x1^(1/3)", u(0.0, 4.0, 20, 1), Nguyen, true),
        (
            "Nguyen-8''",
            "(x1^2)^(1/3)",
            u(0.0, 4.0, 20, 1),
            Nguyen,
            true,
        ),
        (
            "Nguyen-1c",
            "3.39*x1^3+2.12*x1^2+1.78*x1",
            u(-1.0, 1.0, 20, 1),
            Nguyen,
            false,
        ),
        (
            "Nguyen-5c",
            "sin(x1^2)*cos(x1)-0.75",
            u(-1.0, 1.0, 20, 1),
            Nguyen,
            false,
        ),
        (
            "Nguyen-7c",
            "log(x1+1.4)+log(x1^2+1.3)",
            u(0.0, 2.0, 20, 1),
            Nguyen,
            false,
        ),
        (
            "Nguyen-8c",
            "sqrt(1.23*x1)",
            u(0.0, 4.0, 20, 1),
            Nguyen,
            false,
        ),
        (
            "Nguyen-10c",
            "sin(1.5*x1)*cos(0.5*x2)",
            u(0.0, 1.0, 20, 2),
            Nguyen,
            false,
        ),
        (
            "Korns-1",
            "1.57+24.3*x1^4",
            u(-1.0, 1.0, 20, 1),
            Korns,
            false,
        ),
        (
            "Korns-2",
            "0.23+14.2*(x4+x1)/(3*x2)",
            u(-1.0, 1.0, 20, 4),
            Korns,
            false,
        ),
        (
            "Korns-3",
            "4.9*(x2-x1+x1/x3)/(3*x3)-5.41",
            u(-1.0, 1.0, 20, 3),
            Korns,
            true,
        ),
        (
            "Korns-4",
            "0.13*sin(x1)-2.3",
            u(-1.0, 1.0, 20, 1),
            Korns,
            false,
        ),
        (
            "Korns-5",
            "3+2.13*log(abs(x5))",
            u(-1.0, 1.0, 20, 5),
            Korns,
            false,
        ),
        (
            "Korns-6",
            "1.3+0.13*sqrt(abs(x1))",
            u(-1.0, 1.0, 20, 1),
            Korns,
            false,
        ),
        (
            "Korns-7",
            "2.1*(1-exp(-0.55*x1))",
            u(-1.0, 1.0, 20, 1),
            Korns,
            false,
        ),
        (
            "Korns-8",
            "6.87+11*sqrt(abs(7.23*x1*x4*x5))",
            u(-1.0, 1.0, 20, 5),
            Korns,
            false,
        ),
        (
            "Korns-9",
            "12*sqrt(abs(4.2*x1*x2*x2))",
            u(-1.0, 1.0, 20, 2),
            Korns,
            false,
        ),
        (
            "Korns-10",
            "0.81+24.3*(2*x1+3*x2^2)/(4*x3^3+5*x4^4)",
            u(-1.0, 1.0, 20, 4),
            Korns,
            true,
        ),
        (
            "Korns-11",
            "6.87+11*cos(7.23*x1^3)",
            u(-1.0, 1.0, 20, 1),
            Korns,
            false,
        ),
        (
            "Korns-12",
            "2-2.1*cos(9.8*x1^3)*sin(1.3*x5)",
            u(-1.0, 1.0, 20, 5),
            Korns,
            false,
        ),
        (
            "Korns-13",
            "32.0-3.0*tan(x1)/tan(x2)*tan(x3)/tan(x4)",
            u(-1.0, 1.0, 20, 4),
            Korns,
            false,
        ),
        (
            "Korns-14",
            "22.0-(4.2*cos(x1)-tan(x2))*tanh(x3)/sin(x4)",
            u(-1.0, 1.0, 20, 4),
            Korns,
            false,
        ),
        (
            "Korns-15",
            "12.0-6.0*tan(x1)/exp(x2)*(log(x3)-tan(x4))",
            u(-1.0, 1.0, 20, 4),
            Korns,
            false,
        ),
        (
            "Jin-1",
            "2.5*x1^4-1.3*x1^3+0.5*x2^2-1.7*x2",
            u(-3.0, 3.0, 100, 2),
            Jin,
            false,
        ),
        (
            "Jin-2",
            "8.0*x1^2+8.0*x2^3-15.0",
            u(-3.0, 3.0, 100, 2),
            Jin,
            false,
        ),
        (
            "Jin-3",
            "0.2*x1^3+0.5*x2^3-1.2*x2-0.5*x1",
            u(-3.0, 3.0, 100, 2),
            Jin,
            false,
        ),
        (
            "Jin-4",
            "1.5*exp(x1)+5.0*cos(x2)",
            u(-3.0, 3.0, 100, 2),
            Jin,
            false,
        ),
        (
            "Jin-5",
            "6.0*sin(x1)*cos(x2)",
            u(-3.0, 3.0, 100, 2),
            Jin,
            false,
        ),
        (
            "Jin-6",
            "1.35*x1*x2+5.5*sin((x1-1.0)*(x2-1.0))",
            u(-3.0, 3.0, 100, 2),
            Jin,
            false,
        ),
        (
            "Neat-1",
            "x1^4+x1^3+x1^2+x1",
            u(-1.0, 1.0, 20, 1),
            Neat,
            false,
        ),
        (
            "Neat-2",
            "x1^5+x1^4+x1^3+x1^2+x1",
            u(-1.0, 1.0, 20, 1),
            Neat,
            false,
        ),
        (
            "Neat-3",
            "sin(x1^2)*cos(x1)-1",
            u(-1.0, 1.0, 20, 1),
            Neat,
            false,
        ),
        (
            "Neat-4",
            "log(x1+1)+log(x1^2+1)",
            u(0.0, 2.0, 20, 1),
            Neat,
            false,
        ),
        (
            "Neat-5",
            "2*sin(x1)*cos(x2)",
            u(-1.0, 1.0, 100, 2),
            Neat,
            false,
        ),
        // Harmonic number H(x) via its asymptotic expansion.
        (
            "Neat-6",
            "log(x1)+0.5772156649+1/(2*x1)-1/(12*x1^2)",
            e(1.0, 50.0, 50, 1),
            Neat,
            true,
        ),
        (
            "Neat-7",
            "2-2.1*cos(9.8*x1)*sin(1.3*x2)",
            e(-50.0, 50.0, 100_000, 2),
            Neat,
            false,
        ),
        (
            "Neat-8",
            "exp(-(x1)^2)/(1.2+(x2-2.5)^2)",
            u(0.3, 4.0, 100, 2),
            Neat,
            false,
        ),
        (
            "Neat-9",
            "1/(1+x1^-4)+1/(1+x2^-4)",
            e(-5.0, 5.0, 21, 2),
            Neat,
            false,
        ),
        (
            "Keijzer-1",
            "0.3*x1*sin(2*pi*x1)",
            u(-1.0, 1.0, 20, 1),
            Keijzer,
            false,
        ),
        (
            "Keijzer-2",
            "2.0*x1*sin(0.5*pi*x1)",
            u(-1.0, 1.0, 20, 1),
            Keijzer,
            false,
        ),
        (
            "Keijzer-3",
            "0.92*x1*sin(2.41*pi*x1)",
            u(-1.0, 1.0, 20, 1),
            Keijzer,
            false,
        ),
        (
            "Keijzer-4",
            "x1^3*exp(-x1)*cos(x1)*sin(x1)*sin(x1)^2*cos(x1)-1",
            u(-1.0, 1.0, 20, 1),
            Keijzer,
            false,
        ),
        (
            "Keijzer-5",
            "3+2.13*log(abs(x5))",
            u(-1.0, 1.0, 20, 5),
            Keijzer,
            false,
        ),
        (
            "Keijzer-6",
            "x1*(x1+1)/2",
            u(-1.0, 1.0, 20, 1),
            Keijzer,
            false,
        ),
        ("Keijzer-7", "log(x1)", u(0.0, 1.0, 20, 1), Keijzer, false),
        ("Keijzer-8", "sqrt(x1)", u(0.0, 1.0, 20, 1), Keijzer, false),
        (
            "Keijzer-9",
            "log(x1+sqrt(x1^2)+1)",
            u(-1.0, 1.0, 20, 1),
            Keijzer,
            false,
        ),
        ("Keijzer-10", "x1^x2", u(-1.0, 1.0, 20, 2), Keijzer, false),
        (
            "Keijzer-11",
            "x1*x2+sin((x1-1)*(x2-1))",
            u(-1.0, 1.0, 20, 2),
            Keijzer,
            false,
        ),
        (
            "Keijzer-12",
            "x1^4-x1^3+x2^2/2-x2",
            u(-1.0, 1.0, 20, 2),
            Keijzer,
            false,
        ),
        (
            "Keijzer-13",
            "6*sin(x1)*cos(x2)",
            u(-1.0, 1.0, 20, 2),
            Keijzer,
            false,
        ),
        (
            "Keijzer-14",
            "8/(2+x1^2+x2^2)",
            u(-1.0, 1.0, 20, 2),
            Keijzer,
            false,
        ),
        (
            "Keijzer-15",
            "x1^3/5+x2^3/2-x2-x1",
            u(-1.0, 1.0, 20, 2),
            Keijzer,
            false,
        ),
        (
            "Livermore-1",
            "1/3+x1+sin(x1^2)",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            false,
        ),
        (
            "Livermore-2",
            "sin(x1^2)*cos(x1)-2",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            false,
        ),
        (
            "Livermore-3",
            "sin(x1^3)*cos(x1^2)-1",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            false,
        ),
        (
            "Livermore-4",
            "log(x1+1)+log(x1^2+1)+log(x1)",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            false,
        ),
        (
            "Livermore-5",
            "x1^4-x1^3+x2^2-x2",
            u(-3.0, 3.0, 100, 2),
            Livermore,
            false,
        ),
        (
            "Livermore-6",
            "4*x1^4+3*x1^3+2*x1^2+x1",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            false,
        ),
        (
            "Livermore-7",
            "(exp(x1)-exp(-x1))/2",
            u(-1.0, 1.0, 100, 1),
            Livermore,
            false,
        ),
        (
            "Livermore-8",
            "(exp(x1)+exp(-x1))/3",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            false,
        ),
        (
            "Livermore-9",
            "x1^9+x1^8+x1^7+x1^6+x1^5+x1^4+x1^3+x1^2+x1",
            u(-1.0, 1.0, 100, 1),
            Livermore,
            false,
        ),
        (
            "Livermore-10",
            "6*sin(x1)*cos(x2)",
            u(-3.0, 3.0, 100, 2),
            Livermore,
            false,
        ),
        (
            "Livermore-11",
            "x1^2*x2^2/(x1+x2)",
            u(-3.0, 3.0, 100, 2),
            Livermore,
            false,
        ),
        (
            "Livermore-12",
            "x1^5/x2^3",
            u(-3.0, 3.0, 100, 2),
            Livermore,
            false,
        ),
        (
            "Livermore-13",
            "x1^(1/3)",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            true,
        ),
        (
            "Livermore-14",
            "x1^3+x1^2+x1+sin(x1)+sin(x2^2)",
            u(-1.0, 1.0, 100, 2),
            Livermore,
            false,
        ),
        (
            "Livermore-15",
            "x1^(1/5)",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            true,
        ),
        (
            "Livermore-16",
            "x1^(2/3)",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            true,
        ),
        (
            "Livermore-17",
            "4*sin(x1)*cos(x2)",
            u(-3.0, 3.0, 100, 2),
            Livermore,
            false,
        ),
        (
            "Livermore-18",
            "sin(x1^2)*cos(x1)-5",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            false,
        ),
        (
            "Livermore-19",
            "x1^5+x1^4+x1^2+x1",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            false,
        ),
        (
            "Livermore-20",
            "exp(-x1^2)",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            false,
        ),
        (
            "Livermore-21",
            "x1^8+x1^7+x1^6+x1^5+x1^4+x1^3+x1^2+x1",
            u(-1.0, 1.0, 20, 1),
            Livermore,
            false,
        ),
        (
            "Livermore-22",
            "exp(-0.5*x1^2)",
            u(-3.0, 3.0, 100, 1),
            Livermore,
            false,
        ),
        (
            "Vladislavleva-1",
            "exp(-(x1-1)^2)/(1.2+(x2-2.5)^2)",
            u(-1.0, 1.0, 20, 2),
            Vladislavleva,
            false,
        ),
        (
            "Vladislavleva-2",
            "exp(-x1)*x1^3*cos(x1)*sin(x1)*(cos(x1)*sin(x1)^2-1)",
            u(-1.0, 1.0, 20, 1),
            Vladislavleva,
            false,
        ),
        (
            "Vladislavleva-3",
            "exp(-x1)*x1^3*cos(x1)*sin(x1)*(cos(x1)*sin(x1)^2-1)*(x2-5)",
            u(-1.0, 1.0, 20, 2),
            Vladislavleva,
            false,
        ),
        (
            "Vladislavleva-4",
            "10/(5+(x1-3)^2+(x2-3)^2+(x3-3)^2+(x4-3)^2+(x5-3)^2)",
            u(0.0, 2.0, 20, 5),
            Vladislavleva,
            false,
        ),
        (
            "Vladislavleva-5",
            "30*(x1-1)*((x3-1)/(x1-10))*x2^2",
            u(-1.0, 1.0, 100, 3),
            Vladislavleva,
            false,
        ),
        (
            "Vladislavleva-6",
            "6*sin(x1)*cos(x2)",
            e(1.0, 50.0, 50, 2),
            Vladislavleva,
            false,
        ),
        (
            "Vladislavleva-7",
            "2-2.1*cos(9.8*x1)*sin(1.3*x2)",
            e(-50.0, 50.0, 100_000, 2),
            Vladislavleva,
            false,
        ),
        (
            "Vladislavleva-8",
            "exp(-(x1-1)^2)/(1.2+(x2-2.5)^2)",
            u(0.3, 4.0, 100, 2),
            Vladislavleva,
            false,
        ),
        ("Test-2", "3.14*x1^2", u(-1.0, 1.0, 20, 1), Others, false),
        ("Const-Test-1", "5*x1^2", u(-1.0, 1.0, 20, 1), Others, false),
        (
            "GrammarVAE-1",
            "1/3+x1+sin(x1^2)",
            u(-1.0, 1.0, 20, 1),
            Others,
            false,
        ),
        (
            "Sine",
            "sin(x1)+sin(x1+x1^2)",
            u(-1.0, 1.0, 20, 1),
            Others,
            false,
        ),
        (
            "Nonic",
            "x1^9+x1^8+x1^7+x1^6+x1^5+x1^4+x1^3+x1^2+x1",
            u(-1.0, 1.0, 100, 1),
            Others,
            false,
        ),
        (
            "Pagie-1",
            "1/(1+x1^-4+1/(1+x2^-4))",
            e(1.0, 50.0, 50, 2),
            Others,
            true,
        ),
        (
            "Meier-3",
            "x1^2*x2^2/(x1+x2)",
            e(-50.0, 50.0, 100_000, 2),
            Others,
            false,
        ),
        ("Meier-4", "x1^5/x2^3", u(0.3, 4.0, 100, 2), Others, false),
        (
            "Poly-10",
            "x1*x2+x3*x4+x5*x6+x1*x7*x9+x3*x6*x10",
            e(-1.0, 1.0, 100, 10),
            Others,
            false,
        ),
        (
            "Constant-1",
            "3.39*x1^3+2.12*x1^2+1.78*x1",
            u(-4.0, 4.0, 100, 1),
            Constant,
            false,
        ),
        (
            "Constant-2",
            "sin(x1^2)*cos(x1)-0.75",
            u(-4.0, 4.0, 100, 1),
            Constant,
            false,
        ),
        (
            "Constant-3",
            "sin(1.5*x1)*cos(0.5*x2)",
            u(0.1, 4.0, 100, 2),
            Constant,
            false,
        ),
        (
            "Constant-4",
            "2.7*x1^x2",
            u(0.3, 4.0, 100, 2),
            Constant,
            false,
        ),
        (
            "Constant-5",
            "sqrt(1.23*x1)",
            u(0.1, 4.0, 100, 1),
            Constant,
            false,
        ),
        (
            "Constant-6",
            "x1^0.426",
            u(0.0, 4.0, 100, 1),
            Constant,
            false,
        ),
        (
            "Constant-7",
            "2*sin(1.3*x1)*cos(x2)",
            u(-4.0, 4.0, 100, 2),
            Constant,
            false,
        ),
        (
            "Constant-8",
            "log(x1+1.4)+log(x1^2+1.3)",
            u(-4.0, 4.0, 100, 1),
            Constant,
            true,
        ),
        ("R1", "(x1+1)^3/(x1^2-x1+1)", u(-5.0, 5.0, 100, 1), R, false),
        (
            "R2",
            "(x1^2-3*x1^2+1)/(x1^2+1)",
            u(-4.0, 4.0, 100, 1),
            R,
            true,
        ),
        (
            "R3",
            "(x1^6+x1^5)/(x1^4+x1^3+x1^2+x1+1)",
            u(-4.0, 4.0, 100, 1),
            R,
            false,
        ),
    ];
    let mut out: Vec<BenchmarkTask> = rows
        .into_iter()
        .map(|(name, expr, spec, suite, approx)| {
            let t = BenchmarkTask::new(name, expr, spec, suite)
                .unwrap_or_else(|e| panic!("registry entry {name}: {e}"));
            if approx {
                t.approximate()
            } else {
                t
            }
        })
        .collect();
    out.extend(FEYNMAN.iter().map(|&(name, expr, dims)| {
        BenchmarkTask::new(name, expr, u(1.0, 5.0, 100, dims), Feynman)
            .unwrap_or_else(|e| panic!("registry entry {name}: {e}"))
    }));
    out
}

/// Look up a registry task by name.
pub fn task(name: &str) -> Result<BenchmarkTask, DataError> {
    registry()
        .into_iter()
        .find(|t| t.name == name)
        .ok_or_else(|| DataError::UnknownTask(name.to_string()))
}

/// Registry entries of one suite.
pub fn suite(s: Suite) -> Vec<BenchmarkTask> {
    registry().into_iter().filter(|t| t.suite == s).collect()
}

/// Flat registry record for JSON export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub name: String,
    pub expression: String,
    pub mode: SamplingMode,
    pub low: f64,
    pub high: f64,
    pub count: usize,
    pub dims: usize,
    pub suite: Suite,
    pub approximate_source: bool,
}

pub fn registry_json() -> String {
    let entries: Vec<RegistryEntry> = registry()
        .into_iter()
        .map(|t| RegistryEntry {
            name: t.name,
            expression: t.expression,
            mode: t.spec.mode,
            low: t.spec.low,
            high: t.spec.high,
            count: t.spec.count,
            dims: t.spec.dims,
            suite: t.suite,
            approximate_source: t.approximate_source,
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("registry serializes")
}

/// Evaluate the task target on a dataset (protected semantics).
pub fn target_values(task: &BenchmarkTask, ds: &Dataset) -> Vec<f64> {
    eval_columns(&task.target, ds.columns(), ds.rows()).expect("target fits dataset")
}

/// Shared, immutable dataset handle.
pub type SharedDataset = Arc<Dataset>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{fitness, r_squared};

    #[test]
    fn registry_examples() {
        let k1 = task("Korns-1").unwrap();
        assert_eq!(k1.spec, SamplingSpec::uniform(-1.0, 1.0, 20, 1));
        let x = 0.7f64;
        let v = crate::eval::eval_point(&k1.target, &[x]);
        assert!((v - (1.57 + 24.3 * x.powi(4))).abs() < 1e-12);

        let l10 = task("Livermore-10").unwrap();
        assert_eq!(l10.spec, SamplingSpec::uniform(-3.0, 3.0, 100, 2));
        let v = crate::eval::eval_point(&l10.target, &[0.4, -1.1]);
        assert!((v - 6.0 * 0.4f64.sin() * (-1.1f64).cos()).abs() < 1e-12);

        let c1 = task("Constant-1").unwrap();
        assert_eq!(c1.spec, SamplingSpec::uniform(-4.0, 4.0, 100, 1));
        assert_eq!(c1.target.constants(), vec![3.39, 2.12, 1.78]);

        assert_eq!(task("Nguyen-1").unwrap().target.len(), 11);
        assert!(task("Korns-3").unwrap().approximate_source);
        assert!(task("Korns-10").unwrap().approximate_source);
        assert_eq!(suite(Suite::Feynman).len(), 20);
    }

    #[test]
    fn registry_counts() {
        let r = registry();
        let count = |s| r.iter().filter(|t| t.suite == s).count();
        assert_eq!(count(Suite::Nguyen), 21);
        assert_eq!(count(Suite::Korns), 15);
        assert_eq!(count(Suite::Jin), 6);
        assert_eq!(count(Suite::Neat), 9);
        assert_eq!(count(Suite::Keijzer), 15);
        assert_eq!(count(Suite::Livermore), 22);
        assert_eq!(count(Suite::Vladislavleva), 8);
        assert_eq!(count(Suite::Others), 9);
        assert_eq!(count(Suite::Constant), 8);
        assert_eq!(count(Suite::R), 3);
        let mut names: Vec<_> = r.iter().map(|t| t.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), r.len());
    }

    #[test]
    fn nguyen8_is_nonnegative() {
        let ds = sample(&task("Nguyen-8").unwrap()).unwrap();
        assert_eq!(ds.rows(), 20);
        assert!(ds.y().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn constant_target() {
        let t = BenchmarkTask::new(
            "five",
            "5",
            SamplingSpec::uniform(-1.0, 1.0, 20, 1),
            Suite::Others,
        )
        .unwrap();
        let ds = sample(&t).unwrap();
        assert!(ds.y().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn nguyen7_matches_pointwise_oracle() {
        let ds = sample_seeded(&task("Nguyen-7").unwrap(), 3).unwrap();
        for i in 0..ds.rows() {
            let x = ds.column(0)[i];
            let want = (x + 1.0).ln() + (x * x + 1.0).ln();
            assert!((ds.y()[i] - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let t = task("Nguyen-1").unwrap();
        assert_eq!(sample_seeded(&t, 1).unwrap(), sample_seeded(&t, 1).unwrap());
        assert_ne!(
            sample_seeded(&t, 1).unwrap().columns(),
            sample_seeded(&t, 2).unwrap().columns()
        );
    }

    #[test]
    fn domain_rejection_and_exhaustion() {
        // log(x) on [-3, 3]: half the draws are rejected, never kept.
        let ds = sample(&task("Livermore-4").unwrap()).unwrap();
        assert_eq!(ds.rows(), 100);
        assert!(ds.column(0).iter().all(|&x| x > 0.0));
        let t = BenchmarkTask::new(
            "bad",
            "log(0-x1*x1-1)",
            SamplingSpec::uniform(-1.0, 1.0, 10, 1),
            Suite::Others,
        )
        .unwrap();
        assert!(matches!(sample(&t), Err(DataError::DomainExhausted { .. })));
    }

    #[test]
    fn evenly_grid() {
        let ds = sample(&task("Neat-6").unwrap()).unwrap();
        assert_eq!(ds.rows(), 50);
        assert_eq!(ds.column(0)[0], 1.0);
        assert_eq!(ds.column(0)[49], 50.0);
        let ds = sample(&task("Neat-9").unwrap()).unwrap();
        assert_eq!(ds.rows(), 25);
    }

    #[test]
    fn every_task_samples_and_fits_itself() {
        for t in registry() {
            if t.spec.count > 1000 {
                continue; // the 10^5-point grids are covered by an ignored test
            }
            let ds = sample(&t).unwrap_or_else(|e| panic!("{}: {e}", t.name));
            let yhat = target_values(&t, &ds);
            for (a, b) in ds.y().iter().zip(&yhat) {
                assert!(
                    (a - b).abs() <= 1e-6 * (1.0 + a.abs()),
                    "{}: {a} vs {b}",
                    t.name
                );
            }
            let f = fitness(&t.target, &ds).unwrap();
            assert!(f.r2 > 1.0 - 1e-9, "{}: r2 {}", t.name, f.r2);
        }
    }

    #[test]
    #[ignore = "large grids; run explicitly"]
    fn large_grid_tasks_sample() {
        for name in ["Neat-7", "Vladislavleva-7", "Meier-3"] {
            let t = task(name).unwrap();
            let ds = sample(&t).unwrap();
            assert!(ds.rows() > 90_000);
            assert!(r_squared(ds.y(), &target_values(&t, &ds)).unwrap() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn noise_bounds() {
        let x: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let ds = Dataset::new(vec![x.clone()], x, Provenance::default()).unwrap();
        assert_eq!(add_noise(&ds, 0.0, 1).unwrap().y(), ds.y());
        let n = add_noise(&ds, 0.1, 1).unwrap();
        assert!(n.y().iter().zip(ds.y()).all(|(a, b)| (a - b).abs() <= 1.0));
        assert_eq!(n.columns(), ds.columns());
        assert!(add_noise(&ds, 0.2, 1).is_err());
    }

    #[test]
    fn noise_mean_absolute_deviation() {
        let n = 100_000;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64 * 10.0).collect();
        let ds = Dataset::new(vec![x.clone()], x, Provenance::default()).unwrap();
        let level = 0.05;
        let noisy = add_noise(&ds, level, 9).unwrap();
        let mad = noisy
            .y()
            .iter()
            .zip(ds.y())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n as f64;
        let want = level * 10.0 / 2.0;
        assert!((mad - want).abs() / want < 0.02, "{mad} vs {want}");
    }

    #[test]
    fn summary_conventions() {
        let ds = Dataset::new(
            vec![vec![0.0, 1.0, 2.0]],
            vec![1.0, 1.0, 1.0],
            Provenance::default(),
        )
        .unwrap();
        let s = summarize(&ds);
        assert_eq!(s.0.len(), 9);
        assert_eq!(s.y_mean(), 1.0);
        assert_eq!(s.y_std(), 0.0);
        let ds = Dataset::new(vec![vec![0.0, 1.0]], vec![0.0, 2.0], Provenance::default()).unwrap();
        let s = summarize(&ds);
        assert_eq!(s.y_mean(), 1.0);
        assert_eq!(s.y_std(), 1.0);
        assert_eq!(s.count(), 2.0);
    }

    #[test]
    fn summary_is_permutation_invariant() {
        let ds = sample(&task("Nguyen-10").unwrap()).unwrap();
        let mut idx: Vec<usize> = (0..ds.rows()).collect();
        idx.reverse();
        idx.swap(0, 7);
        assert_eq!(summarize(&ds), summarize(&ds.select_rows(&idx).unwrap()));
    }

    #[test]
    fn csv_round_trip_and_header_errors() {
        let ds = sample(&task("Nguyen-9").unwrap()).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..], ds.provenance.clone()).unwrap();
        assert_eq!(back, ds);
        let err =
            Dataset::read_csv("x1,z,y\n1,2,3\n".as_bytes(), Provenance::default()).unwrap_err();
        assert!(matches!(err, DataError::Header { column: 2, .. }), "{err}");
        assert!(err.to_string().contains("`z`"));
    }

    #[test]
    fn registry_json_lists_every_task() {
        let v: Vec<RegistryEntry> = serde_json::from_str(&registry_json()).unwrap();
        assert_eq!(v.len(), registry().len());
    }
}
