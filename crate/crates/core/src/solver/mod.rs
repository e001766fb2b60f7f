//! Reference LP solver and optimality certificates.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::lp::{mps, LinearProgram};
use crate::{Error, Result};

mod certificate;
mod lu;
mod simplex;

pub use certificate::{verify_certificate, CertificateReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Absolute primal feasibility tolerance inside the simplex.
    pub feasibility_tolerance: f64,
    /// Reduced-cost tolerance inside the simplex.
    pub optimality_tolerance: f64,
    /// Basis updates between refactorizations.
    pub refactor_interval: usize,
    /// Tolerance of the optimality certificate.
    pub certificate_tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 2_000_000,
            feasibility_tolerance: 1e-9,
            optimality_tolerance: 1e-9,
            refactor_interval: 100,
            certificate_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration-limit",
        })
    }
}

/// Outcome of one solve. Vectors follow the LP's column and row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// EUR
    pub objective: f64,
    pub primal: Vec<f64>,
    /// `∂ objective / ∂ rhs` per row.
    pub duals: Vec<f64>,
    pub iterations: usize,
    pub wall_time_seconds: f64,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solves `lp` with the built-in bounded revised simplex.
///
/// Deterministic: identical input and options give identical output apart
/// from the wall time.
pub fn solve(lp: &LinearProgram, options: &SolveOptions) -> Result<SolveResult> {
    if let Some(problem) = lp.check() {
        return Err(Error::InvalidArgument(format!("malformed LP: {problem}")));
    }
    let started = Instant::now();
    let sol = simplex::Engine::new(lp, options).run();
    let status = match sol.outcome {
        simplex::Outcome::Optimal => SolveStatus::Optimal,
        simplex::Outcome::Infeasible => SolveStatus::Infeasible,
        simplex::Outcome::Unbounded => SolveStatus::Unbounded,
        simplex::Outcome::IterationLimit => SolveStatus::IterationLimit,
    };
    let objective = if status == SolveStatus::Optimal {
        lp.objective(&sol.x)
    } else {
        f64::NAN
    };
    Ok(SolveResult {
        status,
        objective,
        primal: sol.x,
        duals: sol.y,
        iterations: sol.iterations,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Writes `column,value` for every column, then `row,dual` entries for every
/// row under the same two-column header.
pub fn write_solution(path: &Path, lp: &LinearProgram, result: &SolveResult) -> Result<()> {
    let ctx = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(&ctx, e))?;
    w.write_record(["column", "value"]).map_err(|e| Error::csv(&ctx, e))?;
    for (j, v) in result.primal.iter().enumerate() {
        w.write_record([lp.column_name(j), v.to_string()])
            .map_err(|e| Error::csv(&ctx, e))?;
    }
    for (i, v) in result.duals.iter().enumerate() {
        w.write_record([lp.row_name(i), v.to_string()])
            .map_err(|e| Error::csv(&ctx, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `column,value` file into name → value.
pub fn read_solution(path: &Path) -> Result<BTreeMap<String, f64>> {
    let ctx = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = r.headers().map_err(|e| Error::csv(&ctx, e))?;
    if header.get(0) != Some("column") || header.get(1) != Some("value") {
        return Err(Error::csv(&ctx, "header must be `column,value`"));
    }
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(&ctx, e))?;
        let name = rec.get(0).unwrap_or("").to_string();
        let field = rec.get(1).unwrap_or("");
        let v: f64 = field
            .parse()
            .map_err(|_| Error::csv(&ctx, format!("bad value `{field}` for `{name}`")))?;
        out.insert(name, v);
    }
    Ok(out)
}

/// Turns an imported name → value map into a result aligned with `lp`.
///
/// Columns and rows are looked up by model name or by MPS code
/// (`C0000001`, `R0000001`). Every column must be present; rows without a
/// dual default to zero. The status is set to optimal so the caller can
/// hand the result to [`verify_certificate`].
pub fn import_solution(lp: &LinearProgram, values: &BTreeMap<String, f64>) -> Result<SolveResult> {
    let mut primal = Vec::with_capacity(lp.num_columns());
    for j in 0..lp.num_columns() {
        let v = values
            .get(&lp.column_name(j))
            .or_else(|| values.get(&mps::column_code(j)))
            .ok_or_else(|| Error::InvalidArgument(format!("solution lacks column {}", lp.column_name(j))))?;
        primal.push(*v);
    }
    let duals = (0..lp.num_rows())
        .map(|i| {
            values
                .get(&lp.row_name(i))
                .or_else(|| values.get(&mps::row_code(i)))
                .copied()
                .unwrap_or(0.0)
        })
        .collect();
    Ok(SolveResult {
        status: SolveStatus::Optimal,
        objective: lp.objective(&primal),
        primal,
        duals,
        iterations: 0,
        wall_time_seconds: 0.0,
    })
}
