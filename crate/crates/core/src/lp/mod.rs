//! Linear programs: representation, construction from a system, MPS I/O.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

mod build;
pub mod mps;

pub use build::{
    assemble, build_capacity_and_storage_constraints, build_energy_balance, build_objective, installed_capacities,
    Installed,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// Variable families. The `Display` form is the name prefix of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarFamily {
    /// Installed generation capacity `N` [MW].
    Capacity,
    /// Storage charging capacity `N^{p-in}` [MW].
    ChargeCapacity,
    /// Storage / reservoir discharging capacity `N^{p-out}` [MW].
    DischargeCapacity,
    /// Storage / reservoir energy capacity `N^e` [MWh].
    EnergyCapacity,
    /// Hourly generation `G` [MWh].
    Generation,
    /// Hourly storage charging `STO^in` [MWh].
    Charge,
    /// Hourly storage discharging `STO^out` [MWh].
    Discharge,
    /// Storage or reservoir level at the end of an hour [MWh].
    Level,
    /// Hourly reservoir outflow to the grid `RSV^out` [MWh].
    ReservoirOut,
    /// Hourly reservoir spill [MWh].
    Spill,
    /// Hourly signed flow on a line `F` [MWh].
    Flow,
    /// Column read from an external file without model metadata.
    External,
}

const VAR_CODES: [(VarFamily, &str); 12] = [
    (VarFamily::Capacity, "N"),
    (VarFamily::ChargeCapacity, "NPIN"),
    (VarFamily::DischargeCapacity, "NPOUT"),
    (VarFamily::EnergyCapacity, "NE"),
    (VarFamily::Generation, "G"),
    (VarFamily::Charge, "STOIN"),
    (VarFamily::Discharge, "STOOUT"),
    (VarFamily::Level, "LVL"),
    (VarFamily::ReservoirOut, "RSVOUT"),
    (VarFamily::Spill, "SPILL"),
    (VarFamily::Flow, "F"),
    (VarFamily::External, "X"),
];

/// Constraint families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RowFamily {
    /// Energy balance per country and hour.
    Balance,
    /// `G <= N` (dispatchable), `G <= cf N` (renewable), `G <= eta a N` (run-of-river).
    GenerationLimit,
    /// `STO^in <= N^{p-in}`.
    ChargeLimit,
    /// `STO^out <= N^{p-out}`, `RSV^out <= N^{p-out}`.
    DischargeLimit,
    /// `L <= N^e`.
    EnergyLimit,
    /// Level recursion with cyclic closure.
    LevelBalance,
    External,
}

const ROW_CODES: [(RowFamily, &str); 7] = [
    (RowFamily::Balance, "BAL"),
    (RowFamily::GenerationLimit, "GLIM"),
    (RowFamily::ChargeLimit, "INLIM"),
    (RowFamily::DischargeLimit, "OUTLIM"),
    (RowFamily::EnergyLimit, "ELIM"),
    (RowFamily::LevelBalance, "LVLBAL"),
    (RowFamily::External, "X"),
];

fn code_of<T: PartialEq + Copy>(table: &[(T, &'static str)], v: T) -> &'static str {
    table.iter().find(|(f, _)| *f == v).map(|(_, c)| *c).unwrap()
}

fn family_of<T: Copy>(table: &[(T, &'static str)], code: &str) -> Option<T> {
    table.iter().find(|(_, c)| *c == code).map(|(f, _)| *f)
}

impl fmt::Display for VarFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(code_of(&VAR_CODES, *self))
    }
}

impl fmt::Display for RowFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(code_of(&ROW_CODES, *self))
    }
}

/// `(entity, hour)` identity of a column or row.
///
/// Entities are `COUNTRY.tech` for technology quantities, `COUNTRY` for
/// balances and `AA_BB` for lines. Names render as `FAMILY[entity]` or
/// `FAMILY[entity,hour]` and parse back losslessly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Key<F> {
    pub family: F,
    pub entity: String,
    pub hour: Option<usize>,
}

pub type ColumnKey = Key<VarFamily>;
pub type RowKey = Key<RowFamily>;

impl<F> Key<F> {
    pub fn new(family: F, entity: impl Into<String>, hour: Option<usize>) -> Self {
        Key {
            family,
            entity: entity.into(),
            hour,
        }
    }

    /// Splits a `COUNTRY.tech` entity.
    pub fn country_tech(&self) -> Option<(&str, &str)> {
        self.entity.split_once('.')
    }
}

fn render<F: fmt::Display>(k: &Key<F>, external: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if external {
        return f.write_str(&k.entity);
    }
    match k.hour {
        Some(h) => write!(f, "{}[{},{}]", k.family, k.entity, h),
        None => write!(f, "{}[{}]", k.family, k.entity),
    }
}

impl fmt::Display for ColumnKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render(self, self.family == VarFamily::External, f)
    }
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render(self, self.family == RowFamily::External, f)
    }
}

fn parse_key<F: Copy>(s: &str, table: &[(F, &'static str)], external: F) -> Key<F> {
    let parsed = (|| {
        let (code, rest) = s.split_once('[')?;
        let inner = rest.strip_suffix(']')?;
        let family = family_of(table, code)?;
        let (entity, hour) = match inner.rsplit_once(',') {
            Some((e, h)) => (e, Some(h.parse().ok()?)),
            None => (inner, None),
        };
        Some(Key::new(family, entity, hour))
    })();
    parsed.unwrap_or_else(|| Key::new(external, s, None))
}

impl FromStr for ColumnKey {
    type Err = std::convert::Infallible;
    /// Names that do not follow the model scheme become `External` keys.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(parse_key(s, &VAR_CODES, VarFamily::External))
    }
}

impl FromStr for RowKey {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(parse_key(s, &ROW_CODES, RowFamily::External))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub key: ColumnKey,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub key: RowKey,
    /// `(column index, coefficient)`, sorted by column, no duplicates.
    pub coefficients: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// A minimization problem `min c'x  s.t.  rows, lower <= x <= upper`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.coefficients.len()).sum()
    }

    pub fn add_column(&mut self, key: ColumnKey, lower: f64, upper: f64, cost: f64) -> usize {
        self.columns.push(Column {
            key,
            lower,
            upper,
            cost,
        });
        self.columns.len() - 1
    }

    /// Adds a row; duplicate column entries are merged and exact zeros dropped.
    pub fn add_row(&mut self, key: RowKey, mut coefficients: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        coefficients.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coefficients.len());
        for (j, a) in coefficients {
            match merged.last_mut() {
                Some((lj, la)) if *lj == j => *la += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(Row {
            key,
            coefficients: merged,
            relation,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.columns.iter().zip(x).map(|(c, v)| c.cost * v).sum()
    }

    pub fn column_name(&self, j: usize) -> String {
        self.columns[j].key.to_string()
    }

    pub fn row_name(&self, i: usize) -> String {
        self.rows[i].key.to_string()
    }

    /// Map from column name to index.
    pub fn column_index(&self) -> BTreeMap<String, usize> {
        self.columns
            .iter()
            .enumerate()
            .map(|(j, c)| (c.key.to_string(), j))
            .collect()
    }

    /// Returns the first structural problem found, if any.
    pub fn check(&self) -> Option<String> {
        for (j, c) in self.columns.iter().enumerate() {
            if c.lower > c.upper || c.lower.is_nan() || c.upper.is_nan() {
                return Some(format!("column {j} has lower > upper"));
            }
            if !c.cost.is_finite() {
                return Some(format!("column {j} has non-finite cost"));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() {
                return Some(format!("row {i} has non-finite rhs"));
            }
            for &(j, a) in &r.coefficients {
                if j >= self.columns.len() {
                    return Some(format!("row {i} references missing column {j}"));
                }
                if !a.is_finite() {
                    return Some(format!("row {i} has a non-finite coefficient"));
                }
            }
        }
        None
    }
}

/// Counts of a built LP by family.
///
/// For a system whose technologies are all expandable, with `C` countries,
/// `T` hours, `V` renewable and `S` storage technologies and `L` lines, the
/// column count is `C·(V·(1 + T) + S·(3 + 3T)) + L·T` with interconnection on
/// and `C·(V·(1 + T) + S·(3 + 3T))` without. Fixed capacities add their capacity
/// columns but replace hourly limit rows by column bounds; technologies
/// whose capacity is fixed at zero have no hourly columns.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildReport {
    pub horizon: usize,
    pub interconnection: bool,
    pub columns: BTreeMap<String, usize>,
    pub rows: BTreeMap<String, usize>,
}

impl BuildReport {
    pub fn from_lp(lp: &LinearProgram, horizon: usize, interconnection: bool) -> Self {
        let mut columns = BTreeMap::new();
        for c in &lp.columns {
            *columns.entry(c.key.family.to_string()).or_insert(0) += 1;
        }
        let mut rows = BTreeMap::new();
        for r in &lp.rows {
            *rows.entry(r.key.family.to_string()).or_insert(0) += 1;
        }
        BuildReport {
            horizon,
            interconnection,
            columns,
            rows,
        }
    }

    pub fn total_columns(&self) -> usize {
        self.columns.values().sum()
    }

    pub fn total_rows(&self) -> usize {
        self.rows.values().sum()
    }
}
