//! Factor separation: interaction terms and shared-interactions totals.
//!
//! For a table `f_T` over every subset `T` of the varied factors `U`, the
//! interaction term of `S ⊆ U` is the inclusion–exclusion sum
//! `f̂_S = Σ_{T⊆S} (−1)^{|S|−|T|} f_T`. The difference of interest
//! `INT = f_U − f_{U∖1}` equals the sum of all terms containing
//! interconnection. Each multi-factor term `f̂_{1∪S}` is shared equally among
//! the non-interconnection factors in `S`; the sole interconnection term `f̂_1`
//! stays a separate baseline entry so that `f̂_1 + Σ_j total_j = INT`.
//!
//! Everything is generic over the number type so the identities can be
//! checked exactly with rationals.

use std::collections::BTreeMap;
use std::fmt::{self, Debug, Display};
use std::path::Path;

use num_traits::{FromPrimitive, Num, Signed};
use serde::{Deserialize, Serialize};

use crate::harmonize::{Factor, FactorState};
use crate::metrics::{Metric, StorageSummary};
use crate::solver::SolveStatus;
use crate::{Error, Result};

/// Number types a decomposition can be computed in.
pub trait Field: Copy + PartialOrd + Num + Signed + FromPrimitive + Debug {}

impl<T: Copy + PartialOrd + Num + Signed + FromPrimitive + Debug> Field for T {}

/// Values of one metric over every state of the varied factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable<T> {
    pub metric: String,
    /// Factors varied in the experiment; all others sit in state A.
    pub factors: FactorState,
    pub values: BTreeMap<FactorState, T>,
    /// Free-form origin per state, e.g. solve identifiers.
    #[serde(default)]
    pub provenance: BTreeMap<FactorState, String>,
}

impl<T: Field> MetricTable<T> {
    pub fn new(metric: impl Into<String>, factors: FactorState) -> Self {
        MetricTable {
            metric: metric.into(),
            factors,
            values: BTreeMap::new(),
            provenance: BTreeMap::new(),
        }
    }

    /// Builds a table from `(state, value)` pairs and checks completeness.
    pub fn from_values(
        metric: impl Into<String>,
        factors: FactorState,
        values: impl IntoIterator<Item = (FactorState, T)>,
    ) -> Result<Self> {
        let mut t = MetricTable::new(metric, factors);
        t.values.extend(values);
        t.check()?;
        Ok(t)
    }

    pub fn get(&self, state: FactorState) -> Result<T> {
        self.values
            .get(&state)
            .copied()
            .ok_or_else(|| Error::MissingState(state.to_string()))
    }

    /// Every subset of the varied factors must be present, and nothing else.
    pub fn check(&self) -> Result<()> {
        for s in self.factors.subsets() {
            self.get(s)?;
        }
        if let Some(extra) = self.values.keys().find(|s| !s.is_subset_of(self.factors)) {
            return Err(Error::InvalidArgument(format!(
                "state {extra} varies a factor outside {}",
                self.factors
            )));
        }
        Ok(())
    }
}

/// `f̂_S` by inclusion–exclusion over the sub-states of `subset`.
pub fn interaction_term<T: Field>(table: &MetricTable<T>, subset: FactorState) -> Result<T> {
    let mut acc = T::zero();
    let parity = subset.len() % 2;
    for t in subset.subsets() {
        let v = table.get(t)?;
        if t.len() % 2 == parity {
            acc = acc + v;
        } else {
            acc = acc - v;
        }
    }
    Ok(acc)
}

/// `INT = f_U − f_{U∖1}`.
pub fn difference_of_interest<T: Field>(table: &MetricTable<T>) -> Result<T> {
    let full = table.factors;
    if !full.contains(Factor::Interconnection) {
        return Err(Error::InvalidArgument(
            "the difference of interest needs interconnection among the varied factors".into(),
        ));
    }
    Ok(table.get(full)? - table.get(full.without(Factor::Interconnection))?)
}

/// Result of the shared-interactions factorization of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorDecomposition<T> {
    pub metric: String,
    pub factors: FactorState,
    /// `f̂_S` for every non-empty subset of the varied factors.
    pub terms: BTreeMap<FactorState, T>,
    /// `f̂_1`, the sole interconnection effect.
    pub baseline: T,
    /// `f̂_{1j}^{total}` per non-interconnection factor.
    pub totals: BTreeMap<Factor, T>,
    pub int: T,
    /// `f_{U∖1}`, the isolated native value used to judge whether INT is negligible.
    pub isolated: T,
    /// `total_j / INT`; `None` when INT is negligible.
    pub shares: Option<BTreeMap<Factor, T>>,
    /// `f̂_1 / INT`; `None` when INT is negligible.
    pub baseline_share: Option<T>,
    /// INT is exactly zero.
    pub degenerate: bool,
}

/// Relative size below which INT is treated as zero for shares.
pub const NEGLIGIBLE_INT: f64 = 1e-6;

/// Full decomposition of one table.
pub fn shared_interactions_totals<T: Field>(table: &MetricTable<T>) -> Result<FactorDecomposition<T>> {
    table.check()?;
    let int = difference_of_interest(table)?;
    let universe = table.factors;
    let one = FactorState::BASELINE.with(Factor::Interconnection);

    let mut terms = BTreeMap::new();
    for s in universe.subsets().into_iter().filter(|s| !s.is_empty()) {
        terms.insert(s, interaction_term(table, s)?);
    }

    // Larger subsets first, so every total is summed in the same order.
    let mut with_one: Vec<FactorState> = terms
        .keys()
        .copied()
        .filter(|s| s.contains(Factor::Interconnection) && s.len() >= 2)
        .collect();
    with_one.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));

    let mut totals = BTreeMap::new();
    for j in universe.factors().filter(|f| *f != Factor::Interconnection) {
        let mut acc = T::zero();
        for s in with_one.iter().filter(|s| s.contains(j)) {
            let k = T::from_usize(s.len() - 1).expect("small integer");
            acc = acc + terms[s] / k;
        }
        totals.insert(j, acc);
    }

    let baseline = terms[&one];
    let isolated = table.get(universe.without(Factor::Interconnection))?;
    let threshold = isolated.abs() * T::from_f64(NEGLIGIBLE_INT).expect("finite");
    let negligible = int.abs() < threshold || int.is_zero();
    let (shares, baseline_share) = if negligible {
        (None, None)
    } else {
        (
            Some(totals.iter().map(|(f, v)| (*f, *v / int)).collect()),
            Some(baseline / int),
        )
    };
    Ok(FactorDecomposition {
        metric: table.metric.clone(),
        factors: universe,
        terms,
        baseline,
        totals,
        int,
        isolated,
        shares,
        baseline_share,
        degenerate: int.is_zero(),
    })
}

/// Total effect of every varied factor relative to `f_0`: each term `f̂_S`
/// with `|S| ≥ 1` is split equally among the factors in `S`.
///
/// With two factors this is `½((f_1 − f_0) + (f_12 − f_2))` for factor 1, and
/// the totals always add up to `f_U − f_0`.
pub fn factor_totals<T: Field>(table: &MetricTable<T>) -> Result<BTreeMap<Factor, T>> {
    table.check()?;
    let mut subsets: Vec<FactorState> = table.factors.subsets().into_iter().filter(|s| !s.is_empty()).collect();
    subsets.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    let mut totals: BTreeMap<Factor, T> = table.factors.factors().map(|f| (f, T::zero())).collect();
    for s in subsets {
        let share = interaction_term(table, s)? / T::from_usize(s.len()).expect("small integer");
        for f in s.factors() {
            let acc = totals.get_mut(&f).expect("varied factor");
            *acc = *acc + share;
        }
    }
    Ok(totals)
}

/// Decomposes every storage metric of a complete set of scenario results.
///
/// `results` maps each state to its storage summary, or to the status of a
/// solve that did not reach optimality.
pub fn decompose_metrics(
    factors: FactorState,
    results: &BTreeMap<FactorState, std::result::Result<StorageSummary, SolveStatus>>,
) -> Result<Vec<FactorDecomposition<f64>>> {
    for state in factors.subsets() {
        match results.get(&state) {
            None => return Err(Error::MissingState(state.to_string())),
            Some(Err(status)) => {
                return Err(Error::SolveFailed {
                    context: format!("state {state}"),
                    status: status.to_string(),
                })
            }
            Some(Ok(_)) => {}
        }
    }
    Metric::ALL
        .iter()
        .map(|&metric| {
            let values = factors.subsets().into_iter().map(|s| {
                let summary = results[&s].as_ref().expect("checked above");
                (s, summary.value(metric))
            });
            shared_interactions_totals(&MetricTable::from_values(metric.name(), factors, values)?)
        })
        .collect()
}

struct Blank<T>(Option<T>);

impl<T: Display> Display for Blank<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Some(v) => v.fmt(f),
            None => Ok(()),
        }
    }
}

/// Rows of the `metric,term,subset,value,share` table.
///
/// Terms: `int` (subset = full state), `baseline` (`f_1`), `total_<factor>`
/// (subset `f_1j`) and `interaction` for every non-empty subset. Shares are
/// blank when suppressed and for raw interaction terms.
pub fn decomposition_rows<T: Field + Display>(d: &FactorDecomposition<T>) -> Vec<[String; 5]> {
    let one = FactorState::BASELINE.with(Factor::Interconnection);
    let mut rows = Vec::new();
    let full_share = d.shares.as_ref().map(|_| T::one());
    rows.push([
        d.metric.clone(),
        "int".into(),
        d.factors.to_string(),
        d.int.to_string(),
        Blank(full_share).to_string(),
    ]);
    rows.push([
        d.metric.clone(),
        "baseline".into(),
        one.to_string(),
        d.baseline.to_string(),
        Blank(d.baseline_share).to_string(),
    ]);
    for (f, v) in &d.totals {
        let share = d.shares.as_ref().map(|s| s[f]);
        rows.push([
            d.metric.clone(),
            format!("total_{f}"),
            one.with(*f).to_string(),
            v.to_string(),
            Blank(share).to_string(),
        ]);
    }
    for (s, v) in &d.terms {
        rows.push([
            d.metric.clone(),
            "interaction".into(),
            s.to_string(),
            v.to_string(),
            String::new(),
        ]);
    }
    rows
}

/// Writes the CSV table of several decompositions.
pub fn write_decomposition_csv(path: &Path, decompositions: &[FactorDecomposition<f64>]) -> Result<()> {
    let ctx = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(&ctx, e))?;
    w.write_record(["metric", "term", "subset", "value", "share"])
        .map_err(|e| Error::csv(&ctx, e))?;
    for d in decompositions {
        for row in decomposition_rows(d) {
            w.write_record(&row).map_err(|e| Error::csv(&ctx, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the JSON summary of several decompositions.
pub fn write_decomposition_json(path: &Path, decompositions: &[FactorDecomposition<f64>]) -> Result<()> {
    let text = serde_json::to_string_pretty(decompositions).map_err(|e| Error::json(path.display().to_string(), e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Reads a JSON metric table or list of tables.
pub fn read_metric_tables(path: &Path) -> Result<Vec<MetricTable<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    let tables: Vec<MetricTable<f64>> = match serde_json::from_str::<Vec<MetricTable<f64>>>(&text) {
        Ok(v) => v,
        Err(_) => vec![serde_json::from_str(&text).map_err(|e| Error::json(ctx, e))?],
    };
    for t in &tables {
        t.check()?;
    }
    Ok(tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonize::enumerate_states;

    fn state(s: &str) -> FactorState {
        s.parse().unwrap()
    }

    fn two_factor(values: [f64; 4]) -> MetricTable<f64> {
        let states = enumerate_states(2).unwrap();
        MetricTable::from_values("m", state("f_12"), states.into_iter().zip(values)).unwrap()
    }

    #[test]
    fn two_factor_toy() {
        let t = two_factor([0.0, 1.0, 2.0, 4.0]);
        assert_eq!(interaction_term(&t, state("f_1")).unwrap(), 1.0);
        assert_eq!(interaction_term(&t, state("f_12")).unwrap(), 1.0);
        assert_eq!(difference_of_interest(&t).unwrap(), 2.0);
    }

    #[test]
    fn additive_table_has_no_interactions() {
        let a = [0.0, 3.0, -1.0, 2.5, 7.0, 0.5, 1.25];
        let states = enumerate_states(6).unwrap();
        let values = states
            .iter()
            .map(|s| (*s, s.factors().map(|f| a[f.number() as usize]).sum::<f64>()));
        let t = MetricTable::from_values("m", FactorState::NATIVE, values).unwrap();
        for s in states.iter().filter(|s| s.len() >= 2) {
            assert_eq!(interaction_term(&t, *s).unwrap(), 0.0, "{s}");
        }
    }

    #[test]
    fn int_from_toy_table() {
        let states = enumerate_states(6).unwrap();
        let values = states.iter().map(|s| {
            let v = if *s == FactorState::NATIVE {
                70.0
            } else if *s == state("f_23456") {
                100.0
            } else {
                50.0
            };
            (*s, v)
        });
        let t = MetricTable::from_values("m", FactorState::NATIVE, values).unwrap();
        assert_eq!(difference_of_interest(&t).unwrap(), -30.0);
    }

    #[test]
    fn incomplete_table_is_rejected() {
        let mut t = two_factor([0.0, 1.0, 2.0, 4.0]);
        t.values.remove(&state("f_2"));
        assert!(matches!(shared_interactions_totals(&t), Err(Error::MissingState(s)) if s == "f_2"));
    }

    #[test]
    fn constant_table_is_degenerate() {
        let t = two_factor([5.0; 4]);
        let d = shared_interactions_totals(&t).unwrap();
        assert!(d.degenerate);
        assert!(d.shares.is_none());
        assert_eq!(d.int, 0.0);
    }

    #[test]
    fn csv_layout() {
        let d = shared_interactions_totals(&two_factor([0.0, 1.0, 2.0, 4.0])).unwrap();
        let rows = decomposition_rows(&d);
        assert_eq!(rows[0], ["m", "int", "f_12", "2", "1"].map(String::from));
        assert_eq!(rows[1], ["m", "baseline", "f_1", "1", "0.5"].map(String::from));
        assert_eq!(rows[2], ["m", "total_wind", "f_12", "1", "0.5"].map(String::from));
        assert_eq!(rows.len(), 3 + 3);
    }
}
