use serde::{Deserialize, Serialize};

use super::SolveResult;
use crate::lp::{LinearProgram, Relation};

/// Worst residuals of a primal–dual pair.
///
/// Conventions: row duals are `∂ objective / ∂ rhs`, so `≥` rows need
/// `y ≥ 0` and `≤` rows `y ≤ 0`; reduced costs are `d = c − Aᵀy`. Tolerances:
/// primal residuals absolute; dual residuals relative to `1 + max|c|`;
/// complementarity and the duality gap relative to `1 + |primal objective|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub tolerance: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub max_primal_residual: f64,
    pub worst_primal: Option<String>,
    pub max_dual_residual: f64,
    pub worst_dual: Option<String>,
    pub max_complementarity: f64,
    pub worst_complementarity: Option<String>,
    pub passed: bool,
}

struct Worst {
    value: f64,
    at: Option<String>,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, at: None }
    }

    fn see(&mut self, v: f64, at: impl FnOnce() -> String) {
        if v > self.value {
            self.value = v;
            self.at = Some(at());
        }
    }
}

pub fn verify_certificate(lp: &LinearProgram, result: &SolveResult, tolerance: f64) -> CertificateReport {
    let x = &result.primal;
    let y = &result.duals;
    let mut primal = Worst::new();
    let mut dual = Worst::new();
    let mut comp = Worst::new();

    let mut d: Vec<f64> = lp.columns.iter().map(|c| c.cost).collect();
    let mut dual_obj = 0.0;
    for (i, r) in lp.rows.iter().enumerate() {
        let act = r.activity(x);
        let yi = y.get(i).copied().unwrap_or(0.0);
        let (viol, wrong_sign) = match r.relation {
            Relation::Le => ((act - r.rhs).max(0.0), yi.max(0.0)),
            Relation::Ge => ((r.rhs - act).max(0.0), (-yi).max(0.0)),
            Relation::Eq => ((act - r.rhs).abs(), 0.0),
        };
        primal.see(viol, || lp.row_name(i));
        dual.see(wrong_sign, || lp.row_name(i));
        comp.see(yi.abs() * (act - r.rhs).abs(), || lp.row_name(i));
        dual_obj += yi * r.rhs;
        for &(j, a) in &r.coefficients {
            d[j] -= a * yi;
        }
    }
    for (j, c) in lp.columns.iter().enumerate() {
        let xj = x[j];
        let viol = (c.lower - xj).max(xj - c.upper).max(0.0);
        primal.see(viol, || lp.column_name(j));
        let dj = d[j];
        let (bound, room) = if dj > 0.0 {
            (c.lower, xj - c.lower)
        } else {
            (c.upper, c.upper - xj)
        };
        if dj != 0.0 {
            if bound.is_finite() {
                dual_obj += dj * bound;
                comp.see(dj.abs() * room.abs(), || lp.column_name(j));
            } else {
                dual.see(dj.abs(), || lp.column_name(j));
                dual_obj += dj * xj;
            }
        }
    }

    let primal_obj = lp.objective(x);
    let cmax = lp.columns.iter().map(|c| c.cost.abs()).fold(0.0, f64::max);
    let scale = 1.0 + primal_obj.abs();
    let gap = (primal_obj - dual_obj).abs();
    let passed = result.is_optimal()
        && primal.value <= tolerance
        && dual.value <= tolerance * (1.0 + cmax)
        && comp.value <= tolerance * scale
        && gap <= tolerance * scale;
    CertificateReport {
        tolerance,
        primal_objective: primal_obj,
        dual_objective: dual_obj,
        duality_gap: gap,
        max_primal_residual: primal.value,
        worst_primal: primal.at,
        max_dual_residual: dual.value,
        worst_dual: dual.at,
        max_complementarity: comp.value,
        worst_complementarity: comp.at,
        passed,
    }
}
