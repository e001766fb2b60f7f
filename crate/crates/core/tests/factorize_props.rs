use std::collections::BTreeMap;

use geobal_core::factorize::{factor_totals, interaction_term, shared_interactions_totals};
use geobal_core::{Factor, FactorState, MetricTable};
use num_rational::Rational64;
use proptest::prelude::*;

fn table_from(values: &[f64], factors: FactorState) -> MetricTable<f64> {
    let states = factors.subsets();
    MetricTable::from_values("m", factors, states.into_iter().zip(values.iter().copied())).unwrap()
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

/// Maps a state through a permutation of the factor digits.
fn permute(state: FactorState, perm: &[Factor; 6]) -> FactorState {
    FactorState::from_factors(state.factors().map(|f| perm[usize::from(f.number()) - 1]))
}

fn magnitude(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn interconnection_terms_sum_to_int(values in prop::collection::vec(-1e6..1e6_f64, 64)) {
        let t = table_from(&values, FactorState::NATIVE);
        let d = shared_interactions_totals(&t).unwrap();
        let with_one: f64 = d.terms.iter().filter(|(s, _)| s.contains(Factor::Interconnection)).map(|(_, v)| v).sum();
        let scale = 64.0 * magnitude(&values);
        prop_assert!(close(with_one, d.int, scale));
        let totals: f64 = d.totals.values().sum::<f64>() + d.baseline;
        prop_assert!(close(totals, d.int, scale));
    }

    #[test]
    fn all_terms_rebuild_the_full_state(values in prop::collection::vec(-1e3..1e3_f64, 16)) {
        let factors: FactorState = "f_1245".parse().unwrap();
        let t = table_from(&values, factors);
        for s in factors.subsets() {
            let rebuilt: f64 = s.subsets().iter().map(|u| interaction_term(&t, *u).unwrap()).sum();
            prop_assert!(close(rebuilt, t.get(s).unwrap(), 16.0 * magnitude(&values)));
        }
    }

    #[test]
    fn additive_tables_have_no_interactions(
        base in -100.0..100.0_f64,
        effects in prop::collection::vec(-100.0..100.0_f64, 6),
    ) {
        let states = FactorState::NATIVE.subsets();
        let values: Vec<f64> = states
            .iter()
            .map(|s| base + s.factors().map(|f| effects[usize::from(f.number()) - 1]).sum::<f64>())
            .collect();
        let d = shared_interactions_totals(&table_from(&values, FactorState::NATIVE)).unwrap();
        for (s, v) in &d.terms {
            if s.len() >= 2 {
                prop_assert!(v.abs() < 1e-9);
            }
        }
        prop_assert!(d.totals.values().all(|v| v.abs() < 1e-9));
        prop_assert!(close(d.baseline, effects[0], 100.0));
    }

    #[test]
    fn relabelling_factors_relabels_totals(
        values in prop::collection::vec(-1e3..1e3_f64, 64),
        order in Just(vec![Factor::Wind, Factor::Solar, Factor::Load, Factor::Hydro, Factor::Bioenergy]).prop_shuffle(),
    ) {
        let mut perm = Factor::ALL;
        perm[1..].copy_from_slice(&order);
        let f = table_from(&values, FactorState::NATIVE);
        let g_values: BTreeMap<FactorState, f64> = FactorState::NATIVE
            .subsets()
            .into_iter()
            .map(|s| (s, f.values[&permute(s, &perm)]))
            .collect();
        let g = MetricTable::from_values("m", FactorState::NATIVE, g_values).unwrap();
        let df = shared_interactions_totals(&f).unwrap();
        let dg = shared_interactions_totals(&g).unwrap();
        for j in Factor::ALL.into_iter().skip(1) {
            let image = perm[usize::from(j.number()) - 1];
            prop_assert!(close(dg.totals[&j], df.totals[&image], 64.0 * magnitude(&values)));
        }
        prop_assert_eq!(dg.int, df.int);
    }

    #[test]
    fn shift_and_scale(values in prop::collection::vec(-1e3..1e3_f64, 8), c in -50.0..50.0_f64, k in 0.1..10.0_f64) {
        let factors: FactorState = "f_123".parse().unwrap();
        let f = table_from(&values, factors);
        let shifted: Vec<f64> = values.iter().map(|v| k * v + c).collect();
        let g = table_from(&shifted, factors);
        let (df, dg) = (shared_interactions_totals(&f).unwrap(), shared_interactions_totals(&g).unwrap());
        for (j, v) in &df.totals {
            prop_assert!(close(dg.totals[j], k * v, 1e4));
        }
        prop_assert!(close(dg.baseline, k * df.baseline, 1e4));
    }

    #[test]
    fn two_factor_closed_form(vals in prop::collection::vec((-1000i64..1000, 1i64..50), 4)) {
        let q: Vec<Rational64> = vals.iter().map(|&(n, d)| Rational64::new(n, d)).collect();
        let factors: FactorState = "f_12".parse().unwrap();
        let states: Vec<FactorState> = ["f_0", "f_1", "f_2", "f_12"].iter().map(|s| s.parse().unwrap()).collect();
        let t = MetricTable::from_values("m", factors, states.into_iter().zip(q.iter().copied())).unwrap();
        let totals = factor_totals(&t).unwrap();
        let (f0, f1, f2, f12) = (q[0], q[1], q[2], q[3]);
        let half = Rational64::new(1, 2);
        prop_assert_eq!(totals[&Factor::Interconnection], half * ((f1 - f0) + (f12 - f2)));
        prop_assert_eq!(totals[&Factor::Wind], half * ((f2 - f0) + (f12 - f1)));
        let d = shared_interactions_totals(&t).unwrap();
        prop_assert_eq!(d.int, f12 - f2);
        prop_assert_eq!(d.totals[&Factor::Wind] + d.baseline, d.int);
    }
}

#[test]
fn totals_add_up_to_full_change() {
    let values: Vec<f64> = (0..64).map(|i| ((i * 37) % 23) as f64 - 11.0).collect();
    let t = table_from(&values, FactorState::NATIVE);
    let sum: f64 = factor_totals(&t).unwrap().values().sum();
    let change = t.get(FactorState::NATIVE).unwrap() - t.get(FactorState::BASELINE).unwrap();
    assert!((sum - change).abs() < 1e-9);
}

#[test]
fn flat_table_is_degenerate() {
    let t = table_from(&[7.0; 64], FactorState::NATIVE);
    let d = shared_interactions_totals(&t).unwrap();
    assert!(d.degenerate);
    assert!(d.shares.is_none());
}
