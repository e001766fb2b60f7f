//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use geobal_core::lp::{ColumnKey, Relation, RowKey, VarFamily};
use geobal_core::model::{defaults, Country, TimeSeriesSet};
use geobal_core::{LinearProgram, PowerSystemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense LP with finite bounds: `min c·x` s.t. `a_i·x ~ b_i`, `l ≤ x ≤ u`.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Relation, f64)>,
}

impl DenseLp {
    pub fn to_lp(&self) -> LinearProgram {
        let mut lp = LinearProgram::new();
        for j in 0..self.cost.len() {
            let key = ColumnKey::new(VarFamily::External, format!("x{j}"), None);
            lp.add_column(key, self.lower[j], self.upper[j], self.cost[j]);
        }
        for (i, (a, rel, b)) in self.rows.iter().enumerate() {
            let key: RowKey = format!("r{i}").parse().unwrap();
            let coefs = a.iter().copied().enumerate().collect();
            lp.add_row(key, coefs, *rel, *b);
        }
        lp
    }

    fn feasible(&self, x: &[f64], tol: f64) -> bool {
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol);
        bounds
            && self.rows.iter().all(|(a, rel, b)| {
                let act: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
                let scale = tol * (1.0 + b.abs());
                match rel {
                    Relation::Le => act <= b + scale,
                    Relation::Ge => act >= b - scale,
                    Relation::Eq => (act - b).abs() <= scale,
                }
            })
    }
}

/// Random bounded, feasible LP with small integer data, so ties and
/// degenerate vertices are common.
pub fn random_lp(rng: &mut ChaCha8Rng) -> DenseLp {
    let n = rng.random_range(1..=12);
    let m_max = if n > 8 { 4 } else { 6 };
    let m = rng.random_range(1..=m_max);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut x0 = Vec::with_capacity(n);
    for _ in 0..n {
        let l = if rng.random_bool(0.6) {
            0.0
        } else {
            -(rng.random_range(1..=4) as f64)
        };
        let u = if rng.random_bool(0.1) {
            l
        } else {
            l + rng.random_range(1..=6) as f64
        };
        lower.push(l);
        upper.push(u);
        x0.push(l + (u - l) * rng.random_range(0..=4) as f64 / 4.0);
    }
    let cost = (0..n).map(|_| rng.random_range(-5..=5) as f64).collect();
    let rows = (0..m)
        .map(|_| {
            let a: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.35) {
                        0.0
                    } else {
                        rng.random_range(-3..=3) as f64 + if rng.random_bool(0.2) { 0.5 } else { 0.0 }
                    }
                })
                .collect();
            let act: f64 = a.iter().zip(&x0).map(|(a, x)| a * x).sum();
            let slack = rng.random_range(0..=3) as f64;
            match rng.random_range(0..5) {
                0 => (a, Relation::Eq, act),
                1 | 2 => (a, Relation::Le, act + slack),
                _ => (a, Relation::Ge, act - slack),
            }
        })
        .collect();
    DenseLp {
        cost,
        lower,
        upper,
        rows,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Solves `M y = r` by Gaussian elimination with partial pivoting.
fn solve_dense(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let k = r.len();
    for c in 0..k {
        let p = (c..k).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(c, p);
        r.swap(c, p);
        for i in c + 1..k {
            let f = m[i][c] / m[c][c];
            if f != 0.0 {
                for j in c..k {
                    m[i][j] -= f * m[c][j];
                }
                r[i] -= f * r[c];
            }
        }
    }
    let mut y = vec![0.0; k];
    for c in (0..k).rev() {
        let s: f64 = (c + 1..k).map(|j| m[c][j] * y[j]).sum();
        y[c] = (r[c] - s) / m[c][c];
    }
    Some(y)
}

fn combinations(n: usize, k: usize, out: &mut Vec<Vec<usize>>) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::new(), out);
}

/// Minimum objective over all vertices of the feasible polytope.
///
/// A vertex has `n` linearly independent active constraints: a set of rows
/// held at equality plus `n − |rows|` columns sitting at a bound. Every
/// such choice is tried; infeasible or singular ones are dropped. Equality
/// rows are not forced into the set, since dependent ones would make every
/// choice singular; the feasibility check enforces them instead.
pub fn vertex_enumeration(lp: &DenseLp) -> Option<f64> {
    let n = lp.cost.len();
    let m = lp.rows.len();
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    for active in 0usize..1 << m {
        let rows: Vec<usize> = (0..m).filter(|i| active >> i & 1 == 1).collect();
        let k = rows.len();
        if k > n {
            continue;
        }
        let mut at_bound = Vec::new();
        combinations(n, n - k, &mut at_bound);
        for fixed in at_bound {
            let free: Vec<usize> = (0..n).filter(|j| !fixed.contains(j)).collect();
            for side in 0usize..1 << fixed.len() {
                for (b, &j) in fixed.iter().enumerate() {
                    x[j] = if side >> b & 1 == 1 { lp.upper[j] } else { lp.lower[j] };
                }
                let mat: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|&i| free.iter().map(|&j| lp.rows[i].0[j]).collect())
                    .collect();
                let rhs: Vec<f64> = rows
                    .iter()
                    .map(|&i| {
                        let (a, _, b) = &lp.rows[i];
                        b - fixed.iter().map(|&j| a[j] * x[j]).sum::<f64>()
                    })
                    .collect();
                let Some(y) = solve_dense(mat, rhs) else { continue };
                for (&j, v) in free.iter().zip(y) {
                    x[j] = v;
                }
                if lp.feasible(&x, 1e-9) {
                    let obj: f64 = lp.cost.iter().zip(&x).map(|(c, x)| c * x).sum();
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
        }
    }
    best
}

/// One country, constant 1 MW load, a single onshore wind technology with a
/// constant capacity factor of 0.5 and nothing else.
pub fn wind_only_system(horizon: usize) -> PowerSystemSpec {
    let wind = defaults::default_technologies()
        .into_iter()
        .find(|t| t.id == "wind_onshore")
        .unwrap();
    let mut cf = BTreeMap::new();
    cf.insert("DE".to_string(), vec![0.5; horizon]);
    PowerSystemSpec {
        countries: vec![Country {
            code: "DE".into(),
            yearly_load_total: horizon as f64,
            offshore_eligible: false,
        }],
        technologies: vec![wind],
        time_series: TimeSeriesSet {
            horizon,
            capacity_factors: BTreeMap::from([("wind_onshore".to_string(), cf)]),
            load: BTreeMap::from([("DE".to_string(), vec![1.0; horizon])]),
            reservoir_inflow: BTreeMap::new(),
        },
        interconnectors: Vec::new(),
        exogenous_capacities: Vec::new(),
        capacity_overrides: Vec::new(),
        interconnection_enabled: false,
        annuity_rate: 0.04,
    }
}

/// Run manifest over a freshly written synthetic system in `dir`.
pub fn sweep_manifest(
    dir: &std::path::Path,
    system: &PowerSystemSpec,
    parallelism: usize,
    export_mps: bool,
) -> geobal_core::sweep::RunManifest {
    let path = geobal_core::model::save_system(system, &dir.join("system")).unwrap();
    geobal_core::sweep::RunManifest {
        system: path,
        reference_country: "DE".into(),
        factors: geobal_core::Factor::ALL.to_vec(),
        fixture: "synthetic".into(),
        solver: geobal_core::SolveOptions::default(),
        output: dir.join("out"),
        parallelism,
        export_mps,
        residual_excluded: Vec::new(),
    }
}

fn fixture_rows(name: &str) -> Vec<Vec<String>> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/tables")
        .join(name);
    let mut reader = csv::Reader::from_path(&path).unwrap();
    reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn number(s: &str) -> Option<f64> {
    (s != "-").then(|| s.parse().unwrap())
}

/// Compares the built-in parameter tables, raw and converted, with the
/// transcribed fixtures. Returns one line per disagreement.
pub fn parameter_table_mismatches() -> Vec<String> {
    use geobal_core::model::defaults::*;
    let mut bad = Vec::new();
    let mut expect = |what: String, ok: bool| {
        if !ok {
            bad.push(what);
        }
    };

    let gen = fixture_rows("generation.csv");
    expect("generation row count".into(), gen.len() == GENERATION_TABLE.len());
    for r in &gen {
        let row = GENERATION_TABLE.iter().find(|g| g.technology == r[0]);
        let want = (number(&r[1]), number(&r[2]), number(&r[3]));
        let ok = row.is_some_and(|g| want == (Some(g.efficiency), Some(g.overnight_cost), Some(g.lifetime)));
        expect(format!("generation {}", r[0]), ok);
    }

    let sto = fixture_rows("storage.csv");
    expect("storage row count".into(), sto.len() == STORAGE_TABLE.len());
    for r in &sto {
        let want: Vec<Option<f64>> = r[1..].iter().map(|s| number(s)).collect();
        let ok = STORAGE_TABLE.iter().find(|s| s.technology == r[0]).is_some_and(|s| {
            want == [
                s.marginal_cost_in,
                Some(s.marginal_cost_out),
                s.efficiency_in_pct,
                Some(s.efficiency_out_pct),
                Some(s.self_discharge_pct),
                Some(s.overnight_cost_energy),
                s.overnight_cost_charge,
                Some(s.overnight_cost_discharge),
                Some(s.lifetime),
            ]
        });
        expect(format!("storage {}", r[0]), ok);
    }

    let exo = fixture_rows("exogenous.csv");
    expect("exogenous row count".into(), exo.len() == EXOGENOUS_TABLE.len());
    for r in &exo {
        let variable = match r[1].split(" [").next().unwrap() {
            "Power" => ExogenousVariable::Power,
            "Discharging power" => ExogenousVariable::DischargingPower,
            "Charging power" => ExogenousVariable::ChargingPower,
            "Energy" => ExogenousVariable::Energy,
            other => panic!("unknown variable {other}"),
        };
        let want: Vec<f64> = r[2..].iter().map(|s| s.parse().unwrap()).collect();
        let ok = EXOGENOUS_TABLE
            .iter()
            .find(|e| e.technology == r[0] && e.variable == variable)
            .is_some_and(|e| e.values.as_slice() == want.as_slice());
        expect(format!("exogenous {} {}", r[0], r[1]), ok);

        let id = match r[0].as_str() {
            "Bioenergy" => ids::BIOENERGY,
            "Run-of-River" => ids::RUN_OF_RIVER,
            "Pumped-hydro (closed)" => ids::PHS_CLOSED,
            "Pumped-hydro (open)" => ids::PHS_OPEN,
            _ => ids::RESERVOIR,
        };
        for (country, gw) in TABLE_COUNTRIES.iter().zip(&want) {
            let entry = default_exogenous(country)
                .unwrap()
                .into_iter()
                .find(|e| e.technology == id);
            let got = entry.map_or(0.0, |e| match variable {
                ExogenousVariable::Power | ExogenousVariable::DischargingPower => e.power_discharge,
                ExogenousVariable::ChargingPower => e.power_charge,
                ExogenousVariable::Energy => e.energy,
            });
            expect(format!("{country} {id} {:?} converted", variable), got == gw * 1000.0);
        }
    }

    let ntc = fixture_rows("ntc.csv");
    expect("ntc row count".into(), ntc.len() == NTC_TABLE.len());
    for r in &ntc {
        let (a, b) = r[0].split_once('_').unwrap();
        let want: f64 = r[1].parse().unwrap();
        expect(
            format!("ntc {}", r[0]),
            default_ntc(a, b) == Some(want) && default_ntc(b, a) == Some(want),
        );
    }
    bad
}

/// The four headline values, read through the model-facing accessors.
pub fn parameter_spot_checks() -> Vec<(&'static str, bool)> {
    use geobal_core::model::defaults::*;
    let techs = default_technologies();
    let tech = |id: &str| techs.iter().find(|t| t.id == id).unwrap().clone();
    let p2g = tech(ids::P2G);
    let reservoir = default_exogenous("DE")
        .unwrap()
        .into_iter()
        .find(|e| e.technology == ids::RESERVOIR)
        .unwrap();
    vec![
        (
            "wind onshore 1182 EUR/kW",
            tech(ids::WIND_ONSHORE).overnight_cost_power == Some(1182.0),
        ),
        (
            "power-to-gas efficiencies 50/50",
            p2g.efficiency_in == 0.5 && p2g.efficiency_out == 0.5,
        ),
        ("AT_DE NTC 7500 MW", default_ntc("AT", "DE") == Some(7500.0)),
        ("DE reservoir energy 258 GWh", reservoir.energy == 258_000.0),
    ]
}

/// Quadratic scanner using prefix sums: from every opening hour, find the
/// longest run whose partial sums all stay positive.
pub fn scan_events(series: &[f64]) -> Vec<(usize, usize, f64)> {
    let mut prefix = vec![0.0];
    for v in series {
        prefix.push(prefix.last().unwrap() + v);
    }
    let mut out = Vec::new();
    let mut next_free = 0;
    for s in 0..series.len() {
        if s < next_free || series[s] <= 0.0 {
            continue;
        }
        let mut e = s;
        while e + 1 < series.len() && prefix[e + 2] - prefix[s] > 0.0 {
            e += 1;
        }
        let peak = (s..=e).map(|k| prefix[k + 1] - prefix[s]).fold(f64::MIN, f64::max);
        out.push((s, e, peak));
        next_free = e + 1;
    }
    out
}
