//! Fixed-format MPS.
//!
//! Export layout (1-based character columns):
//!
//! | field | columns | content                     |
//! |-------|---------|-----------------------------|
//! | 1     | 2–3     | row type / bound type       |
//! | 2     | 5–12    | name                        |
//! | 3     | 15–22   | name                        |
//! | 4     | 25–36   | number                      |
//! | 5     | 40–47   | name                        |
//! | 6     | 50–61   | number                      |
//!
//! Columns are named `C0000001…`, rows `R0000001…` in LP order and the
//! objective row `COST`. Numbers use the shortest decimal that fits twelve
//! characters, which is exact for most values; otherwise the most accurate
//! twelve-character fixed or scientific rendering. Every column appears with an
//! explicit objective entry so empty columns survive a round trip.
//!
//! The reader accepts free spacing (whitespace-separated tokens) with names
//! free of blanks. `UP` never changes the lower bound.

use std::fmt::Write as _;
use std::path::Path;

use super::{ColumnKey, LinearProgram, Relation, RowKey};
use crate::{Error, Result};

const OBJ: &str = "COST";

pub fn column_code(j: usize) -> String {
    format!("C{:07}", j + 1)
}

pub fn row_code(i: usize) -> String {
    format!("R{:07}", i + 1)
}

/// Rendering of `x` within twelve characters: the shortest exact decimal if one
/// fits, else the most accurate fixed or scientific form that does.
pub fn format_number(x: f64) -> String {
    let plain = format!("{x}");
    if plain.len() <= 12 {
        return plain;
    }
    let sci = format!("{x:e}");
    if sci.len() <= 12 {
        return sci;
    }
    let fixed = (0..=11).map(|d| format!("{x:.d$}"));
    let scientific = (0..=16).map(|p| format!("{x:.p$e}"));
    fixed
        .chain(scientific)
        .filter(|s| s.len() <= 12)
        .min_by(|a, b| {
            let ea = (a.parse::<f64>().unwrap() - x).abs();
            let eb = (b.parse::<f64>().unwrap() - x).abs();
            ea.total_cmp(&eb).then(a.len().cmp(&b.len()))
        })
        .expect("a zero-precision rendering fits")
}

fn line(f1: &str, f2: &str, f3: &str, f4: &str, f5: &str, f6: &str) -> String {
    let mut s = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}");
    if !f5.is_empty() {
        write!(s, "   {f5:<8}  {f6:<12}").unwrap();
    }
    s.truncate(s.trim_end().len());
    s.push('\n');
    s
}

/// Renders the program. Output depends only on the program.
pub fn to_mps(lp: &LinearProgram) -> String {
    let mut out = String::new();
    out.push_str("NAME          GEOBAL\n");
    out.push_str("ROWS\n");
    out.push_str(&line("N", OBJ, "", "", "", ""));
    for (i, r) in lp.rows.iter().enumerate() {
        let t = match r.relation {
            Relation::Le => "L",
            Relation::Eq => "E",
            Relation::Ge => "G",
        };
        out.push_str(&line(t, &row_code(i), "", "", "", ""));
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_columns()];
    for (i, r) in lp.rows.iter().enumerate() {
        for &(j, a) in &r.coefficients {
            by_col[j].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    for (j, col) in lp.columns.iter().enumerate() {
        let name = column_code(j);
        let mut entries = vec![(OBJ.to_string(), col.cost)];
        entries.extend(by_col[j].iter().map(|&(i, a)| (row_code(i), a)));
        for pair in entries.chunks(2) {
            let (r1, v1) = &pair[0];
            let (r2, v2) = pair
                .get(1)
                .map(|(r, v)| (r.as_str(), format_number(*v)))
                .unwrap_or(("", String::new()));
            out.push_str(&line("", &name, r1, &format_number(*v1), r2, &v2));
        }
    }

    out.push_str("RHS\n");
    let rhs: Vec<(String, f64)> = lp
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.rhs != 0.0)
        .map(|(i, r)| (row_code(i), r.rhs))
        .collect();
    for pair in rhs.chunks(2) {
        let (r2, v2) = pair
            .get(1)
            .map(|(r, v)| (r.as_str(), format_number(*v)))
            .unwrap_or(("", String::new()));
        out.push_str(&line("", "RHS", &pair[0].0, &format_number(pair[0].1), r2, &v2));
    }

    out.push_str("BOUNDS\n");
    for (j, c) in lp.columns.iter().enumerate() {
        let name = column_code(j);
        let b = |t: &str, v: f64| line(t, "BND", &name, &format_number(v), "", "");
        if c.lower == c.upper {
            out.push_str(&b("FX", c.lower));
            continue;
        }
        match (c.lower.is_finite(), c.upper.is_finite()) {
            (false, false) => out.push_str(&line("FR", "BND", &name, "", "", "")),
            (false, true) => {
                out.push_str(&line("MI", "BND", &name, "", "", ""));
                out.push_str(&b("UP", c.upper));
            }
            (true, up) => {
                if c.lower != 0.0 {
                    out.push_str(&b("LO", c.lower));
                }
                if up {
                    out.push_str(&b("UP", c.upper));
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

pub fn write_mps(lp: &LinearProgram, path: &Path) -> Result<()> {
    std::fs::write(path, to_mps(lp)).map_err(|e| Error::io(path, e))
}

pub fn read_mps(path: &Path) -> Result<LinearProgram> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mps(&text)
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    Start,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

/// Parses MPS text. Names become `External` keys; the objective row is the
/// first `N` row, further `N` rows are ignored.
pub fn parse_mps(text: &str) -> Result<LinearProgram> {
    use std::collections::HashMap;

    let mut section = Section::Start;
    let mut obj_name: Option<String> = None;
    let mut free_rows: Vec<String> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut relations: Vec<(String, Relation)> = Vec::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut ranges: Vec<Option<f64>> = Vec::new();
    let mut cols: Vec<(String, f64, f64, f64)> = Vec::new();

    let err = |line: usize, m: &str| Error::Mps {
        line,
        message: m.to_string(),
    };
    let num =
        |line: usize, s: &str| -> Result<f64> { s.parse::<f64>().map_err(|_| err(line, &format!("bad number `{s}`"))) };

    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match tokens[0] {
                "NAME" => Section::Start,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(err(ln, &format!("unknown section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::Start | Section::End => return Err(err(ln, "data outside a section")),
            Section::Rows => {
                let [t, name] = tokens[..] else {
                    return Err(err(ln, "expected `type name`"));
                };
                let rel = match t {
                    "N" => {
                        if obj_name.is_none() {
                            obj_name = Some(name.to_string());
                        } else {
                            free_rows.push(name.to_string());
                        }
                        continue;
                    }
                    "L" => Relation::Le,
                    "E" => Relation::Eq,
                    "G" => Relation::Ge,
                    _ => return Err(err(ln, &format!("bad row type `{t}`"))),
                };
                if row_index.insert(name.to_string(), relations.len()).is_some() {
                    return Err(err(ln, &format!("duplicate row `{name}`")));
                }
                relations.push((name.to_string(), rel));
                entries.push(Vec::new());
                rhs.push(0.0);
                ranges.push(None);
            }
            Section::Columns => {
                if tokens.contains(&"'MARKER'") {
                    return Err(err(ln, "integer markers are not supported"));
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(err(ln, "expected `column row value [row value]`"));
                }
                let name = tokens[0];
                let j = match col_index.get(name) {
                    Some(&j) if j + 1 == cols.len() => j,
                    Some(_) => return Err(err(ln, &format!("column `{name}` is not contiguous"))),
                    None => {
                        col_index.insert(name.to_string(), cols.len());
                        cols.push((name.to_string(), 0.0, f64::INFINITY, 0.0));
                        cols.len() - 1
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let v = num(ln, pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        cols[j].3 += v;
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        entries[i].push((j, v));
                    } else if !free_rows.iter().any(|r| r == pair[0]) {
                        return Err(err(ln, &format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let body = match tokens.len() {
                    2 | 4 => &tokens[..],
                    3 | 5 => &tokens[1..],
                    _ => return Err(err(ln, "expected `[set] row value [row value]`")),
                };
                for pair in body.chunks(2) {
                    let v = num(ln, pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        continue;
                    }
                    let &i = row_index
                        .get(pair[0])
                        .ok_or_else(|| err(ln, &format!("unknown row `{}`", pair[0])))?;
                    if section == Section::Rhs {
                        rhs[i] = v;
                    } else {
                        ranges[i] = Some(v);
                    }
                }
            }
            Section::Bounds => {
                let t = tokens[0];
                let needs_value = !matches!(t, "FR" | "MI" | "PL" | "BV");
                let (name, value) = match (tokens.len(), needs_value) {
                    (3, false) => (tokens[2], None),
                    (2, false) => (tokens[1], None),
                    (4, true) => (tokens[2], Some(num(ln, tokens[3])?)),
                    (3, true) => (tokens[1], Some(num(ln, tokens[2])?)),
                    _ => return Err(err(ln, "malformed bound")),
                };
                let &j = col_index
                    .get(name)
                    .ok_or_else(|| err(ln, &format!("unknown column `{name}`")))?;
                let c = &mut cols[j];
                match (t, value) {
                    ("UP", Some(v)) => c.2 = v,
                    ("LO", Some(v)) => c.1 = v,
                    ("FX", Some(v)) => {
                        c.1 = v;
                        c.2 = v;
                    }
                    ("FR", None) => {
                        c.1 = f64::NEG_INFINITY;
                        c.2 = f64::INFINITY;
                    }
                    ("MI", None) => c.1 = f64::NEG_INFINITY,
                    ("PL", None) => c.2 = f64::INFINITY,
                    _ => return Err(err(ln, &format!("unsupported bound type `{t}`"))),
                }
            }
        }
    }
    if section != Section::End {
        return Err(err(text.lines().count(), "missing ENDATA"));
    }

    let mut lp = LinearProgram::new();
    for (name, lo, hi, cost) in cols {
        lp.add_column(name.parse::<ColumnKey>().unwrap(), lo, hi, cost);
    }
    for (i, (name, rel)) in relations.into_iter().enumerate() {
        let key: RowKey = name.parse().unwrap();
        let coef = std::mem::take(&mut entries[i]);
        match ranges[i] {
            None => {
                lp.add_row(key, coef, rel, rhs[i]);
            }
            Some(r) => {
                // A ranged row becomes a pair of inequalities.
                let (lo, hi) = match rel {
                    Relation::Le => (rhs[i] - r.abs(), rhs[i]),
                    Relation::Ge => (rhs[i], rhs[i] + r.abs()),
                    Relation::Eq if r >= 0.0 => (rhs[i], rhs[i] + r),
                    Relation::Eq => (rhs[i] + r, rhs[i]),
                };
                lp.add_row(key.clone(), coef.clone(), Relation::Ge, lo);
                lp.add_row(key, coef, Relation::Le, hi);
            }
        }
    }
    Ok(lp)
}
