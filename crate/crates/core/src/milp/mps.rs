//! Fixed-field MPS export and a small reader that recovers model dimensions.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use super::MilpModel;

fn col_name(i: usize) -> String {
    format!("C{i:07}")
}

fn row_name(i: usize) -> String {
    format!("R{i:07}")
}

fn num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e11 {
        format!("{}", v as i64)
    } else {
        format!("{v:.6e}")
    }
}

/// One data record with fields at the fixed MPS columns 2, 5, 15, 25, 40, 50.
fn record(out: &mut String, kind: &str, name1: &str, name2: &str, value: &str) {
    let _ = writeln!(out, " {kind:<2} {name1:<8}  {name2:<8}  {value:>12}");
}

pub fn to_mps_string(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("NAME          BUILD\n");
    out.push_str("ROWS\n");
    out.push_str(" N  COST\n");
    for (i, c) in model.constraints.iter().enumerate() {
        let kind = match (c.lower.is_finite(), c.upper.is_finite()) {
            (true, true) if c.lower == c.upper => "E",
            (true, _) => "G",
            (false, true) => "L",
            (false, false) => "N",
        };
        let _ = writeln!(out, " {kind:<2} {}", row_name(i));
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.variables.len()];
    for (r, c) in model.constraints.iter().enumerate() {
        for &(v, a) in &c.terms {
            by_col[v].push((r, a));
        }
    }
    out.push_str("COLUMNS\n");
    out.push_str("    MARKER                 'MARKER'                 'INTORG'\n");
    for (i, v) in model.variables.iter().enumerate() {
        let name = col_name(i);
        record(&mut out, "", &name, "COST", &num(v.cost));
        for &(r, a) in &by_col[i] {
            record(&mut out, "", &name, &row_name(r), &num(a));
        }
    }
    out.push_str("    MARKER                 'MARKER'                 'INTEND'\n");

    out.push_str("RHS\n");
    for (i, c) in model.constraints.iter().enumerate() {
        let rhs = if c.lower.is_finite() { c.lower } else { c.upper };
        if rhs.is_finite() && rhs != 0.0 {
            record(&mut out, "", "RHS", &row_name(i), &num(rhs));
        }
    }
    let ranged: Vec<(usize, f64)> = model
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| c.lower.is_finite() && c.upper.is_finite() && c.lower != c.upper)
        .map(|(i, c)| (i, c.upper - c.lower))
        .collect();
    if !ranged.is_empty() {
        out.push_str("RANGES\n");
        for (i, r) in ranged {
            record(&mut out, "", "RNG", &row_name(i), &num(r));
        }
    }
    out.push_str("BOUNDS\n");
    for (i, v) in model.variables.iter().enumerate() {
        let name = col_name(i);
        if v.lower == v.upper {
            record(&mut out, "FX", "BND", &name, &num(v.lower));
        } else {
            record(&mut out, "LO", "BND", &name, &num(v.lower));
            record(&mut out, "UP", "BND", &name, &num(v.upper));
        }
    }
    out.push_str("ENDATA\n");
    out
}

pub fn write_mps(model: &MilpModel, path: &Path) -> io::Result<()> {
    fs::write(path, to_mps_string(model))
}

/// Dimensions of a model file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MpsSummary {
    pub rows: usize,
    pub columns: usize,
    pub integer_columns: usize,
    pub nonzeros: usize,
}

/// Reads section structure and counts; objective rows are not counted as constraints.
pub fn read_mps(text: &str) -> Result<MpsSummary, String> {
    let mut section = "";
    let mut summary = MpsSummary::default();
    let mut objective: Option<String> = None;
    let mut last_col: Option<String> = None;
    let mut integer = false;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        if !line.starts_with(' ') {
            section = line.split_whitespace().next().unwrap_or("");
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        match section {
            "ROWS" => match f.as_slice() {
                ["N", name] if objective.is_none() => objective = Some(name.to_string()),
                [_, _] => summary.rows += 1,
                _ => return Err(format!("line {}: bad ROWS record", n + 1)),
            },
            "COLUMNS" => {
                if f.len() >= 3 && f[1] == "'MARKER'" {
                    integer = f[2] == "'INTORG'";
                    continue;
                }
                if f.len() != 3 && f.len() != 5 {
                    return Err(format!("line {}: bad COLUMNS record", n + 1));
                }
                if last_col.as_deref() != Some(f[0]) {
                    summary.columns += 1;
                    if integer {
                        summary.integer_columns += 1;
                    }
                    last_col = Some(f[0].to_string());
                }
                for pair in f[1..].chunks(2) {
                    if Some(pair[0]) != objective.as_deref() {
                        summary.nonzeros += 1;
                    }
                    pair[1]
                        .parse::<f64>()
                        .map_err(|e| format!("line {}: {e}", n + 1))?;
                }
            }
            "RHS" | "RANGES" | "BOUNDS" | "NAME" => {}
            other => return Err(format!("line {}: unknown section {other}", n + 1)),
        }
    }
    if section != "ENDATA" {
        return Err("missing ENDATA".into());
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{build_model, PlanningInstance};
    use crate::world::{GridDims, HeightMap};

    #[test]
    fn counts_survive_round_trip() {
        let d = GridDims::new(3, 3, 2).unwrap();
        let start = HeightMap::empty(d);
        let mut target = start.clone();
        target.set(1, 1, 1).unwrap();
        let model = build_model(&PlanningInstance::new(start, target, 1).unwrap(), 4).unwrap();
        let s = read_mps(&to_mps_string(&model)).unwrap();
        assert_eq!(s.columns, model.num_variables());
        assert_eq!(s.integer_columns, model.num_variables());
        assert_eq!(s.rows, model.num_constraints());
        assert_eq!(s.nonzeros, model.nonzeros());
    }

    #[test]
    fn fixed_field_positions() {
        let mut out = String::new();
        record(&mut out, "UP", "BND", "C0000001", "1");
        assert_eq!(&out[1..3], "UP");
        assert_eq!(&out[4..7], "BND");
        assert_eq!(&out[14..22], "C0000001");
        assert_eq!(out[24..36].trim(), "1");
    }
}
