//! Plain-text LP-format export for cross-checking with external solvers.

use std::fmt::Write;

use super::simplex::{Sense, StandardLP};

fn term(out: &mut String, coeff: f64, name: &str, first: bool) {
    let sign = if coeff < 0.0 { "-" } else { "+" };
    let mag = coeff.abs();
    if first && coeff >= 0.0 {
        let _ = write!(out, " {mag:?} {name}");
    } else {
        let _ = write!(out, " {sign} {mag:?} {name}");
    }
}

fn expression(out: &mut String, coeffs: &[f64], names: &[String]) {
    let mut first = true;
    for (c, name) in coeffs.iter().zip(names) {
        if *c != 0.0 {
            term(out, *c, name, first);
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
}

/// Renders `lp` in CPLEX LP syntax.
pub fn to_lp_format(lp: &StandardLP) -> String {
    let mut out = String::from("Maximize\n obj:");
    expression(&mut out, &lp.objective, &lp.names);
    out.push_str("\nSubject To\n");
    for row in &lp.rows {
        let _ = write!(out, " {}:", row.name.replace("->", "_"));
        expression(&mut out, &row.coeffs, &lp.names);
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {:?}", row.rhs);
    }
    out.push_str("Bounds\n");
    for (j, name) in lp.names.iter().enumerate() {
        match lp.upper[j] {
            Some(u) => {
                let _ = writeln!(out, " {:?} <= {name} <= {u:?}", lp.lower[j]);
            }
            None => {
                let _ = writeln!(out, " {name} >= {:?}", lp.lower[j]);
            }
        }
    }
    out.push_str("End\n");
    out
}
