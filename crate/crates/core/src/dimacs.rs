//! DIMACS CNF reading and writing.
//!
//! The clause width k is taken from a `c rksat k=<k>` comment when present
//! (so formulas without clauses roundtrip), otherwise from the first clause.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::formula::{Clause, Formula, Literal};

const WIDTH_TAG: &str = "rksat k=";

pub fn write_dimacs(formula: &Formula) -> String {
    let mut out = String::new();
    writeln!(out, "c {WIDTH_TAG}{}", formula.k()).unwrap();
    writeln!(out, "p cnf {} {}", formula.n(), formula.m()).unwrap();
    for c in formula.clauses() {
        for l in c.literals() {
            write!(out, "{} ", l.to_dimacs()).unwrap();
        }
        out.push_str("0\n");
    }
    out
}

pub fn parse_dimacs(text: &str) -> Result<Formula> {
    let mut header: Option<(usize, usize)> = None;
    let mut width: Option<usize> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if let Some(comment) = line.strip_prefix('c') {
            if let Some(k) = comment.trim().strip_prefix(WIDTH_TAG) {
                width = Some(k.trim().parse().map_err(|_| Error::MalformedDimacs {
                    line: line_no,
                    msg: format!("bad width tag {k:?}"),
                })?);
            }
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(malformed(line_no, "duplicate header"));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(malformed(line_no, "expected `p cnf <vars> <clauses>`"));
            }
            let n = parts[2].parse().map_err(|_| malformed(line_no, "bad variable count"))?;
            let m = parts[3].parse().map_err(|_| malformed(line_no, "bad clause count"))?;
            header = Some((n, m));
            continue;
        }
        let (n, _) = header.ok_or_else(|| malformed(line_no, "clause before header"))?;
        for tok in line.split_whitespace() {
            let x: i64 = tok
                .parse()
                .map_err(|_| malformed(line_no, &format!("bad literal {tok:?}")))?;
            if x == 0 {
                let k = *width.get_or_insert(current.len());
                if current.len() != k {
                    return Err(Error::NonUniformWidth {
                        clause: clauses.len(),
                        expected: k,
                        found: current.len(),
                    });
                }
                clauses.push(Clause::new(std::mem::take(&mut current)));
            } else {
                if x.unsigned_abs() as usize > n {
                    return Err(Error::VariableOutOfRange { var: x, n });
                }
                current.push(Literal::from_dimacs(x).expect("nonzero literal"));
            }
        }
    }

    let (n, m) = header.ok_or_else(|| malformed(last_line, "missing header"))?;
    if !current.is_empty() {
        return Err(malformed(last_line, "last clause is not terminated by 0"));
    }
    if clauses.len() != m {
        return Err(malformed(
            last_line,
            &format!("header declares {m} clauses, found {}", clauses.len()),
        ));
    }
    Formula::new(width.unwrap_or(0), n, clauses)
}

fn malformed(line: usize, msg: &str) -> Error {
    Error::MalformedDimacs {
        line,
        msg: msg.to_string(),
    }
}
