//! Line-oriented model files.
//!
//! ```text
//! # comment
//! lattice <D> <L> <qubits_per_cell>
//! name <label>
//! term <x[,y]> <size> [-]<pauli-spec>
//! ```
//!
//! The Pauli spec lists one letter per qubit of the square, in the site order
//! of the square and then the in-site order.

use std::fmt::Write as _;
use std::path::Path;

use super::{CommutingProjectorModel, Term};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Square, Torus};
use crate::operators::{PauliString, Phase};

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
}

impl<'a> Tokens<'a> {
    fn new(line: &'a str) -> Self {
        let mut items = Vec::new();
        let mut start = None;
        for (i, ch) in line.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    items.push((s + 1, &line[s..i]));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            items.push((s + 1, &line[s..]));
        }
        Tokens { items }
    }
}

fn parse_usize(tok: (usize, &str), line: usize, what: &str) -> Result<usize> {
    tok.1
        .parse::<usize>()
        .map_err(|_| perr(line, tok.0, format!("expected {what}, found {:?}", tok.1)))
}

/// Parses model text into a validated model.
pub fn parse_model(text: &str) -> Result<CommutingProjectorModel> {
    let mut lattice: Option<Lattice> = None;
    let mut name = String::from("model");
    let mut terms = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks = Tokens::new(content).items;
        if toks.is_empty() {
            continue;
        }
        match toks[0].1 {
            "lattice" => {
                if toks.len() != 4 {
                    return Err(perr(line_no, toks[0].0, "lattice line needs D, L and qubits_per_cell"));
                }
                if lattice.is_some() {
                    return Err(perr(line_no, toks[0].0, "duplicate lattice line"));
                }
                let d = parse_usize(toks[1], line_no, "dimension")?;
                let l = parse_usize(toks[2], line_no, "side length")?;
                let q = parse_usize(toks[3], line_no, "qubits per cell")?;
                let torus = Torus::new(d, l).map_err(|e| perr(line_no, toks[1].0, e.to_string()))?;
                lattice = Some(Lattice::new(torus, q).map_err(|e| perr(line_no, toks[3].0, e.to_string()))?);
            }
            "name" => {
                if toks.len() != 2 {
                    return Err(perr(line_no, toks[0].0, "name line needs one label"));
                }
                name = toks[1].1.to_string();
            }
            "term" => {
                let lat = lattice.ok_or_else(|| perr(line_no, toks[0].0, "term before lattice line"))?;
                if toks.len() != 4 {
                    return Err(perr(line_no, toks[0].0, "term line needs anchor, size and Pauli spec"));
                }
                let torus = lat.torus;
                let coords: Vec<&str> = toks[1].1.split(',').collect();
                if coords.len() != torus.dim() {
                    return Err(perr(
                        line_no,
                        toks[1].0,
                        format!("anchor needs {} coordinate(s)", torus.dim()),
                    ));
                }
                let mut anchor = [0usize; 2];
                for (k, c) in coords.iter().enumerate() {
                    let v = c
                        .parse::<usize>()
                        .map_err(|_| perr(line_no, toks[1].0, format!("bad coordinate {c:?}")))?;
                    if v >= torus.side() {
                        return Err(perr(line_no, toks[1].0, format!("coordinate {v} outside the torus")));
                    }
                    anchor[k] = v;
                }
                let size = parse_usize(toks[2], line_no, "square size")?;
                if size == 0 || size > torus.side() {
                    return Err(perr(line_no, toks[2].0, format!("square size {size} outside 1..={}", torus.side())));
                }
                let square = Square { anchor, size };
                let qubits = lat.qubits_of(&square);
                let spec = toks[3].1;
                let (sign, body) = match spec.strip_prefix('-') {
                    Some(rest) => (Phase::MINUS_ONE, rest),
                    None => (Phase::ONE, spec.strip_prefix('+').unwrap_or(spec)),
                };
                if body.chars().count() != qubits.len() {
                    return Err(perr(
                        line_no,
                        toks[3].0,
                        format!("Pauli spec has {} letters, square holds {} qubits", body.chars().count(), qubits.len()),
                    ));
                }
                let local = PauliString::parse(body).map_err(|e| perr(line_no, toks[3].0, e.to_string()))?;
                let mut inverse = vec![usize::MAX; lat.n_qubits()];
                let mut ops = Vec::new();
                for (i, &q) in qubits.iter().enumerate() {
                    let op = local.get(i);
                    if op == crate::operators::Pauli::I {
                        continue;
                    }
                    if inverse[q] != usize::MAX {
                        return Err(perr(line_no, toks[3].0, "square wraps onto itself with conflicting letters"));
                    }
                    inverse[q] = i;
                    ops.push((q, op));
                }
                let stabilizer = PauliString::from_ops(lat.n_qubits(), &ops)?.with_phase(sign);
                terms.push(Term { square, stabilizer });
            }
            other => return Err(perr(line_no, toks[0].0, format!("unknown keyword {other:?}"))),
        }
    }
    let lat = lattice.ok_or_else(|| perr(1, 1, "missing lattice line"))?;
    CommutingProjectorModel::new(name, lat, terms)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CommutingProjectorModel> {
    parse_model(&std::fs::read_to_string(path)?)
}

/// Canonical text form; `parse_model(write_model(m)) == m`.
pub fn write_model(model: &CommutingProjectorModel) -> String {
    let lat = &model.lattice;
    let torus = &lat.torus;
    let mut out = String::new();
    let _ = writeln!(out, "lattice {} {} {}", torus.dim(), torus.side(), lat.qubits_per_site);
    let _ = writeln!(out, "name {}", model.name);
    for t in &model.terms {
        let anchor = if torus.dim() == 1 {
            format!("{}", t.square.anchor[0])
        } else {
            format!("{},{}", t.square.anchor[0], t.square.anchor[1])
        };
        let local = t.stabilizer.restrict(&lat.qubits_of(&t.square));
        let sign = if t.stabilizer.phase() == Phase::MINUS_ONE { "-" } else { "" };
        let _ = writeln!(out, "term {} {} {}{}", anchor, t.square.size, sign, local.body());
    }
    out
}

pub fn save_model(model: &CommutingProjectorModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_model(model))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_ising, build_toric_code};

    #[test]
    fn round_trip() {
        for m in [build_toric_code(2).unwrap(), build_toric_code(3).unwrap(), build_ising(3, 1).unwrap(), build_ising(2, 2).unwrap()] {
            let text = write_model(&m);
            let back = parse_model(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(write_model(&back), text);
        }
    }

    #[test]
    fn parse_errors_carry_positions() {
        let e = parse_model("lattice 1 2 1\nterm 0 1 Q\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, column: 10, .. }));
        let e = parse_model("lattice 1 2 1\n  bogus\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, column: 3, .. }));
    }

    #[test]
    fn anticommuting_file() {
        let e = parse_model("lattice 1 2 1\nterm 0 1 X\nterm 0 1 Z # same qubit\n").unwrap_err();
        assert!(matches!(e, Error::Commutation { first: 0, second: 1 }));
    }

    #[test]
    fn frustrated_file() {
        let e = parse_model("lattice 1 2 1\nterm 0 1 Z\nterm 0 1 -Z\n").unwrap_err();
        assert!(matches!(e, Error::Frustrated));
    }
}
