use std::fmt::Write as _;

use super::chain::Chain;
use super::complex::SimplicialComplex;
use super::MeshError;

/// A complex plus an optional orientation of its top simplices, as stored
/// in the text mesh format:
///
/// ```text
/// dim 2
/// v 0 0
/// v 1 0
/// v 0 1
/// s 1 0 1
/// s 1 0 2
/// s 1 1 2
/// s 2 0 1 2 +
/// ```
///
/// Simplices are written in ascending dimension and id order, so reading a
/// written file reproduces the same ids. Coordinates use the shortest
/// representation that parses back to the same bits.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshFile {
    pub complex: SimplicialComplex,
    pub orientation: Option<Chain>,
}

impl MeshFile {
    pub fn new(complex: SimplicialComplex, orientation: Option<Chain>) -> Self {
        Self {
            complex,
            orientation,
        }
    }

    pub fn to_text(&self) -> String {
        let k = &self.complex;
        let mut out = String::new();
        writeln!(out, "dim {}", k.ambient_dim()).unwrap();
        for v in k.vertices() {
            out.push('v');
            for x in v {
                write!(out, " {x:?}").unwrap();
            }
            out.push('\n');
        }
        let top = k.dim();
        for p in 1..=top {
            for (id, s) in k.simplices(p).iter().enumerate() {
                write!(out, "s {p}").unwrap();
                for v in s {
                    write!(out, " {v}").unwrap();
                }
                if let Some(c) = self.orientation.as_ref().filter(|c| c.dim == p) {
                    match c.get(id) {
                        1 => out.push_str(" +"),
                        -1 => out.push_str(" -"),
                        _ => {}
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let err = |line: usize, message: String| MeshError::Parse { line, message };
        let mut ambient: Option<usize> = None;
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        let mut simplices: Vec<(usize, Vec<usize>, Option<i64>)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut tok = body.split_whitespace();
            match tok.next() {
                Some("dim") => {
                    if ambient.is_some() {
                        return Err(err(line, "repeated `dim` header".into()));
                    }
                    let n = tok
                        .next()
                        .and_then(|t| t.parse::<usize>().ok())
                        .filter(|&n| n > 0)
                        .ok_or_else(|| err(line, "expected `dim N` with N >= 1".into()))?;
                    if tok.next().is_some() {
                        return Err(err(line, "trailing tokens after `dim N`".into()));
                    }
                    ambient = Some(n);
                }
                Some("v") => {
                    let n = ambient.ok_or_else(|| err(line, "vertex before `dim` header".into()))?;
                    if !simplices.is_empty() {
                        return Err(err(line, "vertex after simplex lines".into()));
                    }
                    let coords = tok
                        .map(|t| {
                            t.parse::<f64>()
                                .ok()
                                .filter(|x| x.is_finite())
                                .ok_or_else(|| err(line, format!("bad coordinate `{t}`")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    if coords.len() != n {
                        return Err(err(
                            line,
                            format!("vertex has {} coordinates, expected {n}", coords.len()),
                        ));
                    }
                    vertices.push(coords);
                }
                Some("s") => {
                    if ambient.is_none() {
                        return Err(err(line, "simplex before `dim` header".into()));
                    }
                    let rest: Vec<&str> = tok.collect();
                    let p: usize = rest
                        .first()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(line, "expected `s p i0 ... ip [+|-]`".into()))?;
                    let mut idx = &rest[1..];
                    let mut sign = None;
                    if let Some(&last) = idx.last() {
                        if last == "+" || last == "-" {
                            sign = Some(if last == "+" { 1 } else { -1 });
                            idx = &idx[..idx.len() - 1];
                        }
                    }
                    if idx.len() != p + 1 {
                        return Err(err(
                            line,
                            format!("{p}-simplex needs {} vertex indices, got {}", p + 1, idx.len()),
                        ));
                    }
                    let verts = idx
                        .iter()
                        .map(|t| {
                            t.parse::<usize>()
                                .map_err(|_| err(line, format!("bad vertex index `{t}`")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    if let Some(&v) = verts.iter().find(|&&v| v >= vertices.len()) {
                        return Err(err(line, format!("vertex index {v} out of range")));
                    }
                    simplices.push((line, verts, sign));
                }
                Some(other) => return Err(err(line, format!("unknown record `{other}`"))),
                None => unreachable!(),
            }
        }
        let ambient = ambient.ok_or_else(|| err(1, "missing `dim` header".into()))?;
        // Build in ascending dimension so that explicitly listed faces keep
        // their file order as ids.
        let mut ordered: Vec<&(usize, Vec<usize>, Option<i64>)> = simplices.iter().collect();
        ordered.sort_by_key(|(_, s, _)| s.len());
        let list: Vec<Vec<usize>> = ordered.iter().map(|(_, s, _)| s.clone()).collect();
        let complex = SimplicialComplex::new(ambient, vertices, &list).map_err(|e| {
            let line = match &e {
                MeshError::InvalidSimplex(s) | MeshError::Degenerate { simplex: s, .. } => ordered
                    .iter()
                    .find(|(_, t, _)| {
                        let mut t = t.clone();
                        t.sort_unstable();
                        &t == s
                    })
                    .map(|(l, _, _)| *l)
                    .unwrap_or(0),
                _ => 0,
            };
            err(line, e.to_string())
        })?;
        let top = complex.dim();
        let mut orientation: Option<Chain> = None;
        for (line, s, sign) in &simplices {
            let Some(sign) = sign else { continue };
            if s.len() - 1 != top {
                return Err(err(
                    *line,
                    "orientation marks are only allowed on top-dimensional simplices".into(),
                ));
            }
            let id = complex.find(s).expect("simplex was inserted");
            let mut sorted = s.clone();
            // a listed vertex order that is an odd permutation of the sorted one flips the sign
            let parity = sort_parity(&mut sorted);
            orientation
                .get_or_insert_with(|| Chain::zero(top))
                .add_to(id, sign * parity);
        }
        Ok(Self {
            complex,
            orientation,
        })
    }
}

fn sort_parity(v: &mut [usize]) -> i64 {
    let mut sign = 1;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    sign
}
