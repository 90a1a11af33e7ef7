//! User bundles for `panelbeat certify`: a map given by expression strings
//! and the strata to beat, read from a JSON document:
//!
//! ```json
//! {"schema": 1,
//!  "components": ["x1", "sqrt(abs(x2))"],
//!  "strata": [[0], [3, 4]],
//!  "radius": 0.25,
//!  "margin": 0.5}
//! ```
//!
//! Each stratum is a mesh vertex (a point) or an edge given by its two
//! vertex ids. Variables are `x1 .. xm` (or `x`, `y`, `z`) over the mesh's
//! ambient coordinates.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use exmex::prelude::*;
use serde::Deserialize;

use semialg::algebra::SmoothMap;
use semialg::mesh::SimplicialComplex;
use semialg::panelbeat::TubeChart;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartsDocument {
    #[serde(default)]
    pub schema: Option<u32>,
    pub components: Vec<String>,
    pub strata: Vec<Vec<usize>>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    0.5
}

impl ChartsDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).context("charts document")?;
        if let Some(s) = doc.schema {
            if s != 1 {
                bail!("charts document: unsupported schema {s}");
            }
        }
        if doc.components.is_empty() {
            bail!("charts document: `components` is empty");
        }
        if !(doc.margin > 0.0) {
            bail!("charts document: `margin` must be positive");
        }
        if let Some(r) = doc.radius {
            if !(r > 0.0 && r.is_finite()) {
                bail!("charts document: `radius` must be positive");
            }
        }
        Ok(doc)
    }
}

/// Index of a variable name among the ambient coordinates.
fn var_index(name: &str, m: usize) -> Option<usize> {
    let i = match name {
        "x" => 0,
        "y" => 1,
        "z" => 2,
        _ => name.strip_prefix('x')?.parse::<usize>().ok()?.checked_sub(1)?,
    };
    (i < m).then_some(i)
}

/// The map `R^m -> R^k` whose components are the given expressions.
pub fn expression_map(components: &[String], m: usize) -> Result<SmoothMap> {
    let mut parsed = Vec::with_capacity(components.len());
    for (n, src) in components.iter().enumerate() {
        let e = exmex::parse::<f64>(src).map_err(|e| anyhow::anyhow!("components[{n}]: {e}"))?;
        let slots = e
            .var_names()
            .iter()
            .map(|v| var_index(v, m).with_context(|| format!("components[{n}]: unknown variable `{v}` in R^{m}")))
            .collect::<Result<Vec<_>>>()?;
        parsed.push((e, slots));
    }
    let parsed = Arc::new(parsed);
    Ok(SmoothMap::new(m, components.len(), move |y| {
        parsed
            .iter()
            .map(|(e, slots)| {
                let args: Vec<f64> = slots.iter().map(|&i| y[i]).collect();
                e.eval(&args).unwrap_or(f64::NAN)
            })
            .collect()
    }))
}

/// Tube around a vertex or an edge of the mesh. Without an explicit radius
/// it is half the shortest mesh edge touching the stratum.
pub fn stratum_tube(k: &SimplicialComplex, stratum: &[usize], radius: Option<f64>) -> Result<TubeChart> {
    let nv = k.vertices().len();
    if let Some(&bad) = stratum.iter().find(|&&v| v >= nv) {
        bail!("charts document: stratum vertex {bad} out of range (mesh has {nv} vertices)");
    }
    let radius = match radius {
        Some(r) => r,
        None => {
            let shortest = k
                .simplices(1)
                .iter()
                .filter(|e| e.iter().any(|v| stratum.contains(v)) && !e.iter().all(|v| stratum.contains(v)))
                .map(|e| dist(k.vertex(e[0]), k.vertex(e[1])))
                .fold(f64::INFINITY, f64::min);
            if !shortest.is_finite() {
                bail!("charts document: stratum {stratum:?} has no neighbouring edges");
            }
            0.5 * shortest
        }
    };
    let tube = match stratum {
        [v] => TubeChart::point(k.vertex(*v).to_vec(), radius)?,
        [a, b] => {
            let (p, q) = (k.vertex(*a), k.vertex(*b));
            let dir: Vec<f64> = q.iter().zip(p).map(|(x, y)| x - y).collect();
            TubeChart::affine(p.to_vec(), vec![dir], vec![(0.0, 1.0)], radius)?
        }
        _ => bail!("charts document: strata are single vertices or edges, got {stratum:?}"),
    };
    Ok(tube)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variables_map_to_coordinates() {
        let f = expression_map(&["y - 2*x".into(), "sqrt(abs(x3))".into()], 3).unwrap();
        assert_eq!(f.eval(&[1.0, 5.0, -4.0]).unwrap(), vec![3.0, 2.0]);
    }

    #[test]
    fn unknown_variable_is_rejected() {
        assert!(expression_map(&["x4".into()], 3).is_err());
        assert!(expression_map(&["w + 1".into()], 2).is_err());
    }

    #[test]
    fn document_validation() {
        assert!(ChartsDocument::parse(r#"{"components": ["x"], "strata": [[0]]}"#).is_ok());
        assert!(ChartsDocument::parse(r#"{"components": [], "strata": []}"#).is_err());
        assert!(ChartsDocument::parse(r#"{"components": ["x"], "strata": [], "extra": 1}"#).is_err());
        assert!(ChartsDocument::parse(r#"{"schema": 2, "components": ["x"], "strata": []}"#).is_err());
    }
}
