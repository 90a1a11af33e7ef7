use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::SmoothMap;
use crate::mesh::SimplicialComplex;
use crate::saset::SaSet;

use super::TriangulateError;

/// The realization of one top simplex: a map from the standard simplex
/// `{λ ∈ R^p : λ_i ≥ 0, Σλ_i ≤ 1}` into ambient space. Local coordinate
/// `λ_i` is the weight of the simplex's i-th vertex (ascending vertex
/// order); vertex 0 carries the remaining weight.
#[derive(Clone, Debug)]
pub struct RealizationChart {
    pub simplex: usize,
    pub map: SmoothMap,
    /// Images of the simplex vertices, in ascending vertex order.
    pub images: Vec<Vec<f64>>,
    /// For facet i (the one omitting vertex i): ids of the boundary
    /// polynomials whose zero set contains it.
    pub facet_tags: Vec<Vec<usize>>,
    /// Indices of the compatibility-family sets containing this simplex.
    pub strata: Vec<usize>,
    pub affine: bool,
}

impl RealizationChart {
    /// The affine chart spanned by the given vertices.
    pub fn affine(simplex: usize, vertices: Vec<Vec<f64>>) -> Self {
        let p = vertices.len() - 1;
        let n = vertices[0].len();
        let a = DMatrix::from_fn(n, p, |r, c| vertices[c + 1][r] - vertices[0][r]);
        let b = DVector::from_column_slice(&vertices[0]);
        Self {
            simplex,
            map: SmoothMap::affine(a, b),
            facet_tags: vec![Vec::new(); p + 1],
            images: vertices,
            strata: Vec::new(),
            affine: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.images.len() - 1
    }

    /// Image of the point with barycentric weights `w` (one per vertex).
    pub fn at_barycentric(&self, w: &[f64]) -> Vec<f64> {
        self.map.eval_unchecked(&w[1..])
    }

    /// Composes the chart with an ambient map.
    pub fn then(&self, f: &SmoothMap) -> Result<Self, TriangulateError> {
        let map = SmoothMap::compose(f, &self.map)?;
        let images = self
            .images
            .iter()
            .map(|v| f.eval(v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            simplex: self.simplex,
            map,
            images,
            facet_tags: self.facet_tags.clone(),
            strata: self.strata.clone(),
            affine: false,
        })
    }
}

/// Counts and diagnostics collected while building a triangulation.
#[derive(Clone, Debug, Default, Serialize)]
pub struct TriangulationReport {
    pub depth: u32,
    pub refinements: u32,
    pub grid_simplices: usize,
    pub kept_all_in: usize,
    pub kept_snapped: usize,
    pub snapped_vertices: usize,
    pub snap_iterations_total: usize,
    pub snap_iterations_max: usize,
    pub dropped: Vec<DroppedSimplex>,
    pub family_snaps_reverted: usize,
    pub max_diameter: f64,
    pub slivers: usize,
    pub jittered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DroppedSimplex {
    /// Index of the simplex in the grid enumeration (or in the parent mesh
    /// for refinements and overlays).
    pub source: usize,
    pub reason: DropReason,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NoMemberVertex,
    BarycenterOutside,
    Degenerate,
    OrientationFlip,
    Sliver,
}

/// A simplicial complex with one realization chart per top simplex.
#[derive(Clone, Debug)]
pub struct TriangulationBundle {
    pub complex: SimplicialComplex,
    pub charts: Vec<RealizationChart>,
    pub set: SaSet,
    pub family: Vec<SaSet>,
    pub report: TriangulationReport,
    /// For overlays: the parent top simplex in each input bundle.
    pub parents: Vec<(usize, usize)>,
}

impl TriangulationBundle {
    pub fn dim(&self) -> usize {
        self.complex.dim()
    }

    pub fn num_top(&self) -> usize {
        self.charts.len()
    }

    /// Boundary polynomials in tag-id order: the set's leaves, then each
    /// family member's leaves.
    pub fn boundary_polys(&self) -> Vec<crate::algebra::Polynomial> {
        boundary_polys(&self.set, &self.family)
    }

    /// Sum of top-simplex volumes of the realized mesh (affine charts only
    /// are exact; curved charts use vertex images).
    pub fn mesh_volume(&self) -> f64 {
        let mut acc = crate::integrate::Neumaier::default();
        for c in &self.charts {
            let pts: Vec<&[f64]> = c.images.iter().map(|v| v.as_slice()).collect();
            acc.add(crate::mesh::simplex_measure(&pts).0);
        }
        acc.sum()
    }

    /// Replaces every chart `c` by `f ∘ c`.
    pub fn compose_realization(&self, f: &SmoothMap) -> Result<Self, TriangulateError> {
        let charts = self
            .charts
            .iter()
            .map(|c| c.then(f))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            charts,
            ..self.clone()
        })
    }

    /// Largest distance between chart vertex images and mesh vertices.
    pub fn vertex_mismatch(&self) -> f64 {
        let p = self.dim();
        let mut worst: f64 = 0.0;
        for c in &self.charts {
            let s = self.complex.simplex(p, c.simplex);
            for (k, &v) in s.iter().enumerate() {
                let mut w = vec![0.0; p + 1];
                w[k] = 1.0;
                let y = c.at_barycentric(&w);
                worst = worst.max(dist(&y, self.complex.vertex(v)));
            }
        }
        worst
    }

    /// Largest disagreement between the two charts meeting at an interior
    /// facet, over a fixed sample of points on the facet.
    pub fn shared_face_mismatch(&self) -> f64 {
        let p = self.dim();
        if p == 0 {
            return 0.0;
        }
        let samples = facet_samples(p);
        let mut worst: f64 = 0.0;
        for f in 0..self.complex.num_simplices(p - 1) {
            let co = self.complex.cofaces(p - 1, f);
            if co.len() != 2 {
                continue;
            }
            let face = self.complex.simplex(p - 1, f);
            for w in &samples {
                let a = self.eval_on_face(co[0], face, w);
                let b = self.eval_on_face(co[1], face, w);
                worst = worst.max(dist(&a, &b));
            }
        }
        worst
    }

    fn eval_on_face(&self, top: usize, face: &[usize], w: &[f64]) -> Vec<f64> {
        let p = self.dim();
        let s = self.complex.simplex(p, top);
        let mut full = vec![0.0; p + 1];
        for (k, &v) in face.iter().enumerate() {
            let pos = s.iter().position(|&u| u == v).expect("face of coface");
            full[pos] = w[k];
        }
        self.charts[top].at_barycentric(&full)
    }

    /// Checks that a chart is injective on a deterministic interior sample
    /// (pairwise distinct images).
    pub fn charts_injective(&self) -> bool {
        let p = self.dim();
        let pts = interior_samples(p, 4);
        self.charts.iter().all(|c| {
            let imgs: Vec<Vec<f64>> = pts.iter().map(|w| c.at_barycentric(w)).collect();
            (0..imgs.len()).all(|i| (i + 1..imgs.len()).all(|j| dist(&imgs[i], &imgs[j]) > 1e-14))
        })
    }
}

pub(crate) fn boundary_polys(set: &SaSet, family: &[SaSet]) -> Vec<crate::algebra::Polynomial> {
    let mut out: Vec<_> = set.leaves().iter().map(|c| c.poly.clone()).collect();
    for f in family {
        out.extend(f.leaves().iter().map(|c| c.poly.clone()));
    }
    out
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Barycentric sample points on a (p-1)-face: its vertices, edge midpoints
/// and centroid.
fn facet_samples(p: usize) -> Vec<Vec<f64>> {
    let k = p; // vertices on the face
    let mut out = Vec::new();
    for i in 0..k {
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        out.push(w);
        for j in i + 1..k {
            let mut w = vec![0.0; k];
            w[i] = 0.5;
            w[j] = 0.5;
            out.push(w);
        }
    }
    out.push(vec![1.0 / k as f64; k]);
    out
}

/// Strictly interior barycentric points on a regular lattice of the given
/// resolution (all weights `(a_i + 1/(p+1)) / (res + 1)`).
pub(crate) fn interior_samples(p: usize, res: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; p + 1];
    fn rec(pos: usize, left: usize, idx: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos + 1 == idx.len() {
            idx[pos] = left;
            out.push(idx.clone());
            return;
        }
        for a in 0..=left {
            idx[pos] = a;
            rec(pos + 1, left - a, idx, out);
        }
    }
    let mut lattice = Vec::new();
    rec(0, res, &mut idx, &mut lattice);
    let denom = res as f64 + 1.0;
    for a in lattice {
        out.push(
            a.iter()
                .map(|&ai| (ai as f64 + 1.0 / (p as f64 + 1.0)) / denom)
                .collect(),
        );
    }
    out
}
