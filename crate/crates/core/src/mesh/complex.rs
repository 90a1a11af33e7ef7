use std::collections::HashMap;

use nalgebra::DMatrix;

use super::MeshError;
use crate::algebra::subsets;

/// Relative volume threshold below which a simplex counts as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// A finite simplicial complex with vertex coordinates in `R^ambient`.
///
/// Simplices are stored per dimension as ascending vertex-index tuples;
/// every face of a stored simplex is stored too. Ids within one dimension
/// follow the order in which simplices were first seen.
#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    ambient: usize,
    vertices: Vec<Vec<f64>>,
    simplices: Vec<Vec<Vec<usize>>>,
    index: Vec<HashMap<Vec<usize>, usize>>,
    /// cofaces[p][id]: ids of (p+1)-simplices having simplex (p, id) as a facet
    cofaces: Vec<Vec<Vec<usize>>>,
}

impl PartialEq for SimplicialComplex {
    fn eq(&self, other: &Self) -> bool {
        self.ambient == other.ambient
            && self.vertices == other.vertices
            && self.simplices == other.simplices
    }
}

/// Volume of the simplex spanned by `pts` (Gram determinant) and its diameter.
pub fn simplex_measure(pts: &[&[f64]]) -> (f64, f64) {
    let p = pts.len() - 1;
    let mut diam: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d: f64 = pts[i]
                .iter()
                .zip(pts[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            diam = diam.max(d);
        }
    }
    if p == 0 {
        return (1.0, 0.0);
    }
    let n = pts[0].len();
    let e = DMatrix::from_fn(n, p, |r, c| pts[c + 1][r] - pts[0][r]);
    let gram = e.transpose() * &e;
    let det = gram.determinant().max(0.0);
    let fact: f64 = (1..=p).map(|k| k as f64).product();
    (det.sqrt() / fact, diam)
}

impl SimplicialComplex {
    /// Builds the closure of the given simplices (any vertex order) and
    /// rejects geometrically degenerate ones.
    pub fn new(
        ambient: usize,
        vertices: Vec<Vec<f64>>,
        simplices: &[Vec<usize>],
    ) -> Result<Self, MeshError> {
        if let Some(bad) = vertices.iter().find(|v| v.len() != ambient) {
            return Err(MeshError::DimensionMismatch {
                expected: ambient,
                found: bad.len(),
            });
        }
        let top = simplices.iter().map(|s| s.len()).max().unwrap_or(1).max(1) - 1;
        let mut k = Self {
            ambient,
            vertices,
            simplices: vec![Vec::new(); top + 1],
            index: vec![HashMap::new(); top + 1],
            cofaces: Vec::new(),
        };
        for v in 0..k.vertices.len() {
            k.insert(vec![v]);
        }
        for s in simplices {
            let mut s = s.clone();
            s.sort_unstable();
            if s.is_empty() || s.windows(2).any(|w| w[0] == w[1]) {
                return Err(MeshError::InvalidSimplex(s));
            }
            if let Some(&v) = s.iter().find(|&&v| v >= k.vertices.len()) {
                return Err(MeshError::VertexOutOfRange(v));
            }
            k.check_nondegenerate(&s)?;
            for size in (1..=s.len()).rev() {
                for sub in subsets(s.len(), size) {
                    k.insert(sub.iter().map(|&i| s[i]).collect());
                }
            }
        }
        k.build_cofaces();
        Ok(k)
    }

    fn insert(&mut self, s: Vec<usize>) {
        let p = s.len() - 1;
        if !self.index[p].contains_key(&s) {
            self.index[p].insert(s.clone(), self.simplices[p].len());
            self.simplices[p].push(s);
        }
    }

    fn check_nondegenerate(&self, s: &[usize]) -> Result<(), MeshError> {
        if s.len() == 1 {
            return Ok(());
        }
        let pts: Vec<&[f64]> = s.iter().map(|&v| self.vertices[v].as_slice()).collect();
        let (vol, diam) = simplex_measure(&pts);
        let p = (s.len() - 1) as i32;
        if s.len() - 1 > self.ambient || !(vol > DEGENERACY_THRESHOLD * diam.powi(p)) {
            return Err(MeshError::Degenerate {
                simplex: s.to_vec(),
                volume: vol,
                diameter: diam,
            });
        }
        Ok(())
    }

    fn build_cofaces(&mut self) {
        let top = self.dim();
        self.cofaces = (0..=top)
            .map(|p| vec![Vec::new(); self.simplices[p].len()])
            .collect();
        for p in 1..=top {
            for (id, s) in self.simplices[p].iter().enumerate() {
                for skip in 0..s.len() {
                    let face: Vec<usize> = s
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, &v)| v)
                        .collect();
                    let fid = self.index[p - 1][&face];
                    self.cofaces[p - 1][fid].push(id);
                }
            }
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    /// Largest simplex dimension present.
    pub fn dim(&self) -> usize {
        self.simplices.len() - 1
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i]
    }

    pub fn num_simplices(&self, p: usize) -> usize {
        self.simplices.get(p).map(|v| v.len()).unwrap_or(0)
    }

    pub fn simplices(&self, p: usize) -> &[Vec<usize>] {
        self.simplices.get(p).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn simplex(&self, p: usize, id: usize) -> &[usize] {
        &self.simplices[p][id]
    }

    /// Id of the simplex with the given vertices (any order).
    pub fn find(&self, vertices: &[usize]) -> Option<usize> {
        let mut s = vertices.to_vec();
        s.sort_unstable();
        self.index.get(s.len().checked_sub(1)?)?.get(&s).copied()
    }

    pub fn cofaces(&self, p: usize, id: usize) -> &[usize] {
        &self.cofaces[p][id]
    }

    /// Facet ids of a p-simplex, with facet i omitting vertex i.
    pub fn facets(&self, p: usize, id: usize) -> Vec<usize> {
        let s = &self.simplices[p][id];
        (0..s.len())
            .map(|skip| {
                let face: Vec<usize> = s
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                self.index[p - 1][&face]
            })
            .collect()
    }

    pub fn points_of(&self, p: usize, id: usize) -> Vec<&[f64]> {
        self.simplices[p][id]
            .iter()
            .map(|&v| self.vertices[v].as_slice())
            .collect()
    }

    pub fn barycenter(&self, p: usize, id: usize) -> Vec<f64> {
        let pts = self.points_of(p, id);
        let mut c = vec![0.0; self.ambient];
        for q in &pts {
            for (a, b) in c.iter_mut().zip(q.iter()) {
                *a += b;
            }
        }
        c.iter_mut().for_each(|a| *a /= pts.len() as f64);
        c
    }

    pub fn volume(&self, p: usize, id: usize) -> f64 {
        simplex_measure(&self.points_of(p, id)).0
    }

    /// Simplices that are not a face of anything else.
    pub fn maximal_simplices(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for p in 0..=self.dim() {
            for id in 0..self.simplices[p].len() {
                if p == self.dim() || self.cofaces[p][id].is_empty() {
                    out.push((p, id));
                }
            }
        }
        out
    }

    /// Every simplex is a face of a top-dimensional one.
    pub fn is_pure(&self) -> bool {
        let p = self.dim();
        self.maximal_simplices().iter().all(|&(q, _)| q == p)
    }

    /// Orientation sign of a p-simplex in its sorted vertex order: the sign
    /// of the vertex-matrix determinant when p equals the ambient dimension,
    /// otherwise the sign of the first nonzero p×p minor of the edge matrix.
    pub fn geometric_sign(&self, p: usize, id: usize) -> i64 {
        if p == 0 {
            return 1;
        }
        let pts = self.points_of(p, id);
        let e = DMatrix::from_fn(self.ambient, p, |r, c| pts[c + 1][r] - pts[0][r]);
        let scale = e.amax().max(f64::MIN_POSITIVE);
        for rows in subsets(self.ambient, p) {
            let m = DMatrix::from_fn(p, p, |a, b| e[(rows[a], b)]);
            let d = m.determinant();
            if d.abs() > 1e-12 * scale.powi(p as i32) {
                return if d > 0.0 { 1 } else { -1 };
            }
        }
        1
    }
}
