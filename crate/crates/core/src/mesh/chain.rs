use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use super::complex::SimplicialComplex;
use super::MeshError;

/// Integer p-chain: simplex id (within dimension `dim`) to nonzero coefficient.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Chain {
    pub dim: usize,
    coeffs: BTreeMap<usize, i64>,
}

impl Chain {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, i64)>>(dim: usize, pairs: I) -> Self {
        let mut c = Self::zero(dim);
        for (id, k) in pairs {
            c.add_to(id, k);
        }
        c
    }

    /// All p-simplices of `k` with coefficient 1.
    pub fn all(k: &SimplicialComplex, dim: usize) -> Self {
        Self::from_pairs(dim, (0..k.num_simplices(dim)).map(|i| (i, 1)))
    }

    pub fn add_to(&mut self, id: usize, k: i64) {
        let e = self.coeffs.entry(id).or_insert(0);
        *e += k;
        if *e == 0 {
            self.coeffs.remove(&id);
        }
    }

    pub fn get(&self, id: usize) -> i64 {
        self.coeffs.get(&id).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// (id, coefficient) in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.coeffs.iter().map(|(&i, &k)| (i, k))
    }

    pub fn support(&self) -> Vec<usize> {
        self.coeffs.keys().copied().collect()
    }

    pub fn negated(&self) -> Self {
        Self {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|(&i, &k)| (i, -k)).collect(),
        }
    }

    pub fn add(&self, other: &Chain) -> Self {
        assert_eq!(self.dim, other.dim, "adding chains of different dimension");
        let mut out = self.clone();
        for (i, k) in other.iter() {
            out.add_to(i, k);
        }
        out
    }

    /// Checks that every id refers to a simplex of `k`.
    pub fn validate(&self, k: &SimplicialComplex) -> Result<(), MeshError> {
        let n = k.num_simplices(self.dim);
        match self.coeffs.keys().find(|&&i| i >= n) {
            Some(&bad) => Err(MeshError::UnknownSimplex {
                dim: self.dim,
                id: bad,
            }),
            None => Ok(()),
        }
    }
}

/// Simplicial boundary `∂[v0 … vp] = Σ (-1)^i [v0 … v̂i … vp]`.
/// The boundary of a 0-chain is the zero chain (of dimension 0).
pub fn boundary_chain(k: &SimplicialComplex, c: &Chain) -> Chain {
    if c.dim == 0 {
        return Chain::zero(0);
    }
    let mut out = Chain::zero(c.dim - 1);
    for (id, coeff) in c.iter() {
        for (i, face) in k.facets(c.dim, id).into_iter().enumerate() {
            let sign = if i % 2 == 0 { 1 } else { -1 };
            out.add_to(face, sign * coeff);
        }
    }
    out
}

/// Sign with which facet `face_pos` (the facet omitting vertex `face_pos`)
/// appears in the boundary of a simplex.
fn incidence(face_pos: usize) -> i64 {
    if face_pos % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Chooses ±1 coefficients on the p-simplices so that interior (p-1)-faces
/// cancel in the boundary.
///
/// Each connected component is oriented by breadth-first propagation from
/// its lowest-id simplex, which gets the sign of its vertex determinant.
pub fn orient_fundamental(k: &SimplicialComplex, p: usize) -> Result<Chain, MeshError> {
    let n = k.num_simplices(p);
    if p == 0 {
        return Ok(Chain::all(k, 0));
    }
    // facet id -> [(simplex, position)]
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k.num_simplices(p - 1)];
    for id in 0..n {
        for (pos, f) in k.facets(p, id).into_iter().enumerate() {
            incident[f].push((id, pos));
        }
    }
    if let Some((f, inc)) = incident.iter().enumerate().find(|(_, v)| v.len() > 2) {
        return Err(MeshError::NonManifold {
            face: k.simplex(p - 1, f).to_vec(),
            count: inc.len(),
        });
    }
    let mut sign: Vec<i64> = vec![0; n];
    for start in 0..n {
        if sign[start] != 0 {
            continue;
        }
        sign[start] = k.geometric_sign(p, start);
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            let mut neighbours: Vec<(usize, usize, usize)> = Vec::new();
            for (pos, f) in k.facets(p, s).into_iter().enumerate() {
                for &(t, tpos) in &incident[f] {
                    if t != s {
                        neighbours.push((t, pos, tpos));
                    }
                }
            }
            neighbours.sort_unstable();
            for (t, pos, tpos) in neighbours {
                // sign[s] * inc(pos) + sign[t] * inc(tpos) = 0
                let want = -sign[s] * incidence(pos) * incidence(tpos);
                if sign[t] == 0 {
                    sign[t] = want;
                    queue.push_back(t);
                } else if sign[t] != want {
                    return Err(MeshError::NonOrientable {
                        simplices: vec![s.min(t), s.max(t)],
                    });
                }
            }
        }
    }
    Ok(Chain::from_pairs(p, sign.into_iter().enumerate()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> SimplicialComplex {
        SimplicialComplex::new(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
            &[vec![0, 1, 2], vec![0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn boundary_of_triangle() {
        let k = SimplicialComplex::new(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            &[vec![0, 1, 2]],
        )
        .unwrap();
        let b = boundary_chain(&k, &Chain::all(&k, 2));
        let e = |a, c| k.find(&[a, c]).unwrap();
        assert_eq!(b.get(e(1, 2)), 1);
        assert_eq!(b.get(e(0, 2)), -1);
        assert_eq!(b.get(e(0, 1)), 1);
        assert!(boundary_chain(&k, &b).is_zero());
    }

    #[test]
    fn shared_edge_cancels() {
        let k = two_triangles();
        let mu = orient_fundamental(&k, 2).unwrap();
        let b = boundary_chain(&k, &mu);
        let diag = k.find(&[0, 2]).unwrap();
        assert_eq!(b.get(diag), 0);
        assert_eq!(b.len(), 4);
        // counter-clockwise: both triangles positively oriented
        assert_eq!(mu.get(0), 1);
        assert_eq!(mu.get(1), 1);
    }

    #[test]
    fn non_manifold_face() {
        let k = SimplicialComplex::new(
            3,
            vec![
                vec![0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, -1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            &[vec![0, 1, 2], vec![0, 1, 3], vec![0, 1, 4]],
        )
        .unwrap();
        assert!(matches!(
            orient_fundamental(&k, 2),
            Err(MeshError::NonManifold { count: 3, .. })
        ));
    }
}
