use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::chart::interior_samples;
use super::{affine_charts, is_degenerate, max_diameter, TriangulateError, TriangulationBundle, TriangulationReport};
use crate::mesh::SimplicialComplex;

/// Vertices closer than this are merged.
pub const MERGE_TOL: f64 = 1e-8;
/// Size of the deterministic perturbation applied once when slivers appear.
pub const JITTER: f64 = 1e-7;

/// A triangulation whose every simplex lies inside one simplex of each
/// input: the cells of the overlay of both meshes, each triangulated.
///
/// Supported for meshes of dimension 1 and 2 with affine charts. When the
/// overlay produces slivers, the second mesh is perturbed once by a seeded
/// jitter of size [`JITTER`]; slivers that survive are dropped and counted.
pub fn common_refinement(
    b1: &TriangulationBundle,
    b2: &TriangulationBundle,
    seed: u64,
) -> Result<TriangulationBundle, TriangulateError> {
    if b1.set != b2.set {
        return Err(TriangulateError::Incompatible(
            "bundles triangulate different sets".into(),
        ));
    }
    let p = b1.dim();
    if b2.dim() != p || b1.complex.ambient_dim() != p {
        return Err(TriangulateError::Incompatible(
            "common refinement needs two full-dimensional meshes of equal dimension".into(),
        ));
    }
    if b1.charts.iter().chain(&b2.charts).any(|c| !c.affine) {
        return Err(TriangulateError::Incompatible(
            "common refinement of curved charts is not supported".into(),
        ));
    }
    let t1: Vec<Vec<Vec<f64>>> = b1.charts.iter().map(|c| c.images.clone()).collect();
    let mut t2: Vec<Vec<Vec<f64>>> = b2.charts.iter().map(|c| c.images.clone()).collect();
    let mut report = TriangulationReport {
        depth: b1.report.depth.max(b2.report.depth),
        ..Default::default()
    };
    let mut overlay = match p {
        1 => overlay_1d(&t1, &t2),
        2 => overlay_2d(&t1, &t2),
        _ => {
            return Err(TriangulateError::Incompatible(format!(
                "common refinement is implemented for dimension 1 and 2, got {p}"
            )))
        }
    };
    if overlay.slivers > 0 {
        report.jittered = true;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // jitter each vertex of the second mesh consistently across simplices
        let mut moved: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
        for simplex in t2.iter_mut() {
            for v in simplex.iter_mut() {
                let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
                let new = moved
                    .entry(key)
                    .or_insert_with(|| v.iter().map(|x| x + rng.gen_range(-JITTER..=JITTER)).collect());
                *v = new.clone();
            }
        }
        overlay = match p {
            1 => overlay_1d(&t1, &t2),
            _ => overlay_2d(&t1, &t2),
        };
    }
    report.slivers = overlay.slivers;
    if overlay.simplices.is_empty() {
        return Err(TriangulateError::Empty);
    }
    let complex = SimplicialComplex::new(p, overlay.vertices, &overlay.simplices)?;
    let charts = affine_charts(&complex, &b1.set, &b1.family);
    report.max_diameter = max_diameter(&complex);
    Ok(TriangulationBundle {
        complex,
        charts,
        set: b1.set.clone(),
        family: b1.family.clone(),
        report,
        parents: overlay.parents,
    })
}

struct Overlay {
    vertices: Vec<Vec<f64>>,
    simplices: Vec<Vec<usize>>,
    parents: Vec<(usize, usize)>,
    slivers: usize,
}

/// Merges points within [`MERGE_TOL`] using a hash grid.
struct VertexStore {
    pts: Vec<Vec<f64>>,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
    cell: f64,
}

impl VertexStore {
    fn new() -> Self {
        Self {
            pts: Vec::new(),
            buckets: HashMap::new(),
            cell: 1e3 * MERGE_TOL,
        }
    }

    fn key(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|v| (v / self.cell).floor() as i64).collect()
    }

    fn insert(&mut self, x: &[f64]) -> usize {
        let key = self.key(x);
        let mut probe = vec![0i64; key.len()];
        let n = 3usize.pow(key.len() as u32);
        for flat in 0..n {
            let mut r = flat;
            for (k, slot) in probe.iter_mut().enumerate() {
                *slot = key[k] + (r % 3) as i64 - 1;
                r /= 3;
            }
            if let Some(ids) = self.buckets.get(&probe) {
                for &id in ids {
                    let d: f64 = self.pts[id].iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    if d <= MERGE_TOL {
                        return id;
                    }
                }
            }
        }
        self.pts.push(x.to_vec());
        self.buckets.entry(key).or_default().push(self.pts.len() - 1);
        self.pts.len() - 1
    }
}

fn overlay_1d(t1: &[Vec<Vec<f64>>], t2: &[Vec<Vec<f64>>]) -> Overlay {
    let seg = |s: &Vec<Vec<f64>>| (s[0][0].min(s[1][0]), s[0][0].max(s[1][0]));
    let s1: Vec<(f64, f64)> = t1.iter().map(seg).collect();
    let s2: Vec<(f64, f64)> = t2.iter().map(seg).collect();
    let mut breaks: Vec<f64> = s1.iter().chain(&s2).flat_map(|&(a, b)| [a, b]).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= MERGE_TOL);
    let find = |segs: &[(f64, f64)], x: f64| segs.iter().position(|&(a, b)| a <= x && x <= b);
    let mut store = VertexStore::new();
    let mut out = Overlay {
        vertices: Vec::new(),
        simplices: Vec::new(),
        parents: Vec::new(),
        slivers: 0,
    };
    for w in breaks.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if let (Some(i1), Some(i2)) = (find(&s1, mid), find(&s2, mid)) {
            let a = store.insert(&[w[0]]);
            let b = store.insert(&[w[1]]);
            out.simplices.push(vec![a, b]);
            out.parents.push((i1, i2));
        }
    }
    out.vertices = store.pts;
    out
}

fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn ccw(t: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut t = t.to_vec();
    if cross(&t[0], &t[1], &t[2]) < 0.0 {
        t.swap(1, 2);
    }
    t
}

fn polygon_area(poly: &[Vec<f64>]) -> f64 {
    let n = poly.len();
    let mut a = 0.0;
    for i in 0..n {
        let (p, q) = (&poly[i], &poly[(i + 1) % n]);
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// Sutherland-Hodgman clipping of a convex polygon by a CCW triangle.
fn clip(subject: &[Vec<f64>], tri: &[Vec<f64>], eps: f64) -> Vec<Vec<f64>> {
    let mut poly = subject.to_vec();
    for i in 0..3 {
        if poly.is_empty() {
            break;
        }
        let (e0, e1) = (&tri[i], &tri[(i + 1) % 3]);
        let len = ((e1[0] - e0[0]).powi(2) + (e1[1] - e0[1]).powi(2)).sqrt();
        let side = |p: &[f64]| cross(e0, e1, p) / len;
        let input = std::mem::take(&mut poly);
        for j in 0..input.len() {
            let cur = &input[j];
            let prev = &input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(cur), side(prev));
            let (cin, pin) = (sc >= -eps, sp >= -eps);
            if cin {
                if !pin && sp < -eps && sc > eps {
                    poly.push(lerp(prev, cur, sp / (sp - sc)));
                }
                poly.push(cur.clone());
            } else if pin && sp > eps {
                poly.push(lerp(prev, cur, sp / (sp - sc)));
            }
        }
    }
    poly
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

fn overlay_2d(t1: &[Vec<Vec<f64>>], t2: &[Vec<Vec<f64>>]) -> Overlay {
    let t1: Vec<Vec<Vec<f64>>> = t1.iter().map(|t| ccw(t)).collect();
    let t2: Vec<Vec<Vec<f64>>> = t2.iter().map(|t| ccw(t)).collect();
    let bbox = |t: &Vec<Vec<f64>>| {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in t {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    };
    // bucket the second mesh by bounding box
    let mean_size = t2
        .iter()
        .map(|t| {
            let (lo, hi) = bbox(t);
            (hi[0] - lo[0]).max(hi[1] - lo[1])
        })
        .sum::<f64>()
        / t2.len().max(1) as f64;
    let cell = mean_size.max(1e-12);
    let key = |x: f64| (x / cell).floor() as i64;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, t) in t2.iter().enumerate() {
        let (lo, hi) = bbox(t);
        for gx in key(lo[0])..=key(hi[0]) {
            for gy in key(lo[1])..=key(hi[1]) {
                grid.entry((gx, gy)).or_default().push(i);
            }
        }
    }

    let mut store = VertexStore::new();
    let mut polys: Vec<(Vec<usize>, (usize, usize))> = Vec::new();
    for (i1, a) in t1.iter().enumerate() {
        let (lo, hi) = bbox(a);
        let mut cands: Vec<usize> = Vec::new();
        for gx in key(lo[0])..=key(hi[0]) {
            for gy in key(lo[1])..=key(hi[1]) {
                if let Some(v) = grid.get(&(gx, gy)) {
                    cands.extend(v);
                }
            }
        }
        cands.sort_unstable();
        cands.dedup();
        let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        for i2 in cands {
            let poly = clip(a, &t2[i2], 1e-12 * scale);
            if poly.len() < 3 || polygon_area(&poly) <= 1e-14 * scale * scale {
                continue;
            }
            let mut ids: Vec<usize> = poly.iter().map(|v| store.insert(v)).collect();
            ids.dedup();
            while ids.len() > 1 && ids.first() == ids.last() {
                ids.pop();
            }
            if ids.len() >= 3 {
                polys.push((ids, (i1, i2)));
            }
        }
    }

    // insert vertices that lie on polygon edges so neighbouring cells conform
    let edge_cell = cell;
    let ekey = |x: f64| (x / edge_cell).floor() as i64;
    let mut vgrid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (id, v) in store.pts.iter().enumerate() {
        vgrid.entry((ekey(v[0]), ekey(v[1]))).or_default().push(id);
    }
    let mut out = Overlay {
        vertices: Vec::new(),
        simplices: Vec::new(),
        parents: Vec::new(),
        slivers: 0,
    };
    for (ids, parents) in polys {
        let mut ring: Vec<usize> = Vec::new();
        for j in 0..ids.len() {
            let (a, b) = (ids[j], ids[(j + 1) % ids.len()]);
            ring.push(a);
            let (pa, pb) = (store.pts[a].clone(), store.pts[b].clone());
            let len2 = (pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2);
            let mut on_edge: Vec<(f64, usize)> = Vec::new();
            for gx in ekey(pa[0].min(pb[0]))..=ekey(pa[0].max(pb[0])) {
                for gy in ekey(pa[1].min(pb[1]))..=ekey(pa[1].max(pb[1])) {
                    for &c in vgrid.get(&(gx, gy)).map(|v| v.as_slice()).unwrap_or(&[]) {
                        if c == a || c == b {
                            continue;
                        }
                        let q = &store.pts[c];
                        let t = ((q[0] - pa[0]) * (pb[0] - pa[0]) + (q[1] - pa[1]) * (pb[1] - pa[1])) / len2;
                        if t <= 0.0 || t >= 1.0 {
                            continue;
                        }
                        let d = cross(&pa, &pb, q).abs() / len2.sqrt();
                        if d <= MERGE_TOL {
                            on_edge.push((t, c));
                        }
                    }
                }
            }
            on_edge.sort_by(|x, y| x.0.total_cmp(&y.0));
            on_edge.dedup_by_key(|x| x.1);
            ring.extend(on_edge.into_iter().map(|(_, c)| c));
        }
        let tris: Vec<Vec<usize>> = if ring.len() == 3 {
            vec![ring]
        } else {
            let n = ring.len() as f64;
            let c: Vec<f64> = (0..2)
                .map(|k| ring.iter().map(|&v| store.pts[v][k]).sum::<f64>() / n)
                .collect();
            let cid = store.insert(&c);
            (0..ring.len())
                .map(|j| vec![cid, ring[j], ring[(j + 1) % ring.len()]])
                .collect()
        };
        for t in tris {
            let pts: Vec<&[f64]> = t.iter().map(|&v| store.pts[v].as_slice()).collect();
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] || is_degenerate(&pts) {
                out.slivers += 1;
                continue;
            }
            out.simplices.push(t);
            out.parents.push(parents);
        }
    }
    out.vertices = store.pts;
    out
}

/// Barycentric coordinates of `x` in the full-dimensional simplex `verts`.
pub(crate) fn barycentric(verts: &[Vec<f64>], x: &[f64]) -> Option<Vec<f64>> {
    let p = verts.len() - 1;
    let e = DMatrix::from_fn(p, p, |r, c| verts[c + 1][r] - verts[0][r]);
    let rhs = DVector::from_iterator(p, (0..p).map(|r| x[r] - verts[0][r]));
    let lam = e.lu().solve(&rhs)?;
    let mut out = vec![1.0 - lam.sum()];
    out.extend(lam.iter());
    Some(out)
}

/// Largest barycentric violation of sampled points of each overlay simplex
/// with respect to its recorded parents (0 when every sample lies inside
/// both parents).
pub fn verify_refinement(
    r: &TriangulationBundle,
    b1: &TriangulationBundle,
    b2: &TriangulationBundle,
) -> f64 {
    let p = r.dim();
    let mut samples = interior_samples(p, 3);
    for k in 0..=p {
        let mut w = vec![0.0; p + 1];
        w[k] = 1.0;
        samples.push(w);
    }
    let mut worst: f64 = 0.0;
    for (c, &(i1, i2)) in r.charts.iter().zip(&r.parents) {
        for w in &samples {
            let x = c.at_barycentric(w);
            for parent in [&b1.charts[i1].images, &b2.charts[i2].images] {
                match barycentric(parent, &x) {
                    Some(l) => {
                        let min = l.iter().cloned().fold(f64::INFINITY, f64::min);
                        worst = worst.max(-min);
                    }
                    None => return f64::INFINITY,
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Polynomial;
    use crate::mesh::SimplicialComplex;
    use crate::saset::{BoundingBox, Formula, Relation, SaSet};
    use crate::triangulate::{triangulate, triangulate_with, TriangulateOptions};

    fn square() -> SaSet {
        SaSet::new(
            2,
            Formula::And(vec![
                Formula::leaf(Polynomial::parse("x", 2).unwrap(), Relation::Ge).unwrap(),
                Formula::leaf(Polynomial::parse("1 - x", 2).unwrap(), Relation::Ge).unwrap(),
                Formula::leaf(Polynomial::parse("y", 2).unwrap(), Relation::Ge).unwrap(),
                Formula::leaf(Polynomial::parse("1 - y", 2).unwrap(), Relation::Ge).unwrap(),
            ]),
        )
        .unwrap()
        .with_box(BoundingBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap())
        .unwrap()
    }

    fn bundle_from(set: &SaSet, verts: Vec<Vec<f64>>, tris: &[Vec<usize>]) -> TriangulationBundle {
        let complex = SimplicialComplex::new(2, verts, tris).unwrap();
        let charts = affine_charts(&complex, set, &[]);
        TriangulationBundle {
            complex,
            charts,
            set: set.clone(),
            family: Vec::new(),
            report: TriangulationReport::default(),
            parents: Vec::new(),
        }
    }

    #[test]
    fn two_versus_crossed_square() {
        let s = square();
        let corners = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let b1 = bundle_from(&s, corners.clone(), &[vec![0, 1, 2], vec![0, 2, 3]]);
        let mut v2 = corners;
        v2.push(vec![0.5, 0.5]);
        let b2 = bundle_from(
            &s,
            v2,
            &[vec![0, 1, 4], vec![1, 2, 4], vec![2, 3, 4], vec![3, 0, 4]],
        );
        let r = common_refinement(&b1, &b2, 0).unwrap();
        // the overlay cells are exactly the four triangles of the crossed mesh
        assert_eq!(r.num_top(), 4);
        assert!((r.mesh_volume() - 1.0).abs() < 1e-14);
        assert!(verify_refinement(&r, &b1, &b2) < 1e-9);
    }

    #[test]
    fn self_refinement_keeps_region() {
        let disk = SaSet::new(
            2,
            Formula::leaf(Polynomial::parse("x^2 + y^2 - 1", 2).unwrap(), Relation::Le).unwrap(),
        )
        .unwrap()
        .with_box(BoundingBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap())
        .unwrap();
        let b = triangulate(&disk, 3).unwrap();
        let r = common_refinement(&b, &b, 0).unwrap();
        assert!(r.num_top() >= b.num_top());
        assert!((r.mesh_volume() - b.mesh_volume()).abs() < 1e-12);
        assert!(verify_refinement(&r, &b, &b) < 1e-9);
    }

    #[test]
    fn shifted_meshes_overlay_conforms() {
        let disk = SaSet::new(
            2,
            Formula::leaf(Polynomial::parse("x^2 + y^2 - 1", 2).unwrap(), Relation::Le).unwrap(),
        )
        .unwrap()
        .with_box(BoundingBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap())
        .unwrap();
        let b1 = triangulate(&disk, 3).unwrap();
        let b2 = triangulate_with(
            &disk,
            &TriangulateOptions {
                depth: 3,
                shift: vec![0.37, 0.21],
                ..Default::default()
            },
        )
        .unwrap();
        let r = common_refinement(&b1, &b2, 0).unwrap();
        assert!(verify_refinement(&r, &b1, &b2) < 1e-9);
        assert!(r.mesh_volume() <= b1.mesh_volume().min(b2.mesh_volume()) + 1e-9);
        for f in 0..r.complex.num_simplices(1) {
            assert!(r.complex.cofaces(1, f).len() <= 2);
        }
    }
}
