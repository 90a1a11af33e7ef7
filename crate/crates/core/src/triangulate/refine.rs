use std::collections::{BTreeMap, BTreeSet};

use super::chart::dist;
use super::snap::{project_corner, BoundaryFn};
use super::{affine_charts, is_degenerate, max_diameter, signed_volume, TriangulateError, TriangulationBundle};
use crate::mesh::SimplicialComplex;

/// Uniform edge-midpoint subdivision: a segment into 2, a triangle into 4,
/// a tetrahedron into 8. Midpoints of edges lying on a tagged boundary
/// facet are projected back onto that boundary.
pub fn refine(b: &TriangulationBundle) -> Result<TriangulationBundle, TriangulateError> {
    let k = &b.complex;
    let p = k.dim();
    if p != k.ambient_dim() || !(1..=3).contains(&p) {
        return Err(TriangulateError::Incompatible(format!(
            "refinement needs a full-dimensional mesh of dimension 1 to 3, got {p} in R^{}",
            k.ambient_dim()
        )));
    }
    if b.charts.iter().any(|c| !c.affine) {
        return Err(TriangulateError::Incompatible(
            "refinement of curved charts is not supported".into(),
        ));
    }
    let polys: Vec<BoundaryFn> = b.boundary_polys().into_iter().map(BoundaryFn::new).collect();

    // boundary tags per edge: tags shared by a facet containing both endpoints
    let mut edge_tags: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for c in &b.charts {
        let s = k.simplex(p, c.simplex);
        for (skip, tags) in c.facet_tags.iter().enumerate() {
            if tags.is_empty() {
                continue;
            }
            let face: Vec<usize> = s.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
            for i in 0..face.len() {
                for j in i + 1..face.len() {
                    edge_tags
                        .entry((face[i], face[j]))
                        .or_default()
                        .extend(tags.iter().copied());
                }
            }
        }
    }

    let mut positions: Vec<Vec<f64>> = k.vertices().to_vec();
    let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut children: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut straight: Vec<Vec<f64>> = positions.clone();
    for id in 0..k.num_simplices(p) {
        let s = k.simplex(p, id).to_vec();
        let mut mid = |a: usize, b: usize| -> usize {
            let key = (s[a].min(s[b]), s[a].max(s[b]));
            *midpoint.entry(key).or_insert_with(|| {
                let x: Vec<f64> = positions[key.0]
                    .iter()
                    .zip(&positions[key.1])
                    .map(|(u, v)| 0.5 * (u + v))
                    .collect();
                straight.push(x.clone());
                positions.push(x);
                positions.len() - 1
            })
        };
        let v = &s;
        let kids: Vec<Vec<usize>> = match p {
            1 => {
                let m01 = mid(0, 1);
                vec![vec![v[0], m01], vec![m01, v[1]]]
            }
            2 => {
                let (m01, m02, m12) = (mid(0, 1), mid(0, 2), mid(1, 2));
                vec![
                    vec![v[0], m01, m02],
                    vec![m01, v[1], m12],
                    vec![m02, m12, v[2]],
                    vec![m01, m12, m02],
                ]
            }
            _ => {
                let (m01, m02, m03) = (mid(0, 1), mid(0, 2), mid(0, 3));
                let (m12, m13, m23) = (mid(1, 2), mid(1, 3), mid(2, 3));
                let mut kids = vec![
                    vec![v[0], m01, m02, m03],
                    vec![m01, v[1], m12, m13],
                    vec![m02, m12, v[2], m23],
                    vec![m03, m13, m23, v[3]],
                ];
                // split the inner octahedron along its shortest diagonal
                let diagonals = [(m01, m23, m02, m03), (m02, m13, m01, m03), (m03, m12, m01, m02)];
                let (a, c, e, f) = *diagonals
                    .iter()
                    .min_by(|x, y| {
                        dist(&straight[x.0], &straight[x.1]).total_cmp(&dist(&straight[y.0], &straight[y.1]))
                    })
                    .expect("three diagonals");
                let opposite = |u: usize| -> usize {
                    [(m01, m23), (m02, m13), (m03, m12)]
                        .iter()
                        .find_map(|&(x, y)| {
                            if x == u {
                                Some(y)
                            } else if y == u {
                                Some(x)
                            } else {
                                None
                            }
                        })
                        .expect("octahedron vertex")
                };
                let ring = [e, f, opposite(e), opposite(f)];
                for i in 0..4 {
                    kids.push(vec![a, c, ring[i], ring[(i + 1) % 4]]);
                }
                kids
            }
        };
        // orient every child like its parent in the unsnapped geometry
        let parent_pts: Vec<&[f64]> = s.iter().map(|&u| straight[u].as_slice()).collect();
        let parent_sign = signed_volume(&parent_pts).signum();
        for mut kid in kids {
            let pts: Vec<&[f64]> = kid.iter().map(|&u| straight[u].as_slice()).collect();
            if signed_volume(&pts).signum() != parent_sign {
                kid.swap(0, 1);
            }
            children.push((id, kid));
        }
    }

    let h = max_diameter(k);
    let mut snapped = 0;
    for (&(a, c), &mv) in &midpoint {
        let Some(tags) = edge_tags.get(&(a, c)) else { continue };
        let fs: Vec<&BoundaryFn> = tags.iter().map(|&t| &polys[t]).collect();
        let x = positions[mv].clone();
        let res = if fs.len() == 1 {
            fs[0].project(&x, h)
        } else {
            project_corner(&fs, &x, h)
        };
        if let Some((y, _)) = res.filter(|r| dist(&r.0, &x) <= h) {
            positions[mv] = y;
            snapped += 1;
        }
    }

    let mut kept = Vec::with_capacity(children.len());
    for (parent, kid) in &children {
        let before: Vec<&[f64]> = kid.iter().map(|&u| straight[u].as_slice()).collect();
        let after: Vec<&[f64]> = kid.iter().map(|&u| positions[u].as_slice()).collect();
        if is_degenerate(&after) || signed_volume(&before).signum() != signed_volume(&after).signum() {
            return Err(TriangulateError::DegenerateChild { parent: *parent });
        }
        kept.push(kid.clone());
    }
    let complex = SimplicialComplex::new(k.ambient_dim(), positions, &kept)?;
    let charts = affine_charts(&complex, &b.set, &b.family);
    let mut report = b.report.clone();
    report.refinements += 1;
    report.snapped_vertices += snapped;
    report.max_diameter = max_diameter(&complex);
    Ok(TriangulationBundle {
        complex,
        charts,
        set: b.set.clone(),
        family: b.family.clone(),
        report,
        parents: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Polynomial;
    use crate::saset::{BoundingBox, Formula, Relation, SaSet};
    use crate::triangulate::triangulate;

    fn disk() -> SaSet {
        SaSet::new(
            2,
            Formula::leaf(Polynomial::parse("x^2 + y^2 - 1", 2).unwrap(), Relation::Le).unwrap(),
        )
        .unwrap()
        .with_box(BoundingBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap())
        .unwrap()
    }

    #[test]
    fn triangle_splits_into_four() {
        let s = SaSet::new(
            2,
            Formula::And(vec![
                Formula::leaf(Polynomial::parse("x", 2).unwrap(), Relation::Ge).unwrap(),
                Formula::leaf(Polynomial::parse("y", 2).unwrap(), Relation::Ge).unwrap(),
                Formula::leaf(Polynomial::parse("1 - x - y", 2).unwrap(), Relation::Ge).unwrap(),
            ]),
        )
        .unwrap()
        .with_box(BoundingBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap())
        .unwrap();
        let b = triangulate(&s, 0).unwrap();
        let r1 = refine(&b).unwrap();
        assert_eq!(r1.num_top(), 4);
        let r2 = refine(&r1).unwrap();
        assert_eq!(r2.num_top(), 16);
        assert!((r2.mesh_volume() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn disk_refinement_improves_area() {
        let b = triangulate(&disk(), 3).unwrap();
        let r = refine(&b).unwrap();
        let pi = std::f64::consts::PI;
        assert!((r.mesh_volume() - pi).abs() < (b.mesh_volume() - pi).abs());
        assert_eq!(r.num_top(), 4 * b.num_top());
        assert!(r.shared_face_mismatch() < 1e-8);
    }

    #[test]
    fn tetrahedra_split_into_eight() {
        let s = SaSet::new(
            3,
            Formula::leaf(Polynomial::parse("x^2 + y^2 + z^2 - 1", 3).unwrap(), Relation::Le).unwrap(),
        )
        .unwrap()
        .with_box(BoundingBox::new(vec![-1.0; 3], vec![1.0; 3]).unwrap())
        .unwrap();
        let b = triangulate(&s, 1).unwrap();
        let r = refine(&b).unwrap();
        assert_eq!(r.num_top(), 8 * b.num_top());
        for f in 0..r.complex.num_simplices(2) {
            assert!(r.complex.cofaces(2, f).len() <= 2);
        }
    }
}
