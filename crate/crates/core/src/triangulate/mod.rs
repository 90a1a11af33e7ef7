//! Grid-and-snap triangulation of compact semialgebraic sets, uniform
//! refinement, and common refinement of two triangulations.
//!
//! The bounding box is cut into `2^depth` cells per axis, each cell into
//! `m!` Kuhn simplices (reflected cell by cell so the grid is conforming).
//! Simplices whose box is certainly inside are kept; simplices straddling
//! the boundary get their outside vertices projected onto the zero set of
//! the boundary polynomial that changes sign across them, and are kept when
//! their barycenter is a member afterwards.

mod chart;
mod overlay;
mod refine;
pub mod snap;

use std::collections::{BTreeMap, BTreeSet};
use std::cmp::Ordering;

use rayon::prelude::*;
use thiserror::Error;

pub use chart::{DropReason, DroppedSimplex, RealizationChart, TriangulationBundle, TriangulationReport};
pub use overlay::{common_refinement, verify_refinement};
pub use refine::refine;

use crate::algebra::{AlgebraError, Interval};
use crate::mesh::{simplex_measure, MeshError, SimplicialComplex, DEGENERACY_THRESHOLD};
use crate::saset::{BoxClass, SaSet, SetError};
use chart::{boundary_polys, dist};
use snap::{project_corner, BoundaryFn, SNAP_TOL};

#[derive(Debug, Error)]
pub enum TriangulateError {
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("triangulation supports ambient dimension 1 to 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("boundary snapping did not converge on grid simplices {simplices:?}")]
    SnapFailed { simplices: Vec<usize> },
    #[error("no simplex of the grid lies in the set")]
    Empty,
    #[error("refinement produced a degenerate or inverted child of simplex {parent}")]
    DegenerateChild { parent: usize },
    #[error("{0}")]
    Incompatible(String),
}

/// Options beyond the refinement depth.
#[derive(Clone, Debug, Default)]
pub struct TriangulateOptions {
    pub depth: u32,
    /// Grid offset per axis as a fraction of the cell width (empty: none).
    pub shift: Vec<f64>,
    /// Sets whose boundaries the triangulation should also follow.
    pub family: Vec<SaSet>,
}

pub fn triangulate(set: &SaSet, depth: u32) -> Result<TriangulationBundle, TriangulateError> {
    triangulate_with(
        set,
        &TriangulateOptions {
            depth,
            ..Default::default()
        },
    )
}

struct Grid {
    m: usize,
    /// nodes per axis
    counts: Vec<usize>,
    coords: Vec<Vec<f64>>,
    h: f64,
}

impl Grid {
    fn node_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for k in (0..self.m).rev() {
            flat = flat * self.counts[k] + idx[k];
        }
        flat
    }

    fn node(&self, flat: usize) -> Vec<f64> {
        let mut r = flat;
        (0..self.m)
            .map(|k| {
                let i = r % self.counts[k];
                r /= self.counts[k];
                self.coords[k][i]
            })
            .collect()
    }

    fn num_nodes(&self) -> usize {
        self.counts.iter().product()
    }

    /// Kuhn simplices of all cells, as node-index lists in an order whose
    /// orientation is recorded alongside.
    fn simplices(&self) -> Vec<Vec<usize>> {
        let m = self.m;
        let cells: Vec<usize> = self.counts.iter().map(|c| c - 1).collect();
        let total: usize = cells.iter().product();
        let perms = permutations(m);
        let mut out = Vec::with_capacity(total * perms.len());
        let mut c = vec![0usize; m];
        for flat in 0..total {
            let mut r = flat;
            for k in 0..m {
                c[k] = r % cells[k];
                r /= cells[k];
            }
            // reflect axis k when its parity says so; axis 0 is offset by one
            // so that the lowest cell's diagonal runs from (hi, lo) to (lo, hi)
            let flip: Vec<bool> = (0..m)
                .map(|k| (c[k] + usize::from(k == 0)) % 2 == 1)
                .collect();
            for perm in &perms {
                let mut local = vec![0usize; m];
                let mut s = Vec::with_capacity(m + 1);
                let to_node = |local: &[usize]| {
                    let idx: Vec<usize> = (0..m)
                        .map(|k| c[k] + (local[k] ^ usize::from(flip[k])))
                        .collect();
                    self.node_index(&idx)
                };
                s.push(to_node(&local));
                for &axis in perm {
                    local[axis] = 1;
                    s.push(to_node(&local));
                }
                out.push(s);
            }
        }
        out
    }
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(m - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, m - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

/// Signed volume (times p!) of a full-dimensional simplex in the given vertex order.
pub(crate) fn signed_volume(pts: &[&[f64]]) -> f64 {
    let m = pts.len() - 1;
    let e = nalgebra::DMatrix::from_fn(m, m, |r, c| pts[c + 1][r] - pts[0][r]);
    e.determinant()
}

pub(crate) fn is_degenerate(pts: &[&[f64]]) -> bool {
    let (vol, diam) = simplex_measure(pts);
    !(vol > DEGENERACY_THRESHOLD * diam.powi(pts.len() as i32 - 1))
}

pub fn triangulate_with(
    set: &SaSet,
    opts: &TriangulateOptions,
) -> Result<TriangulationBundle, TriangulateError> {
    let m = set.dim();
    if !(1..=3).contains(&m) {
        return Err(TriangulateError::UnsupportedDimension(m));
    }
    let bbox = set.require_box()?.clone();
    for f in &opts.family {
        if f.dim() != m {
            return Err(SetError::DimensionMismatch {
                expected: m,
                found: f.dim(),
            }
            .into());
        }
    }
    let n = 1usize << opts.depth;
    let mut coords = Vec::with_capacity(m);
    let mut counts = Vec::with_capacity(m);
    let mut h: f64 = 0.0;
    for k in 0..m {
        let (lo, hi) = (bbox.lo[k], bbox.hi[k]);
        let s = opts.shift.get(k).copied().unwrap_or(0.0);
        let cells = if s == 0.0 { n } else { n + 1 };
        let axis: Vec<f64> = (0..=cells)
            .map(|i| lo + (hi - lo) * ((i as f64 - s) / n as f64))
            .collect();
        h = h.max((hi - lo) / n as f64);
        counts.push(axis.len());
        coords.push(axis);
    }
    let grid = Grid { m, counts, coords, h };

    let nodes: Vec<Vec<f64>> = (0..grid.num_nodes()).map(|i| grid.node(i)).collect();
    let member: Vec<bool> = nodes
        .par_iter()
        .map(|x| set.contains(x))
        .collect::<Result<_, _>>()?;
    let grid_simplices = grid.simplices();

    let classes: Vec<BoxClass> = grid_simplices
        .par_iter()
        .map(|s| {
            let b: Vec<Interval> = (0..m)
                .map(|k| {
                    let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                        (a.min(nodes[v][k]), b.max(nodes[v][k]))
                    });
                    Interval::new(lo, hi)
                })
                .collect();
            set.classify_box(&b)
        })
        .collect::<Result<_, _>>()?;

    let leaves: Vec<BoundaryFn> = set
        .leaves()
        .iter()
        .map(|c| BoundaryFn::new(c.poly.clone()))
        .collect();
    let leaf_sign = |i: usize, x: &[f64]| -> Ordering { leaves[i].poly.sign_at(x).unwrap_or(Ordering::Equal) };

    let mut report = TriangulationReport {
        depth: opts.depth,
        grid_simplices: grid_simplices.len(),
        ..Default::default()
    };

    // Active leaves of each outside vertex: those whose sign differs from
    // a member vertex of a straddling simplex.
    let mut active: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut users: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut candidates: Vec<usize> = Vec::new();
    for (sid, s) in grid_simplices.iter().enumerate() {
        if classes[sid] != BoxClass::Mixed {
            continue;
        }
        let inside: Vec<usize> = s.iter().copied().filter(|&v| member[v]).collect();
        if inside.is_empty() {
            report.dropped.push(DroppedSimplex {
                source: sid,
                reason: DropReason::NoMemberVertex,
            });
            continue;
        }
        candidates.push(sid);
        for &v in s.iter().filter(|&&v| !member[v]) {
            users.entry(v).or_default().push(sid);
            let entry = active.entry(v).or_default();
            for i in 0..leaves.len() {
                let sv = leaf_sign(i, &nodes[v]);
                if sv == Ordering::Equal {
                    continue;
                }
                if inside.iter().any(|&w| leaf_sign(i, &nodes[w]) != sv) {
                    entry.insert(i);
                }
            }
        }
    }

    let guard = 2.0 * (m as f64).sqrt() * grid.h;
    let snapped: Vec<(usize, Option<(Vec<f64>, usize)>)> = active
        .par_iter()
        .map(|(&v, leaf_ids)| (v, snap_vertex(&nodes[v], leaf_ids, &leaves, grid.h, guard)))
        .collect();
    let mut positions = nodes.clone();
    let mut failed: BTreeSet<usize> = BTreeSet::new();
    for (v, res) in snapped {
        match res {
            Some((x, iters)) => {
                positions[v] = x;
                report.snapped_vertices += 1;
                report.snap_iterations_total += iters;
                report.snap_iterations_max = report.snap_iterations_max.max(iters);
            }
            None => failed.extend(users[&v].iter().copied()),
        }
    }
    if !failed.is_empty() {
        return Err(TriangulateError::SnapFailed {
            simplices: failed.into_iter().collect(),
        });
    }

    let mut kept: Vec<Vec<usize>> = Vec::new();
    let candidate_set: BTreeSet<usize> = candidates.iter().copied().collect();
    for (sid, s) in grid_simplices.iter().enumerate() {
        match classes[sid] {
            BoxClass::AllIn => {
                kept.push(s.clone());
                report.kept_all_in += 1;
            }
            BoxClass::AllOut => {}
            BoxClass::Mixed => {
                if !candidate_set.contains(&sid) {
                    continue;
                }
                let before: Vec<&[f64]> = s.iter().map(|&v| nodes[v].as_slice()).collect();
                let after: Vec<&[f64]> = s.iter().map(|&v| positions[v].as_slice()).collect();
                let reason = if is_degenerate(&after) {
                    Some(DropReason::Degenerate)
                } else if signed_volume(&before).signum() != signed_volume(&after).signum() {
                    Some(DropReason::OrientationFlip)
                } else {
                    let c = centroid(&after);
                    if set.contains(&c)? {
                        None
                    } else {
                        Some(DropReason::BarycenterOutside)
                    }
                };
                match reason {
                    None => {
                        kept.push(s.clone());
                        report.kept_snapped += 1;
                    }
                    Some(reason) => report.dropped.push(DroppedSimplex { source: sid, reason }),
                }
            }
        }
    }
    if kept.is_empty() {
        return Err(TriangulateError::Empty);
    }
    report.dropped.sort_by_key(|d| d.source);

    let mut family_reverted = 0;
    for fam in &opts.family {
        let fam_leaves: Vec<BoundaryFn> = fam
            .leaves()
            .iter()
            .map(|c| BoundaryFn::new(c.poly.clone()))
            .collect();
        family_reverted += snap_family(&kept, &mut positions, &fam_leaves, &leaves, grid.h)?;
    }
    report.family_snaps_reverted = family_reverted;

    build_bundle(set, &opts.family, &positions, kept, report)
}

fn centroid(pts: &[&[f64]]) -> Vec<f64> {
    let mut c = vec![0.0; pts[0].len()];
    for p in pts {
        for (a, b) in c.iter_mut().zip(p.iter()) {
            *a += b;
        }
    }
    c.iter_mut().for_each(|a| *a /= pts.len() as f64);
    c
}

fn snap_vertex(
    x: &[f64],
    leaf_ids: &BTreeSet<usize>,
    leaves: &[BoundaryFn],
    h: f64,
    guard: f64,
) -> Option<(Vec<f64>, usize)> {
    let fs: Vec<&BoundaryFn> = leaf_ids.iter().map(|&i| &leaves[i]).collect();
    let within = |r: &(Vec<f64>, usize)| dist(&r.0, x) <= guard;
    if fs.is_empty() {
        return None;
    }
    if fs.len() >= 2 {
        if let Some(r) = project_corner(&fs, x, h).filter(within) {
            return Some(r);
        }
    }
    // nearest single boundary first
    let mut order: Vec<&BoundaryFn> = fs.clone();
    order.sort_by(|a, b| a.distance_estimate(x).total_cmp(&b.distance_estimate(x)));
    order
        .into_iter()
        .find_map(|f| f.project(x, h).filter(within))
}

/// Moves kept vertices onto family boundaries that cut through their
/// simplices, reverting any move that would invert or flatten a simplex.
/// Returns the number of reverted moves.
fn snap_family(
    kept: &[Vec<usize>],
    positions: &mut [Vec<f64>],
    fam: &[BoundaryFn],
    main: &[BoundaryFn],
    h: f64,
) -> Result<usize, TriangulateError> {
    let mut incident: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in kept.iter().enumerate() {
        for &v in s {
            incident.entry(v).or_default().push(i);
        }
    }
    let mut targets: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for s in kept {
        for (li, f) in fam.iter().enumerate() {
            let vals: Vec<f64> = s.iter().map(|&v| f.value(&positions[v])).collect();
            let pos = vals.iter().any(|&v| v > SNAP_TOL);
            let neg = vals.iter().any(|&v| v < -SNAP_TOL);
            if !(pos && neg) {
                continue;
            }
            // the vertices on the smaller side move; ties go to the side
            // closer to the zero set
            let side = |positive: bool| -> (usize, f64) {
                s.iter()
                    .zip(&vals)
                    .filter(|(_, &x)| if positive { x > SNAP_TOL } else { x < -SNAP_TOL })
                    .fold((0, 0.0f64), |(n, d), (&v, _)| (n + 1, d.max(f.distance_estimate(&positions[v]))))
            };
            let (np, dp) = side(true);
            let (nn, dn) = side(false);
            let move_positive = np < nn || (np == nn && dp <= dn);
            for (&v, &x) in s.iter().zip(&vals) {
                if (move_positive && x > SNAP_TOL) || (!move_positive && x < -SNAP_TOL) {
                    targets.entry(v).or_default().insert(li);
                }
            }
        }
    }
    let mut reverted = 0;
    for (v, lis) in targets {
        let x = positions[v].clone();
        // keep the vertex on any main boundary it already sits on
        let mut fs: Vec<&BoundaryFn> = main.iter().filter(|f| f.value(&x).abs() <= 1e-9).collect();
        fs.extend(lis.iter().map(|&i| &fam[i]));
        let res = if fs.len() == 1 {
            fs[0].project(&x, h)
        } else {
            project_corner(&fs, &x, h)
        };
        let Some((y, _)) = res.filter(|r| dist(&r.0, &x) <= h) else {
            reverted += 1;
            continue;
        };
        let ok = incident[&v].iter().all(|&si| {
            let s = &kept[si];
            let before: Vec<&[f64]> = s.iter().map(|&u| positions[u].as_slice()).collect();
            let sb = signed_volume(&before);
            let after: Vec<Vec<f64>> = s
                .iter()
                .map(|&u| if u == v { y.clone() } else { positions[u].clone() })
                .collect();
            let after_ref: Vec<&[f64]> = after.iter().map(|p| p.as_slice()).collect();
            !is_degenerate(&after_ref) && signed_volume(&after_ref).signum() == sb.signum()
        });
        if ok {
            positions[v] = y;
        } else {
            reverted += 1;
        }
    }
    Ok(reverted)
}

/// Assembles a bundle from kept simplices (node-index lists): compacts the
/// vertex numbering in ascending node order and attaches affine charts.
pub(crate) fn build_bundle(
    set: &SaSet,
    family: &[SaSet],
    positions: &[Vec<f64>],
    kept: Vec<Vec<usize>>,
    mut report: TriangulationReport,
) -> Result<TriangulationBundle, TriangulateError> {
    let used: BTreeSet<usize> = kept.iter().flatten().copied().collect();
    let renumber: BTreeMap<usize, usize> = used.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let vertices: Vec<Vec<f64>> = used.iter().map(|&v| positions[v].clone()).collect();
    let simplices: Vec<Vec<usize>> = kept
        .iter()
        .map(|s| s.iter().map(|v| renumber[v]).collect())
        .collect();
    let complex = SimplicialComplex::new(set.dim(), vertices, &simplices)?;
    let charts = affine_charts(&complex, set, family);
    report.max_diameter = max_diameter(&complex);
    let parents = Vec::new();
    Ok(TriangulationBundle {
        complex,
        charts,
        set: set.clone(),
        family: family.to_vec(),
        report,
        parents,
    })
}

pub(crate) fn max_diameter(k: &SimplicialComplex) -> f64 {
    let p = k.dim();
    (0..k.num_simplices(p))
        .map(|i| simplex_measure(&k.points_of(p, i)).1)
        .fold(0.0, f64::max)
}

/// Affine charts for every top simplex, with facet tags and strata.
pub(crate) fn affine_charts(k: &SimplicialComplex, set: &SaSet, family: &[SaSet]) -> Vec<RealizationChart> {
    let p = k.dim();
    let polys: Vec<BoundaryFn> = boundary_polys(set, family).into_iter().map(BoundaryFn::new).collect();
    let main = set.leaves().len();
    (0..k.num_simplices(p))
        .into_par_iter()
        .map(|id| {
            let verts: Vec<Vec<f64>> = k.points_of(p, id).iter().map(|v| v.to_vec()).collect();
            let mut chart = RealizationChart::affine(id, verts);
            let facets = if p > 0 { k.facets(p, id) } else { Vec::new() };
            for skip in 0..=p {
                // the set's own boundary can only run along boundary facets;
                // family boundaries may cut through the interior
                let on_boundary = p > 0 && k.cofaces(p - 1, facets[skip]).len() == 1;
                chart.facet_tags[skip] = polys
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i >= main || on_boundary)
                    .filter(|(_, f)| {
                        chart
                            .images
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != skip)
                            .all(|(_, v)| f.value(v).abs() <= 1e-9)
                    })
                    .map(|(i, _)| i)
                    .collect();
            }
            let c = k.barycenter(p, id);
            chart.strata = family
                .iter()
                .enumerate()
                .filter(|(_, f)| f.contains(&c).unwrap_or(false))
                .map(|(j, _)| j)
                .collect();
            chart
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Polynomial;
    use crate::saset::{BoundingBox, Formula, Relation};

    fn set(dim: usize, leaves: &[(&str, Relation)], lo: Vec<f64>, hi: Vec<f64>) -> SaSet {
        let f = Formula::And(
            leaves
                .iter()
                .map(|(p, r)| Formula::leaf(Polynomial::parse(p, dim).unwrap(), *r).unwrap())
                .collect(),
        );
        SaSet::new(dim, f)
            .unwrap()
            .with_box(BoundingBox::new(lo, hi).unwrap())
            .unwrap()
    }

    #[test]
    fn standard_triangle_depth_zero() {
        let s = set(
            2,
            &[("x", Relation::Ge), ("y", Relation::Ge), ("1 - x - y", Relation::Ge)],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        );
        let b = triangulate(&s, 0).unwrap();
        assert_eq!(b.complex.num_simplices(2), 1);
        assert!((b.mesh_volume() - 0.5).abs() < 1e-15);
        assert!(b.charts[0].affine);
    }

    #[test]
    fn unit_interval_depth_three() {
        let s = set(1, &[("x", Relation::Ge), ("1 - x", Relation::Ge)], vec![0.0], vec![1.0]);
        let b = triangulate(&s, 3).unwrap();
        assert_eq!(b.complex.num_simplices(1), 8);
        let xs: Vec<f64> = b.complex.vertices().iter().map(|v| v[0]).collect();
        assert_eq!(xs.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }

    #[test]
    fn disk_area_converges() {
        let s = set(2, &[("x^2 + y^2 - 1", Relation::Le)], vec![-1.0, -1.0], vec![1.0, 1.0]);
        let mut last = f64::INFINITY;
        for depth in 2..=5 {
            let b = triangulate(&s, depth).unwrap();
            let err = (b.mesh_volume() - std::f64::consts::PI).abs();
            assert!(err < 4.0 * 0.5f64.powi(depth as i32), "depth {depth}: {err}");
            assert!(err < last);
            last = err;
            assert!(b.vertex_mismatch() < 1e-9);
            assert!(b.shared_face_mismatch() < 1e-8);
        }
    }

    #[test]
    fn kuhn_grid_is_conforming_in_3d() {
        let s = set(
            3,
            &[("x^2 + y^2 + z^2 - 1", Relation::Le)],
            vec![-1.0, -1.0, -1.0],
            vec![1.0, 1.0, 1.0],
        );
        let b = triangulate(&s, 2).unwrap();
        for f in 0..b.complex.num_simplices(2) {
            assert!(b.complex.cofaces(2, f).len() <= 2);
        }
        let vol = b.mesh_volume();
        assert!((vol - 4.0 / 3.0 * std::f64::consts::PI).abs() < 0.5, "{vol}");
    }

    #[test]
    fn deterministic() {
        let s = set(2, &[("x^2 + y^2 - 1", Relation::Le)], vec![-1.0, -1.0], vec![1.0, 1.0]);
        let a = triangulate(&s, 4).unwrap();
        let b = triangulate(&s, 4).unwrap();
        assert_eq!(a.complex, b.complex);
    }

    #[test]
    fn family_boundary_is_followed() {
        let s = set(2, &[("x^2 + y^2 - 1", Relation::Le)], vec![-1.0, -1.0], vec![1.0, 1.0]);
        let half = set(2, &[("x - 1/3", Relation::Le)], vec![-1.0, -1.0], vec![1.0, 1.0]);
        let b = triangulate_with(
            &s,
            &TriangulateOptions {
                depth: 3,
                family: vec![half],
                ..Default::default()
            },
        )
        .unwrap();
        // no kept simplex straddles x = 1/3 any more
        for c in &b.charts {
            let vals: Vec<f64> = c.images.iter().map(|v| v[0] - 1.0 / 3.0).collect();
            let pos = vals.iter().any(|&v| v > 1e-9);
            let neg = vals.iter().any(|&v| v < -1e-9);
            assert!(!(pos && neg) || b.report.family_snaps_reverted > 0);
        }
        assert!(b.charts.iter().any(|c| c.strata == vec![0]));
        assert!(b.charts.iter().any(|c| c.strata.is_empty()));
    }
}
