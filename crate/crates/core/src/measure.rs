//! Box-counting estimates `v_n = (Σ c_i) δ_n^d` of the d-dimensional size of
//! a compact set, with `δ_n = √m L / n` the diameter of a grid cell.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::Interval;
use crate::saset::{BoxClass, SaSet, SetError};

/// Extra bisection levels used to confirm or refute a mixed cell.
pub const CONFIRM_LEVELS: u32 = 2;
/// Sample points per axis (including the cell faces) for the membership probe.
pub const CONFIRM_SAMPLES: usize = 5;
/// A value above this multiple of every earlier value breaks boundedness.
pub const BOUND_FACTOR: f64 = 1.5;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error(transparent)]
    Set(#[from] SetError),
    #[error("measure dimension {d} exceeds ambient dimension {m}")]
    Dimension { d: usize, m: usize },
    #[error("grid resolution must be positive")]
    ZeroResolution,
    #[error("grid resolutions must be strictly increasing: {0:?}")]
    NotIncreasing(Vec<usize>),
    #[error("grid has {0} cells, too many to sweep")]
    TooManyCells(u128),
}

/// Counts at one resolution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCount {
    pub n: usize,
    /// Cells certainly meeting the set.
    pub optimistic: u64,
    /// Cells not proven disjoint from it.
    pub pessimistic: u64,
    /// Cells classified inside the set outright.
    pub inside: u64,
    /// `√m L / n`
    pub delta: f64,
    pub v_optimistic: f64,
    pub v_pessimistic: f64,
    /// `v_pessimistic / m^{d/2}`, which tends to the Lebesgue volume when d = m.
    pub v_normalized: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridReport {
    pub m: usize,
    pub d: usize,
    /// Side of the cube `[lo, lo + L]^m` that is gridded.
    pub side: f64,
    pub origin: Vec<f64>,
    pub rows: Vec<GridCount>,
    pub sup_optimistic: f64,
    pub sup_pessimistic: f64,
    /// Resolutions at which `v_pessimistic` jumped above the running bound.
    pub violations: Vec<usize>,
    pub bounded: bool,
}

/// The cube that is gridded: origin at the box's low corner, side equal to
/// the longest box edge.
fn grid_cube(set: &SaSet) -> Result<(Vec<f64>, f64), MeasureError> {
    let b = set.require_box()?;
    let side = b
        .lo
        .iter()
        .zip(&b.hi)
        .map(|(l, h)| h - l)
        .fold(0.0, f64::max);
    Ok((b.lo.clone(), side))
}

/// `δ_n^d`-scale constant `(√m L)^d`, assembled so that integer powers of
/// `m` stay exact.
fn diameter_power(m: usize, d: usize, side: f64) -> f64 {
    let mf = m as f64;
    let mut c = mf.powi((d / 2) as i32);
    if d % 2 == 1 {
        c *= mf.sqrt();
    }
    c * side.powi(d as i32)
}

/// Cell counts and `v_n` for one resolution.
pub fn grid_measure(set: &SaSet, d: usize, n: usize) -> Result<GridCount, MeasureError> {
    let m = set.dim();
    if d > m {
        return Err(MeasureError::Dimension { d, m });
    }
    if n == 0 {
        return Err(MeasureError::ZeroResolution);
    }
    let total = (n as u128).pow(m as u32);
    if total > 1 << 32 {
        return Err(MeasureError::TooManyCells(total));
    }
    let (origin, side) = grid_cube(set)?;
    let cells = total as u64;
    let counts = (0..cells)
        .into_par_iter()
        .map(|idx| {
            let mut rest = idx;
            let cell: Vec<Interval> = (0..m)
                .map(|k| {
                    let i = (rest % n as u64) as f64;
                    rest /= n as u64;
                    let lo = origin[k] + side * i / n as f64;
                    let hi = origin[k] + side * (i + 1.0) / n as f64;
                    Interval::new(lo, hi)
                })
                .collect();
            classify_cell(set, &cell)
        })
        .try_fold(
            || [0u64; 3],
            |mut acc, c| -> Result<[u64; 3], SetError> {
                match c? {
                    CellClass::Inside => {
                        acc[0] += 1;
                        acc[1] += 1;
                        acc[2] += 1;
                    }
                    CellClass::Confirmed => {
                        acc[0] += 1;
                        acc[1] += 1;
                    }
                    CellClass::Unresolved => acc[1] += 1,
                    CellClass::Outside => {}
                }
                Ok(acc)
            },
        )
        .try_reduce(|| [0u64; 3], |a, b| Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2]]))?;

    let nd = (n as f64).powi(d as i32);
    let dp = diameter_power(m, d, side);
    let v = |count: u64| (count as f64 / nd) * dp;
    let norm = (m as f64).powf(d as f64 / 2.0);
    Ok(GridCount {
        n,
        optimistic: counts[0],
        pessimistic: counts[1],
        inside: counts[2],
        delta: (m as f64).sqrt() * side / n as f64,
        v_optimistic: v(counts[0]),
        v_pessimistic: v(counts[1]),
        v_normalized: v(counts[1]) / norm,
    })
}

enum CellClass {
    Inside,
    Confirmed,
    Unresolved,
    Outside,
}

fn classify_cell(set: &SaSet, cell: &[Interval]) -> Result<CellClass, SetError> {
    match set.classify_box(cell)? {
        BoxClass::AllIn => return Ok(CellClass::Inside),
        BoxClass::AllOut => return Ok(CellClass::Outside),
        BoxClass::Mixed => {}
    }
    match bisect(set, cell, CONFIRM_LEVELS)? {
        Some(true) => return Ok(CellClass::Confirmed),
        Some(false) => return Ok(CellClass::Outside),
        None => {}
    }
    if sample_hits(set, cell)? {
        Ok(CellClass::Confirmed)
    } else {
        Ok(CellClass::Unresolved)
    }
}

/// `Some(true)` if some sub-box is inside, `Some(false)` if all are outside.
fn bisect(set: &SaSet, cell: &[Interval], levels: u32) -> Result<Option<bool>, SetError> {
    if levels == 0 {
        return Ok(None);
    }
    let m = cell.len();
    let mut all_out = true;
    for corner in 0..(1usize << m) {
        let sub: Vec<Interval> = cell
            .iter()
            .enumerate()
            .map(|(k, iv)| {
                let mid = iv.mid();
                if corner >> k & 1 == 0 {
                    Interval::new(iv.lo, mid)
                } else {
                    Interval::new(mid, iv.hi)
                }
            })
            .collect();
        match set.classify_box(&sub)? {
            BoxClass::AllIn => return Ok(Some(true)),
            BoxClass::AllOut => {}
            BoxClass::Mixed => match bisect(set, &sub, levels - 1)? {
                Some(true) => return Ok(Some(true)),
                Some(false) => {}
                None => all_out = false,
            },
        }
    }
    Ok(all_out.then_some(false))
}

fn sample_hits(set: &SaSet, cell: &[Interval]) -> Result<bool, SetError> {
    let m = cell.len();
    let k = CONFIRM_SAMPLES;
    let total = k.pow(m as u32);
    let mut x = vec![0.0; m];
    for idx in 0..total {
        let mut rest = idx;
        for (a, iv) in cell.iter().enumerate() {
            let j = rest % k;
            rest /= k;
            x[a] = if j == k - 1 {
                iv.hi
            } else {
                iv.lo + (iv.hi - iv.lo) * j as f64 / (k - 1) as f64
            };
        }
        if set.contains(&x)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// `grid_measure` over increasing resolutions, with the running-bound check.
pub fn grid_measure_sequence(set: &SaSet, d: usize, ns: &[usize]) -> Result<GridReport, MeasureError> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MeasureError::NotIncreasing(ns.to_vec()));
    }
    let (origin, side) = grid_cube(set)?;
    let mut rows = Vec::with_capacity(ns.len());
    let mut violations = Vec::new();
    let mut sup_o: f64 = 0.0;
    let mut sup_p: f64 = 0.0;
    for &n in ns {
        let row = grid_measure(set, d, n)?;
        if !rows.is_empty() && row.v_pessimistic > BOUND_FACTOR * sup_p {
            violations.push(n);
        }
        sup_o = sup_o.max(row.v_optimistic);
        sup_p = sup_p.max(row.v_pessimistic);
        rows.push(row);
    }
    Ok(GridReport {
        m: set.dim(),
        d,
        side,
        origin,
        rows,
        sup_optimistic: sup_o,
        sup_pessimistic: sup_p,
        bounded: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Polynomial;
    use crate::saset::{BoundingBox, Formula, Relation};

    fn set(m: usize, leaves: &[(&str, Relation)], lo: Vec<f64>, hi: Vec<f64>) -> SaSet {
        let f = Formula::and(
            leaves
                .iter()
                .map(|(p, r)| Formula::leaf(Polynomial::parse(p, m).unwrap(), *r).unwrap())
                .collect(),
        );
        SaSet::new(m, f).unwrap().with_box(BoundingBox::new(lo, hi).unwrap()).unwrap()
    }

    #[test]
    fn unit_square_is_exactly_two() {
        let s = set(
            2,
            &[("x", Relation::Ge), ("1 - x", Relation::Ge), ("y", Relation::Ge), ("1 - y", Relation::Ge)],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        );
        for n in [1, 3, 7, 10, 64] {
            let g = grid_measure(&s, 2, n).unwrap();
            assert_eq!(g.pessimistic as usize, n * n);
            assert_eq!(g.v_pessimistic, 2.0);
            assert_eq!(g.v_optimistic, 2.0);
        }
    }

    #[test]
    fn segment_is_sqrt2_l() {
        let l = 3.0;
        let s = set(
            2,
            &[("y", Relation::Eq), ("x", Relation::Ge), ("3 - x", Relation::Ge)],
            vec![0.0, 0.0],
            vec![l, l],
        );
        for n in [1, 5, 16, 33] {
            let g = grid_measure(&s, 1, n).unwrap();
            assert_eq!(g.optimistic as usize, n);
            assert_eq!(g.pessimistic as usize, n);
            assert_eq!(g.v_pessimistic, 2f64.sqrt() * l);
        }
    }

    #[test]
    fn empty_set_counts_nothing() {
        let s = set(2, &[("x^2 + y^2 + 1", Relation::Le)], vec![-1.0, -1.0], vec![1.0, 1.0]);
        let g = grid_measure(&s, 2, 8).unwrap();
        assert_eq!((g.pessimistic, g.v_pessimistic), (0, 0.0));
    }

    #[test]
    fn disk_sequence_approaches_two_pi() {
        let s = set(2, &[("x^2 + y^2 - 1", Relation::Le)], vec![-1.0, -1.0], vec![1.0, 1.0]);
        let r = grid_measure_sequence(&s, 2, &[8, 16, 32, 64]).unwrap();
        assert!(r.bounded);
        let last = r.rows.last().unwrap();
        let target = 2.0 * std::f64::consts::PI;
        assert!((last.v_pessimistic - target).abs() < 0.1 * target, "{last:?}");
        assert!(r.rows.iter().all(|g| g.optimistic <= g.pessimistic));
    }

    #[test]
    fn rejects_bad_input() {
        let s = set(2, &[("x^2 + y^2 - 1", Relation::Le)], vec![-1.0, -1.0], vec![1.0, 1.0]);
        assert!(matches!(grid_measure(&s, 3, 4), Err(MeasureError::Dimension { .. })));
        assert!(matches!(grid_measure_sequence(&s, 2, &[8, 4]), Err(MeasureError::NotIncreasing(_))));
    }
}
