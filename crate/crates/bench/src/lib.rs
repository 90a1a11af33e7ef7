//! Shared fixtures for the benchmarks.

use semialg::algebra::{DifferentialForm, Polynomial};
use semialg::saset::{BoundingBox, Formula, Relation, SaSet};

pub fn unit_disk() -> SaSet {
    let p = Polynomial::parse("x^2 + y^2 - 1", 2).expect("valid polynomial");
    SaSet::new(2, Formula::leaf(p, Relation::Le).expect("valid leaf"))
        .and_then(|s| s.with_box(BoundingBox::new(vec![-1.0, -1.0], vec![1.0, 1.0])?))
        .expect("valid set")
}

pub fn area_form() -> DifferentialForm {
    DifferentialForm::from_terms(2, 2, [(Polynomial::from_int(2, 1), vec![0, 1])]).expect("valid form")
}

pub fn x_dy() -> DifferentialForm {
    DifferentialForm::from_terms(1, 2, [(Polynomial::var(2, 0), vec![1])]).expect("valid form")
}
