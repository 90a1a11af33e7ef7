use serde::{Deserialize, Serialize};

use super::{BoundingBox, Formula, Relation, SaSet, SetError};
use crate::algebra::Polynomial;

/// JSON form of a set:
///
/// ```json
/// {"dim": 2, "box": [[-1, 1], [-1, 1]],
///  "formula": {"and": [{"poly": "x^2 + y^2 - 1", "rel": "<=0"}]}}
/// ```
///
/// `family` lists extra formulas whose boundaries the triangulation should
/// respect.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<u32>,
    pub dim: usize,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Vec<[f64; 2]>>,
    pub formula: FormulaDocument,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub family: Vec<FormulaDocument>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FormulaDocument {
    And(AndDoc),
    Or(OrDoc),
    Not(NotDoc),
    Leaf(LeafDoc),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AndDoc {
    pub and: Vec<FormulaDocument>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrDoc {
    pub or: Vec<FormulaDocument>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotDoc {
    pub not: Box<FormulaDocument>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafDoc {
    pub poly: String,
    pub rel: String,
}

impl FormulaDocument {
    pub fn to_formula(&self, dim: usize) -> Result<Formula, SetError> {
        self.build(dim, "formula")
    }

    fn build(&self, dim: usize, path: &str) -> Result<Formula, SetError> {
        Ok(match self {
            FormulaDocument::And(d) => Formula::And(
                d.and
                    .iter()
                    .enumerate()
                    .map(|(i, f)| f.build(dim, &format!("{path}.and[{i}]")))
                    .collect::<Result<_, _>>()?,
            ),
            FormulaDocument::Or(d) => Formula::Or(
                d.or.iter()
                    .enumerate()
                    .map(|(i, f)| f.build(dim, &format!("{path}.or[{i}]")))
                    .collect::<Result<_, _>>()?,
            ),
            FormulaDocument::Not(d) => Formula::not(d.not.build(dim, &format!("{path}.not"))?),
            FormulaDocument::Leaf(d) => {
                let poly = Polynomial::parse(&d.poly, dim)
                    .map_err(|e| SetError::Document(format!("{path}.poly: {e}")))?;
                let rel = Relation::parse(&d.rel).ok_or_else(|| {
                    SetError::Document(format!("{path}.rel: unknown relation `{}`", d.rel))
                })?;
                Formula::leaf(poly, rel)
                    .map_err(|e| SetError::Document(format!("{path}: {e}")))?
            }
        })
    }

    pub fn from_formula(f: &Formula) -> Self {
        match f {
            Formula::Leaf(c) => FormulaDocument::Leaf(LeafDoc {
                poly: c.poly.to_string(),
                rel: c.rel.as_str().to_string(),
            }),
            Formula::And(v) => FormulaDocument::And(AndDoc {
                and: v.iter().map(Self::from_formula).collect(),
            }),
            Formula::Or(v) => FormulaDocument::Or(OrDoc {
                or: v.iter().map(Self::from_formula).collect(),
            }),
            Formula::Not(g) => FormulaDocument::Not(NotDoc {
                not: Box::new(Self::from_formula(g)),
            }),
        }
    }
}

impl SetDocument {
    pub fn to_set(&self) -> Result<SaSet, SetError> {
        let formula = self.formula.to_formula(self.dim)?;
        let set = SaSet::new(self.dim, formula)?;
        match &self.bbox {
            Some(b) => {
                if b.len() != self.dim {
                    return Err(SetError::Document(format!(
                        "box has {} intervals for a set in R^{}",
                        b.len(),
                        self.dim
                    )));
                }
                let bbox = BoundingBox::new(b.iter().map(|r| r[0]).collect(), b.iter().map(|r| r[1]).collect())?;
                set.with_box(bbox)
            }
            None => Ok(set),
        }
    }

    /// Sets of the compatibility family, sharing the main set's box.
    pub fn family_sets(&self) -> Result<Vec<SaSet>, SetError> {
        self.family
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let formula = f
                    .build(self.dim, &format!("family[{i}]"))?;
                let s = SaSet::new(self.dim, formula)?;
                match &self.bbox {
                    Some(b) => s.with_box(BoundingBox::new(
                        b.iter().map(|r| r[0]).collect(),
                        b.iter().map(|r| r[1]).collect(),
                    )?),
                    None => Ok(s),
                }
            })
            .collect()
    }

    pub fn from_set(set: &SaSet) -> Self {
        Self {
            schema: Some(1),
            dim: set.dim(),
            bbox: set
                .bbox()
                .map(|b| b.lo.iter().zip(&b.hi).map(|(&a, &c)| [a, c]).collect()),
            formula: FormulaDocument::from_formula(set.formula()),
            family: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, SetError> {
        serde_json::from_str(text).map_err(|e| SetError::Document(e.to_string()))
    }
}
