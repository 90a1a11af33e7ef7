//! The canonical examples: `√t` at 0, the cusp `s ↦ (|s|^{2/3}, s)` and the
//! fold `(x, u) ↦ (x, |u|)` along the x-axis.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{
    certify_c1, default_schedule, estimate_growth_exponent_seeded, panel_beat, select_eta, C1Report, CertifyOptions,
    EtaProfile, GrowthEstimate, PanelBeatError, TubeChart, DEFAULT_T0,
};
use crate::algebra::SmoothMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    Sqrt,
    Cusp,
    Abs,
}

impl Example {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sqrt" => Some(Self::Sqrt),
            "cusp" => Some(Self::Cusp),
            "abs" => Some(Self::Abs),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sqrt => "sqrt",
            Self::Cusp => "cusp",
            Self::Abs => "abs",
        }
    }

    /// The map and the tube around its singular stratum.
    pub fn setup(self) -> (SmoothMap, TubeChart) {
        match self {
            Self::Sqrt => (
                SmoothMap::new(1, 1, |t| vec![t[0].sqrt()])
                    .with_domain(|t| t[0] >= 0.0)
                    .with_jacobian(|t| Some(DMatrix::from_element(1, 1, 0.5 / t[0].sqrt()))),
                TubeChart::point(vec![0.0], 1.0).expect("valid tube"),
            ),
            Self::Cusp => (
                SmoothMap::new(1, 2, |s| vec![s[0].abs().powf(2.0 / 3.0), s[0]]).with_jacobian(|s| {
                    let d = if s[0] == 0.0 {
                        f64::INFINITY
                    } else {
                        2.0 / 3.0 * s[0].signum() * s[0].abs().powf(-1.0 / 3.0)
                    };
                    Some(DMatrix::from_row_slice(2, 1, &[d, 1.0]))
                }),
                TubeChart::point(vec![0.0], 1.0).expect("valid tube"),
            ),
            Self::Abs => (
                SmoothMap::new(2, 2, |y| vec![y[0], y[1].abs()]).with_jacobian(|y| {
                    let s = if y[1] > 0.0 {
                        1.0
                    } else if y[1] < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    Some(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, s]))
                }),
                TubeChart::affine(vec![0.0, 0.0], vec![vec![1.0, 0.0]], vec![(-1.0, 1.0)], 1.0)
                    .expect("valid tube"),
            ),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DemoOptions {
    pub margin: f64,
    /// Use this exponent instead of the one selected from the growth fit.
    pub r: Option<f64>,
    pub certify: CertifyOptions,
    pub schedule: Vec<f64>,
}

impl Default for DemoOptions {
    fn default() -> Self {
        Self {
            margin: 0.5,
            r: None,
            certify: CertifyOptions::default(),
            schedule: default_schedule(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoReport {
    pub example: Example,
    pub estimate: GrowthEstimate,
    pub eta: EtaProfile,
    pub beaten: C1Report,
    pub unbeaten: C1Report,
}

pub fn run_demo(example: Example, opts: &DemoOptions) -> Result<DemoReport, PanelBeatError> {
    let (f, tube) = example.setup();
    let estimate = estimate_growth_exponent_seeded(&f, &tube, &opts.schedule, opts.certify.seed)?;
    let eta = match opts.r {
        Some(r) => EtaProfile::new(r, DEFAULT_T0)?,
        None => select_eta(&estimate, opts.margin)?,
    };
    let g = panel_beat(&f, &tube, &eta)?;
    Ok(DemoReport {
        example,
        beaten: certify_c1(&g, &tube, &opts.certify)?,
        unbeaten: certify_c1(&f, &tube, &opts.certify)?,
        estimate,
        eta,
    })
}
